//! Differentiable layers with hand-derived backward passes.
//!
//! Layers cache what their backward pass needs when `keep` is set; eval
//! forwards skip the caches. All randomness (init, dropout) flows from
//! seeded generators owned by the caller or the layer.

use crate::learn::{ParamKind, Scalar};
use ndarray::{s, Array1, Array2, ArrayD, Axis, Ix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Named tensor with its gradient.
#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub trainable: bool,
    pub value: ArrayD<T>,
    pub grad: ArrayD<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, kind: ParamKind, value: ArrayD<T>) -> Param<T> {
        let grad = ArrayD::zeros(value.raw_dim());
        Param {
            name: name.into(),
            kind,
            trainable: true,
            value,
            grad,
        }
    }

    pub fn buffer(name: impl Into<String>, value: ArrayD<T>) -> Param<T> {
        let mut p = Param::new(name, ParamKind::Norm, value);
        p.trainable = false;
        p
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

pub fn normal_init<T: Scalar>(shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> ArrayD<T> {
    let dist = StandardNormal;
    ArrayD::from_shape_fn(shape, |_| {
        let v: f64 = dist.sample(rng);
        T::from_f64(v * std)
    })
}

/// Fully connected layer; weight is `[in, out]`.
#[derive(Clone, Debug)]
pub struct Linear<T: Scalar> {
    pub w: Param<T>,
    pub b: Param<T>,
    cache: Option<Array2<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(name: &str, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Linear<T> {
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        Linear {
            w: Param::new(
                format!("{name}.w"),
                ParamKind::Weight,
                normal_init(&[fan_in, fan_out], std, rng),
            ),
            b: Param::new(
                format!("{name}.b"),
                ParamKind::Bias,
                ArrayD::zeros(vec![fan_out]),
            ),
            cache: None,
        }
    }

    fn w2(&self) -> ndarray::ArrayView2<'_, T> {
        self.w.value.view().into_dimensionality::<Ix2>().unwrap()
    }

    pub fn forward(&mut self, x: &Array2<T>, keep: bool) -> Array2<T> {
        let mut y = x.dot(&self.w2());
        let b = self.b.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        y += &b;
        if keep {
            self.cache = Some(x.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let dx = dy.dot(&self.w2().t());
        self.accumulate(dy);
        dx
    }

    /// Backward for the first layer of a network, where the input gradient
    /// is never used.
    pub fn backward_no_dx(&mut self, dy: &Array2<T>) {
        self.accumulate(dy);
    }

    fn accumulate(&mut self, dy: &Array2<T>) {
        let x = self.cache.take().expect("forward(keep=true) before backward");
        let dw = x.t().dot(dy);
        self.w.grad.assign(&dw.into_dyn());
        self.b.grad.assign(&dy.sum_axis(Axis(0)).into_dyn());
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

/// Layer normalization over the last axis of `[n, d]`.
#[derive(Clone, Debug)]
pub struct LayerNorm<T: Scalar> {
    pub g: Param<T>,
    pub b: Param<T>,
    eps: T,
    cache: Option<(Array2<T>, Array1<T>)>,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn new(name: &str, dim: usize) -> LayerNorm<T> {
        LayerNorm {
            g: Param::new(
                format!("{name}.g"),
                ParamKind::Norm,
                ArrayD::from_elem(vec![dim], T::one()),
            ),
            b: Param::new(format!("{name}.b"), ParamKind::Norm, ArrayD::zeros(vec![dim])),
            eps: T::from_f64(1e-5),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array2<T>, keep: bool) -> Array2<T> {
        let d = T::from_f64(x.ncols() as f64);
        let mut xhat = x.clone();
        let mut inv_std = Array1::zeros(x.nrows());
        for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.sum() / d;
            let mut var = T::zero();
            for v in row.iter() {
                let c = *v - mean;
                var += c * c;
            }
            var = var / d;
            let istd = (var + self.eps).sqrt().recip();
            for v in row.iter_mut() {
                *v = (*v - mean) * istd;
            }
            *inv = istd;
        }
        let g = self.g.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let b = self.b.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let mut y = xhat.clone();
        for mut row in y.rows_mut() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = *v * g[k] + b[k];
            }
        }
        if keep {
            self.cache = Some((xhat, inv_std));
        }
        y
    }

    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let (xhat, inv_std) = self.cache.take().expect("no layernorm cache");
        let d = T::from_f64(dy.ncols() as f64);
        let g = self.g.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();

        let mut dg = Array1::<T>::zeros(dy.ncols());
        let mut db = Array1::<T>::zeros(dy.ncols());
        let mut dx = Array2::zeros(dy.raw_dim());
        for i in 0..dy.nrows() {
            let dyr = dy.row(i);
            let xr = xhat.row(i);
            let mut mean_dxhat = T::zero();
            let mut mean_dxhat_x = T::zero();
            for k in 0..dy.ncols() {
                let dxh = dyr[k] * g[k];
                mean_dxhat += dxh;
                mean_dxhat_x += dxh * xr[k];
                dg[k] += dyr[k] * xr[k];
                db[k] += dyr[k];
            }
            mean_dxhat = mean_dxhat / d;
            mean_dxhat_x = mean_dxhat_x / d;
            let istd = inv_std[i];
            for k in 0..dy.ncols() {
                let dxh = dyr[k] * g[k];
                dx[[i, k]] = (dxh - mean_dxhat - xr[k] * mean_dxhat_x) * istd;
            }
        }
        self.g.grad.assign(&dg.into_dyn());
        self.b.grad.assign(&db.into_dyn());
        dx
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.g);
        f(&mut self.b);
    }
}

/// GELU with the tanh approximation.
#[derive(Clone, Debug, Default)]
pub struct Gelu<T> {
    cache: Option<Array2<T>>,
}

impl<T: Scalar> Gelu<T> {
    pub fn new() -> Gelu<T> {
        Gelu { cache: None }
    }

    pub fn forward(&mut self, x: &Array2<T>, keep: bool) -> Array2<T> {
        let y = x.mapv(gelu_scalar);
        if keep {
            self.cache = Some(x.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let x = self.cache.take().expect("no gelu cache");
        let mut dx = x.mapv(gelu_grad_scalar);
        dx *= dy;
        dx
    }
}

fn gelu_scalar<T: Scalar>(x: T) -> T {
    let c = T::from_f64(0.797_884_560_802_865_4); // sqrt(2/pi)
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    let inner = c * (x + k * x * x * x);
    half * x * (T::one() + inner.tanh())
}

fn gelu_grad_scalar<T: Scalar>(x: T) -> T {
    let c = T::from_f64(0.797_884_560_802_865_4);
    let k = T::from_f64(0.044715);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    let sech2 = T::one() - t * t;
    half * (T::one() + t) + half * x * sech2 * c * (T::one() + three * k * x * x)
}

/// Inverted dropout with a private deterministic stream.
#[derive(Clone, Debug)]
pub struct Dropout<T> {
    pub p: f64,
    rng: ChaCha8Rng,
    mask: Option<Array2<T>>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(p: f64, seed: u64) -> Dropout<T> {
        Dropout {
            p,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mask: None,
        }
    }

    pub fn forward(&mut self, x: &Array2<T>, train: bool) -> Array2<T> {
        if !train || self.p <= 0.0 {
            self.mask = None;
            return x.clone();
        }
        let scale = T::from_f64(1.0 / (1.0 - self.p));
        let mask = Array2::from_shape_fn(x.raw_dim(), |_| {
            if self.rng.random::<f64>() < self.p {
                T::zero()
            } else {
                scale
            }
        });
        let y = x * &mask;
        self.mask = Some(mask);
        y
    }

    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        match self.mask.take() {
            Some(mask) => dy * &mask,
            None => dy.clone(),
        }
    }
}

/// Multi-head self-attention with a fused QKV projection.
#[derive(Clone, Debug)]
pub struct Mhsa<T: Scalar> {
    pub qkv: Linear<T>,
    pub proj: Linear<T>,
    pub heads: usize,
    pub dim: usize,
    tokens: usize,
    cache: Option<MhsaCache<T>>,
}

#[derive(Clone, Debug)]
struct MhsaCache<T> {
    qkv_out: Array2<T>,
    /// Softmax probabilities, one `[tokens, tokens]` matrix per (sample, head).
    attn: Vec<Array2<T>>,
    batch: usize,
}

impl<T: Scalar> Mhsa<T> {
    pub fn new(name: &str, dim: usize, heads: usize, tokens: usize, rng: &mut ChaCha8Rng) -> Mhsa<T> {
        assert!(dim % heads == 0, "embed dim must divide into heads");
        Mhsa {
            qkv: Linear::new(&format!("{name}.qkv"), dim, 3 * dim, rng),
            proj: Linear::new(&format!("{name}.proj"), dim, dim, rng),
            heads,
            dim,
            tokens,
            cache: None,
        }
    }

    /// `x` is `[batch * tokens, dim]`.
    pub fn forward(&mut self, x: &Array2<T>, keep: bool) -> Array2<T> {
        let t = self.tokens;
        let b = x.nrows() / t;
        let dh = self.dim / self.heads;
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());

        let qkv_out = self.qkv.forward(x, keep);
        let mut ctx = Array2::zeros((b * t, self.dim));
        let mut attn_cache = Vec::with_capacity(b * self.heads);
        for bi in 0..b {
            let rows = s![bi * t..(bi + 1) * t, ..];
            let sample = qkv_out.slice(rows);
            for h in 0..self.heads {
                let q = sample.slice(s![.., h * dh..(h + 1) * dh]).to_owned();
                let k = sample
                    .slice(s![.., self.dim + h * dh..self.dim + (h + 1) * dh])
                    .to_owned();
                let v = sample
                    .slice(s![.., 2 * self.dim + h * dh..2 * self.dim + (h + 1) * dh])
                    .to_owned();
                let mut scores = q.dot(&k.t());
                scores.mapv_inplace(|s| s * scale);
                softmax_rows(&mut scores);
                let ctx_h = scores.dot(&v);
                ctx.slice_mut(s![bi * t..(bi + 1) * t, h * dh..(h + 1) * dh])
                    .assign(&ctx_h);
                if keep {
                    attn_cache.push(scores);
                }
            }
        }
        if keep {
            self.cache = Some(MhsaCache {
                qkv_out,
                attn: attn_cache,
                batch: b,
            });
        }
        self.proj.forward(&ctx, keep)
    }

    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let cache = self.cache.take().expect("no attention cache");
        let t = self.tokens;
        let dh = self.dim / self.heads;
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());

        let dctx = self.proj.backward(dy);
        let mut dqkv = Array2::zeros((cache.batch * t, 3 * self.dim));
        for bi in 0..cache.batch {
            let rows = s![bi * t..(bi + 1) * t, ..];
            let sample = cache.qkv_out.slice(rows);
            for h in 0..self.heads {
                let q = sample.slice(s![.., h * dh..(h + 1) * dh]).to_owned();
                let k = sample
                    .slice(s![.., self.dim + h * dh..self.dim + (h + 1) * dh])
                    .to_owned();
                let v = sample
                    .slice(s![.., 2 * self.dim + h * dh..2 * self.dim + (h + 1) * dh])
                    .to_owned();
                let attn = &cache.attn[bi * self.heads + h];
                let dctx_h = dctx
                    .slice(s![bi * t..(bi + 1) * t, h * dh..(h + 1) * dh])
                    .to_owned();
                let dv = attn.t().dot(&dctx_h);
                let dattn = dctx_h.dot(&v.t());
                // Softmax backward per row.
                let mut dscores = Array2::zeros((t, t));
                for r in 0..t {
                    let a = attn.row(r);
                    let da = dattn.row(r);
                    let dot = a
                        .iter()
                        .zip(da.iter())
                        .fold(T::zero(), |acc, (&p, &g)| acc + p * g);
                    for c in 0..t {
                        dscores[[r, c]] = a[c] * (da[c] - dot) * scale;
                    }
                }
                let dq = dscores.dot(&k);
                let dk = dscores.t().dot(&q);
                dqkv.slice_mut(s![bi * t..(bi + 1) * t, h * dh..(h + 1) * dh])
                    .assign(&dq);
                dqkv.slice_mut(s![
                    bi * t..(bi + 1) * t,
                    self.dim + h * dh..self.dim + (h + 1) * dh
                ])
                .assign(&dk);
                dqkv.slice_mut(s![
                    bi * t..(bi + 1) * t,
                    2 * self.dim + h * dh..2 * self.dim + (h + 1) * dh
                ])
                .assign(&dv);
            }
        }
        self.qkv.backward(&dqkv)
    }

    /// Cached softmax matrices from the last `forward(keep=true)`.
    pub fn cached_attention(&self) -> Option<&[Array2<T>]> {
        self.cache.as_ref().map(|c| c.attn.as_slice())
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        self.qkv.visit(f);
        self.proj.visit(f);
    }
}

/// In-place softmax over each row.
pub fn softmax_rows<T: Scalar>(x: &mut Array2<T>) {
    for mut row in x.rows_mut() {
        let max = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

/// ReLU over any 2-D activation.
#[derive(Clone, Debug, Default)]
pub struct Relu<T> {
    mask: Option<Array2<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Relu<T> {
        Relu { mask: None }
    }

    pub fn forward(&mut self, x: &Array2<T>, keep: bool) -> Array2<T> {
        let y = x.mapv(|v| if v > T::zero() { v } else { T::zero() });
        if keep {
            self.mask = Some(x.mapv(|v| if v > T::zero() { T::one() } else { T::zero() }));
        }
        y
    }

    pub fn backward(&mut self, dy: &Array2<T>) -> Array2<T> {
        let mask = self.mask.take().expect("no relu mask");
        dy * &mask
    }
}
