//! Convolutional layers (2-D and 1-D) with im2col-backed GEMM, batch
//! normalization, and max pooling.

use crate::learn::layers::Param;
use crate::learn::{ParamKind, Scalar};
use ndarray::{Array1, Array2, Array3, Array4, ArrayD, Axis, Ix2};
use rand_chacha::ChaCha8Rng;

/// 3x3-style 2-D convolution, stride 1, zero padding.
#[derive(Clone, Debug)]
pub struct Conv2d<T: Scalar> {
    pub w: Param<T>,
    pub b: Param<T>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub pad: usize,
    cache: Option<(Array2<T>, (usize, usize, usize))>,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Conv2d<T> {
        let fan_in = in_ch * k * k;
        let std = (2.0 / fan_in as f64).sqrt();
        Conv2d {
            w: Param::new(
                format!("{name}.w"),
                ParamKind::Weight,
                super::layers::normal_init(&[fan_in, out_ch], std, rng),
            ),
            b: Param::new(format!("{name}.b"), ParamKind::Bias, ArrayD::zeros(vec![out_ch])),
            in_ch,
            out_ch,
            k,
            pad,
            cache: None,
        }
    }

    fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h + 2 * self.pad - self.k + 1, w + 2 * self.pad - self.k + 1)
    }

    fn im2col(&self, x: &Array4<T>) -> Array2<T> {
        let (b, c, h, w) = x.dim();
        let (oh, ow) = self.out_hw(h, w);
        let mut col = Array2::zeros((b * oh * ow, c * self.k * self.k));
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = (bi * oh + oy) * ow + ox;
                    for ci in 0..c {
                        for ky in 0..self.k {
                            let y = (oy + ky) as isize - self.pad as isize;
                            if y < 0 || y >= h as isize {
                                continue;
                            }
                            for kx in 0..self.k {
                                let xx = (ox + kx) as isize - self.pad as isize;
                                if xx < 0 || xx >= w as isize {
                                    continue;
                                }
                                col[[row, (ci * self.k + ky) * self.k + kx]] =
                                    x[[bi, ci, y as usize, xx as usize]];
                            }
                        }
                    }
                }
            }
        }
        col
    }

    pub fn forward(&mut self, x: &Array4<T>, keep: bool) -> Array4<T> {
        let (b, _c, h, w) = x.dim();
        let (oh, ow) = self.out_hw(h, w);
        let col = self.im2col(x);
        let wmat = self.w.value.view().into_dimensionality::<Ix2>().unwrap();
        let mut y2 = col.dot(&wmat);
        let bias = self.b.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        y2 += &bias;
        if keep {
            self.cache = Some((col, (h, w, b)));
        }
        let mut y = Array4::zeros((b, self.out_ch, oh, ow));
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = (bi * oh + oy) * ow + ox;
                    for oc in 0..self.out_ch {
                        y[[bi, oc, oy, ox]] = y2[[row, oc]];
                    }
                }
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Array4<T>, need_dx: bool) -> Option<Array4<T>> {
        let (col, (h, w, b)) = self.cache.take().expect("no conv2d cache");
        let (_, _, oh, ow) = dy.dim();
        let mut dy2 = Array2::zeros((b * oh * ow, self.out_ch));
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = (bi * oh + oy) * ow + ox;
                    for oc in 0..self.out_ch {
                        dy2[[row, oc]] = dy[[bi, oc, oy, ox]];
                    }
                }
            }
        }
        let dw = col.t().dot(&dy2);
        self.w.grad.assign(&dw.into_dyn());
        self.b.grad.assign(&dy2.sum_axis(Axis(0)).into_dyn());
        if !need_dx {
            return None;
        }
        let wmat = self.w.value.view().into_dimensionality::<Ix2>().unwrap();
        let dcol = dy2.dot(&wmat.t());
        let mut dx = Array4::zeros((b, self.in_ch, h, w));
        for bi in 0..b {
            for oy in 0..oh {
                for ox in 0..ow {
                    let row = (bi * oh + oy) * ow + ox;
                    for ci in 0..self.in_ch {
                        for ky in 0..self.k {
                            let y = (oy + ky) as isize - self.pad as isize;
                            if y < 0 || y >= h as isize {
                                continue;
                            }
                            for kx in 0..self.k {
                                let xx = (ox + kx) as isize - self.pad as isize;
                                if xx < 0 || xx >= w as isize {
                                    continue;
                                }
                                dx[[bi, ci, y as usize, xx as usize]] +=
                                    dcol[[row, (ci * self.k + ky) * self.k + kx]];
                            }
                        }
                    }
                }
            }
        }
        Some(dx)
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

/// Per-channel batch normalization over `[B, C, H, W]`.
#[derive(Clone, Debug)]
pub struct BatchNorm2d<T: Scalar> {
    pub g: Param<T>,
    pub b: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    momentum: f64,
    eps: T,
    cache: Option<(Array4<T>, Array1<T>)>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(name: &str, channels: usize) -> BatchNorm2d<T> {
        BatchNorm2d {
            g: Param::new(
                format!("{name}.g"),
                ParamKind::Norm,
                ArrayD::from_elem(vec![channels], T::one()),
            ),
            b: Param::new(format!("{name}.b"), ParamKind::Norm, ArrayD::zeros(vec![channels])),
            running_mean: Param::buffer(format!("{name}.rmean"), ArrayD::zeros(vec![channels])),
            running_var: Param::buffer(
                format!("{name}.rvar"),
                ArrayD::from_elem(vec![channels], T::one()),
            ),
            momentum: 0.1,
            eps: T::from_f64(1e-5),
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Array4<T>, train: bool) -> Array4<T> {
        let (b, c, h, w) = x.dim();
        let n = T::from_f64((b * h * w) as f64);
        let mut y = x.clone();
        let mut inv_stds = Array1::zeros(c);
        let mut xhat = if train {
            Array4::zeros((b, c, h, w))
        } else {
            Array4::zeros((0, 0, 0, 0))
        };
        for ci in 0..c {
            let (mean, var) = if train {
                let mut mean = T::zero();
                for bi in 0..b {
                    for yy in 0..h {
                        for xx in 0..w {
                            mean += x[[bi, ci, yy, xx]];
                        }
                    }
                }
                mean = mean / n;
                let mut var = T::zero();
                for bi in 0..b {
                    for yy in 0..h {
                        for xx in 0..w {
                            let d = x[[bi, ci, yy, xx]] - mean;
                            var += d * d;
                        }
                    }
                }
                var = var / n;
                let m = T::from_f64(self.momentum);
                let one_m = T::one() - m;
                self.running_mean.value[ci] = one_m * self.running_mean.value[ci] + m * mean;
                self.running_var.value[ci] = one_m * self.running_var.value[ci] + m * var;
                (mean, var)
            } else {
                (self.running_mean.value[ci], self.running_var.value[ci])
            };
            let istd = (var + self.eps).sqrt().recip();
            inv_stds[ci] = istd;
            let gamma = self.g.value[ci];
            let beta = self.b.value[ci];
            for bi in 0..b {
                for yy in 0..h {
                    for xx in 0..w {
                        let xh = (x[[bi, ci, yy, xx]] - mean) * istd;
                        if train {
                            xhat[[bi, ci, yy, xx]] = xh;
                        }
                        y[[bi, ci, yy, xx]] = gamma * xh + beta;
                    }
                }
            }
        }
        if train {
            self.cache = Some((xhat, inv_stds));
        }
        y
    }

    pub fn backward(&mut self, dy: &Array4<T>) -> Array4<T> {
        let (xhat, inv_stds) = self.cache.take().expect("no batchnorm cache");
        let (b, c, h, w) = dy.dim();
        let n = T::from_f64((b * h * w) as f64);
        let mut dx = Array4::zeros((b, c, h, w));
        for ci in 0..c {
            let gamma = self.g.value[ci];
            let mut sum_dxhat = T::zero();
            let mut sum_dxhat_x = T::zero();
            let mut dg = T::zero();
            let mut db = T::zero();
            for bi in 0..b {
                for yy in 0..h {
                    for xx in 0..w {
                        let dyv = dy[[bi, ci, yy, xx]];
                        let dxh = dyv * gamma;
                        sum_dxhat += dxh;
                        sum_dxhat_x += dxh * xhat[[bi, ci, yy, xx]];
                        dg += dyv * xhat[[bi, ci, yy, xx]];
                        db += dyv;
                    }
                }
            }
            self.g.grad[ci] = dg;
            self.b.grad[ci] = db;
            let istd = inv_stds[ci];
            for bi in 0..b {
                for yy in 0..h {
                    for xx in 0..w {
                        let dxh = dy[[bi, ci, yy, xx]] * gamma;
                        dx[[bi, ci, yy, xx]] = (dxh
                            - sum_dxhat / n
                            - xhat[[bi, ci, yy, xx]] * sum_dxhat_x / n)
                            * istd;
                    }
                }
            }
        }
        dx
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.g);
        f(&mut self.b);
        f(&mut self.running_mean);
        f(&mut self.running_var);
    }
}

/// 2x2 max pooling, stride 2.
#[derive(Clone, Debug, Default)]
pub struct MaxPool2d {
    argmax: Option<Vec<usize>>,
    in_dim: (usize, usize, usize, usize),
}

impl MaxPool2d {
    pub fn new() -> MaxPool2d {
        MaxPool2d {
            argmax: None,
            in_dim: (0, 0, 0, 0),
        }
    }

    pub fn forward<T: Scalar>(&mut self, x: &Array4<T>, keep: bool) -> Array4<T> {
        let (b, c, h, w) = x.dim();
        let (oh, ow) = (h / 2, w / 2);
        let mut y = Array4::zeros((b, c, oh, ow));
        let mut argmax = if keep {
            vec![0usize; b * c * oh * ow]
        } else {
            Vec::new()
        };
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = T::neg_infinity();
                        let mut best_idx = 0usize;
                        for ky in 0..2 {
                            for kx in 0..2 {
                                let yy = 2 * oy + ky;
                                let xx = 2 * ox + kx;
                                let v = x[[bi, ci, yy, xx]];
                                if v > best {
                                    best = v;
                                    best_idx = yy * w + xx;
                                }
                            }
                        }
                        y[[bi, ci, oy, ox]] = best;
                        if keep {
                            argmax[((bi * c + ci) * oh + oy) * ow + ox] = best_idx;
                        }
                    }
                }
            }
        }
        if keep {
            self.argmax = Some(argmax);
            self.in_dim = (b, c, h, w);
        }
        y
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Array4<T>) -> Array4<T> {
        let argmax = self.argmax.take().expect("no pool cache");
        let (b, c, h, w) = self.in_dim;
        let (_, _, oh, ow) = dy.dim();
        let mut dx = Array4::zeros((b, c, h, w));
        for bi in 0..b {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let idx = argmax[((bi * c + ci) * oh + oy) * ow + ox];
                        dx[[bi, ci, idx / w, idx % w]] += dy[[bi, ci, oy, ox]];
                    }
                }
            }
        }
        dx
    }
}

/// 1-D convolution over `[B, C, L]`, stride 1, zero padding.
#[derive(Clone, Debug)]
pub struct Conv1d<T: Scalar> {
    pub w: Param<T>,
    pub b: Param<T>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub pad: usize,
    cache: Option<(Array2<T>, (usize, usize))>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Conv1d<T> {
        let fan_in = in_ch * k;
        let std = (2.0 / fan_in as f64).sqrt();
        Conv1d {
            w: Param::new(
                format!("{name}.w"),
                ParamKind::Weight,
                super::layers::normal_init(&[fan_in, out_ch], std, rng),
            ),
            b: Param::new(format!("{name}.b"), ParamKind::Bias, ArrayD::zeros(vec![out_ch])),
            in_ch,
            out_ch,
            k,
            pad,
            cache: None,
        }
    }

    fn out_len(&self, l: usize) -> usize {
        l + 2 * self.pad - self.k + 1
    }

    pub fn forward(&mut self, x: &Array3<T>, keep: bool) -> Array3<T> {
        let (b, c, l) = x.dim();
        let ol = self.out_len(l);
        let mut col = Array2::zeros((b * ol, c * self.k));
        for bi in 0..b {
            for o in 0..ol {
                let row = bi * ol + o;
                for ci in 0..c {
                    for kk in 0..self.k {
                        let p = (o + kk) as isize - self.pad as isize;
                        if p < 0 || p >= l as isize {
                            continue;
                        }
                        col[[row, ci * self.k + kk]] = x[[bi, ci, p as usize]];
                    }
                }
            }
        }
        let wmat = self.w.value.view().into_dimensionality::<Ix2>().unwrap();
        let mut y2 = col.dot(&wmat);
        let bias = self.b.value.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        y2 += &bias;
        if keep {
            self.cache = Some((col, (b, l)));
        }
        let mut y = Array3::zeros((b, self.out_ch, ol));
        for bi in 0..b {
            for o in 0..ol {
                for oc in 0..self.out_ch {
                    y[[bi, oc, o]] = y2[[bi * ol + o, oc]];
                }
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &Array3<T>, need_dx: bool) -> Option<Array3<T>> {
        let (col, (b, l)) = self.cache.take().expect("no conv1d cache");
        let (_, _, ol) = dy.dim();
        let mut dy2 = Array2::zeros((b * ol, self.out_ch));
        for bi in 0..b {
            for o in 0..ol {
                for oc in 0..self.out_ch {
                    dy2[[bi * ol + o, oc]] = dy[[bi, oc, o]];
                }
            }
        }
        let dw = col.t().dot(&dy2);
        self.w.grad.assign(&dw.into_dyn());
        self.b.grad.assign(&dy2.sum_axis(Axis(0)).into_dyn());
        if !need_dx {
            return None;
        }
        let wmat = self.w.value.view().into_dimensionality::<Ix2>().unwrap();
        let dcol = dy2.dot(&wmat.t());
        let mut dx = Array3::zeros((b, self.in_ch, l));
        for bi in 0..b {
            for o in 0..ol {
                let row = bi * ol + o;
                for ci in 0..self.in_ch {
                    for kk in 0..self.k {
                        let p = (o + kk) as isize - self.pad as isize;
                        if p < 0 || p >= l as isize {
                            continue;
                        }
                        dx[[bi, ci, p as usize]] += dcol[[row, ci * self.k + kk]];
                    }
                }
            }
        }
        Some(dx)
    }

    pub fn visit(&mut self, f: &mut dyn FnMut(&mut Param<T>)) {
        f(&mut self.w);
        f(&mut self.b);
    }
}

/// 1-D max pooling with kernel = stride.
#[derive(Clone, Debug, Default)]
pub struct MaxPool1d {
    pub k: usize,
    argmax: Option<Vec<usize>>,
    in_dim: (usize, usize, usize),
}

impl MaxPool1d {
    pub fn new(k: usize) -> MaxPool1d {
        MaxPool1d {
            k,
            argmax: None,
            in_dim: (0, 0, 0),
        }
    }

    pub fn forward<T: Scalar>(&mut self, x: &Array3<T>, keep: bool) -> Array3<T> {
        let (b, c, l) = x.dim();
        let ol = l / self.k;
        let mut y = Array3::zeros((b, c, ol));
        let mut argmax = if keep { vec![0usize; b * c * ol] } else { Vec::new() };
        for bi in 0..b {
            for ci in 0..c {
                for o in 0..ol {
                    let mut best = T::neg_infinity();
                    let mut best_idx = 0usize;
                    for kk in 0..self.k {
                        let p = o * self.k + kk;
                        let v = x[[bi, ci, p]];
                        if v > best {
                            best = v;
                            best_idx = p;
                        }
                    }
                    y[[bi, ci, o]] = best;
                    if keep {
                        argmax[(bi * c + ci) * ol + o] = best_idx;
                    }
                }
            }
        }
        if keep {
            self.argmax = Some(argmax);
            self.in_dim = (b, c, l);
        }
        y
    }

    pub fn backward<T: Scalar>(&mut self, dy: &Array3<T>) -> Array3<T> {
        let argmax = self.argmax.take().expect("no pool cache");
        let (b, c, l) = self.in_dim;
        let (_, _, ol) = dy.dim();
        let mut dx = Array3::zeros((b, c, l));
        for bi in 0..b {
            for ci in 0..c {
                for o in 0..ol {
                    dx[[bi, ci, argmax[(bi * c + ci) * ol + o]]] += dy[[bi, ci, o]];
                }
            }
        }
        dx
    }
}
