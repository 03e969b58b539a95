//! Sensor geometry: coupling weights between the 4 sensing units and the
//! 12 muscles, per-muscle path phases, and deterministic perturbations for
//! subject variation and armband position shifts.

use crate::synth::gesture::MuscleId;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const NUM_UNITS: usize = 4;
pub const NUM_CHANNELS: usize = NUM_UNITS * NUM_UNITS;

/// Coupling layout of the 4-unit armband.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensorLayout {
    /// 4 x 12 nonnegative weights, unit i -> muscle m.
    pub coupling: Array2<f64>,
    /// Per-muscle path phase in radians.
    pub phase_offsets: [f64; 12],
    /// Armband displacement from the nominal position; 0 = nominal.
    pub position_shift_cm: f64,
}

/// Weight of a unit on a muscle it is not placed against.
const BACKGROUND_WEIGHT: f64 = 0.12;

impl SensorLayout {
    /// Nominal placement: unit 1 over the thumb muscles, unit 2 over the
    /// extensors, unit 3 over the flexors, unit 4 over the deep FDP.
    pub fn nominal() -> Self {
        use MuscleId::*;
        let mut coupling = Array2::from_elem((NUM_UNITS, MuscleId::COUNT), BACKGROUND_WEIGHT);
        let mut set = |unit: usize, muscle: MuscleId, w: f64| {
            coupling[[unit, muscle.index()]] = w;
        };
        // Unit 1: extensor/flexor pollicis longus.
        set(0, Epl, 1.0);
        set(0, Fpl, 0.95);
        // Unit 2: wrist and finger extensors.
        set(1, Ed, 0.95);
        set(1, Edm, 0.88);
        set(1, Ei, 0.82);
        set(1, Ecu, 0.9);
        set(1, Ecrl, 0.85);
        set(1, Ecrb, 0.8);
        // Unit 3: wrist and finger flexors.
        set(2, Fcu, 0.9);
        set(2, Fcr, 0.86);
        set(2, Fds, 0.94);
        // Unit 4: flexor digitorum profundus.
        set(3, Fdp, 1.0);
        set(3, Fpl, 0.3);

        let mut phase_offsets = [0.0f64; 12];
        for (m, phi) in phase_offsets.iter_mut().enumerate() {
            // Golden-angle spacing keeps the 12 phases spread and distinct.
            *phi = (0.37 + 2.399_963 * m as f64) % std::f64::consts::TAU;
        }
        SensorLayout {
            coupling,
            phase_offsets,
            position_shift_cm: 0.0,
        }
    }

    /// Multiplicative coupling jitter and small phase jitter, for subject
    /// and per-routine variation. Deterministic in `seed`.
    pub fn perturbed(&self, sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut out = self.clone();
        for w in out.coupling.iter_mut() {
            *w = (*w * (1.0 + sigma * normal.sample(&mut rng))).max(0.0);
        }
        for phi in out.phase_offsets.iter_mut() {
            *phi += 0.5 * sigma * normal.sample(&mut rng);
        }
        out
    }

    /// Armband moved along the forearm by `d_cm`. Each unit's coupling row
    /// rotates toward its neighbour's row by an angle proportional to the
    /// displacement, plus a small seeded jitter that grows with it.
    pub fn with_position_shift(&self, d_cm: f64, seed: u64) -> Self {
        assert!(d_cm >= 0.0, "position shift must be nonnegative");
        if d_cm == 0.0 {
            return self.clone();
        }
        let theta = (0.12 * d_cm).min(std::f64::consts::FRAC_PI_2);
        let (s, c) = theta.sin_cos();
        let mut coupling = Array2::zeros((NUM_UNITS, MuscleId::COUNT));
        for i in 0..NUM_UNITS {
            let next = (i + 1) % NUM_UNITS;
            for m in 0..MuscleId::COUNT {
                coupling[[i, m]] = c * self.coupling[[i, m]] + s * self.coupling[[next, m]];
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5349_4654);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for w in coupling.iter_mut() {
            *w = (*w * (1.0 + 0.02 * d_cm * normal.sample(&mut rng))).max(0.0);
        }
        let mut out = self.clone();
        out.coupling = coupling;
        out.position_shift_cm = d_cm;
        out
    }

    /// Uniform random scale of all couplings (used for subject amplitude
    /// spread in tests).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.coupling *= factor;
        out
    }
}

/// Derive a stream seed from a master seed and a role tag, so that every
/// random decision in the generator has its own deterministic stream.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    // FNV-1a over the tag list; cheap and stable across platforms.
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ master;
    for &t in tags {
        for b in t.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Uniform sample in `[lo, hi]` from a derived seed.
pub fn seeded_uniform(seed: u64, lo: f64, hi: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.random_range(lo..=hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argmax_muscles(layout: &SensorLayout, unit: usize, top: usize) -> Vec<MuscleId> {
        let mut idx: Vec<usize> = (0..MuscleId::COUNT).collect();
        idx.sort_by(|&a, &b| {
            layout.coupling[[unit, b]]
                .partial_cmp(&layout.coupling[[unit, a]])
                .unwrap()
        });
        idx.into_iter().take(top).map(|i| MuscleId::ALL[i]).collect()
    }

    #[test]
    fn nominal_placement_matches_unit_roles() {
        use MuscleId::*;
        let l = SensorLayout::nominal();
        let top1 = argmax_muscles(&l, 0, 2);
        assert!(top1.contains(&Epl) && top1.contains(&Fpl));
        let top2 = argmax_muscles(&l, 1, 6);
        for m in [Ed, Edm, Ei, Ecu, Ecrl, Ecrb] {
            assert!(top2.contains(&m), "unit 2 should favour {}", m.name());
        }
        let top3 = argmax_muscles(&l, 2, 3);
        for m in [Fcu, Fcr, Fds] {
            assert!(top3.contains(&m), "unit 3 should favour {}", m.name());
        }
        let top4 = argmax_muscles(&l, 3, 1);
        assert_eq!(top4, vec![Fdp]);
    }

    #[test]
    fn phases_are_distinct() {
        let l = SensorLayout::nominal();
        for i in 0..12 {
            for j in (i + 1)..12 {
                assert!((l.phase_offsets[i] - l.phase_offsets[j]).abs() > 1e-6);
            }
        }
    }

    #[test]
    fn position_shift_is_deterministic_and_proportional() {
        let l = SensorLayout::nominal();
        let a = l.with_position_shift(3.0, 7);
        let b = l.with_position_shift(3.0, 7);
        assert_eq!(a.coupling, b.coupling);
        let c = l.with_position_shift(3.0, 8);
        assert_ne!(a.coupling, c.coupling);
        // Larger shift moves rows further from nominal.
        let d1 = (&l.coupling - &l.with_position_shift(1.0, 7).coupling)
            .mapv(f64::abs)
            .sum();
        let d3 = (&l.coupling - &a.coupling).mapv(f64::abs).sum();
        assert!(d3 > d1);
        // Weights stay nonnegative.
        assert!(a.coupling.iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn zero_shift_is_identity() {
        let l = SensorLayout::nominal();
        let s = l.with_position_shift(0.0, 3);
        assert_eq!(l.coupling, s.coupling);
        assert_eq!(s.position_shift_cm, 0.0);
    }
}
