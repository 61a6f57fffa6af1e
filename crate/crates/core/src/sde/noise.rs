//! Reproducible Brownian increment streams.
//!
//! Streams are counter based: a ChaCha8 keystream whose key is derived from
//! `(master_seed, domain, lane)` and whose 64-bit stream id packs
//! `(particle, replication)`. Step `k` of a stream always occupies the same
//! keystream window, so any step can be regenerated without replaying the
//! ones before it, and the numbers a particle sees do not depend on which
//! thread simulates it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::TimeGrid;

/// Keystream words (32-bit) consumed by one pair of normals.
const WORDS_PER_PAIR: u128 = 4;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Purposes that draw randomness from a driver. Distinct domains never share
/// keystreams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Brownian,
    Initial,
    Resample,
    Auxiliary(u32),
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Brownian => 0x4252_4f57,
            Domain::Initial => 0x494e_4954,
            Domain::Resample => 0x5253_4d50,
            Domain::Auxiliary(k) => 0x4155_5800_0000_0000 | u64::from(k),
        }
    }
}

/// Seeded source of independent, replayable random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseDriver {
    master_seed: u64,
}

impl NoiseDriver {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// An independent driver labelled by `tag` (e.g. a Picard iteration).
    pub fn child(&self, tag: u64) -> Self {
        Self {
            master_seed: splitmix64(self.master_seed ^ splitmix64(tag.wrapping_add(0x5eed))),
        }
    }

    /// Brownian stream of `(particle, replication)`.
    pub fn stream(&self, particle: u32, replication: u32) -> NoiseStream {
        self.stream_in(Domain::Brownian, 0, particle, replication)
    }

    pub fn stream_in(
        &self,
        domain: Domain,
        lane: u32,
        particle: u32,
        replication: u32,
    ) -> NoiseStream {
        let mut key = [0u8; 32];
        let mut state = splitmix64(self.master_seed ^ domain.tag());
        state = splitmix64(state ^ u64::from(lane).wrapping_mul(0xd6e8_feb8_6659_fd93));
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream((u64::from(particle) << 32) | u64::from(replication));
        NoiseStream { rng }
    }
}

/// One deterministic stream of standard normals (Box–Muller, two per pair of
/// 64-bit draws).
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal_pair(&mut self) -> (f64, f64) {
        // 1 - U lies in (0, 1], so the logarithm is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    pub fn normal(&mut self) -> f64 {
        self.normal_pair().0
    }

    /// Fills `out` with standard normals. Consumes `ceil(len/2)` pairs.
    pub fn fill_normals(&mut self, out: &mut [f64]) {
        let mut chunks = out.chunks_exact_mut(2);
        for pair in &mut chunks {
            let (a, b) = self.normal_pair();
            pair[0] = a;
            pair[1] = b;
        }
        if let [last] = chunks.into_remainder() {
            *last = self.normal_pair().0;
        }
    }

    /// Positions the stream at the start of step `step` for a scheme that
    /// draws `per_step` normals per step.
    pub fn seek_step(&mut self, step: usize, per_step: usize) {
        let pairs = per_step.div_ceil(2) as u128;
        self.rng.set_word_pos(step as u128 * pairs * WORDS_PER_PAIR);
    }

    /// Standard normals of step `step` (random access).
    pub fn step_normals(&mut self, step: usize, out: &mut [f64]) {
        self.seek_step(step, out.len());
        self.fill_normals(out);
    }

    /// Brownian increments for every step of `grid`, row-major `steps × dim`,
    /// already scaled by `sqrt(h)`.
    pub fn increments(&mut self, grid: &TimeGrid, dim: usize) -> Vec<f64> {
        let sqrt_h = grid.step().sqrt();
        let mut out = vec![0.0; grid.steps() * dim];
        for (k, row) in out.chunks_exact_mut(dim.max(1)).enumerate() {
            self.step_normals(k, row);
            row.iter_mut().for_each(|z| *z *= sqrt_h);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_is_bit_identical() {
        let d = NoiseDriver::new(7);
        let g = TimeGrid::new(1.0, 50).unwrap();
        let a = d.stream(3, 9).increments(&g, 3);
        let b = d.stream(3, 9).increments(&g, 3);
        assert_eq!(a, b);
        assert_ne!(a, d.stream(4, 9).increments(&g, 3));
        assert_ne!(a, d.stream(3, 10).increments(&g, 3));
    }

    #[test]
    fn random_access_matches_sequential() {
        let d = NoiseDriver::new(11);
        let mut seq = d.stream(0, 0);
        let mut rows = [[0.0; 3]; 5];
        for r in rows.iter_mut() {
            seq.fill_normals(r);
        }
        let mut ra = d.stream(0, 0);
        let mut row = [0.0; 3];
        ra.step_normals(3, &mut row);
        assert_eq!(row, rows[3]);
    }

    #[test]
    fn domains_and_children_differ() {
        let d = NoiseDriver::new(1);
        let a = d.stream_in(Domain::Initial, 0, 0, 0).normal();
        let b = d.stream_in(Domain::Brownian, 0, 0, 0).normal();
        let c = d.child(1).stream(0, 0).normal();
        assert!(a != b && b != c && a != c);
    }

    #[test]
    fn normals_have_unit_variance() {
        let mut s = NoiseDriver::new(5).stream(0, 0);
        let mut v = vec![0.0; 200_000];
        s.fill_normals(&mut v);
        let m = crate::stats::mean(&v);
        let var = crate::stats::variance(&v);
        assert!(m.abs() < 0.01, "{m}");
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }
}
