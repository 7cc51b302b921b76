//! Random linear digit scrambling (Matoušek) followed by a digital shift.
//!
//! Every coordinate gets its own lower-triangular binary matrix with unit
//! diagonal and its own 52-bit shift. The matrix acts on the 32 Sobol'
//! digits; the shift covers those digits and 20 further ones, so the output
//! `(y + 1/2) / 2^52` lies strictly inside (0,1).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::normal::probit;
use super::sobol::{DirectionNumbers, PointSet, SobolIter, BITS};
use crate::error::Result;

const OUT_BITS: u32 = 52;
const EXTRA_BITS: u32 = OUT_BITS - BITS as u32;

/// Identifies one independent randomization of a point set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomizationSeed {
    pub seed: u64,
    pub batch_index: u64,
}

impl RandomizationSeed {
    pub fn new(seed: u64, batch_index: u64) -> Self {
        Self { seed, batch_index }
    }
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent and an index.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(mix64(parent) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// The scramble applied to a single coordinate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearScramble {
    /// Column `k` is the image of the digit with weight `2^-(k+1)`.
    columns: [u32; BITS],
    shift: u64,
}

impl LinearScramble {
    /// Draws the scramble of `coordinate` under `seed`.
    pub fn draw(seed: RandomizationSeed, coordinate: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed.seed, seed.batch_index));
        rng.set_stream(coordinate as u64);
        let mut columns = [0u32; BITS];
        for (k, col) in columns.iter_mut().enumerate() {
            let diag = 1u32 << (BITS - 1 - k);
            let below = diag - 1;
            *col = diag | (rng.next_u32() & below);
        }
        let shift = rng.next_u64() >> (64 - OUT_BITS);
        Self { columns, shift }
    }

    /// Multiplies the digit vector of `x` by the scramble matrix.
    #[inline]
    pub fn scramble_digits(&self, x: u32) -> u32 {
        let mut y = 0u32;
        let mut bits = x;
        while bits != 0 {
            let lead = bits.leading_zeros() as usize;
            y ^= self.columns[lead];
            bits &= !(1u32 << (BITS - 1 - lead));
        }
        y
    }

    /// Maps already-scrambled digits to a uniform in (0,1).
    #[inline]
    pub fn to_unit(&self, scrambled: u32) -> f64 {
        let word = ((scrambled as u64) << EXTRA_BITS) ^ self.shift;
        (word as f64 + 0.5) * (OUT_BITS as f64).exp2().recip()
    }
}

/// Scrambles and shifts a base Sobol' point set.
pub fn randomize(points: &PointSet, seed: RandomizationSeed) -> PointSet {
    let dim = points.dim();
    let scrambles: Vec<LinearScramble> = (0..dim).map(|j| LinearScramble::draw(seed, j)).collect();
    let scale = (BITS as f64).exp2();
    let values = points
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let s = &scrambles[idx % dim];
            let x = (v * scale) as u32;
            s.to_unit(s.scramble_digits(x))
        })
        .collect();
    PointSet::from_raw(dim, points.len(), values)
}

/// Streaming randomized Sobol' generator.
///
/// Scrambling is linear, so it is applied once to the direction numbers and
/// the Gray-code recursion then produces scrambled digits directly. The
/// output equals `randomize(generate_sobol(dim, n), seed)` point by point.
#[derive(Debug, Clone)]
pub struct ScrambledSobol {
    iter: SobolIter,
    scrambles: Vec<LinearScramble>,
}

impl ScrambledSobol {
    pub fn new(table: &DirectionNumbers, dim: usize, seed: RandomizationSeed) -> Result<Self> {
        table.check_dim(dim)?;
        let scrambles: Vec<LinearScramble> =
            (0..dim).map(|j| LinearScramble::draw(seed, j)).collect();
        let directions = (0..dim)
            .map(|j| {
                let base = table.coordinate(j);
                let mut out = [0u32; BITS];
                for (o, &v) in out.iter_mut().zip(base) {
                    *o = scrambles[j].scramble_digits(v);
                }
                out
            })
            .collect();
        Ok(Self {
            iter: SobolIter::from_directions(directions),
            scrambles,
        })
    }

    pub fn dim(&self) -> usize {
        self.scrambles.len()
    }

    /// Writes the next point's uniforms into `out`.
    pub fn next_uniform(&mut self, out: &mut [f64]) {
        let x = self.iter.next_point();
        for ((o, &xi), s) in out.iter_mut().zip(x).zip(&self.scrambles) {
            *o = s.to_unit(xi);
        }
    }

    /// Writes the next point mapped through the inverse normal CDF.
    pub fn next_normal(&mut self, out: &mut [f64]) {
        let x = self.iter.next_point();
        for ((o, &xi), s) in out.iter_mut().zip(x).zip(&self.scrambles) {
            *o = probit(s.to_unit(xi));
        }
    }
}
