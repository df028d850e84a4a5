//! Counter-based Gaussian noise.
//!
//! Every Brownian increment is a pure function of `(seed, particle, step)`,
//! computed with the Philox4x32-10 block function followed by a Box–Muller
//! transform. There is no generator state, so the draws cannot depend on how
//! particles are scheduled across threads.

use std::f64::consts::TAU;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = u64::from(a) * u64::from(b);
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, c[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, c[2]);
        c = [hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0];
    }
    c
}

/// SplitMix64 finaliser, used to derive independent sub-seeds.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for an independent noise stream derived from `seed` and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x6D6B_766C_6162)))
}

/// Map 53 high bits to the open unit interval `(0, 1)`.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Noise source keyed by a 64-bit seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    key: [u32; 2],
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    /// Two independent standard normals for steps `2 * pair` and `2 * pair + 1`.
    #[inline]
    pub fn normal_pair(&self, particle: u64, pair: u64) -> (f64, f64) {
        let out = philox4x32_10(
            [
                particle as u32,
                (particle >> 32) as u32,
                pair as u32,
                (pair >> 32) as u32,
            ],
            self.key,
        );
        let u1 = open_unit((u64::from(out[0]) << 32) | u64::from(out[1]));
        let u2 = open_unit((u64::from(out[2]) << 32) | u64::from(out[3]));
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// The standard normal assigned to `(particle, step)`.
    #[inline]
    pub fn normal(&self, particle: u64, step: u64) -> f64 {
        let (a, b) = self.normal_pair(particle, step >> 1);
        if step & 1 == 0 {
            a
        } else {
            b
        }
    }
}
