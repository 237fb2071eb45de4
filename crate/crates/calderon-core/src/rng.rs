//! Counter-based random number generation.
//!
//! All randomness in the crate flows through the Philox 4x32-10 block
//! function keyed by an explicit 64-bit seed. Because a draw is a pure
//! function of `(seed, stream, index)` there is no generator state to carry
//! around or synchronise: replicate loops derive per-replicate streams,
//! coordinate-indexed noise fields evaluate `g_{jk}` lazily and always get
//! the same value back, and experiments are bit-reproducible across
//! platforms and thread counts.

use crate::math;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;
const ROUNDS: usize = 10;

/// Philox 4x32-10 keyed block function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Philox {
    key: [u32; 2],
}

impl Philox {
    pub fn new(seed: u64) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
        }
    }

    /// One 128-bit block for a 128-bit counter.
    pub fn block(&self, ctr: [u32; 4]) -> [u32; 4] {
        let mut x = ctr;
        let mut k = self.key;
        for _ in 0..ROUNDS {
            let p0 = u64::from(PHILOX_M0) * u64::from(x[0]);
            let p1 = u64::from(PHILOX_M1) * u64::from(x[2]);
            x = [
                ((p1 >> 32) as u32) ^ x[1] ^ k[0],
                p1 as u32,
                ((p0 >> 32) as u32) ^ x[3] ^ k[1],
                p0 as u32,
            ];
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        x
    }
}

#[inline]
fn counter(stream: u64, index: u64) -> [u32; 4] {
    [
        index as u32,
        (index >> 32) as u32,
        stream as u32,
        (stream >> 32) as u32,
    ]
}

/// Uniform in the open interval `(0, 1)` with 53-bit resolution.
#[inline]
fn to_uniform(hi: u32, lo: u32) -> f64 {
    let bits = ((u64::from(hi) << 32) | u64::from(lo)) >> 11;
    (bits as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// Two independent standard normals from one Philox block (Box-Muller).
#[inline]
pub fn gaussian_pair(seed: u64, stream: u64, index: u64) -> (f64, f64) {
    let b = Philox::new(seed).block(counter(stream, index));
    let u1 = to_uniform(b[0], b[1]);
    let u2 = to_uniform(b[2], b[3]);
    let r = math::sqrt(-2.0 * math::ln(u1));
    let (s, c) = math::sin_cos(math::TAU * u2);
    (r * c, r * s)
}

/// Standard normal addressed by `(seed, stream, index)`.
#[inline]
pub fn gaussian_at(seed: u64, stream: u64, index: u64) -> f64 {
    gaussian_pair(seed, stream, index).0
}

/// Standard normal addressed by a two-dimensional coordinate `(i, j)` with
/// `i, j < 2³²`. Adjacent `j` share one Philox block (the two Box-Muller
/// outputs), so bulk row fills cost half a block per coordinate while random
/// access stays consistent.
#[inline]
pub fn gaussian_coord(seed: u64, stream: u64, i: u64, j: u64) -> f64 {
    let pair = gaussian_pair(seed, stream, (i << 32) | (j >> 1));
    if j & 1 == 0 {
        pair.0
    } else {
        pair.1
    }
}

/// Fill `out[c]` with the coordinate Gaussians `(i, j0 + c)`, reusing
/// shared blocks.
pub fn fill_gaussian_row(seed: u64, stream: u64, i: u64, j0: u64, out: &mut [f64]) {
    let mut c = 0usize;
    while c < out.len() {
        let j = j0 + c as u64;
        let pair = gaussian_pair(seed, stream, (i << 32) | (j >> 1));
        if j & 1 == 0 {
            out[c] = pair.0;
            if c + 1 < out.len() {
                out[c + 1] = pair.1;
                c += 2;
                continue;
            }
        } else {
            out[c] = pair.1;
        }
        c += 1;
    }
}

/// SplitMix64 finaliser, used to derive well-separated stream identifiers.
#[inline]
pub fn mix(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a substream identifier from a purpose tag and an index.
#[inline]
pub fn substream(tag: u64, index: u64) -> u64 {
    mix(tag ^ mix(index))
}

/// Sequential generator view over one `(seed, stream)` pair.
///
/// The counter advances one block per two normals (or per four `u32`), so
/// distinct streams never overlap.
#[derive(Debug, Clone)]
pub struct CounterRng {
    philox: Philox,
    stream: u64,
    index: u64,
    spare: Option<f64>,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            philox: Philox::new(seed),
            stream,
            index: 0,
            spare: None,
        }
    }

    fn next_block(&mut self) -> [u32; 4] {
        let b = self.philox.block(counter(self.stream, self.index));
        self.index += 1;
        b
    }

    pub fn next_u64(&mut self) -> u64 {
        let b = self.next_block();
        (u64::from(b[0]) << 32) | u64::from(b[1])
    }

    /// Uniform in `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        let b = self.next_block();
        to_uniform(b[0], b[1])
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let b = self.next_block();
        let u1 = to_uniform(b[0], b[1]);
        let u2 = to_uniform(b[2], b[3]);
        let r = math::sqrt(-2.0 * math::ln(u1));
        let (s, c) = math::sin_cos(math::TAU * u2);
        self.spare = Some(r * s);
        r * c
    }

    /// Fill a slice with standard normals.
    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.standard_normal();
        }
    }
}
