//! Counter-based random numbers.
//!
//! Every random draw in the toolkit is addressed by a key (derived from the
//! master seed) and a counter, using the Philox4x32-10 bijection. Draws are
//! therefore reproducible regardless of evaluation order or thread count.

use rand::RngCore;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = (a as u64) * (b as u64);
    ((p >> 32) as u32, p as u32)
}

#[inline(always)]
fn philox_round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
    let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    ctr = philox_round(ctr, key);
    for _ in 1..10 {
        key[0] = key[0].wrapping_add(PHILOX_W0);
        key[1] = key[1].wrapping_add(PHILOX_W1);
        ctr = philox_round(ctr, key);
    }
    ctr
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a hash of a stage label.
fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derives a substream seed from the master seed, a stage name and an index.
///
/// The mapping only depends on its arguments, so it is stable across runs,
/// platforms and releases.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let h = splitmix64(fnv1a(stage) ^ splitmix64(index));
    splitmix64(master ^ h)
}

#[inline]
fn split_key(seed: u64) -> [u32; 2] {
    [seed as u32, (seed >> 32) as u32]
}

/// Uniform in the open interval (0, 1] from 53 random bits.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [0, 1) from 53 random bits.
#[inline]
fn half_open_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let radius = (-2.0 * open_unit(a).ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * half_open_unit(b)).sin_cos();
    (radius * c, radius * s)
}

/// Standard normal draws addressed by `(seed, path, step)`.
///
/// Fills `out` with independent N(0,1) values. Two normals are produced per
/// Philox block, and the block index is the low counter word, so a given
/// `(seed, path, step, coordinate)` always yields the same value.
pub fn keyed_normals(seed: u64, path: u64, step: u32, out: &mut [f64]) {
    let key = split_key(seed);
    for (block, pair) in out.chunks_mut(2).enumerate() {
        let r = philox4x32_10([block as u32, step, path as u32, (path >> 32) as u32], key);
        let a = (r[0] as u64) | ((r[1] as u64) << 32);
        let b = (r[2] as u64) | ((r[3] as u64) << 32);
        let (z0, z1) = box_muller(a, b);
        pair[0] = z0;
        if pair.len() > 1 {
            pair[1] = z1;
        }
    }
}

/// Sequential generator over one Philox substream.
///
/// Implements [`RngCore`] so it plugs into `rand` and `rand_distr`
/// (shuffles, chi-square draws, ...).
#[derive(Debug, Clone)]
pub struct Substream {
    key: [u32; 2],
    stream: u64,
    counter: u64,
    buf: [u32; 4],
    used: usize,
}

impl Substream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: split_key(seed),
            stream,
            counter: 0,
            buf: [0; 4],
            used: 4,
        }
    }

    /// Substream for `(master, stage, index)` via [`derive_seed`].
    pub fn derived(master: u64, stage: &str, index: u64) -> Self {
        Self::new(derive_seed(master, stage, index), index)
    }

    fn refill(&mut self) {
        let c = self.counter;
        self.buf = philox4x32_10(
            [
                c as u32,
                (c >> 32) as u32,
                self.stream as u32,
                (self.stream >> 32) as u32,
            ],
            self.key,
        );
        self.counter = self.counter.wrapping_add(1);
        self.used = 0;
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        half_open_unit(self.next_u64())
    }

    #[inline]
    pub fn normal_pair(&mut self) -> (f64, f64) {
        let a = self.next_u64();
        let b = self.next_u64();
        box_muller(a, b)
    }

    pub fn fill_normals(&mut self, out: &mut [f64]) {
        for pair in out.chunks_mut(2) {
            let (z0, z1) = self.normal_pair();
            pair[0] = z0;
            if pair.len() > 1 {
                pair[1] = z1;
            }
        }
    }
}

impl RngCore for Substream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        lo | (hi << 32)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let bytes = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
