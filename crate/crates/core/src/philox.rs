//! Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//!
//! A keyed bijection of a 128-bit counter: each output depends only on the
//! key and the counter, so draws can be made in any order from any thread.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

#[inline(always)]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(M0, ctr[0]);
    let (hi1, lo1) = mulhilo(M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// Ten-round Philox4x32 block function.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    ctr = round(ctr, key);
    for _ in 0..9 {
        key[0] = key[0].wrapping_add(W0);
        key[1] = key[1].wrapping_add(W1);
        ctr = round(ctr, key);
    }
    ctr
}

/// Splits a 64-bit seed into a Philox key.
#[inline]
pub fn key_from_seed(seed: u64) -> [u32; 2] {
    [seed as u32, (seed >> 32) as u32]
}

/// Uniform draw on `[-1, 1)` from the top 53 bits of the first two output
/// words.
#[inline]
pub fn uniform_symmetric(ctr: [u32; 4], key: [u32; 2]) -> f64 {
    let out = philox4x32_10(ctr, key);
    let bits = ((out[0] as u64) << 32) | out[1] as u64;
    let unit = (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * unit - 1.0
}
