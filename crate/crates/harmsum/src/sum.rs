//! The stretch/sum recurrences and threshold detection.
//!
//! Harmonic plane values are always accumulated in ascending plane order in
//! 32-bit arithmetic. Every engine follows this exact order, which is what
//! makes their outputs bit-identical.

use crate::plane::FopPlane;

/// Source index in the FOP feeding stretch plane `k` at output `(i, j)`:
/// `(i / k, j / k)` with floor division.
///
/// Rows are half-plane indices (0-based, nonnegative), so floor division is
/// plain integer division and the result is always a valid FOP index
/// componentwise no larger than `(i, j)`.
#[inline]
pub fn stretch_index(i: u32, j: u32, k: u32) -> (u32, u32) {
    debug_assert!(k >= 1);
    (i / k, j / k)
}

/// Values of harmonic planes 1..=n_hp at `(i, j)`.
///
/// Plane 1 is the FOP value itself; plane k adds the stretch-k source on top
/// of plane k-1.
pub fn harmonic_chain(fop: &FopPlane, i: u32, j: u32, n_hp: u8) -> Vec<f32> {
    let mut chain = Vec::with_capacity(n_hp as usize);
    let mut acc = 0.0f32;
    for k in 1..=n_hp as u32 {
        let (r, c) = stretch_index(i, j, k);
        acc += fop.get(r, c);
        chain.push(acc);
    }
    chain
}

/// Strict threshold comparison: a point is a candidate only if it exceeds
/// its row threshold, so threshold-equal noise never fires.
#[inline]
pub fn detect(value: f32, threshold: f32) -> bool {
    value > threshold
}
