//! Harmonic-summing engines over an instrumented memory model.
//!
//! The input is a filter-output plane (FOP): a dense 2-D array of spectral
//! amplitudes with one row per FIR-filter template and one column per
//! frequency channel. Harmonic plane `k` at `(i, j)` is the running sum of
//! the FOP sampled at `(i/k', j/k')` for `k' = 1..=k` (floor division), and
//! every point of every harmonic plane is threshold-tested to produce
//! candidate lists.
//!
//! Five summing strategies are implemented, all producing bit-identical
//! harmonic-plane values but very different off-chip traffic:
//!
//! * `singlehp` — one plane at a time, ping-ponging plane buffers through
//!   global memory (the straightforward method);
//! * `mhp-naive` — all planes per point, nothing stored back;
//! * `mhp-h` — naive plus a pinned cache of the most-touched FOP points;
//! * `mhp-n` — column-block workgroups that load each needed point once;
//! * `mhp-r` — the same workgroups streaming a reordered, padded FOP.
//!
//! Every simulated off-chip load and store is counted exactly by the
//! [`memory`] module, so measured traffic can be checked against the
//! closed-form access models in [`analysis`].

pub mod analysis;
pub mod candidate;
pub mod engines;
pub mod io;
pub mod memory;
pub mod params;
pub mod plane;
pub mod reorder;
pub mod sum;

pub mod cli;

pub use candidate::{decode_candidate, encode_candidate, CandidateRecord, CandidateRing};
pub use engines::{EngineOutput, PreloadConfig};
pub use memory::{AccessStats, GlobalStore, LocalStore};
pub use params::HsParams;
pub use plane::{FopPlane, ThresholdArray};
pub use reorder::{RfopBuffer, RfopLayout};
