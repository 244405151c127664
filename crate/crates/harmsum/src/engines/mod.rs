//! The five harmonic-summing strategies.
//!
//! All engines produce bit-identical harmonic-plane values (the accumulation
//! order is fixed) and differ only in traversal order and counted memory
//! traffic. Canonical runs are single-threaded; the workgroup-based engines
//! also have a parallel mode over disjoint column blocks that merges
//! per-block candidate lists in block order, leaving values and stats
//! unchanged.

mod mhp_h;
mod mhp_n;
mod mhp_naive;
mod mhp_r;
mod single_hp;

pub use mhp_h::run_mhp_h;
pub use mhp_n::{run_mhp_n, run_mhp_n_parallel};
pub use mhp_naive::run_mhp_naive;
pub use mhp_r::{run_mhp_r, run_mhp_r_parallel};
pub use single_hp::run_single_hp;

use thiserror::Error;

use crate::candidate::{CandidateRecord, CandidateRing};
use crate::memory::{AccessStats, GlobalStore, MemoryError};
use crate::params::HsParams;
use crate::plane::{FopPlane, ThresholdArray};
use crate::reorder::ReorderError;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("plane is {got_rows}x{got_chan} but params say {rows}x{chan}")]
    FopDims {
        rows: u32,
        chan: u32,
        got_rows: u32,
        got_chan: u32,
    },
    #[error("threshold array is {got_hp}x{got_rows} but params say {hp}x{rows}")]
    ThresholdDims {
        hp: u8,
        rows: u32,
        got_hp: u8,
        got_rows: u32,
    },
    #[error("touch map shape does not match params")]
    TouchMapDims,
    #[error("reordered buffer does not match this run: {0}")]
    LayoutMismatch(String),
    #[error(transparent)]
    Reorder(#[from] ReorderError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Preload policy for the hot-point engine: how many of the most-touched
/// points get pinned on chip before compute starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreloadConfig {
    pub preload_size: usize,
}

/// Per-plane candidate rings, exact access counts and (in debug mode) the
/// finished harmonic planes for verification.
#[derive(Debug)]
pub struct EngineOutput {
    pub candidates: Vec<CandidateRing>,
    pub stats: AccessStats,
    pub final_planes: Option<Vec<FopPlane>>,
}

pub(crate) fn check_inputs(
    params: &HsParams,
    fop: &GlobalStore,
    ta: &ThresholdArray,
) -> Result<(), EngineError> {
    if fop.n_rows() != params.n_rows || fop.n_chan() != params.n_chan {
        return Err(EngineError::FopDims {
            rows: params.n_rows,
            chan: params.n_chan,
            got_rows: fop.n_rows(),
            got_chan: fop.n_chan(),
        });
    }
    check_thresholds(params, ta)
}

pub(crate) fn check_thresholds(params: &HsParams, ta: &ThresholdArray) -> Result<(), EngineError> {
    if ta.n_hp() != params.n_hp || ta.n_rows() != params.n_rows {
        return Err(EngineError::ThresholdDims {
            hp: params.n_hp,
            rows: params.n_rows,
            got_hp: ta.n_hp(),
            got_rows: ta.n_rows(),
        });
    }
    Ok(())
}

pub(crate) fn new_rings(params: &HsParams) -> Vec<CandidateRing> {
    (0..params.n_hp)
        .map(|_| CandidateRing::new(params.n_cand as usize))
        .collect()
}

pub(crate) fn new_debug_planes(params: &HsParams, enabled: bool) -> Option<Vec<FopPlane>> {
    enabled.then(|| {
        (0..params.n_hp)
            .map(|_| FopPlane::zeros(params.n_rows, params.n_chan))
            .collect()
    })
}

/// Worker count for parallel runs: the requested count clamped by the
/// `HARMSUM_THREADS` environment cap, at least 1.
pub fn effective_workers(requested: usize) -> usize {
    let cap = std::env::var("HARMSUM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(usize::MAX);
    requested.clamp(1, cap)
}

/// Output of one column-block: detections per plane in traversal order plus
/// (in debug mode) the finished plane values for those columns, plane-major.
pub(crate) struct BlockResult {
    pub block: u32,
    pub detections: Vec<Vec<CandidateRecord>>,
    pub fragment: Option<Vec<f32>>,
}

/// Folds per-block results (ascending block order) into rings and planes,
/// reproducing the canonical sequential push order.
pub(crate) fn merge_blocks(
    params: &HsParams,
    n_col: u32,
    results: Vec<BlockResult>,
    rings: &mut [CandidateRing],
    planes: &mut Option<Vec<FopPlane>>,
) {
    debug_assert!(results.windows(2).all(|w| w[0].block < w[1].block));
    for res in results {
        for (k0, dets) in res.detections.iter().enumerate() {
            for &d in dets {
                rings[k0].push(d);
            }
        }
        if let (Some(planes), Some(fragment)) = (planes.as_mut(), res.fragment.as_ref()) {
            let start = res.block * n_col;
            let mut idx = 0;
            for plane in planes.iter_mut() {
                for i in 0..params.n_rows {
                    for j in start..start + n_col {
                        plane.set(i, j, fragment[idx]);
                        idx += 1;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::effective_workers;

    #[test]
    fn worker_cap_comes_from_environment() {
        assert_eq!(effective_workers(0), 1);
        std::env::set_var("HARMSUM_THREADS", "2");
        assert_eq!(effective_workers(8), 2);
        std::env::set_var("HARMSUM_THREADS", "not a number");
        assert_eq!(effective_workers(8), 8);
        std::env::remove_var("HARMSUM_THREADS");
        assert_eq!(effective_workers(3), 3);
    }
}
