//! Reordered-FOP workgroups: each block streams its fixed-length segment of
//! the reordered buffer from consecutive addresses, padding included, then
//! computes exactly like the necessary-points engine.

use crate::memory::AccessStats;
use crate::params::HsParams;
use crate::plane::ThresholdArray;
use crate::reorder::{block_slices, pack_slot, RfopBuffer};

use super::mhp_n::{compute_block, run_blocks_threaded};
use super::{
    check_thresholds, effective_workers, merge_blocks, new_debug_planes, new_rings, BlockResult,
    EngineError, EngineOutput,
};

fn check_layout(params: &HsParams, rfop: &RfopBuffer) -> Result<(), EngineError> {
    let l = &rfop.layout;
    if l.n_rows != params.n_rows || l.n_chan != params.n_chan || l.n_hp != params.n_hp {
        return Err(EngineError::LayoutMismatch(format!(
            "buffer laid out for {}x{} with {} planes, run wants {}x{} with {}",
            l.n_rows, l.n_chan, l.n_hp, params.n_rows, params.n_chan, params.n_hp
        )));
    }
    let expect = l.total_streamed() as usize;
    if rfop.data.len() != expect || rfop.slots.len() != expect {
        return Err(EngineError::LayoutMismatch(format!(
            "buffer holds {} points / {} slots, layout needs {expect}",
            rfop.data.len(),
            rfop.slots.len()
        )));
    }
    Ok(())
}

pub fn run_mhp_r(
    params: &HsParams,
    rfop: &RfopBuffer,
    ta: &ThresholdArray,
    debug_planes: bool,
) -> Result<EngineOutput, EngineError> {
    run_mhp_r_parallel(params, rfop, ta, debug_planes, 1)
}

/// Parallel variant over disjoint workgroup segments; identical output to
/// the sequential run (merge is in block order).
pub fn run_mhp_r_parallel(
    params: &HsParams,
    rfop: &RfopBuffer,
    ta: &ThresholdArray,
    debug_planes: bool,
    workers: usize,
) -> Result<EngineOutput, EngineError> {
    check_thresholds(params, ta)?;
    check_layout(params, rfop)?;
    let layout = rfop.layout;
    let mut rings = new_rings(params);
    let mut planes = new_debug_planes(params, debug_planes);

    let seg_len = layout.segment_len();
    let n_blocks = layout.n_workgroups;
    let workers = effective_workers(workers).min(n_blocks.max(1) as usize);

    let job = |block: u32| -> BlockResult {
        // Stream the whole segment, padding slots included; compute then
        // reads the streamed copy, never global memory.
        let segment = rfop.segment(block);
        let slices = block_slices(&layout, block);
        if cfg!(debug_assertions) {
            let base = block as usize * seg_len as usize;
            for slice in &slices {
                for r in 0..slice.rows {
                    for c in slice.col_start..slice.col_start + slice.cols {
                        let at = base
                            + slice.offset as usize
                            + (r * slice.cols + (c - slice.col_start)) as usize;
                        debug_assert_eq!(rfop.slots[at], pack_slot(r, c), "slot table mismatch");
                    }
                }
            }
        }
        compute_block(params, &layout, block, &slices, segment, ta, debug_planes)
    };

    let results: Vec<BlockResult> = if workers <= 1 {
        (0..n_blocks).map(job).collect()
    } else {
        run_blocks_threaded(n_blocks, workers, job)
    };

    merge_blocks(params, layout.n_col, results, &mut rings, &mut planes);

    let stats = AccessStats {
        global_loads: seg_len * n_blocks as u64,
        global_stores: 0,
        local_hits: 0,
        local_misses: 0,
    };
    Ok(EngineOutput {
        candidates: rings,
        stats,
        final_planes: planes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::run_mhp_naive;
    use crate::memory::GlobalStore;
    use crate::plane::FopPlane;
    use crate::reorder::{build_rfop, plan_layout};

    fn params(n_rows: u32, n_chan: u32, n_hp: u8) -> HsParams {
        HsParams::new(n_rows, n_chan, n_hp, 200).unwrap()
    }

    fn noisy_plane(n_rows: u32, n_chan: u32) -> FopPlane {
        let data: Vec<f32> = (0..n_rows * n_chan)
            .map(|n| ((n * 69621) % 6007) as f32 / 600.0)
            .collect();
        FopPlane::new(n_rows, n_chan, data).unwrap()
    }

    #[test]
    fn streams_exactly_the_segment_total() {
        let p = params(42, 256, 8);
        let fop = noisy_plane(42, 256);
        let layout = plan_layout(&p, 16, 4, true).unwrap();
        let rfop = build_rfop(&fop, &layout);
        let ta = ThresholdArray::uniform(8, 42, 50.0);
        let out = run_mhp_r(&p, &rfop, &ta, false).unwrap();
        assert_eq!(out.stats.global_loads, layout.total_streamed());
        assert_eq!(out.stats.global_stores, 0);
    }

    #[test]
    fn pow2_sixteen_four_costs_twice_the_plane() {
        let p = params(42, 4096, 8);
        let fop = FopPlane::zeros(42, 4096);
        let layout = plan_layout(&p, 16, 4, true).unwrap();
        let rfop = build_rfop(&fop, &layout);
        let ta = ThresholdArray::uniform(8, 42, 1.0);
        let out = run_mhp_r(&p, &rfop, &ta, false).unwrap();
        assert_eq!(out.stats.global_loads, 2 * p.fop_len_u64());
    }

    #[test]
    fn planes_bit_identical_to_naive() {
        let p = params(42, 256, 8);
        let plane = noisy_plane(42, 256);
        let fop = GlobalStore::from_plane(plane.clone());
        let ta = ThresholdArray::uniform(8, 42, 30.0);
        let naive = run_mhp_naive(&p, &fop, &ta, true).unwrap();
        for (n_col, n_p_wi, pow2) in [(1u32, 1u32, false), (16, 4, true), (64, 8, false)] {
            let layout = plan_layout(&p, n_col, n_p_wi, pow2).unwrap();
            let rfop = build_rfop(&plane, &layout);
            let out = run_mhp_r(&p, &rfop, &ta, true).unwrap();
            let (a, b) = (
                naive.final_planes.as_ref().unwrap(),
                out.final_planes.as_ref().unwrap(),
            );
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.as_slice(), y.as_slice());
            }
        }
    }

    #[test]
    fn mismatched_buffer_rejected() {
        let p = params(42, 256, 8);
        let other = params(42, 512, 8);
        let layout = plan_layout(&other, 16, 4, true).unwrap();
        let rfop = build_rfop(&noisy_plane(42, 512), &layout);
        let ta = ThresholdArray::uniform(8, 42, 30.0);
        assert!(matches!(
            run_mhp_r(&p, &rfop, &ta, false),
            Err(EngineError::LayoutMismatch(_))
        ));
    }

    #[test]
    fn parallel_matches_sequential() {
        let p = params(20, 256, 8);
        let plane = noisy_plane(20, 256);
        let layout = plan_layout(&p, 8, 2, false).unwrap();
        let rfop = build_rfop(&plane, &layout);
        let ta = ThresholdArray::uniform(8, 20, 20.0);
        let seq = run_mhp_r(&p, &rfop, &ta, true).unwrap();
        let par = run_mhp_r_parallel(&p, &rfop, &ta, true, 3).unwrap();
        assert_eq!(seq.stats, par.stats);
        let (a, b) = (seq.final_planes.unwrap(), par.final_planes.unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.as_slice(), y.as_slice());
        }
        for (ra, rb) in seq.candidates.iter().zip(&par.candidates) {
            let va: Vec<_> = ra.iter().map(|r| (r.filter, r.bin)).collect();
            let vb: Vec<_> = rb.iter().map(|r| (r.filter, r.bin)).collect();
            assert_eq!(va, vb);
        }
    }
}
