//! Necessary-points workgroups: per column block, each needed FOP point is
//! loaded once into a workgroup buffer, then all planes for the block are
//! computed from the buffer.

use crate::candidate::CandidateRecord;
use crate::memory::{AccessStats, GlobalStore};
use crate::params::HsParams;
use crate::plane::ThresholdArray;
use crate::reorder::{block_slices, plan_layout, RfopLayout, SliceGeometry};
use crate::sum::detect;

use super::{
    check_inputs, effective_workers, merge_blocks, new_debug_planes, new_rings, BlockResult,
    EngineError, EngineOutput,
};

/// Loads block `block`'s needed rectangles from global memory, one counted
/// load per slice slot, and returns the buffer plus slice geometry.
fn load_block(
    fop: &GlobalStore,
    layout: &RfopLayout,
    block: u32,
) -> (Vec<f32>, Vec<SliceGeometry>) {
    let slices = block_slices(layout, block);
    let needed: u64 = slices.iter().map(|s| s.rows as u64 * s.cols as u64).sum();
    let mut buffer = Vec::with_capacity(needed as usize);
    for slice in &slices {
        for r in 0..slice.rows {
            for c in slice.col_start..slice.col_start + slice.cols {
                buffer.push(fop.load(r, c));
            }
        }
    }
    (buffer, slices)
}

/// Computes all planes for one block from a buffer laid out by
/// [`block_slices`]; the necessary-points engine fills it with counted
/// loads, the reordered engine hands in its streamed segment.
pub(super) fn compute_block(
    params: &HsParams,
    layout: &RfopLayout,
    block: u32,
    slices: &[SliceGeometry],
    buffer: &[f32],
    ta: &ThresholdArray,
    want_fragment: bool,
) -> BlockResult {
    let n_col = layout.n_col;
    let start = block * n_col;
    let mut detections: Vec<Vec<CandidateRecord>> = (0..params.n_hp).map(|_| Vec::new()).collect();
    let mut fragment = want_fragment
        .then(|| vec![0.0f32; params.n_hp as usize * params.n_rows as usize * n_col as usize]);

    for j in start..start + n_col {
        for i in 0..params.n_rows {
            let mut acc = 0.0f32;
            for k in 1..=params.n_hp as u32 {
                let slice = &slices[k as usize - 1];
                let (r, c) = (i / k, j / k);
                debug_assert!(
                    r < slice.rows && c >= slice.col_start && c < slice.col_start + slice.cols
                );
                let offset =
                    slice.offset + r as u64 * slice.cols as u64 + (c - slice.col_start) as u64;
                acc += buffer[offset as usize];
                if detect(acc, ta.get(k as u8, i)) {
                    detections[k as usize - 1].push(CandidateRecord {
                        filter: i,
                        plane: k as u8,
                        bin: j,
                        amplitude: acc,
                    });
                }
                if let Some(fragment) = fragment.as_mut() {
                    let idx = ((k - 1) * params.n_rows + i) * n_col + (j - start);
                    fragment[idx as usize] = acc;
                }
            }
        }
    }
    BlockResult {
        block,
        detections,
        fragment,
    }
}

pub(super) fn layout_for_blocks(params: &HsParams, n_col: u32) -> Result<RfopLayout, EngineError> {
    // Points-per-work-item does not matter for block geometry; plan with 1.
    Ok(plan_layout(params, n_col, 1, false)?)
}

pub fn run_mhp_n(
    params: &HsParams,
    fop: &GlobalStore,
    ta: &ThresholdArray,
    n_col: u32,
    debug_planes: bool,
) -> Result<EngineOutput, EngineError> {
    run_mhp_n_parallel(params, fop, ta, n_col, debug_planes, 1)
}

/// Parallel variant over disjoint blocks. Per-block candidate lists are
/// merged in block order, so rings, planes and stats all match the
/// sequential run.
pub fn run_mhp_n_parallel(
    params: &HsParams,
    fop: &GlobalStore,
    ta: &ThresholdArray,
    n_col: u32,
    debug_planes: bool,
    workers: usize,
) -> Result<EngineOutput, EngineError> {
    check_inputs(params, fop, ta)?;
    let layout = layout_for_blocks(params, n_col)?;
    let mut rings = new_rings(params);
    let mut planes = new_debug_planes(params, debug_planes);

    let loads_before = fop.load_count();
    let stores_before = fop.store_count();

    let n_blocks = layout.n_workgroups;
    let workers = effective_workers(workers).min(n_blocks.max(1) as usize);

    let results: Vec<BlockResult> = if workers <= 1 {
        (0..n_blocks)
            .map(|block| {
                let (buffer, slices) = load_block(fop, &layout, block);
                compute_block(params, &layout, block, &slices, &buffer, ta, debug_planes)
            })
            .collect()
    } else {
        run_blocks_threaded(n_blocks, workers, |block| {
            let (buffer, slices) = load_block(fop, &layout, block);
            compute_block(params, &layout, block, &slices, &buffer, ta, debug_planes)
        })
    };

    merge_blocks(params, n_col, results, &mut rings, &mut planes);

    let stats = AccessStats {
        global_loads: fop.load_count() - loads_before,
        global_stores: fop.store_count() - stores_before,
        local_hits: 0,
        local_misses: 0,
    };
    Ok(EngineOutput {
        candidates: rings,
        stats,
        final_planes: planes,
    })
}

/// Fans blocks out over `workers` scoped threads and returns results in
/// ascending block order.
pub(super) fn run_blocks_threaded<F>(n_blocks: u32, workers: usize, job: F) -> Vec<BlockResult>
where
    F: Fn(u32) -> BlockResult + Sync,
{
    let next = std::sync::atomic::AtomicU32::new(0);
    let mut results: Vec<Option<BlockResult>> = Vec::new();
    results.resize_with(n_blocks as usize, || None);
    let slots = std::sync::Mutex::new(&mut results);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let block = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if block >= n_blocks {
                    break;
                }
                let result = job(block);
                slots.lock().unwrap()[block as usize] = Some(result);
            });
        }
    });

    results
        .into_iter()
        .map(|r| r.expect("every block computed"))
        .collect()
}
