//! Naive traversal behind a pinned cache of the most-touched FOP points.
//!
//! The preload phase pins the top `preload_size` points of the touch map
//! (ties broken by ascending row, column) and runs strictly before compute;
//! every summing-phase read then goes through the cache. Preload traffic is
//! part of the reported global loads, and the summing-phase load count is
//! exactly the miss count.

use crate::analysis::TouchMap;
use crate::candidate::CandidateRecord;
use crate::memory::{AccessStats, GlobalStore, LocalStore};
use crate::params::HsParams;
use crate::plane::ThresholdArray;
use crate::sum::{detect, stretch_index};

use super::{check_inputs, new_debug_planes, new_rings, EngineError, EngineOutput, PreloadConfig};

pub fn run_mhp_h(
    params: &HsParams,
    fop: &GlobalStore,
    ta: &ThresholdArray,
    cfg: &PreloadConfig,
    touch: &TouchMap,
    debug_planes: bool,
) -> Result<EngineOutput, EngineError> {
    check_inputs(params, fop, ta)?;
    if !touch.matches(params) {
        return Err(EngineError::TouchMapDims);
    }
    let mut rings = new_rings(params);
    let mut planes = new_debug_planes(params, debug_planes);

    let loads_before = fop.load_count();
    let stores_before = fop.store_count();

    let mut local = LocalStore::new(cfg.preload_size);
    let ranked = touch.ranked_points();
    let pinned = &ranked[..cfg.preload_size.min(ranked.len())];
    local.preload(pinned, fop)?;

    for j in 0..params.n_chan {
        for i in 0..params.n_rows {
            let mut acc = 0.0f32;
            for k in 1..=params.n_hp as u32 {
                let (r, c) = stretch_index(i, j, k);
                acc += local.cached_load(fop, r, c);
                if detect(acc, ta.get(k as u8, i)) {
                    rings[k as usize - 1].push(CandidateRecord {
                        filter: i,
                        plane: k as u8,
                        bin: j,
                        amplitude: acc,
                    });
                }
                if let Some(planes) = planes.as_mut() {
                    planes[k as usize - 1].set(i, j, acc);
                }
            }
        }
    }

    let stats = AccessStats {
        global_loads: fop.load_count() - loads_before,
        global_stores: fop.store_count() - stores_before,
        local_hits: local.hit_count(),
        local_misses: local.miss_count(),
    };
    Ok(EngineOutput {
        candidates: rings,
        stats,
        final_planes: planes,
    })
}
