//! All harmonic planes per point, nothing stored back.
//!
//! Column-major traversal; each output point chains its plane values in
//! registers and every plane value is threshold tested and discarded, so the
//! only global traffic is one stretch load per (point, plane).

use crate::candidate::CandidateRecord;
use crate::memory::{AccessStats, GlobalStore};
use crate::params::HsParams;
use crate::plane::ThresholdArray;
use crate::sum::{detect, stretch_index};

use super::{check_inputs, new_debug_planes, new_rings, EngineError, EngineOutput};

pub fn run_mhp_naive(
    params: &HsParams,
    fop: &GlobalStore,
    ta: &ThresholdArray,
    debug_planes: bool,
) -> Result<EngineOutput, EngineError> {
    check_inputs(params, fop, ta)?;
    let mut rings = new_rings(params);
    let mut planes = new_debug_planes(params, debug_planes);

    let loads_before = fop.load_count();
    let stores_before = fop.store_count();

    for j in 0..params.n_chan {
        for i in 0..params.n_rows {
            let mut acc = 0.0f32;
            for k in 1..=params.n_hp as u32 {
                let (r, c) = stretch_index(i, j, k);
                acc += fop.load(r, c);
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
        local_hits: 0,
        local_misses: 0,
    };
    Ok(EngineOutput {
        candidates: rings,
        stats,
        final_planes: planes,
    })
}
