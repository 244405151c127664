//! One harmonic plane at a time through global memory.
//!
//! Plane k is produced by summing plane k-1 (read back from global memory)
//! with the stretch-k sources, stored to global memory again and threshold
//! tested on the way through. Two plane buffers ping-pong as read/write
//! targets so a plane is never summed into itself.

use crate::candidate::CandidateRecord;
use crate::memory::{AccessStats, GlobalStore};
use crate::params::HsParams;
use crate::plane::ThresholdArray;
use crate::sum::detect;

use super::{check_inputs, new_debug_planes, new_rings, EngineError, EngineOutput};

/// Caches one stretched source row so each distinct stretch point of a plane
/// is loaded from global memory exactly once. Output rows visit stretch rows
/// in nondecreasing order, so a simple current-row buffer suffices.
struct StretchRowCache {
    row: Option<u32>,
    values: Vec<f32>,
}

impl StretchRowCache {
    fn new() -> Self {
        Self {
            row: None,
            values: Vec::new(),
        }
    }

    fn fill(&mut self, fop: &GlobalStore, row: u32, k: u32) {
        let width = (fop.n_chan() - 1) / k + 1;
        self.values.clear();
        self.values.reserve(width as usize);
        for c in 0..width {
            self.values.push(fop.load(row, c));
        }
        self.row = Some(row);
    }
}

/// Runs the plane-at-a-time engine. With `dedup_stretch` the stretch sources
/// of each plane are loaded once per distinct point (the minimum-access
/// variant); without it every output point issues its own stretch load.
pub fn run_single_hp(
    params: &HsParams,
    fop: &GlobalStore,
    ta: &ThresholdArray,
    dedup_stretch: bool,
    debug_planes: bool,
) -> Result<EngineOutput, EngineError> {
    check_inputs(params, fop, ta)?;
    let mut rings = new_rings(params);
    let mut planes = new_debug_planes(params, debug_planes);

    let loads_before = fop.load_count();
    let stores_before = fop.store_count();

    let mut prev = GlobalStore::zeros(params.n_rows, params.n_chan);
    let mut cur = GlobalStore::zeros(params.n_rows, params.n_chan);

    for k in 1..=params.n_hp as u32 {
        if k == 1 {
            // Plane 1 is the FOP itself: read it once for detection, nothing
            // is stored back.
            for i in 0..params.n_rows {
                let threshold = ta.get(1, i);
                for j in 0..params.n_chan {
                    let v = fop.load(i, j);
                    if detect(v, threshold) {
                        rings[0].push(CandidateRecord {
                            filter: i,
                            plane: 1,
                            bin: j,
                            amplitude: v,
                        });
                    }
                    if let Some(planes) = planes.as_mut() {
                        planes[0].set(i, j, v);
                    }
                }
            }
            continue;
        }

        let mut cache = StretchRowCache::new();
        for i in 0..params.n_rows {
            let threshold = ta.get(k as u8, i);
            let stretch_row = i / k;
            if dedup_stretch && cache.row != Some(stretch_row) {
                cache.fill(fop, stretch_row, k);
            }
            for j in 0..params.n_chan {
                // Plane 1 lives in the FOP; later planes in the ping-pong
                // buffer written on the previous pass.
                let upstream = if k == 2 {
                    fop.load(i, j)
                } else {
                    prev.load(i, j)
                };
                let source = if dedup_stretch {
                    cache.values[(j / k) as usize]
                } else {
                    fop.load(stretch_row, j / k)
                };
                let v = upstream + source;
                cur.store(i, j, v);
                if detect(v, threshold) {
                    rings[k as usize - 1].push(CandidateRecord {
                        filter: i,
                        plane: k as u8,
                        bin: j,
                        amplitude: v,
                    });
                }
                if let Some(planes) = planes.as_mut() {
                    planes[k as usize - 1].set(i, j, v);
                }
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let stats = AccessStats {
        global_loads: fop.load_count() - loads_before + prev.load_count() + cur.load_count(),
        global_stores: fop.store_count() - stores_before + prev.store_count() + cur.store_count(),
        local_hits: 0,
        local_misses: 0,
    };
    Ok(EngineOutput {
        candidates: rings,
        stats,
        final_planes: planes,
    })
}
