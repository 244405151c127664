//! Touch-frequency maps, coverage curves, closed-form access models and
//! cross-engine verification.

use thiserror::Error;

use crate::engines::EngineOutput;
use crate::params::HsParams;
use crate::reorder::{self, RfopLayout};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("coverage fraction must be in (0, 1], got {0}")]
    CoverageFraction(f64),
}

/// How often each FOP point is read while producing every harmonic plane:
/// `touch(r, c) = sum over k of |{(i, j) : (i/k, j/k) = (r, c)}|`.
#[derive(Debug, Clone)]
pub struct TouchMap {
    n_rows: u32,
    n_chan: u32,
    n_hp: u8,
    counts: Vec<u64>,
}

impl TouchMap {
    pub fn n_rows(&self) -> u32 {
        self.n_rows
    }

    pub fn n_chan(&self) -> u32 {
        self.n_chan
    }

    pub fn n_hp(&self) -> u8 {
        self.n_hp
    }

    #[inline]
    pub fn count(&self, r: u32, c: u32) -> u64 {
        self.counts[r as usize * self.n_chan as usize + c as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn matches(&self, params: &HsParams) -> bool {
        self.n_rows == params.n_rows && self.n_chan == params.n_chan && self.n_hp == params.n_hp
    }

    /// All points ordered by descending touch count, ties broken by
    /// ascending `(row, col)`. This is the preload priority order.
    pub fn ranked_points(&self) -> Vec<(u32, u32)> {
        let mut order: Vec<u32> = (0..self.counts.len() as u32).collect();
        order.sort_by_key(|&n| std::cmp::Reverse(self.counts[n as usize]));
        // sort_by_key is stable, and linear index order is (row, col) order.
        order
            .into_iter()
            .map(|n| (n / self.n_chan, n % self.n_chan))
            .collect()
    }
}

/// Exact touch counts by closed-form preimage counting: the number of `i`
/// with `i/k = r` is the overlap of `[r*k, (r+1)*k)` with the row range, and
/// likewise for columns, so each plane contributes a product of two
/// per-index factors.
pub fn compute_touch_map(params: &HsParams) -> TouchMap {
    let (n_rows, n_chan, n_hp) = (params.n_rows, params.n_chan, params.n_hp);
    let mut counts = vec![0u64; params.fop_len()];
    for k in 1..=n_hp as u32 {
        let row_preimages: Vec<u64> = (0..n_rows)
            .map(|r| {
                let lo = r as u64 * k as u64;
                let hi = (r as u64 + 1) * k as u64;
                hi.min(n_rows as u64).saturating_sub(lo)
            })
            .collect();
        let col_preimages: Vec<u64> = (0..n_chan)
            .map(|c| {
                let lo = c as u64 * k as u64;
                let hi = (c as u64 + 1) * k as u64;
                hi.min(n_chan as u64).saturating_sub(lo)
            })
            .collect();
        let mut idx = 0;
        for &rp in &row_preimages {
            if rp == 0 {
                idx += n_chan as usize;
                continue;
            }
            for &cp in &col_preimages {
                counts[idx] += rp * cp;
                idx += 1;
            }
        }
    }
    TouchMap {
        n_rows,
        n_chan,
        n_hp,
        counts,
    }
}

/// Cumulative share of all touches captured by the most-touched points.
#[derive(Debug, Clone)]
pub struct CoverageCurve {
    /// Cumulative touch counts in preload priority order.
    cumulative: Vec<u64>,
    total: u64,
}

impl CoverageCurve {
    pub fn n_points(&self) -> usize {
        self.cumulative.len()
    }

    pub fn total_touches(&self) -> u64 {
        self.total
    }

    /// Share of all touches captured by the first `n` ranked points.
    pub fn coverage_of(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.cumulative[n.min(self.cumulative.len()) - 1] as f64 / self.total as f64
    }

    /// Minimal fraction of points whose summed touches reach at least
    /// fraction `p` of all touches.
    pub fn fraction_for_coverage(&self, p: f64) -> Result<f64, AnalysisError> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(AnalysisError::CoverageFraction(p));
        }
        let target = (p * self.total as f64).ceil() as u64;
        let idx = self.cumulative.partition_point(|&c| c < target);
        Ok((idx + 1) as f64 / self.cumulative.len() as f64)
    }

    /// (point fraction, touch fraction) pairs, one per ranked point.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.cumulative.len() as f64;
        let total = self.total as f64;
        self.cumulative
            .iter()
            .enumerate()
            .map(move |(i, &c)| ((i + 1) as f64 / n, c as f64 / total))
    }
}

pub fn coverage_curve(map: &TouchMap) -> CoverageCurve {
    let mut sorted: Vec<u64> = map.counts().to_vec();
    sorted.sort_unstable_by_key(|&c| std::cmp::Reverse(c));
    let mut cumulative = sorted;
    let mut acc = 0u64;
    for c in cumulative.iter_mut() {
        acc += *c;
        *c = acc;
    }
    CoverageCurve {
        cumulative,
        total: acc,
    }
}

/// Share of all touches captured by a rectangular region (half-open ranges).
pub fn region_touch_share(
    map: &TouchMap,
    rows: std::ops::Range<u32>,
    cols: std::ops::Range<u32>,
) -> f64 {
    let mut sum = 0u64;
    for r in rows {
        for c in cols.clone() {
            sum += map.count(r, c);
        }
    }
    sum as f64 / map.total() as f64
}

/// Closed-form global-memory access counts per strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmaEntry {
    pub loads: u64,
    pub stores: u64,
}

/// Single-plane-at-a-time traffic with deduplicated stretch loads: every
/// plane is read and written through global memory once, plus the distinct
/// stretch sources of each plane beyond the first.
pub fn analytic_single_hp(params: &HsParams) -> GmaEntry {
    let plane = params.fop_len_u64();
    let stretch: u64 = (2..=params.n_hp as u64)
        .map(|i| (params.n_chan as u64).div_ceil(i) * (params.n_rows as u64).div_ceil(i))
        .sum();
    GmaEntry {
        loads: params.n_hp as u64 * plane + stretch,
        stores: (params.n_hp as u64 - 1) * plane,
    }
}

/// The alternative closed form that counts the distinct stretch sources of
/// every plane (including the first) and prices each summed plane at two
/// plane-sized transfers. Its grand total coincides with
/// [`analytic_single_hp`]'s loads plus stores; only the load/store split
/// differs, and the counted run reproduces the split form.
pub fn analytic_single_hp_min(params: &HsParams) -> u64 {
    let plane = params.fop_len_u64();
    let stretch: u64 = (1..=params.n_hp as u64)
        .map(|i| (params.n_chan as u64).div_ceil(i) * (params.n_rows as u64).div_ceil(i))
        .sum();
    stretch + 2 * (params.n_hp as u64 - 1) * plane
}

/// All-planes-per-point traffic with no reuse at all.
pub fn analytic_mhp_naive(params: &HsParams) -> GmaEntry {
    GmaEntry {
        loads: params.n_hp as u64 * params.fop_len_u64(),
        stores: 0,
    }
}

/// Hot-point preloading traffic for a given preload size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotPreloadGma {
    /// Preload traffic plus summing-phase misses; what the counters report.
    pub loads: u64,
    /// Summing-phase misses only (total touches minus those absorbed by the
    /// resident set).
    pub summing_loads: u64,
    /// Touches absorbed per preloaded point.
    pub touch_ratio: f64,
}

pub fn analytic_mhp_h(params: &HsParams, map: &TouchMap, preload_size: usize) -> HotPreloadGma {
    let ranked = map.ranked_points();
    let preload = &ranked[..preload_size.min(ranked.len())];
    let absorbed: u64 = preload.iter().map(|&(r, c)| map.count(r, c)).sum();
    let total = params.n_hp as u64 * params.fop_len_u64();
    let summing_loads = total - absorbed;
    HotPreloadGma {
        loads: preload.len() as u64 + summing_loads,
        summing_loads,
        touch_ratio: if preload.is_empty() {
            0.0
        } else {
            absorbed as f64 / preload.len() as f64
        },
    }
}

/// Necessary-points traffic: per block, each plane's needed rectangle is
/// loaded exactly once.
pub fn analytic_mhp_n(params: &HsParams, n_col: u32) -> Result<GmaEntry, reorder::ReorderError> {
    let profile = reorder::demand_profile(params, n_col)?;
    Ok(GmaEntry {
        loads: profile.per_block.iter().sum(),
        stores: 0,
    })
}

/// Reordered-FOP traffic: the full segment of every workgroup is streamed,
/// padding included.
pub fn analytic_mhp_r(layout: &RfopLayout) -> GmaEntry {
    GmaEntry {
        loads: layout.total_streamed(),
        stores: 0,
    }
}

/// One strategy's measured traffic next to its closed form.
#[derive(Debug, Clone)]
pub struct GmaRow {
    pub strategy: String,
    pub measured: crate::memory::AccessStats,
    pub analytic: GmaEntry,
    /// Measured load traffic in plane sizes (the constant of the closed
    /// form: the hot-cache, necessary-points and reordered variants call it
    /// C0, C1 and C2 respectively).
    pub load_constant: f64,
}

/// Side-by-side measured/analytic access counts for a set of strategy runs.
#[derive(Debug, Clone, Default)]
pub struct GmaReport {
    pub rows: Vec<GmaRow>,
}

impl GmaReport {
    pub fn push(
        &mut self,
        strategy: impl Into<String>,
        measured: crate::memory::AccessStats,
        analytic: GmaEntry,
        fop_len: u64,
    ) {
        self.rows.push(GmaRow {
            strategy: strategy.into(),
            measured,
            analytic,
            load_constant: measured.global_loads as f64 / fop_len as f64,
        });
    }

    /// True when every measured count equals its closed form.
    pub fn consistent(&self) -> bool {
        self.rows.iter().all(|r| {
            r.measured.global_loads == r.analytic.loads
                && r.measured.global_stores == r.analytic.stores
        })
    }
}

/// Result of comparing one engine's output to the reference.
#[derive(Debug, Clone, PartialEq)]
pub enum Divergence {
    PlaneValue {
        engine: usize,
        plane: u8,
        row: u32,
        col: u32,
        reference_bits: u32,
        got_bits: u32,
    },
    PlaneMissing {
        engine: usize,
    },
    CandidateSet {
        engine: usize,
        plane: u8,
        detail: String,
    },
    RingOverflowShape {
        engine: usize,
        plane: u8,
        len: usize,
        expected: usize,
    },
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Divergence::PlaneValue { engine, plane, row, col, reference_bits, got_bits } => write!(
                f,
                "engine {engine}: plane {plane} value at ({row}, {col}) is {:?} (bits {got_bits:#010x}), reference {:?} (bits {reference_bits:#010x})",
                f32::from_bits(*got_bits),
                f32::from_bits(*reference_bits),
            ),
            Divergence::PlaneMissing { engine } => {
                write!(f, "engine {engine}: no debug planes retained")
            }
            Divergence::CandidateSet { engine, plane, detail } => {
                write!(f, "engine {engine}: plane {plane} candidate sets differ: {detail}")
            }
            Divergence::RingOverflowShape { engine, plane, len, expected } => write!(
                f,
                "engine {engine}: plane {plane} overflowed ring holds {len} entries, expected {expected}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub pass: bool,
    /// First divergence found per diverging engine.
    pub divergences: Vec<Divergence>,
}

fn candidate_multiset(ring: &crate::candidate::CandidateRing) -> Vec<(u32, u8, u32, u32)> {
    let mut v: Vec<(u32, u8, u32, u32)> = ring
        .iter()
        .map(|r| (r.filter, r.plane, r.bin, r.amplitude.to_bits()))
        .collect();
    v.sort_unstable();
    v
}

/// Checks that every output agrees with the reference: debug planes must be
/// bit-identical, and candidate rings must hold equal multisets wherever the
/// plane's detections fit the ring. Overflowing rings may legitimately hold
/// different subsets (traversal order differs between engines), so they are
/// only checked for shape.
pub fn verify_equivalence(
    reference: &EngineOutput,
    outputs: &[&EngineOutput],
    n_cand: u32,
) -> EquivalenceReport {
    let mut divergences = Vec::new();
    for (engine, out) in outputs.iter().enumerate() {
        if let Some(d) = first_divergence(reference, out, engine, n_cand) {
            divergences.push(d);
        }
    }
    EquivalenceReport {
        pass: divergences.is_empty(),
        divergences,
    }
}

fn first_divergence(
    reference: &EngineOutput,
    out: &EngineOutput,
    engine: usize,
    n_cand: u32,
) -> Option<Divergence> {
    match (&reference.final_planes, &out.final_planes) {
        (Some(ref_planes), Some(planes)) => {
            for (k0, (rp, op)) in ref_planes.iter().zip(planes).enumerate() {
                for i in 0..rp.n_rows() {
                    for j in 0..rp.n_chan() {
                        let (a, b) = (rp.get(i, j).to_bits(), op.get(i, j).to_bits());
                        if a != b {
                            return Some(Divergence::PlaneValue {
                                engine,
                                plane: k0 as u8 + 1,
                                row: i,
                                col: j,
                                reference_bits: a,
                                got_bits: b,
                            });
                        }
                    }
                }
            }
        }
        (Some(_), None) | (None, Some(_)) | (None, None) => {
            if out.final_planes.is_none() {
                return Some(Divergence::PlaneMissing { engine });
            }
        }
    }

    for (k0, (ref_ring, ring)) in reference.candidates.iter().zip(&out.candidates).enumerate() {
        let plane = k0 as u8 + 1;
        let fits = ref_ring.total_pushed() <= n_cand as u64 && ring.total_pushed() <= n_cand as u64;
        if fits {
            if ref_ring.total_pushed() != ring.total_pushed() {
                return Some(Divergence::CandidateSet {
                    engine,
                    plane,
                    detail: format!(
                        "{} detections, reference {}",
                        ring.total_pushed(),
                        ref_ring.total_pushed()
                    ),
                });
            }
            let (a, b) = (candidate_multiset(ref_ring), candidate_multiset(ring));
            if a != b {
                let diff = a
                    .iter()
                    .zip(&b)
                    .find(|(x, y)| x != y)
                    .map(|(x, y)| format!("first mismatch: reference {x:?} vs {y:?}"))
                    .unwrap_or_else(|| "prefix equal, lengths differ".into());
                return Some(Divergence::CandidateSet {
                    engine,
                    plane,
                    detail: diff,
                });
            }
        } else {
            let expected = n_cand as usize;
            if ring.total_pushed() > n_cand as u64 && ring.len() != expected {
                return Some(Divergence::RingOverflowShape {
                    engine,
                    plane,
                    len: ring.len(),
                    expected,
                });
            }
        }
    }
    None
}
