//! Workgroup-demand geometry, loaded-points-per-cycle planning and
//! construction of the reordered FOP.
//!
//! A workgroup covers one aligned block of `n_col` output columns and
//! produces all harmonic planes for it. Per plane `k` it needs a rectangle of
//! FOP sources: rows `0..distinct_rows(k)` and the block's floor-divided
//! column range. Planning sizes a fixed per-workgroup segment so the
//! worst-case block fits; building lays those rectangles out consecutively,
//! plane by plane, and pads the remainder with dummy zeros.

use thiserror::Error;

use crate::params::HsParams;
use crate::plane::FopPlane;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReorderError {
    #[error("channel count {n_chan} is not divisible by {n_col} columns per workgroup")]
    Divisibility { n_chan: u32, n_col: u32 },
    #[error("points per work-item must be at least 1")]
    PointsPerWorkItem,
}

/// Count of distinct stretch-source rows feeding plane `k`:
/// `|{ r/k : 0 <= r < n_rows }| = (n_rows-1)/k + 1`.
#[inline]
pub fn distinct_rows(k: u32, n_rows: u32) -> u32 {
    debug_assert!(k >= 1 && n_rows >= 1);
    (n_rows - 1) / k + 1
}

/// Distinct stretch-source columns of plane `k` for the aligned block
/// starting at `start`: a consecutive range, so just its width.
#[inline]
fn block_distinct_cols(k: u32, start: u32, n_col: u32) -> u32 {
    (start + n_col - 1) / k - start / k + 1
}

/// Worst-case distinct source columns of plane `k` over all aligned blocks
/// of `n_col` columns, found by brute force. The per-block value only
/// depends on `start mod k`, so one period of the alignment pattern covers
/// every case.
pub fn max_distinct_cols(k: u32, n_col: u32, n_chan: u32) -> u32 {
    debug_assert!(n_chan.is_multiple_of(n_col));
    let n_blocks = n_chan / n_col;
    let mut best = 0;
    for m in 0..n_blocks.min(k) {
        best = best.max(block_distinct_cols(k, m * n_col, n_col));
    }
    best
}

/// Worst-case needed points for one workgroup of `n_col` columns:
/// the per-plane maxima summed, which is the constant the streaming layout
/// must budget for.
pub fn workgroup_demand(params: &HsParams, n_col: u32) -> Result<u64, ReorderError> {
    if n_col == 0 || !params.n_chan.is_multiple_of(n_col) {
        return Err(ReorderError::Divisibility {
            n_chan: params.n_chan,
            n_col,
        });
    }
    Ok((1..=params.n_hp as u32)
        .map(|k| {
            distinct_rows(k, params.n_rows) as u64
                * max_distinct_cols(k, n_col, params.n_chan) as u64
        })
        .sum())
}

/// Exact per-block demand plus the max/mean summary, for demand-vs-columns
/// curves.
#[derive(Debug, Clone)]
pub struct DemandProfile {
    pub per_block: Vec<u64>,
    pub max: u64,
    pub mean: f64,
}

pub fn demand_profile(params: &HsParams, n_col: u32) -> Result<DemandProfile, ReorderError> {
    if n_col == 0 || !params.n_chan.is_multiple_of(n_col) {
        return Err(ReorderError::Divisibility {
            n_chan: params.n_chan,
            n_col,
        });
    }
    let n_blocks = params.n_chan / n_col;
    let mut per_block = Vec::with_capacity(n_blocks as usize);
    for m in 0..n_blocks {
        let start = m * n_col;
        let d: u64 = (1..=params.n_hp as u32)
            .map(|k| {
                distinct_rows(k, params.n_rows) as u64 * block_distinct_cols(k, start, n_col) as u64
            })
            .sum();
        per_block.push(d);
    }
    let max = per_block.iter().copied().max().unwrap_or(0);
    let total: u64 = per_block.iter().sum();
    let mean = total as f64 / n_blocks as f64;
    Ok(DemandProfile {
        per_block,
        max,
        mean,
    })
}

/// Geometry of a reordered-FOP run.
///
/// `s_workgroup` is kept as the exact rational `n_col * n_rows / n_p_wi`
/// inside the planning ceiling; the physical buffer rounds the work-item
/// count up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfopLayout {
    pub n_rows: u32,
    pub n_chan: u32,
    pub n_hp: u8,
    /// Columns per workgroup.
    pub n_col: u32,
    /// Output points handled per work-item.
    pub n_p_wi: u32,
    /// Points streamed per clock cycle.
    pub n_lp_cc: u32,
    /// Whether `n_lp_cc` was rounded up to a power of two.
    pub pow2_opt: bool,
    /// Worst-case needed points per workgroup.
    pub demand: u64,
    pub n_workgroups: u32,
}

impl RfopLayout {
    /// Work-items per workgroup as the exact rational (numerator,
    /// denominator) = (n_col * n_rows, n_p_wi).
    pub fn s_workgroup_rational(&self) -> (u64, u64) {
        (self.n_col as u64 * self.n_rows as u64, self.n_p_wi as u64)
    }

    pub fn s_workgroup(&self) -> f64 {
        let (num, den) = self.s_workgroup_rational();
        num as f64 / den as f64
    }

    /// Physical work-items per workgroup.
    pub fn s_workgroup_ceil(&self) -> u64 {
        let (num, den) = self.s_workgroup_rational();
        num.div_ceil(den)
    }

    /// Physical points per workgroup segment, padding included.
    pub fn segment_len(&self) -> u64 {
        self.n_lp_cc as u64 * self.s_workgroup_ceil()
    }

    /// Total streamed points over the whole plane.
    pub fn total_streamed(&self) -> u64 {
        self.segment_len() * self.n_workgroups as u64
    }

    /// Streamed points over FOP size.
    pub fn load_ratio(&self) -> f64 {
        self.total_streamed() as f64 / (self.n_rows as u64 * self.n_chan as u64) as f64
    }

    /// The planning-time ratio `n_lp_cc / n_p_wi` (uses the exact rational
    /// workgroup size, so it can sit below the physical
    /// [`load_ratio`](Self::load_ratio) when `n_p_wi` does not divide the
    /// block's point count).
    pub fn planned_ratio(&self) -> f64 {
        self.n_lp_cc as f64 / self.n_p_wi as f64
    }
}

/// Sizes the per-cycle stream for one `(n_col, n_p_wi)` choice:
/// `n_lp_cc = ceil(demand * n_p_wi / (n_col * n_rows))`, optionally rounded
/// up to the next power of two (the variant that compiles to cheaper
/// load logic).
pub fn plan_layout(
    params: &HsParams,
    n_col: u32,
    n_p_wi: u32,
    pow2_opt: bool,
) -> Result<RfopLayout, ReorderError> {
    if n_p_wi == 0 {
        return Err(ReorderError::PointsPerWorkItem);
    }
    let demand = workgroup_demand(params, n_col)?;
    let s_num = n_col as u64 * params.n_rows as u64;
    let mut n_lp_cc = (demand * n_p_wi as u64).div_ceil(s_num) as u32;
    if pow2_opt {
        n_lp_cc = n_lp_cc.next_power_of_two();
    }
    Ok(RfopLayout {
        n_rows: params.n_rows,
        n_chan: params.n_chan,
        n_hp: params.n_hp,
        n_col,
        n_p_wi,
        n_lp_cc,
        pow2_opt,
        demand,
        n_workgroups: params.n_chan / n_col,
    })
}

/// Sentinel marking a padding slot in the slot-source table.
pub const PAD_SLOT: u32 = u32::MAX;

/// Packs a source index as `row << 24 | col` (distinct from [`PAD_SLOT`]
/// because legal rows keep the top bits clear).
#[inline]
pub fn pack_slot(row: u32, col: u32) -> u32 {
    debug_assert!(row < 1 << 7 && col < 1 << 21);
    (row << 24) | col
}

#[inline]
pub fn unpack_slot(slot: u32) -> Option<(u32, u32)> {
    if slot == PAD_SLOT {
        None
    } else {
        Some((slot >> 24, slot & ((1 << 24) - 1)))
    }
}

/// Source rectangle of plane `k` for one block: rows `0..rows`, columns
/// `col_start..col_start + cols`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceGeometry {
    pub rows: u32,
    pub col_start: u32,
    pub cols: u32,
    /// Offset of this slice inside the workgroup segment.
    pub offset: u64,
}

/// Per-plane slice geometry for block `block` of a layout. Slices are laid
/// out in ascending plane order, each row-major.
pub fn block_slices(layout: &RfopLayout, block: u32) -> Vec<SliceGeometry> {
    let start = block * layout.n_col;
    let mut offset = 0u64;
    let mut slices = Vec::with_capacity(layout.n_hp as usize);
    for k in 1..=layout.n_hp as u32 {
        let rows = distinct_rows(k, layout.n_rows);
        let col_start = start / k;
        let cols = block_distinct_cols(k, start, layout.n_col);
        slices.push(SliceGeometry {
            rows,
            col_start,
            cols,
            offset,
        });
        offset += rows as u64 * cols as u64;
    }
    slices
}

/// The reordered FOP: one fixed-length segment per workgroup holding the
/// needed points of every plane consecutively, zero-padded at the end, plus
/// a slot-to-source table so consumers never re-derive the geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct RfopBuffer {
    pub layout: RfopLayout,
    /// `n_workgroups * segment_len` amplitudes.
    pub data: Vec<f32>,
    /// One packed source (or [`PAD_SLOT`]) per data slot.
    pub slots: Vec<u32>,
}

impl RfopBuffer {
    pub fn segment(&self, block: u32) -> &[f32] {
        let len = self.layout.segment_len() as usize;
        &self.data[block as usize * len..(block as usize + 1) * len]
    }

    pub fn slot_source(&self, index: usize) -> Option<(u32, u32)> {
        unpack_slot(self.slots[index])
    }
}

/// Reorders `fop` according to `layout`. Per-block needed points are laid
/// out plane-ascending, row-major within a plane; the remaining slots are
/// padded with 0.0 and marked in the slot table so compute never reads them.
pub fn build_rfop(fop: &FopPlane, layout: &RfopLayout) -> RfopBuffer {
    assert!(
        fop.n_rows() == layout.n_rows && fop.n_chan() == layout.n_chan,
        "layout/plane mismatch"
    );
    let seg_len = layout.segment_len() as usize;
    let total = seg_len * layout.n_workgroups as usize;
    let mut data = vec![0.0f32; total];
    let mut slots = vec![PAD_SLOT; total];

    for block in 0..layout.n_workgroups {
        let base = block as usize * seg_len;
        let mut cursor = base;
        for slice in block_slices(layout, block) {
            for r in 0..slice.rows {
                for c in slice.col_start..slice.col_start + slice.cols {
                    data[cursor] = fop.get(r, c);
                    slots[cursor] = pack_slot(r, c);
                    cursor += 1;
                }
            }
        }
        debug_assert!(
            cursor - base <= seg_len,
            "block demand exceeds planned segment"
        );
    }
    RfopBuffer {
        layout: *layout,
        data,
        slots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn params(n_rows: u32, n_chan: u32, n_hp: u8) -> HsParams {
        HsParams::new(n_rows, n_chan, n_hp, 200).unwrap()
    }

    #[test]
    fn distinct_rows_examples() {
        assert_eq!(distinct_rows(1, 42), 42);
        assert_eq!(distinct_rows(2, 42), 21);
        assert_eq!(distinct_rows(8, 42), 6);
    }

    #[test]
    fn distinct_rows_matches_enumeration() {
        for n_rows in [1u32, 2, 7, 42, 85] {
            for k in 1..=8u32 {
                let set: BTreeSet<u32> = (0..n_rows).map(|r| r / k).collect();
                assert_eq!(distinct_rows(k, n_rows), set.len() as u32);
            }
        }
    }

    #[test]
    fn max_distinct_cols_examples() {
        assert_eq!(max_distinct_cols(1, 16, 4096), 16);
        assert_eq!(max_distinct_cols(2, 16, 4096), 8);
        assert_eq!(max_distinct_cols(7, 16, 4096), 4);
    }

    #[test]
    fn max_distinct_cols_matches_full_block_scan() {
        let n_chan = 4096;
        for n_col in [1u32, 4, 16, 64] {
            for k in 1..=8u32 {
                let mut best = 0;
                for m in 0..n_chan / n_col {
                    let a = m * n_col;
                    let set: BTreeSet<u32> = (a..a + n_col).map(|j| j / k).collect();
                    best = best.max(set.len() as u32);
                }
                assert_eq!(
                    max_distinct_cols(k, n_col, n_chan),
                    best,
                    "k={k} n_col={n_col}"
                );
            }
        }
    }

    #[test]
    fn seven_stretch_first_maxed_at_fourth_block() {
        // With 16-column blocks the plane-7 worst case of 4 distinct source
        // columns is first reached by the block starting at j = 48.
        let mut first = None;
        for m in 0..256u32 {
            if block_distinct_cols(7, m * 16, 16) == 4 {
                first = Some(m * 16);
                break;
            }
        }
        assert_eq!(first, Some(48));
    }

    #[test]
    fn demand_single_column_is_row_sum() {
        let p = params(42, 4096, 8);
        assert_eq!(workgroup_demand(&p, 1).unwrap(), 116);
        let rows_only: u64 = (1..=8).map(|k| distinct_rows(k, 42) as u64).sum();
        assert_eq!(rows_only, 116);
    }

    #[test]
    fn demand_reference_values() {
        let p = params(42, 4096, 8);
        assert_eq!(workgroup_demand(&p, 4).unwrap(), 299);
        assert_eq!(workgroup_demand(&p, 16).unwrap(), 1068);
    }

    #[test]
    fn demand_matches_brute_force_point_sets() {
        let p = params(42, 4096, 8);
        for n_col in [1u32, 4, 16] {
            let mut brute_max = 0u64;
            for m in 0..(4096 / n_col) {
                let a = m * n_col;
                let mut block_total = 0u64;
                for k in 1..=8u32 {
                    let set: BTreeSet<(u32, u32)> = (0..42)
                        .flat_map(|r| (a..a + n_col).map(move |j| (r / k, j / k)))
                        .collect();
                    block_total += set.len() as u64;
                }
                brute_max = brute_max.max(block_total);
            }
            assert_eq!(
                workgroup_demand(&p, n_col).unwrap(),
                brute_max,
                "n_col={n_col}"
            );
        }
    }

    #[test]
    fn demand_profile_summaries() {
        let p = params(42, 4096, 8);
        let prof = demand_profile(&p, 16).unwrap();
        assert_eq!(prof.per_block.len(), 256);
        assert_eq!(prof.max, 1068);
        assert!(prof.mean <= prof.max as f64);
        assert!(prof.per_block.iter().all(|&d| d <= prof.max));
    }

    #[test]
    fn demand_rejects_nondivisible_columns() {
        let p = params(42, 4096, 8);
        assert!(matches!(
            workgroup_demand(&p, 3),
            Err(ReorderError::Divisibility { .. })
        ));
    }

    #[test]
    fn plan_reference_entries() {
        let p = params(42, 4096, 8);
        assert_eq!(plan_layout(&p, 1, 8, false).unwrap().n_lp_cc, 23);
        let opt = plan_layout(&p, 64, 8, true).unwrap();
        assert_eq!(opt.n_lp_cc, 16);
        assert_eq!(opt.planned_ratio(), 2.0);
        assert_eq!(plan_layout(&p, 16, 4, false).unwrap().n_lp_cc, 7);
        assert_eq!(plan_layout(&p, 16, 4, true).unwrap().n_lp_cc, 8);
    }

    #[test]
    fn plan_single_plane_single_column_streams_itself() {
        let p = params(42, 4096, 1);
        let layout = plan_layout(&p, 1, 1, false).unwrap();
        assert_eq!(layout.n_lp_cc, 1);
        assert_eq!(layout.demand, 42);
    }

    #[test]
    fn padding_inequality_holds_across_grid() {
        let p = params(42, 4096, 8);
        for n_col in [1u32, 4, 16, 64] {
            for n_p_wi in [1u32, 2, 4, 8] {
                for pow2 in [false, true] {
                    let l = plan_layout(&p, n_col, n_p_wi, pow2).unwrap();
                    let (num, den) = l.s_workgroup_rational();
                    // demand <= n_lp_cc * s_workgroup, as exact integers.
                    assert!(
                        l.demand * den <= l.n_lp_cc as u64 * num,
                        "demand {} > {} * {}/{}",
                        l.demand,
                        l.n_lp_cc,
                        num,
                        den
                    );
                    assert!(!pow2 || l.n_lp_cc.is_power_of_two());
                }
            }
        }
    }

    #[test]
    fn build_zero_plane_is_zero_padded_buffer() {
        let p = params(6, 8, 3);
        let layout = plan_layout(&p, 2, 1, false).unwrap();
        let fop = FopPlane::zeros(6, 8);
        let buf = build_rfop(&fop, &layout);
        assert_eq!(buf.data.len(), layout.total_streamed() as usize);
        assert!(buf.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_column_segment_slices_and_padding() {
        let p = params(42, 64, 8);
        let layout = plan_layout(&p, 1, 1, false).unwrap();
        assert_eq!(layout.n_lp_cc, 3);
        assert_eq!(layout.segment_len(), 126);
        let fop = FopPlane::new(42, 64, (0..42 * 64).map(|n| n as f32).collect()).unwrap();
        let buf = build_rfop(&fop, &layout);

        let j = 5u32;
        let expect_lens = [42u32, 21, 14, 11, 9, 7, 6, 6];
        let slices = block_slices(&layout, j);
        let mut offset = 0u64;
        for (k0, slice) in slices.iter().enumerate() {
            let k = k0 as u32 + 1;
            assert_eq!(slice.rows, expect_lens[k0]);
            assert_eq!(slice.cols, 1);
            assert_eq!(slice.offset, offset);
            offset += slice.rows as u64;
            // Slice contents are the FOP column j/k, rows ascending.
            let base = j as usize * 126 + slice.offset as usize;
            for r in 0..slice.rows {
                assert_eq!(buf.data[base + r as usize], fop.get(r, j / k));
            }
        }
        assert_eq!(offset, 116);
        // The last 10 slots of the segment are padding.
        for s in 116..126 {
            assert_eq!(buf.slot_source(j as usize * 126 + s), None);
            assert_eq!(buf.data[j as usize * 126 + s], 0.0);
        }
    }

    #[test]
    fn every_data_slot_matches_its_recorded_source() {
        let p = params(11, 32, 5);
        let fop = FopPlane::new(11, 32, (0..11 * 32).map(|n| (n as f32).cos()).collect()).unwrap();
        for n_col in [1u32, 2, 4, 8] {
            let layout = plan_layout(&p, n_col, 2, false).unwrap();
            let buf = build_rfop(&fop, &layout);
            for (idx, &slot) in buf.slots.iter().enumerate() {
                match unpack_slot(slot) {
                    Some((r, c)) => {
                        assert_eq!(buf.data[idx].to_bits(), fop.get(r, c).to_bits())
                    }
                    None => assert_eq!(buf.data[idx], 0.0),
                }
            }
        }
    }
}
