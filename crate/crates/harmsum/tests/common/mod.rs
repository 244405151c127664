//! Shared helpers for integration tests: the independent brute-force oracle
//! and input builders.

use harmsum::candidate::CandidateRing;
use harmsum::io::{generate_fop, InjectionSpec};
use harmsum::params::HsParams;
use harmsum::plane::{FopPlane, ThresholdArray};

/// Independent route to the harmonic planes: materialize every stretch plane
/// as a full array by direct floor-divided indexing, then accumulate them
/// elementwise in f32, ascending plane order. No engine or chain code is
/// involved.
pub fn oracle_planes(fop: &FopPlane, n_hp: u8) -> Vec<FopPlane> {
    let (rows, cols) = (fop.n_rows(), fop.n_chan());
    let mut out: Vec<FopPlane> = Vec::with_capacity(n_hp as usize);
    let mut running = FopPlane::zeros(rows, cols);
    for k in 1..=n_hp as u32 {
        for i in 0..rows {
            for j in 0..cols {
                let stretched = fop.get(i / k, j / k);
                running.set(i, j, running.get(i, j) + stretched);
            }
        }
        out.push(running.clone());
    }
    out
}

/// Detections per plane from oracle planes, as sorted multisets of
/// `(filter, plane, bin, amplitude bits)`.
pub fn oracle_detections(
    planes: &[FopPlane],
    ta: &ThresholdArray,
) -> Vec<Vec<(u32, u8, u32, u32)>> {
    let mut per_plane = Vec::with_capacity(planes.len());
    for (k0, plane) in planes.iter().enumerate() {
        let k = k0 as u8 + 1;
        let mut set = Vec::new();
        for i in 0..plane.n_rows() {
            let threshold = ta.get(k, i);
            for j in 0..plane.n_chan() {
                let v = plane.get(i, j);
                if v > threshold {
                    set.push((i, k, j, v.to_bits()));
                }
            }
        }
        set.sort_unstable();
        per_plane.push(set);
    }
    per_plane
}

pub fn ring_multiset(ring: &CandidateRing) -> Vec<(u32, u8, u32, u32)> {
    let mut v: Vec<(u32, u8, u32, u32)> = ring
        .iter()
        .map(|r| (r.filter, r.plane, r.bin, r.amplitude.to_bits()))
        .collect();
    v.sort_unstable();
    v
}

/// Seeded noisy plane with one harmonic target boosted, the standard
/// equivalence-run input.
pub fn seeded_plane(params: &HsParams, seed: u64, amplitude: f32) -> FopPlane {
    generate_fop(
        params,
        &InjectionSpec {
            target_row: params.n_rows / 4,
            target_bin: params.n_chan / 3,
            amplitude,
            seed,
            noise_scale: 1.0,
        },
    )
    .expect("valid injection")
}

/// Thresholds `sigma` standard deviations above the mean of a sum of k
/// uniform [0, 1) terms.
pub fn sigma_thresholds(n_hp: u8, n_rows: u32, sigma: f64) -> ThresholdArray {
    ThresholdArray::from_fn(n_hp, n_rows, |k, _| {
        let k = k as f64;
        (k / 2.0 + sigma * (k / 12.0).sqrt()) as f32
    })
}

/// Prints the per-criterion verdict line and panics on failure.
pub fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[acceptance] {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion} failed: {detail}");
}
