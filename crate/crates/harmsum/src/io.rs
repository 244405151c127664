//! Bit-exact file formats and the synthetic FOP generator.
//!
//! All formats are little-endian and fully deterministic. The plane format
//! is `FOPB` (magic, version, dimensions, then raw 32-bit amplitudes
//! row-major); the reordered-plane format `RFOP` additionally carries its
//! layout and the slot-to-source table so consumers never re-derive the
//! geometry. Candidates are written either as packed `(u32, f32)` pairs or
//! as CSV; thresholds are a small CSV of one row per harmonic plane.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{CoverageCurve, TouchMap};
use crate::candidate::{CandidateRecord, CandidateRing};
use crate::memory::AccessStats;
use crate::params::HsParams;
use crate::plane::{FopPlane, PlaneError, ThresholdArray};
use crate::reorder::{self, RfopBuffer};
use crate::sum::stretch_index;

pub const FOP_MAGIC: &[u8; 4] = b"FOPB";
pub const RFOP_MAGIC: &[u8; 4] = b"RFOP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad magic: expected {expected:?}, got {got:?}")]
    BadMagic { expected: String, got: String },
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("truncated payload: expected {expected} bytes, got {got}")]
    Truncated { expected: u64, got: u64 },
    #[error("{0}")]
    Plane(#[from] PlaneError),
    #[error("dimension field out of range: {0}")]
    Dims(String),
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("reordered buffer is inconsistent: {0}")]
    Layout(String),
}

fn read_u32(r: &mut impl Read) -> Result<u32, FileError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64, FileError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_magic(r: &mut impl Read, expected: &[u8; 4]) -> Result<(), FileError> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)?;
    if &got != expected {
        return Err(FileError::BadMagic {
            expected: String::from_utf8_lossy(expected).into_owned(),
            got: String::from_utf8_lossy(&got).into_owned(),
        });
    }
    Ok(())
}

fn read_f32_payload(r: &mut impl Read, count: usize) -> Result<Vec<f32>, FileError> {
    let mut bytes = vec![0u8; count * 4];
    let mut filled = 0;
    while filled < bytes.len() {
        match r.read(&mut bytes[filled..])? {
            0 => {
                return Err(FileError::Truncated {
                    expected: bytes.len() as u64,
                    got: filled as u64,
                })
            }
            n => filled += n,
        }
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_f32_payload(w: &mut impl Write, values: &[f32]) -> Result<(), FileError> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Writes a plane: `FOPB`, version, n_rows (u32), n_chan (u64), then the
/// row-major little-endian amplitudes.
pub fn write_fop(path: impl AsRef<Path>, plane: &FopPlane) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FOP_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&plane.n_rows().to_le_bytes())?;
    w.write_all(&(plane.n_chan() as u64).to_le_bytes())?;
    write_f32_payload(&mut w, plane.as_slice())?;
    w.flush()?;
    Ok(())
}

pub fn read_fop(path: impl AsRef<Path>) -> Result<FopPlane, FileError> {
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, FOP_MAGIC)?;
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(FileError::BadVersion(version));
    }
    let n_rows = read_u32(&mut r)?;
    let n_chan = read_u64(&mut r)?;
    if n_rows == 0 || n_chan == 0 || n_chan > u32::MAX as u64 {
        return Err(FileError::Dims(format!(
            "{n_rows} rows x {n_chan} channels"
        )));
    }
    let data = read_f32_payload(&mut r, n_rows as usize * n_chan as usize)?;
    // Non-finite values are rejected with their position by the plane
    // constructor.
    Ok(FopPlane::new(n_rows, n_chan as u32, data)?)
}

/// Writes candidate rings as packed pairs: for each plane ascending, each
/// ring entry in order emits `CL1` (packed u32) then `CL2` (the f32
/// amplitude).
pub fn write_candidates_bin(
    path: impl AsRef<Path>,
    rings: &[CandidateRing],
) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    for ring in rings {
        for rec in ring.iter() {
            let word = rec.encode().expect("ring entries are in packing range");
            w.write_all(&word.to_le_bytes())?;
            w.write_all(&rec.amplitude.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_candidates_bin(path: impl AsRef<Path>) -> Result<Vec<CandidateRecord>, FileError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if !bytes.len().is_multiple_of(8) {
        return Err(FileError::Truncated {
            expected: (bytes.len() as u64).div_ceil(8) * 8,
            got: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            let word = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            let amp = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
            CandidateRecord::decode(word, amp)
        })
        .collect())
}

/// CSV candidate dump: `filter,plane,bin,amplitude,encoded`, plane 1-based.
pub fn write_candidates_csv(
    path: impl AsRef<Path>,
    rings: &[CandidateRing],
) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "filter,plane,bin,amplitude,encoded")?;
    for ring in rings {
        for rec in ring.iter() {
            let word = rec.encode().expect("ring entries are in packing range");
            writeln!(
                w,
                "{},{},{},{},{}",
                rec.filter, rec.plane, rec.bin, rec.amplitude, word
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_candidates_csv(path: impl AsRef<Path>) -> Result<Vec<CandidateRecord>, FileError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if n == 0 {
            continue; // header
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(FileError::Parse {
                line: n + 1,
                detail: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let parse_err = |what: &str| FileError::Parse {
            line: n + 1,
            detail: what.to_string(),
        };
        out.push(CandidateRecord {
            filter: fields[0].parse().map_err(|_| parse_err("bad filter"))?,
            plane: fields[1].parse().map_err(|_| parse_err("bad plane"))?,
            bin: fields[2].parse().map_err(|_| parse_err("bad bin"))?,
            amplitude: fields[3].parse().map_err(|_| parse_err("bad amplitude"))?,
        });
    }
    Ok(out)
}

/// Threshold CSV: one line per harmonic plane, `n_rows` comma-separated
/// values each.
pub fn write_thresholds(path: impl AsRef<Path>, ta: &ThresholdArray) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    for k in 1..=ta.n_hp() {
        let row: Vec<String> = (0..ta.n_rows()).map(|i| ta.get(k, i).to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_thresholds(path: impl AsRef<Path>) -> Result<ThresholdArray, FileError> {
    let r = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut vals = Vec::new();
        for field in line.split(',') {
            vals.push(field.trim().parse::<f32>().map_err(|_| FileError::Parse {
                line: n + 1,
                detail: format!("bad threshold {field:?}"),
            })?);
        }
        if let Some(first) = rows.first() {
            if vals.len() != first.len() {
                return Err(FileError::Parse {
                    line: n + 1,
                    detail: format!("expected {} values, got {}", first.len(), vals.len()),
                });
            }
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(FileError::Parse {
            line: 1,
            detail: "empty threshold file".into(),
        });
    }
    let n_hp = rows.len() as u8;
    let n_rows = rows[0].len() as u32;
    let data: Vec<f32> = rows.into_iter().flatten().collect();
    Ok(ThresholdArray::new(n_hp, n_rows, data)?)
}

/// Writes a reordered buffer: `RFOP`, version, the layout fields, the
/// slot-source table, then the point data.
pub fn write_rfop(path: impl AsRef<Path>, buf: &RfopBuffer) -> Result<(), FileError> {
    let l = &buf.layout;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(RFOP_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&l.n_rows.to_le_bytes())?;
    w.write_all(&(l.n_chan as u64).to_le_bytes())?;
    w.write_all(&(l.n_hp as u32).to_le_bytes())?;
    w.write_all(&l.n_col.to_le_bytes())?;
    w.write_all(&l.n_p_wi.to_le_bytes())?;
    w.write_all(&l.n_lp_cc.to_le_bytes())?;
    w.write_all(&(l.pow2_opt as u32).to_le_bytes())?;
    w.write_all(&l.demand.to_le_bytes())?;
    w.write_all(&(l.n_workgroups as u64).to_le_bytes())?;
    w.write_all(&l.segment_len().to_le_bytes())?;
    for slot in &buf.slots {
        w.write_all(&slot.to_le_bytes())?;
    }
    write_f32_payload(&mut w, &buf.data)?;
    w.flush()?;
    Ok(())
}

pub fn read_rfop(path: impl AsRef<Path>) -> Result<RfopBuffer, FileError> {
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, RFOP_MAGIC)?;
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(FileError::BadVersion(version));
    }
    let n_rows = read_u32(&mut r)?;
    let n_chan = read_u64(&mut r)?;
    let n_hp = read_u32(&mut r)?;
    let n_col = read_u32(&mut r)?;
    let n_p_wi = read_u32(&mut r)?;
    let n_lp_cc = read_u32(&mut r)?;
    let pow2 = read_u32(&mut r)?;
    let demand = read_u64(&mut r)?;
    let n_workgroups = read_u64(&mut r)?;
    let segment_len = read_u64(&mut r)?;

    if n_rows == 0 || n_chan == 0 || n_chan > u32::MAX as u64 || n_hp == 0 || n_hp > 255 {
        return Err(FileError::Dims(format!(
            "{n_rows}x{n_chan} with {n_hp} planes"
        )));
    }
    let params = HsParams::new(n_rows, n_chan as u32, n_hp as u8, 1)
        .map_err(|e| FileError::Dims(e.to_string()))?;
    let layout = reorder::plan_layout(&params, n_col, n_p_wi, pow2 != 0)
        .map_err(|e| FileError::Layout(e.to_string()))?;
    if layout.n_lp_cc != n_lp_cc
        || layout.demand != demand
        || layout.n_workgroups as u64 != n_workgroups
        || layout.segment_len() != segment_len
    {
        return Err(FileError::Layout(format!(
            "stored geometry (lp/cc {n_lp_cc}, demand {demand}, {n_workgroups} workgroups, \
             segment {segment_len}) disagrees with planning"
        )));
    }

    let total = (segment_len * n_workgroups) as usize;
    let mut slot_bytes = vec![0u8; total * 4];
    r.read_exact(&mut slot_bytes)?;
    let slots: Vec<u32> = slot_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let data = read_f32_payload(&mut r, total)?;

    for (idx, &slot) in slots.iter().enumerate() {
        if let Some((row, col)) = reorder::unpack_slot(slot) {
            if row >= n_rows || col as u64 >= n_chan {
                return Err(FileError::Layout(format!(
                    "slot {idx} points at ({row}, {col}) outside the plane"
                )));
            }
        }
    }
    Ok(RfopBuffer {
        layout,
        data,
        slots,
    })
}

/// Flat stats report row; the analytic columns come from the closed forms.
pub fn write_stats_csv(
    path: impl AsRef<Path>,
    strategy: &str,
    stats: &AccessStats,
    fop_len: u64,
    analytic_loads: u64,
    analytic_stores: u64,
) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "strategy,loads,stores,hits,misses,ratio,analytic_loads,analytic_stores"
    )?;
    writeln!(
        w,
        "{strategy},{},{},{},{},{},{analytic_loads},{analytic_stores}",
        stats.global_loads,
        stats.global_stores,
        stats.local_hits,
        stats.local_misses,
        stats.ratio(fop_len),
    )?;
    w.flush()?;
    Ok(())
}

pub fn write_stats_json(
    path: impl AsRef<Path>,
    strategy: &str,
    stats: &AccessStats,
    fop_len: u64,
    analytic_loads: u64,
    analytic_stores: u64,
) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{{")?;
    writeln!(w, "  \"strategy\": \"{strategy}\",")?;
    writeln!(w, "  \"loads\": {},", stats.global_loads)?;
    writeln!(w, "  \"stores\": {},", stats.global_stores)?;
    writeln!(w, "  \"hits\": {},", stats.local_hits)?;
    writeln!(w, "  \"misses\": {},", stats.local_misses)?;
    writeln!(w, "  \"ratio\": {},", stats.ratio(fop_len))?;
    writeln!(w, "  \"analytic_loads\": {analytic_loads},")?;
    writeln!(w, "  \"analytic_stores\": {analytic_stores}")?;
    writeln!(w, "}}")?;
    w.flush()?;
    Ok(())
}

/// Touch-map CSV: one line per row, counts comma-separated.
pub fn write_touch_csv(path: impl AsRef<Path>, map: &TouchMap) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in 0..map.n_rows() {
        let mut line = String::new();
        for c in 0..map.n_chan() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&map.count(r, c).to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Binary PGM heatmap with counts scaled to 0..=255.
pub fn write_touch_pgm(path: impl AsRef<Path>, map: &TouchMap) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "P5")?;
    writeln!(w, "{} {}", map.n_chan(), map.n_rows())?;
    writeln!(w, "255")?;
    let max = map.max().max(1);
    for &count in map.counts() {
        let v = (count * 255 / max) as u8;
        w.write_all(&[v])?;
    }
    w.flush()?;
    Ok(())
}

/// Coverage-curve CSV: `fraction_points,fraction_touches` sampled densely
/// enough to plot (at most ~2000 rows, always including the final point).
pub fn write_curve_csv(path: impl AsRef<Path>, curve: &CoverageCurve) -> Result<(), FileError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "fraction_points,fraction_touches")?;
    let n = curve.n_points();
    let step = (n / 2000).max(1);
    let mut i = 0;
    while i < n {
        let idx = (i + step).min(n);
        writeln!(w, "{},{}", idx as f64 / n as f64, curve.coverage_of(idx))?;
        i += step;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Error, PartialEq)]
pub enum InjectError {
    #[error("injection target ({0}, {1}) is outside the plane")]
    Target(u32, u32),
    #[error("boost amplitude must be positive")]
    Amplitude,
    #[error("noise scale must be finite and nonnegative")]
    NoiseScale,
}

/// A synthetic-plane recipe: seeded uniform noise plus one boosted harmonic
/// target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionSpec {
    pub target_row: u32,
    pub target_bin: u32,
    pub amplitude: f32,
    pub seed: u64,
    pub noise_scale: f32,
}

/// Fills a plane with seeded uniform noise in `[0, noise_scale)`, then
/// boosts every stretch source of the target so its plane-`n_hp` chain value
/// is at least `n_hp * amplitude` above the noise floor.
pub fn generate_fop(params: &HsParams, spec: &InjectionSpec) -> Result<FopPlane, InjectError> {
    if spec.target_row >= params.n_rows || spec.target_bin >= params.n_chan {
        return Err(InjectError::Target(spec.target_row, spec.target_bin));
    }
    if !spec.amplitude.is_finite() || spec.amplitude <= 0.0 {
        return Err(InjectError::Amplitude);
    }
    if !spec.noise_scale.is_finite() || spec.noise_scale < 0.0 {
        return Err(InjectError::NoiseScale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut plane = FopPlane::zeros(params.n_rows, params.n_chan);
    if spec.noise_scale > 0.0 {
        for i in 0..params.n_rows {
            for j in 0..params.n_chan {
                plane.set(i, j, rng.gen::<f32>() * spec.noise_scale);
            }
        }
    }
    for k in 1..=params.n_hp as u32 {
        let (r, c) = stretch_index(spec.target_row, spec.target_bin, k);
        plane.set(r, c, plane.get(r, c) + spec.amplitude);
    }
    Ok(plane)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidate::CandidateRing;
    use tempfile::tempdir;

    fn params(n_rows: u32, n_chan: u32, n_hp: u8) -> HsParams {
        HsParams::new(n_rows, n_chan, n_hp, 200).unwrap()
    }

    #[test]
    fn fop_round_trip_is_bit_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("fop.bin");
        let data: Vec<f32> = (0..42 * 1024).map(|n| (n as f32).sin()).collect();
        let plane = FopPlane::new(42, 1024, data).unwrap();
        write_fop(&path, &plane).unwrap();
        let back = read_fop(&path).unwrap();
        assert_eq!(plane.as_slice(), back.as_slice());
    }

    #[test]
    fn fop_file_size_is_header_plus_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("small.bin");
        let plane = FopPlane::new(4, 8, (0..32).map(|n| n as f32).collect()).unwrap();
        write_fop(&path, &plane).unwrap();
        // 4 magic + 4 version + 4 rows + 8 channels, then 32 f32 points.
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 20 + 128);
    }

    #[test]
    fn fop_rejects_bad_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"XOPB\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_fop(&path), Err(FileError::BadMagic { .. })));
    }

    #[test]
    fn fop_rejects_truncated_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trunc.bin");
        let plane = FopPlane::new(4, 8, vec![1.0; 32]).unwrap();
        write_fop(&path, &plane).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_fop(&path), Err(FileError::Truncated { .. })));
    }

    #[test]
    fn fop_rejects_non_finite_with_position() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nan.bin");
        let plane = FopPlane::new(2, 4, vec![0.0; 8]).unwrap();
        write_fop(&path, &plane).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let nan = f32::NAN.to_le_bytes();
        bytes[20 + 5 * 4..20 + 6 * 4].copy_from_slice(&nan);
        std::fs::write(&path, &bytes).unwrap();
        match read_fop(&path) {
            Err(FileError::Plane(PlaneError::NonFinite { row: 1, col: 1 })) => {}
            other => panic!("expected localized non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn candidate_binary_layout_is_packed_pairs() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cands.bin");
        let mut ring = CandidateRing::new(4);
        ring.push(CandidateRecord {
            filter: 1,
            plane: 1,
            bin: 0,
            amplitude: 2.5,
        });
        write_candidates_bin(&path, &[ring]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // 16777216 little-endian, then 2.5f32 little-endian.
        assert_eq!(bytes, vec![0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x20, 0x40]);
    }

    #[test]
    fn empty_rings_write_empty_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        let rings = vec![CandidateRing::new(4), CandidateRing::new(4)];
        write_candidates_bin(&path, &rings).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 0);
    }

    #[test]
    fn csv_and_binary_decode_identically() {
        let dir = tempdir().unwrap();
        let (bp, cp) = (dir.path().join("c.bin"), dir.path().join("c.csv"));
        let mut r1 = CandidateRing::new(8);
        let mut r2 = CandidateRing::new(8);
        r1.push(CandidateRecord {
            filter: 3,
            plane: 1,
            bin: 99,
            amplitude: 7.25,
        });
        r2.push(CandidateRecord {
            filter: 41,
            plane: 2,
            bin: 1 << 20,
            amplitude: 0.015625,
        });
        r2.push(CandidateRecord {
            filter: 0,
            plane: 2,
            bin: 5,
            amplitude: 123.456,
        });
        let rings = vec![r1, r2];
        write_candidates_bin(&bp, &rings).unwrap();
        write_candidates_csv(&cp, &rings).unwrap();
        let a = read_candidates_bin(&bp).unwrap();
        let b = read_candidates_csv(&cp).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
            assert_eq!(x.amplitude.to_bits(), y.amplitude.to_bits());
        }
    }

    #[test]
    fn touch_map_csv_lists_counts_row_major() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("map.csv");
        let map = crate::analysis::compute_touch_map(&params(2, 3, 2));
        write_touch_csv(&path, &map).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let expect: Vec<String> = (0..2)
            .map(|r| {
                (0..3)
                    .map(|c| map.count(r, c).to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        assert_eq!(text.lines().collect::<Vec<_>>(), expect);
    }

    #[test]
    fn thresholds_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ta.csv");
        let ta = ThresholdArray::from_fn(3, 5, |k, i| k as f32 + i as f32 / 8.0);
        write_thresholds(&path, &ta).unwrap();
        let back = read_thresholds(&path).unwrap();
        assert_eq!(ta.as_slice(), back.as_slice());
        assert_eq!(back.n_hp(), 3);
        assert_eq!(back.n_rows(), 5);
    }

    #[test]
    fn rfop_round_trip_and_validation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.bin");
        let p = params(10, 64, 4);
        let layout = reorder::plan_layout(&p, 4, 2, true).unwrap();
        let plane = FopPlane::new(10, 64, (0..640).map(|n| n as f32 * 0.25).collect()).unwrap();
        let buf = reorder::build_rfop(&plane, &layout);
        write_rfop(&path, &buf).unwrap();
        let back = read_rfop(&path).unwrap();
        assert_eq!(back, buf);
    }

    #[test]
    fn rfop_rejects_tampered_geometry() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.bin");
        let p = params(10, 64, 4);
        let layout = reorder::plan_layout(&p, 4, 2, false).unwrap();
        let buf = reorder::build_rfop(&FopPlane::zeros(10, 64), &layout);
        write_rfop(&path, &buf).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Corrupt the stored loaded-points-per-cycle field.
        let off = 4 + 4 + 4 + 8 + 4 + 4 + 4;
        bytes[off] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_rfop(&path), Err(FileError::Layout(_))));
    }

    #[test]
    fn generator_is_reproducible() {
        let p = params(16, 128, 8);
        let spec = InjectionSpec {
            target_row: 10,
            target_bin: 100,
            amplitude: 50.0,
            seed: 7,
            noise_scale: 1.0,
        };
        let a = generate_fop(&p, &spec).unwrap();
        let b = generate_fop(&p, &spec).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn noiseless_injection_touches_few_points() {
        let p = params(16, 128, 8);
        let spec = InjectionSpec {
            target_row: 9,
            target_bin: 77,
            amplitude: 1.0,
            seed: 0,
            noise_scale: 0.0,
        };
        let plane = generate_fop(&p, &spec).unwrap();
        let nonzero = plane.as_slice().iter().filter(|&&v| v != 0.0).count();
        assert!(nonzero <= 8 && nonzero > 0, "nonzero = {nonzero}");
        // The chain at the target accumulates every boost.
        let chain = crate::sum::harmonic_chain(&plane, 9, 77, 8);
        assert!(chain[7] >= 8.0);
    }

    proptest::proptest! {
        #[test]
        fn fop_file_round_trip_any_plane(
            rows in 1u32..8,
            cols in 1u32..12,
            seed in proptest::num::u64::ANY,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..rows * cols)
                .map(|_| (rng.gen::<f32>() - 0.5) * 1e6)
                .collect();
            let plane = FopPlane::new(rows, cols, data).unwrap();
            let dir = tempdir().unwrap();
            let path = dir.path().join("p.fopb");
            write_fop(&path, &plane).unwrap();
            let back = read_fop(&path).unwrap();
            proptest::prop_assert_eq!(plane.as_slice(), back.as_slice());
            proptest::prop_assert_eq!(
                std::fs::metadata(&path).unwrap().len(),
                20 + rows as u64 * cols as u64 * 4
            );
        }
    }

    #[test]
    fn generator_validates_inputs() {
        let p = params(16, 128, 8);
        let bad_target = InjectionSpec {
            target_row: 16,
            target_bin: 0,
            amplitude: 1.0,
            seed: 0,
            noise_scale: 1.0,
        };
        assert_eq!(
            generate_fop(&p, &bad_target),
            Err(InjectError::Target(16, 0))
        );
        let bad_amp = InjectionSpec {
            amplitude: 0.0,
            target_row: 0,
            ..bad_target
        };
        assert_eq!(generate_fop(&p, &bad_amp), Err(InjectError::Amplitude));
    }
}
