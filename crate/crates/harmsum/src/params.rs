//! Problem configuration shared by every engine.

use thiserror::Error;

/// Maximum row count representable in the 7-bit filter field of a packed
/// candidate word. The full plane has 85 template rows; one half has 42.
pub const MAX_ROWS: u32 = 85;
/// Maximum channel count representable in the 21-bit bin field.
pub const MAX_CHAN: u32 = 1 << 21;
/// Maximum harmonic-plane count representable in the 3-bit plane field.
pub const MAX_HP: u8 = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("row count must be in 1..={MAX_ROWS}, got {0}")]
    Rows(u32),
    #[error("channel count must be in 1..={MAX_CHAN}, got {0}")]
    Chan(u64),
    #[error("harmonic plane count must be in 1..={MAX_HP}, got {0}")]
    Planes(u8),
    #[error("candidate capacity must be at least 1")]
    Candidates,
}

/// Dimensions and capacities of one harmonic-summing problem.
///
/// Rows index the processed half of the FOP (0-based, the two halves are
/// independent and a full-plane run is two half runs). The bounds keep every
/// detection encodable in one 32-bit packed word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HsParams {
    pub n_rows: u32,
    pub n_chan: u32,
    pub n_hp: u8,
    pub n_cand: u32,
}

impl HsParams {
    pub fn new(n_rows: u32, n_chan: u32, n_hp: u8, n_cand: u32) -> Result<Self, ParamsError> {
        if n_rows == 0 || n_rows > MAX_ROWS {
            return Err(ParamsError::Rows(n_rows));
        }
        if n_chan == 0 || n_chan > MAX_CHAN {
            return Err(ParamsError::Chan(n_chan as u64));
        }
        if n_hp == 0 || n_hp > MAX_HP {
            return Err(ParamsError::Planes(n_hp));
        }
        if n_cand == 0 {
            return Err(ParamsError::Candidates);
        }
        Ok(Self {
            n_rows,
            n_chan,
            n_hp,
            n_cand,
        })
    }

    /// Number of points in the plane.
    pub fn fop_len(&self) -> usize {
        self.n_rows as usize * self.n_chan as usize
    }

    pub fn fop_len_u64(&self) -> u64 {
        self.n_rows as u64 * self.n_chan as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_half_fop_defaults() {
        let p = HsParams::new(42, 1 << 21, 8, 200).unwrap();
        assert_eq!(p.fop_len(), 42 << 21);
    }

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(HsParams::new(0, 16, 8, 200), Err(ParamsError::Rows(0)));
        assert_eq!(HsParams::new(86, 16, 8, 200), Err(ParamsError::Rows(86)));
        assert!(HsParams::new(42, (1 << 21) + 1, 8, 200).is_err());
        assert_eq!(HsParams::new(42, 16, 9, 200), Err(ParamsError::Planes(9)));
        assert_eq!(HsParams::new(42, 16, 0, 200), Err(ParamsError::Planes(0)));
        assert_eq!(HsParams::new(42, 16, 8, 0), Err(ParamsError::Candidates));
    }
}
