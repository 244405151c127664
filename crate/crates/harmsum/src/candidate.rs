//! Candidate records, 32-bit packing and the last-N ring per plane.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PackError {
    #[error("filter index {0} does not fit the 7-bit field")]
    Filter(u32),
    #[error("plane field {0} does not fit the 3-bit field")]
    Plane(u32),
    #[error("bin index {0} does not fit the 21-bit field")]
    Bin(u32),
}

/// Packs `(filter, plane, bin)` into one word: `F * 2^24 + H * 2^21 + B`.
///
/// `plane_field` is the 3-bit packed value (domain plane minus one, so eight
/// planes fit).
pub fn encode_candidate(filter: u32, plane_field: u32, bin: u32) -> Result<u32, PackError> {
    if filter >= 1 << 7 {
        return Err(PackError::Filter(filter));
    }
    if plane_field >= 1 << 3 {
        return Err(PackError::Plane(plane_field));
    }
    if bin >= 1 << 21 {
        return Err(PackError::Bin(bin));
    }
    Ok((filter << 24) | (plane_field << 21) | bin)
}

/// Bit-field inverse of [`encode_candidate`]: returns `(filter, plane_field,
/// bin)`. Legal filter values keep the top bit clear.
pub fn decode_candidate(word: u32) -> (u32, u32, u32) {
    debug_assert!(word < 1 << 31);
    (word >> 24, (word >> 21) & 0x7, word & ((1 << 21) - 1))
}

/// One detection: row (filter), harmonic plane (1-based), channel (bin) and
/// the detected amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateRecord {
    pub filter: u32,
    pub plane: u8,
    pub bin: u32,
    pub amplitude: f32,
}

impl CandidateRecord {
    /// The packed word; the 3-bit field stores `plane - 1`.
    pub fn encode(&self) -> Result<u32, PackError> {
        if self.plane == 0 {
            return Err(PackError::Plane(0));
        }
        encode_candidate(self.filter, self.plane as u32 - 1, self.bin)
    }

    pub fn decode(word: u32, amplitude: f32) -> Self {
        let (filter, plane_field, bin) = decode_candidate(word);
        Self {
            filter,
            plane: plane_field as u8 + 1,
            bin,
            amplitude,
        }
    }
}

/// Fixed-capacity buffer keeping the last `capacity` pushes in push order.
#[derive(Debug, Clone)]
pub struct CandidateRing {
    capacity: usize,
    entries: VecDeque<CandidateRecord>,
    total_pushed: u64,
}

impl CandidateRing {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
            total_pushed: 0,
        }
    }

    pub fn push(&mut self, record: CandidateRecord) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(record);
        self.total_pushed += 1;
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Count of all detections ever pushed, evicted or not.
    pub fn total_pushed(&self) -> u64 {
        self.total_pushed
    }

    /// Entries oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &CandidateRecord> {
        self.entries.iter()
    }
}
