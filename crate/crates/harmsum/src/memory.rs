//! Instrumented simulated memories.
//!
//! Every off-chip access is one 32-bit point; the counters are the artifact's
//! central measurement. Loads go through shared references with relaxed
//! atomic counters, so workers on disjoint column ranges can share a store
//! and the summed counts still equal a sequential run.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::plane::FopPlane;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MemoryError {
    #[error("preload of {requested} points exceeds local capacity {capacity}")]
    OverCapacity { requested: usize, capacity: usize },
}

/// Simulated off-chip (global) memory holding one plane, with exact load and
/// store counters.
#[derive(Debug)]
pub struct GlobalStore {
    n_rows: u32,
    n_chan: u32,
    data: Vec<f32>,
    loads: AtomicU64,
    stores: AtomicU64,
}

impl GlobalStore {
    pub fn from_plane(plane: FopPlane) -> Self {
        let (n_rows, n_chan) = (plane.n_rows(), plane.n_chan());
        Self {
            n_rows,
            n_chan,
            data: plane.into_data(),
            loads: AtomicU64::new(0),
            stores: AtomicU64::new(0),
        }
    }

    pub fn zeros(n_rows: u32, n_chan: u32) -> Self {
        Self {
            n_rows,
            n_chan,
            data: vec![0.0; n_rows as usize * n_chan as usize],
            loads: AtomicU64::new(0),
            stores: AtomicU64::new(0),
        }
    }

    pub fn n_rows(&self) -> u32 {
        self.n_rows
    }

    pub fn n_chan(&self) -> u32 {
        self.n_chan
    }

    /// Counted point load. Out-of-range indices are a caller bug.
    #[inline]
    pub fn load(&self, i: u32, j: u32) -> f32 {
        assert!(
            i < self.n_rows && j < self.n_chan,
            "load ({i}, {j}) out of range"
        );
        self.loads.fetch_add(1, Ordering::Relaxed);
        self.data[i as usize * self.n_chan as usize + j as usize]
    }

    /// Counted point store.
    #[inline]
    pub fn store(&mut self, i: u32, j: u32, v: f32) {
        assert!(
            i < self.n_rows && j < self.n_chan,
            "store ({i}, {j}) out of range"
        );
        self.stores.fetch_add(1, Ordering::Relaxed);
        self.data[i as usize * self.n_chan as usize + j as usize] = v;
    }

    /// Reads a value without touching the counters. Only for inspection and
    /// for snapshotting debug planes, never for engine traffic.
    pub fn peek(&self, i: u32, j: u32) -> f32 {
        self.data[i as usize * self.n_chan as usize + j as usize]
    }

    pub fn load_count(&self) -> u64 {
        self.loads.load(Ordering::Relaxed)
    }

    pub fn store_count(&self) -> u64 {
        self.stores.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.loads.store(0, Ordering::Relaxed);
        self.stores.store(0, Ordering::Relaxed);
    }

    pub fn to_plane(&self) -> FopPlane {
        FopPlane::new(self.n_rows, self.n_chan, self.data.clone())
            .expect("store data is dimension-consistent")
    }
}

/// Simulated on-chip memory with a fixed preload and no replacement: the
/// resident set is pinned before compute, mirroring a preloaded scratchpad.
#[derive(Debug)]
pub struct LocalStore {
    capacity: usize,
    resident: HashMap<(u32, u32), f32>,
    hits: u64,
    misses: u64,
}

impl LocalStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            resident: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn resident_len(&self) -> usize {
        self.resident.len()
    }

    pub fn hit_count(&self) -> u64 {
        self.hits
    }

    pub fn miss_count(&self) -> u64 {
        self.misses
    }

    /// Pins `points` with their current global values. Each point costs one
    /// counted global load; the whole set is rejected if it exceeds capacity.
    pub fn preload(
        &mut self,
        points: &[(u32, u32)],
        source: &GlobalStore,
    ) -> Result<(), MemoryError> {
        if points.len() > self.capacity {
            return Err(MemoryError::OverCapacity {
                requested: points.len(),
                capacity: self.capacity,
            });
        }
        self.resident.reserve(points.len());
        for &(i, j) in points {
            let v = source.load(i, j);
            self.resident.insert((i, j), v);
        }
        Ok(())
    }

    /// Reads through the cache: resident points hit locally and cost
    /// nothing; anything else is a miss plus one counted global load.
    #[inline]
    pub fn cached_load(&mut self, global: &GlobalStore, i: u32, j: u32) -> f32 {
        if let Some(&v) = self.resident.get(&(i, j)) {
            self.hits += 1;
            v
        } else {
            self.misses += 1;
            global.load(i, j)
        }
    }
}

/// Access counts of one engine run. `global_loads` includes any preload
/// traffic; `local_misses` is the summing-phase load count of a cached run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccessStats {
    pub global_loads: u64,
    pub global_stores: u64,
    pub local_hits: u64,
    pub local_misses: u64,
}

impl AccessStats {
    /// Total global traffic relative to the FOP size.
    pub fn ratio(&self, fop_len: u64) -> f64 {
        (self.global_loads + self.global_stores) as f64 / fop_len as f64
    }
}
