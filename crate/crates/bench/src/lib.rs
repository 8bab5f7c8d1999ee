//! Shared setup for the retrieval benchmarks.

use cccf::synthetic::Workload;

pub const COMPONENTS: usize = 8;
pub const BITS: usize = 16;
pub const SCALE: i64 = 100;
pub const QUERY_USERS: usize = 64;

/// `items` synthetic items at bandwidth `h`, 128 total bits per row.
pub fn scan_workload(items: usize, h: f64) -> Workload {
    Workload::build(QUERY_USERS, items, COMPONENTS, BITS, h, SCALE, 42)
        .expect("synthetic workload")
}
