//! Deterministic worker-thread control.
//!
//! The only runtime tunable is the `MICROELAST_THREADS` environment
//! variable. Work is partitioned into contiguous output chunks, each written
//! by exactly one worker, and every worker accumulates its entries in the
//! same order as the sequential code, so results are bit-identical for any
//! thread count.

use std::sync::OnceLock;

pub const THREADS_ENV: &str = "MICROELAST_THREADS";

/// Worker count from the environment (default 1, clamped to [1, 256]);
/// read once per process.
pub fn thread_count() -> usize {
    static COUNT: OnceLock<usize> = OnceLock::new();
    *COUNT.get_or_init(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .map(|n| n.clamp(1, 256))
            .unwrap_or(1)
    })
}

/// Minimum output length before threads are engaged at all.
const MIN_PARALLEL_LEN: usize = 4096;

/// Splits `y` into contiguous chunks of whole `unit`-sized groups and runs
/// `work(first_group_index, chunk)` on each, in parallel when more than one
/// worker is configured. Each output element belongs to exactly one chunk,
/// so the result does not depend on the worker count.
pub fn for_row_chunks<F>(y: &mut [f64], unit: usize, work: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let unit = unit.max(1);
    let threads = thread_count();
    let groups = y.len() / unit;
    if threads <= 1 || groups < 2 * threads || y.len() < MIN_PARALLEL_LEN {
        work(0, y);
        return;
    }
    let per = groups.div_ceil(threads);
    std::thread::scope(|scope| {
        let mut rest = y;
        let mut first = 0;
        while !rest.is_empty() {
            let take = (per * unit).min(rest.len());
            let (chunk, tail) = rest.split_at_mut(take);
            let w = &work;
            scope.spawn(move || w(first, chunk));
            first += take / unit;
            rest = tail;
        }
    });
}
