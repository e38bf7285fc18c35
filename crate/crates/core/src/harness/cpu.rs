//! Per-thread CPU time for decision calls.
//!
//! Cells run concurrently, so wall-clock time would charge one cell for
//! another's work. The thread clock only advances while this thread runs.

use std::sync::OnceLock;
use std::time::Duration;

pub fn thread_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec and the clock id is a constant.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Median cost of one back-to-back pair of clock reads, in nanoseconds.
/// Each timed interval includes roughly this much clock overhead.
pub fn clock_overhead_ns() -> u64 {
    static OVERHEAD: OnceLock<u64> = OnceLock::new();
    *OVERHEAD.get_or_init(|| {
        let mut samples: Vec<u64> = (0..2001)
            .map(|_| {
                let a = thread_cpu_time();
                let b = thread_cpu_time();
                b.saturating_sub(a).as_nanos() as u64
            })
            .collect();
        samples.sort_unstable();
        samples[samples.len() / 2]
    })
}

/// Sums CPU time over many short intervals and removes the clock overhead
/// in aggregate, so per-interval noise averages out.
#[derive(Clone, Copy, Debug, Default)]
pub struct CpuMeter {
    raw_ns: u64,
    intervals: u64,
}

impl CpuMeter {
    pub fn time<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let start = thread_cpu_time();
        let out = f();
        let end = thread_cpu_time();
        self.raw_ns += end.saturating_sub(start).as_nanos() as u64;
        self.intervals += 1;
        out
    }

    pub fn intervals(&self) -> u64 {
        self.intervals
    }

    /// Net time in nanoseconds, never negative.
    pub fn net_ns(&self) -> u64 {
        let overhead = self.intervals.saturating_mul(clock_overhead_ns());
        self.raw_ns.saturating_sub(overhead)
    }

    pub fn net_ms(&self) -> f64 {
        self.net_ns() as f64 / 1e6
    }
}
