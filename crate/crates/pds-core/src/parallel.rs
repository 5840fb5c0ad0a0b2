//! Deterministic parallel reductions over mesh elements.
//!
//! Element loops (assembly, per-triangle energies, radial returns) are the
//! only parallel sections in the crate. Floating-point addition is not
//! associative, so a naive parallel sum would depend on the thread count.
//! Instead, every reduction here splits the index range into fixed-size
//! chunks, computes one partial result per chunk in parallel, and merges
//! the partials sequentially in chunk order. The partial for chunk `i` is
//! the same no matter which thread computes it, so the merged result is
//! bitwise identical for any worker count — including 1.
//!
//! The worker pool is sized once per process from the `PDS_THREADS`
//! environment variable (0 or unset = one worker per logical CPU).

use std::sync::OnceLock;

use rayon::prelude::*;

/// Elements per parallel chunk. Fixed so that chunk boundaries — and hence
/// the merge order — never depend on the worker count.
const CHUNK: usize = 512;

static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();

/// The crate-wide worker pool, sized by `PDS_THREADS` on first use.
pub fn pool() -> &'static rayon::ThreadPool {
    POOL.get_or_init(|| {
        let requested = std::env::var("PDS_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if requested > 0 {
            builder = builder.num_threads(requested);
        }
        builder
            .thread_name(|i| format!("pds-worker-{i}"))
            .build()
            .expect("failed to build worker pool")
    })
}

/// Deterministic parallel sum of `f(i)` for `i in 0..n`.
///
/// Equivalent to `(0..n).map(f).sum()` evaluated left to right within each
/// fixed chunk and across chunks, for any thread count.
pub fn sum_over(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    if n <= CHUNK {
        return (0..n).map(f).sum();
    }
    let partials: Vec<f64> = pool().install(|| {
        (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                (lo..hi).map(&f).sum()
            })
            .collect()
    });
    partials.into_iter().sum()
}

/// Deterministic parallel map of `f(i)` for `i in 0..n` into a vector.
///
/// Each slot is written by exactly one closure call, so the output never
/// depends on scheduling.
pub fn map_over<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if n <= CHUNK {
        return (0..n).map(f).collect();
    }
    pool().install(|| (0..n).into_par_iter().map(f).collect())
}

/// Deterministic parallel accumulation of per-element contributions into a
/// shared output vector (scatter-add, e.g. nodal assembly).
///
/// `scatter(i, out)` must add element `i`'s contribution into `out`. Each
/// chunk scatters into its own zeroed buffer of length `len`; the buffers
/// are then merged sequentially in chunk order.
pub fn scatter_over(n: usize, len: usize, scatter: impl Fn(usize, &mut [f64]) + Sync) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if n <= CHUNK {
        for i in 0..n {
            scatter(i, &mut out);
        }
        return out;
    }
    let partials: Vec<Vec<f64>> = pool().install(|| {
        (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                let mut buf = vec![0.0; len];
                for i in lo..hi {
                    scatter(i, &mut buf);
                }
                buf
            })
            .collect()
    });
    for buf in partials {
        for (o, v) in out.iter_mut().zip(buf) {
            *o += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_matches_sequential_for_small_and_large_n() {
        for n in [0usize, 1, 7, CHUNK, CHUNK + 1, 4 * CHUNK + 3] {
            let f = |i: usize| (i as f64).sin() / (1.0 + i as f64);
            let seq: f64 = {
                // Reference: same chunking applied sequentially.
                let mut acc = 0.0;
                let mut lo = 0;
                while lo < n {
                    let hi = (lo + CHUNK).min(n);
                    acc += (lo..hi).map(f).sum::<f64>();
                    lo = hi;
                }
                acc
            };
            assert_eq!(sum_over(n, f), seq, "n = {n}");
        }
    }

    #[test]
    fn scatter_matches_sequential() {
        let n = 3 * CHUNK + 17;
        let len = 64;
        let scatter = |i: usize, out: &mut [f64]| {
            out[i % len] += (i as f64).cos();
            out[(i * 7) % len] += 0.5;
        };
        let mut seq = vec![0.0; len];
        let mut lo = 0;
        while lo < n {
            let hi = (lo + CHUNK).min(n);
            let mut buf = vec![0.0; len];
            for i in lo..hi {
                scatter(i, &mut buf);
            }
            for (o, v) in seq.iter_mut().zip(buf) {
                *o += v;
            }
            lo = hi;
        }
        assert_eq!(scatter_over(n, len, scatter), seq);
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let n = 10 * CHUNK;
        let f = |i: usize| ((i as f64) * 0.1).tan();
        let a = sum_over(n, f);
        for _ in 0..5 {
            assert!(sum_over(n, f).to_bits() == a.to_bits());
        }
    }
}
