//! Multi-threaded SSA ensembles.
//!
//! Trajectory `i` always uses RNG stream `i`, and results are folded into the
//! accumulator in index order, so the statistics are bit-identical to the serial
//! [`rxnet_core::ssa::ensemble`] whatever the thread count.

use std::num::NonZeroUsize;
use std::thread;

use rxnet_core::ssa::{sample_trajectory, EnsembleAccumulator};
use rxnet_core::{sample_grid, EnsembleStats, Error, MultiIndex, Network, Result};

const BATCH: usize = 4096;

pub fn parallel_ensemble(
    net: &Network,
    l0: &MultiIndex,
    t_end: f64,
    sample_dt: f64,
    n_traj: usize,
    seed: u64,
    threads: NonZeroUsize,
) -> Result<EnsembleStats> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be at least 1"));
    }
    if !(sample_dt > 0.0) {
        return Err(Error::InvalidArgument("sample_dt must be positive"));
    }
    let times = sample_grid(t_end, sample_dt);
    let mut acc = EnsembleAccumulator::new(times.clone(), net.k());
    let threads = threads.get();

    let mut start = 0;
    while start < n_traj {
        let end = (start + BATCH).min(n_traj);
        let chunk = (end - start).div_ceil(threads);
        let paths: Vec<Result<Vec<Vec<MultiIndex>>>> = thread::scope(|s| {
            let handles: Vec<_> = (start..end)
                .step_by(chunk)
                .map(|lo| {
                    let hi = (lo + chunk).min(end);
                    let times = &times;
                    s.spawn(move || {
                        (lo..hi)
                            .map(|i| sample_trajectory(net, l0, times, seed, i as u64))
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        for block in paths {
            for path in block? {
                acc.push(&path);
            }
        }
        start = end;
    }
    Ok(acc.finish(seed))
}
