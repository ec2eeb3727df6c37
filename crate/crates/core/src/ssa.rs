//! Gillespie direct-method sampling of the reaction jump process.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`). Trajectory `i` of an ensemble
//! seeded with `seed` uses the generator seeded with `seed` on stream `i`, so every
//! trajectory is reproducible on its own and independent of how work is scheduled.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{multi_falling_power_f64, MultiIndex, NetChange, Network};

/// Recorded in [`EnsembleStats::rng`].
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.3, seed_from_u64, stream = trajectory index)";

/// `r(τ) · ℓ^{s(τ)̲}` for every reaction, in network order.
pub fn propensities(net: &Network, l: &MultiIndex) -> Result<Vec<f64>> {
    if l.len() != net.k() {
        return Err(Error::LengthMismatch {
            expected: net.k(),
            found: l.len(),
        });
    }
    let mut out = alloc::vec![0.0; net.reactions().len()];
    propensities_into(net, l, &mut out);
    Ok(out)
}

fn propensities_into(net: &Network, l: &MultiIndex, out: &mut [f64]) {
    for (a, r) in out.iter_mut().zip(net.reactions()) {
        *a = r.rate() * multi_falling_power_f64(l.entries(), r.source().entries());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsaTrajectory {
    pub initial: MultiIndex,
    pub jump_times: Vec<f64>,
    /// State after each jump.
    pub states: Vec<MultiIndex>,
    /// Index of the reaction fired at each jump.
    pub fired: Vec<usize>,
    pub t_end: f64,
}

impl SsaTrajectory {
    /// State at time `t`: the state after the last jump at or before `t`.
    pub fn state_at(&self, t: f64) -> &MultiIndex {
        let n = self.jump_times.partition_point(|&jt| jt <= t);
        if n == 0 {
            &self.initial
        } else {
            &self.states[n - 1]
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One trajectory from `l0` up to `t_end`, on stream 0 of `seed`.
pub fn simulate(net: &Network, l0: &MultiIndex, t_end: f64, seed: u64) -> Result<SsaTrajectory> {
    simulate_stream(net, l0, t_end, seed, 0)
}

/// One trajectory on an explicit stream of `seed`.
pub fn simulate_stream(
    net: &Network,
    l0: &MultiIndex,
    t_end: f64,
    seed: u64,
    stream: u64,
) -> Result<SsaTrajectory> {
    if l0.len() != net.k() {
        return Err(Error::LengthMismatch {
            expected: net.k(),
            found: l0.len(),
        });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument("t_end must be positive and finite"));
    }
    let changes: Vec<NetChange> = net.reactions().iter().map(|r| r.net_change()).collect();
    let mut rng = rng_for(seed, stream);
    let mut a = alloc::vec![0.0; changes.len()];
    let mut state = l0.clone();
    let mut t = 0.0;
    let mut traj = SsaTrajectory {
        initial: l0.clone(),
        jump_times: Vec::new(),
        states: Vec::new(),
        fired: Vec::new(),
        t_end,
    };

    loop {
        propensities_into(net, &state, &mut a);
        let total: f64 = a.iter().sum();
        if total <= 0.0 {
            break;
        }
        let wait = -libm::log(1.0 - uniform(&mut rng)) / total;
        t += wait;
        if t > t_end {
            break;
        }
        let chosen = select(&a, uniform(&mut rng) * total);
        state = state
            .apply(&changes[chosen])
            .expect("positive propensity implies enough reactants");
        traj.jump_times.push(t);
        traj.states.push(state.clone());
        traj.fired.push(chosen);
    }
    Ok(traj)
}

/// First reaction whose cumulative propensity exceeds `target`. A target landing
/// exactly on a boundary goes to the later reaction.
fn select(a: &[f64], target: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (j, &aj) in a.iter().enumerate() {
        if aj <= 0.0 {
            continue;
        }
        last_positive = j;
        cumulative += aj;
        if target < cumulative {
            return j;
        }
    }
    last_positive
}

/// States of one trajectory at the given sample times.
pub fn sample_trajectory(
    net: &Network,
    l0: &MultiIndex,
    times: &[f64],
    seed: u64,
    stream: u64,
) -> Result<Vec<MultiIndex>> {
    let t_end = times.last().copied().unwrap_or(0.0);
    if t_end <= 0.0 {
        return Ok(alloc::vec![l0.clone(); times.len()]);
    }
    let traj = simulate_stream(net, l0, t_end, seed, stream)?;
    Ok(times.iter().map(|&t| traj.state_at(t).clone()).collect())
}

/// Per-time, per-species mean and unbiased variance over an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// `mean[t][i]`.
    pub mean: Vec<Vec<f64>>,
    /// `variance[t][i]`; zero for a single trajectory.
    pub variance: Vec<Vec<f64>>,
    pub n_traj: usize,
    pub seed: u64,
    pub rng: &'static str,
}

impl EnsembleStats {
    pub fn standard_error(&self, time: usize, species: usize) -> f64 {
        libm::sqrt(self.variance[time][species] / self.n_traj as f64)
    }
}

/// Welford accumulation over trajectories fed in a fixed order.
#[derive(Debug, Clone)]
pub struct EnsembleAccumulator {
    times: Vec<f64>,
    k: usize,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl EnsembleAccumulator {
    pub fn new(times: Vec<f64>, k: usize) -> Self {
        let n = times.len() * k;
        Self {
            times,
            k,
            count: 0,
            mean: alloc::vec![0.0; n],
            m2: alloc::vec![0.0; n],
        }
    }

    pub fn push(&mut self, samples: &[MultiIndex]) {
        assert_eq!(samples.len(), self.times.len(), "one sample per time");
        self.count += 1;
        let n = self.count as f64;
        for (ti, l) in samples.iter().enumerate() {
            for (i, &v) in l.entries().iter().enumerate() {
                let slot = ti * self.k + i;
                let x = v as f64;
                let delta = x - self.mean[slot];
                self.mean[slot] += delta / n;
                self.m2[slot] += delta * (x - self.mean[slot]);
            }
        }
    }

    pub fn finish(self, seed: u64) -> EnsembleStats {
        let k = self.k;
        let denom = if self.count > 1 {
            (self.count - 1) as f64
        } else {
            f64::INFINITY
        };
        let rows = |v: &[f64], f: &dyn Fn(f64) -> f64| -> Vec<Vec<f64>> {
            v.chunks(k.max(1))
                .map(|row| row.iter().map(|&x| f(x)).collect())
                .collect()
        };
        EnsembleStats {
            mean: rows(&self.mean, &|x| x),
            variance: rows(&self.m2, &|x| if denom.is_finite() { x / denom } else { 0.0 }),
            times: self.times,
            n_traj: self.count,
            seed,
            rng: RNG_ALGORITHM,
        }
    }
}

/// Runs `n_traj` trajectories sequentially and aggregates their sampled paths.
pub fn ensemble(
    net: &Network,
    l0: &MultiIndex,
    t_end: f64,
    sample_dt: f64,
    n_traj: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    if n_traj == 0 {
        return Err(Error::InvalidArgument("n_traj must be at least 1"));
    }
    if !(sample_dt > 0.0) {
        return Err(Error::InvalidArgument("sample_dt must be positive"));
    }
    let times = crate::sample_grid(t_end, sample_dt);
    let mut acc = EnsembleAccumulator::new(times.clone(), net.k());
    for i in 0..n_traj {
        acc.push(&sample_trajectory(net, l0, &times, seed, i as u64)?);
    }
    Ok(acc.finish(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Reaction, SpeciesTable};

    fn net(species: &[&str], reactions: &[(&str, &[u64], &[u64], f64)]) -> Network {
        Network::new(
            SpeciesTable::new(species.iter().copied()).unwrap(),
            reactions
                .iter()
                .map(|(n, s, t, r)| {
                    Reaction::new(*n, MultiIndex::new(s.to_vec()), MultiIndex::new(t.to_vec()), *r)
                        .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn decay() -> Network {
        net(&["A"], &[("d", &[1], &[0], 1.0)])
    }

    #[test]
    fn propensity_examples() {
        let g = 0.002;
        let infection = net(&["H", "I", "V"], &[("gamma", &[1, 0, 1], &[0, 1, 0], g)]);
        assert_eq!(propensities(&infection, &[3, 0, 2].into()).unwrap(), vec![6.0 * g]);
        assert_eq!(propensities(&infection, &[3, 0, 0].into()).unwrap(), vec![0.0]);
        let pair = net(&["A"], &[("p", &[2], &[0], 1.0)]);
        assert_eq!(propensities(&pair, &[1].into()).unwrap(), vec![0.0]);
        let birth = net(&["A"], &[("b", &[0], &[1], 0.3)]);
        for n in [0, 4, 100] {
            assert_eq!(propensities(&birth, &[n].into()).unwrap(), vec![0.3]);
        }
    }

    #[test]
    fn no_reactions_hold_initial_state() {
        let empty = net(&["A"], &[]);
        let tr = simulate(&empty, &[4].into(), 3.0, 1).unwrap();
        assert!(tr.jump_times.is_empty());
        assert_eq!(tr.state_at(3.0), &MultiIndex::from([4]));
    }

    #[test]
    fn two_state_chain_jumps_once() {
        for seed in 0..20 {
            let tr = simulate(&decay(), &[1].into(), 1e6, seed).unwrap();
            assert_eq!(tr.jump_times.len(), 1);
            assert_eq!(tr.states[0], MultiIndex::from([0]));
        }
    }

    #[test]
    fn extinction_time_mean() {
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|i| simulate_stream(&decay(), &[1].into(), 1e6, 42, i).unwrap().jump_times[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() <= 3.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn ensemble_of_one_is_the_trajectory() {
        let stats = ensemble(&decay(), &[10].into(), 2.0, 0.5, 1, 9).unwrap();
        let path = sample_trajectory(&decay(), &[10].into(), &stats.times, 9, 0).unwrap();
        let tr = simulate(&decay(), &[10].into(), 2.0, 9).unwrap();
        for (ti, t) in stats.times.iter().enumerate() {
            assert_eq!(stats.mean[ti][0], path[ti].entries()[0] as f64);
            assert_eq!(path[ti], *tr.state_at(*t));
            assert_eq!(stats.variance[ti][0], 0.0);
        }
    }

    #[test]
    fn ensemble_decay_mean() {
        let stats = ensemble(&decay(), &[10].into(), 2.0, 0.25, 10_000, 3).unwrap();
        for (ti, &t) in stats.times.iter().enumerate() {
            let exact = 10.0 * (-t).exp();
            let se = stats.standard_error(ti, 0);
            if se == 0.0 {
                assert_eq!(stats.mean[ti][0], exact);
            } else {
                assert!((stats.mean[ti][0] - exact).abs() <= 3.0 * se, "t={t}");
            }
        }
    }

    #[test]
    fn ensemble_is_deterministic() {
        let n = net(&["A", "B"], &[("ab", &[1, 0], &[0, 1], 1.0), ("ba", &[0, 1], &[1, 0], 0.5)]);
        let a = ensemble(&n, &[5, 5].into(), 3.0, 0.5, 200, 77).unwrap();
        let b = ensemble(&n, &[5, 5].into(), 3.0, 0.5, 200, 77).unwrap();
        assert_eq!(a, b);
        let c = ensemble(&n, &[5, 5].into(), 3.0, 0.5, 200, 78).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.rng, RNG_ALGORITHM);
    }

    #[test]
    fn counts_never_go_negative_and_jumps_follow_reactions() {
        let n = net(
            &["A", "B"],
            &[
                ("pair", &[2, 0], &[0, 1], 1.0),
                ("split", &[0, 1], &[1, 0], 0.7),
                ("b", &[0, 0], &[1, 0], 0.2),
            ],
        );
        for stream in 0..50 {
            let tr = simulate_stream(&n, &[3, 1].into(), 20.0, 5, stream).unwrap();
            let mut prev = tr.initial.clone();
            for (s, &j) in tr.states.iter().zip(&tr.fired) {
                assert_eq!(prev.apply(&n.reactions()[j].net_change()).as_ref(), Some(s));
                prev = s.clone();
            }
            assert!(tr.jump_times.windows(2).all(|w| w[0] < w[1]));
            assert!(tr.jump_times.iter().all(|&t| t <= 20.0));
        }
    }

    #[test]
    fn selection_ties_go_to_later_reaction() {
        let a = [1.0, 0.0, 2.0, 1.0];
        assert_eq!(select(&a, 0.0), 0);
        assert_eq!(select(&a, 1.0), 2);
        assert_eq!(select(&a, 2.999), 2);
        assert_eq!(select(&a, 3.0), 3);
        assert_eq!(select(&a, 4.0), 3);
    }

    #[test]
    fn argument_errors() {
        assert!(ensemble(&decay(), &[1].into(), 1.0, 0.1, 0, 1).is_err());
        assert!(simulate(&decay(), &[1, 1].into(), 1.0, 1).is_err());
        assert!(simulate(&decay(), &[1].into(), 0.0, 1).is_err());
    }
}
