//! Deterministic mass-action rate equation `dx/dt = Σ_τ r(τ) (t(τ) − s(τ)) x^{s(τ)}`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{multi_power_slice, ClassicalState, Network};

/// Integrator output below this value sets [`Trajectory::went_negative`].
pub const NEGATIVE_WARNING_FLOOR: f64 = -1e-9;

/// Default RK4 step.
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ClassicalState>,
    /// Set when some entry dropped below [`NEGATIVE_WARNING_FLOOR`]. Values are never clamped.
    pub went_negative: bool,
}

impl Trajectory {
    pub fn last(&self) -> &ClassicalState {
        self.states.last().expect("trajectory is never empty")
    }
}

/// Right-hand side of the rate equation at `x`.
pub fn rate_rhs(net: &Network, x: &ClassicalState) -> Result<Vec<f64>> {
    if x.len() != net.k() {
        return Err(Error::LengthMismatch {
            expected: net.k(),
            found: x.len(),
        });
    }
    let mut out = alloc::vec![0.0; net.k()];
    rhs_into(net, x.values(), &mut out);
    Ok(out)
}

fn rhs_into(net: &Network, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in net.reactions() {
        let flux = r.rate() * multi_power_slice(x, r.source().entries());
        if flux == 0.0 {
            continue;
        }
        for ((o, &s), &t) in out
            .iter_mut()
            .zip(r.source().entries())
            .zip(r.target().entries())
        {
            if s != t {
                *o += flux * (t as f64 - s as f64);
            }
        }
    }
}

/// Classical fixed-step fourth-order Runge–Kutta from `0` to `t_end`.
///
/// Every step is recorded; the final step is shortened to land exactly on `t_end`.
pub fn integrate_rate(
    net: &Network,
    x0: &ClassicalState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if x0.len() != net.k() {
        return Err(Error::LengthMismatch {
            expected: net.k(),
            found: x0.len(),
        });
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument("t_end must be positive and finite"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument("dt must be positive and finite"));
    }

    let k = net.k();
    let mut x = x0.values().to_vec();
    let mut times = alloc::vec![0.0];
    let mut states = alloc::vec![x0.clone()];
    let mut went_negative = false;

    let mut k1 = alloc::vec![0.0; k];
    let mut k2 = alloc::vec![0.0; k];
    let mut k3 = alloc::vec![0.0; k];
    let mut k4 = alloc::vec![0.0; k];
    let mut tmp = alloc::vec![0.0; k];

    let mut step = 0u64;
    let mut t = 0.0;
    while t < t_end {
        step += 1;
        let mut t_next = step as f64 * dt;
        // Absorb a sliver shorter than a rounding error into the final step.
        if t_next >= t_end * (1.0 - 1e-12) {
            t_next = t_end;
        }
        let h = t_next - t;

        rhs_into(net, &x, &mut k1);
        for i in 0..k {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        rhs_into(net, &tmp, &mut k2);
        for i in 0..k {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        rhs_into(net, &tmp, &mut k3);
        for i in 0..k {
            tmp[i] = x[i] + h * k3[i];
        }
        rhs_into(net, &tmp, &mut k4);
        for i in 0..k {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t_next });
        }
        if x.iter().any(|&v| v < NEGATIVE_WARNING_FLOOR) {
            went_negative = true;
        }
        t = t_next;
        times.push(t);
        states.push(ClassicalState::unchecked(x.clone()));
    }

    Ok(Trajectory {
        times,
        states,
        went_negative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MultiIndex, Reaction, SpeciesTable};

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

    fn hiv() -> Network {
        net(
            &["H", "I", "V"],
            &[
                ("alpha", &[0, 0, 0], &[1, 0, 0], 1.0),
                ("beta", &[1, 0, 0], &[0, 0, 0], 0.01),
                ("gamma", &[1, 0, 1], &[0, 1, 0], 0.002),
                ("delta", &[0, 1, 0], &[0, 1, 1], 0.5),
                ("epsilon", &[0, 1, 0], &[0, 0, 0], 0.1),
                ("zeta", &[0, 0, 1], &[0, 0, 0], 0.3),
            ],
        )
    }

    fn decay(rate: f64) -> Network {
        net(&["A"], &[("d", &[1], &[0], rate)])
    }

    #[test]
    fn hiv_rhs_matches_hand_evaluation() {
        let x = ClassicalState::new(vec![100.0, 10.0, 50.0]).unwrap();
        let d = rate_rhs(&hiv(), &x).unwrap();
        // dH = α − βH − γHV, dI = γHV − εI, dV = −γHV + δI − ζV
        let want = [
            1.0 - 0.01 * 100.0 - 0.002 * 100.0 * 50.0,
            0.002 * 100.0 * 50.0 - 0.1 * 10.0,
            -0.002 * 100.0 * 50.0 + 0.5 * 10.0 - 0.3 * 50.0,
        ];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((d[0] + 10.0).abs() < 1e-12);
        assert!((d[1] - 9.0).abs() < 1e-12);
        assert!((d[2] + 20.0).abs() < 1e-12);
    }

    #[test]
    fn simple_rhs_cases() {
        let n = net(&["A", "B"], &[("ab", &[1, 0], &[0, 1], 2.0)]);
        let x = ClassicalState::new(vec![0.0, 4.0]).unwrap();
        assert_eq!(rate_rhs(&n, &x).unwrap(), vec![0.0, 0.0]);
        let x = ClassicalState::new(vec![3.0]).unwrap();
        assert_eq!(rate_rhs(&decay(0.7), &x).unwrap(), vec![-0.7 * 3.0]);
        assert!(rate_rhs(&decay(1.0), &ClassicalState::new(vec![1.0, 2.0]).unwrap()).is_err());
    }

    #[test]
    fn rhs_is_homogeneous_in_rates() {
        let x = ClassicalState::new(vec![7.0, 2.0, 3.0]).unwrap();
        let base = rate_rhs(&hiv(), &x).unwrap();
        for lambda in [0.5, 2.0, 8.0] {
            let scaled = rate_rhs(&hiv().scale_rates(lambda).unwrap(), &x).unwrap();
            for (a, b) in scaled.iter().zip(&base) {
                assert_eq!(*a, lambda * b);
            }
        }
    }

    #[test]
    fn decay_matches_exponential() {
        let x0 = ClassicalState::new(vec![1.0]).unwrap();
        let tr = integrate_rate(&decay(1.0), &x0, 1.0, 1e-3).unwrap();
        assert_eq!(tr.times.len(), 1001);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        let err = (tr.last().values()[0] - (-1.0f64).exp()).abs();
        assert!(err <= 1e-9, "{err}");
        assert!(!tr.went_negative);
    }

    #[test]
    fn fourth_order_convergence() {
        let x0 = ClassicalState::new(vec![1.0]).unwrap();
        let exact = (-1.0f64).exp();
        let err = |dt: f64| {
            (integrate_rate(&decay(1.0), &x0, 1.0, dt).unwrap().last().values()[0] - exact).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((8.0..=32.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn constant_and_linear_solutions() {
        let empty = net(&["A"], &[]);
        let x0 = ClassicalState::new(vec![3.5]).unwrap();
        let tr = integrate_rate(&empty, &x0, 1.0, 0.1).unwrap();
        assert!(tr.states.iter().all(|s| s.values() == [3.5]));

        let birth = net(&["A"], &[("b", &[0], &[1], 0.75)]);
        let tr = integrate_rate(&birth, &ClassicalState::new(vec![0.0]).unwrap(), 2.0, 1e-3).unwrap();
        assert!((tr.last().values()[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn partial_final_step() {
        let x0 = ClassicalState::new(vec![1.0]).unwrap();
        let tr = integrate_rate(&decay(1.0), &x0, 1.0, 0.3).unwrap();
        assert_eq!(tr.times.len(), 5);
        assert_eq!(tr.times[4], 1.0);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn blow_up_is_reported() {
        // dx/dt = x², x(0)=1 blows up at t=1.
        let n = net(&["A"], &[("sq", &[2], &[3], 1.0)]);
        let err = integrate_rate(&n, &ClassicalState::new(vec![1.0]).unwrap(), 2.0, 1e-2).unwrap_err();
        match err {
            Error::NonFinite { time } => assert!(time > 0.9 && time <= 2.0, "{time}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undershoot_sets_flag_without_clamping() {
        // Fast pair annihilation with a step far past stability overshoots below zero.
        let n = net(&["A"], &[("ann", &[2], &[0], 1.0)]);
        let x0 = ClassicalState::new(vec![10.0]).unwrap();
        let tr = integrate_rate(&n, &x0, 0.25, 0.25).unwrap();
        assert!(tr.went_negative);
        assert!(tr.states.iter().any(|s| s.values()[0] < 0.0));
    }

    #[test]
    fn argument_validation() {
        let x0 = ClassicalState::new(vec![1.0]).unwrap();
        assert!(integrate_rate(&decay(1.0), &x0, 0.0, 0.1).is_err());
        assert!(integrate_rate(&decay(1.0), &x0, 1.0, -0.1).is_err());
    }
}
