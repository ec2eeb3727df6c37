//! Master equation on a truncated state space.
//!
//! The generator has entries
//!
//! ```text
//! H[ℓ', ℓ] = Σ_τ r(τ) ℓ^{s(τ)̲} (δ[ℓ' = ℓ + t(τ) − s(τ)] − δ[ℓ' = ℓ])
//! ```
//!
//! restricted to the states of a [`StateSpace`]. A reaction whose product state
//! falls outside the cap contributes neither its gain nor its loss term for that
//! source state, so every column sums to zero and probability is conserved exactly.
//! Time evolution uses uniformization, which keeps every coefficient nonnegative.

use alloc::format;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{neumaier_sum, FockSeries, MixedStateView};
use crate::model::{multi_falling_power_f64, MultiIndex, Network};
use crate::space::StateSpace;

/// Accumulated Poisson weight at which a uniformization sum is cut off is `1 − this`.
pub const POISSON_TAIL: f64 = 1e-12;

/// Coefficients below this after evolution indicate a bug and raise an error.
pub const NEGATIVITY_FLOOR: f64 = -1e-14;

/// How far from one the sum of an initial mixed state may be.
pub const MIXED_TOLERANCE: f64 = 1e-9;

/// Largest uniformization rate-time product handled in one sub-step; keeps
/// `exp(−Λt)` far from underflow.
const MAX_SUBSTEP: f64 = 32.0;

const MAX_TERMS_PER_SUBSTEP: usize = 10_000;

/// Sparse generator in compressed-column form. Column `j` holds the transition
/// rates out of state `j`; the diagonal entry is always stored.
#[derive(Debug, Clone)]
pub struct Generator {
    space: StateSpace,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    values: Vec<f64>,
    clamped: Vec<bool>,
}

pub fn build_hamiltonian(net: &Network, space: StateSpace) -> Result<Generator> {
    Generator::build(net, space)
}

impl Generator {
    pub fn build(net: &Network, space: StateSpace) -> Result<Self> {
        if net.k() != space.k() {
            return Err(Error::LengthMismatch {
                expected: space.k(),
                found: net.k(),
            });
        }
        let changes: Vec<_> = net.reactions().iter().map(|r| r.net_change()).collect();
        let n = space.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut rows = Vec::new();
        let mut values = Vec::new();
        let mut clamped = alloc::vec![false; n];
        let mut column: Vec<(usize, f64)> = Vec::new();

        col_ptr.push(0);
        for (j, l) in space.states().iter().enumerate() {
            column.clear();
            let mut diagonal = 0.0;
            for (r, change) in net.reactions().iter().zip(&changes) {
                let w = r.rate() * multi_falling_power_f64(l.entries(), r.source().entries());
                if w == 0.0 || change.is_zero() {
                    continue;
                }
                match l.apply(change).and_then(|target| space.ordinal(&target)) {
                    Some(i) => {
                        column.push((i, w));
                        diagonal -= w;
                    }
                    None => clamped[j] = true,
                }
            }
            column.push((j, diagonal));
            column.sort_by_key(|&(i, _)| i);
            let mut last: Option<usize> = None;
            for &(i, v) in &column {
                if last == Some(i) {
                    *values.last_mut().unwrap() += v;
                } else {
                    rows.push(i);
                    values.push(v);
                    last = Some(i);
                }
            }
            col_ptr.push(rows.len());
        }

        Ok(Self {
            space,
            col_ptr,
            rows,
            values,
            clamped,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// Number of states (rows and columns).
    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(row, value)` pairs of column `j`, rows ascending.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.rows[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.column(col)
            .find(|&(i, _)| i == row)
            .map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self, j: usize) -> f64 {
        self.get(j, j)
    }

    /// Column `j` as a series over target states, i.e. `H z^ℓ` for `ℓ = state(j)`.
    pub fn column_series(&self, j: usize) -> FockSeries {
        FockSeries::from_terms(
            self.space.k(),
            self.column(j)
                .map(|(i, v)| (self.space.state(i).clone(), v)),
        )
    }

    /// All stored entries as `(row, col, value)`, column-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |j| self.column(j).map(move |(i, v)| (i, j, v)))
    }

    /// Whether some reaction with positive propensity was dropped at state `j`
    /// because its product lies outside the cap.
    pub fn is_clamped(&self, j: usize) -> bool {
        self.clamped[j]
    }

    /// Uniformization rate `Λ = max_ℓ |H[ℓ,ℓ]|`.
    pub fn max_exit_rate(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.diagonal(j).abs())
            .fold(0.0, f64::max)
    }

    /// Overwrites (or inserts) one entry. Breaks the generator's invariants on
    /// purpose; exists so checkers can be exercised against corrupted input.
    #[doc(hidden)]
    pub fn inject_fault(&mut self, row: usize, col: usize, value: f64) {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        if let Some(pos) = self.rows[range.clone()].iter().position(|&i| i == row) {
            self.values[range.start + pos] = value;
            return;
        }
        let at = range.start
            + self.rows[range.clone()]
                .iter()
                .position(|&i| i > row)
                .unwrap_or(range.len());
        self.rows.insert(at, row);
        self.values.insert(at, value);
        for p in &mut self.col_ptr[col + 1..] {
            *p += 1;
        }
    }

    /// `out = H x` on dense vectors indexed by ordinal.
    pub fn apply_dense(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (i, v) in self.column(j) {
                out[i] += v * xj;
            }
        }
    }

    /// `H Ψ` for a series supported inside the state space.
    pub fn apply(&self, psi: &FockSeries) -> Result<FockSeries> {
        let x = self.space.to_dense(psi)?;
        let mut out = alloc::vec![0.0; self.dim()];
        self.apply_dense(&x, &mut out);
        Ok(self.space.to_series(&out))
    }

    /// Probability on states where some reaction is clamped.
    pub fn boundary_mass(&self, x: &[f64]) -> f64 {
        neumaier_sum(
            x.iter()
                .zip(&self.clamped)
                .filter(|(_, &c)| c)
                .map(|(&v, _)| v),
        )
    }

    /// `exp(tH) x` by uniformization on a dense vector.
    pub fn evolve_dense(&self, x0: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument("evolution time must be finite and nonnegative"));
        }
        assert_eq!(x0.len(), self.dim());
        let lambda = self.max_exit_rate();
        if t == 0.0 || lambda == 0.0 {
            return Ok(x0.to_vec());
        }
        let stochastic = self.uniformized(lambda);
        let total = lambda * t;
        let substeps = libm::ceil(total / MAX_SUBSTEP).max(1.0) as usize;
        let step = total / substeps as f64;

        let mut x = x0.to_vec();
        let mut v = alloc::vec![0.0; self.dim()];
        let mut next = alloc::vec![0.0; self.dim()];
        for _ in 0..substeps {
            v.copy_from_slice(&x);
            let mut weight = libm::exp(-step);
            let mut accumulated = weight;
            for (a, &b) in x.iter_mut().zip(&v) {
                *a = weight * b;
            }
            let mut j = 0usize;
            while accumulated < 1.0 - POISSON_TAIL && j < MAX_TERMS_PER_SUBSTEP {
                stochastic.apply_dense(&v, &mut next);
                core::mem::swap(&mut v, &mut next);
                j += 1;
                weight *= step / j as f64;
                accumulated += weight;
                for (a, &b) in x.iter_mut().zip(&v) {
                    *a += weight * b;
                }
            }
        }

        if let Some((i, &value)) = x.iter().enumerate().find(|(_, &v)| v < NEGATIVITY_FLOOR) {
            return Err(Error::NegativeCoefficient {
                index: self.space.state(i).clone(),
                value,
            });
        }
        Ok(x)
    }

    /// `P = I + H/Λ`, entrywise nonnegative when `Λ ≥ max |H[ℓ,ℓ]|`.
    fn uniformized(&self, lambda: f64) -> Generator {
        let mut p = self.clone();
        for j in 0..self.dim() {
            for idx in p.col_ptr[j]..p.col_ptr[j + 1] {
                let scaled = p.values[idx] / lambda;
                p.values[idx] = if p.rows[idx] == j { 1.0 + scaled } else { scaled };
            }
        }
        p
    }
}

/// `H Ψ`.
pub fn apply_generator(h: &Generator, psi: &FockSeries) -> Result<FockSeries> {
    h.apply(psi)
}

/// `exp(tH) Ψ₀` for a mixed state `Ψ₀` supported in the generator's state space.
pub fn evolve(h: &Generator, psi0: &FockSeries, t: f64) -> Result<FockSeries> {
    MixedStateView::new(psi0, MIXED_TOLERANCE)?;
    let x0 = h.space().to_dense(psi0)?;
    let x = h.evolve_dense(&x0, t)?;
    Ok(h.space().to_series(&x))
}

/// Expected counts and boundary mass of an evolved state at one sample time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MasterSample {
    pub time: f64,
    pub mean: Vec<f64>,
    /// Probability on states whose outgoing reactions are truncated by the cap.
    pub tail_mass: f64,
}

/// Evolves `psi0` through increasing sample `times`, reporting `⟨NΨ(t)⟩` at each.
pub fn expected_value_series(
    h: &Generator,
    psi0: &FockSeries,
    times: &[f64],
) -> Result<Vec<MasterSample>> {
    MixedStateView::new(psi0, MIXED_TOLERANCE)?;
    let mut x = h.space().to_dense(psi0)?;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < now {
            return Err(Error::InvalidArgument("sample times must be nondecreasing"));
        }
        x = h.evolve_dense(&x, t - now)?;
        now = t;
        out.push(MasterSample {
            time: t,
            mean: dense_means(h.space(), &x),
            tail_mass: h.boundary_mass(&x),
        });
    }
    Ok(out)
}

/// `⟨N_i Ψ⟩` from a dense vector.
pub fn dense_means(space: &StateSpace, x: &[f64]) -> Vec<f64> {
    (0..space.k())
        .map(|i| {
            neumaier_sum(
                space
                    .states()
                    .iter()
                    .zip(x)
                    .map(|(l, &p)| l.entries()[i] as f64 * p),
            )
        })
        .collect()
}

/// Sign applied to the net change of each reaction in the expected-value formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// Factor `s(τ) − t(τ)`.
    SourceMinusTarget,
    /// Factor `t(τ) − s(τ)`, the orientation of the rate equation.
    TargetMinusSource,
}

impl SignConvention {
    pub const ALL: [SignConvention; 2] = [
        SignConvention::SourceMinusTarget,
        SignConvention::TargetMinusSource,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SignConvention::SourceMinusTarget => "source-minus-target",
            SignConvention::TargetMinusSource => "target-minus-source",
        }
    }

    fn factor(self, source: u64, target: u64) -> f64 {
        let d = source as f64 - target as f64;
        match self {
            SignConvention::SourceMinusTarget => d,
            SignConvention::TargetMinusSource => -d,
        }
    }
}

/// `Σ_τ r(τ) · (±(s(τ) − t(τ))) · ⟨N^{s(τ)̲} Ψ⟩`, with the sign chosen by `convention`.
pub fn expected_value_rhs(
    net: &Network,
    psi: &FockSeries,
    convention: SignConvention,
) -> Result<Vec<f64>> {
    if psi.k() != net.k() {
        return Err(Error::LengthMismatch {
            expected: net.k(),
            found: psi.k(),
        });
    }
    let mut out = alloc::vec![0.0; net.k()];
    for r in net.reactions() {
        let moment = psi.expect_number_falling(r.source())?;
        if moment == 0.0 {
            continue;
        }
        for ((o, &s), &t) in out
            .iter_mut()
            .zip(r.source().entries())
            .zip(r.target().entries())
        {
            if s != t {
                *o += r.rate() * convention.factor(s, t) * moment;
            }
        }
    }
    Ok(out)
}

/// Indices of a series lying outside the space, for diagnostics.
pub fn outside_support(space: &StateSpace, psi: &FockSeries) -> Vec<MultiIndex> {
    psi.iter()
        .filter(|(l, _)| space.ordinal(l).is_none())
        .map(|(l, _)| l.clone())
        .collect()
}

pub(crate) fn describe_state(space: &StateSpace, j: usize) -> alloc::string::String {
    format!("{:?}", space.state(j))
}
