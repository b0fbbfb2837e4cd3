//! The gap-indexed absorbing chain of a fork race.
//!
//! Transient state `i` is the number of blocks the fork trails the main
//! chain by. From state `i` a fork block moves the race to `i - 1` (or into
//! the success state V from state 0) and a main-chain block moves it to
//! `i + 1` (or into the failure state W from the last transient state).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Scenario;

/// Column of `G` / `B` holding the success state V.
pub const V: usize = 0;
/// Column of `G` / `B` holding the failure state W.
pub const W: usize = 1;

const PIVOT_TOLERANCE: f64 = 1e-13;
const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("fork power {power} at state {state} is outside (0, 1)")]
    DegenerateState { state: usize, power: f64 },
    #[error("chain needs at least one transient state")]
    Empty,
    #[error("expected {expected} per-state powers, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("I - Q is singular to working precision")]
    Singular,
    #[error("fundamental matrix residual {0:e} exceeds tolerance")]
    Residual(f64),
}

/// Birth-death chain over gap states `0..h` with per-state fork power μᵢ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorbingChain {
    fork_power: Vec<f64>,
}

impl AbsorbingChain {
    pub fn new(fork_power: Vec<f64>) -> Result<Self, MarkovError> {
        if fork_power.is_empty() {
            return Err(MarkovError::Empty);
        }
        for (state, &power) in fork_power.iter().enumerate() {
            if !(power > 0.0 && power < 1.0) {
                return Err(MarkovError::DegenerateState { state, power });
            }
        }
        Ok(Self { fork_power })
    }

    /// Constant fork power at every state.
    pub fn uniform(horizon: usize, power: f64) -> Result<Self, MarkovError> {
        Self::new(vec![power; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.fork_power.len()
    }

    /// μᵢ for every transient state.
    pub fn fork_power(&self) -> &[f64] {
        &self.fork_power
    }

    /// λᵢ = 1 − μᵢ for every transient state.
    pub fn main_power(&self) -> Vec<f64> {
        self.fork_power.iter().map(|p| 1.0 - p).collect()
    }

    pub fn canonical_form(&self) -> CanonicalForm {
        canonical_form(self)
    }

    /// Runs the full absorption analysis (N, e, B).
    pub fn analyze(&self) -> Result<AbsorptionAnalysis, MarkovError> {
        let cf = self.canonical_form();
        let n = fundamental_matrix(&cf)?;
        let steps = expected_steps(&n);
        let b = absorption_probs(&n, &cf.g);
        Ok(AbsorptionAnalysis { n, steps, b })
    }
}

/// Builds the scenario's chain from a per-state fork-power vector.
pub fn build_base_chain(
    scenario: &Scenario,
    per_state_fork_power: Vec<f64>,
) -> Result<AbsorbingChain, MarkovError> {
    if per_state_fork_power.len() != scenario.horizon() {
        return Err(MarkovError::LengthMismatch {
            expected: scenario.horizon(),
            got: per_state_fork_power.len(),
        });
    }
    AbsorbingChain::new(per_state_fork_power)
}

/// `[Q | G]`: transient-to-transient and transient-to-absorbing blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    pub q: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

pub fn canonical_form(chain: &AbsorbingChain) -> CanonicalForm {
    let h = chain.horizon();
    let mut q = DMatrix::zeros(h, h);
    let mut g = DMatrix::zeros(h, 2);
    for (i, &down) in chain.fork_power.iter().enumerate() {
        let up = 1.0 - down;
        if i == 0 {
            g[(i, V)] = down;
        } else {
            q[(i, i - 1)] = down;
        }
        if i + 1 == h {
            g[(i, W)] += up;
        } else {
            q[(i, i + 1)] = up;
        }
    }
    CanonicalForm { q, g }
}

/// `N = (I − Q)⁻¹` by LU with partial pivoting.
pub fn fundamental_matrix(cf: &CanonicalForm) -> Result<DMatrix<f64>, MarkovError> {
    let h = cf.q.nrows();
    let a = DMatrix::<f64>::identity(h, h) - &cf.q;
    let lu = a.clone().lu();
    let u = lu.u();
    let scale = a.amax().max(1.0);
    if u.diagonal().iter().any(|d| d.abs() <= PIVOT_TOLERANCE * scale) {
        return Err(MarkovError::Singular);
    }
    let n = lu
        .solve(&DMatrix::identity(h, h))
        .ok_or(MarkovError::Singular)?;
    let residual = residual_inf_norm(&a, &n);
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(MarkovError::Residual(residual));
    }
    Ok(n)
}

/// ‖(I − Q)N − I‖∞ (maximum absolute row sum).
pub fn residual_inf_norm(i_minus_q: &DMatrix<f64>, n: &DMatrix<f64>) -> f64 {
    let h = n.nrows();
    let r = i_minus_q * n - DMatrix::<f64>::identity(h, h);
    r.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e = N·1`, expected number of transient steps before absorption.
pub fn expected_steps(n: &DMatrix<f64>) -> DVector<f64> {
    n * DVector::from_element(n.ncols(), 1.0)
}

/// `B = N·G`, absorption probabilities (columns V, W).
pub fn absorption_probs(n: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    n * g
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionAnalysis {
    pub n: DMatrix<f64>,
    pub steps: DVector<f64>,
    pub b: DMatrix<f64>,
}

impl AbsorptionAnalysis {
    pub fn horizon(&self) -> usize {
        self.n.nrows()
    }

    pub fn success(&self, state: usize) -> f64 {
        self.b[(state, V)]
    }

    pub fn failure(&self, state: usize) -> f64 {
        self.b[(state, W)]
    }

    /// Row `state` of N: expected visits to each transient state.
    pub fn visits_from(&self, state: usize) -> Vec<f64> {
        self.n.row(state).iter().copied().collect()
    }

    pub fn success_column(&self) -> Vec<f64> {
        self.b.column(V).iter().copied().collect()
    }

    pub fn failure_column(&self) -> Vec<f64> {
        self.b.column(W).iter().copied().collect()
    }
}

/// Infinite-horizon probability that a fork with power `mu_eff` ever
/// overtakes a chain with power `lambda_eff` from `i + 1` blocks behind.
pub fn catchup_prob(mu_eff: f64, lambda_eff: f64, i: usize) -> f64 {
    if mu_eff >= lambda_eff {
        return 1.0;
    }
    (mu_eff / lambda_eff).powi(i as i32 + 1)
}
