//! Miner-side profitability: minimum bribes, chain choice and threshold
//! inversion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{AbsorbingChain, MarkovError};

/// One satoshi, the nominal bribe offered where none is required.
pub const DUST_BTC: f64 = 1e-8;

const THRESHOLD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RationalityError {
    #[error("miner power {power} must lie in (0, λ={lambda})")]
    MinerPower { power: f64, lambda: f64 },
    #[error("attacker power {mu} and main-chain power {lambda} do not form a distribution")]
    Powers { mu: f64, lambda: f64 },
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("block reward must be positive, got {0}")]
    Reward(f64),
    #[error("state {state} outside the {len} visit entries")]
    StateOutOfRange { state: usize, len: usize },
    #[error("no expected visits in the summation range")]
    EmptyRange,
    #[error(transparent)]
    Markov(#[from] MarkovError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BribeFormula {
    /// State-dependent probabilities.
    General,
    /// Constant fork/main powers, infinite-horizon catch-up.
    Basic,
}

/// Minimum bribe a miner needs before the fork becomes the better bet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// Any offer strictly above this amount persuades. Negative means the
    /// fork already pays without a bribe.
    Finite(f64),
    /// The fork can never succeed from this state; no bribe persuades.
    Unpersuadable,
}

impl Threshold {
    pub fn finite(self) -> Option<f64> {
        match self {
            Threshold::Finite(v) => Some(v),
            Threshold::Unpersuadable => None,
        }
    }

    pub fn is_met_by(self, offered: f64) -> bool {
        match self {
            Threshold::Finite(v) => offered > v,
            Threshold::Unpersuadable => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BribeQuote {
    pub state: usize,
    pub miner_power: f64,
    pub threshold: Threshold,
    pub formula: BribeFormula,
}

impl BribeQuote {
    /// The amount put on offer: just above the threshold, never below dust.
    pub fn emit(&self) -> Option<f64> {
        self.threshold.finite().map(emit_bribe)
    }
}

/// Smallest offer strictly above `threshold`, clamped to one satoshi.
pub fn emit_bribe(threshold: f64) -> f64 {
    if threshold < 0.0 {
        DUST_BTC
    } else {
        threshold + DUST_BTC
    }
}

fn check_powers(pm: f64, mu: f64, lambda: f64) -> Result<(), RationalityError> {
    if !(mu > 0.0 && lambda > 0.0 && (mu + lambda - 1.0).abs() <= 1e-9) {
        return Err(RationalityError::Powers { mu, lambda });
    }
    if !(pm > 0.0 && pm < lambda) {
        return Err(RationalityError::MinerPower { power: pm, lambda });
    }
    Ok(())
}

fn basic_rhs(i: usize, pm: f64, mu: f64, lambda: f64, reward: f64) -> f64 {
    let k = i as i32 + 1;
    let fail_if_stays = 1.0 - (mu / lambda).powi(k);
    let success_if_joins = ((mu + pm) / (lambda - pm)).powi(k);
    fail_if_stays * (pm + mu) / (lambda * success_if_joins) * reward - reward
}

/// Minimum bribe at gap `i` for a miner of power `pm` when the fork and
/// main-chain powers are held at `mu` / `lambda`.
pub fn min_bribe_basic(
    i: usize,
    pm: f64,
    mu: f64,
    lambda: f64,
    reward: f64,
) -> Result<BribeQuote, RationalityError> {
    check_powers(pm, mu, lambda)?;
    if !(reward > 0.0) {
        return Err(RationalityError::Reward(reward));
    }
    Ok(BribeQuote {
        state: i,
        miner_power: pm,
        threshold: Threshold::Finite(basic_rhs(i, pm, mu, lambda, reward)),
        formula: BribeFormula::Basic,
    })
}

/// Minimum bribe at gap `i` with state-dependent beliefs: `p_xs` is the
/// success probability if the miner joins the fork, `p_yf` the failure
/// probability if it stays; `mu_i` excludes the miner, `lambda_i` includes it.
pub fn min_bribe_general(
    i: usize,
    pm: f64,
    mu_i: f64,
    lambda_i: f64,
    p_xs: f64,
    p_yf: f64,
    reward: f64,
) -> Result<BribeQuote, RationalityError> {
    for p in [p_xs, p_yf] {
        if !(0.0..=1.0).contains(&p) {
            return Err(RationalityError::Probability(p));
        }
    }
    if !(pm > 0.0 && lambda_i > 0.0 && mu_i >= 0.0) {
        return Err(RationalityError::MinerPower {
            power: pm,
            lambda: lambda_i,
        });
    }
    if !(reward > 0.0) {
        return Err(RationalityError::Reward(reward));
    }
    let threshold = if p_xs <= 0.0 {
        Threshold::Unpersuadable
    } else {
        Threshold::Finite(p_yf * (pm + mu_i) / (lambda_i * p_xs) * reward - reward)
    };
    Ok(BribeQuote {
        state: i,
        miner_power: pm,
        threshold,
        formula: BribeFormula::General,
    })
}

/// Per-state view a single miner holds of the race.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerBeliefs {
    /// Success probability from each state if the miner mines on the fork.
    pub p_xs: Vec<f64>,
    /// Failure probability from each state if the miner stays on the main chain.
    pub p_yf: Vec<f64>,
    /// μᵢ, fork power without the miner.
    pub fork_power: Vec<f64>,
    /// λᵢ, main-chain power including the miner.
    pub main_power: Vec<f64>,
}

impl MinerBeliefs {
    /// `with` has the miner on the fork, `without` has it on the main chain.
    pub fn from_chains(
        with: &AbsorbingChain,
        without: &AbsorbingChain,
    ) -> Result<Self, RationalityError> {
        let joined = with.analyze()?;
        let stayed = without.analyze()?;
        Ok(Self {
            p_xs: joined.success_column(),
            p_yf: stayed.failure_column(),
            fork_power: without.fork_power().to_vec(),
            main_power: without.main_power(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.p_xs.len()
    }

    pub fn quote(&self, i: usize, pm: f64, reward: f64) -> Result<BribeQuote, RationalityError> {
        if i >= self.horizon() {
            return Err(RationalityError::StateOutOfRange {
                state: i,
                len: self.horizon(),
            });
        }
        min_bribe_general(
            i,
            pm,
            self.fork_power[i],
            self.main_power[i],
            self.p_xs[i],
            self.p_yf[i],
            reward,
        )
    }
}

/// Whether the per-state expected fork income exceeds the expected main-chain
/// income summed over every state. Necessary, not sufficient, for the miner
/// to stay on the fork.
pub fn staying_condition(schedule: &[f64], pm: f64, beliefs: &MinerBeliefs, reward: f64) -> bool {
    let n = schedule.len().min(beliefs.horizon());
    let mut fork = 0.0;
    let mut main = 0.0;
    for i in 0..n {
        fork += beliefs.p_xs[i] * pm / (beliefs.fork_power[i] + pm) * (schedule[i] + reward);
        main += beliefs.p_yf[i] * pm / beliefs.main_power[i] * reward;
    }
    fork > main
}

/// Visit-weighted average of the per-state minima from `current_state`
/// down to state 0: the smallest constant bribe the miner accepts.
pub fn crb_min_constant(
    visits_row: &[f64],
    minima: &[f64],
    current_state: usize,
) -> Result<f64, RationalityError> {
    let len = visits_row.len().min(minima.len());
    if current_state >= len {
        return Err(RationalityError::StateOutOfRange {
            state: current_state,
            len,
        });
    }
    let (mut weighted, mut total) = (0.0, 0.0);
    for i in 0..=current_state {
        weighted += visits_row[i] * minima[i];
        total += visits_row[i];
    }
    if !(total > 0.0) {
        return Err(RationalityError::EmptyRange);
    }
    Ok(weighted / total)
}

/// Smallest miner power persuaded by a bribe `bribe` at gap `i` under the
/// basic formula, or `None` if no power below λ suffices.
pub fn persuadable_threshold(i: usize, bribe: f64, mu: f64, lambda: f64, reward: f64) -> Option<f64> {
    let persuaded = |p: f64| bribe > basic_rhs(i, p, mu, lambda, reward);
    if persuaded(0.0) {
        return Some(0.0);
    }
    let mut hi = lambda * (1.0 - 1e-15);
    if !persuaded(hi) {
        return None;
    }
    let mut lo = 0.0;
    while hi - lo > THRESHOLD_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if persuaded(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainChoice {
    JoinX,
    JoinY,
}

/// What a miner assumes about the race when deciding.
#[derive(Debug, Clone, Copy)]
pub enum Beliefs<'a> {
    /// Constant powers; the basic formula applies.
    Basic { mu: f64, lambda: f64 },
    /// Per-state probabilities; the general formula applies.
    General(&'a MinerBeliefs),
}

/// Joins the fork iff the offer strictly beats the applicable threshold;
/// indifference resolves to the main chain.
pub fn choose_chain(i: usize, offered: f64, pm: f64, beliefs: Beliefs<'_>, reward: f64) -> ChainChoice {
    let quote = match beliefs {
        Beliefs::Basic { mu, lambda } => min_bribe_basic(i, pm, mu, lambda, reward),
        Beliefs::General(b) => b.quote(i, pm, reward),
    };
    match quote {
        Ok(q) if q.threshold.is_met_by(offered) => ChainChoice::JoinX,
        _ => ChainChoice::JoinY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const F: f64 = 6.25;

    fn basic(i: usize) -> f64 {
        min_bribe_basic(i, 0.1, 0.2, 0.8, F)
            .unwrap()
            .threshold
            .finite()
            .unwrap()
    }

    #[test]
    fn worked_example_thresholds() {
        assert_abs_diff_eq!(basic(6), 876.2, epsilon = 0.1);
        assert_abs_diff_eq!(basic(5), 371.9, epsilon = 0.1);
        assert_abs_diff_eq!(basic(0), -2.1484375, epsilon = 1e-9);
        let total: f64 = (0..=6).map(|i| basic(i).max(0.0)).sum();
        assert_abs_diff_eq!(total, 1495.6, epsilon = 0.1);
    }

    #[test]
    fn emission_clamps_to_dust() {
        let q = min_bribe_basic(0, 0.1, 0.2, 0.8, F).unwrap();
        assert_eq!(q.emit(), Some(DUST_BTC));
        let q = min_bribe_basic(6, 0.1, 0.2, 0.8, F).unwrap();
        assert!(q.emit().unwrap() > basic(6));
    }

    #[test]
    fn basic_errors() {
        assert!(min_bribe_basic(3, 0.8, 0.2, 0.8, F).is_err());
        assert!(min_bribe_basic(3, 0.0, 0.2, 0.8, F).is_err());
        assert!(min_bribe_basic(3, 0.1, 0.2, 0.7, F).is_err());
        assert!(min_bribe_basic(3, 0.1, 0.2, 0.8, 0.0).is_err());
    }

    #[test]
    fn general_reduces_to_basic() {
        let (mu, lambda, pm): (f64, f64, f64) = (0.2123, 0.7877, 0.1284);
        for i in 0..10 {
            let k = i as i32 + 1;
            let p_xs = ((mu + pm) / (lambda - pm)).powi(k);
            let p_yf = 1.0 - (mu / lambda).powi(k);
            let g = min_bribe_general(i, pm, mu, lambda, p_xs, p_yf, F).unwrap();
            let b = min_bribe_basic(i, pm, mu, lambda, F).unwrap();
            let (g, b) = (g.threshold.finite().unwrap(), b.threshold.finite().unwrap());
            assert!((g - b).abs() <= 1e-12 * b.abs().max(1.0), "{i}: {g} vs {b}");
        }
    }

    #[test]
    fn general_special_cases() {
        let q = min_bribe_general(3, 0.1, 0.2, 0.8, 0.4, 0.0, F).unwrap();
        assert_eq!(q.threshold, Threshold::Finite(-F));
        let q = min_bribe_general(3, 0.1, 0.2, 0.8, 0.0, 0.5, F).unwrap();
        assert_eq!(q.threshold, Threshold::Unpersuadable);
        assert!(!q.threshold.is_met_by(1e12));
        assert!(min_bribe_general(3, 0.1, 0.2, 0.8, 1.5, 0.5, F).is_err());
    }

    #[test]
    fn zero_schedule_does_not_keep_miner() {
        let with = AbsorbingChain::uniform(7, 0.3).unwrap();
        let without = AbsorbingChain::uniform(7, 0.2).unwrap();
        let beliefs = MinerBeliefs::from_chains(&with, &without).unwrap();
        assert!(!staying_condition(&[0.0; 7], 0.1, &beliefs, F));
    }

    #[test]
    fn pointwise_thresholds_keep_miner() {
        let with = AbsorbingChain::uniform(7, 0.3).unwrap();
        let without = AbsorbingChain::uniform(7, 0.2).unwrap();
        let beliefs = MinerBeliefs::from_chains(&with, &without).unwrap();
        let schedule: Vec<f64> = (0..7)
            .map(|i| beliefs.quote(i, 0.1, F).unwrap().emit().unwrap())
            .collect();
        assert!(staying_condition(&schedule, 0.1, &beliefs, F));
    }

    #[test]
    fn bff_beliefs_lower_the_threshold() {
        // recruited power grows toward the success state
        let with = AbsorbingChain::new(vec![0.9, 0.82, 0.74, 0.65, 0.55, 0.45, 0.35]).unwrap();
        let without =
            AbsorbingChain::new(vec![0.8, 0.72, 0.64, 0.55, 0.45, 0.35, 0.25]).unwrap();
        let beliefs = MinerBeliefs::from_chains(&with, &without).unwrap();
        let general = beliefs.quote(3, 0.1, F).unwrap().threshold.finite().unwrap();
        assert!(general.is_finite());
        assert!(general < basic(3), "{general} vs {}", basic(3));
    }

    #[test]
    fn crb_constant() {
        let visits = [1.2, 0.8, 2.0, 1.0];
        assert_abs_diff_eq!(
            crb_min_constant(&visits, &[5.0; 4], 3).unwrap(),
            5.0,
            epsilon = 1e-12
        );
        let visits = [1e-9, 1e-9, 1e6, 1e-9];
        let k = crb_min_constant(&visits, &[1.0, 2.0, 40.0, 9.0], 3).unwrap();
        assert_abs_diff_eq!(k, 40.0, epsilon = 1e-6);
        assert!(crb_min_constant(&visits, &[1.0; 4], 4).is_err());
        assert!(matches!(
            crb_min_constant(&[0.0; 2], &[1.0; 2], 1),
            Err(RationalityError::EmptyRange)
        ));
    }

    #[test]
    fn threshold_inverts_forward_formula() {
        let r = basic(4) + 1e-6;
        let p = persuadable_threshold(4, r, 0.2, 0.8, F).unwrap();
        assert!(p <= 0.1 + 1e-9);
        assert!(p > 0.09);
        let p = persuadable_threshold(4, 1e6, 0.2, 0.8, F).unwrap();
        assert!(p < 1e-3);
    }

    #[test]
    fn zero_bribe_threshold_matches_grid_scan() {
        let (mu, lambda) = (0.2, 0.8);
        for i in [0usize, 1, 2, 3] {
            let bisect = persuadable_threshold(i, 0.0, mu, lambda, F).unwrap();
            // oracle: first grid point at 1e-4 resolution where the formula goes negative
            let grid = (1..8000)
                .map(|k| k as f64 * 1e-4)
                .find(|&p| basic_rhs(i, p, mu, lambda, F) < 0.0)
                .unwrap();
            assert!(bisect <= grid && grid - bisect <= 1e-4 + 1e-9, "{i}: {bisect} vs {grid}");
        }
    }

    #[test]
    fn worked_example_choice() {
        let b = Beliefs::Basic { mu: 0.2, lambda: 0.8 };
        assert_eq!(choose_chain(6, 876.3, 0.1, b, F), ChainChoice::JoinX);
        assert_eq!(choose_chain(6, 876.1, 0.1, b, F), ChainChoice::JoinY);
        for i in 1..7 {
            assert_eq!(choose_chain(i, 0.0, 0.1, b, F), ChainChoice::JoinY);
        }
        let exact = basic(6);
        assert_eq!(choose_chain(6, exact, 0.1, b, F), ChainChoice::JoinY);
    }

    proptest! {
        #[test]
        fn bigger_miner_needs_less(
            mu in 0.05f64..0.45,
            i in 0usize..12,
            a in 0.01f64..0.99,
            b in 0.01f64..0.99,
        ) {
            let lambda = 1.0 - mu;
            let (hi, lo) = if a > b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            let (p1, p2) = (hi * lambda * 0.99, lo * lambda * 0.99);
            let r1 = min_bribe_basic(i, p1, mu, lambda, F).unwrap().threshold.finite().unwrap();
            let r2 = min_bribe_basic(i, p2, mu, lambda, F).unwrap().threshold.finite().unwrap();
            prop_assert!(r1 < r2);
        }

        #[test]
        fn deeper_deficit_costs_more(mu in 0.05f64..0.3, frac in 0.01f64..0.99, i in 0usize..15) {
            let lambda = 1.0 - mu;
            let pm = frac * (0.5 - mu);
            prop_assume!(pm > 1e-4);
            let r = |k| min_bribe_basic(k, pm, mu, lambda, F).unwrap().threshold.finite().unwrap();
            prop_assert!(r(i + 1) > r(i));
        }

        #[test]
        fn affine_in_reward(mu in 0.05f64..0.45, frac in 0.01f64..0.99, i in 0usize..10, f in 0.1f64..100.0) {
            let lambda = 1.0 - mu;
            let pm = frac * lambda;
            let at = |reward| min_bribe_basic(i, pm, mu, lambda, reward).unwrap().threshold.finite().unwrap();
            let expected = (at(1.0) + 1.0) * f - f;
            prop_assert!((at(f) - expected).abs() <= 1e-9 * expected.abs().max(f));
        }

        #[test]
        fn threshold_brackets_miner_power(mu in 0.05f64..0.4, frac in 0.05f64..0.95, i in 0usize..8) {
            let lambda = 1.0 - mu;
            let pm = frac * lambda;
            let r = min_bribe_basic(i, pm, mu, lambda, F).unwrap().threshold.finite().unwrap();
            let delta = 1e-6 * r.abs().max(1.0);
            prop_assume!(r - delta >= 0.0);
            let above = persuadable_threshold(i, r + delta, mu, lambda, F).unwrap();
            let below = persuadable_threshold(i, r - delta, mu, lambda, F).unwrap();
            prop_assert!(above <= pm + 1e-9);
            prop_assert!(pm <= below + 1e-9);
        }
    }
}
