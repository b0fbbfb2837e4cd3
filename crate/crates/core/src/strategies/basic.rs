//! Strategies that re-decide every block: one target, or the biggest miners
//! first.

use super::{BribeSchedule, DecisionRule, MembershipMatrix, StrategyError, StrategyOutcome, StrategyTag};
use crate::model::Scenario;
use crate::rationality::{choose_chain, emit_bribe, min_bribe_basic, Beliefs, ChainChoice};

/// Bribes only the target, at its basic minimum in every state up to `C`.
pub fn run_bs(scenario: &Scenario) -> Result<StrategyOutcome, StrategyError> {
    let (mu, lambda, reward) = (scenario.mu(), scenario.lambda(), scenario.reward());
    let pm = scenario.target_power();
    let m = scenario.target_index();
    let h = scenario.horizon();

    let mut per_state = vec![0.0; h];
    let mut minima = vec![None; h];
    let mut membership = MembershipMatrix::empty(scenario.miner_set().len(), h);
    for i in 0..=scenario.last_bribed_state() {
        let q = min_bribe_basic(i, pm, mu, lambda, reward)?;
        let threshold = q.threshold.finite().expect("basic thresholds are finite");
        per_state[i] = emit_bribe(threshold);
        minima[i] = Some(threshold);
        let choice = choose_chain(i, per_state[i], pm, Beliefs::Basic { mu, lambda }, reward);
        membership.set(m, i, choice == ChainChoice::JoinX);
    }
    let mut schedule = BribeSchedule::new(per_state, StrategyTag::Bs)?;
    schedule.minima = minima;
    StrategyOutcome::assemble(scenario, schedule, membership, DecisionRule::TargetOnly)
}

/// Roster index of the miner courted at state `i`: the `(C - i + 1)`-th
/// biggest, or the smallest once the roster runs out.
pub(crate) fn bff_rank(confirmations: usize, i: usize, roster: usize) -> usize {
    (confirmations - i + 1).min(roster) - 1
}

/// Courts one more miner per state as the fork closes in, biggest first.
/// At state `i` the bribe is the courted miner's basic minimum, and every
/// recruit so far decides against it.
pub fn run_bff(scenario: &Scenario) -> Result<StrategyOutcome, StrategyError> {
    let (mu, lambda, reward) = (scenario.mu(), scenario.lambda(), scenario.reward());
    let powers = scenario.miner_set().powers();
    let h = scenario.horizon();
    let c = scenario.confirmations();

    let mut per_state = vec![0.0; h];
    let mut minima = vec![None; h];
    let mut membership = MembershipMatrix::empty(powers.len(), h);
    for i in 0..=scenario.last_bribed_state() {
        let rank = bff_rank(c, i, powers.len());
        let q = min_bribe_basic(i, powers[rank], mu, lambda, reward)?;
        let threshold = q.threshold.finite().expect("basic thresholds are finite");
        per_state[i] = emit_bribe(threshold);
        minima[i] = Some(threshold);
        for (k, &pk) in powers.iter().enumerate().take(rank + 1) {
            let choice = choose_chain(i, per_state[i], pk, Beliefs::Basic { mu, lambda }, reward);
            membership.set(k, i, choice == ChainChoice::JoinX);
        }
    }
    let mut schedule = BribeSchedule::new(per_state, StrategyTag::Bff)?;
    schedule.minima = minima;
    StrategyOutcome::assemble(scenario, schedule, membership, DecisionRule::BiggestFirst)
}
