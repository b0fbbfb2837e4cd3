//! Committed per-state bribes that recruit whole tiers of miners.
//!
//! Three passes over a committed schedule:
//! 1. every miner the basic formula says is persuaded joins (`NewMarkov`);
//! 2. each remaining miner re-checks the offer against the chain it would
//!    create by joining alone (ζ);
//! 3. ζ fixes the final chain.

use serde::{Deserialize, Serialize};

use super::{
    chain_from_membership, saturate, BribeSchedule, DecisionRule, MembershipMatrix, StrategyError,
    StrategyOutcome,
};
use crate::markov::{AbsorbingChain, V, W};
use crate::model::Scenario;
use crate::rationality::persuadable_threshold;

/// Which absorption columns enter the second-pass threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaColumns {
    /// Success column of the first-pass chain over the failure column of the
    /// chain with the miner added.
    #[default]
    Literal,
    /// Failure column of the first-pass chain over the success column of the
    /// chain with the miner added.
    Consistent,
}

/// Which miners get the second-pass check; the others keep their
/// first-pass decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaScope {
    #[default]
    Target,
    AllMiners,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GvcOptions {
    pub columns: ZetaColumns,
    pub scope: ZetaScope,
}

/// First-pass chain: at each state every miner at least as big as the
/// smallest persuadable power joins.
#[derive(Debug, Clone, PartialEq)]
pub struct NewMarkov {
    pub chain: AbsorbingChain,
    /// Smallest persuaded power per state, `None` if nobody is.
    pub thresholds: Vec<Option<f64>>,
    pub recruited: MembershipMatrix,
    /// η: attacker plus recruited power, uncapped.
    pub eta: Vec<f64>,
}

fn check_schedule(scenario: &Scenario, schedule: &BribeSchedule) -> Result<(), StrategyError> {
    if !schedule.committed {
        return Err(StrategyError::NotCommitted);
    }
    if schedule.len() != scenario.horizon() {
        return Err(StrategyError::ScheduleLength {
            expected: scenario.horizon(),
            got: schedule.len(),
        });
    }
    Ok(())
}

pub fn gvc_new_markov(
    scenario: &Scenario,
    schedule: &BribeSchedule,
) -> Result<NewMarkov, StrategyError> {
    check_schedule(scenario, schedule)?;
    let (mu, lambda, reward) = (scenario.mu(), scenario.lambda(), scenario.reward());
    let powers = scenario.miner_set().powers();
    let h = scenario.horizon();
    let mut recruited = MembershipMatrix::empty(powers.len(), h);
    let mut thresholds = Vec::with_capacity(h);
    for j in 0..h {
        let bribe = schedule.per_state[j];
        let t = if j <= scenario.last_bribed_state() {
            persuadable_threshold(j, bribe, mu, lambda, reward)
        } else {
            None
        };
        if let Some(p) = t {
            for (k, &pk) in powers.iter().enumerate() {
                if pk >= p {
                    recruited.set(k, j, true);
                }
            }
        }
        thresholds.push(t);
    }
    let eta = recruited.fork_power(&powers, mu);
    let chain = chain_from_membership(&recruited, &powers, mu)?;
    Ok(NewMarkov {
        chain,
        thresholds,
        recruited,
        eta,
    })
}

/// Second pass. A miner outside the first-pass recruits joins at state `j`
/// when the offer reaches the threshold computed from the first-pass chain
/// and the chain with the miner added wherever it was not recruited. The
/// result is closed over power order.
pub fn gvc_zeta(
    scenario: &Scenario,
    schedule: &BribeSchedule,
    new_markov: &NewMarkov,
    options: GvcOptions,
) -> Result<MembershipMatrix, StrategyError> {
    check_schedule(scenario, schedule)?;
    let powers = scenario.miner_set().powers();
    let h = scenario.horizon();
    let reward = scenario.reward();
    let base = new_markov.chain.analyze()?;
    let mut zeta = new_markov.recruited.clone();

    let candidates: Vec<usize> = match options.scope {
        ZetaScope::Target => vec![scenario.target_index()],
        ZetaScope::AllMiners => (0..powers.len()).collect(),
    };
    for k in candidates {
        let pk = powers[k];
        if (0..h).all(|j| new_markov.recruited.get(k, j)) {
            continue;
        }
        let perturbed = AbsorbingChain::new(
            (0..h)
                .map(|j| {
                    let extra = if new_markov.recruited.get(k, j) { 0.0 } else { pk };
                    saturate(new_markov.eta[j] + extra)
                })
                .collect(),
        )?
        .analyze()?;
        for j in 0..=scenario.last_bribed_state() {
            if new_markov.recruited.get(k, j) {
                continue;
            }
            let eta_k = new_markov.eta[j] + pk;
            let gamma = 1.0 - new_markov.eta[j];
            let (num, den) = match options.columns {
                ZetaColumns::Literal => (base.b[(j, V)], perturbed.b[(j, W)]),
                ZetaColumns::Consistent => (base.b[(j, W)], perturbed.b[(j, V)]),
            };
            if !(den > 0.0 && gamma > 0.0) {
                continue;
            }
            let threshold = num * eta_k / (den * gamma) * reward - reward;
            if schedule.per_state[j] >= threshold {
                zeta.set(k, j, true);
            }
        }
    }
    zeta.close_over_power(&powers);
    Ok(zeta)
}

pub fn gvc_final_markov(
    scenario: &Scenario,
    zeta: &MembershipMatrix,
) -> Result<AbsorbingChain, StrategyError> {
    Ok(chain_from_membership(
        zeta,
        &scenario.miner_set().powers(),
        scenario.mu(),
    )?)
}

/// Runs all three passes for a given committed schedule.
pub fn run_gvc(
    scenario: &Scenario,
    schedule: BribeSchedule,
    options: GvcOptions,
) -> Result<StrategyOutcome, StrategyError> {
    let nm = gvc_new_markov(scenario, &schedule)?;
    let zeta = gvc_zeta(scenario, &schedule, &nm, options)?;
    StrategyOutcome::assemble(scenario, schedule, zeta, DecisionRule::Committed)
}
