//! Attacker bribery strategies and their evaluation on the fork-race chain.
//!
//! Every strategy produces a [`BribeSchedule`] (total bribe on offer at each
//! gap state) and a [`MembershipMatrix`] (which main-chain miners work on the
//! fork at each state). The membership fixes the chain; the chain and the
//! schedule fix the outcome.

mod basic;
mod crb;
mod gvc;
mod optimize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{catchup_prob, AbsorbingChain, AbsorptionAnalysis, MarkovError};
use crate::model::{ModelError, Scenario};
use crate::rationality::RationalityError;

pub use basic::{run_bff, run_bs};
pub use crb::{crb_minima, run_crb, run_crb_with_constant, CrbVariant};
pub use gvc::{
    gvc_final_markov, gvc_new_markov, gvc_zeta, run_gvc, GvcOptions, NewMarkov, ZetaColumns,
    ZetaScope,
};
pub use optimize::{optimize_gvc, target_violations, GvcObjective, OptimizerConfig};

/// Highest fork power a chain state may carry. States where every
/// main-chain miner would join are held just below certainty so the chain
/// stays absorbing through W.
pub const FORK_POWER_CEILING: f64 = 1.0 - 1e-9;

pub fn saturate(power: f64) -> f64 {
    power.min(FORK_POWER_CEILING)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Rationality(#[from] RationalityError),
    #[error("schedule has {got} states, chain has {expected}")]
    ScheduleLength { expected: usize, got: usize },
    #[error("schedule entry {state} is {value}; bribes must be finite and non-negative")]
    InvalidBribe { state: usize, value: f64 },
    #[error("strategy requires a committed schedule")]
    NotCommitted,
    #[error("no schedule persuades the target: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyTag {
    #[serde(rename = "BS")]
    Bs,
    #[serde(rename = "BFF")]
    Bff,
    #[serde(rename = "CRB1")]
    Crb1,
    #[serde(rename = "CRB2")]
    Crb2,
    #[serde(rename = "GVC_AC")]
    GvcAc,
    #[serde(rename = "GVC_RAC")]
    GvcRac,
}

impl StrategyTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyTag::Bs => "BS",
            StrategyTag::Bff => "BFF",
            StrategyTag::Crb1 => "CRB1",
            StrategyTag::Crb2 => "CRB2",
            StrategyTag::GvcAc => "GVC_AC",
            StrategyTag::GvcRac => "GVC_RAC",
        }
    }

    pub fn is_committed(self) -> bool {
        !matches!(self, StrategyTag::Bs | StrategyTag::Bff)
    }
}

impl std::fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Total bribe (BTC) on offer at each gap state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BribeSchedule {
    pub per_state: Vec<f64>,
    pub committed: bool,
    pub tag: StrategyTag,
    /// Unclamped per-state minimum the entry was derived from, if any.
    pub minima: Vec<Option<f64>>,
}

impl BribeSchedule {
    pub fn new(per_state: Vec<f64>, tag: StrategyTag) -> Result<Self, StrategyError> {
        for (state, &value) in per_state.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(StrategyError::InvalidBribe { state, value });
            }
        }
        let minima = vec![None; per_state.len()];
        Ok(Self {
            per_state,
            committed: tag.is_committed(),
            tag,
            minima,
        })
    }

    pub fn len(&self) -> usize {
        self.per_state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_state.is_empty()
    }

    pub fn get(&self, state: usize) -> f64 {
        self.per_state.get(state).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.per_state.iter().sum()
    }
}

/// ζ: `zeta[miner][state]` is true when the miner works on the fork.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipMatrix {
    zeta: Vec<Vec<bool>>,
    states: usize,
}

impl MembershipMatrix {
    pub fn empty(miners: usize, states: usize) -> Self {
        Self {
            zeta: vec![vec![false; states]; miners],
            states,
        }
    }

    pub fn miners(&self) -> usize {
        self.zeta.len()
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn get(&self, miner: usize, state: usize) -> bool {
        self.zeta[miner][state]
    }

    pub fn set(&mut self, miner: usize, state: usize, on_fork: bool) {
        self.zeta[miner][state] = on_fork;
    }

    pub fn row(&self, miner: usize) -> &[bool] {
        &self.zeta[miner]
    }

    /// Miners working on the fork at `state`.
    pub fn on_fork(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.miners()).filter(move |&m| self.zeta[m][state])
    }

    /// μ plus the power of every miner on the fork, per state, uncapped.
    pub fn fork_power(&self, powers: &[f64], mu: f64) -> Vec<f64> {
        (0..self.states)
            .map(|j| mu + self.on_fork(j).map(|m| powers[m]).sum::<f64>())
            .collect()
    }

    /// Whether every state respects the power ordering: a miner on the fork
    /// implies every strictly larger miner is too.
    pub fn is_power_monotone(&self, powers: &[f64]) -> bool {
        (0..self.states).all(|j| {
            (0..self.miners()).all(|m| {
                !self.zeta[m][j]
                    || (0..self.miners()).all(|k| powers[k] <= powers[m] || self.zeta[k][j])
            })
        })
    }

    /// Adds every miner strictly larger than one already on the fork.
    pub fn close_over_power(&mut self, powers: &[f64]) {
        for j in 0..self.states {
            let smallest = (0..self.miners())
                .filter(|&m| self.zeta[m][j])
                .map(|m| powers[m])
                .fold(f64::INFINITY, f64::min);
            for (m, &p) in powers.iter().enumerate() {
                if p > smallest {
                    self.zeta[m][j] = true;
                }
            }
        }
    }
}

/// Chain whose per-state fork power is μ plus the members' power.
pub fn chain_from_membership(
    membership: &MembershipMatrix,
    powers: &[f64],
    mu: f64,
) -> Result<AbsorbingChain, MarkovError> {
    AbsorbingChain::new(
        membership
            .fork_power(powers, mu)
            .into_iter()
            .map(saturate)
            .collect(),
    )
}

/// Chain metrics of a schedule, all from the start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub success_prob: f64,
    pub expected_steps: f64,
    pub visits: Vec<f64>,
    pub cost_unconditional: f64,
    /// `None` when the attack can never succeed from the start state.
    pub cost_on_success: Option<f64>,
}

/// Expected bribe outlay regardless of outcome, and conditioned on success.
pub fn evaluate_schedule(
    scenario: &Scenario,
    schedule: &BribeSchedule,
    chain: &AbsorbingChain,
) -> Result<Evaluation, StrategyError> {
    let analysis = chain.analyze()?;
    evaluate_with(scenario.start_state(), schedule, &analysis)
}

pub(crate) fn evaluate_with(
    start: usize,
    schedule: &BribeSchedule,
    analysis: &AbsorptionAnalysis,
) -> Result<Evaluation, StrategyError> {
    let h = analysis.horizon();
    if schedule.len() != h {
        return Err(StrategyError::ScheduleLength {
            expected: h,
            got: schedule.len(),
        });
    }
    let visits = analysis.visits_from(start);
    let success = analysis.success(start);
    let cost_unconditional = (0..h).map(|i| visits[i] * schedule.per_state[i]).sum();
    let cost_on_success = (success > 0.0).then(|| {
        (0..h)
            .map(|i| analysis.success(i) / success * visits[i] * schedule.per_state[i])
            .sum()
    });
    Ok(Evaluation {
        success_prob: success,
        expected_steps: analysis.steps[start],
        visits,
        cost_unconditional,
        cost_on_success,
    })
}

/// How the spend at one state splits between the parties mining the fork.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateShare {
    pub attacker: f64,
    pub target: f64,
    pub others: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recapture {
    pub attacker: f64,
    pub target: f64,
    pub per_state: Vec<StateShare>,
}

/// Splits per-state bribe spend by share of fork power: the attacker wins
/// back `μ / μᵢ` of each state's spend, the target `P_m / μᵢ` where it mines
/// the fork, and other recruits the rest.
pub fn recapture_split(
    per_state_cost: &[f64],
    mu: f64,
    target_power: f64,
    fork_power: &[f64],
    target_on_fork: &[bool],
) -> Recapture {
    let per_state: Vec<StateShare> = per_state_cost
        .iter()
        .zip(fork_power)
        .zip(target_on_fork)
        .map(|((&cost, &fork), &target_in)| {
            let attacker = cost * mu / fork;
            let target = if target_in {
                cost * target_power / fork
            } else {
                0.0
            };
            StateShare {
                attacker,
                target,
                others: cost - attacker - target,
            }
        })
        .collect();
    Recapture {
        attacker: per_state.iter().map(|s| s.attacker).sum(),
        target: per_state.iter().map(|s| s.target).sum(),
        per_state,
    }
}

/// Spend when the race runs straight from the start state to success, each
/// state visited once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleVisit {
    pub cost: f64,
    pub attacker_recapture: f64,
    pub target_recapture: f64,
}

/// How miners decide, needed to replay a strategy event by event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// Only the target weighs the offer, with the basic formula.
    TargetOnly,
    /// The next biggest miner is recruited at each state; recruits weigh the
    /// offer with the basic formula and the newest leaves on a main-chain block.
    BiggestFirst,
    /// The schedule is committed; miners follow precomputed per-state actions.
    Committed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub tag: StrategyTag,
    pub start_state: usize,
    pub success_prob: f64,
    /// Infinite-horizon catch-up probability with the start state's powers
    /// held constant.
    pub catchup_success: f64,
    pub expected_steps: f64,
    pub visits: Vec<f64>,
    pub cost_unconditional: f64,
    pub cost_on_success: Option<f64>,
    /// Expected bribe won back by the attacker (on the unconditional spend).
    pub attacker_recapture: f64,
    pub target_recapture: f64,
    pub single_visit: SingleVisit,
    pub schedule: BribeSchedule,
    pub membership: MembershipMatrix,
    pub final_chain: AbsorbingChain,
    pub decision: DecisionRule,
}

impl StrategyOutcome {
    pub(crate) fn assemble(
        scenario: &Scenario,
        schedule: BribeSchedule,
        membership: MembershipMatrix,
        decision: DecisionRule,
    ) -> Result<Self, StrategyError> {
        let powers = scenario.miner_set().powers();
        let chain = chain_from_membership(&membership, &powers, scenario.mu())?;
        Self::assemble_on(scenario, schedule, membership, chain, decision)
    }

    fn assemble_on(
        scenario: &Scenario,
        schedule: BribeSchedule,
        membership: MembershipMatrix,
        chain: AbsorbingChain,
        decision: DecisionRule,
    ) -> Result<Self, StrategyError> {
        let h = scenario.horizon();
        if schedule.len() != h {
            return Err(StrategyError::ScheduleLength {
                expected: h,
                got: schedule.len(),
            });
        }
        let start = scenario.start_state();
        let eval = evaluate_schedule(scenario, &schedule, &chain)?;
        let powers = scenario.miner_set().powers();
        let mu = scenario.mu();
        let fork_power = membership.fork_power(&powers, mu);
        let target_row = membership.row(scenario.target_index());

        let expected_spend: Vec<f64> = (0..h)
            .map(|i| eval.visits[i] * schedule.per_state[i])
            .collect();
        let expected = recapture_split(
            &expected_spend,
            mu,
            scenario.target_power(),
            &fork_power,
            target_row,
        );

        let path_spend: Vec<f64> = (0..h)
            .map(|i| if i <= start { schedule.per_state[i] } else { 0.0 })
            .collect();
        let path = recapture_split(
            &path_spend,
            mu,
            scenario.target_power(),
            &fork_power,
            target_row,
        );

        let start_power = chain.fork_power()[start];
        Ok(Self {
            tag: schedule.tag,
            start_state: start,
            success_prob: eval.success_prob,
            catchup_success: catchup_prob(start_power, 1.0 - start_power, start),
            expected_steps: eval.expected_steps,
            visits: eval.visits,
            cost_unconditional: eval.cost_unconditional,
            cost_on_success: eval.cost_on_success,
            attacker_recapture: expected.attacker,
            target_recapture: expected.target,
            single_visit: SingleVisit {
                cost: path_spend.iter().sum(),
                attacker_recapture: path.attacker,
                target_recapture: path.target,
            },
            schedule,
            membership,
            final_chain: chain,
            decision,
        })
    }

    /// Re-evaluates the same schedule and membership on another chain.
    pub fn with_chain(
        &self,
        scenario: &Scenario,
        chain: AbsorbingChain,
    ) -> Result<Self, StrategyError> {
        Self::assemble_on(
            scenario,
            self.schedule.clone(),
            self.membership.clone(),
            chain,
            self.decision,
        )
    }

    /// Re-evaluates a different schedule on the same chain and membership.
    pub fn with_schedule(
        &self,
        scenario: &Scenario,
        schedule: BribeSchedule,
    ) -> Result<Self, StrategyError> {
        Self::assemble_on(
            scenario,
            schedule,
            self.membership.clone(),
            self.final_chain.clone(),
            self.decision,
        )
    }
}
