//! Monte Carlo replay of a fork race, block by block.
//!
//! Each trial starts at the scenario's start state and draws the finder of
//! every block from the attacker and the individual main-chain miners. A
//! block found by a party on the fork moves the race one state closer to V;
//! any other block moves it one state closer to W.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::model::Scenario;
use crate::rationality::{choose_chain, Beliefs, ChainChoice};
use crate::strategies::{DecisionRule, MembershipMatrix, StrategyOutcome};

const CHUNK: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("simulation needs at least one trial")]
    NoTrials,
    #[error("no trial finished within the event cap")]
    NoCompletedTrials,
    #[error("event cap {cap} is below the horizon {horizon}")]
    EventCap { cap: u64, horizon: usize },
    #[error("z-score must be positive, got {0}")]
    ZScore(f64),
    #[error("policy covers {got} states, scenario has {expected}")]
    PolicyLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Trials still running after this many blocks are discarded.
    pub max_events: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 0,
            max_events: 100_000,
        }
    }
}

/// How miners behave during a race.
pub trait RacePolicy: Sync {
    /// Bribe paid for one visit to `state`.
    fn bribe(&self, state: usize) -> f64;

    /// Miners considered recruited when the race starts at `start`.
    fn initial_recruits(&self, _start: usize) -> Vec<usize> {
        Vec::new()
    }

    /// Whether roster miner `miner` mines on the fork at `state`.
    fn on_fork(&self, state: usize, miner: usize, recruits: &[usize]) -> bool;

    /// Called after a fork block moves the race into `new_state`.
    fn after_fork_block(&self, _new_state: usize, _recruits: &mut Vec<usize>) {}

    /// Called after a main-chain block moves the race into `new_state`.
    fn after_main_block(&self, _new_state: usize, _recruits: &mut Vec<usize>) {}
}

/// Fixed per-state actions.
#[derive(Debug, Clone)]
pub struct TablePolicy {
    pub bribes: Vec<f64>,
    pub membership: MembershipMatrix,
}

impl RacePolicy for TablePolicy {
    fn bribe(&self, state: usize) -> f64 {
        self.bribes[state]
    }

    fn on_fork(&self, state: usize, miner: usize, _recruits: &[usize]) -> bool {
        self.membership.get(miner, state)
    }
}

/// Which courted miners stay after the fork falls further behind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetentionRule {
    /// The most recently courted miner drops out on each main-chain block.
    #[default]
    NewestLeaves,
    /// Once courted, a miner keeps weighing the offer.
    AllStay,
}

/// Miners decide afresh at every block using the basic formula.
#[derive(Debug, Clone)]
pub struct RationalPolicy {
    bribes: Vec<f64>,
    powers: Vec<f64>,
    mu: f64,
    lambda: f64,
    reward: f64,
    confirmations: usize,
    /// `Some` for biggest-first courting, `None` for a single target.
    courting: Option<RetentionRule>,
    target: usize,
}

impl RationalPolicy {
    fn courted_at(&self, state: usize) -> Option<usize> {
        (state <= self.confirmations)
            .then(|| (self.confirmations - state + 1).min(self.powers.len()) - 1)
    }
}

impl RacePolicy for RationalPolicy {
    fn bribe(&self, state: usize) -> f64 {
        self.bribes[state]
    }

    fn initial_recruits(&self, start: usize) -> Vec<usize> {
        match self.courting {
            None => vec![self.target],
            Some(_) => {
                let mut r = Vec::new();
                for s in (start..=self.confirmations.max(start)).rev() {
                    r.extend(self.courted_at(s));
                }
                r
            }
        }
    }

    fn on_fork(&self, state: usize, miner: usize, recruits: &[usize]) -> bool {
        recruits.contains(&miner)
            && choose_chain(
                state,
                self.bribes[state],
                self.powers[miner],
                Beliefs::Basic {
                    mu: self.mu,
                    lambda: self.lambda,
                },
                self.reward,
            ) == ChainChoice::JoinX
    }

    fn after_fork_block(&self, new_state: usize, recruits: &mut Vec<usize>) {
        if self.courting.is_some() {
            recruits.extend(self.courted_at(new_state));
        }
    }

    fn after_main_block(&self, _new_state: usize, recruits: &mut Vec<usize>) {
        if self.courting == Some(RetentionRule::NewestLeaves) && recruits.len() > 1 {
            recruits.pop();
        }
    }
}

/// Replay policy matching how a strategy's miners decide.
pub fn policy_for(
    scenario: &Scenario,
    outcome: &StrategyOutcome,
    retention: RetentionRule,
) -> Box<dyn RacePolicy> {
    let rational = |courting| RationalPolicy {
        bribes: outcome.schedule.per_state.clone(),
        powers: scenario.miner_set().powers(),
        mu: scenario.mu(),
        lambda: scenario.lambda(),
        reward: scenario.reward(),
        confirmations: scenario.last_bribed_state(),
        courting,
        target: scenario.target_index(),
    };
    match outcome.decision {
        DecisionRule::TargetOnly => Box::new(rational(None)),
        DecisionRule::BiggestFirst => Box::new(rational(Some(retention))),
        DecisionRule::Committed => Box::new(TablePolicy {
            bribes: outcome.schedule.per_state.clone(),
            membership: outcome.membership.clone(),
        }),
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64;
        self.n = n;
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            mean: self.mean,
            std_error: (var / self.n.max(1) as f64).sqrt(),
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Tally {
    discarded: u64,
    success: Moments,
    steps: Moments,
    cost: Moments,
    cost_on_success: Moments,
    visits: Vec<Moments>,
}

impl Tally {
    fn new(h: usize) -> Self {
        Self {
            visits: vec![Moments::default(); h],
            ..Self::default()
        }
    }

    fn merge(&mut self, o: &Tally) {
        self.discarded += o.discarded;
        self.success.merge(&o.success);
        self.steps.merge(&o.steps);
        self.cost.merge(&o.cost);
        self.cost_on_success.merge(&o.cost_on_success);
        for (a, b) in self.visits.iter_mut().zip(&o.visits) {
            a.merge(b);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub trials: u64,
    pub completed: u64,
    pub discarded: u64,
    pub success: Estimate,
    pub steps: Estimate,
    pub visits: Vec<Estimate>,
    pub cost_unconditional: Estimate,
    /// `None` when no trial succeeded.
    pub cost_on_success: Option<Estimate>,
}

struct Trial {
    success: bool,
    steps: u64,
    cost: f64,
}

fn run_trial(
    policy: &dyn RacePolicy,
    scenario: &Scenario,
    powers: &[f64],
    rng: &mut ChaCha8Rng,
    max_events: u64,
    visits: &mut [u64],
) -> Option<Trial> {
    let h = scenario.horizon();
    let mu = scenario.mu();
    let mut state = scenario.start_state();
    let mut recruits = policy.initial_recruits(state);
    let mut cost = 0.0;
    for step in 1..=max_events {
        visits[state] += 1;
        cost += policy.bribe(state);
        // the attacker's share comes first, then each miner in roster order
        let mut u = rng.random::<f64>();
        let fork_block = if u < mu {
            true
        } else {
            u -= mu;
            let mut finder = powers.len() - 1;
            for (k, &p) in powers.iter().enumerate() {
                if u < p {
                    finder = k;
                    break;
                }
                u -= p;
            }
            policy.on_fork(state, finder, &recruits)
        };
        if fork_block {
            if state == 0 {
                return Some(Trial {
                    success: true,
                    steps: step,
                    cost,
                });
            }
            state -= 1;
            policy.after_fork_block(state, &mut recruits);
        } else {
            if state + 1 == h {
                return Some(Trial {
                    success: false,
                    steps: step,
                    cost,
                });
            }
            state += 1;
            policy.after_main_block(state, &mut recruits);
        }
    }
    None
}

/// Runs `config.trials` independent races. Trial `t` draws from a ChaCha
/// stream seeded with `seed ^ t`, and results are merged in trial order, so
/// the report does not depend on thread count.
pub fn simulate_race(
    scenario: &Scenario,
    policy: &dyn RacePolicy,
    config: SimConfig,
) -> Result<SimReport, SimError> {
    let h = scenario.horizon();
    if config.trials == 0 {
        return Err(SimError::NoTrials);
    }
    if config.max_events < h as u64 {
        return Err(SimError::EventCap {
            cap: config.max_events,
            horizon: h,
        });
    }
    let powers = scenario.miner_set().powers();
    let chunks = config.trials.div_ceil(CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = Tally::new(h);
            let mut visits = vec![0u64; h];
            for t in c * CHUNK..((c + 1) * CHUNK).min(config.trials) {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ t);
                visits.iter_mut().for_each(|v| *v = 0);
                match run_trial(policy, scenario, &powers, &mut rng, config.max_events, &mut visits)
                {
                    None => tally.discarded += 1,
                    Some(trial) => {
                        tally.success.push(if trial.success { 1.0 } else { 0.0 });
                        tally.steps.push(trial.steps as f64);
                        tally.cost.push(trial.cost);
                        if trial.success {
                            tally.cost_on_success.push(trial.cost);
                        }
                        for (m, &v) in tally.visits.iter_mut().zip(&visits) {
                            m.push(v as f64);
                        }
                    }
                }
            }
            tally
        })
        .collect();
    let mut total = Tally::new(h);
    for t in &tallies {
        total.merge(t);
    }
    let completed = total.success.n;
    if completed == 0 {
        return Err(SimError::NoCompletedTrials);
    }
    Ok(SimReport {
        trials: config.trials,
        completed,
        discarded: total.discarded,
        success: total.success.estimate(),
        steps: total.steps.estimate(),
        visits: total.visits.iter().map(Moments::estimate).collect(),
        cost_unconditional: total.cost.estimate(),
        cost_on_success: (total.cost_on_success.n > 0).then(|| total.cost_on_success.estimate()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCheck {
    pub metric: String,
    pub analytic: Option<f64>,
    pub empirical: Option<f64>,
    pub std_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub z: f64,
    pub checks: Vec<MetricCheck>,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &MetricCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Relative slack covering the fork-power ceiling on saturated states.
const NUMERIC_FLOOR: f64 = 1e-6;

/// Student-t multiplier with the same two-sided coverage as `z` standard
/// normal deviations, for `n` samples. Infinite below two samples.
fn t_multiplier(z: f64, n: u64) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    let coverage = Normal::standard().cdf(z);
    match StudentsT::new(0.0, 1.0, (n - 1) as f64) {
        Ok(t) => t.inverse_cdf(coverage).max(z),
        Err(_) => z,
    }
}

fn check(metric: String, analytic: f64, e: &Estimate, std_error: f64, z: f64) -> MetricCheck {
    let slack = t_multiplier(z, e.n) * std_error + NUMERIC_FLOOR * analytic.abs().max(1.0);
    MetricCheck {
        metric,
        analytic: Some(analytic),
        empirical: Some(e.mean),
        std_error,
        passed: (analytic - e.mean).abs() <= slack,
    }
}

fn sample_check(metric: &str, analytic: f64, e: &Estimate, z: f64) -> MetricCheck {
    check(metric.to_string(), analytic, e, e.std_error, z)
}

/// Checks each analytic metric against the simulated mean within
/// `z` standard errors.
pub fn compare_reports(
    analytic: &StrategyOutcome,
    empirical: &SimReport,
    z: f64,
) -> Result<Comparison, SimError> {
    if empirical.completed == 0 {
        return Err(SimError::NoCompletedTrials);
    }
    if !(z > 0.0) {
        return Err(SimError::ZScore(z));
    }
    if analytic.visits.len() != empirical.visits.len() {
        return Err(SimError::PolicyLength {
            expected: analytic.visits.len(),
            got: empirical.visits.len(),
        });
    }
    // the success rate is tested against its binomial spread under the
    // analytic value, which stays informative when no trial succeeds
    let p = analytic.success_prob;
    let null_se = (p * (1.0 - p) / empirical.success.n as f64).sqrt();
    let mut checks = vec![
        check(
            "success_prob".into(),
            p,
            &empirical.success,
            null_se.max(empirical.success.std_error),
            z,
        ),
        sample_check("expected_steps", analytic.expected_steps, &empirical.steps, z),
        sample_check(
            "cost_unconditional",
            analytic.cost_unconditional,
            &empirical.cost_unconditional,
            z,
        ),
    ];
    for (i, (a, e)) in analytic.visits.iter().zip(&empirical.visits).enumerate() {
        checks.push(sample_check(&format!("visits[{i}]"), *a, e, z));
    }
    checks.push(match (analytic.cost_on_success, &empirical.cost_on_success) {
        (Some(a), Some(e)) => sample_check("cost_on_success", a, e, z),
        (a, e) => MetricCheck {
            metric: "cost_on_success".into(),
            analytic: a,
            empirical: e.map(|e| e.mean),
            std_error: e.map_or(0.0, |e| e.std_error),
            // no successes observed is consistent with a tiny success rate
            passed: a.is_none() == e.is_none() || empirical.success.mean == 0.0,
        },
    });
    Ok(Comparison { z, checks })
}
