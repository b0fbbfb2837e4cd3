//! Search for the cheapest committed schedule that keeps the target on the fork.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gvc::{gvc_new_markov, gvc_zeta, GvcOptions};
use super::{
    saturate, BribeSchedule, DecisionRule, MembershipMatrix, StrategyError, StrategyOutcome,
    StrategyTag,
};
use crate::markov::AbsorbingChain;
use crate::model::Scenario;
use crate::rationality::{
    choose_chain, min_bribe_basic, Beliefs, ChainChoice, MinerBeliefs, DUST_BTC,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GvcObjective {
    /// Expected spend regardless of outcome.
    Ac,
    /// Expected spend given the attack succeeds.
    Rac,
}

impl GvcObjective {
    pub fn tag(self) -> StrategyTag {
        match self {
            GvcObjective::Ac => StrategyTag::GvcAc,
            GvcObjective::Rac => StrategyTag::GvcRac,
        }
    }

    fn value(self, outcome: &StrategyOutcome) -> f64 {
        match self {
            GvcObjective::Ac => outcome.cost_unconditional,
            GvcObjective::Rac => outcome.cost_on_success.unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Independent starts; the first is seeded from the target's own minima.
    pub restarts: usize,
    pub seed: u64,
    /// Grid step for bribe amounts, in BTC.
    pub quantum: f64,
    pub max_sweeps: usize,
    pub gvc: GvcOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 32,
            seed: 0,
            quantum: 0.01,
            max_sweeps: 50,
            gvc: GvcOptions::default(),
        }
    }
}

/// Target beliefs on the chain fixed by `zeta`: forced onto the fork versus
/// forced off it.
fn target_beliefs(
    scenario: &Scenario,
    zeta: &MembershipMatrix,
) -> Result<MinerBeliefs, StrategyError> {
    let powers = scenario.miner_set().powers();
    let m = scenario.target_index();
    let without: Vec<f64> = zeta
        .fork_power(&powers, scenario.mu())
        .into_iter()
        .enumerate()
        .map(|(j, p)| if zeta.get(m, j) { p - powers[m] } else { p })
        .collect();
    let with = AbsorbingChain::new(without.iter().map(|p| saturate(p + powers[m])).collect())?;
    let without = AbsorbingChain::new(without.into_iter().map(saturate).collect())?;
    Ok(MinerBeliefs::from_chains(&with, &without)?)
}

/// States up to the start state where the target would leave the fork.
pub fn target_violations(
    scenario: &Scenario,
    schedule: &BribeSchedule,
    zeta: &MembershipMatrix,
) -> Result<Vec<usize>, StrategyError> {
    let beliefs = target_beliefs(scenario, zeta)?;
    let pm = scenario.target_power();
    let top = scenario.start_state().min(scenario.last_bribed_state());
    Ok((0..=top)
        .filter(|&j| {
            choose_chain(
                j,
                schedule.per_state[j],
                pm,
                Beliefs::General(&beliefs),
                scenario.reward(),
            ) != ChainChoice::JoinX
        })
        .collect())
}

struct Grid {
    scale: f64,
}

impl Grid {
    fn new(quantum: f64) -> Self {
        Self {
            scale: 1.0 / quantum,
        }
    }

    /// Smallest grid point strictly above `t`, or dust when `t` is negative.
    fn above(&self, t: f64) -> f64 {
        if t < 0.0 {
            DUST_BTC
        } else {
            ((t * self.scale).floor() + 1.0) / self.scale
        }
    }

    fn snap(&self, v: f64) -> f64 {
        let q = (v * self.scale).round();
        if q < 1.0 {
            DUST_BTC
        } else {
            q / self.scale
        }
    }

    fn step(&self, v: f64, dir: f64) -> f64 {
        if v <= DUST_BTC {
            return if dir > 0.0 { 1.0 / self.scale } else { DUST_BTC };
        }
        self.snap(v + dir / self.scale)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Score {
    violations: usize,
    objective: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        (self.violations, self.objective)
            .partial_cmp(&(other.violations, other.objective))
            .is_some_and(|o| o.is_lt())
    }
}

struct Search<'a> {
    scenario: &'a Scenario,
    objective: GvcObjective,
    config: OptimizerConfig,
    grid: Grid,
    top: usize,
}

impl Search<'_> {
    fn evaluate(&self, per_state: &[f64]) -> Result<(Score, StrategyOutcome), StrategyError> {
        let schedule = BribeSchedule::new(per_state.to_vec(), self.objective.tag())?;
        let nm = gvc_new_markov(self.scenario, &schedule)?;
        let zeta = gvc_zeta(self.scenario, &schedule, &nm, self.config.gvc)?;
        let violations = target_violations(self.scenario, &schedule, &zeta)?.len();
        let outcome =
            StrategyOutcome::assemble(self.scenario, schedule, zeta, DecisionRule::Committed)?;
        let score = Score {
            violations,
            objective: self.objective.value(&outcome),
        };
        Ok((score, outcome))
    }

    /// Target's minima when it alone joins the attacker on every bribed state.
    fn seed(&self) -> Result<Vec<f64>, StrategyError> {
        let s = self.scenario;
        let h = s.horizon();
        let mut zeta = MembershipMatrix::empty(s.miner_set().len(), h);
        for j in 0..=self.top {
            zeta.set(s.target_index(), j, true);
        }
        let beliefs = target_beliefs(s, &zeta)?;
        let mut out = vec![0.0; h];
        for (j, v) in out.iter_mut().enumerate().take(self.top + 1) {
            *v = match beliefs
                .quote(j, s.target_power(), s.reward())?
                .threshold
                .finite()
            {
                Some(t) => self.grid.above(t),
                None => DUST_BTC,
            };
        }
        Ok(out)
    }

    fn candidates(&self, current: &[f64], zeta: &MembershipMatrix, j: usize) -> Vec<f64> {
        let s = self.scenario;
        let mut c = vec![
            DUST_BTC,
            self.grid.step(current[j], 1.0),
            self.grid.step(current[j], -1.0),
        ];
        for &p in &s.miner_set().powers() {
            if let Ok(q) = min_bribe_basic(j, p, s.mu(), s.lambda(), s.reward()) {
                if let Some(t) = q.threshold.finite() {
                    c.push(self.grid.above(t));
                }
            }
        }
        if let Ok(b) = target_beliefs(s, zeta) {
            if let Ok(q) = b.quote(j, s.target_power(), s.reward()) {
                if let Some(t) = q.threshold.finite() {
                    c.push(self.grid.above(t));
                }
            }
        }
        c.sort_by(f64::total_cmp);
        c.dedup();
        c.retain(|v| *v != current[j]);
        c
    }

    fn descend(&self, start: Vec<f64>) -> Result<(Score, StrategyOutcome), StrategyError> {
        let mut current = start;
        let (mut best, mut outcome) = self.evaluate(&current)?;
        for _ in 0..self.config.max_sweeps {
            let mut moved = false;
            for j in 0..=self.top {
                for v in self.candidates(&current, &outcome.membership, j) {
                    let mut trial = current.clone();
                    trial[j] = v;
                    let (score, out) = self.evaluate(&trial)?;
                    if score.better_than(&best) {
                        best = score;
                        outcome = out;
                        current = trial;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        Ok((best, outcome))
    }
}

/// Coordinate descent over a bribe grid from several starts, minimising the
/// objective among schedules that keep the target on the fork at every state
/// up to the start state. Deterministic for a given config.
pub fn optimize_gvc(
    scenario: &Scenario,
    objective: GvcObjective,
    config: OptimizerConfig,
) -> Result<StrategyOutcome, StrategyError> {
    if !(config.quantum > 0.0 && config.quantum.is_finite()) || config.restarts == 0 {
        return Err(StrategyError::Infeasible(
            "optimizer needs a positive quantum and at least one restart".into(),
        ));
    }
    let search = Search {
        scenario,
        objective,
        config,
        grid: Grid::new(config.quantum),
        top: scenario.last_bribed_state(),
    };
    let seed = search.seed()?;
    let results: Vec<(Score, StrategyOutcome)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                seed.clone()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ r as u64);
                seed.iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        if j > search.top {
                            0.0
                        } else {
                            search.grid.snap(v.max(1.0) * rng.random_range(0.0..2.0))
                        }
                    })
                    .collect()
            };
            search.descend(start)
        })
        .collect::<Result<_, _>>()?;

    let (score, outcome) = results
        .into_iter()
        .reduce(|a, b| {
            let pick_b = b.0.better_than(&a.0)
                || (!a.0.better_than(&b.0)
                    && b.1.schedule.per_state.iter().zip(&a.1.schedule.per_state)
                        .map(|(x, y)| x.total_cmp(y))
                        .find(|o| o.is_ne())
                        .is_some_and(|o| o.is_lt()));
            if pick_b {
                b
            } else {
                a
            }
        })
        .expect("at least one restart");
    if score.violations > 0 {
        return Err(StrategyError::Infeasible(format!(
            "best schedule still loses the target at {} state(s)",
            score.violations
        )));
    }
    Ok(outcome)
}
