//! Constant-rate bribery: one committed amount at every bribed state.

use serde::{Deserialize, Serialize};

use super::{
    saturate, BribeSchedule, DecisionRule, MembershipMatrix, StrategyError, StrategyOutcome,
    StrategyTag,
};
use crate::markov::AbsorbingChain;
use crate::model::Scenario;
use crate::rationality::{crb_min_constant, MinerBeliefs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrbVariant {
    /// Bribe every state up to `C`; miners weigh visits from state `C`.
    Crb1,
    /// Bribe states up to the start state only; visits are weighed from there.
    Crb2,
}

impl CrbVariant {
    pub fn tag(self) -> StrategyTag {
        match self {
            CrbVariant::Crb1 => StrategyTag::Crb1,
            CrbVariant::Crb2 => StrategyTag::Crb2,
        }
    }

    /// Highest bribed state.
    fn top(self, scenario: &Scenario) -> usize {
        match self {
            CrbVariant::Crb1 => scenario.last_bribed_state(),
            CrbVariant::Crb2 => scenario.start_state().min(scenario.last_bribed_state()),
        }
    }

    /// Row of N used to weigh per-state minima.
    fn visits_row(self, scenario: &Scenario) -> usize {
        self.top(scenario)
    }
}

/// A miner's per-state minima (clamped at zero) and its visit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbMinima {
    pub minima: Vec<f64>,
    pub visits: Vec<f64>,
    /// Unclamped general-formula thresholds; `None` where no bribe persuades.
    pub raw: Vec<Option<f64>>,
}

impl CrbMinima {
    /// Smallest constant bribe accepted at `state`.
    pub fn constant_at(&self, state: usize) -> Result<f64, StrategyError> {
        Ok(crb_min_constant(&self.visits, &self.minima, state)?)
    }
}

/// Minima for roster miner `k` when it alone joins the attacker on states
/// `0..=top`.
pub fn crb_minima(
    scenario: &Scenario,
    miner: usize,
    variant: CrbVariant,
) -> Result<CrbMinima, StrategyError> {
    let h = scenario.horizon();
    let mu = scenario.mu();
    let pk = scenario.miner_set().powers()[miner];
    let top = variant.top(scenario);
    let with = AbsorbingChain::new(
        (0..h)
            .map(|i| if i <= top { saturate(mu + pk) } else { mu })
            .collect(),
    )?;
    let without = AbsorbingChain::uniform(h, mu)?;
    let beliefs = MinerBeliefs::from_chains(&with, &without)?;
    let mut minima = Vec::with_capacity(h);
    let mut raw = Vec::with_capacity(h);
    for i in 0..h {
        let t = beliefs.quote(i, pk, scenario.reward())?.threshold.finite();
        raw.push(t);
        minima.push(t.map_or(f64::INFINITY, |v| v.max(0.0)));
    }
    let visits = with.analyze()?.visits_from(variant.visits_row(scenario));
    Ok(CrbMinima {
        minima,
        visits,
        raw,
    })
}

/// Offers the smallest constant the target accepts.
pub fn run_crb(scenario: &Scenario, variant: CrbVariant) -> Result<StrategyOutcome, StrategyError> {
    let target = crb_minima(scenario, scenario.target_index(), variant)?;
    let k = target.constant_at(variant.top(scenario))?;
    run_with(scenario, variant, k, Some(target))
}

/// Offers an arbitrary constant `k` on every bribed state.
pub fn run_crb_with_constant(
    scenario: &Scenario,
    variant: CrbVariant,
    k: f64,
) -> Result<StrategyOutcome, StrategyError> {
    run_with(scenario, variant, k, None)
}

fn run_with(
    scenario: &Scenario,
    variant: CrbVariant,
    k: f64,
    target: Option<CrbMinima>,
) -> Result<StrategyOutcome, StrategyError> {
    let h = scenario.horizon();
    let top = variant.top(scenario);
    let roster = scenario.miner_set().len();
    let mut membership = MembershipMatrix::empty(roster, h);
    let mut target_raw = None;
    for miner in 0..roster {
        let m = match (&target, miner == scenario.target_index()) {
            (Some(t), true) => t.clone(),
            _ => crb_minima(scenario, miner, variant)?,
        };
        for s in 0..=top {
            membership.set(miner, s, k >= m.constant_at(s)?);
        }
        if miner == scenario.target_index() {
            target_raw = Some(m.raw);
        }
    }
    let per_state = (0..h).map(|i| if i <= top { k } else { 0.0 }).collect();
    let mut schedule = BribeSchedule::new(per_state, variant.tag())?;
    if let Some(raw) = target_raw {
        schedule.minima = raw
            .into_iter()
            .enumerate()
            .map(|(i, r)| if i <= top { r } else { None })
            .collect();
    }
    StrategyOutcome::assemble(scenario, schedule, membership, DecisionRule::Committed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_pool_distribution, make_scenario};
    use approx::assert_abs_diff_eq;

    fn whale() -> Scenario {
        let set = load_pool_distribution("A 0.2 attacker\nm 0.1\nY 0.7\n").unwrap();
        make_scenario(set, "m", 6, 1, 6.25).unwrap()
    }

    #[test]
    fn constant_is_visit_weighted_mean_of_minima() {
        let s = whale();
        let m = crb_minima(&s, 1, CrbVariant::Crb2).unwrap();
        let k = m.constant_at(6).unwrap();
        let num: f64 = (0..=6).map(|i| m.visits[i] * m.minima[i]).sum();
        let den: f64 = m.visits[..=6].iter().sum();
        assert_abs_diff_eq!(k, num / den, epsilon = 1e-12);
        assert!(m.minima.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn target_joins_on_every_bribed_state() {
        let s = whale().with_start_state(3).unwrap();
        for variant in [CrbVariant::Crb1, CrbVariant::Crb2] {
            let out = run_crb(&s, variant).unwrap();
            let top = variant.top(&s);
            assert!(out.schedule.committed);
            for i in 0..=top {
                assert!(out.membership.get(1, i), "{variant:?} state {i}");
                assert_eq!(out.schedule.per_state[i], out.schedule.per_state[0]);
            }
            for i in top + 1..7 {
                assert_eq!(out.schedule.per_state[i], 0.0);
            }
        }
    }

    #[test]
    fn crb1_schedule_ignores_start_state() {
        let a = run_crb(&whale().with_start_state(2).unwrap(), CrbVariant::Crb1).unwrap();
        let b = run_crb(&whale().with_start_state(5).unwrap(), CrbVariant::Crb1).unwrap();
        assert_eq!(a.schedule.per_state, b.schedule.per_state);
    }

    #[test]
    fn zero_constant_recruits_nobody_who_needs_paying() {
        let s = whale();
        let out = run_crb_with_constant(&s, CrbVariant::Crb2, 0.0).unwrap();
        assert_eq!(out.cost_unconditional, 0.0);
    }
}
