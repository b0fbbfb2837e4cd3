use approx::assert_abs_diff_eq;
use bribery_core::markov::{residual_inf_norm, AbsorbingChain};
use bribery_core::rationality::min_bribe_basic;
use bribery_core::strategies::{
    run_bff, run_bs, run_gvc, BribeSchedule, GvcOptions, StrategyTag, ZetaColumns, ZetaScope,
};
use bribery_core::{make_scenario, Miner, MinerSet, Scenario};
use nalgebra::DMatrix;
use proptest::prelude::*;

const TABLE2: &str = include_str!("../../cli/fixtures/table2.pools");

fn table2(start: usize) -> Scenario {
    let set = bribery_core::load_pool_distribution(TABLE2).unwrap();
    make_scenario(set, "P2", 6, 1, 6.25)
        .unwrap()
        .with_start_state(start)
        .unwrap()
}

/// Attacker plus 2..8 miners with the largest one as target.
fn roster() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (0.05f64..0.35, prop::collection::vec(0.05f64..1.0, 2..8))
}

fn scenario_from(mu: f64, weights: &[f64], c: usize, start: usize) -> Scenario {
    let total: f64 = weights.iter().sum();
    let miners: Vec<Miner> = weights
        .iter()
        .enumerate()
        .map(|(k, w)| Miner {
            id: format!("M{k}"),
            power: w / total * (1.0 - mu),
        })
        .collect();
    let set = MinerSet::new("A", mu, miners).unwrap();
    let target = set.miners()[0].id.clone();
    make_scenario(set, &target, c, 1, 6.25)
        .unwrap()
        .with_start_state(start)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn absorption_rows_sum_to_one(p in prop::collection::vec(0.01f64..0.99, 1..12)) {
        let chain = AbsorbingChain::new(p).unwrap();
        let a = chain.analyze().unwrap();
        for i in 0..chain.horizon() {
            prop_assert!((a.b.row(i).sum() - 1.0).abs() < 1e-6);
            prop_assert!(a.success(i) >= 0.0 && a.failure(i) >= 0.0);
        }
        let cf = chain.canonical_form();
        let h = chain.horizon();
        let res = residual_inf_norm(&(DMatrix::identity(h, h) - &cf.q), &a.n);
        prop_assert!(res < 1e-8);
    }

    #[test]
    fn success_grows_with_fork_power(
        p in prop::collection::vec(0.01f64..0.9, 1..10),
        j in 0usize..10,
        bump in 0.001f64..0.09,
    ) {
        let j = j % p.len();
        let base = AbsorbingChain::new(p.clone()).unwrap().analyze().unwrap();
        let mut q = p;
        q[j] += bump;
        let up = AbsorbingChain::new(q).unwrap().analyze().unwrap();
        for i in 0..base.horizon() {
            prop_assert!(up.success(i) >= base.success(i) - 1e-12);
        }
    }

    #[test]
    fn bff_dominates_bs((mu, w) in roster(), start in 1usize..=6) {
        let s = scenario_from(mu, &w, 6, start);
        let bs = run_bs(&s).unwrap();
        let bff = run_bff(&s).unwrap();
        prop_assert!(bff.success_prob >= bs.success_prob - 1e-12);
    }

    #[test]
    fn commitment_recruits_weakly_more((mu, w) in roster(), start in 1usize..=6) {
        let s = scenario_from(mu, &w, 6, start);
        let bs = run_bs(&s).unwrap();
        let mut committed = bs.schedule.clone();
        committed.committed = true;
        committed.tag = StrategyTag::GvcAc;
        let gvc = run_gvc(&s, committed, GvcOptions::default()).unwrap();
        prop_assert!(gvc.success_prob >= bs.success_prob - 1e-12);
        prop_assert_eq!(gvc.schedule.total(), bs.schedule.total());
    }

    #[test]
    fn halving_law_on_thresholds((mu, w) in roster(), f in 0.5f64..50.0) {
        let s1 = scenario_from(mu, &w, 6, 6).with_reward(1.0).unwrap();
        let sf = s1.clone().with_reward(f).unwrap();
        for run in [run_bs, run_bff] {
            let a = run(&s1).unwrap();
            let b = run(&sf).unwrap();
            for (r1, rf) in a.schedule.minima.iter().zip(&b.schedule.minima) {
                let (r1, rf) = (r1.unwrap(), rf.unwrap());
                let expected = (r1 + 1.0) * f - f;
                prop_assert!((rf - expected).abs() <= 1e-9 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zeta_never_drops_a_miner_when_a_bribe_rises(
        base in prop::collection::vec(0.0f64..120.0, 7),
        j in 0usize..7,
        raise in 0.0f64..60.0,
    ) {
        let s = table2(4);
        let options = GvcOptions { columns: ZetaColumns::Consistent, scope: ZetaScope::Target };
        let mut up = base.clone();
        up[j] += raise;
        let a = run_gvc(&s, BribeSchedule::new(base, StrategyTag::GvcAc).unwrap(), options).unwrap();
        let b = run_gvc(&s, BribeSchedule::new(up, StrategyTag::GvcAc).unwrap(), options).unwrap();
        for k in 0..s.miner_set().len() {
            for st in 0..7 {
                prop_assert!(!a.membership.get(k, st) || b.membership.get(k, st));
            }
        }
    }

    #[test]
    fn gvc_membership_respects_power_order(base in prop::collection::vec(0.0f64..200.0, 7)) {
        let s = table2(4);
        let powers = s.miner_set().powers();
        for columns in [ZetaColumns::Literal, ZetaColumns::Consistent] {
            for scope in [ZetaScope::Target, ZetaScope::AllMiners] {
                let out = run_gvc(
                    &s,
                    BribeSchedule::new(base.clone(), StrategyTag::GvcAc).unwrap(),
                    GvcOptions { columns, scope },
                ).unwrap();
                prop_assert!(out.membership.is_power_monotone(&powers));
            }
        }
    }

    #[test]
    fn recapture_is_conserved((mu, w) in roster(), start in 1usize..=6) {
        let s = scenario_from(mu, &w, 6, start);
        let out = run_bff(&s).unwrap();
        let powers = s.miner_set().powers();
        let fork = out.membership.fork_power(&powers, mu);
        let spend: Vec<f64> = (0..7).map(|i| out.visits[i] * out.schedule.per_state[i]).collect();
        let r = bribery_core::strategies::recapture_split(
            &spend, mu, s.target_power(), &fork, out.membership.row(s.target_index()),
        );
        for (share, cost) in r.per_state.iter().zip(&spend) {
            prop_assert!((share.attacker + share.target + share.others - cost).abs() <= 1e-9 * cost.max(1.0));
            prop_assert!(share.others >= -1e-9 * cost.max(1.0));
        }
    }

    #[test]
    fn conditional_cost_is_finite_when_success_possible((mu, w) in roster(), start in 1usize..=6) {
        let s = scenario_from(mu, &w, 6, start);
        for out in [run_bs(&s).unwrap(), run_bff(&s).unwrap()] {
            prop_assert!(out.success_prob > 0.0);
            let c = out.cost_on_success.unwrap();
            prop_assert!(c.is_finite() && c >= 0.0);
        }
    }
}

#[test]
fn bigger_miners_need_smaller_bribes() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    for _ in 0..10_000 {
        let mu = rng.random_range(0.01..0.49);
        let lambda = 1.0 - mu;
        let i = rng.random_range(0..12);
        // above λ/2 both thresholds round to exactly -F
        let a = rng.random_range(1e-4..lambda / 2.0);
        let b = rng.random_range(1e-4..lambda / 2.0);
        if a == b {
            continue;
        }
        let (big, small) = if a > b { (a, b) } else { (b, a) };
        let t = |p| min_bribe_basic(i, p, mu, lambda, 6.25).unwrap().threshold.finite().unwrap();
        if t(big) >= t(small) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}

#[test]
fn bs_success_falls_with_start_state() {
    let mut prev = f64::INFINITY;
    for start in 1..=6 {
        let p = run_bs(&table2(start)).unwrap().success_prob;
        assert!(p < prev);
        prev = p;
    }
    assert_abs_diff_eq!(run_bs(&table2(6)).unwrap().schedule.per_state[0], 1e-8);
}
