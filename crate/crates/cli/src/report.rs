//! Report formatting. Every CSV starts with a header row and every JSON
//! document carries `schema_version`.

use std::fmt::Write as _;

use bribery_core::rationality::DUST_BTC;
use bribery_core::simulate::{Comparison, SimReport};
use bribery_core::strategies::StrategyOutcome;
use bribery_core::Scenario;
use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// BTC to two decimals; one satoshi prints as `1e-8`.
pub fn btc(x: f64) -> String {
    if x == DUST_BTC {
        "1e-8".to_string()
    } else {
        format!("{x:.2}")
    }
}

/// Four significant figures.
pub fn prob(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (3 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn opt_btc(x: Option<f64>) -> String {
    x.map(btc).unwrap_or_default()
}

#[derive(Serialize)]
pub struct ScenarioRecord {
    attacker: String,
    attacker_power: f64,
    target: String,
    target_power: f64,
    confirmations: usize,
    premined: usize,
    reward: f64,
    start_state: usize,
    horizon: usize,
    roster: Vec<(String, f64)>,
}

impl ScenarioRecord {
    pub fn new(s: &Scenario) -> Self {
        let set = s.miner_set();
        Self {
            attacker: set.attacker_id().to_string(),
            attacker_power: set.attacker_power(),
            target: s.target_id().to_string(),
            target_power: s.target_power(),
            confirmations: s.confirmations(),
            premined: s.premined(),
            reward: s.reward(),
            start_state: s.start_state(),
            horizon: s.horizon(),
            roster: set.miners().iter().map(|m| (m.id.clone(), m.power)).collect(),
        }
    }
}

fn csv_string(rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io {
        path: "<report>".into(),
        source: e.into_error(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn json_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn analyze_csv(s: &Scenario, o: &StrategyOutcome) -> Result<String, CliError> {
    let mut rows = vec![vec!["record", "field", "state", "value"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()];
    let mut push = |record: &str, field: &str, state: Option<usize>, value: String| {
        rows.push(vec![
            record.to_string(),
            field.to_string(),
            state.map(|i| i.to_string()).unwrap_or_default(),
            value,
        ]);
    };
    push("meta", "schema_version", None, SCHEMA_VERSION.to_string());
    push("scenario", "attacker", None, s.miner_set().attacker_id().into());
    push("scenario", "target", None, s.target_id().into());
    push("scenario", "confirmations", None, s.confirmations().to_string());
    push("scenario", "premined", None, s.premined().to_string());
    push("scenario", "reward", None, btc(s.reward()));
    push("scenario", "start_state", None, s.start_state().to_string());
    push("scenario", "horizon", None, s.horizon().to_string());
    push("summary", "strategy", None, o.tag.to_string());
    push("summary", "success_prob", None, prob(o.success_prob));
    push("summary", "catchup_success", None, prob(o.catchup_success));
    push("summary", "expected_steps", None, prob(o.expected_steps));
    push("summary", "cost_unconditional", None, btc(o.cost_unconditional));
    push("summary", "cost_on_success", None, opt_btc(o.cost_on_success));
    push("summary", "attacker_recapture", None, btc(o.attacker_recapture));
    push("summary", "target_recapture", None, btc(o.target_recapture));
    push("summary", "single_visit_cost", None, btc(o.single_visit.cost));
    push(
        "summary",
        "single_visit_attacker_recapture",
        None,
        btc(o.single_visit.attacker_recapture),
    );
    push(
        "summary",
        "single_visit_target_recapture",
        None,
        btc(o.single_visit.target_recapture),
    );
    for (i, &b) in o.schedule.per_state.iter().enumerate() {
        push("schedule", "bribe", Some(i), btc(b));
    }
    for (i, m) in o.schedule.minima.iter().enumerate() {
        push("schedule", "minimum", Some(i), opt_btc(*m));
    }
    for (i, &v) in o.visits.iter().enumerate() {
        push("visits", "expected_visits", Some(i), prob(v));
    }
    for (i, &p) in o.final_chain.fork_power().iter().enumerate() {
        push("chain", "fork_power", Some(i), prob(p));
    }
    for (k, miner) in s.miner_set().miners().iter().enumerate() {
        for (i, &z) in o.membership.row(k).iter().enumerate() {
            push("membership", &miner.id, Some(i), u8::from(z).to_string());
        }
    }
    csv_string(&rows)
}

pub fn analyze_json(s: &Scenario, o: &StrategyOutcome) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Doc<'a> {
        schema_version: u32,
        command: &'static str,
        scenario: ScenarioRecord,
        outcome: &'a StrategyOutcome,
    }
    json_string(&Doc {
        schema_version: SCHEMA_VERSION,
        command: "analyze",
        scenario: ScenarioRecord::new(s),
        outcome: o,
    })
}

pub fn summary(s: &Scenario, o: &StrategyOutcome) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{} against {} ({} of {}), start state {}, F = {} BTC",
        o.tag,
        s.target_id(),
        prob(s.target_power()),
        s.miner_set().attacker_id(),
        o.start_state,
        btc(s.reward())
    );
    let _ = writeln!(
        t,
        "success {} (unbounded catch-up {}%), expected blocks {}",
        prob(o.success_prob),
        prob(o.catchup_success * 100.0),
        prob(o.expected_steps)
    );
    let _ = writeln!(
        t,
        "expected cost {} BTC, given success {} BTC",
        btc(o.cost_unconditional),
        o.cost_on_success.map_or("n/a".to_string(), btc)
    );
    let _ = writeln!(
        t,
        "recaptured: attacker {} BTC, target {} BTC",
        btc(o.attacker_recapture),
        btc(o.target_recapture)
    );
    let _ = writeln!(
        t,
        "single pass: cost {} BTC, attacker recaptures {} BTC, target {} BTC",
        btc(o.single_visit.cost),
        btc(o.single_visit.attacker_recapture),
        btc(o.single_visit.target_recapture)
    );
    let sched: Vec<String> = o.schedule.per_state.iter().map(|&b| btc(b)).collect();
    let _ = writeln!(t, "schedule (state 0 first): [{}]", sched.join(", "));
    t
}

/// One evaluated point of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub strategy: String,
    pub key: f64,
    pub success_prob: f64,
    pub expected_steps: f64,
    pub cost_unconditional: f64,
    pub cost_on_success: Option<f64>,
}

impl SweepRow {
    pub fn new(key: f64, o: &StrategyOutcome) -> Self {
        Self {
            strategy: o.tag.to_string(),
            key,
            success_prob: o.success_prob,
            expected_steps: o.expected_steps,
            cost_unconditional: o.cost_unconditional,
            cost_on_success: o.cost_on_success,
        }
    }
}

pub fn sweep_csv(key_name: &str, rows: &[SweepRow], key_fmt: fn(f64) -> String) -> Result<String, CliError> {
    let mut out = vec![[
        "strategy",
        key_name,
        "success_prob",
        "expected_steps",
        "cost_unconditional",
        "cost_on_success",
    ]
    .map(String::from)
    .to_vec()];
    for r in rows {
        out.push(vec![
            r.strategy.clone(),
            key_fmt(r.key),
            prob(r.success_prob),
            prob(r.expected_steps),
            btc(r.cost_unconditional),
            opt_btc(r.cost_on_success),
        ]);
    }
    csv_string(&out)
}

pub fn sweep_json(command: &'static str, key_name: &str, s: &Scenario, rows: &[SweepRow]) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Doc<'a> {
        schema_version: u32,
        command: &'static str,
        key: &'a str,
        scenario: ScenarioRecord,
        rows: &'a [SweepRow],
    }
    json_string(&Doc {
        schema_version: SCHEMA_VERSION,
        command,
        key: key_name,
        scenario: ScenarioRecord::new(s),
        rows,
    })
}

pub fn validate_csv(cmp: &Comparison) -> Result<String, CliError> {
    let mut rows = vec![[
        "metric",
        "analytic",
        "empirical",
        "std_error",
        "delta",
        "z",
        "passed",
    ]
    .map(String::from)
    .to_vec()];
    let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for c in &cmp.checks {
        let delta = c.analytic.zip(c.empirical).map(|(a, e)| e - a);
        rows.push(vec![
            c.metric.clone(),
            f(c.analytic),
            f(c.empirical),
            c.std_error.to_string(),
            f(delta),
            cmp.z.to_string(),
            c.passed.to_string(),
        ]);
    }
    csv_string(&rows)
}

pub fn validate_json(
    s: &Scenario,
    o: &StrategyOutcome,
    sim: &SimReport,
    cmp: &Comparison,
) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Doc<'a> {
        schema_version: u32,
        command: &'static str,
        strategy: String,
        scenario: ScenarioRecord,
        passed: bool,
        comparison: &'a Comparison,
        simulation: &'a SimReport,
    }
    json_string(&Doc {
        schema_version: SCHEMA_VERSION,
        command: "validate",
        strategy: o.tag.to_string(),
        scenario: ScenarioRecord::new(s),
        passed: cmp.passed(),
        comparison: cmp,
        simulation: sim,
    })
}

pub fn validate_summary(o: &StrategyOutcome, sim: &SimReport, cmp: &Comparison) -> String {
    let failed = cmp.failures().count();
    let mut t = format!(
        "{}: {} of {} metrics within {} standard errors ({} races, {} discarded)\n",
        o.tag,
        cmp.checks.len() - failed,
        cmp.checks.len(),
        cmp.z,
        sim.completed,
        sim.discarded
    );
    for c in cmp.failures() {
        let _ = writeln!(
            t,
            "  {}: analytic {:?}, simulated {:?} (se {})",
            c.metric, c.analytic, c.empirical, c.std_error
        );
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn btc_formatting() {
        assert_eq!(btc(1e-8), "1e-8");
        assert_eq!(btc(1495.587), "1495.59");
        assert_eq!(btc(0.0), "0.00");
        assert_eq!(btc(-2.148), "-2.15");
    }

    #[test]
    fn four_significant_figures() {
        assert_eq!(prob(0.57229), "0.5723");
        assert_eq!(prob(0.0026556), "0.002656");
        assert_eq!(prob(1.0), "1.000");
        assert_eq!(prob(12.3456), "12.35");
        assert_eq!(prob(0.0), "0");
    }
}
