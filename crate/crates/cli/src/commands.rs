use std::fs;
use std::io::Write;

use bribery_core::model::{parse_pool_file, MinerSet};
use bribery_core::simulate::{policy_for, simulate_race, RetentionRule};
use bribery_core::strategies::{
    optimize_gvc, run_bff, run_bs, run_crb, run_gvc, BribeSchedule, CrbVariant, GvcObjective,
    GvcOptions, OptimizerConfig, StrategyOutcome, ZetaColumns, ZetaScope,
};
use bribery_core::{compare_reports, make_scenario, Scenario, SimConfig};
use rayon::prelude::*;

use crate::args::{
    AnalyzeArgs, Format, GvcArgs, InterpretationArg, ObjectiveArg, OutputArgs, RetentionArg,
    ScenarioArgs, StrategyArg, SweepRewardArgs, SweepStartArgs, ValidateArgs, ZetaScopeArg,
};
use crate::error::CliError;
use crate::report::{self, SweepRow};

pub fn load_scenario(a: &ScenarioArgs) -> Result<Scenario, CliError> {
    let raw = fs::read_to_string(&a.pools).map_err(|source| CliError::Io {
        path: a.pools.display().to_string(),
        source,
    })?;
    let set = MinerSet::from_entries(&parse_pool_file(&raw)?, a.attacker.as_deref())?;
    let target = match &a.target {
        Some(t) => t.clone(),
        None => set.miners()[0].id.clone(),
    };
    if let Some(start) = a.start_state {
        check_start(start, a.confirmations)?;
    }
    let mut s = make_scenario(set, &target, a.confirmations, a.premined, a.reward)?;
    if let Some(h) = a.horizon {
        s = s.with_horizon(h)?;
    }
    if let Some(start) = a.start_state {
        s = s.with_start_state(start)?;
    }
    Ok(s)
}

fn check_start(start: usize, confirmations: usize) -> Result<(), CliError> {
    if start > confirmations {
        return Err(CliError::Usage(format!(
            "start state {start} exceeds the confirmation depth {confirmations}"
        )));
    }
    Ok(())
}

fn check_objective(strategies: &[StrategyArg], gvc: &GvcArgs) -> Result<(), CliError> {
    let wants_gvc = strategies.contains(&StrategyArg::Gvc);
    match (wants_gvc, gvc.objective) {
        (true, None) => Err(CliError::Usage(
            "--objective ac|rac is required for the gvc strategy".into(),
        )),
        (false, Some(_)) => Err(CliError::Usage(
            "--objective only applies to the gvc strategy".into(),
        )),
        _ => Ok(()),
    }
}

fn gvc_options(g: &GvcArgs) -> GvcOptions {
    GvcOptions {
        columns: match g.interpretation {
            InterpretationArg::Literal => ZetaColumns::Literal,
            InterpretationArg::Consistent => ZetaColumns::Consistent,
        },
        scope: match g.zeta_scope {
            ZetaScopeArg::Target => ZetaScope::Target,
            ZetaScopeArg::All => ZetaScope::AllMiners,
        },
    }
}

pub fn run_strategy(
    s: &Scenario,
    strategy: StrategyArg,
    g: &GvcArgs,
) -> Result<StrategyOutcome, CliError> {
    Ok(match strategy {
        StrategyArg::Bs => run_bs(s)?,
        StrategyArg::Bff => run_bff(s)?,
        StrategyArg::Crb1 => run_crb(s, CrbVariant::Crb1)?,
        StrategyArg::Crb2 => run_crb(s, CrbVariant::Crb2)?,
        StrategyArg::Gvc => {
            let objective = match g.objective {
                Some(ObjectiveArg::Ac) => GvcObjective::Ac,
                Some(ObjectiveArg::Rac) => GvcObjective::Rac,
                None => {
                    return Err(CliError::Usage(
                        "--objective ac|rac is required for the gvc strategy".into(),
                    ))
                }
            };
            match &g.schedule {
                Some(values) => {
                    if values.len() != s.horizon() {
                        return Err(CliError::Usage(format!(
                            "--schedule has {} entries, the scenario has {} states",
                            values.len(),
                            s.horizon()
                        )));
                    }
                    let schedule = BribeSchedule::new(values.clone(), objective.tag())?;
                    run_gvc(s, schedule, gvc_options(g))?
                }
                None => optimize_gvc(
                    s,
                    objective,
                    OptimizerConfig {
                        restarts: g.restarts,
                        seed: g.seed,
                        gvc: gvc_options(g),
                        ..OptimizerConfig::default()
                    },
                )?,
            }
        }
    })
}

/// Writes the report to `--out` (summary to `out`) or to `out` (summary to `err`).
fn emit(
    output: &OutputArgs,
    report: &str,
    summary: &str,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let io = |path: &str| {
        let path = path.to_string();
        move |source| CliError::Io { path, source }
    };
    match &output.out {
        Some(path) => {
            fs::write(path, report).map_err(io(&path.display().to_string()))?;
            out.write_all(summary.as_bytes()).map_err(io("<stdout>"))?;
        }
        None => {
            out.write_all(report.as_bytes()).map_err(io("<stdout>"))?;
            err.write_all(summary.as_bytes()).map_err(io("<stderr>"))?;
        }
    }
    Ok(())
}

pub fn analyze(a: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    check_objective(&[a.strategy], &a.gvc)?;
    let s = load_scenario(&a.scenario)?;
    let o = run_strategy(&s, a.strategy, &a.gvc)?;
    let body = match a.output.format {
        Format::Csv => report::analyze_csv(&s, &o)?,
        Format::Json => report::analyze_json(&s, &o)?,
    };
    emit(&a.output, &body, &report::summary(&s, &o), out, err)
}

fn sweep(
    strategies: &[StrategyArg],
    keys: &[f64],
    g: &GvcArgs,
    point: impl Fn(f64) -> Result<Scenario, CliError> + Sync,
) -> Result<Vec<SweepRow>, CliError> {
    let mut strategies = strategies.to_vec();
    strategies.sort();
    strategies.dedup();
    let jobs: Vec<(StrategyArg, f64)> = strategies
        .iter()
        .flat_map(|&st| keys.iter().map(move |&k| (st, k)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(st, k)| {
            let s = point(k)?;
            Ok(SweepRow::new(k, &run_strategy(&s, st, g)?))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    rows.sort_by(|a, b| a.key.total_cmp(&b.key).then_with(|| a.strategy.cmp(&b.strategy)));
    Ok(rows)
}

pub fn sweep_start(
    a: &SweepStartArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    check_objective(&a.strategy, &a.gvc)?;
    if a.states.is_empty() {
        return Err(CliError::Usage("--states needs at least one state".into()));
    }
    for &st in &a.states {
        check_start(st, a.scenario.confirmations)?;
    }
    let base = load_scenario(&a.scenario)?;
    let keys: Vec<f64> = a.states.iter().map(|&s| s as f64).collect();
    let rows = sweep(&a.strategy, &keys, &a.gvc, |k| {
        Ok(base.clone().with_start_state(k as usize)?)
    })?;
    let body = match a.output.format {
        Format::Csv => report::sweep_csv("start_state", &rows, |k| format!("{k}"))?,
        Format::Json => report::sweep_json("sweep-start", "start_state", &base, &rows)?,
    };
    let summary = format!("{} rows over {} start states\n", rows.len(), a.states.len());
    emit(&a.output, &body, &summary, out, err)
}

pub fn sweep_reward(
    a: &SweepRewardArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    check_objective(&a.strategy, &a.gvc)?;
    if a.rewards.is_empty() {
        return Err(CliError::Usage("--rewards needs at least one value".into()));
    }
    if let Some(bad) = a.rewards.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(CliError::Usage(format!("block reward must be positive, got {bad}")));
    }
    let base = load_scenario(&a.scenario)?;
    let rows = sweep(&a.strategy, &a.rewards, &a.gvc, |f| {
        Ok(base.clone().with_reward(f)?)
    })?;
    let body = match a.output.format {
        Format::Csv => report::sweep_csv("reward", &rows, |k| format!("{k}"))?,
        Format::Json => report::sweep_json("sweep-reward", "reward", &base, &rows)?,
    };
    let summary = format!("{} rows over {} rewards\n", rows.len(), a.rewards.len());
    emit(&a.output, &body, &summary, out, err)
}

pub fn validate(a: &ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    check_objective(&[a.strategy], &a.gvc)?;
    if !(a.z > 0.0) {
        return Err(CliError::Usage(format!("--z must be positive, got {}", a.z)));
    }
    let s = load_scenario(&a.scenario)?;
    let o = run_strategy(&s, a.strategy, &a.gvc)?;
    let retention = match a.retention {
        RetentionArg::NewestLeaves => RetentionRule::NewestLeaves,
        RetentionArg::AllStay => RetentionRule::AllStay,
    };
    let policy = policy_for(&s, &o, retention);
    let config = SimConfig {
        trials: a.trials,
        seed: a.gvc.seed,
        max_events: a.max_events,
    };
    let sim = simulate_race(&s, policy.as_ref(), config)?;
    let analytic = if a.debug_corrupt_schedule {
        let mut corrupt = o.schedule.clone();
        corrupt.per_state.iter_mut().for_each(|b| *b *= 2.0);
        o.with_schedule(&s, corrupt)?
    } else {
        o
    };
    let cmp = compare_reports(&analytic, &sim, a.z)?;
    let body = match a.output.format {
        Format::Csv => report::validate_csv(&cmp)?,
        Format::Json => report::validate_json(&s, &analytic, &sim, &cmp)?,
    };
    emit(
        &a.output,
        &body,
        &report::validate_summary(&analytic, &sim, &cmp),
        out,
        err,
    )?;
    if cmp.passed() {
        Ok(())
    } else {
        Err(CliError::ValidationFailed {
            failed: cmp
                .failures()
                .map(|c| {
                    let delta = c.analytic.zip(c.empirical).map(|(a, e)| e - a);
                    format!("{} delta {:?} se {}", c.metric, delta, c.std_error)
                })
                .collect(),
            total: cmp.checks.len(),
        })
    }
}
