use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bribery",
    version,
    about = "Cost and success of bribing miners to back a double-spend fork"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one strategy on one scenario.
    Analyze(AnalyzeArgs),
    /// Evaluate strategies across start states.
    SweepStart(SweepStartArgs),
    /// Evaluate strategies across block rewards.
    SweepReward(SweepRewardArgs),
    /// Check a strategy's analytic results against Monte Carlo replay.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum StrategyArg {
    Bs,
    Bff,
    Crb1,
    Crb2,
    Gvc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Ac,
    Rac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpretationArg {
    Literal,
    Consistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZetaScopeArg {
    Target,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RetentionArg {
    NewestLeaves,
    AllStay,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Pool file: one `id power [attacker]` record per line.
    #[arg(long)]
    pub pools: PathBuf,
    /// Attacker id; overrides the flag in the pool file.
    #[arg(long)]
    pub attacker: Option<String>,
    /// Miner the attacker must persuade; defaults to the largest one.
    #[arg(long)]
    pub target: Option<String>,
    /// Confirmations the merchant waits for (C).
    #[arg(long, default_value_t = 6)]
    pub confirmations: usize,
    /// Blocks the attacker mined in secret before the race (l).
    #[arg(long, default_value_t = 1)]
    pub premined: usize,
    /// Block reward in BTC (F).
    #[arg(long, default_value_t = 6.25)]
    pub reward: f64,
    /// Starting gap; defaults to C - l + 1.
    #[arg(long)]
    pub start_state: Option<usize>,
    /// Number of gap states before the fork is abandoned; defaults to C + 1.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GvcArgs {
    /// Cost the GVC optimizer minimises.
    #[arg(long, value_enum)]
    pub objective: Option<ObjectiveArg>,
    /// Evaluate this committed GVC schedule (BTC per state, state 0 first)
    /// instead of optimizing.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<f64>>,
    /// Optimizer restarts.
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    /// Seed for optimizer restarts and simulation.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Absorption columns used when a single miner re-checks the offer.
    #[arg(long, value_enum, default_value_t = InterpretationArg::Literal)]
    pub interpretation: InterpretationArg,
    /// Miners that re-check the offer against their own joining.
    #[arg(long, value_enum, default_value_t = ZetaScopeArg::Target)]
    pub zeta_scope: ZetaScopeArg,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[command(flatten)]
    pub gvc: GvcArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepStartArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub strategy: Vec<StrategyArg>,
    /// Start states to evaluate.
    #[arg(long, value_delimiter = ',', required = true)]
    pub states: Vec<usize>,
    #[command(flatten)]
    pub gvc: GvcArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepRewardArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    pub strategy: Vec<StrategyArg>,
    /// Block rewards to evaluate, in BTC.
    #[arg(long, value_delimiter = ',', required = true)]
    pub rewards: Vec<f64>,
    #[command(flatten)]
    pub gvc: GvcArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[command(flatten)]
    pub gvc: GvcArgs,
    /// Simulated races.
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Blocks after which a race is discarded.
    #[arg(long, default_value_t = 100_000)]
    pub max_events: u64,
    /// Standard errors allowed per metric.
    #[arg(long, default_value_t = 3.0)]
    pub z: f64,
    /// Which courted miners stay when the fork falls behind (BFF).
    #[arg(long, value_enum, default_value_t = RetentionArg::NewestLeaves)]
    pub retention: RetentionArg,
    /// Compare against a schedule with every bribe doubled.
    #[arg(long, hide = true)]
    pub debug_corrupt_schedule: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}
