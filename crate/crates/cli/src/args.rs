use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pmu", version, about = "Resilient PMU placement, VSI ranking and phased installation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum PMU placement for one observability scenario.
    Solve(SolveArgs),
    /// Reactive loadability sweep of every load bus, ranked by q_max.
    Vsi(VsiArgs),
    /// Budgeted multi-stage installation plan.
    Phasing(PhasingArgs),
    /// Weighted count/redundancy/VSI placement with critical-bus coverage.
    Multi(MultiArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Bundled alias (ieee14, ieee30, ieee118) or a MATPOWER case file.
    #[arg(long)]
    pub case: String,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the parsed network back out as normalized case text.
    #[arg(long)]
    pub dump_model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ScenarioArg {
    Base,
    Zib,
    PmuLoss,
    LineOutage,
}

impl ScenarioArg {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioArg::Base => "base",
            ScenarioArg::Zib => "zib",
            ScenarioArg::PmuLoss => "pmu_loss",
            ScenarioArg::LineOutage => "line_outage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Exact,
    Tlbo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConventionArg {
    /// Every in-service line may fail.
    AllLines,
    /// Lines whose loss splits the network are not enumerated.
    SkipIslanding,
}

#[derive(Debug, Args)]
pub struct TlboArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Write the convergence history as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ScenarioArg::Base)]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum, default_value_t = SolverArg::Exact)]
    pub solver: SolverArg,
    #[arg(long, value_enum, default_value_t = ConventionArg::AllLines)]
    pub outage_convention: ConventionArg,
    /// Among minimum placements, report one with the largest redundancy.
    #[arg(long)]
    pub max_redundancy: bool,
    /// Branch-and-bound node budget.
    #[arg(long)]
    pub node_budget: Option<u64>,
    #[command(flatten)]
    pub tlbo: TlboArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Linear,
    Galloping,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Extra reactive absorption per sweep step, per-unit.
    #[arg(long, default_value_t = 0.005)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = StrategyArg::Galloping)]
    pub strategy: StrategyArg,
}

#[derive(Debug, Args)]
pub struct VsiArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Number of buses marked critical; defaults to min(10, load buses).
    #[arg(long)]
    pub critical_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Greedy,
}

#[derive(Debug, Args)]
pub struct PhasingArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated PMUs per stage, e.g. 1,1,1,1.
    #[arg(long, value_delimiter = ',', required = true)]
    pub budgets: Vec<usize>,
    /// Count ZIB-inferred buses as observed.
    #[arg(long)]
    pub zib: bool,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    pub method: MethodArg,
}

#[derive(Debug, Args)]
pub struct MultiArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated weights for count, redundancy and VSI.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    pub critical_k: usize,
    /// Report the non-dominated placements seen during the run instead.
    #[arg(long)]
    pub pareto: bool,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub tlbo: TlboArgs,
}
