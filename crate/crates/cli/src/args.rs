//! Command-line arguments. Every option here can also come from the config file.

use crate::sweep::Sweep;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Parser, Debug, Clone)]
#[command(name = "gemac", version, about = "Capacity scaling, threshold scheduling and queueing for Gilbert-Elliott multiuser channels")]
pub struct Cli {
    /// TOML config file; flags take precedence over its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Centralized, good-only and distributed capacities per K.
    Capacity(CapacityArgs),
    /// Scheduling thresholds per K under each construction.
    Threshold(ThresholdArgs),
    /// Group-size chain: by-state expectation and its lower bounds.
    Groups(GroupsArgs),
    /// Analytic queueing metrics, optionally against simulation.
    Queueing(QueueingArgs),
    /// One run of the slotted simulator.
    Simulate(SimulateArgs),
    /// Run the acceptance checks and print a report.
    Validate(ValidateArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ChannelArgs {
    /// Good-to-Bad transition probability.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bad-to-Good transition probability.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_g: Option<f64>,
    #[arg(long)]
    pub sigma_g: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_b: Option<f64>,
    #[arg(long)]
    pub sigma_b: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Population sizes, e.g. `10,100,1000` or `10:100:10`.
    #[arg(long)]
    pub k: Option<Sweep>,
    /// Add simulated maximum-capacity columns.
    #[arg(long)]
    pub simulate: bool,
    /// Slots per replication when simulating.
    #[arg(long)]
    pub slots: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long)]
    pub k: Option<Sweep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GroupsExport {
    #[default]
    Summary,
    Stationary,
    Matrix,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GroupsArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long)]
    pub k: Option<Sweep>,
    /// Group size above which a group maximum uses the Gumbel law.
    #[arg(long)]
    pub phi: Option<usize>,
    /// Number of states below K/2 kept in the delta bound.
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(long, value_enum)]
    pub export: Option<GroupsExport>,
    #[arg(long)]
    pub simulate: bool,
    #[arg(long)]
    pub slots: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QModel {
    Model1,
    Model2,
    Model3,
}

#[derive(Args, Debug, Clone, Default)]
pub struct QueueingArgs {
    /// Only alpha and beta are used, as the state switching rates of model3.
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, value_enum)]
    pub model: Option<QModel>,
    #[arg(long)]
    pub k: Option<Sweep>,
    /// Total arrival rate, split equally over the K users.
    #[arg(long)]
    pub lambda_t: Option<Sweep>,
    /// Total Good-state service rate (model3).
    #[arg(long)]
    pub rate_g: Option<f64>,
    /// Total Bad-state service rate (model3).
    #[arg(long)]
    pub rate_b: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub simulate: bool,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttemptKind {
    /// Transmit above the exact 1/K threshold.
    Exact,
    /// Transmit above the asymptotic threshold b_K.
    Asymptotic,
    /// Transmit with probability `p`.
    Probability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalKind {
    Bernoulli,
    Poisson,
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Chain,
    Mixture,
    Gaussian,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub attempt: Option<AttemptKind>,
    /// Attempt probability; defaults to 1/K.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum)]
    pub arrivals: Option<ArrivalKind>,
    #[arg(long)]
    pub lambda_t: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeKind>,
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Slots discarded before measuring; defaults to a fifth of the horizon.
    #[arg(long)]
    pub warmup: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ValidateArgs {
    /// Criterion numbers to run, e.g. `1,3,5`.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<u8>>,
}
