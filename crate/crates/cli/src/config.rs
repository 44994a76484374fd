//! TOML experiment files. Top-level keys are global; one table per command.
//!
//! ```toml
//! seed = 7
//! format = "csv"
//!
//! [channel]
//! alpha = 0.1
//! beta = 0.1
//!
//! [queueing]
//! model = "model3"
//! k = "50,100,200"
//! lambda_t = [0.1, 0.3]
//! ```

use crate::args::{ArrivalKind, AttemptKind, ChannelArgs, Format, GroupsExport, ModeKind, QModel};
use crate::error::CliError;
use crate::sweep::Sweep;
use gemac_core::ChannelModel;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub capacity: CapacitySection,
    #[serde(default)]
    pub threshold: ThresholdSection,
    #[serde(default)]
    pub groups: GroupsSection,
    #[serde(default)]
    pub queueing: QueueingSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub validate: ValidateSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub mu_g: Option<f64>,
    pub sigma_g: Option<f64>,
    pub mu_b: Option<f64>,
    pub sigma_b: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    pub k: Option<Sweep>,
    pub simulate: Option<bool>,
    pub slots: Option<u64>,
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    pub k: Option<Sweep>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsSection {
    pub k: Option<Sweep>,
    pub phi: Option<usize>,
    pub delta: Option<usize>,
    pub export: Option<GroupsExport>,
    pub simulate: Option<bool>,
    pub slots: Option<u64>,
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueingSection {
    pub model: Option<QModel>,
    pub k: Option<Sweep>,
    pub lambda_t: Option<Sweep>,
    pub rate_g: Option<f64>,
    pub rate_b: Option<f64>,
    pub tol: Option<f64>,
    pub simulate: Option<bool>,
    pub horizon: Option<u64>,
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub k: Option<usize>,
    pub attempt: Option<AttemptKind>,
    pub p: Option<f64>,
    pub arrivals: Option<ArrivalKind>,
    pub lambda_t: Option<f64>,
    pub mode: Option<ModeKind>,
    pub horizon: Option<u64>,
    pub warmup: Option<u64>,
    pub replications: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    pub only: Option<Vec<u8>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Flag value, else file value, else the reference parameters.
pub fn resolve_channel(flags: &ChannelArgs, file: &ChannelSection) -> Result<ChannelModel, CliError> {
    let r = ChannelModel::reference();
    let model = ChannelModel::new(
        flags.alpha.or(file.alpha).unwrap_or(r.alpha),
        flags.beta.or(file.beta).unwrap_or(r.beta),
        flags.mu_g.or(file.mu_g).unwrap_or(r.mu_g),
        flags.sigma_g.or(file.sigma_g).unwrap_or(r.sigma_g),
        flags.mu_b.or(file.mu_b).unwrap_or(r.mu_b),
        flags.sigma_b.or(file.sigma_b).unwrap_or(r.sigma_b),
    )?;
    if model.good_mean_below_bad() {
        eprintln!(
            "warning: mu_g = {} is below mu_b = {}; the asymptotic formulas rely on the heavier good-state tail",
            model.mu_g, model.mu_b
        );
    }
    Ok(model)
}
