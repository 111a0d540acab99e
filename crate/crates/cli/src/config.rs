//! JSON run configuration. A config file supplies defaults; explicit
//! command-line flags win. Unknown keys are rejected.

use std::path::PathBuf;

use serde::Deserialize;

use crate::CommonArgs;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub family: Option<String>,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
    pub env_energy: Option<f64>,
    pub modes: Option<usize>,
    pub cutoff: Option<usize>,
    pub entropy: Option<f64>,
    pub grid: Option<String>,
    pub seeds: Option<u64>,
    pub instances: Option<usize>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub input: Option<String>,
    pub input_energy: Option<f64>,
}

/// Fill every flag the user did not pass from the config file.
pub fn merge(args: CommonArgs, file: FileConfig) -> CommonArgs {
    CommonArgs {
        family: args.family.or(file.family),
        lambda: args.lambda.or(file.lambda),
        kappa: args.kappa.or(file.kappa),
        env_energy: args.env_energy.or(file.env_energy),
        modes: args.modes.or(file.modes),
        cutoff: args.cutoff.or(file.cutoff),
        entropy: args.entropy.or(file.entropy),
        grid: args.grid.or(file.grid),
        seeds: args.seeds.or(file.seeds),
        instances: args.instances.or(file.instances),
        out: args.out.or(file.out),
        tol: args.tol.or(file.tol),
        input: args.input.or(file.input),
        input_energy: args.input_energy.or(file.input_energy),
        config: args.config,
        state_file: args.state_file,
    }
}
