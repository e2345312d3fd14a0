use std::io::Write;

use anyhow::Result;

use savcd_core::ablation::{run_grid, write_csv, GridSpec};
use savcd_core::engine::ThresholdMode;
use savcd_core::suite::{hallucination_injection_suite, BenchmarkSuite};

use super::{read_config_file, write_file};
use crate::cli::AblateArgs;
use crate::error::CliError;

/// Grid from `--grid` overlaid with the list flags. Without either, every
/// mode at the default parameters.
pub fn grid_spec(args: &AblateArgs) -> Result<GridSpec, CliError> {
    let mut spec = match &args.grid {
        Some(path) => toml::from_str(&read_config_file(path)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
        None => GridSpec::new(vec![
            ThresholdMode::None,
            ThresholdMode::Apc,
            ThresholdMode::Sat,
            ThresholdMode::Hns,
        ]),
    };
    if let Some(modes) = &args.modes {
        spec.modes = modes.clone();
    }
    if let Some(gammas) = &args.gammas {
        spec.gammas = gammas.clone();
    }
    if let Some(betas) = &args.betas {
        spec.betas = betas.clone();
    }
    if let Some(alpha) = args.alpha {
        spec.alpha = alpha;
    }
    if spec.cells().is_empty() {
        return Err(CliError::Config("grid has no cells".into()));
    }
    Ok(spec)
}

pub fn run(args: AblateArgs) -> Result<()> {
    let suite = match &args.suite {
        Some(path) => {
            BenchmarkSuite::from_json(&read_config_file(path)?).map_err(CliError::from)?
        }
        None => hallucination_injection_suite(),
    };
    let spec = grid_spec(&args)?;
    let rows = run_grid(&suite, &spec).map_err(CliError::from)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &rows).map_err(|e| CliError::Io(e.to_string()))?;
    match &args.out {
        Some(path) => write_file(path, &csv)?,
        None => std::io::stdout()
            .write_all(&csv)
            .map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(())
}
