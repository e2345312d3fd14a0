use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::Result;

use savcd_core::augment::apply;
use savcd_core::engine::{decode, DecodeResult};
use savcd_core::sas::select_augmentation;
use savcd_core::trace::{write_jsonl, RunSummary};
use savcd_core::{Backend, RasterImage, SyntheticBackend, SyntheticScript};
use savcd_http::HttpBackend;

use super::{load_image_or_demo, read_config_file};
use crate::cli::DecodeArgs;
use crate::config::{RunConfig, RunOptions, Selection, Source};
use crate::error::CliError;

/// Defaults, then `--config`, then flags.
pub fn resolve(args: &DecodeArgs) -> Result<RunConfig, CliError> {
    let base = match &args.config {
        Some(path) => RunOptions::load(path)?,
        None => RunOptions::default(),
    };
    RunConfig::resolve(base.overlay(args.options.clone()))
}

pub fn run(args: DecodeArgs) -> Result<()> {
    let config = resolve(&args)?;
    if args.dump_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let (summary, names) = execute(&config)?;
    if let Some(names) = names {
        let words: Vec<&str> = summary
            .tokens
            .iter()
            .map(|&t| names.get(t).map_or("?", String::as_str))
            .collect();
        eprintln!("{}", words.join(" "));
    }
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

/// Runs selection, augmentation and decoding for a resolved config and
/// writes the trace. Returns the summary and the script's token names, if any.
pub fn execute(config: &RunConfig) -> Result<(RunSummary, Option<Vec<String>>), CliError> {
    let source = config
        .source
        .as_ref()
        .ok_or_else(|| CliError::Config("one of --backend or --script is required".into()))?;
    let image = load_image_or_demo(config.image.as_deref())?;
    match source {
        Source::Script(path) => {
            let script = SyntheticScript::from_json(&read_config_file(path)?)?;
            let prompt = config
                .prompt_tokens
                .clone()
                .unwrap_or_else(|| script.prompt_tokens.clone());
            let names = Some(script.token_names.clone()).filter(|n| !n.is_empty());
            let backend = SyntheticBackend::new(script)?.with_clean_image(&image);
            let summary = run_with(&backend, config, &image, &prompt)?;
            Ok((summary, names))
        }
        Source::Http(url) => {
            let backend = HttpBackend::new(url.clone())?;
            let prompt = config.prompt_tokens.clone().unwrap_or_else(|| vec![0]);
            Ok((run_with(&backend, config, &image, &prompt)?, None))
        }
    }
}

fn run_with<B: Backend>(
    backend: &B,
    config: &RunConfig,
    image: &RasterImage,
    prompt: &[usize],
) -> Result<RunSummary, CliError> {
    let started = Instant::now();
    let (kind, sas_valid) = match config.selection {
        Selection::Fixed(kind) => (kind, None),
        Selection::Sas { template, fallback } => {
            let query = config.query.as_deref().unwrap_or_default();
            if query.is_empty() {
                return Err(CliError::Config(
                    "--query is required unless --no-sas or --augmentation is given".into(),
                ));
            }
            let outcome = select_augmentation(backend, query, template, fallback)?;
            (outcome.choice, Some(outcome.valid))
        }
    };
    let augmented = apply(kind, image, config.params.seed);
    let result = decode(backend, image, &augmented, prompt, &config.params)?;
    if let Some(path) = &config.trace {
        write_trace(path, &result)?;
    }
    let elapsed = started.elapsed().as_secs_f64() * 1000.0;
    Ok(RunSummary::from_result(&result, kind, sas_valid, elapsed))
}

fn write_trace(path: &Path, result: &DecodeResult) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io)?;
    write_jsonl(BufWriter::new(file), &result.traces).map_err(io)
}
