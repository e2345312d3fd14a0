//! Bundled demo assets. The files under `assets/demo` are exactly what
//! [`export`] writes.

use std::fs;
use std::path::Path;

use anyhow::Result;

use savcd_core::augment::demo_image;
use savcd_core::suite::{demo_script, hallucination_injection_suite, DEMO_QUERY};

use crate::commands::write_file;
use crate::error::CliError;

/// JSON Schema for one trace line.
pub const TRACE_SCHEMA: &str = include_str!("../assets/demo/trace.schema.json");

pub fn script_json() -> String {
    demo_script().to_json_pretty() + "\n"
}

pub fn suite_json() -> String {
    hallucination_injection_suite().to_json_pretty() + "\n"
}

pub fn config_toml() -> String {
    format!(
        "script = \"script.json\"\nimage = \"image.png\"\nquery = \"{DEMO_QUERY}\"\nthreshold-mode = \"sat\"\nsampling = \"multinomial\"\nseed = 7\n"
    )
}

pub fn grid_toml() -> &'static str {
    "modes = [\"none\", \"apc\", \"sat\", \"hns\"]\ngammas = [-0.1, -0.5, -1.0]\nbetas = [0.0, 0.1]\nalpha = 1.0\n"
}

/// Every asset as `(file name, contents)`.
pub fn files() -> Vec<(&'static str, Vec<u8>)> {
    vec![
        ("script.json", script_json().into_bytes()),
        ("suite.json", suite_json().into_bytes()),
        ("config.toml", config_toml().into_bytes()),
        ("grid.toml", grid_toml().as_bytes().to_vec()),
        (
            "image.png",
            demo_image().to_png_bytes().expect("test card encodes"),
        ),
        ("trace.schema.json", TRACE_SCHEMA.as_bytes().to_vec()),
    ]
}

pub fn export(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, bytes) in files() {
        write_file(&dir.join(name), &bytes)?;
    }
    Ok(())
}
