use std::fs;
use std::path::Path;

use anyhow::Result;

use savcd_core::augment::demo_image;
use savcd_core::RasterImage;

use crate::cli::{Cli, Command};
use crate::error::CliError;

pub mod ablate;
pub mod augment;
pub mod decode;
pub mod serve;

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Decode(args) => decode::run(args),
        Command::Ablate(args) => ablate::run(args),
        Command::Augment(args) => augment::run(args),
        Command::ServeStub(args) => serve::run(args),
        Command::ExportDemo(args) => crate::demo::export(&args.dir),
    }
}

pub fn load_image(path: &Path) -> Result<RasterImage, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    RasterImage::from_png_bytes(&bytes)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// The image at `path`, or the built-in test card.
pub fn load_image_or_demo(path: Option<&Path>) -> Result<RasterImage, CliError> {
    path.map_or_else(|| Ok(demo_image()), load_image)
}

pub fn save_image(image: &RasterImage, path: &Path) -> Result<(), CliError> {
    let bytes = image
        .to_png_bytes()
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_file(path, &bytes)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_config_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
