use anyhow::{Context, Result};

use savcd_core::{SyntheticBackend, SyntheticScript};
use savcd_http::StubServer;

use super::{load_image_or_demo, read_config_file};
use crate::cli::ServeArgs;
use crate::error::CliError;

pub fn run(args: ServeArgs) -> Result<()> {
    let script =
        SyntheticScript::from_json(&read_config_file(&args.script)?).map_err(CliError::from)?;
    let image = load_image_or_demo(args.image.as_deref())?;
    let backend = SyntheticBackend::new(script)
        .map_err(CliError::from)?
        .with_clean_image(&image);
    let server = StubServer::spawn_on(args.addr, backend)
        .map_err(|e| CliError::Backend(e.to_string()))
        .with_context(|| format!("binding {}", args.addr))?;
    eprintln!("serving on {}", server.url());
    loop {
        std::thread::park();
    }
}
