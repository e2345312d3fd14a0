use anyhow::Result;

use savcd_core::augment::{add_diffusion_noise, apply};
use savcd_core::AugmentationKind;

use super::{load_image, save_image};
use crate::cli::AugmentArgs;
use crate::error::CliError;

pub fn run(args: AugmentArgs) -> Result<()> {
    let image = load_image(&args.image)?;
    let out = match args.augmentation {
        AugmentationKind::Noise => add_diffusion_noise(&image, args.step, args.seed)
            .map_err(|e| CliError::Config(e.to_string()))?,
        kind => apply(kind, &image, args.seed),
    };
    save_image(&out, &args.out)?;
    Ok(())
}
