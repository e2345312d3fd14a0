//! The six seeded visual augmentations used to build the amateur view.
//!
//! Random crop and random mask operate on a `ceil(h/2) x ceil(w/2)` patch
//! whose top-left corner is drawn uniformly from the positions that keep
//! the patch inside the image. All variants preserve image dimensions.

use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use image::imageops::{self, FilterType};
use image::{ImageFormat, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::AugmentError;

/// Diffusion step used by the noise augmentation.
pub const DEFAULT_NOISE_STEP: u32 = 500;
/// Length of the linear beta schedule.
pub const DIFFUSION_STEPS: u32 = 1000;
pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.02;

/// An 8-bit RGB image stored row-major, three bytes per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RasterImage")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self, AugmentError> {
        if height < 2 || width < 2 {
            return Err(AugmentError::TooSmall { height, width });
        }
        let expected = height * width * 3;
        if pixels.len() != expected {
            return Err(AugmentError::BufferSize {
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Result<Self, AugmentError> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(height * width * 3)
            .collect();
        Self::new(height, width, pixels)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, AugmentError> {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(y, x));
            }
        }
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn set_pixel(&mut self, y: usize, x: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// SHA-256 over the dimensions and pixel bytes, hex encoded.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.height as u64).to_le_bytes());
        hasher.update((self.width as u64).to_le_bytes());
        hasher.update(&self.pixels);
        hex::encode(hasher.finalize())
    }

    fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length checked at construction")
    }

    fn from_rgb_image(img: RgbImage) -> Result<Self, AugmentError> {
        let (w, h) = img.dimensions();
        Self::new(h as usize, w as usize, img.into_raw())
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, AugmentError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| AugmentError::Png(e.to_string()))?;
        Self::from_rgb_image(img.to_rgb8())
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, AugmentError> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| AugmentError::Png(e.to_string()))?;
        Ok(out.into_inner())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationKind {
    RandomCrop,
    RandomMask,
    Noise,
    ColorInversion,
    HorizontalFlip,
    VerticalFlip,
}

impl AugmentationKind {
    pub const ALL: [AugmentationKind; 6] = [
        AugmentationKind::RandomCrop,
        AugmentationKind::RandomMask,
        AugmentationKind::Noise,
        AugmentationKind::ColorInversion,
        AugmentationKind::HorizontalFlip,
        AugmentationKind::VerticalFlip,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AugmentationKind::RandomCrop => "random_crop",
            AugmentationKind::RandomMask => "random_mask",
            AugmentationKind::Noise => "noise",
            AugmentationKind::ColorInversion => "color_inversion",
            AugmentationKind::HorizontalFlip => "horizontal_flip",
            AugmentationKind::VerticalFlip => "vertical_flip",
        }
    }

    /// Whether the output depends on the seed.
    pub fn is_random(self) -> bool {
        matches!(
            self,
            AugmentationKind::RandomCrop | AugmentationKind::RandomMask | AugmentationKind::Noise
        )
    }
}

impl fmt::Display for AugmentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugmentationKind {
    type Err = AugmentError;

    /// Accepts the canonical names in snake, kebab or space form plus the
    /// short CLI aliases (`crop`, `mask`, `invert`, `hflip`, `vflip`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let kind = match key.as_str() {
            "random_crop" | "crop" => AugmentationKind::RandomCrop,
            "random_mask" | "mask" => AugmentationKind::RandomMask,
            "noise" | "diffusion_noise" => AugmentationKind::Noise,
            "color_inversion" | "invert" | "inversion" => AugmentationKind::ColorInversion,
            "horizontal_flip" | "hflip" => AugmentationKind::HorizontalFlip,
            "vertical_flip" | "vflip" => AugmentationKind::VerticalFlip,
            _ => return Err(AugmentError::UnknownKind(s.to_string())),
        };
        Ok(kind)
    }
}

/// Patch geometry shared by crop and mask: `(top, left, height, width)`.
fn random_patch(v: &RasterImage, rng: &mut ChaCha8Rng) -> (usize, usize, usize, usize) {
    let ph = v.height.div_ceil(2);
    let pw = v.width.div_ceil(2);
    let top = rng.random_range(0..=v.height - ph);
    let left = rng.random_range(0..=v.width - pw);
    (top, left, ph, pw)
}

/// Applies augmentation `kind` to `v`. Deterministic in `(kind, v, seed)`.
pub fn apply(kind: AugmentationKind, v: &RasterImage, seed: u64) -> RasterImage {
    match kind {
        AugmentationKind::RandomCrop => random_crop(v, seed),
        AugmentationKind::RandomMask => random_mask(v, seed),
        AugmentationKind::Noise => {
            add_diffusion_noise(v, DEFAULT_NOISE_STEP, seed).expect("default step is in range")
        }
        AugmentationKind::ColorInversion => color_inversion(v),
        AugmentationKind::HorizontalFlip => horizontal_flip(v),
        AugmentationKind::VerticalFlip => vertical_flip(v),
    }
}

/// Keeps a random half-size patch and rescales it bilinearly to `h x w`.
pub fn random_crop(v: &RasterImage, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (top, left, ph, pw) = random_patch(v, &mut rng);
    let src = v.to_rgb_image();
    let patch = imageops::crop_imm(&src, left as u32, top as u32, pw as u32, ph as u32).to_image();
    let resized = imageops::resize(
        &patch,
        v.width as u32,
        v.height as u32,
        FilterType::Triangle,
    );
    RasterImage::from_rgb_image(resized).expect("resize preserves requested dimensions")
}

/// Zeroes a random half-size patch.
pub fn random_mask(v: &RasterImage, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (top, left, ph, pw) = random_patch(v, &mut rng);
    let mut out = v.clone();
    for y in top..top + ph {
        let start = (y * v.width + left) * 3;
        out.pixels[start..start + pw * 3].fill(0);
    }
    out
}

pub fn color_inversion(v: &RasterImage) -> RasterImage {
    let mut out = v.clone();
    for c in &mut out.pixels {
        *c = 255 - *c;
    }
    out
}

pub fn horizontal_flip(v: &RasterImage) -> RasterImage {
    let mut out = v.clone();
    for y in 0..v.height {
        for x in 0..v.width {
            out.set_pixel(y, x, v.pixel(y, v.width - 1 - x));
        }
    }
    out
}

pub fn vertical_flip(v: &RasterImage) -> RasterImage {
    let row = v.width * 3;
    let pixels = v
        .pixels
        .chunks_exact(row)
        .rev()
        .flatten()
        .copied()
        .collect();
    RasterImage {
        height: v.height,
        width: v.width,
        pixels,
    }
}

/// Cumulative product of `1 - beta_s` for `s = 1..=step` under the linear
/// schedule from [`BETA_START`] to [`BETA_END`] over [`DIFFUSION_STEPS`].
pub fn alpha_bar(step: u32) -> Result<f64, AugmentError> {
    if !(1..=DIFFUSION_STEPS).contains(&step) {
        return Err(AugmentError::InvalidStep(step));
    }
    let n = f64::from(DIFFUSION_STEPS - 1);
    Ok((0..step)
        .map(|s| {
            let beta = BETA_START + (BETA_END - BETA_START) * f64::from(s) / n;
            1.0 - beta
        })
        .product())
}

/// Forward diffusion `x_t = sqrt(abar) x_0 + sqrt(1 - abar) eps` in `[-1, 1]`
/// pixel space, clamped and mapped back to bytes.
pub fn add_diffusion_noise(
    v: &RasterImage,
    step: u32,
    seed: u64,
) -> Result<RasterImage, AugmentError> {
    let abar = alpha_bar(step)?;
    let signal = abar.sqrt();
    let noise = (1.0 - abar).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = v
        .pixels
        .iter()
        .map(|&c| {
            let x0 = f64::from(c) / 127.5 - 1.0;
            let eps: f64 = rng.sample(StandardNormal);
            let xt = (signal * x0 + noise * eps).clamp(-1.0, 1.0);
            ((xt + 1.0) * 127.5).round() as u8
        })
        .collect();
    Ok(RasterImage {
        height: v.height,
        width: v.width,
        pixels,
    })
}

/// Deterministic 64x64 test card: colour gradients with a bright square.
pub fn demo_image() -> RasterImage {
    RasterImage::from_fn(64, 64, |y, x| {
        if (20..36).contains(&y) && (8..24).contains(&x) {
            [240, 200, 40]
        } else {
            [(x * 4) as u8, (y * 4) as u8, ((x + y) * 2) as u8]
        }
    })
    .expect("static dimensions")
}
