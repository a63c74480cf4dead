use std::path::Path;

use image::GrayImage;
use mar_core::metrics::{window_image, HuWindow};
use mar_core::Image;

use crate::error::{CliError, CliResult};

/// 8-bit PNG of an HU image through `window`. For looking at only.
pub fn write_preview(path: &Path, img: &Image, window: &HuWindow) -> CliResult<()> {
    let w = window_image(img, window)?;
    let (h, width) = w.shape();
    let pixels: Vec<u8> = w
        .values()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    let png = GrayImage::from_raw(width as u32, h as u32, pixels)
        .ok_or_else(|| CliError::Internal("preview buffer size mismatch".into()))?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    png.save(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
