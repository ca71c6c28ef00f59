//! Edge-image cleanup: denoising then gap filling.
//!
//! Both passes read the input grid and write a fresh output grid, so a
//! decision for one pixel never observes another pixel's decision from the
//! same pass. Out-of-frame neighbors count as non-edge.

use crate::accumulator::EdgeImage;
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Thresholds for the two cleanup passes.
///
/// `n_d` is the minimum number of set 4-neighbors a set pixel needs to
/// survive denoising (0 disables). `n_f` is the minimum number of set
/// 4-neighbors an unset pixel needs to be filled (5 disables, since a pixel
/// has at most 4 direct neighbors).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterParams {
    pub n_d: u8,
    pub n_f: u8,
}

impl FilterParams {
    pub fn new(n_d: u8, n_f: u8) -> Result<FilterParams> {
        if n_d > 4 {
            return Err(Error::Parameter(format!(
                "denoising threshold must be in 0..=4, got {n_d}"
            )));
        }
        if !(1..=5).contains(&n_f) {
            return Err(Error::Parameter(format!(
                "filling threshold must be in 1..=5, got {n_f}"
            )));
        }
        Ok(FilterParams { n_d, n_f })
    }
}

impl Default for FilterParams {
    /// Low-resolution defaults.
    fn default() -> FilterParams {
        FilterParams { n_d: 1, n_f: 4 }
    }
}

#[inline]
fn set_neighbors(bits: &[bool], width: u32, height: u32, x: u32, y: u32) -> u8 {
    let mut n = 0u8;
    if x > 0 && bits[(y * width + x - 1) as usize] {
        n += 1;
    }
    if x + 1 < width && bits[(y * width + x + 1) as usize] {
        n += 1;
    }
    if y > 0 && bits[((y - 1) * width + x) as usize] {
        n += 1;
    }
    if y + 1 < height && bits[((y + 1) * width + x) as usize] {
        n += 1;
    }
    n
}

fn filter_pass(image: &EdgeImage, per_pixel: impl Fn(bool, u8) -> bool + Sync) -> EdgeImage {
    let width = image.geometry.width;
    let height = image.geometry.height;
    let mut out = image.clone();
    out.bits
        .par_chunks_mut(width as usize)
        .enumerate()
        .for_each(|(y, row)| {
            let y = y as u32;
            for x in 0..width {
                let set = image.bits[(y * width + x) as usize];
                row[x as usize] = per_pixel(set, set_neighbors(&image.bits, width, height, x, y));
            }
        });
    out
}

/// Remove set pixels with fewer than `n_d` set 4-neighbors.
pub fn denoise(image: &EdgeImage, n_d: u8) -> EdgeImage {
    if n_d == 0 {
        return image.clone();
    }
    filter_pass(image, |set, neighbors| set && neighbors >= n_d)
}

/// Set unset pixels with at least `n_f` set 4-neighbors; never unsets.
pub fn fill(image: &EdgeImage, n_f: u8) -> EdgeImage {
    if n_f > 4 {
        return image.clone();
    }
    filter_pass(image, |set, neighbors| set || neighbors >= n_f)
}

/// Denoise then fill; fill counts see only the denoised image.
pub fn denoise_fill(image: &EdgeImage, params: FilterParams) -> EdgeImage {
    fill(&denoise(image, params.n_d), params.n_f)
}
