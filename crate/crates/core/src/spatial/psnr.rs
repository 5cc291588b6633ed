use crate::error::{Error, Result};

/// Reported for a zero-error comparison.
pub const PSNR_CAP: f64 = 99.0;

const PEAK_SQ: f64 = 255.0 * 255.0;

/// PSNR from a summed squared error over `samples` channel values.
#[inline]
pub fn psnr_from_sse(sse: u64, samples: u64) -> f64 {
    if sse == 0 {
        return PSNR_CAP;
    }
    let mse = sse as f64 / samples as f64;
    (10.0 * (PEAK_SQ / mse).log10()).min(PSNR_CAP)
}

/// PSNR of two interleaved rasters with `channels` values per pixel, over
/// the pixels selected by `mask`.
pub fn psnr(a: &[u8], b: &[u8], mask: &[bool], channels: usize) -> Result<f64> {
    if a.len() != b.len() || a.len() != mask.len() * channels {
        return Err(Error::ShapeMismatch(format!(
            "rasters of {} and {} values with a {}-pixel mask",
            a.len(),
            b.len(),
            mask.len()
        )));
    }
    let mut sse = 0u64;
    let mut n = 0u64;
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        for c in 0..channels {
            let d = a[i * channels + c] as i64 - b[i * channels + c] as i64;
            sse += (d * d) as u64;
        }
        n += channels as u64;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(psnr_from_sse(sse, n))
}
