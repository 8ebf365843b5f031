use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::scalar::{median, Real};

/// Median absolute deviation of a standard normal variable.
pub const MAD_CONSISTENCY: f64 = 0.6745;

/// Noise standard deviation from the diagonal (HH) subband of a one-level
/// orthonormal Haar transform: `median(|HH|) / 0.6745` per channel, then the
/// median across channels. An odd last row/column is dropped.
pub fn estimate_noise_std<T: Real>(y: &ImageTensor<T>) -> Result<T> {
    let (h, w) = y.spatial_shape();
    let (he, we) = (h - h % 2, w - w % 2);
    if he == 0 || we == 0 {
        return Err(Error::DegenerateImage(format!(
            "noise estimation needs at least 2x2 pixels, got {h}x{w}"
        )));
    }
    let half = T::lit(0.5);
    let mut per_channel = Vec::with_capacity(y.channels());
    for c in 0..y.channels() {
        let p = y.plane(c);
        let mut coeffs = Vec::with_capacity(he * we / 4);
        for i in (0..he).step_by(2) {
            for j in (0..we).step_by(2) {
                let hh = (p[[i, j]] - p[[i, j + 1]] - p[[i + 1, j]] + p[[i + 1, j + 1]]) * half;
                coeffs.push(hh.abs());
            }
        }
        per_channel.push(median(&mut coeffs) / T::lit(MAD_CONSISTENCY));
    }
    Ok(median(&mut per_channel))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_has_zero_noise() {
        let y = ImageTensor::<f64>::filled(3, 9, 7, 0.4);
        assert_eq!(estimate_noise_std(&y).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_image() {
        let y = ImageTensor::<f64>::filled(1, 1, 1, 0.4);
        assert!(estimate_noise_std(&y).is_err());
    }

    #[test]
    fn invariant_to_offset() {
        let y = ImageTensor::<f64>::from_fn(1, 8, 8, |(_, i, j)| ((i * 7 + j * 13) % 5) as f64 * 0.01);
        let a = estimate_noise_std(&y).unwrap();
        let b = estimate_noise_std(&y.map(|v| v + 0.3)).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
