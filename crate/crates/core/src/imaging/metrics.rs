use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::scalar::Real;

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
const WINDOW_RADIUS: usize = 5;
const WINDOW_STD: f64 = 1.5;

/// Options shared by SSIM and PSNR.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MetricOptions {
    /// Width of the frame excluded from the average, in pixels.
    pub border: usize,
}

impl MetricOptions {
    pub const FULL: Self = Self { border: 0 };
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { border: 6 }
    }
}

fn window<T: Real>() -> Vec<T> {
    let taps: Vec<f64> = (0..=2 * WINDOW_RADIUS)
        .map(|i| {
            let d = i as f64 - WINDOW_RADIUS as f64;
            (-d * d / (2.0 * WINDOW_STD * WINDOW_STD)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| T::lit(t / s)).collect()
}

/// Separable periodic filtering by the symmetric SSIM window. Symmetry makes
/// the filter self-adjoint, which the gradient relies on.
fn blur<T: Real>(x: ArrayView2<'_, T>, taps: &[T]) -> Array2<T> {
    let (h, w) = x.dim();
    let r = WINDOW_RADIUS as isize;
    let mut tmp = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = T::zero();
            for (t, &k) in taps.iter().enumerate() {
                let jj = (j as isize + t as isize - r).rem_euclid(w as isize) as usize;
                acc = acc + k * x[[i, jj]];
            }
            tmp[[i, j]] = acc;
        }
    }
    let mut out = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut acc = T::zero();
            for (t, &k) in taps.iter().enumerate() {
                let ii = (i as isize + t as isize - r).rem_euclid(h as isize) as usize;
                acc = acc + k * tmp[[ii, j]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

fn check_pair<T: Real>(x: &ImageTensor<T>, truth: &ImageTensor<T>, opts: MetricOptions) -> Result<usize> {
    x.ensure_same_shape(truth)?;
    let (h, w) = x.spatial_shape();
    if 2 * opts.border >= h || 2 * opts.border >= w {
        return Err(Error::DegenerateImage(format!(
            "border {} leaves no pixels in a {h}x{w} image",
            opts.border
        )));
    }
    Ok(x.channels() * (h - 2 * opts.border) * (w - 2 * opts.border))
}

fn inside(i: usize, j: usize, h: usize, w: usize, b: usize) -> bool {
    i >= b && j >= b && i + b < h && j + b < w
}

/// Windowed SSIM (11x11 Gaussian window, std 1.5, periodic boundary)
/// averaged over channels and over pixels outside the excluded border.
pub fn ssim<T: Real>(x: &ImageTensor<T>, truth: &ImageTensor<T>, opts: MetricOptions) -> Result<T> {
    Ok(ssim_impl(x, truth, opts, false)?.0)
}

/// Gradient of [`ssim`] with respect to `x`.
pub fn ssim_grad<T: Real>(
    x: &ImageTensor<T>,
    truth: &ImageTensor<T>,
    opts: MetricOptions,
) -> Result<ImageTensor<T>> {
    Ok(ssim_impl(x, truth, opts, true)?.1.expect("gradient requested"))
}

pub fn ssim_with_grad<T: Real>(
    x: &ImageTensor<T>,
    truth: &ImageTensor<T>,
    opts: MetricOptions,
) -> Result<(T, ImageTensor<T>)> {
    let (v, g) = ssim_impl(x, truth, opts, true)?;
    Ok((v, g.expect("gradient requested")))
}

fn ssim_impl<T: Real>(
    x: &ImageTensor<T>,
    truth: &ImageTensor<T>,
    opts: MetricOptions,
    want_grad: bool,
) -> Result<(T, Option<ImageTensor<T>>)> {
    let count = check_pair(x, truth, opts)?;
    let taps = window::<T>();
    let (h, w) = x.spatial_shape();
    let b = opts.border;
    let weight = T::one() / T::from_usize(count).unwrap();
    let c1 = T::lit(SSIM_C1);
    let c2 = T::lit(SSIM_C2);
    let two = T::lit(2.0);

    let mut total = T::zero();
    let mut grad = want_grad.then(|| ImageTensor::zeros(x.channels(), h, w));

    for c in 0..x.channels() {
        let xp = x.plane(c);
        let yp = truth.plane(c);
        let mx = blur(xp, &taps);
        let my = blur(yp, &taps);
        let exx = blur(xp.mapv(|v| v * v).view(), &taps);
        let eyy = blur(yp.mapv(|v| v * v).view(), &taps);
        let exy = blur((&xp * &yp).view(), &taps);

        // Sensitivities of the mean SSIM to the filtered statistics.
        let mut d_mx = Array2::zeros((h, w));
        let mut d_exx = Array2::zeros((h, w));
        let mut d_exy = Array2::zeros((h, w));
        for i in 0..h {
            for j in 0..w {
                if !inside(i, j, h, w, b) {
                    continue;
                }
                let (ux, uy) = (mx[[i, j]], my[[i, j]]);
                let sxx = exx[[i, j]] - ux * ux;
                let syy = eyy[[i, j]] - uy * uy;
                let sxy = exy[[i, j]] - ux * uy;
                let a1 = two * ux * uy + c1;
                let a2 = two * sxy + c2;
                let b1 = ux * ux + uy * uy + c1;
                let b2 = sxx + syy + c2;
                let s = a1 * a2 / (b1 * b2);
                total = total + s;
                if want_grad {
                    let sw = s * weight;
                    d_mx[[i, j]] = sw * (two * uy / a1 - two * uy / a2 - two * ux / b1 + two * ux / b2);
                    d_exx[[i, j]] = -sw / b2;
                    d_exy[[i, j]] = sw * two / a2;
                }
            }
        }
        if let Some(g) = grad.as_mut() {
            let g_mx = blur(d_mx.view(), &taps);
            let g_exx = blur(d_exx.view(), &taps);
            let g_exy = blur(d_exy.view(), &taps);
            let mut gp = g.plane_mut(c);
            for i in 0..h {
                for j in 0..w {
                    gp[[i, j]] = g_mx[[i, j]] + two * xp[[i, j]] * g_exx[[i, j]] + yp[[i, j]] * g_exy[[i, j]];
                }
            }
        }
    }
    Ok((total * weight, grad))
}

/// `10 log10(1 / MSE)` over pixels outside the excluded border; `+inf` when
/// the images coincide.
pub fn psnr<T: Real>(x: &ImageTensor<T>, truth: &ImageTensor<T>, opts: MetricOptions) -> Result<T> {
    let count = check_pair(x, truth, opts)?;
    let (h, w) = x.spatial_shape();
    let mut se = T::zero();
    for ((c, i, j), &v) in x.data().indexed_iter() {
        if inside(i, j, h, w, opts.border) {
            let d = v - truth.data()[[c, i, j]];
            se = se + d * d;
        }
    }
    let mse = se / T::from_usize(count).unwrap();
    if mse == T::zero() {
        return Ok(T::infinity());
    }
    Ok(T::lit(10.0) * (T::one() / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_img(seed: u64, h: usize, w: usize) -> ImageTensor<f64> {
        let mut s = seed;
        ImageTensor::from_fn(1, h, w, |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
    }

    #[test]
    fn ssim_of_identical_is_one() {
        let x = noise_img(1, 20, 20);
        assert!((ssim(&x, &x, MetricOptions::FULL).unwrap() - 1.0).abs() < 1e-12);
        assert!((ssim(&x, &x, MetricOptions::default()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_symmetric_and_bounded() {
        let a = noise_img(2, 16, 16);
        let b = noise_img(3, 16, 16);
        let s1 = ssim(&a, &b, MetricOptions::FULL).unwrap();
        let s2 = ssim(&b, &a, MetricOptions::FULL).unwrap();
        assert!((s1 - s2).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&s1));
    }

    #[test]
    fn inverted_checkerboard_is_negative() {
        let x = ImageTensor::<f64>::from_fn(1, 16, 16, |(_, i, j)| ((i + j) % 2) as f64);
        let inv = x.map(|v| 1.0 - v);
        assert!(ssim(&inv, &x, MetricOptions::FULL).unwrap() < 0.0);
    }

    #[test]
    fn border_too_large() {
        let x = noise_img(4, 12, 12);
        assert!(ssim(&x, &x, MetricOptions { border: 6 }).is_err());
    }

    #[test]
    fn psnr_values() {
        let x = noise_img(5, 10, 10);
        assert_eq!(psnr(&x, &x, MetricOptions::FULL).unwrap(), f64::INFINITY);
        let y = x.map(|v| v + 0.1);
        assert!((psnr(&y, &x, MetricOptions::FULL).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch() {
        let a = noise_img(1, 10, 10);
        let b = noise_img(1, 10, 12);
        assert!(matches!(ssim(&a, &b, MetricOptions::FULL), Err(Error::ShapeMismatch { .. })));
        assert!(psnr(&a, &b, MetricOptions::FULL).is_err());
    }
}
