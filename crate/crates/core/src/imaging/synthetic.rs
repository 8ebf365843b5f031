//! Procedural test scenes: smooth shading, a handful of overlapping shapes
//! with sharp edges, and a patch of oriented texture. Used for desk-scale
//! training sets and tests when no photo collection is at hand.

use rand::Rng;

use crate::imaging::ImageTensor;
use crate::scalar::Real;
use crate::seeding;

enum Shape {
    Ellipse { ci: f64, cj: f64, ri: f64, rj: f64, rot: f64 },
    Rect { i0: f64, j0: f64, i1: f64, j1: f64 },
    Stripes { ci: f64, cj: f64, r: f64, freq: f64, angle: f64, amp: f64 },
}

/// Scene number `index` of the collection keyed by `seed`; intensities lie
/// in `[0.05, 0.95]`.
pub fn scene<T: Real>(seed: u64, index: u64, channels: usize, height: usize, width: usize) -> ImageTensor<T> {
    let mut rng = seeding::stream(seed, index);
    let (h, w) = (height as f64, width as f64);

    let base: Vec<f64> = (0..channels).map(|_| rng.random_range(0.25..0.75)).collect();
    let tilt_i = rng.random_range(-0.25..0.25);
    let tilt_j = rng.random_range(-0.25..0.25);

    let n_shapes = rng.random_range(4..9);
    let mut shapes = Vec::with_capacity(n_shapes);
    for _ in 0..n_shapes {
        let kind = rng.random_range(0..10);
        let shape = if kind < 5 {
            Shape::Ellipse {
                ci: rng.random_range(0.0..h),
                cj: rng.random_range(0.0..w),
                ri: rng.random_range(0.08..0.35) * h,
                rj: rng.random_range(0.08..0.35) * w,
                rot: rng.random_range(0.0..std::f64::consts::PI),
            }
        } else if kind < 8 {
            let i0 = rng.random_range(0.0..h * 0.8);
            let j0 = rng.random_range(0.0..w * 0.8);
            Shape::Rect {
                i0,
                j0,
                i1: i0 + rng.random_range(0.1..0.5) * h,
                j1: j0 + rng.random_range(0.1..0.5) * w,
            }
        } else {
            Shape::Stripes {
                ci: rng.random_range(0.0..h),
                cj: rng.random_range(0.0..w),
                r: rng.random_range(0.15..0.35) * h.min(w),
                freq: rng.random_range(0.3..0.9),
                angle: rng.random_range(0.0..std::f64::consts::PI),
                amp: rng.random_range(0.08..0.2),
            }
        };
        let color: Vec<f64> = (0..channels).map(|_| rng.random_range(0.1..0.9)).collect();
        shapes.push((shape, color));
    }

    ImageTensor::from_fn(channels, height, width, |(c, i, j)| {
        let (fi, fj) = (i as f64, j as f64);
        let mut v = base[c] + tilt_i * (fi / h - 0.5) + tilt_j * (fj / w - 0.5);
        for (shape, color) in &shapes {
            match *shape {
                Shape::Ellipse { ci, cj, ri, rj, rot } => {
                    let (di, dj) = (fi - ci, fj - cj);
                    let (s, co) = rot.sin_cos();
                    let u = (co * di + s * dj) / ri;
                    let t = (-s * di + co * dj) / rj;
                    if u * u + t * t <= 1.0 {
                        v = color[c];
                    }
                }
                Shape::Rect { i0, j0, i1, j1 } => {
                    if fi >= i0 && fi < i1 && fj >= j0 && fj < j1 {
                        v = color[c] + 0.1 * ((fi - i0) / (i1 - i0) - 0.5);
                    }
                }
                Shape::Stripes { ci, cj, r, freq, angle, amp } => {
                    let (di, dj) = (fi - ci, fj - cj);
                    if di * di + dj * dj <= r * r {
                        let (s, co) = angle.sin_cos();
                        v += amp * (freq * (co * di + s * dj)).sin();
                    }
                }
            }
        }
        T::lit(v.clamp(0.05, 0.95))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a: ImageTensor<f64> = scene(3, 1, 3, 32, 40);
        let b: ImageTensor<f64> = scene(3, 1, 3, 32, 40);
        let c: ImageTensor<f64> = scene(3, 2, 3, 32, 40);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.min_value() >= 0.05 && a.max_value() <= 0.95);
    }
}
