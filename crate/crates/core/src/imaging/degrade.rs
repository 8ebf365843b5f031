use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::linops::{CirculantOperator, KernelSource};
use crate::scalar::Real;
use crate::seeding;

/// Noise standard deviation: fixed, or drawn uniformly per image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseLevel {
    Fixed(f64),
    Range { lo: f64, hi: f64 },
}

impl NoiseLevel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseLevel::Fixed(s) if s >= 0.0 && s.is_finite() => Ok(()),
            NoiseLevel::Range { lo, hi } if lo >= 0.0 && lo <= hi && hi.is_finite() => Ok(()),
            other => Err(Error::InvalidParameter(format!("invalid noise level {other:?}"))),
        }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseLevel::Fixed(s) => s,
            NoiseLevel::Range { lo, hi } if lo == hi => lo,
            NoiseLevel::Range { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

impl std::str::FromStr for NoiseLevel {
    type Err = Error;

    /// `"0.008"` or `"0.01:0.05"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parse {
            context: format!("noise level {s:?}"),
            message: m.into(),
        };
        let level = match s.split_once(':') {
            Some((lo, hi)) => NoiseLevel::Range {
                lo: lo.trim().parse().map_err(|_| bad("bad lower bound"))?,
                hi: hi.trim().parse().map_err(|_| bad("bad upper bound"))?,
            },
            None => NoiseLevel::Fixed(s.trim().parse().map_err(|_| bad("bad value"))?),
        };
        level.validate()?;
        Ok(level)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradationConfig {
    pub kernel: KernelSource,
    pub sigma: NoiseLevel,
    pub seed: u64,
    pub normalize_kernel: bool,
}

impl Default for DegradationConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSource::default(),
            sigma: NoiseLevel::Fixed(0.008),
            seed: 0,
            normalize_kernel: true,
        }
    }
}

/// Blurs `truth` with `blur` and adds white Gaussian noise of a standard
/// deviation drawn from `noise`. The result is not clipped. Returns the
/// observation and the standard deviation used.
pub fn degrade_with_rng<T: Real>(
    truth: &ImageTensor<T>,
    blur: &CirculantOperator<T>,
    noise: &NoiseLevel,
    rng: &mut impl Rng,
) -> Result<(ImageTensor<T>, f64)> {
    noise.validate()?;
    let sigma = noise.draw(rng);
    let mut y = blur.apply(truth)?;
    if sigma > 0.0 {
        for v in y.as_slice_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *v = *v + T::lit(sigma * n);
        }
    }
    Ok((y, sigma))
}

/// Degrades image number `index` of a dataset; the random stream is keyed
/// by `(cfg.seed, index)` so results do not depend on processing order.
pub fn degrade<T: Real>(
    truth: &ImageTensor<T>,
    cfg: &DegradationConfig,
    index: u64,
) -> Result<(ImageTensor<T>, f64)> {
    let kernel = cfg.kernel.build::<T>(cfg.normalize_kernel)?;
    let blur = CirculantOperator::new(kernel, truth.spatial_shape())?;
    let mut rng = seeding::stream(cfg.seed, index);
    degrade_with_rng(truth, &blur, &cfg.sigma, &mut rng)
}
