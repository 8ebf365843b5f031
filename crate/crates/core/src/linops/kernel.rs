use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Centered convolution kernel with odd side lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T> {
    data: Array2<T>,
}

impl<T: Real> Kernel<T> {
    pub fn new(data: Array2<T>) -> Result<Self> {
        let (r, c) = data.dim();
        if r == 0 || c == 0 {
            return Err(Error::InvalidKernel("empty kernel".into()));
        }
        if r % 2 == 0 || c % 2 == 0 {
            return Err(Error::InvalidKernel(format!(
                "kernel side lengths must be odd, got {r}x{c}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("non-finite kernel entry".into()));
        }
        Ok(Self { data })
    }

    pub fn identity() -> Self {
        Self {
            data: Array2::from_elem((1, 1), T::one()),
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            data: Array2::from_elem((1, 1), value),
        }
    }

    /// Sampled isotropic Gaussian of the given standard deviation on a
    /// `size x size` grid, normalized to unit sum.
    pub fn gaussian(std: T, size: usize) -> Result<Self> {
        if std <= T::zero() {
            return Err(Error::InvalidKernel(format!("gaussian std must be > 0, got {std}")));
        }
        let half = (size / 2) as isize;
        let two_var = T::lit(2.0) * std * std;
        let data = Array2::from_shape_fn((size, size), |(i, j)| {
            let di = T::from_isize(i as isize - half).unwrap();
            let dj = T::from_isize(j as isize - half).unwrap();
            (-(di * di + dj * dj) / two_var).exp()
        });
        let mut k = Self::new(data)?;
        k.normalize()?;
        Ok(k)
    }

    /// `size x size` box average.
    pub fn uniform(size: usize) -> Result<Self> {
        let v = T::one() / T::from_usize(size * size).unwrap();
        Self::new(Array2::from_elem((size, size), v))
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let s = self.sum();
        if s.abs() <= T::epsilon() {
            return Err(Error::InvalidKernel("kernel sums to zero; cannot normalize".into()));
        }
        self.data.mapv_inplace(|v| v / s);
        Ok(())
    }

    /// Parses the plain-text kernel format: a `rows cols` header followed by
    /// row-major whitespace-separated values.
    pub fn parse_text(text: &str, normalize: bool) -> Result<Self> {
        let err = |m: String| Error::Parse {
            context: "kernel".into(),
            message: m,
        };
        let mut tokens = text.split_whitespace();
        let mut dim = |name: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| err(format!("missing {name}")))?
                .parse::<usize>()
                .map_err(|e| err(format!("bad {name}: {e}")))
        };
        let rows = dim("rows")?;
        let cols = dim("cols")?;
        let values = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| err(format!("bad value {t:?}: {e}")))
                    .map(T::lit)
            })
            .collect::<Result<Vec<T>>>()?;
        if values.len() != rows * cols {
            return Err(err(format!(
                "expected {} values for {rows}x{cols}, found {}",
                rows * cols,
                values.len()
            )));
        }
        let data = Array2::from_shape_vec((rows, cols), values).map_err(|e| err(e.to_string()))?;
        let mut k = Self::new(data)?;
        if normalize {
            k.normalize()?;
        }
        Ok(k)
    }

    pub fn load(path: &Path, normalize: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text, normalize)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows(), self.cols());
        for row in self.data.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{:e}", v.to_f64_lossy())).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Hex SHA-256 of the kernel dimensions and its values as little-endian `f64`.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.rows() as u64).to_le_bytes());
        h.update((self.cols() as u64).to_le_bytes());
        for v in self.data.iter() {
            h.update(v.to_f64_lossy().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub const DEFAULT_GAUSSIAN_SIZE: usize = 25;

/// Where a blur kernel comes from: `gaussian:<std>[:<size>]`,
/// `uniform:<size>`, `identity`, or `file:<path>` (a bare path also works).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelSource {
    Gaussian { std: f64, size: usize },
    Uniform { size: usize },
    Identity,
    File(PathBuf),
}

impl KernelSource {
    pub fn build<T: Real>(&self, normalize: bool) -> Result<Kernel<T>> {
        match self {
            KernelSource::Gaussian { std, size } => Kernel::gaussian(T::lit(*std), *size),
            KernelSource::Uniform { size } => Kernel::uniform(*size),
            KernelSource::Identity => Ok(Kernel::identity()),
            KernelSource::File(p) => Kernel::load(p, normalize),
        }
    }
}

impl Default for KernelSource {
    fn default() -> Self {
        KernelSource::Gaussian {
            std: 1.6,
            size: DEFAULT_GAUSSIAN_SIZE,
        }
    }
}

impl FromStr for KernelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = |m: &str| Error::Parse {
            context: format!("kernel spec {s:?}"),
            message: m.into(),
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["identity"] => Ok(KernelSource::Identity),
            ["gaussian", std] | ["gaussian", std, _] => {
                let std: f64 = std.parse().map_err(|_| err("bad gaussian std"))?;
                let size = match parts.get(2) {
                    Some(z) => z.parse().map_err(|_| err("bad gaussian size"))?,
                    None => DEFAULT_GAUSSIAN_SIZE,
                };
                if size % 2 == 0 {
                    return Err(err("gaussian size must be odd"));
                }
                Ok(KernelSource::Gaussian { std, size })
            }
            ["uniform", size] => {
                let size: usize = size.parse().map_err(|_| err("bad uniform size"))?;
                if size % 2 == 0 {
                    return Err(err("uniform size must be odd"));
                }
                Ok(KernelSource::Uniform { size })
            }
            _ => {
                let path = s.strip_prefix("file:").unwrap_or(s);
                if path.is_empty() {
                    return Err(err("empty kernel path"));
                }
                Ok(KernelSource::File(PathBuf::from(path)))
            }
        }
    }
}

impl TryFrom<String> for KernelSource {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSource> for String {
    fn from(k: KernelSource) -> String {
        k.to_string()
    }
}

impl fmt::Display for KernelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSource::Gaussian { std, size } => write!(f, "gaussian:{std}:{size}"),
            KernelSource::Uniform { size } => write!(f, "uniform:{size}"),
            KernelSource::Identity => write!(f, "identity"),
            KernelSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}
