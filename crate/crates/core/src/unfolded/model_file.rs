use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::Kernel;
use crate::prox::BoxBounds;
use crate::scalar::Real;
use crate::unfolded::{LayerParams, UnfoldedNetwork};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InlineKernel {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

/// On-disk form of an [`UnfoldedNetwork`]. Floats are written in their
/// shortest round-trip decimal form, so a save/load cycle is bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(rename = "K")]
    pub k: usize,
    pub delta: f64,
    #[serde(rename = "box")]
    pub bounds: BoxBounds<f64>,
    pub x0_margin: f64,
    pub kernel: InlineKernel,
    /// `[a, m, b, c]` per layer.
    pub layers: Vec<[f64; 4]>,
}

impl<T: Real> UnfoldedNetwork<T> {
    pub fn to_model_file(&self) -> ModelFile {
        let f = |v: T| v.to_f64_lossy();
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            k: self.depth(),
            delta: f(self.delta),
            bounds: BoxBounds {
                x_min: f(self.bounds.x_min),
                x_max: f(self.bounds.x_max),
            },
            x0_margin: f(self.x0_margin),
            kernel: InlineKernel {
                rows: self.kernel.rows(),
                cols: self.kernel.cols(),
                data: self.kernel.data().iter().map(|&v| f(v)).collect(),
            },
            layers: self.layers.iter().map(|p| p.to_array().map(f)).collect(),
        }
    }

    pub fn from_model_file(m: &ModelFile) -> Result<Self> {
        let bad = |msg: String| Error::Parse {
            context: "model file".into(),
            message: msg,
        };
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        if m.k != m.layers.len() {
            return Err(bad(format!("K = {} but {} layers present", m.k, m.layers.len())));
        }
        if m.kernel.rows * m.kernel.cols != m.kernel.data.len() {
            return Err(bad(format!(
                "kernel {}x{} has {} values",
                m.kernel.rows,
                m.kernel.cols,
                m.kernel.data.len()
            )));
        }
        let t = |v: f64| T::lit(v);
        let data = Array2::from_shape_vec((m.kernel.rows, m.kernel.cols), m.kernel.data.iter().map(|&v| t(v)).collect())
            .map_err(|e| bad(e.to_string()))?;
        let layers: Vec<LayerParams<T>> = m.layers.iter().map(|l| LayerParams::from_array(l.map(t))).collect();
        if layers.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite layer parameter".into()));
        }
        if !(m.delta > 0.0) {
            return Err(bad(format!("delta must be positive, got {}", m.delta)));
        }
        if !(m.x0_margin > 0.0 && m.x0_margin < 0.5) {
            return Err(bad(format!("x0_margin must be in (0, 0.5), got {}", m.x0_margin)));
        }
        Ok(Self {
            layers,
            kernel: Kernel::new(data)?,
            delta: t(m.delta),
            bounds: BoxBounds::new(t(m.bounds.x_min), t(m.bounds.x_max))?,
            x0_margin: t(m.x0_margin),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_model_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_model_file(&serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut net = UnfoldedNetwork::new(Kernel::<f64>::gaussian(1.6, 9).unwrap(), 3);
        net.layers[1].a = 0.1 + 0.2;
        net.layers[2].c = -1.0 / 3.0;
        net.layers[0].m = 1e-300;
        let back = UnfoldedNetwork::<f64>::from_json(&net.to_json().unwrap()).unwrap();
        assert_eq!(back, net);
        for (a, b) in back.layers.iter().zip(&net.layers) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn rejects_inconsistent_depth() {
        let net = UnfoldedNetwork::new(Kernel::<f64>::identity(), 2);
        let mut m = net.to_model_file();
        m.k = 3;
        assert!(UnfoldedNetwork::<f64>::from_model_file(&m).is_err());
        let mut m = net.to_model_file();
        m.format_version = 9;
        assert!(UnfoldedNetwork::<f64>::from_model_file(&m).is_err());
    }

    #[test]
    fn field_names() {
        let text = UnfoldedNetwork::new(Kernel::<f64>::identity(), 1).to_json().unwrap();
        for key in ["\"format_version\"", "\"K\"", "\"delta\"", "\"box\"", "\"kernel\"", "\"layers\""] {
            assert!(text.contains(key), "{key} missing");
        }
    }
}
