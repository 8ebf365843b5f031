use ndarray::{Array2, Array3, ArrayView2, ArrayViewMut2, Axis, Zip};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Planar image, `channels x height x width`, nominally valued in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor<T> {
    data: Array3<T>,
}

impl<T: Real> ImageTensor<T> {
    pub fn from_array(data: Array3<T>) -> Result<Self> {
        let c = data.shape()[0];
        if c != 1 && c != 3 {
            return Err(Error::InvalidParameter(format!(
                "image must have 1 or 3 channels, got {c}"
            )));
        }
        if data.shape()[1] == 0 || data.shape()[2] == 0 {
            return Err(Error::DegenerateImage("zero-sized image".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image data".into()));
        }
        Ok(Self { data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, T::zero())
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: T) -> Self {
        Self {
            data: Array3::from_elem((channels, height, width), value),
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        f: impl FnMut((usize, usize, usize)) -> T,
    ) -> Self {
        Self {
            data: Array3::from_shape_fn((channels, height, width), f),
        }
    }

    pub fn from_plane(plane: Array2<T>) -> Self {
        Self {
            data: plane.insert_axis(Axis(0)),
        }
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[2]
    }

    /// `(height, width)`.
    pub fn spatial_shape(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels(), self.height(), self.width()]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &Array3<T> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<T> {
        &mut self.data
    }

    pub fn into_array(self) -> Array3<T> {
        self.data
    }

    pub fn plane(&self, c: usize) -> ArrayView2<'_, T> {
        self.data.index_axis(Axis(0), c)
    }

    pub fn plane_mut(&mut self, c: usize) -> ArrayViewMut2<'_, T> {
        self.data.index_axis_mut(Axis(0), c)
    }

    /// Contiguous row-major view of all samples.
    pub fn as_slice(&self) -> &[T] {
        self.data.as_slice().expect("standard layout")
    }

    pub fn as_slice_mut(&mut self) -> &mut [T] {
        self.data.as_slice_mut().expect("standard layout")
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape().to_vec(),
                actual: other.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl FnMut(T) -> T) -> Self {
        let mut f = f;
        Self {
            data: self.data.mapv(&mut f),
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        let mut out = self.data.clone();
        Zip::from(&mut out)
            .and(&other.data)
            .for_each(|a, &b| *a = f(*a, b));
        Self { data: out }
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.shape(), other.shape());
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> T {
        self.as_slice().iter().copied().sum()
    }

    pub fn min_value(&self) -> T {
        self.as_slice().iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.as_slice().iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: T, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        Zip::from(&mut self.data)
            .and(&other.data)
            .for_each(|a, &b| *a = *a + s * b);
    }

    pub fn clamp(&self, lo: T, hi: T) -> Self {
        self.map(|v| v.max(lo).min(hi))
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    /// Lossless conversion of every sample to `f64`.
    pub fn to_f64(&self) -> ImageTensor<f64> {
        ImageTensor {
            data: self.data.mapv(|v| v.to_f64_lossy()),
        }
    }
}
