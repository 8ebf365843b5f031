//! Periodic (circulant) linear operators on images: blur and discrete
//! gradients. Every operator is diagonalized by the 2-D DFT, which is how
//! it is applied and how its normal-operator spectrum is exposed.

mod kernel;

use std::fmt;
use std::sync::{Arc, OnceLock};

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::scalar::Real;

pub use kernel::{Kernel, KernelSource, DEFAULT_GAUSSIAN_SIZE};

struct Plans<T: Real> {
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> Plans<T> {
    fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }
}

struct Inner<T: Real> {
    kernel: Kernel<T>,
    height: usize,
    width: usize,
    plans: Plans<T>,
    spectrum: OnceLock<Vec<Complex<T>>>,
}

/// Periodic convolution by a centered kernel on a fixed `(height, width)`
/// grid. Cheap to clone; immutable after construction.
#[derive(Clone)]
pub struct CirculantOperator<T: Real> {
    inner: Arc<Inner<T>>,
}

impl<T: Real> fmt::Debug for CirculantOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantOperator")
            .field("kernel", &self.inner.kernel.data().dim())
            .field("shape", &self.shape())
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Vertical,
    Horizontal,
}

impl<T: Real> CirculantOperator<T> {
    pub fn new(kernel: Kernel<T>, shape: (usize, usize)) -> Result<Self> {
        let (height, width) = shape;
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter("operator shape must be nonzero".into()));
        }
        Ok(Self {
            inner: Arc::new(Inner {
                kernel,
                height,
                width,
                plans: Plans::new(height, width),
                spectrum: OnceLock::new(),
            }),
        })
    }

    pub fn identity(shape: (usize, usize)) -> Result<Self> {
        Self::new(Kernel::identity(), shape)
    }

    /// Circular forward difference: `(D x)[i] = x[i+1] - x[i]` along the
    /// given axis, as the periodized kernel `[1, -1, 0]`.
    pub fn gradient(shape: (usize, usize), direction: Direction) -> Result<Self> {
        let taps = [T::one(), -T::one(), T::zero()];
        let data = match direction {
            Direction::Vertical => Array2::from_shape_fn((3, 1), |(i, _)| taps[i]),
            Direction::Horizontal => Array2::from_shape_fn((1, 3), |(_, j)| taps[j]),
        };
        Self::new(Kernel::new(data)?, shape)
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.inner.kernel
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.inner.height, self.inner.width)
    }

    /// Kernel zero-padded to the grid with its center moved to the origin;
    /// entries falling outside the grid wrap around.
    pub fn periodized_kernel(&self) -> Array2<T> {
        let (h, w) = self.shape();
        let k = self.inner.kernel.data();
        let (cr, cc) = (k.nrows() / 2, k.ncols() / 2);
        let mut out = Array2::zeros((h, w));
        for ((u, v), &val) in k.indexed_iter() {
            let i = (u as isize - cr as isize).rem_euclid(h as isize) as usize;
            let j = (v as isize - cc as isize).rem_euclid(w as isize) as usize;
            out[[i, j]] = out[[i, j]] + val;
        }
        out
    }

    /// DFT eigenvalues, row-major over the `(height, width)` grid.
    pub fn spectrum(&self) -> &[Complex<T>] {
        self.inner.spectrum.get_or_init(|| {
            let p = self.periodized_kernel();
            let mut buf: Vec<Complex<T>> = p.iter().map(|&v| Complex::new(v, T::zero())).collect();
            self.fft2(&mut buf, false);
            buf
        })
    }

    /// Eigenvalues of `A^T A`: `|spectrum|^2` per frequency.
    pub fn eigenvalues_normal(&self) -> Vec<T> {
        self.spectrum().iter().map(|z| z.norm_sqr()).collect()
    }

    /// Squared operator norm, `max |spectrum|^2`.
    pub fn norm_sq(&self) -> T {
        self.eigenvalues_normal()
            .into_iter()
            .fold(T::zero(), T::max)
    }

    pub fn apply(&self, x: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        self.check(x)?;
        Ok(self.filter(x, false))
    }

    pub fn apply_adjoint(&self, x: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        self.check(x)?;
        Ok(self.filter(x, true))
    }

    /// `A^T A x` through one forward/inverse transform pair.
    pub fn apply_normal(&self, x: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        self.check(x)?;
        let eig = self.eigenvalues_normal();
        Ok(self.filter_with(x, |p, z| z * eig[p]))
    }

    fn check(&self, x: &ImageTensor<T>) -> Result<()> {
        if x.spatial_shape() != self.shape() {
            let (h, w) = self.shape();
            return Err(Error::ShapeMismatch {
                expected: vec![x.channels(), h, w],
                actual: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn filter(&self, x: &ImageTensor<T>, adjoint: bool) -> ImageTensor<T> {
        let spec = self.spectrum();
        if adjoint {
            self.filter_with(x, |p, z| z * spec[p].conj())
        } else {
            self.filter_with(x, |p, z| z * spec[p])
        }
    }

    fn filter_with(
        &self,
        x: &ImageTensor<T>,
        mul: impl Fn(usize, Complex<T>) -> Complex<T>,
    ) -> ImageTensor<T> {
        let (h, w) = self.shape();
        let scale = T::one() / T::from_usize(h * w).unwrap();
        let mut out = x.clone();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); h * w];
        for c in 0..x.channels() {
            let plane = x.plane(c);
            for (b, &v) in buf.iter_mut().zip(plane.iter()) {
                *b = Complex::new(v, T::zero());
            }
            self.fft2(&mut buf, false);
            for (p, b) in buf.iter_mut().enumerate() {
                *b = mul(p, *b);
            }
            self.fft2(&mut buf, true);
            for (o, b) in out.plane_mut(c).iter_mut().zip(buf.iter()) {
                *o = b.re * scale;
            }
        }
        out
    }

    /// Unnormalized 2-D transform of a row-major `height x width` buffer.
    fn fft2(&self, buf: &mut [Complex<T>], inverse: bool) {
        let (h, w) = self.shape();
        let plans = &self.inner.plans;
        let (row, col) = if inverse {
            (&plans.row_inv, &plans.col_inv)
        } else {
            (&plans.row_fwd, &plans.col_fwd)
        };
        if w > 1 {
            row.process(buf);
        }
        if h > 1 {
            let mut t = vec![Complex::new(T::zero(), T::zero()); h * w];
            transpose(buf, &mut t, h, w);
            col.process(&mut t);
            transpose(&t, buf, w, h);
        }
    }
}

fn transpose<T: Copy>(src: &[T], dst: &mut [T], rows: usize, cols: usize) {
    for i in 0..rows {
        for j in 0..cols {
            dst[j * rows + i] = src[i * cols + j];
        }
    }
}

/// The vertical and horizontal circular difference operators on one grid.
#[derive(Clone, Debug)]
pub struct GradientOperators<T: Real> {
    pub vertical: CirculantOperator<T>,
    pub horizontal: CirculantOperator<T>,
}

impl<T: Real> GradientOperators<T> {
    pub fn new(shape: (usize, usize)) -> Result<Self> {
        Ok(Self {
            vertical: CirculantOperator::gradient(shape, Direction::Vertical)?,
            horizontal: CirculantOperator::gradient(shape, Direction::Horizontal)?,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.vertical.shape()
    }

    /// Eigenvalues of `D_v^T D_v + D_h^T D_h`.
    pub fn eigenvalues_normal(&self) -> Vec<T> {
        self.vertical
            .eigenvalues_normal()
            .into_iter()
            .zip(self.horizontal.eigenvalues_normal())
            .map(|(a, b)| a + b)
            .collect()
    }
}
