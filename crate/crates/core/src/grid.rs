//! Uniformly sampled functions on a truncated line, with the quadrature and
//! exponential-kernel machinery every solver module consumes.
//!
//! A `GridFunction` holds samples of a function assumed negligible outside its
//! support `[x0, x0 + (n-1)·dx]`; integrals treat it as zero there. The key
//! nonlocal operator is convolution against the Green's function of
//! `(1 - d²/dx²)⁻¹`,
//!
//!   symmetric:      g(x) = ½ ∫ e^{-|x-y|} f(y) dy
//!   antisymmetric:  g(x) = ½ (∫_x^∞ - ∫_{-∞}^x) e^{-|x-y|} f(y) dy,
//!
//! the antisymmetric variant being d/dx of the symmetric one. Both are
//! evaluated in O(n) by splitting the kernel at y = x and propagating the two
//! one-sided integrals with forward/backward recursions,
//!
//!   F_i = e^{-dx} F_{i-1} + (dx/2)(e^{-dx} f_{i-1} + f_i),
//!
//! which telescopes to the exact composite-trapezoid quadrature of the split
//! integral (the kernel is evaluated exactly at nodes, so no O(n²) pairwise
//! sums are needed).

use serde::{Deserialize, Serialize};
use std::io::{self, Write};

use crate::error::{Error, Result};

/// Minimum number of samples a valid grid must carry.
pub const MIN_SAMPLES: usize = 8;

/// Shape of a uniform grid: left endpoint, spacing, sample count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub dx: f64,
    pub n: usize,
}

impl GridSpec {
    /// Symmetric grid of `n` nodes covering `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Self {
        GridSpec {
            x0: -half_width,
            dx: 2.0 * half_width / (n - 1) as f64,
            n,
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }
}

/// Default half-width of the truncated line. `e^{-20} ≈ 2e-9`, so for data
/// decaying like `e^{-|x|}` the truncation error is negligible next to the
/// O(dx²) quadrature error.
pub const DEFAULT_HALF_WIDTH: f64 = 20.0;
/// Default node count (dx ≈ 0.0098 with the default half-width).
pub const DEFAULT_SAMPLES: usize = 4096;

fn raw_into_grid(raw: GridFunctionRaw) -> std::result::Result<GridFunction, String> {
    GridFunction::new(raw.x0, raw.dx, raw.values).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
struct GridFunctionRaw {
    x0: f64,
    dx: f64,
    values: Vec<f64>,
}

impl TryFrom<GridFunctionRaw> for GridFunction {
    type Error = String;
    fn try_from(raw: GridFunctionRaw) -> std::result::Result<Self, String> {
        raw_into_grid(raw)
    }
}

/// A real function sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridFunctionRaw")]
pub struct GridFunction {
    x0: f64,
    dx: f64,
    values: Vec<f64>,
}

/// Which side of the kernel split to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMode {
    /// `½ ∫ e^{-|x-y|} f(y) dy`
    Symmetric,
    /// `½ (∫_x^∞ - ∫_{-∞}^x) e^{-|x-y|} f(y) dy`
    Antisymmetric,
}

impl GridFunction {
    pub fn new(x0: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() || !x0.is_finite() {
            return Err(Error::InvalidGrid(format!("bad geometry x0={x0}, dx={dx}")));
        }
        if values.len() < MIN_SAMPLES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_SAMPLES} samples, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(GridFunction { x0, dx, values })
    }

    /// Sample `f` on the given grid shape.
    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..spec.n).map(|i| f(spec.x(i))).collect();
        GridFunction::new(spec.x0, spec.dx, values)
    }

    pub fn zeros(spec: GridSpec) -> Self {
        GridFunction {
            x0: spec.x0,
            dx: spec.dx,
            values: vec![0.0; spec.n],
        }
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            x0: self.x0,
            dx: self.dx,
            n: self.values.len(),
        }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.len() == other.len()
            && (self.x0 - other.x0).abs() <= 1e-12 * (1.0 + self.x0.abs())
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
    }

    /// New function on the same grid with values `f(x_i, v_i)`.
    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.x(i), v))
            .collect();
        GridFunction {
            x0: self.x0,
            dx: self.dx,
            values,
        }
    }

    /// Pointwise combination of aligned grid functions.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(GridFunction {
            x0: self.x0,
            dx: self.dx,
            values,
        })
    }

    fn check_finite(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite()) {
            Err(Error::NonFiniteInput)
        } else {
            Ok(())
        }
    }

    /// Composite trapezoid rule over the grid support. Exact for piecewise
    /// linear data.
    pub fn trapezoid_integral(&self) -> Result<f64> {
        self.check_finite()?;
        let s: f64 = self.values.iter().sum();
        Ok(self.dx * (s - 0.5 * (self.values[0] + self.values[self.len() - 1])))
    }

    /// Exponential-kernel convolution, O(n) via the split-kernel recursions.
    pub fn exp_convolution(&self, mode: ConvolutionMode) -> Result<GridFunction> {
        self.check_finite()?;
        let n = self.len();
        let f = &self.values;
        let decay = (-self.dx).exp();
        let half = 0.5 * self.dx;

        // fwd[i] = trapezoid of ∫_{x0}^{x_i} e^{-(x_i-y)} f(y) dy
        let mut fwd = vec![0.0; n];
        for i in 1..n {
            fwd[i] = decay * (fwd[i - 1] + half * f[i - 1]) + half * f[i];
        }
        // bwd[i] = trapezoid of ∫_{x_i}^{x_end} e^{-(y-x_i)} f(y) dy
        let mut bwd = vec![0.0; n];
        for i in (0..n - 1).rev() {
            bwd[i] = decay * (bwd[i + 1] + half * f[i + 1]) + half * f[i];
        }

        let values = match mode {
            ConvolutionMode::Symmetric => fwd
                .iter()
                .zip(&bwd)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
            ConvolutionMode::Antisymmetric => fwd
                .iter()
                .zip(&bwd)
                .map(|(a, b)| 0.5 * (b - a))
                .collect(),
        };
        Ok(GridFunction {
            x0: self.x0,
            dx: self.dx,
            values,
        })
    }

    /// Linear interpolation inside the support, zero outside.
    pub fn sample_linear(&self, x: f64) -> f64 {
        if x < self.x0 || x > self.x_end() {
            return 0.0;
        }
        let s = (x - self.x0) / self.dx;
        let i = (s.floor() as usize).min(self.len() - 2);
        let frac = s - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Cubic (Catmull-Rom) interpolation inside the support, zero outside.
    /// Falls back to linear on the boundary cells.
    pub fn sample_cubic(&self, x: f64) -> f64 {
        if x < self.x0 || x > self.x_end() {
            return 0.0;
        }
        let s = (x - self.x0) / self.dx;
        let i = (s.floor() as usize).min(self.len() - 2);
        if i == 0 || i + 2 >= self.len() {
            return self.sample_linear(x);
        }
        let t = s - i as f64;
        let (p0, p1, p2, p3) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        let m1 = 0.5 * (p2 - p0);
        let m2 = 0.5 * (p3 - p1);
        let t2 = t * t;
        let t3 = t2 * t;
        p1 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m1 * (t3 - 2.0 * t2 + t)
            + p2 * (-2.0 * t3 + 3.0 * t2)
            + m2 * (t3 - t2)
    }

    /// Second-order spatial derivative: centered in the interior, one-sided
    /// second-order at the two boundary nodes.
    pub fn derivative(&self) -> GridFunction {
        let n = self.len();
        let f = &self.values;
        let inv2dx = 1.0 / (2.0 * self.dx);
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv2dx;
        for i in 1..n - 1 {
            d[i] = (f[i + 1] - f[i - 1]) * inv2dx;
        }
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv2dx;
        GridFunction {
            x0: self.x0,
            dx: self.dx,
            values: d,
        }
    }

    /// CSV with header `x,value`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.x(i), v)?;
        }
        Ok(())
    }
}
