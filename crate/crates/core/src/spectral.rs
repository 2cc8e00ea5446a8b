//! Periodic-axis calculus: Fourier differentiation, the zero-mean
//! antiderivative and 2/3-rule dealiased products.
//!
//! All operators act along one periodic axis of a row-major array by
//! multiplying the line DFTs with a Hermitian symbol. Two real lines are
//! packed into one complex transform (real and imaginary parts), which is
//! exact for Hermitian symbols because each half maps back to a real line.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Signed mode number of DFT index `k` on an `n`-point line.
#[inline]
pub(crate) fn mode(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Angular wavenumber of DFT index `k` for period `length`.
#[inline]
pub(crate) fn wavenumber(k: usize, n: usize, length: f64) -> f64 {
    2.0 * PI * mode(k, n) as f64 / length
}

/// Fourier symbol of `d^order/dx^order`. Odd orders drop the Nyquist mode so
/// the result stays real.
pub(crate) fn deriv_symbol(n: usize, length: f64, order: u32) -> Vec<Complex64> {
    let unit = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, -1.0),
    ][(order % 4) as usize];
    (0..n)
        .map(|k| {
            if k == n / 2 && order % 2 == 1 {
                Complex64::new(0.0, 0.0)
            } else {
                unit * wavenumber(k, n, length).powi(order as i32)
            }
        })
        .collect()
}

/// Symbol of the zero-mean antiderivative: `1/(ik)`, with modes 0 and Nyquist set to zero.
pub(crate) fn antideriv_symbol(n: usize, length: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            if k == 0 || k == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -1.0 / wavenumber(k, n, length))
            }
        })
        .collect()
}

/// Highest mode kept by the 2/3 rule.
pub fn dealias_cutoff(n: usize) -> i64 {
    (n / 3) as i64
}

pub(crate) fn dealias_symbol(n: usize) -> Vec<Complex64> {
    let cut = dealias_cutoff(n);
    (0..n)
        .map(|k| Complex64::new(if mode(k, n).abs() <= cut { 1.0 } else { 0.0 }, 0.0))
        .collect()
}

pub(crate) fn mul_symbols(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

pub(crate) fn scale_symbol(a: &[Complex64], s: f64) -> Vec<Complex64> {
    a.iter().map(|x| x * s).collect()
}

/// Row-major strides for one axis: (outer count, axis length, inner stride).
fn axis_layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

#[inline]
fn line_base(line: usize, n: usize, inner: usize) -> usize {
    (line / inner) * n * inner + line % inner
}

/// In place: every line along `axis` is replaced by `IDFT(symbol · DFT(line))`.
pub(crate) fn apply_symbol(values: &mut [f64], shape: &[usize], axis: usize, symbol: &[Complex64]) {
    let (outer, n, inner) = axis_layout(shape, axis);
    debug_assert_eq!(symbol.len(), n);
    let lines = outer * inner;
    let pairs = lines.div_ceil(2);
    let (fwd, inv) = plans(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); pairs * n];
    for p in 0..pairs {
        let a = line_base(2 * p, n, inner);
        let chunk = &mut buf[p * n..(p + 1) * n];
        if 2 * p + 1 < lines {
            let b = line_base(2 * p + 1, n, inner);
            for (j, z) in chunk.iter_mut().enumerate() {
                *z = Complex64::new(values[a + j * inner], values[b + j * inner]);
            }
        } else {
            for (j, z) in chunk.iter_mut().enumerate() {
                *z = Complex64::new(values[a + j * inner], 0.0);
            }
        }
    }
    fwd.process(&mut buf);
    let norm = 1.0 / n as f64;
    for chunk in buf.chunks_exact_mut(n) {
        for (z, s) in chunk.iter_mut().zip(symbol) {
            *z *= s * norm;
        }
    }
    inv.process(&mut buf);
    for p in 0..pairs {
        let a = line_base(2 * p, n, inner);
        let chunk = &buf[p * n..(p + 1) * n];
        for (j, z) in chunk.iter().enumerate() {
            values[a + j * inner] = z.re;
        }
        if 2 * p + 1 < lines {
            let b = line_base(2 * p + 1, n, inner);
            for (j, z) in chunk.iter().enumerate() {
                values[b + j * inner] = z.im;
            }
        }
    }
}

/// Largest |line mean| along `axis`.
pub(crate) fn max_abs_line_mean(values: &[f64], shape: &[usize], axis: usize) -> f64 {
    let (outer, n, inner) = axis_layout(shape, axis);
    (0..outer * inner)
        .map(|l| {
            let b = line_base(l, n, inner);
            ((0..n).map(|j| values[b + j * inner]).sum::<f64>() / n as f64).abs()
        })
        .fold(0.0, f64::max)
}

/// Subtracts the mean of every line along `axis`.
pub(crate) fn remove_line_means(values: &mut [f64], shape: &[usize], axis: usize) {
    let (outer, n, inner) = axis_layout(shape, axis);
    for l in 0..outer * inner {
        let b = line_base(l, n, inner);
        let m = (0..n).map(|j| values[b + j * inner]).sum::<f64>() / n as f64;
        for j in 0..n {
            values[b + j * inner] -= m;
        }
    }
}

/// Tolerance of the zero-mean class, relative to the sup norm.
pub const ZERO_MEAN_TOL: f64 = 1e-10;

pub(crate) fn check_zero_mean(values: &[f64], shape: &[usize], axis: usize) -> Result<()> {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mean = max_abs_line_mean(values, shape, axis);
    if mean > ZERO_MEAN_TOL * scale {
        Err(Error::NonzeroMean { mean, scale })
    } else {
        Ok(())
    }
}

/// A periodic axis of some grid, by stored index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicAxisHandle {
    pub axis_index: usize,
    pub n: usize,
    pub length: f64,
}

impl PeriodicAxisHandle {
    pub fn new(grid: &Grid, axis_index: usize) -> Result<Self> {
        if axis_index >= grid.ndim() {
            return Err(Error::GridMismatch(format!("no stored axis {axis_index} in [{grid}]")));
        }
        let a = grid.axis(axis_index);
        if !a.is_periodic() {
            return Err(Error::GridMismatch(format!("axis `{}` is not periodic", a.name)));
        }
        Ok(Self { axis_index, n: a.n, length: a.length() })
    }

    pub fn by_name(grid: &Grid, name: &str) -> Result<Self> {
        let i = grid
            .axis_index(name)
            .ok_or_else(|| Error::GridMismatch(format!("no axis `{name}` in [{grid}]")))?;
        Self::new(grid, i)
    }

    fn check(&self, f: &Field) -> Result<()> {
        let g = f.grid();
        if self.axis_index >= g.ndim() {
            return Err(Error::GridMismatch(format!("field grid [{g}] has no axis {}", self.axis_index)));
        }
        let a = g.axis(self.axis_index);
        if !a.is_periodic() || a.n != self.n || (a.length() - self.length).abs() > 1e-12 * self.length {
            return Err(Error::GridMismatch(format!(
                "axis handle (n={}, L={}) does not describe axis `{}` of [{g}]",
                self.n, self.length, a.name
            )));
        }
        Ok(())
    }
}

fn transformed(f: &Field, ax: &PeriodicAxisHandle, symbol: &[Complex64]) -> Result<Field> {
    let mut v = f.values().to_vec();
    apply_symbol(&mut v, &f.grid().shape(), ax.axis_index, symbol);
    Field::from_raw(f.grid().clone(), v).check_finite("value", 0.0)
}

/// Spectral derivative of the given order along `ax`.
pub fn d_dx(f: &Field, ax: &PeriodicAxisHandle, order: u32) -> Result<Field> {
    ax.check(f)?;
    if order == 0 {
        return Err(Error::Param { name: "order", reason: "derivative order must be positive".into() });
    }
    transformed(f, ax, &deriv_symbol(ax.n, ax.length, order))
}

/// The antiderivative along `ax` with zero mean. Input lines must have zero mean.
pub fn antiderivative_zero_mean(f: &Field, ax: &PeriodicAxisHandle) -> Result<Field> {
    ax.check(f)?;
    check_zero_mean(f.values(), &f.grid().shape(), ax.axis_index)?;
    transformed(f, ax, &antideriv_symbol(ax.n, ax.length))
}

/// 2/3-rule dealiased product: both factors and the result are truncated to |mode| ≤ n/3.
pub fn dealiased_product(f: &Field, g: &Field, ax: &PeriodicAxisHandle) -> Result<Field> {
    ax.check(f)?;
    f.same_grid(g)?;
    let shape = f.grid().shape();
    let filter = dealias_symbol(ax.n);
    let mut a = f.values().to_vec();
    apply_symbol(&mut a, &shape, ax.axis_index, &filter);
    let mut b = g.values().to_vec();
    apply_symbol(&mut b, &shape, ax.axis_index, &filter);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    apply_symbol(&mut a, &shape, ax.axis_index, &filter);
    Field::from_raw(f.grid().clone(), a).check_finite("value", 0.0)
}

pub fn dealiased_square(f: &Field, ax: &PeriodicAxisHandle) -> Result<Field> {
    dealiased_product(f, f, ax)
}

/// `Σ |F_k|² / n` summed over lines and weighted by the cell volume, i.e. the
/// squared L² norm evaluated in mode space.
pub fn spectral_energy(f: &Field, ax: &PeriodicAxisHandle) -> Result<f64> {
    ax.check(f)?;
    let shape = f.grid().shape();
    let (outer, n, inner) = axis_layout(&shape, ax.axis_index);
    let (fwd, _) = plans(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut total = 0.0;
    for l in 0..outer * inner {
        let b = line_base(l, n, inner);
        for (j, z) in buf.iter_mut().enumerate() {
            *z = Complex64::new(f.values()[b + j * inner], 0.0);
        }
        fwd.process(&mut buf);
        total += buf.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
    }
    Ok(total * f.grid().cell_volume())
}

/// Spectral calculus over every stored axis of a fully periodic grid.
#[derive(Debug, Clone)]
pub(crate) struct PeriodicOps {
    pub shape: Vec<usize>,
    /// (stored axis index, period)
    pub axes: Vec<(usize, f64)>,
}

impl PeriodicOps {
    /// Operators over the named subset of axes; every listed axis must be periodic.
    pub fn over(grid: &Grid, axes: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(axes.len());
        for &i in axes {
            let h = PeriodicAxisHandle::new(grid, i)?;
            out.push((i, h.length));
        }
        Ok(Self { shape: grid.shape(), axes: out })
    }

    /// Operators over all stored axes.
    pub fn all(grid: &Grid) -> Result<Self> {
        Self::over(grid, &(0..grid.ndim()).collect::<Vec<_>>())
    }

    pub fn deriv(&self, v: &[f64], which: usize, order: u32) -> Vec<f64> {
        let (axis, length) = self.axes[which];
        let mut out = v.to_vec();
        apply_symbol(&mut out, &self.shape, axis, &deriv_symbol(self.shape[axis], length, order));
        out
    }

    pub fn grad(&self, v: &[f64]) -> Vec<Vec<f64>> {
        (0..self.axes.len()).map(|a| self.deriv(v, a, 1)).collect()
    }

    pub fn laplacian(&self, v: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; v.len()];
        for a in 0..self.axes.len() {
            for (x, d) in acc.iter_mut().zip(self.deriv(v, a, 2)) {
                *x += d;
            }
        }
        acc
    }

    /// Applies the 2/3 filter along every axis.
    pub fn dealias(&self, v: &mut [f64]) {
        for &(axis, _) in &self.axes {
            apply_symbol(v, &self.shape, axis, &dealias_symbol(self.shape[axis]));
        }
    }

    /// Σ_components a_i·b_i with every factor and the result filtered.
    pub fn dealiased_dot(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = vec![0.0; a[0].len()];
        for (ac, bc) in a.iter().zip(b) {
            let mut fa = ac.clone();
            let mut fb = bc.clone();
            self.dealias(&mut fa);
            self.dealias(&mut fb);
            for ((x, u), v) in acc.iter_mut().zip(&fa).zip(&fb) {
                *x += u * v;
            }
        }
        self.dealias(&mut acc);
        acc
    }
}

/// Band-limited interpolant of one periodic line.
#[derive(Debug, Clone)]
pub struct TrigInterpolant {
    coeffs: Vec<Complex64>,
    length: f64,
}

impl TrigInterpolant {
    pub fn new(samples: &[f64], length: f64) -> Self {
        let n = samples.len();
        let (fwd, _) = plans(n);
        let mut coeffs: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v / n as f64, 0.0)).collect();
        fwd.process(&mut coeffs);
        Self { coeffs, length }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.coeffs.len();
        let theta = 2.0 * PI * x / self.length;
        let mut s = self.coeffs[0].re;
        for k in 1..n / 2 {
            let (sin, cos) = (k as f64 * theta).sin_cos();
            s += 2.0 * (self.coeffs[k].re * cos - self.coeffs[k].im * sin);
        }
        s + self.coeffs[n / 2].re * ((n / 2) as f64 * theta).cos()
    }
}
