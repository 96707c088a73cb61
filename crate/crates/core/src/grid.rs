//! Uniform periodic grids with FFT-based multiplier application.
//!
//! Grids follow the DFT convention: axis `[lo, hi)` with `n` points at
//! `lo + i h`, `h = (hi - lo) / n`. Fourier multipliers act on the angular
//! frequencies `omega_j = 2 pi j~ / (n h)` with the usual wrap-around
//! ordering. Supported dimensions: 1 and 2.

use crate::error::{Error, Result};
use crate::util::kahan_sum;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn symmetric(halfwidth: f64, n: usize) -> Self {
        Self {
            lo: -halfwidth,
            hi: halfwidth,
            n,
        }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Angular DFT frequencies in storage order.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n;
        let factor = 2.0 * std::f64::consts::PI / (n as f64 * self.step());
        (0..n)
            .map(|j| {
                let j_signed = if j <= n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                };
                factor * j_signed
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.hi > self.lo) || self.n < 2 {
            return Err(Error::invalid("axis needs hi > lo and n >= 2"));
        }
        Ok(())
    }
}

/// Density values on a uniform grid (row-major in 2-D).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid("grids support 1 or 2 dimensions"));
        }
        for ax in &axes {
            ax.validate()?;
        }
        let len: usize = axes.iter().map(|a| a.n).product();
        if values.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: values.len(),
            });
        }
        Ok(Self { axes, values })
    }

    pub fn zeros(axes: Vec<Axis>) -> Result<Self> {
        let len: usize = axes.iter().map(|a| a.n).product();
        Self::new(axes, vec![0.0; len])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.step()).product()
    }

    /// Coordinates of the flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0].point(flat)],
            2 => {
                let ny = self.axes[1].n;
                vec![self.axes[0].point(flat / ny), self.axes[1].point(flat % ny)]
            }
            _ => unreachable!(),
        }
    }

    pub fn mass(&self) -> f64 {
        kahan_sum(self.values.iter().copied()) * self.cell_volume()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0) && m.is_finite() {
            return Err(Error::domain(format!("cannot normalize mass {m}")));
        }
        for v in self.values.iter_mut() {
            *v /= m;
        }
        Ok(())
    }

    /// Clamps negative values to zero (tiny spectral ripple), renormalizes,
    /// and returns the clamped mass.
    pub fn clamp_negative(&mut self) -> Result<f64> {
        let cell = self.cell_volume();
        let mut clamped = 0.0;
        for v in self.values.iter_mut() {
            if *v < 0.0 {
                clamped -= *v * cell;
                *v = 0.0;
            }
        }
        self.normalize()?;
        Ok(clamped)
    }

    fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.axes != other.axes {
            return Err(Error::GridMismatch("grids differ".into()));
        }
        Ok(())
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(kahan_sum(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs()),
        ) * self.cell_volume())
    }

    pub fn max_norm_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Grid inner product `sum f g * cell`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(kahan_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b))
            * self.cell_volume())
    }

    /// CSV rows `x_1[,x_2],value`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        for i in 1..=self.dim() {
            write!(w, "y_{i},")?;
        }
        writeln!(w, "rho")?;
        for (flat, v) in self.values.iter().enumerate() {
            for c in self.point(flat) {
                write!(w, "{c},")?;
            }
            writeln!(w, "{v}")?;
        }
        Ok(())
    }

    /// Applies a radial Fourier multiplier `m(|omega|)`.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> f64) -> Result<DensityGrid> {
        let mut spec = Spectral::new(&self.axes)?;
        let mut buf = spec.forward(&self.values);
        spec.multiply_radial(&mut buf, m);
        let values = spec.inverse(buf);
        DensityGrid::new(self.axes.clone(), values)
    }
}

/// Reusable FFT plans for one grid shape.
pub struct Spectral {
    axes: Vec<Axis>,
    freqs: Vec<Vec<f64>>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl Spectral {
    pub fn new(axes: &[Axis]) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::invalid("spectral ops support 1 or 2 dimensions"));
        }
        let mut planner = FftPlanner::new();
        let forward = axes
            .iter()
            .map(|a| planner.plan_fft_forward(a.n))
            .collect();
        let inverse = axes
            .iter()
            .map(|a| planner.plan_fft_inverse(a.n))
            .collect();
        Ok(Self {
            axes: axes.to_vec(),
            freqs: axes.iter().map(|a| a.frequencies()).collect(),
            forward,
            inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&mut self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_complex(&mut buf);
        buf
    }

    pub fn forward_complex(&mut self, buf: &mut [Complex64]) {
        match self.axes.len() {
            1 => self.forward[0].process(buf),
            2 => {
                let (nx, ny) = (self.axes[0].n, self.axes[1].n);
                for row in buf.chunks_exact_mut(ny) {
                    self.forward[1].process(row);
                }
                let mut col = vec![Complex64::default(); nx];
                for j in 0..ny {
                    for i in 0..nx {
                        col[i] = buf[i * ny + j];
                    }
                    self.forward[0].process(&mut col);
                    for i in 0..nx {
                        buf[i * ny + j] = col[i];
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn inverse_complex(&mut self, buf: &mut [Complex64]) {
        match self.axes.len() {
            1 => self.inverse[0].process(buf),
            2 => {
                let (nx, ny) = (self.axes[0].n, self.axes[1].n);
                for row in buf.chunks_exact_mut(ny) {
                    self.inverse[1].process(row);
                }
                let mut col = vec![Complex64::default(); nx];
                for j in 0..ny {
                    for i in 0..nx {
                        col[i] = buf[i * ny + j];
                    }
                    self.inverse[0].process(&mut col);
                    for i in 0..nx {
                        buf[i * ny + j] = col[i];
                    }
                }
            }
            _ => unreachable!(),
        }
        let scale = 1.0 / self.len() as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    pub fn inverse(&mut self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inverse_complex(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Multiplies the spectrum by `m(|omega|)` in place.
    pub fn multiply_radial(&self, buf: &mut [Complex64], m: impl Fn(f64) -> f64) {
        match self.axes.len() {
            1 => {
                for (v, &w) in buf.iter_mut().zip(&self.freqs[0]) {
                    *v *= m(w.abs());
                }
            }
            2 => {
                let ny = self.axes[1].n;
                for (flat, v) in buf.iter_mut().enumerate() {
                    let wx = self.freqs[0][flat / ny];
                    let wy = self.freqs[1][flat % ny];
                    *v *= m((wx * wx + wy * wy).sqrt());
                }
            }
            _ => unreachable!(),
        }
    }

    /// Frequency norm per flat index.
    pub fn freq_norm(&self, flat: usize) -> f64 {
        match self.axes.len() {
            1 => self.freqs[0][flat].abs(),
            2 => {
                let ny = self.axes[1].n;
                let wx = self.freqs[0][flat / ny];
                let wy = self.freqs[1][flat % ny];
                (wx * wx + wy * wy).sqrt()
            }
            _ => unreachable!(),
        }
    }
}
