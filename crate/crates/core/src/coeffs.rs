//! Coefficient maps and jump-space description for the jump SDE
//!
//! ```text
//! dX = b(X) dt + sigma(X) dW
//!      + int_{U0} f(X-, u) N~(dt, du) + int_{U \ U0} g(X-, u) N(dt, du)
//! ```
//!
//! `U0 = {|u| <= delta}` carries the compensated part, its complement the
//! plain Poisson part.

use crate::error::{Error, Result};
use crate::levy::{SmallJumpMode, StableParams};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// State-dependent coefficient writing its value into an output buffer.
pub type StateFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Jump coefficient `(state, mark) -> displacement`.
pub type JumpFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Mark distribution of a finite-activity jump part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MarkLaw {
    /// Uniform on `[lo, hi]`, one-dimensional.
    UniformInterval { lo: f64, hi: f64 },
    /// Uniform on the centered ball of the given radius.
    UniformBall { radius: f64 },
}

impl MarkLaw {
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        match self {
            MarkLaw::UniformInterval { lo, hi } => {
                assert_eq!(dim, 1, "UniformInterval is one-dimensional");
                vec![lo + (hi - lo) * rng.gen::<f64>()]
            }
            MarkLaw::UniformBall { radius } => loop {
                let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
                if crate::util::norm_sq(&v) <= 1.0 {
                    return v.into_iter().map(|x| x * radius).collect();
                }
            },
        }
    }

    /// Quadrature nodes `(mark, weight)` with weights summing to 1,
    /// for integrating smooth functions against the normalized law.
    pub fn quadrature(&self, dim: usize, n: usize) -> Vec<(Vec<f64>, f64)> {
        match self {
            MarkLaw::UniformInterval { lo, hi } => {
                assert_eq!(dim, 1);
                gauss_legendre(n)
                    .into_iter()
                    .map(|(x, w)| (vec![lo + (hi - lo) * (x + 1.0) / 2.0], w / 2.0))
                    .collect()
            }
            MarkLaw::UniformBall { radius } => {
                match dim {
                    1 => gauss_legendre(n)
                        .into_iter()
                        .map(|(x, w)| (vec![radius * x], w / 2.0))
                        .collect(),
                    2 => {
                        // tensor radial x angular grid; radial weight r dr
                        let nr = n.max(4);
                        let ntheta = 2 * n.max(4);
                        let mut nodes = Vec::new();
                        for (x, w) in gauss_legendre(nr) {
                            let r = radius * (x + 1.0) / 2.0;
                            let wr = w / 2.0 * 2.0 * r / radius; // density 2r/R^2 scaled
                            for k in 0..ntheta {
                                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5)
                                    / ntheta as f64;
                                nodes.push((
                                    vec![r * th.cos(), r * th.sin()],
                                    wr / ntheta as f64,
                                ));
                            }
                        }
                        nodes
                    }
                    _ => panic!("quadrature for UniformBall implemented for d <= 2"),
                }
            }
        }
    }
}

/// How the compensator drift of a compensated finite-activity part is
/// obtained during path simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Compensator {
    /// `int f(x, u) nu(du) = 0` holds identically (symmetric law with odd
    /// `f` in the mark); skip the per-step integral.
    Zero,
    /// Evaluate `-int f(x, u) nu(du)` by quadrature at every step.
    Quadrature,
}

/// One finite-activity component of the jump measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMeasure {
    /// Total mass of `nu` on this component.
    pub rate: f64,
    pub law: MarkLaw,
    pub compensator: Compensator,
    /// Node count for generator/compensator quadrature.
    pub quad_nodes: usize,
}

impl FiniteMeasure {
    pub fn new(rate: f64, law: MarkLaw) -> Self {
        Self {
            rate,
            law,
            compensator: Compensator::Quadrature,
            quad_nodes: 64,
        }
    }

    pub fn with_zero_compensator(mut self) -> Self {
        self.compensator = Compensator::Zero;
        self
    }

    /// Nodes `(mark, weight)` with weights summing to `rate`.
    pub fn nodes(&self, dim: usize) -> Vec<(Vec<f64>, f64)> {
        self.law
            .quadrature(dim, self.quad_nodes)
            .into_iter()
            .map(|(m, w)| (m, w * self.rate))
            .collect()
    }
}

/// The jump space `(U, nu)` with its split `U0 = {|u| <= delta}`.
///
/// `Stable` means additive symmetric alpha-stable noise (`f = g = u`); the
/// small-jump side is realized per `SmallJumpMode`. `Finite` carries
/// explicit finite-activity components for the compensated and plain parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum JumpSpec {
    None,
    Stable {
        params: StableParams,
        mode: SmallJumpMode,
    },
    Finite {
        small: Option<FiniteMeasure>,
        large: Option<FiniteMeasure>,
    },
}

impl JumpSpec {
    /// Mass of `nu` restricted to `U \ U0`; must be finite by construction.
    pub fn large_mass(&self) -> f64 {
        match self {
            JumpSpec::None => 0.0,
            JumpSpec::Stable { params, .. } => params.large_jump_rate(),
            JumpSpec::Finite { large, .. } => large.as_ref().map_or(0.0, |m| m.rate),
        }
    }

    pub fn has_jumps(&self) -> bool {
        match self {
            JumpSpec::None => false,
            JumpSpec::Stable { .. } => true,
            JumpSpec::Finite { small, large } => small.is_some() || large.is_some(),
        }
    }

    /// Second moment `int |u|^2 nu(du)`; infinite for stable noise.
    pub fn second_moment(&self) -> f64 {
        match self {
            JumpSpec::None => 0.0,
            JumpSpec::Stable { .. } => f64::INFINITY,
            JumpSpec::Finite { small, large } => {
                let part = |m: &Option<FiniteMeasure>, dim: usize| {
                    m.as_ref().map_or(0.0, |m| {
                        m.nodes(dim)
                            .iter()
                            .map(|(u, w)| w * crate::util::norm_sq(u))
                            .sum()
                    })
                };
                // dimension known only to the owner; 1-d laws dominate here
                let dim = match (small, large) {
                    (Some(m), _) | (_, Some(m)) => match m.law {
                        MarkLaw::UniformInterval { .. } => 1,
                        MarkLaw::UniformBall { .. } => 1,
                    },
                    _ => 1,
                };
                part(small, dim) + part(large, dim)
            }
        }
    }
}

/// Complete coefficient description of the SDE.
#[derive(Clone)]
pub struct CoefficientSet {
    pub dim: usize,
    pub noise_dim: usize,
    pub drift: StateFn,
    /// `d x m` matrix written row-major; `None` means zero diffusion.
    pub diffusion: Option<StateFn>,
    pub small_jump: JumpFn,
    pub large_jump: JumpFn,
    pub jump_space: JumpSpec,
}

fn additive_jump() -> JumpFn {
    Arc::new(|_x: &[f64], u: &[f64], out: &mut [f64]| out.copy_from_slice(u))
}

impl CoefficientSet {
    /// Pure drift system; diffusion and jumps start empty.
    pub fn deterministic(dim: usize, drift: StateFn) -> Self {
        Self {
            dim,
            noise_dim: dim,
            drift,
            diffusion: None,
            small_jump: additive_jump(),
            large_jump: additive_jump(),
            jump_space: JumpSpec::None,
        }
    }

    /// Linear drift `b(x) = rate * x` (confining for `rate < 0`).
    pub fn linear_drift(dim: usize, rate: f64) -> Self {
        Self::deterministic(
            dim,
            Arc::new(move |x: &[f64], out: &mut [f64]| {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = rate * xi;
                }
            }),
        )
    }

    /// Constant scalar diffusion `sigma * I` (m = d).
    pub fn with_constant_diffusion(mut self, sigma: f64) -> Self {
        let d = self.dim;
        self.noise_dim = d;
        self.diffusion = Some(Arc::new(move |_x: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            for i in 0..d {
                out[i * d + i] = sigma;
            }
        }));
        self
    }

    /// Additive symmetric alpha-stable noise (`f = g = u`).
    pub fn with_stable_noise(mut self, params: StableParams, mode: SmallJumpMode) -> Result<Self> {
        if params.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: params.dim(),
            });
        }
        self.small_jump = additive_jump();
        self.large_jump = additive_jump();
        self.jump_space = JumpSpec::Stable { params, mode };
        Ok(self)
    }

    /// Finite-activity jumps with explicit coefficient maps.
    pub fn with_finite_jumps(
        mut self,
        small: Option<FiniteMeasure>,
        large: Option<FiniteMeasure>,
        f: JumpFn,
        g: JumpFn,
    ) -> Self {
        self.small_jump = f;
        self.large_jump = g;
        self.jump_space = JumpSpec::Finite { small, large };
        self
    }
}

/// Constants asserted by the user for the well-posedness hypotheses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionConstants {
    /// Log-Lipschitz constant of the drift.
    pub c_b: f64,
    /// Log-Lipschitz constant of the squared diffusion modulus.
    pub c_sigma: f64,
    /// `sup_u L(u) <= l_bound < 1` for the small-jump Lipschitz family.
    pub l_bound: f64,
    /// Moment exponent.
    pub q: f64,
    /// `(p, C_p)` pairs for the integrated small-jump condition.
    pub c_p: Vec<(f64, f64)>,
    /// User assertion that `x -> x + g(x, u)` is a homeomorphism; not
    /// checkable numerically, recorded and echoed in reports.
    pub g_homeomorphism_asserted: bool,
}

impl AssumptionConstants {
    /// Arithmetic side conditions: `l_bound < 1`, `q > 4 d`, and
    /// `q delta / (1 - delta)^{q+1} < 1` with `delta = l_bound`.
    pub fn side_conditions(&self, dim: usize) -> Vec<(String, f64)> {
        let d = self.l_bound;
        vec![
            ("l_bound < 1".into(), 1.0 - d),
            ("q > 4d".into(), self.q - 4.0 * dim as f64),
            (
                "q*delta/(1-delta)^(q+1) < 1".into(),
                1.0 - self.q * d / (1.0 - d).powf(self.q + 1.0),
            ),
        ]
    }
}

/// Nodes and weights of n-point Gauss-Legendre quadrature on [-1, 1]
/// (Newton iteration on Legendre polynomials).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = gauss_legendre(16);
        let total: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-13);
        let m2: f64 = nodes.iter().map(|(x, w)| w * x * x).sum();
        assert!((m2 - 2.0 / 3.0).abs() < 1e-13);
        let m6: f64 = nodes.iter().map(|(x, w)| w * x.powi(6)).sum();
        assert!((m6 - 2.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_interval_quadrature_and_sampling_agree() {
        let law = MarkLaw::UniformInterval { lo: -1.0, hi: 1.0 };
        let nodes = law.quadrature(1, 32);
        let m2: f64 = nodes.iter().map(|(u, w)| w * u[0] * u[0]).sum();
        assert!((m2 - 1.0 / 3.0).abs() < 1e-12, "m2 = {m2}");
        let mut rng = stream_rng(9, 0);
        let n = 200_000;
        let mean_sq: f64 = (0..n)
            .map(|_| {
                let u = law.sample(1, &mut rng);
                u[0] * u[0]
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean_sq - 1.0 / 3.0).abs() < 0.005);
    }

    #[test]
    fn finite_measure_nodes_scale_with_rate() {
        let m = FiniteMeasure::new(2.5, MarkLaw::UniformInterval { lo: -1.0, hi: 1.0 });
        let total: f64 = m.nodes(1).iter().map(|(_, w)| w).sum();
        assert!((total - 2.5).abs() < 1e-12);
    }

    #[test]
    fn side_conditions_mirror_hypothesis_arithmetic() {
        let ac = AssumptionConstants {
            c_b: 1.0,
            c_sigma: 1.0,
            l_bound: 0.05,
            q: 5.0,
            c_p: vec![],
            g_homeomorphism_asserted: true,
        };
        let conds = ac.side_conditions(1);
        // q delta/(1-delta)^{q+1} = 5*0.05/0.95^6 = 0.25/0.7351 = 0.34 < 1
        assert!(conds.iter().all(|(_, margin)| *margin > 0.0));
        let bad = AssumptionConstants { l_bound: 0.5, q: 30.0, ..ac };
        assert!(bad.side_conditions(1).iter().any(|(_, m)| *m < 0.0));
    }
}
