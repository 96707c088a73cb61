//! C^2 test functions with analytic gradients and Hessians.

use crate::error::{Error, Result};
use std::sync::Arc;

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Twice differentiable test function with compact support (or bounded with
/// decay when `support_radius` is infinite).
#[derive(Clone)]
pub struct TestFunction {
    pub dim: usize,
    pub value: ValueFn,
    pub gradient: GradFn,
    /// `dim x dim` row-major.
    pub hessian: HessFn,
    /// Support is contained in the ball of this radius around `center`;
    /// infinity means "bounded with decay, no compact support".
    pub support_radius: f64,
    pub center: Vec<f64>,
    /// Sup norm; used for analytic tail bounds of jump integrals.
    pub sup_value: f64,
    pub label: String,
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    pub fn hess(&self, x: &[f64], out: &mut [f64]) {
        (self.hessian)(x, out)
    }

    /// Frobenius norm of the Hessian at `x`.
    pub fn hess_norm(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        let mut h = vec![0.0; d * d];
        self.hess(x, &mut h);
        h.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Constant function (support radius infinity, zero derivatives).
    pub fn constant(dim: usize, c: f64) -> Self {
        Self {
            dim,
            value: Arc::new(move |_x| c),
            gradient: Arc::new(|_x, out| out.fill(0.0)),
            hessian: Arc::new(|_x, out| out.fill(0.0)),
            support_radius: f64::INFINITY,
            center: vec![0.0; dim],
            sup_value: c.abs(),
            label: format!("const({c})"),
        }
    }

    /// Smooth bump `A exp(1 - 1/(1 - r^2))` with `r = |x - c| / radius`,
    /// infinitely differentiable, supported on the closed ball.
    pub fn bump(dim: usize, center: Vec<f64>, radius: f64, amplitude: f64) -> Self {
        assert_eq!(center.len(), dim);
        assert!(radius > 0.0);
        let c = center.clone();
        let c2 = center.clone();
        let c3 = center.clone();
        let r2inv = 1.0 / (radius * radius);
        let val = move |x: &[f64]| -> f64 {
            let s: f64 = x
                .iter()
                .zip(&c)
                .map(|(xi, ci)| (xi - ci) * (xi - ci))
                .sum::<f64>()
                * r2inv;
            if s >= 1.0 {
                0.0
            } else {
                amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
            }
        };
        let val_g = val.clone();
        let val_h = val.clone();
        Self {
            dim,
            value: Arc::new(val),
            gradient: Arc::new(move |x: &[f64], out: &mut [f64]| {
                let s: f64 = x
                    .iter()
                    .zip(&c2)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum::<f64>()
                    * r2inv;
                if s >= 1.0 {
                    out.fill(0.0);
                    return;
                }
                let h = val_g(x);
                let w = -1.0 / ((1.0 - s) * (1.0 - s));
                for (o, (xi, ci)) in out.iter_mut().zip(x.iter().zip(&c2)) {
                    *o = h * w * 2.0 * (xi - ci) * r2inv;
                }
            }),
            hessian: Arc::new(move |x: &[f64], out: &mut [f64]| {
                let d = x.len();
                let s: f64 = x
                    .iter()
                    .zip(&c3)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum::<f64>()
                    * r2inv;
                if s >= 1.0 {
                    out.fill(0.0);
                    return;
                }
                let h = val_h(x);
                let om = 1.0 - s;
                let w = -1.0 / (om * om);
                let dw = -2.0 / (om * om * om);
                for i in 0..d {
                    let di = (x[i] - c3[i]) * 2.0 * r2inv;
                    for j in 0..d {
                        let dj = (x[j] - c3[j]) * 2.0 * r2inv;
                        let mut v = h * (w * w + dw) * di * dj;
                        if i == j {
                            v += h * w * 2.0 * r2inv;
                        }
                        out[i * d + j] = v;
                    }
                }
            }),
            support_radius: radius,
            center: center.clone(),
            sup_value: amplitude.abs(),
            label: format!("bump(center={center:?}, radius={radius}, amp={amplitude})"),
        }
    }

    /// One-dimensional `y^2` inside `|y| <= inner`, smoothly windowed to zero
    /// by `|y| = outer` (quintic smoothstep transition, C^2 everywhere).
    pub fn windowed_quadratic(inner: f64, outer: f64) -> Self {
        assert!(0.0 < inner && inner < outer);
        let win = move |r: f64| -> (f64, f64, f64) {
            // (chi, dchi/dr, d2chi/dr2)
            if r <= inner {
                (1.0, 0.0, 0.0)
            } else if r >= outer {
                (0.0, 0.0, 0.0)
            } else {
                let w = outer - inner;
                let t = (r - inner) / w;
                let s = 6.0 * t.powi(5) - 15.0 * t.powi(4) + 10.0 * t.powi(3);
                let ds = (30.0 * t.powi(4) - 60.0 * t.powi(3) + 30.0 * t.powi(2)) / w;
                let d2s = (120.0 * t.powi(3) - 180.0 * t.powi(2) + 60.0 * t) / (w * w);
                (1.0 - s, -ds, -d2s)
            }
        };
        Self {
            dim: 1,
            value: Arc::new(move |x: &[f64]| {
                let r = x[0].abs();
                let (chi, _, _) = win(r);
                x[0] * x[0] * chi
            }),
            gradient: Arc::new(move |x: &[f64], out: &mut [f64]| {
                let y = x[0];
                let r = y.abs();
                let sgn = if y >= 0.0 { 1.0 } else { -1.0 };
                let (chi, dchi, _) = win(r);
                out[0] = 2.0 * y * chi + y * y * dchi * sgn;
            }),
            hessian: Arc::new(move |x: &[f64], out: &mut [f64]| {
                let y = x[0];
                let r = y.abs();
                let sgn = if y >= 0.0 { 1.0 } else { -1.0 };
                let (chi, dchi, d2chi) = win(r);
                out[0] = 2.0 * chi + 4.0 * y * dchi * sgn + y * y * d2chi;
            }),
            support_radius: outer,
            center: vec![0.0],
            sup_value: inner * inner * 1.2 + outer * outer, // safe upper bound
            label: format!("windowed y^2 (inner={inner}, outer={outer})"),
        }
    }

    /// Verifies gradient and Hessian against central finite differences at
    /// the given points.
    pub fn fd_check(&self, points: &[Vec<f64>], step: f64, rtol: f64) -> Result<()> {
        let d = self.dim;
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for p in points {
            self.grad(p, &mut grad);
            self.hess(p, &mut hess);
            let scale_g = grad.iter().map(|g| g.abs()).fold(0.0, f64::max).max(1e-3);
            let mut xp = p.clone();
            let mut xm = p.clone();
            for i in 0..d {
                xp[i] = p[i] + step;
                xm[i] = p[i] - step;
                let fd = (self.eval(&xp) - self.eval(&xm)) / (2.0 * step);
                if (fd - grad[i]).abs() > rtol * scale_g.max(fd.abs()) {
                    return Err(Error::domain(format!(
                        "{}: gradient mismatch at {p:?}[{i}]: analytic {} vs fd {fd}",
                        self.label, grad[i]
                    )));
                }
                // diagonal Hessian entry by second difference
                let f0 = self.eval(p);
                let fd2 = (self.eval(&xp) - 2.0 * f0 + self.eval(&xm)) / (step * step);
                let scale_h = hess[i * d + i].abs().max(1.0);
                if (fd2 - hess[i * d + i]).abs() > 100.0 * rtol * scale_h.max(fd2.abs()) {
                    return Err(Error::domain(format!(
                        "{}: hessian mismatch at {p:?}[{i}]: analytic {} vs fd {fd2}",
                        self.label,
                        hess[i * d + i]
                    )));
                }
                xp[i] = p[i];
                xm[i] = p[i];
            }
        }
        Ok(())
    }
}

/// Default battery of three smooth bumps used by the weak-residual and
/// generator-consistency diagnostics.
pub fn bump_battery(dim: usize) -> Vec<TestFunction> {
    let mut center_pos = vec![0.0; dim];
    center_pos[0] = 1.0;
    let mut center_neg = vec![0.0; dim];
    center_neg[0] = -1.0;
    vec![
        TestFunction::bump(dim, vec![0.0; dim], 2.0, 1.0),
        TestFunction::bump(dim, center_pos, 1.5, 1.0),
        TestFunction::bump(dim, center_neg, 1.5, 1.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let h = TestFunction::bump(1, vec![0.3], 1.7, 2.0);
        let points: Vec<Vec<f64>> = [-0.9, -0.2, 0.3, 0.8, 1.4]
            .iter()
            .map(|&x| vec![x])
            .collect();
        h.fd_check(&points, 1e-4, 1e-5).unwrap();
        // outside the support everything vanishes
        assert_eq!(h.eval(&[2.1]), 0.0);
        let mut g = [1.0];
        h.grad(&[2.1], &mut g);
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn bump_2d_derivatives() {
        let h = TestFunction::bump(2, vec![0.0, 0.5], 2.0, 1.0);
        let points = vec![vec![0.1, 0.2], vec![-0.5, 0.9], vec![1.0, 1.0]];
        h.fd_check(&points, 1e-4, 1e-5).unwrap();
    }

    #[test]
    fn windowed_quadratic_is_plain_square_inside() {
        let h = TestFunction::windowed_quadratic(2.0, 4.0);
        assert_eq!(h.eval(&[1.5]), 2.25);
        let mut g = [0.0];
        h.grad(&[1.5], &mut g);
        assert_eq!(g[0], 3.0);
        let mut hess = [0.0];
        h.hess(&[1.5], &mut hess);
        assert_eq!(hess[0], 2.0);
        assert_eq!(h.eval(&[5.0]), 0.0);
        let points: Vec<Vec<f64>> = [-3.5, -1.0, 0.4, 2.5, 3.2]
            .iter()
            .map(|&x| vec![x])
            .collect();
        h.fd_check(&points, 1e-4, 1e-4).unwrap();
    }

    #[test]
    fn battery_has_three_bumps() {
        let b = bump_battery(1);
        assert_eq!(b.len(), 3);
        for h in &b {
            assert!(h.support_radius.is_finite());
        }
    }
}
