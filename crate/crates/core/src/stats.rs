//! Distances, tests and reference distributions used by the stationary
//! measure diagnostics.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::function::erf::erf;
use std::f64::consts::PI;

/// One-sample Kolmogorov-Smirnov statistic of `samples` against the CDF `f`.
pub fn ks_statistic(samples: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut s: Vec<f64> = samples.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let cdf = f(*x);
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut xa: Vec<f64> = a.to_vec();
    let mut xb: Vec<f64> = b.to_vec();
    xa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    xb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Permutation p-value for the two-sample KS statistic. Returns
/// `(statistic, p_value)` with `p = (1 + #{perm >= obs}) / (1 + n_perm)`.
pub fn ks_permutation_test<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    n_perm: usize,
    rng: &mut R,
) -> (f64, f64) {
    let observed = two_sample_ks(a, b);
    let mut pool: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let mut exceed = 0usize;
    for _ in 0..n_perm {
        pool.shuffle(rng);
        let stat = two_sample_ks(&pool[..a.len()], &pool[a.len()..]);
        if stat >= observed {
            exceed += 1;
        }
    }
    (observed, (1 + exceed) as f64 / (1 + n_perm) as f64)
}

/// Energy distance between d-dimensional samples stored row-major.
/// O(n^2); callers should subsample large inputs.
pub fn energy_distance(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let na = a.len() / dim;
    let nb = b.len() / dim;
    assert!(na > 0 && nb > 0);
    let dist = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    };
    let mut ab = 0.0;
    for i in 0..na {
        for j in 0..nb {
            ab += dist(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]);
        }
    }
    ab /= (na * nb) as f64;
    let mut aa = 0.0;
    for i in 0..na {
        for j in (i + 1)..na {
            aa += dist(&a[i * dim..(i + 1) * dim], &a[j * dim..(j + 1) * dim]);
        }
    }
    aa *= 2.0 / (na * na) as f64;
    let mut bb = 0.0;
    for i in 0..nb {
        for j in (i + 1)..nb {
            bb += dist(&b[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]);
        }
    }
    bb *= 2.0 / (nb * nb) as f64;
    (2.0 * ab - aa - bb).max(0.0)
}

/// Permutation p-value for the energy distance.
pub fn energy_permutation_test<R: Rng + ?Sized>(
    a: &[f64],
    b: &[f64],
    dim: usize,
    n_perm: usize,
    rng: &mut R,
) -> (f64, f64) {
    let observed = energy_distance(a, b, dim);
    let na = a.len() / dim;
    let n = na + b.len() / dim;
    let mut idx: Vec<usize> = (0..n).collect();
    let pool: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let row = |i: usize| &pool[i * dim..(i + 1) * dim];
    let mut exceed = 0usize;
    let mut pa = vec![0.0; na * dim];
    let mut pb = vec![0.0; (n - na) * dim];
    for _ in 0..n_perm {
        idx.shuffle(rng);
        for (k, &i) in idx[..na].iter().enumerate() {
            pa[k * dim..(k + 1) * dim].copy_from_slice(row(i));
        }
        for (k, &i) in idx[na..].iter().enumerate() {
            pb[k * dim..(k + 1) * dim].copy_from_slice(row(i));
        }
        if energy_distance(&pa, &pb, dim) >= observed {
            exceed += 1;
        }
    }
    (observed, (1 + exceed) as f64 / (1 + n_perm) as f64)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

pub fn cauchy_cdf(x: f64, location: f64, scale: f64) -> f64 {
    0.5 + ((x - location) / scale).atan() / PI
}

pub fn cauchy_quantile(p: f64, location: f64, scale: f64) -> f64 {
    location + scale * (PI * (p - 0.5)).tan()
}

/// Weighted quantile of |values| style data; `pairs` are (value, weight)
/// with positive weights. Used for tightness radii.
pub fn weighted_quantile(pairs: &mut [(f64, f64)], q: f64) -> f64 {
    assert!(!pairs.is_empty());
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let target = q * total;
    let mut acc = 0.0;
    for (v, w) in pairs.iter() {
        acc += *w;
        if acc >= target {
            return *v;
        }
    }
    pairs.last().unwrap().0
}

/// Ordinary least squares fit y = intercept + slope * x, with the standard
/// error of both coefficients. Optional weights (1/var).
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
}

pub fn weighted_line_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len();
    let w: Vec<f64> = match weights {
        Some(ws) => ws.to_vec(),
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let mx: f64 = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my: f64 = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(&w).map(|(x, w)| w * (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(&w)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // residual variance estimate (unit-weight variance for weighted case)
    let dof = (n as f64 - 2.0).max(1.0);
    let s2: f64 = xs
        .iter()
        .zip(ys)
        .zip(&w)
        .map(|((x, y), w)| {
            let r = y - intercept - slope * x;
            w * r * r
        })
        .sum::<f64>()
        / dof;
    LineFit {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / sw + mx * mx / sxx)).sqrt(),
    }
}
