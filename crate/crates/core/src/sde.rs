//! Euler scheme with jumps, replayable noise and the cocycle identity.
//!
//! One step over `[k dt, (k+1) dt)`:
//!
//! 1. continuous part: `x += b(x) dt + sigma(x) dW_k + c(x) dt + s G_k`
//!    where `c` is the small-jump compensator drift and `s G_k` the Gaussian
//!    stand-in for the sub-threshold jump martingale;
//! 2. the step's jumps, in offset order: `x += f(x-, u)` (small) or
//!    `x += g(x-, u)` (large).
//!
//! Every update is a deterministic function of the pre-step state and the
//! step's slice of the realization, which is what makes the cocycle identity
//! hold exactly (not approximately) on aligned grids.

use crate::coeffs::{CoefficientSet, Compensator, JumpSpec};
use crate::error::{Error, Result};
use crate::noise::{JumpEvent, JumpKind, NoiseRealization};
use crate::util::{all_finite, norm};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// States larger than this flag the path as exploded instead of propagating
/// infinities into the statistics.
pub const EXPLOSION_GUARD: f64 = 1e12;

/// A simulated trajectory on the grid; `states[k]` is the cadlag value at
/// `times[k]` (post-jump at jump instants).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub dt: f64,
    pub dim: usize,
    pub times: Vec<f64>,
    /// `(n_steps + 1) x dim`, row-major, including the initial state.
    pub states: Vec<f64>,
    pub jump_log: Vec<JumpEvent>,
    pub exploded: bool,
}

impl PathSample {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn state_at(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state_at(self.n_steps())
    }

    /// CSV rows `time,state_1,...,state_d`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "time")?;
        for i in 1..=self.dim {
            write!(w, ",state_{i}")?;
        }
        writeln!(w)?;
        for (k, t) in self.times.iter().enumerate() {
            write!(w, "{t}")?;
            for v in self.state_at(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

struct StepBuffers {
    bx: Vec<f64>,
    sig: Vec<f64>,
    comp: Vec<f64>,
    jump: Vec<f64>,
    prev: Vec<f64>,
}

impl StepBuffers {
    fn new(d: usize, m: usize) -> Self {
        Self {
            bx: vec![0.0; d],
            sig: vec![0.0; d * m],
            comp: vec![0.0; d],
            jump: vec![0.0; d],
            prev: vec![0.0; d],
        }
    }
}

/// Per-unit-time standard deviation multiplier of the stored small-Gaussian
/// normals (applied as `sqrt(dt) * s * G`).
fn small_gauss_sd(coeffs: &CoefficientSet) -> f64 {
    match &coeffs.jump_space {
        JumpSpec::Stable { params, mode } => {
            (params.small_gauss_variance(*mode) / coeffs.dim as f64).sqrt()
        }
        _ => 0.0,
    }
}

/// Compensator drift `-int_{U0} f(x, u) nu(du)` written into `out`.
fn compensator_drift(
    coeffs: &CoefficientSet,
    nodes: &Option<Vec<(Vec<f64>, f64)>>,
    x: &[f64],
    buf: &mut [f64],
    out: &mut [f64],
) {
    out.fill(0.0);
    if let Some(nodes) = nodes {
        for (mark, w) in nodes {
            (coeffs.small_jump)(x, mark, buf);
            for (o, b) in out.iter_mut().zip(buf.iter()) {
                *o -= w * b;
            }
        }
    }
}

/// Precomputed compensator quadrature nodes, if the jump space needs them.
fn compensator_nodes(coeffs: &CoefficientSet) -> Option<Vec<(Vec<f64>, f64)>> {
    match &coeffs.jump_space {
        // symmetric stable noise with additive marks: compensator vanishes
        JumpSpec::Stable { .. } => None,
        JumpSpec::None => None,
        JumpSpec::Finite { small, .. } => small.as_ref().and_then(|m| match m.compensator {
            Compensator::Zero => None,
            Compensator::Quadrature => Some(m.nodes(coeffs.dim)),
        }),
    }
}

/// Core stepping loop. Calls `on_state(k, x)` after state `k` is final
/// (k = 0 is the initial condition). Returns whether the path exploded.
pub(crate) fn drive_path(
    x0: &[f64],
    coeffs: &CoefficientSet,
    noise: &NoiseRealization,
    dt: f64,
    mut jump_log: Option<&mut Vec<JumpEvent>>,
    mut on_state: impl FnMut(usize, &[f64]),
) -> Result<bool> {
    let d = coeffs.dim;
    let m = coeffs.noise_dim;
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    if noise.state_dim != d || noise.noise_dim != m {
        return Err(Error::GridMismatch(
            "noise dimensions do not match the coefficient set".into(),
        ));
    }
    if !(dt > 0.0) || (noise.dt - dt).abs() > f64::EPSILON * dt {
        return Err(Error::GridMismatch(format!(
            "noise grid step {} does not equal dt {}",
            noise.dt, dt
        )));
    }

    let mut x = x0.to_vec();
    let mut buf = StepBuffers::new(d, m);
    let nodes = compensator_nodes(coeffs);
    let sg_sd = small_gauss_sd(coeffs) * dt.sqrt();
    let mut exploded = false;
    let mut ptr = 0usize;

    on_state(0, &x);
    for k in 0..noise.n_steps {
        if !exploded {
            buf.prev.copy_from_slice(&x);
            (coeffs.drift)(&x, &mut buf.bx);
            compensator_drift(coeffs, &nodes, &x, &mut buf.jump, &mut buf.comp);
            if let Some(sigma) = &coeffs.diffusion {
                sigma(&x, &mut buf.sig);
                let dw = &noise.brownian[k * m..(k + 1) * m];
                for i in 0..d {
                    let mut acc = 0.0;
                    for (j, dwj) in dw.iter().enumerate() {
                        acc += buf.sig[i * m + j] * dwj;
                    }
                    x[i] += (buf.bx[i] + buf.comp[i]) * dt + acc;
                }
            } else {
                for i in 0..d {
                    x[i] += (buf.bx[i] + buf.comp[i]) * dt;
                }
            }
            if sg_sd > 0.0 {
                let g = &noise.small_gauss[k * d..(k + 1) * d];
                for i in 0..d {
                    x[i] += sg_sd * g[i];
                }
            }
            while ptr < noise.jumps.len() && noise.jumps[ptr].step == k {
                let ev = &noise.jumps[ptr];
                match ev.kind {
                    JumpKind::Small => (coeffs.small_jump)(&x, &ev.mark, &mut buf.jump),
                    JumpKind::Large => (coeffs.large_jump)(&x, &ev.mark, &mut buf.jump),
                }
                for i in 0..d {
                    x[i] += buf.jump[i];
                }
                if let Some(log) = jump_log.as_deref_mut() {
                    log.push(ev.clone());
                }
                ptr += 1;
            }
            if !all_finite(&x) || x.iter().any(|v| v.abs() > EXPLOSION_GUARD) {
                x.copy_from_slice(&buf.prev);
                exploded = true;
            }
        } else {
            // skip the jump pointer past frozen steps
            while ptr < noise.jumps.len() && noise.jumps[ptr].step == k {
                ptr += 1;
            }
        }
        on_state(k + 1, &x);
    }
    Ok(exploded)
}

/// Runs the Euler scheme against a stored realization. Deterministic given
/// `(x0, noise)`.
pub fn simulate_path(
    x0: &[f64],
    coeffs: &CoefficientSet,
    noise: &NoiseRealization,
    dt: f64,
) -> Result<PathSample> {
    let d = coeffs.dim;
    let n = noise.n_steps;
    let mut states = Vec::with_capacity((n + 1) * d);
    let mut jump_log = Vec::new();
    let exploded = drive_path(x0, coeffs, noise, dt, Some(&mut jump_log), |_, x| {
        states.extend_from_slice(x)
    })?;
    Ok(PathSample {
        dt,
        dim: d,
        times: (0..=n).map(|k| k as f64 * dt).collect(),
        states,
        jump_log,
        exploded,
    })
}

/// Number of grid steps in `horizon`, requiring divisibility by `dt`.
pub fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(Error::invalid("dt and horizon must be positive"));
    }
    let k = (horizon / dt).round();
    if (k * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "dt {dt} does not divide horizon {horizon}"
        )));
    }
    Ok(k as usize)
}

/// Independent paths from split seed streams; bit-identical across runs and
/// thread counts (results are collected in path order).
pub fn simulate_ensemble(
    x0: &[f64],
    coeffs: &CoefficientSet,
    n_paths: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<Vec<PathSample>> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be >= 1"));
    }
    let n_steps = steps_for(horizon, dt)?;
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let noise = NoiseRealization::generate(
                &coeffs.jump_space,
                coeffs.dim,
                coeffs.noise_dim,
                dt,
                n_steps,
                seed,
                i as u64,
            )?;
            simulate_path(x0, coeffs, &noise, dt)
        })
        .collect()
}

/// Ensemble states at the selected grid steps, without storing whole paths.
/// Returns one `n_paths * dim` row-major block per requested step, plus the
/// per-path explosion flags.
pub fn ensemble_snapshots(
    x0: &[f64],
    coeffs: &CoefficientSet,
    n_paths: usize,
    dt: f64,
    n_steps: usize,
    record_steps: &[usize],
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    if record_steps.iter().any(|&k| k > n_steps) {
        return Err(Error::invalid("record step beyond horizon"));
    }
    let d = coeffs.dim;
    let per_path: Vec<Result<(Vec<f64>, bool)>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let noise = NoiseRealization::generate(
                &coeffs.jump_space,
                coeffs.dim,
                coeffs.noise_dim,
                dt,
                n_steps,
                seed,
                i as u64,
            )?;
            let mut rec = vec![0.0; record_steps.len() * d];
            let exploded = drive_path(x0, coeffs, &noise, dt, None, |k, x| {
                // record_steps is sorted and short; linear scan is fine
                for (slot, &rk) in record_steps.iter().enumerate() {
                    if rk == k {
                        rec[slot * d..(slot + 1) * d].copy_from_slice(x);
                    }
                }
            })?;
            Ok((rec, exploded))
        })
        .collect();
    let mut blocks = vec![vec![0.0; n_paths * d]; record_steps.len()];
    let mut exploded = vec![false; n_paths];
    for (i, r) in per_path.into_iter().enumerate() {
        let (rec, ex) = r?;
        exploded[i] = ex;
        for slot in 0..record_steps.len() {
            blocks[slot][i * d..(i + 1) * d].copy_from_slice(&rec[slot * d..(slot + 1) * d]);
        }
    }
    Ok((blocks, exploded))
}

/// Deviation of the perfect-cocycle identity
/// `phi(s + t, omega) x0  vs  phi(t, theta_s omega)(phi(s, omega) x0)`,
/// max over coordinates of the final states. Zero exactly on aligned grids.
pub fn cocycle_check(
    x0: &[f64],
    s: f64,
    t: f64,
    coeffs: &CoefficientSet,
    noise: &NoiseRealization,
    dt: f64,
) -> Result<f64> {
    let ks = noise.steps_of(s)?;
    let kt = noise.steps_of(t)?;
    if ks + kt > noise.n_steps {
        return Err(Error::invalid("s + t exceeds the noise horizon"));
    }
    let one = simulate_path(x0, coeffs, &noise.truncate_steps(ks + kt), dt)?;
    let first = simulate_path(x0, coeffs, &noise.truncate_steps(ks), dt)?;
    let second = simulate_path(
        first.final_state(),
        coeffs,
        &noise.shift_steps(ks).truncate_steps(kt),
        dt,
    )?;
    let dev = one
        .final_state()
        .iter()
        .zip(second.final_state())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(dev)
}

/// Margin report of one hypothesis inequality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisMargin {
    pub name: String,
    /// Worst (smallest) margin seen; negative means falsified.
    pub worst_margin: f64,
    pub falsified: bool,
    pub evaluations: usize,
    /// Argument realizing the worst margin.
    pub witness: Vec<f64>,
}

/// Sampled falsification report. A nonnegative margin is *not* a proof of
/// the hypothesis; only negative margins are conclusive (counterexamples).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub margins: Vec<HypothesisMargin>,
    pub side_conditions: Vec<(String, f64)>,
    pub not_a_proof: bool,
    pub g_homeomorphism_asserted: bool,
}

impl AssumptionReport {
    pub fn falsified(&self) -> bool {
        self.margins.iter().any(|m| m.falsified)
            || self.side_conditions.iter().any(|(_, m)| *m < 0.0)
    }
}

/// Evaluates the hypothesis inequalities on `n` sampled point pairs inside
/// the ball of `radius`, with marks drawn from the jump space.
pub fn falsify_assumptions(
    coeffs: &CoefficientSet,
    constants: &crate::coeffs::AssumptionConstants,
    radius: f64,
    n: usize,
    seed: u64,
) -> Result<AssumptionReport> {
    use crate::rng::stream_rng;
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let d = coeffs.dim;
    let m = coeffs.noise_dim;
    let mut rng = stream_rng(seed, 0);
    let log_term = |r: f64| (1.0 / r.max(1e-300) + std::f64::consts::E).ln();

    let mut bx = vec![0.0; d];
    let mut by = vec![0.0; d];
    let mut sx = vec![0.0; d * m];
    let mut sy = vec![0.0; d * m];
    let mut fx = vec![0.0; d];
    let mut fy = vec![0.0; d];

    let mut margins: Vec<HypothesisMargin> = Vec::new();
    let mut record = |name: &str, margin: f64, witness: &[f64], list: &mut Vec<HypothesisMargin>| {
        match list.iter_mut().find(|h| h.name == name) {
            Some(h) => {
                h.evaluations += 1;
                if margin < h.worst_margin {
                    h.worst_margin = margin;
                    h.witness = witness.to_vec();
                    h.falsified = margin < 0.0;
                }
            }
            None => list.push(HypothesisMargin {
                name: name.into(),
                worst_margin: margin,
                falsified: margin < 0.0,
                evaluations: 1,
                witness: witness.to_vec(),
            }),
        }
    };

    let sample_point = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<f64> {
        (0..d)
            .map(|_| radius * (2.0 * rand::Rng::gen::<f64>(rng) - 1.0))
            .collect()
    };
    // marks representing U0 for (H_f)
    let sample_small_mark = |rng: &mut rand_chacha::ChaCha12Rng| -> Option<Vec<f64>> {
        match &coeffs.jump_space {
            JumpSpec::None => None,
            JumpSpec::Stable { params, .. } => {
                let r = params.sample_radius_in_band(1e-6, params.delta(), rng);
                Some(params.sample_direction(rng).iter().map(|x| x * r).collect())
            }
            JumpSpec::Finite { small, .. } => small.as_ref().map(|mm| mm.law.sample(d, rng)),
        }
    };

    for _ in 0..n {
        let x = sample_point(&mut rng);
        let y = sample_point(&mut rng);
        let dist = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist == 0.0 {
            continue;
        }
        let lt = log_term(dist);
        let mut witness = x.clone();
        witness.extend_from_slice(&y);

        (coeffs.drift)(&x, &mut bx);
        (coeffs.drift)(&y, &mut by);
        let bdiff = bx
            .iter()
            .zip(&by)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        record("H_b", constants.c_b * dist * lt - bdiff, &witness, &mut margins);

        if let Some(sigma) = &coeffs.diffusion {
            sigma(&x, &mut sx);
            sigma(&y, &mut sy);
            let sdiff2: f64 = sx.iter().zip(&sy).map(|(a, b)| (a - b) * (a - b)).sum();
            record(
                "H_sigma",
                constants.c_sigma * dist * dist * lt - sdiff2,
                &witness,
                &mut margins,
            );
        }

        if let Some(mark) = sample_small_mark(&mut rng) {
            (coeffs.small_jump)(&x, &mark, &mut fx);
            (coeffs.small_jump)(&y, &mark, &mut fy);
            let fdiff = fx
                .iter()
                .zip(&fy)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            record(
                "H_f lipschitz",
                constants.l_bound * dist - fdiff,
                &witness,
                &mut margins,
            );
            let zero = vec![0.0; d];
            (coeffs.small_jump)(&zero, &mark, &mut fx);
            record(
                "H_f at origin",
                constants.l_bound - norm(&fx),
                &mark,
                &mut margins,
            );
        }

        // (H'_f): integrated p-moment conditions via quadrature over U0
        if let JumpSpec::Finite { small: Some(meas), .. } = &coeffs.jump_space {
            let nodes = meas.nodes(d);
            for (p, cp) in &constants.c_p {
                let mut int_diff = 0.0;
                let mut int_growth = 0.0;
                for (mark, w) in &nodes {
                    (coeffs.small_jump)(&x, mark, &mut fx);
                    (coeffs.small_jump)(&y, mark, &mut fy);
                    let fd = fx
                        .iter()
                        .zip(&fy)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    int_diff += w * fd.powf(*p);
                    int_growth += w * norm(&fx).powf(*p);
                }
                record(
                    &format!("H'_f lipschitz p={p}"),
                    cp * dist.powf(*p) * lt - int_diff,
                    &witness,
                    &mut margins,
                );
                record(
                    &format!("H'_f growth p={p}"),
                    cp * (1.0 + norm(&x)).powf(*p) - int_growth,
                    &x,
                    &mut margins,
                );
            }
        }
    }

    Ok(AssumptionReport {
        margins,
        side_conditions: constants.side_conditions(d),
        not_a_proof: true,
        g_homeomorphism_asserted: constants.g_homeomorphism_asserted,
    })
}
