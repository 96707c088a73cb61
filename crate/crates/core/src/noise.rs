//! Stored, shiftable noise realizations.
//!
//! A `NoiseRealization` is the computational omega: dense per-step Brownian
//! increments, dense standard normals for the Gaussian stand-in of the
//! small-jump martingale, and a sparse, time-ordered jump list. Jumps are
//! indexed by (step, offset-within-step) rather than absolute instants so
//! that the shift `theta_s` is an exact re-indexing: shifting by `s` and
//! then `t` yields field-by-field the same realization as shifting by
//! `s + t`, with no floating-point drift.

use crate::coeffs::JumpSpec;
use crate::error::{Error, Result};
use crate::levy::SmallJumpMode;
use crate::rng::{self, normal, path_stream, stream_rng};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JumpKind {
    /// Mark in `U0`; routed through `f` with compensation.
    Small,
    /// Mark in `U \ U0`; routed through `g`, uncompensated.
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    /// Grid step the jump falls in; instant = `step * dt + offset`.
    pub step: usize,
    /// Offset within the step, in `(0, dt]`.
    pub offset: f64,
    pub mark: Vec<f64>,
    pub kind: JumpKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub dt: f64,
    pub n_steps: usize,
    /// Brownian dimension m.
    pub noise_dim: usize,
    /// State dimension d (mark and small-Gaussian dimension).
    pub state_dim: usize,
    /// `n_steps * noise_dim` Gaussian increments, each `N(0, dt)`.
    pub brownian: Vec<f64>,
    /// `n_steps * state_dim` standard normals for the small-jump Gaussian
    /// remainder (empty when the jump space has none). Unscaled; the
    /// simulator applies the mode-dependent standard deviation.
    pub small_gauss: Vec<f64>,
    /// Sorted by (step, offset).
    pub jumps: Vec<JumpEvent>,
    pub seed: u64,
    /// Which ensemble slot this realization was generated for.
    pub path_index: u64,
}

impl NoiseRealization {
    /// Samples a fresh realization for `[0, n_steps * dt]`.
    ///
    /// Separate ChaCha streams feed the Brownian grid, the small-jump
    /// normals and the jump list, so realizations for distinct
    /// `(seed, path_index)` pairs are independent and any single field can
    /// be regenerated without touching the others.
    pub fn generate(
        jump_space: &JumpSpec,
        state_dim: usize,
        noise_dim: usize,
        dt: f64,
        n_steps: usize,
        seed: u64,
        path_index: u64,
    ) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
        }
        let mut bm_rng = stream_rng(seed, path_stream(path_index, rng::CHANNEL_BROWNIAN));
        let sqrt_dt = dt.sqrt();
        let brownian: Vec<f64> = (0..n_steps * noise_dim)
            .map(|_| sqrt_dt * normal(&mut bm_rng))
            .collect();

        let needs_small_gauss = matches!(jump_space, JumpSpec::Stable { .. });
        let small_gauss = if needs_small_gauss {
            let mut sg_rng = stream_rng(seed, path_stream(path_index, rng::CHANNEL_SMALL_GAUSS));
            (0..n_steps * state_dim)
                .map(|_| normal(&mut sg_rng))
                .collect()
        } else {
            Vec::new()
        };

        let mut jp_rng = stream_rng(seed, path_stream(path_index, rng::CHANNEL_JUMPS));
        let mut jumps: Vec<JumpEvent> = Vec::new();
        match jump_space {
            JumpSpec::None => {}
            JumpSpec::Stable { params, mode } => {
                let medium_band = match mode {
                    SmallJumpMode::SeriesTruncated { epsilon } if *epsilon < params.delta() => {
                        Some((*epsilon, params.delta()))
                    }
                    _ => None,
                };
                for step in 0..n_steps {
                    let mut step_events: Vec<JumpEvent> = params
                        .sample_band_events(params.delta(), f64::INFINITY, dt, &mut jp_rng)
                        .into_iter()
                        .map(|(offset, mark)| JumpEvent {
                            step,
                            offset,
                            mark,
                            kind: JumpKind::Large,
                        })
                        .collect();
                    if let Some((lo, hi)) = medium_band {
                        step_events.extend(
                            params
                                .sample_band_events(lo, hi, dt, &mut jp_rng)
                                .into_iter()
                                .map(|(offset, mark)| JumpEvent {
                                    step,
                                    offset,
                                    mark,
                                    kind: JumpKind::Small,
                                }),
                        );
                    }
                    step_events.sort_by(|a, b| a.offset.partial_cmp(&b.offset).unwrap());
                    jumps.extend(step_events);
                }
            }
            JumpSpec::Finite { small, large } => {
                let parts: Vec<(JumpKind, &crate::coeffs::FiniteMeasure)> = large
                    .iter()
                    .map(|m| (JumpKind::Large, m))
                    .chain(small.iter().map(|m| (JumpKind::Small, m)))
                    .collect();
                for step in 0..n_steps {
                    let mut step_events: Vec<JumpEvent> = Vec::new();
                    for (kind, m) in &parts {
                        if m.rate <= 0.0 {
                            continue;
                        }
                        let pois = Poisson::new(m.rate * dt).expect("positive rate");
                        let count = pois.sample(&mut jp_rng) as usize;
                        for _ in 0..count {
                            let offset = (1.0 - jp_rng.gen::<f64>()) * dt;
                            let mark = m.law.sample(state_dim, &mut jp_rng);
                            step_events.push(JumpEvent {
                                step,
                                offset,
                                mark,
                                kind: *kind,
                            });
                        }
                    }
                    step_events.sort_by(|a, b| a.offset.partial_cmp(&b.offset).unwrap());
                    jumps.extend(step_events);
                }
            }
        }

        Ok(Self {
            dt,
            n_steps,
            noise_dim,
            state_dim,
            brownian,
            small_gauss,
            jumps,
            seed,
            path_index,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Number of whole steps in a grid-aligned duration.
    pub fn steps_of(&self, s: f64) -> Result<usize> {
        if s < 0.0 {
            return Err(Error::invalid("duration must be nonnegative"));
        }
        let k = (s / self.dt).round();
        if (k * self.dt - s).abs() > 1e-9 * s.abs().max(self.dt) {
            return Err(Error::GridMismatch(format!(
                "duration {s} is not aligned to the grid step {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }

    /// Shift `theta_s`: drop the first `s` of the realization, re-index the
    /// rest. `s` must be grid-aligned and within the horizon.
    pub fn shift(&self, s: f64) -> Result<Self> {
        let k = self.steps_of(s)?;
        if k > self.n_steps {
            return Err(Error::invalid(format!(
                "shift {s} exceeds horizon {}",
                self.horizon()
            )));
        }
        Ok(self.shift_steps(k))
    }

    /// Exact shift by whole steps.
    pub fn shift_steps(&self, k: usize) -> Self {
        assert!(k <= self.n_steps);
        Self {
            dt: self.dt,
            n_steps: self.n_steps - k,
            noise_dim: self.noise_dim,
            state_dim: self.state_dim,
            brownian: self.brownian[k * self.noise_dim..].to_vec(),
            small_gauss: if self.small_gauss.is_empty() {
                Vec::new()
            } else {
                self.small_gauss[k * self.state_dim..].to_vec()
            },
            jumps: self
                .jumps
                .iter()
                .filter(|e| e.step >= k)
                .map(|e| JumpEvent {
                    step: e.step - k,
                    ..e.clone()
                })
                .collect(),
            seed: self.seed,
            path_index: self.path_index,
        }
    }

    /// Keep only the first `k` steps.
    pub fn truncate_steps(&self, k: usize) -> Self {
        assert!(k <= self.n_steps);
        Self {
            dt: self.dt,
            n_steps: k,
            noise_dim: self.noise_dim,
            state_dim: self.state_dim,
            brownian: self.brownian[..k * self.noise_dim].to_vec(),
            small_gauss: if self.small_gauss.is_empty() {
                Vec::new()
            } else {
                self.small_gauss[..k * self.state_dim].to_vec()
            },
            jumps: self.jumps.iter().filter(|e| e.step < k).cloned().collect(),
            seed: self.seed,
            path_index: self.path_index,
        }
    }

    /// JSON sidecar for replay. serde_json emits shortest-round-trip floats,
    /// so the decode is bit-exact.
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }
}
