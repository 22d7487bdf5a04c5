//! AM-FM: a fixed envelope with a symmetric detuning profile found by
//! multi-start simplex search.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::{Diagnostics, OptimizationReport, ScanPoint};
use crate::constants::hz_to_rad;
use crate::error::{Error, Result};
use crate::modes::NormalModeSet;
use crate::msgate::{alpha_map, chi, evaluate_gate, time_averaged_alpha, FidelityModel};
use crate::pulses::{AmEnvelope, AmFmPulse, FmProfile, PulseProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmFmCost {
    /// `Σ |ᾱ_im|²` with `ᾱ` the time average of the displacement trajectory.
    #[default]
    TimeAveraged,
    /// `Σ |α_im(τ)|²`.
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmFmOptions {
    pub tau: f64,
    pub mu_init: f64,
    /// Number of turning points `K`.
    pub turning_points: usize,
    /// Envelope shape; its `omega_max` is replaced by the solver.
    pub envelope: AmEnvelope,
    pub restarts: usize,
    pub seed: u64,
    pub cost: AmFmCost,
    /// Random starts draw offsets uniformly from `±search_range` (rad/s).
    pub search_range: f64,
    /// Cost evaluations per restart.
    pub max_evals: usize,
    /// Cost (at the final amplitude) below which a run counts as converged.
    pub cost_threshold: f64,
    pub target_phase: f64,
}

impl AmFmOptions {
    pub fn new(tau: f64, mu_init: f64, turning_points: usize) -> Self {
        AmFmOptions {
            tau,
            mu_init,
            turning_points,
            envelope: AmEnvelope::default(),
            restarts: 8,
            seed: 0,
            cost: AmFmCost::default(),
            search_range: hz_to_rad(20e3),
            max_evals: 1500,
            cost_threshold: 1e-3,
            target_phase: FRAC_PI_4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.turning_points == 0 {
            return Err(Error::InvalidInput("at least one turning point is required".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) || !self.mu_init.is_finite() {
            return Err(Error::InvalidInput("gate time and detuning must be finite, with τ > 0".into()));
        }
        if !(self.search_range.is_finite() && self.search_range >= 0.0) {
            return Err(Error::InvalidInput("search range must be non-negative".into()));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidInput("max_evals must be positive".into()));
        }
        self.envelope.validate()
    }
}

/// Offsets are searched in units of 2π·1 kHz.
const UNIT: f64 = std::f64::consts::TAU * 1e3;

fn pulse_for(options: &AmFmOptions, envelope: &AmEnvelope, x: &[f64]) -> Result<AmFmPulse> {
    let profile = FmProfile::new(options.tau, options.mu_init, x.iter().map(|v| v * UNIT).collect())?;
    AmFmPulse::new(envelope.clone(), profile)
}

fn cost_of(
    options: &AmFmOptions,
    envelope: &AmEnvelope,
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    pair: (usize, usize),
    x: &[f64],
) -> Result<f64> {
    let pulse = pulse_for(options, envelope, x)?;
    let driven = [pair.0, pair.1];
    let a = match options.cost {
        AmFmCost::TimeAveraged => time_averaged_alpha(&pulse, modes, eta, &driven)?,
        AmFmCost::Terminal => alpha_map(&PulseProgram::AmFm(pulse), modes, eta, &driven)?,
    };
    Ok(a.iter().map(|z| z.norm_sqr()).sum())
}

/// Envelope amplitude giving `|χ| = target` for the given profile.
fn phase_scaled(
    options: &AmFmOptions,
    envelope: &AmEnvelope,
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    pair: (usize, usize),
    x: &[f64],
) -> Result<AmEnvelope> {
    let pulse = PulseProgram::AmFm(pulse_for(options, envelope, x)?);
    let c = chi(&pulse, modes, eta, pair.0, pair.1)?;
    if !(c.abs() > 0.0) {
        return Err(Error::Infeasible("AM-FM pulse produces no entangling phase".into()));
    }
    let mut env = envelope.clone();
    env.omega_max *= (options.target_phase.abs() / c.abs()).sqrt();
    Ok(env)
}

/// Optimises the `K` turning-point offsets of a symmetric detuning profile
/// around `mu_init` for the pair, then scales the envelope so `χ = ±π/4`.
pub fn solve_amfm(
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    pair: (usize, usize),
    options: &AmFmOptions,
    model: &FidelityModel,
) -> Result<OptimizationReport> {
    options.validate()?;
    let n = modes.len();
    if pair.0 == pair.1 || pair.0 >= n || pair.1 >= n {
        return Err(Error::InvalidInput(format!("invalid ion pair ({}, {}) for {n} ions", pair.0, pair.1)));
    }
    let k = options.turning_points;

    // Fix the amplitude once so costs are O(1) at the unmodulated pulse.
    let mut unit = options.envelope.clone();
    unit.omega_max = 1.0;
    let envelope = phase_scaled(options, &unit, modes, eta, pair, &vec![0.0; k])?;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let range = options.search_range / UNIT;
    let starts: Vec<Vec<f64>> = (0..options.restarts.max(1))
        .map(|r| if r == 0 { vec![0.0; k] } else { (0..k).map(|_| rng.random_range(-range..=range)).collect() })
        .collect();

    let nm = NelderMeadOptions { step: 5.0, max_evals: options.max_evals, f_tol: 1e-14, x_tol: 1e-4 };
    let runs: Vec<_> = starts
        .par_iter()
        .map(|x0| {
            let f = |x: &[f64]| cost_of(options, &envelope, modes, eta, pair, x).unwrap_or(f64::INFINITY);
            nelder_mead(f, x0, &nm)
        })
        .collect();
    let (_, best) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)))
        .expect("at least one restart");
    if !best.f.is_finite() {
        return Err(Error::Infeasible("every AM-FM restart failed to evaluate".into()));
    }

    let final_env = phase_scaled(options, &envelope, modes, eta, pair, &best.x)?;
    let ratio = final_env.omega_max / envelope.omega_max;
    let final_cost = best.f * ratio * ratio;
    let pulse = PulseProgram::AmFm(pulse_for(options, &final_env, &best.x)?);
    let result = evaluate_gate(&pulse, modes, eta, pair, model)?;
    let residual = result.residual();
    Ok(OptimizationReport {
        per_mu: vec![ScanPoint {
            mu: options.mu_init,
            fidelity: Some(result.fidelity),
            omega_max: Some(result.omega_max),
            error: None,
        }],
        best_mu: options.mu_init,
        best: result,
        diagnostics: Diagnostics {
            iterations: runs.iter().map(|r| r.iterations).sum(),
            residual,
            restarts: starts.len(),
            converged: final_cost < options.cost_threshold,
            cost: Some(final_cost),
            restart_costs: runs.iter().map(|r| [r.initial_f, r.f]).collect(),
        },
    })
}
