//! Pulse design for the `2N + 1` gate conditions (all `α_im = 0`, `χ = ±π/4`)
//! and the scan over beatnote frequencies.

mod am;
mod amfm;
mod nelder_mead;

pub use am::{solve_am, solve_am_at, solve_dual_am, solve_dual_am_at};
pub use amfm::{solve_amfm, AmFmCost, AmFmOptions};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::hz_to_rad;
use crate::error::{Error, Result};
use crate::modes::{spectral_stats, NormalModeSet};
use crate::msgate::GateResult;

/// Fidelities closer than this count as tied in the μ scan.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-4;
/// Singular values below this fraction of the largest span the null space.
pub const NULL_SPACE_TOL: f64 = 1e-10;
/// Smallest `|χ|` (rad) at unit amplitude before a geometry is declared
/// infeasible.
pub const MIN_UNIT_CHI: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmSolveOptions {
    pub segments: usize,
    pub tau: f64,
    pub mu_grid: Vec<f64>,
    pub target_phase: f64,
}

impl AmSolveOptions {
    pub fn new(segments: usize, tau: f64, mu_grid: Vec<f64>) -> Result<Self> {
        let o = AmSolveOptions { segments, tau, mu_grid, target_phase: FRAC_PI_4 };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::InvalidInput("at least one segment is required".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidInput("gate time must be positive".into()));
        }
        if self.mu_grid.is_empty() || self.mu_grid.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("detuning grid must be non-empty and finite".into()));
        }
        if !(self.target_phase.is_finite() && self.target_phase != 0.0) {
            return Err(Error::InvalidInput("target phase must be finite and non-zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// `Σ |α_im|²` of the returned pulse.
    pub residual: f64,
    pub restarts: usize,
    pub converged: bool,
    /// Final optimiser cost, for iterative solvers.
    pub cost: Option<f64>,
    /// `[initial, final]` cost per restart, for iterative solvers.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub restart_costs: Vec<[f64; 2]>,
}

/// One solver outcome at a fixed beatnote.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub result: GateResult,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub mu: f64,
    pub fidelity: Option<f64>,
    pub omega_max: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub best: GateResult,
    pub best_mu: f64,
    pub per_mu: Vec<ScanPoint>,
    pub diagnostics: Diagnostics,
}

/// Runs `solver` at every grid point (concurrently) and keeps the highest
/// fidelity; fidelities within `DEFAULT_TIE_TOLERANCE` of the best are
/// decided by the smaller `Ω_max`, then the smaller μ. The choice does not
/// depend on grid order.
pub fn scan_mu<F>(grid: &[f64], solver: F) -> Result<OptimizationReport>
where
    F: Fn(f64) -> Result<Solution> + Sync,
{
    scan_mu_with_tolerance(grid, solver, DEFAULT_TIE_TOLERANCE)
}

pub fn scan_mu_with_tolerance<F>(grid: &[f64], solver: F, tie_tolerance: f64) -> Result<OptimizationReport>
where
    F: Fn(f64) -> Result<Solution> + Sync,
{
    if grid.is_empty() {
        return Err(Error::InvalidInput("detuning grid is empty".into()));
    }
    let outcomes: Vec<Result<Solution>> = grid.par_iter().map(|&mu| solver(mu)).collect();

    let per_mu = grid
        .iter()
        .zip(&outcomes)
        .map(|(&mu, o)| match o {
            Ok(s) => ScanPoint { mu, fidelity: Some(s.result.fidelity), omega_max: Some(s.result.omega_max), error: None },
            Err(e) => ScanPoint { mu, fidelity: None, omega_max: None, error: Some(e.to_string()) },
        })
        .collect();

    let ok: Vec<(f64, &Solution)> = grid.iter().zip(&outcomes).filter_map(|(&mu, o)| o.as_ref().ok().map(|s| (mu, s))).collect();
    if ok.is_empty() {
        return Err(outcomes.into_iter().find_map(|o| o.err()).expect("non-empty grid"));
    }
    let top = ok.iter().map(|(_, s)| s.result.fidelity).fold(f64::NEG_INFINITY, f64::max);
    let (best_mu, best) = ok
        .iter()
        .filter(|(_, s)| s.result.fidelity >= top - tie_tolerance)
        .min_by(|a, b| a.1.result.omega_max.total_cmp(&b.1.result.omega_max).then(a.0.total_cmp(&b.0)))
        .expect("at least one candidate");
    Ok(OptimizationReport {
        best: best.result.clone(),
        best_mu: *best_mu,
        per_mu,
        diagnostics: best.diagnostics.clone(),
    })
}

/// `lo, lo + step, ...` up to and including `hi` (within rounding).
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || hi < lo {
        return vec![lo];
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// `[ω_1 − 20 kHz, ω_N + 20 kHz]` in 0.5 kHz steps.
pub fn axial_mu_grid(modes: &NormalModeSet) -> Vec<f64> {
    let f = &modes.frequencies;
    linear_grid(f[0] - hz_to_rad(20e3), f[f.len() - 1] + hz_to_rad(20e3), hz_to_rad(0.5e3))
}

/// The band below any isolated high-frequency modes, padded by 20 kHz on each
/// side, in 1 kHz steps.
pub fn transverse_mu_grid(modes: &NormalModeSet) -> Vec<f64> {
    let f = &modes.frequencies;
    let isolated = if f.len() >= 2 { spectral_stats(modes).map(|s| s.isolated_mode_count).unwrap_or(0) } else { 0 };
    let top = f[f.len() - 1 - isolated.min(f.len() - 1)];
    linear_grid(f[0] - hz_to_rad(20e3), top + hz_to_rad(20e3), hz_to_rad(1e3))
}

pub fn default_mu_grid(modes: &NormalModeSet) -> Vec<f64> {
    if modes.direction.is_transverse() {
        transverse_mu_grid(modes)
    } else {
        axial_mu_grid(modes)
    }
}
