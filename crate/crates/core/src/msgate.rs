//! Spin-dependent displacements `α_im(τ)`, the entangling phase `χ_ij(τ)` and
//! the gate fidelity for any [`PulseProgram`].
//!
//! Phases use the drive frame: `exp(i δ_m t)` with `δ_m = μ − ω_m`, or
//! `exp(i θ_m(t))` for frequency-modulated drives.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::NormalModeSet;
use crate::pulses::{segment_boundaries, AmFmPulse, PulseProgram};
use crate::quad;

/// Absolute tolerance on each `α_im` for quadrature-evaluated pulses.
pub const ALPHA_ABS_TOL: f64 = 1e-10;
const MAX_QUAD_PANELS: usize = 200_000;
/// RK4 steps per period of the fastest detuning in the single-pass `χ`.
const CHI_STEPS_PER_PERIOD: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    /// Driven ions (0-based), in the row order of `alpha`.
    pub driven: Vec<usize>,
    /// `alpha[r][m]`: displacement of driven ion `driven[r]` in mode `m`.
    pub alpha: Vec<Vec<Complex64>>,
    pub chi: f64,
    pub fidelity: f64,
    /// Largest Rabi frequency over all beams (rad/s).
    pub omega_max: f64,
    /// Per-beam maxima `[A, B]` for dual-beam pulses.
    pub beam_maxima: Option<[f64; 2]>,
    pub pulse: PulseProgram,
}

impl GateResult {
    /// `Σ |α_im|²` over driven ions and modes.
    pub fn residual(&self) -> f64 {
        self.alpha.iter().flatten().map(|a| a.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityModel {
    /// Thermal mean phonon number per mode.
    pub nbar: Vec<f64>,
}

impl FidelityModel {
    pub fn ground_state(n_modes: usize) -> Self {
        FidelityModel { nbar: vec![0.0; n_modes] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nbar.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(Error::InvalidInput("thermal occupations must be non-negative".into()));
        }
        Ok(())
    }
}

/// `(e^{ix} − 1)/(ix)`, accurate for small `x`.
fn phase_ramp(x: f64) -> Complex64 {
    let half = 0.5 * x;
    let sinc = if half.abs() < 1e-4 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    Complex64::from_polar(sinc, half)
}

/// `(x − sin x)/x²`, accurate for small `x`.
fn chord_deficit(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x * (1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0)
    } else {
        (x - x.sin()) / (x * x)
    }
}

/// `∫ e^{iδt} dt` over each of `P` equal segments of `[0, τ]`.
pub fn segment_integrals(delta: f64, tau: f64, segments: usize) -> Vec<Complex64> {
    let t = segment_boundaries(tau, segments);
    t.windows(2)
        .map(|w| {
            let dt = w[1] - w[0];
            Complex64::from_polar(dt, delta * w[0]) * phase_ramp(delta * dt)
        })
        .collect()
}

/// `K[p][q] = ∫_{seg p} dt₁ ∫_{seg q, t₂<t₁} dt₂ sin δ(t₁ − t₂)`; zero above
/// the diagonal.
pub fn segment_double_integrals(delta: f64, tau: f64, segments: usize) -> DMatrix<f64> {
    let ints = segment_integrals(delta, tau, segments);
    let dt = tau / segments as f64;
    let mut k = DMatrix::zeros(segments, segments);
    for p in 0..segments {
        for q in 0..p {
            k[(p, q)] = (ints[p] * ints[q].conj()).im;
        }
        k[(p, p)] = dt * dt * chord_deficit(delta * dt);
    }
    k
}

/// Segment amplitudes driving `ion`, for piecewise-constant programs.
fn segment_amplitudes(pulse: &PulseProgram, ion: usize) -> Option<(&[f64], f64)> {
    match pulse {
        PulseProgram::Am(p) => Some((&p.omegas, p.mu)),
        PulseProgram::DualAm(p) => Some((p.beam_for(ion), p.mu)),
        PulseProgram::AmFm(_) => None,
    }
}

fn check_dims(modes: &NormalModeSet, eta: &DMatrix<f64>, ions: &[usize]) -> Result<()> {
    let n = modes.len();
    if eta.nrows() != n || eta.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "Lamb-Dicke matrix is {}x{}, expected {n}x{n}",
            eta.nrows(),
            eta.ncols()
        )));
    }
    if let Some(&bad) = ions.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!("ion index {bad} out of range for {n} ions")));
    }
    Ok(())
}

fn fm_panels(pulse: &AmFmPulse, mode_freq: f64) -> usize {
    let p = &pulse.profile;
    let fastest = (p.mu_ref - mode_freq).abs() + p.max_abs_offset();
    let cycles = fastest * p.tau / std::f64::consts::TAU;
    let pieces = pulse.breakpoints().len().saturating_sub(1).max(1);
    ((2.0 * cycles / pieces as f64).ceil() as usize).max(1)
}

/// `∫₀^τ w(t) Ω(t) e^{iθ_m(t)} dt` for an AM-FM pulse.
fn fm_weighted_integral<W: Fn(f64) -> f64>(
    pulse: &AmFmPulse,
    mode_freq: f64,
    weight: W,
    abs_tol: f64,
) -> Result<Complex64> {
    let f = |t: f64| {
        let th = pulse.profile.phase_unchecked(mode_freq, t);
        Complex64::from_polar(weight(t) * pulse.amplitude_unchecked(t), th)
    };
    quad::integrate(f, &pulse.breakpoints(), fm_panels(pulse, mode_freq), abs_tol, MAX_QUAD_PANELS)
}

fn max_eta_for_mode(eta: &DMatrix<f64>, ions: &[usize], m: usize) -> f64 {
    ions.iter().fold(0.0f64, |a, &i| a.max(eta[(i, m)].abs()))
}

/// Final displacements `α_im(τ)`; rows follow `driven`.
pub fn alpha_map(
    pulse: &PulseProgram,
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    driven: &[usize],
) -> Result<DMatrix<Complex64>> {
    check_dims(modes, eta, driven)?;
    let n = modes.len();
    let tau = pulse.tau();
    let mut out = DMatrix::from_element(driven.len(), n, Complex64::new(0.0, 0.0));
    match pulse {
        PulseProgram::AmFm(p) => {
            for m in 0..n {
                let scale = max_eta_for_mode(eta, driven, m);
                if scale == 0.0 {
                    continue;
                }
                let j = fm_weighted_integral(p, modes.frequencies[m], |_| 1.0, ALPHA_ABS_TOL / scale)?;
                for (r, &i) in driven.iter().enumerate() {
                    out[(r, m)] = -eta[(i, m)] * j;
                }
            }
        }
        _ => {
            for m in 0..n {
                for (r, &i) in driven.iter().enumerate() {
                    let (amps, mu) = segment_amplitudes(pulse, i).expect("segmented pulse");
                    let ints = segment_integrals(mu - modes.frequencies[m], tau, amps.len());
                    let s: Complex64 = amps.iter().zip(&ints).map(|(a, z)| z * *a).sum();
                    out[(r, m)] = -eta[(i, m)] * s;
                }
            }
        }
    }
    Ok(out)
}

/// Time average over `[0, τ]` of the displacement trajectory `α_im(t)` for an
/// AM-FM pulse; rows follow `driven`.
pub fn time_averaged_alpha(
    pulse: &AmFmPulse,
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    driven: &[usize],
) -> Result<DMatrix<Complex64>> {
    check_dims(modes, eta, driven)?;
    let n = modes.len();
    let tau = pulse.tau();
    let mut out = DMatrix::from_element(driven.len(), n, Complex64::new(0.0, 0.0));
    for m in 0..n {
        let scale = max_eta_for_mode(eta, driven, m);
        if scale == 0.0 {
            continue;
        }
        // (1/τ)∫₀^τ ∫₀^t f(t') dt' dt = (1/τ)∫₀^τ (τ − t') f(t') dt'.
        let j = fm_weighted_integral(pulse, modes.frequencies[m], |t| (tau - t) / tau, ALPHA_ABS_TOL / scale)?;
        for (r, &i) in driven.iter().enumerate() {
            out[(r, m)] = -eta[(i, m)] * j;
        }
    }
    Ok(out)
}

/// Entangling phase `χ_ij(τ)`.
pub fn chi(pulse: &PulseProgram, modes: &NormalModeSet, eta: &DMatrix<f64>, i: usize, j: usize) -> Result<f64> {
    check_dims(modes, eta, &[i, j])?;
    if i == j {
        return Err(Error::InvalidInput("entangling phase needs two distinct ions".into()));
    }
    let tau = pulse.tau();
    let n = modes.len();
    match pulse {
        PulseProgram::AmFm(p) => {
            let per_mode = fm_chi_per_mode(p, modes)?;
            Ok((0..n).map(|m| eta[(i, m)] * eta[(j, m)] * per_mode[m]).sum())
        }
        _ => {
            let (ai, mu) = segment_amplitudes(pulse, i).expect("segmented pulse");
            let (aj, _) = segment_amplitudes(pulse, j).expect("segmented pulse");
            let mut total = 0.0;
            for m in 0..n {
                let c = eta[(i, m)] * eta[(j, m)];
                if c == 0.0 {
                    continue;
                }
                let k = segment_double_integrals(mu - modes.frequencies[m], tau, ai.len());
                let mut s = 0.0;
                for p in 0..ai.len() {
                    for q in 0..=p {
                        s += k[(p, q)] * (ai[p] * aj[q] + aj[p] * ai[q]);
                    }
                }
                total += c * s;
            }
            Ok(total)
        }
    }
}

/// `2 ∫₀^τ dt₁ ∫₀^{t₁} dt₂ Ω(t₁)Ω(t₂) sin[θ_m(t₁) − θ_m(t₂)]` per mode, in one
/// pass using running integrals of `Ω cos θ` and `Ω sin θ`.
pub fn fm_chi_per_mode(pulse: &AmFmPulse, modes: &NormalModeSet) -> Result<Vec<f64>> {
    let prof = &pulse.profile;
    let fastest = modes
        .frequencies
        .iter()
        .map(|w| (prof.mu_ref - w).abs() + prof.max_abs_offset())
        .fold(0.0f64, f64::max);
    let tau = pulse.tau();
    let h_max = if fastest > 0.0 {
        (std::f64::consts::TAU / (CHI_STEPS_PER_PERIOD * fastest)).min(tau / 2000.0)
    } else {
        tau / 2000.0
    };
    let bps = pulse.breakpoints();

    let mut out = Vec::with_capacity(modes.len());
    for &w in &modes.frequencies {
        // The envelope may jump at a breakpoint, so it is sampled just inside
        // the current piece.
        let deriv = |t: f64, y: [f64; 3], lo: f64, hi: f64| {
            let eps = 1e-12 * (hi - lo);
            let om = pulse.amplitude_unchecked(t.clamp(lo + eps, hi - eps));
            let (s, c) = prof.phase_unchecked(w, t).sin_cos();
            [om * c, om * s, om * (s * y[0] - c * y[1])]
        };
        let mut y = [0.0f64; 3];
        for piece in bps.windows(2) {
            let (a, b) = (piece[0], piece[1]);
            let steps = ((b - a) / h_max).ceil().max(1.0) as usize;
            let h = (b - a) / steps as f64;
            for k in 0..steps {
                let t = a + k as f64 * h;
                let k1 = deriv(t, y, a, b);
                let y2 = [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1], y[2] + 0.5 * h * k1[2]];
                let k2 = deriv(t + 0.5 * h, y2, a, b);
                let y3 = [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1], y[2] + 0.5 * h * k2[2]];
                let k3 = deriv(t + 0.5 * h, y3, a, b);
                let y4 = [y[0] + h * k3[0], y[1] + h * k3[1], y[2] + h * k3[2]];
                let k4 = deriv(t + h, y4, a, b);
                for c in 0..3 {
                    y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
            }
        }
        if !y[2].is_finite() {
            return Err(Error::Accuracy { achieved: f64::INFINITY, requested: 1e-8 });
        }
        out.push(2.0 * y[2]);
    }
    Ok(out)
}

/// Mølmer–Sørensen fidelity with thermal motional occupation:
/// `F = F_mot · (1 + sin 2|χ|)/2`.
pub fn fidelity_from_parts(alpha_i: &[Complex64], alpha_j: &[Complex64], chi: f64, model: &FidelityModel) -> f64 {
    let weight = |m: usize| 2.0 * model.nbar.get(m).copied().unwrap_or(0.0) + 1.0;
    let gamma = |f: &dyn Fn(usize) -> Complex64| {
        let s: f64 = (0..alpha_i.len()).map(|m| f(m).norm_sqr() * weight(m)).sum();
        (-0.5 * s).exp()
    };
    let gi = gamma(&|m| alpha_i[m]);
    let gj = gamma(&|m| alpha_j[m]);
    let gp = gamma(&|m| alpha_i[m] + alpha_j[m]);
    let gm = gamma(&|m| alpha_i[m] - alpha_j[m]);
    let motional = (2.0 + 2.0 * gi + 2.0 * gj + gp + gm) / 8.0;
    let phase = 0.5 * (1.0 + (2.0 * chi.abs()).sin());
    (motional * phase).clamp(0.0, 1.0)
}

/// Fidelity of a gate on its first two driven ions.
pub fn fidelity(result: &GateResult, model: &FidelityModel) -> Result<f64> {
    if result.alpha.len() < 2 {
        return Err(Error::InvalidInput("fidelity needs two driven ions".into()));
    }
    if !result.chi.is_finite() || result.alpha.iter().flatten().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::InvalidInput("displacements and phase must be finite".into()));
    }
    model.validate()?;
    Ok(fidelity_from_parts(&result.alpha[0], &result.alpha[1], result.chi, model))
}

/// Evaluates `α`, `χ` and the fidelity of `pulse` on the pair `(i, j)`.
pub fn evaluate_gate(
    pulse: &PulseProgram,
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    pair: (usize, usize),
    model: &FidelityModel,
) -> Result<GateResult> {
    let driven = vec![pair.0, pair.1];
    let a = alpha_map(pulse, modes, eta, &driven)?;
    let alpha: Vec<Vec<Complex64>> = (0..2).map(|r| a.row(r).iter().copied().collect()).collect();
    let chi = chi(pulse, modes, eta, pair.0, pair.1)?;
    let beam_maxima = match pulse {
        PulseProgram::DualAm(p) => Some(p.beam_maxima()),
        _ => None,
    };
    let mut result = GateResult {
        driven,
        alpha,
        chi,
        fidelity: 0.0,
        omega_max: pulse.omega_max(),
        beam_maxima,
        pulse: pulse.clone(),
    };
    result.fidelity = fidelity(&result, model)?;
    Ok(result)
}

/// Displacement trajectories `α_im(t)` sampled at `times`; one matrix per
/// time with rows following `driven`.
pub fn alpha_trajectory(
    pulse: &PulseProgram,
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    driven: &[usize],
    times: &[f64],
) -> Result<Vec<DMatrix<Complex64>>> {
    check_dims(modes, eta, driven)?;
    let tau = pulse.tau();
    let n = modes.len();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !(0.0..=tau).contains(&t) {
            return Err(Error::OutOfRange { value: t, lo: 0.0, hi: tau });
        }
        let mut a = DMatrix::from_element(driven.len(), n, Complex64::new(0.0, 0.0));
        for m in 0..n {
            let w = modes.frequencies[m];
            for (r, &i) in driven.iter().enumerate() {
                let integral = match pulse {
                    PulseProgram::AmFm(p) => {
                        let mut bps: Vec<f64> = p.breakpoints().into_iter().filter(|&b| b < t).collect();
                        bps.push(t);
                        let f = |s: f64| Complex64::from_polar(p.amplitude_unchecked(s), p.profile.phase_unchecked(w, s));
                        let scale = eta[(i, m)].abs().max(f64::MIN_POSITIVE);
                        quad::integrate(f, &bps, fm_panels(p, w), ALPHA_ABS_TOL / scale, MAX_QUAD_PANELS)?
                    }
                    _ => {
                        let (amps, mu) = segment_amplitudes(pulse, i).expect("segmented pulse");
                        let bounds = segment_boundaries(tau, amps.len());
                        let d = mu - w;
                        amps.iter()
                            .zip(bounds.windows(2))
                            .filter(|(_, b)| b[0] < t)
                            .map(|(amp, b)| {
                                let hi = b[1].min(t);
                                Complex64::from_polar(amp * (hi - b[0]), d * b[0]) * phase_ramp(d * (hi - b[0]))
                            })
                            .sum()
                    }
                };
                a[(r, m)] = -eta[(i, m)] * integral;
            }
        }
        out.push(a);
    }
    Ok(out)
}
