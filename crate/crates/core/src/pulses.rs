//! Driving-field programs: segmented AM, dual-beam segmented AM and AM-FM
//! (fixed three-plateau envelope plus a time-symmetric detuning profile).
//!
//! All frequencies are angular (rad/s), times in seconds. Per-mode detuning is
//! `δ_m(t) = μ(t) − ω_m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_time(tau: f64, t: f64) -> Result<()> {
    if !(0.0..=tau).contains(&t) {
        return Err(Error::OutOfRange { value: t, lo: 0.0, hi: tau });
    }
    Ok(())
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidInput(format!("gate time must be positive, got {tau}")));
    }
    Ok(())
}

/// Segment owning time `t`: left-closed, right-open, with `t = τ` owned by
/// the last segment.
pub fn segment_index(tau: f64, segments: usize, t: f64) -> usize {
    ((t / tau * segments as f64).floor() as usize).min(segments - 1)
}

/// Boundary times `t_p = p τ / P`, `p = 0..=P`.
pub fn segment_boundaries(tau: f64, segments: usize) -> Vec<f64> {
    (0..=segments).map(|p| tau * p as f64 / segments as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedAm {
    pub tau: f64,
    pub omegas: Vec<f64>,
    pub mu: f64,
}

impl SegmentedAm {
    pub fn new(tau: f64, omegas: Vec<f64>, mu: f64) -> Result<Self> {
        check_tau(tau)?;
        if omegas.is_empty() {
            return Err(Error::InvalidInput("segmented pulse needs at least one segment".into()));
        }
        Ok(SegmentedAm { tau, omegas, mu })
    }

    pub fn segments(&self) -> usize {
        self.omegas.len()
    }

    pub fn sample(&self, t: f64) -> Result<f64> {
        check_time(self.tau, t)?;
        Ok(self.omegas[segment_index(self.tau, self.segments(), t)])
    }

    pub fn omega_max(&self) -> f64 {
        self.omegas.iter().fold(0.0, |a, w| a.max(w.abs()))
    }
}

/// Two independently shaped beams; ions listed in `ions_b` follow beam B,
/// every other ion follows beam A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSegmentedAm {
    pub tau: f64,
    pub omegas_a: Vec<f64>,
    pub omegas_b: Vec<f64>,
    pub mu: f64,
    pub ions_b: Vec<usize>,
}

impl DualSegmentedAm {
    pub fn new(tau: f64, omegas_a: Vec<f64>, omegas_b: Vec<f64>, mu: f64, ions_b: Vec<usize>) -> Result<Self> {
        check_tau(tau)?;
        if omegas_a.is_empty() || omegas_a.len() != omegas_b.len() {
            return Err(Error::InvalidInput("both beams need the same, non-zero segment count".into()));
        }
        Ok(DualSegmentedAm { tau, omegas_a, omegas_b, mu, ions_b })
    }

    pub fn segments(&self) -> usize {
        self.omegas_a.len()
    }

    pub fn beam_for(&self, ion: usize) -> &[f64] {
        if self.ions_b.contains(&ion) {
            &self.omegas_b
        } else {
            &self.omegas_a
        }
    }

    pub fn sample(&self, ion: usize, t: f64) -> Result<f64> {
        check_time(self.tau, t)?;
        Ok(self.beam_for(ion)[segment_index(self.tau, self.segments(), t)])
    }

    pub fn beam_maxima(&self) -> [f64; 2] {
        let max = |v: &[f64]| v.iter().fold(0.0f64, |a, w| a.max(w.abs()));
        [max(&self.omegas_a), max(&self.omegas_b)]
    }
}

/// Three plateaus joined by four cosine ramps, scaled by `omega_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmEnvelope {
    pub omega_max: f64,
    pub plateau_levels: [f64; 3],
    pub ramp_fraction: f64,
}

impl Default for AmEnvelope {
    fn default() -> Self {
        AmEnvelope { omega_max: 1.0, plateau_levels: [1.0, 0.6, 1.0], ramp_fraction: 0.1 }
    }
}

impl AmEnvelope {
    pub fn validate(&self) -> Result<()> {
        if self.plateau_levels.iter().any(|l| !(*l > 0.0 && *l <= 1.0)) {
            return Err(Error::InvalidInput("plateau levels must lie in (0, 1]".into()));
        }
        if !(0.0..0.25).contains(&self.ramp_fraction) {
            return Err(Error::InvalidInput("ramp fraction must lie in [0, 0.25)".into()));
        }
        if !self.omega_max.is_finite() {
            return Err(Error::InvalidInput("envelope amplitude must be finite".into()));
        }
        Ok(())
    }

    /// Fractional breakpoints `[0, r, r+p, 2r+p, 2r+2p, 3r+2p, 3r+3p, 1]`.
    ///
    /// A zero ramp fraction yields a rectangular three-step envelope.
    pub fn breakpoints(&self) -> [f64; 8] {
        let r = self.ramp_fraction;
        let p = (1.0 - 4.0 * r) / 3.0;
        [0.0, r, r + p, 2.0 * r + p, 2.0 * r + 2.0 * p, 3.0 * r + 2.0 * p, 3.0 * r + 3.0 * p, 1.0]
    }

    /// Relative envelope height at fractional time `s ∈ [0, 1]`.
    pub fn shape(&self, s: f64) -> f64 {
        let bp = self.breakpoints();
        let lv = [0.0, self.plateau_levels[0], self.plateau_levels[1], self.plateau_levels[2], 0.0];
        let k = (0..7).find(|&k| s < bp[k + 1]).unwrap_or(6);
        let (a, b) = (bp[k], bp[k + 1]);
        if k % 2 == 1 {
            return lv[(k + 1) / 2];
        }
        let r = k / 2;
        if b <= a {
            return lv[r + 1];
        }
        let x = (s - a) / (b - a);
        lv[r] + (lv[r + 1] - lv[r]) * 0.5 * (1.0 - (std::f64::consts::PI * x).cos())
    }

    pub fn sample(&self, tau: f64, t: f64) -> Result<f64> {
        check_time(tau, t)?;
        Ok(self.omega_max * self.shape(t / tau))
    }
}

/// Time-symmetric detuning profile: `K` turning points at equally spaced times
/// over `[0, τ/2]` (both ends included when `K ≥ 2`), joined by cosine
/// half-periods and mirrored onto `[τ/2, τ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmProfile {
    pub tau: f64,
    pub mu_ref: f64,
    pub turning_points: Vec<f64>,
}

impl FmProfile {
    pub fn new(tau: f64, mu_ref: f64, turning_points: Vec<f64>) -> Result<Self> {
        check_tau(tau)?;
        if turning_points.is_empty() {
            return Err(Error::InvalidInput("FM profile needs at least one turning point".into()));
        }
        Ok(FmProfile { tau, mu_ref, turning_points })
    }

    fn half_step(&self) -> f64 {
        0.5 * self.tau / (self.turning_points.len() - 1) as f64
    }

    /// Turning-point times in the first half of the gate.
    pub fn turning_times(&self) -> Vec<f64> {
        let k = self.turning_points.len();
        if k == 1 {
            return vec![0.5 * self.tau];
        }
        (0..k).map(|i| i as f64 * self.half_step()).collect()
    }

    /// Times where the profile's second derivative may jump, over `[0, τ]`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        if self.turning_points.len() > 1 {
            let h = self.half_step();
            let k = self.turning_points.len();
            out.extend((1..(2 * (k - 1))).map(|i| i as f64 * h));
        }
        out.push(self.tau);
        out
    }

    fn locate(&self, t_half: f64) -> (usize, f64, f64) {
        let h = self.half_step();
        let kmax = self.turning_points.len() - 2;
        let k = ((t_half / h).floor() as usize).min(kmax);
        (k, (t_half - k as f64 * h) / h, h)
    }

    /// Detuning offset `δ(t)` relative to `mu_ref`.
    pub fn detuning(&self, t: f64) -> f64 {
        let pts = &self.turning_points;
        if pts.len() == 1 {
            return pts[0];
        }
        let th = t.min(self.tau - t).max(0.0);
        let (k, s, _) = self.locate(th);
        pts[k] + (pts[k + 1] - pts[k]) * 0.5 * (1.0 - (std::f64::consts::PI * s).cos())
    }

    /// `∫₀ᵗ δ(t′) dt′` for `t ∈ [0, τ/2]`.
    fn half_integral(&self, t: f64) -> f64 {
        let pts = &self.turning_points;
        if pts.len() == 1 {
            return pts[0] * t;
        }
        let (k, s, h) = self.locate(t);
        let full: f64 = (0..k).map(|i| 0.5 * h * (pts[i] + pts[i + 1])).sum();
        let pi = std::f64::consts::PI;
        let partial = h * (pts[k] * s + (pts[k + 1] - pts[k]) * (0.5 * s - (pi * s).sin() / (2.0 * pi)));
        full + partial
    }

    /// `∫₀ᵗ δ(t′) dt′` over the whole gate, using the mirror symmetry.
    pub fn detuning_integral(&self, t: f64) -> f64 {
        let half = 0.5 * self.tau;
        if t <= half {
            self.half_integral(t)
        } else {
            2.0 * self.half_integral(half) - self.half_integral(self.tau - t)
        }
    }

    /// `θ_m(t) = ∫₀ᵗ (μ_ref + δ(t′) − ω_m) dt′`.
    pub fn phase_theta(&self, mode_freq: f64, t: f64) -> Result<f64> {
        check_time(self.tau, t)?;
        Ok(self.phase_unchecked(mode_freq, t))
    }

    pub(crate) fn phase_unchecked(&self, mode_freq: f64, t: f64) -> f64 {
        (self.mu_ref - mode_freq) * t + self.detuning_integral(t)
    }

    pub fn max_abs_offset(&self) -> f64 {
        self.turning_points.iter().fold(0.0f64, |a, d| a.max(d.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmFmPulse {
    pub envelope: AmEnvelope,
    pub profile: FmProfile,
}

impl AmFmPulse {
    pub fn new(envelope: AmEnvelope, profile: FmProfile) -> Result<Self> {
        envelope.validate()?;
        Ok(AmFmPulse { envelope, profile })
    }

    pub fn tau(&self) -> f64 {
        self.profile.tau
    }

    pub(crate) fn amplitude_unchecked(&self, t: f64) -> f64 {
        self.envelope.omega_max * self.envelope.shape(t / self.profile.tau)
    }

    /// Envelope and FM breakpoints merged, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let tau = self.tau();
        let mut pts: Vec<f64> = self.envelope.breakpoints().iter().map(|s| s * tau).collect();
        pts.extend(self.profile.breakpoints());
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * tau);
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum PulseProgram {
    Am(SegmentedAm),
    DualAm(DualSegmentedAm),
    AmFm(AmFmPulse),
}

impl PulseProgram {
    pub fn tau(&self) -> f64 {
        match self {
            PulseProgram::Am(p) => p.tau,
            PulseProgram::DualAm(p) => p.tau,
            PulseProgram::AmFm(p) => p.tau(),
        }
    }

    /// Rabi frequency seen by `ion` at time `t`.
    pub fn sample_amplitude(&self, ion: usize, t: f64) -> Result<f64> {
        match self {
            PulseProgram::Am(p) => p.sample(t),
            PulseProgram::DualAm(p) => p.sample(ion, t),
            PulseProgram::AmFm(p) => p.envelope.sample(p.tau(), t),
        }
    }

    /// Instantaneous beatnote frequency `μ(t)`.
    pub fn drive_frequency(&self, t: f64) -> Result<f64> {
        check_time(self.tau(), t)?;
        Ok(match self {
            PulseProgram::Am(p) => p.mu,
            PulseProgram::DualAm(p) => p.mu,
            PulseProgram::AmFm(p) => p.profile.mu_ref + p.profile.detuning(t),
        })
    }

    pub fn omega_max(&self) -> f64 {
        match self {
            PulseProgram::Am(p) => p.omega_max(),
            PulseProgram::DualAm(p) => {
                let [a, b] = p.beam_maxima();
                a.max(b)
            }
            PulseProgram::AmFm(p) => {
                let lv = p.envelope.plateau_levels.iter().fold(0.0f64, |a, l| a.max(*l));
                p.envelope.omega_max.abs() * lv
            }
        }
    }
}
