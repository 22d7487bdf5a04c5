//! Run configuration. Frequencies are in Hz and ion/mode indices are 1-based;
//! everything is converted to rad/s and 0-based indices on resolution.

use std::path::Path;

use mixion::constants::hz_to_rad;
use mixion::cooling::{FluctuationNormalization, Placement, DEFAULT_HARD_THRESHOLD};
use mixion::optimize::AmFmCost;
use mixion::{Direction, Species, TransverseModel, TrapConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chain: ChainSpec,
    pub trap: TrapSpec,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooling: Option<CoolingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_direction() -> Direction {
    Direction::Axial
}

/// Either an explicit species list or a host chain with coolant ions placed
/// by a pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<Vec<SpeciesSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<PatternSpec>,
}

/// `"171Yb+"`, `"138Ba+"` or a custom species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpeciesSpec {
    Preset(String),
    Custom(CustomSpecies),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpecies {
    pub label: String,
    /// Mass in u.
    pub mass: f64,
    /// Raman wavelength addressing this species.
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSpec {
    pub n_ions: usize,
    pub n_coolant: usize,
    pub host: SpeciesSpec,
    pub coolant: SpeciesSpec,
    pub placement: PlacementSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlacementSpec {
    Edge,
    Periodic,
    /// 1-based positions.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSpec {
    #[serde(default = "default_reference_mass")]
    pub reference_mass: f64,
    pub omega_x_hz: f64,
    pub omega_y_hz: f64,
    pub omega_z_hz: f64,
    #[serde(default)]
    pub transverse_model: TransverseModel,
}

fn default_reference_mass() -> f64 {
    171.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Am,
    DualAm,
    Amfm,
}

/// A 1-based ion position, or `"last"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IonRef {
    Index(usize),
    Named(NamedIon),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedIon {
    Last,
}

impl IonRef {
    pub fn resolve(&self, n: usize) -> Result<usize, CliError> {
        match self {
            IonRef::Index(i) if (1..=n).contains(i) => Ok(i - 1),
            IonRef::Index(i) => Err(CliError::Config(format!("ion {i} outside 1..={n}"))),
            IonRef::Named(NamedIon::Last) => Ok(n - 1),
        }
    }
}

/// A beatnote given absolutely or relative to a (1-based) mode of the
/// selected direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuPoint {
    Absolute { hz: f64 },
    Relative { mode: usize, offset_hz: f64 },
}

impl MuPoint {
    pub fn resolve(&self, mode_freqs: &[f64]) -> Result<f64, CliError> {
        match *self {
            MuPoint::Absolute { hz } => finite(hz, "beatnote").map(hz_to_rad),
            MuPoint::Relative { mode, offset_hz } => {
                if !(1..=mode_freqs.len()).contains(&mode) {
                    return Err(CliError::Config(format!("mode {mode} outside 1..={}", mode_freqs.len())));
                }
                Ok(mode_freqs[mode - 1] + hz_to_rad(finite(offset_hz, "beatnote offset")?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MuGrid {
    Values { values_hz: Vec<f64> },
    Range { start_hz: f64, stop_hz: f64, step_hz: f64 },
    Points { points: Vec<MuPoint> },
}

/// One occupation for every mode, or a per-mode list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nbar {
    Uniform(f64),
    PerMode(Vec<f64>),
}

impl Default for Nbar {
    fn default() -> Self {
        Nbar::Uniform(0.0)
    }
}

impl Nbar {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Nbar::Uniform(x) => vec![*x; n],
            Nbar::PerMode(v) if v.len() == n => v.clone(),
            Nbar::PerMode(v) => return Err(CliError::Config(format!("nbar has {} entries for {n} modes", v.len()))),
        };
        if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(CliError::Config("nbar entries must be finite and non-negative".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub pair: [IonRef; 2],
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_tau")]
    pub tau_s: f64,
    /// Defaults to the standard grid for the direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuGrid>,
    #[serde(default)]
    pub nbar: Nbar,
    #[serde(default = "default_weights")]
    pub norm_weights: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amfm: Option<AmFmSpec>,
    #[serde(default = "default_samples")]
    pub trajectory_samples: usize,
}

fn default_segments() -> usize {
    5
}
fn default_tau() -> f64 {
    200e-6
}
fn default_weights() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_samples() -> usize {
    401
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmFmSpec {
    pub turning_points: usize,
    pub mu_init: MuPoint,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub cost: AmFmCost,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_search_range")]
    pub search_range_hz: f64,
    #[serde(default = "default_cost_threshold")]
    pub cost_threshold: f64,
    #[serde(default)]
    pub envelope: EnvelopeSpec,
}

fn default_restarts() -> usize {
    8
}
fn default_max_evals() -> usize {
    1500
}
fn default_search_range() -> f64 {
    20e3
}
fn default_cost_threshold() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub plateau_levels: [f64; 3],
    pub ramp_fraction: f64,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        let e = mixion::AmEnvelope::default();
        EnvelopeSpec { plateau_levels: e.plateau_levels, ramp_fraction: e.ramp_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoolingSpec {
    /// 1-based coolant positions; defaults to the pattern's coolant ions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coolant: Option<Vec<usize>>,
    #[serde(default)]
    pub nbar: Nbar,
    #[serde(default)]
    pub normalization: FluctuationNormalization,
    #[serde(default = "default_threshold")]
    pub hard_threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_HARD_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Host mass over coolant mass; needs a pattern chain.
    MassRatio,
    NIons,
    Segments,
    TurningPoints,
    /// Beatnote in Hz, one gate per value.
    Mu,
}

pub const MAX_SWEEP_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Load, apply command-line overrides and validate.
pub fn load(path: &Path, seed: Option<u64>, scheme: Option<Scheme>) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let (Some(s), Some(g)) = (scheme, cfg.gate.as_mut()) {
        g.scheme = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn finite(x: f64, what: &str) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Config(format!("{what} must be finite")))
    }
}

impl SpeciesSpec {
    pub fn resolve(&self) -> Result<(Species, f64), CliError> {
        match self {
            SpeciesSpec::Preset(name) => match name.as_str() {
                "171Yb+" => Ok((Species::yb171(), 355e-9)),
                "138Ba+" => Ok((Species::ba138(), 532e-9)),
                other => Err(CliError::Config(format!("unknown species preset {other:?}; use a custom species"))),
            },
            SpeciesSpec::Custom(c) => {
                let s = Species::new(c.label.clone(), c.mass).map_err(|e| CliError::Config(e.to_string()))?;
                if !(c.wavelength_nm.is_finite() && c.wavelength_nm > 0.0) {
                    return Err(CliError::Config(format!("species {} needs a positive wavelength", c.label)));
                }
                Ok((s, c.wavelength_nm * 1e-9))
            }
        }
    }
}

impl PlacementSpec {
    pub fn to_core(&self) -> Result<Placement, CliError> {
        Ok(match self {
            PlacementSpec::Edge => Placement::Edge,
            PlacementSpec::Periodic => Placement::Periodic,
            PlacementSpec::Explicit(v) => {
                if v.contains(&0) {
                    return Err(CliError::Config("explicit coolant positions are 1-based".into()));
                }
                Placement::Explicit(v.iter().map(|i| i - 1).collect())
            }
        })
    }
}

/// Species, per-ion wavelength and pattern coolant positions (0-based).
pub struct ResolvedChain {
    pub ions: Vec<Species>,
    pub wavelengths: Vec<f64>,
    pub coolant: Option<Vec<usize>>,
}

impl ChainSpec {
    pub fn resolve(&self) -> Result<ResolvedChain, CliError> {
        match (&self.species, &self.pattern) {
            (Some(list), None) => {
                if list.is_empty() {
                    return Err(CliError::Config("species list is empty".into()));
                }
                let (ions, wavelengths) = list.iter().map(|s| s.resolve()).collect::<Result<Vec<_>, _>>()?.into_iter().unzip();
                Ok(ResolvedChain { ions, wavelengths, coolant: None })
            }
            (None, Some(p)) => {
                let (host, wl_h) = p.host.resolve()?;
                let (cool, wl_c) = p.coolant.resolve()?;
                let placement = p.placement.to_core()?;
                let idx = mixion::cooling::coolant_indices(&placement, p.n_ions, p.n_coolant)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                if idx.len() != p.n_coolant {
                    return Err(CliError::Config(format!(
                        "{} explicit positions given for n_coolant = {}",
                        idx.len(),
                        p.n_coolant
                    )));
                }
                let is_c = |i: usize| idx.binary_search(&i).is_ok();
                Ok(ResolvedChain {
                    ions: (0..p.n_ions).map(|i| if is_c(i) { cool.clone() } else { host.clone() }).collect(),
                    wavelengths: (0..p.n_ions).map(|i| if is_c(i) { wl_c } else { wl_h }).collect(),
                    coolant: Some(idx),
                })
            }
            _ => Err(CliError::Config("chain needs exactly one of `species` or `pattern`".into())),
        }
    }
}

impl TrapSpec {
    pub fn to_core(&self) -> Result<TrapConfig, CliError> {
        TrapConfig::new(
            self.reference_mass,
            hz_to_rad(self.omega_x_hz),
            hz_to_rad(self.omega_y_hz),
            hz_to_rad(self.omega_z_hz),
            self.transverse_model,
        )
        .map_err(|e| CliError::Config(e.to_string()))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.trap.to_core()?;
        let chain = self.chain.resolve()?;
        let n = chain.ions.len();
        if let Some(g) = &self.gate {
            let (i, j) = (g.pair[0].resolve(n)?, g.pair[1].resolve(n)?);
            if i == j {
                return Err(CliError::Config("gate pair must name two different ions".into()));
            }
            if g.segments == 0 || g.segments > 4 * n.max(1) + 1 {
                return Err(CliError::Config(format!("segments must lie in 1..={}", 4 * n + 1)));
            }
            if !(g.tau_s.is_finite() && g.tau_s > 0.0) {
                return Err(CliError::Config("tau_s must be positive".into()));
            }
            if g.trajectory_samples < 2 {
                return Err(CliError::Config("trajectory_samples must be at least 2".into()));
            }
            if g.norm_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(CliError::Config("norm_weights must be positive".into()));
            }
            g.nbar.resolve(n)?;
            match &g.mu {
                Some(MuGrid::Values { values_hz }) if values_hz.is_empty() => {
                    return Err(CliError::Config("beatnote list is empty".into()))
                }
                Some(MuGrid::Points { points }) if points.is_empty() => {
                    return Err(CliError::Config("beatnote list is empty".into()))
                }
                Some(MuGrid::Range { start_hz, stop_hz, step_hz }) => {
                    if !(step_hz.is_finite() && *step_hz > 0.0 && start_hz.is_finite() && stop_hz >= start_hz) {
                        return Err(CliError::Config("beatnote range needs start <= stop and step > 0".into()));
                    }
                    if (stop_hz - start_hz) / step_hz > MAX_SWEEP_POINTS as f64 {
                        return Err(CliError::Config("beatnote range is too fine".into()));
                    }
                }
                _ => {}
            }
            if g.scheme == Scheme::Amfm {
                let a = g.amfm.as_ref().ok_or_else(|| CliError::Config("scheme amfm needs an `amfm` block".into()))?;
                if a.turning_points == 0 || a.restarts == 0 || a.max_evals == 0 {
                    return Err(CliError::Config("turning_points, restarts and max_evals must be positive".into()));
                }
                mixion::AmEnvelope {
                    omega_max: 1.0,
                    plateau_levels: a.envelope.plateau_levels,
                    ramp_fraction: a.envelope.ramp_fraction,
                }
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            }
        }
        if let Some(c) = &self.cooling {
            c.nbar.resolve(n)?;
            if let Some(v) = &c.coolant {
                PlacementSpec::Explicit(v.clone()).to_core()?;
                mixion::cooling::coolant_indices(&Placement::Explicit(v.iter().map(|i| i - 1).collect()), n, v.len())
                    .map_err(|e| CliError::Config(e.to_string()))?;
            } else if chain.coolant.is_none() {
                return Err(CliError::Config("cooling needs `coolant` positions unless the chain is a pattern".into()));
            }
            if !(c.hard_threshold.is_finite() && c.hard_threshold >= 0.0) {
                return Err(CliError::Config("hard_threshold must be non-negative".into()));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() || s.values.len() > MAX_SWEEP_POINTS {
                return Err(CliError::Config(format!("sweep needs 1..={MAX_SWEEP_POINTS} values")));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config("sweep values must be finite".into()));
            }
            let integral = s.values.iter().all(|v| v.fract() == 0.0 && *v >= 1.0);
            match s.axis {
                SweepAxis::MassRatio | SweepAxis::NIons if self.chain.pattern.is_none() => {
                    return Err(CliError::Config("this sweep axis needs a pattern chain".into()))
                }
                SweepAxis::MassRatio if s.values.iter().any(|v| *v <= 0.0) => {
                    return Err(CliError::Config("mass ratios must be positive".into()))
                }
                SweepAxis::NIons | SweepAxis::Segments | SweepAxis::TurningPoints if !integral => {
                    return Err(CliError::Config("this sweep axis takes positive integers".into()))
                }
                SweepAxis::Segments | SweepAxis::Mu if self.gate.is_none() => {
                    return Err(CliError::Config("this sweep axis needs a `gate` block".into()))
                }
                SweepAxis::TurningPoints if self.gate.as_ref().map(|g| g.scheme) != Some(Scheme::Amfm) => {
                    return Err(CliError::Config("turning-point sweeps need the amfm scheme".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn fidelity_nbar(&self, n: usize) -> Result<Vec<f64>, CliError> {
        self.gate.as_ref().map(|g| g.nbar.resolve(n)).unwrap_or_else(|| Ok(vec![0.0; n]))
    }
}

impl AmFmSpec {
    pub fn envelope(&self) -> mixion::AmEnvelope {
        mixion::AmEnvelope {
            omega_max: 1.0,
            plateau_levels: self.envelope.plateau_levels,
            ramp_fraction: self.envelope.ramp_fraction,
        }
    }
}
