use std::path::Path;

use mixion::constants::{hz_to_rad, rad_to_hz};
use mixion::cooling::{cooling_report, CoolingReport, FluctuationNormalization};
use mixion::modes::{counter_propagating_delta_k, lamb_dicke_matrix, normal_modes, spectral_stats, top_mode_mismatch};
use mixion::msgate::alpha_trajectory;
use mixion::optimize::{
    default_mu_grid, linear_grid, solve_am, solve_amfm, solve_dual_am, AmFmOptions, AmSolveOptions, Diagnostics,
    OptimizationReport,
};
use mixion::{FidelityModel, IonChain, NormalModeSet, PulseProgram, SpectralStats};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    CustomSpecies, MuGrid, PlacementSpec, RunConfig, Scheme, SpeciesSpec, SweepAxis,
};
use crate::error::CliError;
use crate::output::{num, write_csv, write_json};

pub struct Setup {
    pub chain: IonChain,
    pub modes: NormalModeSet,
    pub eta: DMatrix<f64>,
    /// Pattern coolant positions, 0-based.
    pub coolant: Option<Vec<usize>>,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    let resolved = cfg.chain.resolve()?;
    let chain = IonChain::solved(resolved.ions, cfg.trap.to_core()?)?;
    let modes = normal_modes(&chain, cfg.direction)?;
    let dk: Vec<f64> = resolved.wavelengths.iter().map(|&l| counter_propagating_delta_k(l)).collect();
    let eta = lamb_dicke_matrix(&modes, &chain, &dk)?;
    Ok(Setup { chain, modes, eta, coolant: resolved.coolant })
}

#[derive(Debug, Serialize)]
struct StatsOut {
    largest_gap_hz: f64,
    mean_spacing_hz: f64,
    isolated_mode_count: usize,
}

impl From<SpectralStats> for StatsOut {
    fn from(s: SpectralStats) -> Self {
        StatsOut {
            largest_gap_hz: rad_to_hz(s.largest_gap),
            mean_spacing_hz: rad_to_hz(s.mean_adjacent_spacing),
            isolated_mode_count: s.isolated_mode_count,
        }
    }
}

fn stats_of(modes: &NormalModeSet) -> Result<Option<SpectralStats>, CliError> {
    Ok(if modes.len() >= 2 { Some(spectral_stats(modes)?) } else { None })
}

#[derive(Serialize)]
struct ModesReport<'a> {
    config: &'a RunConfig,
    species: Vec<String>,
    equilibrium_z_m: Vec<f64>,
    frequencies_hz: Vec<f64>,
    stats: Option<StatsOut>,
    top_mode_mismatch: f64,
}

pub fn cmd_modes(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let n = s.modes.len();
    let mut header = vec!["mode_index".to_string(), "frequency_Hz".to_string()];
    header.extend((1..=n).map(|i| format!("b_{i}")));
    let rows: Vec<Vec<String>> = (0..n)
        .map(|m| {
            let mut r = vec![(m + 1).to_string(), num(rad_to_hz(s.modes.frequencies[m]))];
            r.extend((0..n).map(|i| num(s.modes.b[(i, m)])));
            r
        })
        .collect();
    write_csv(&out.join("modes.csv"), &header, &rows)?;
    let report = ModesReport {
        config: cfg,
        species: s.chain.ions().iter().map(|x| x.label.clone()).collect(),
        equilibrium_z_m: s.chain.equilibrium_z().map(<[f64]>::to_vec).unwrap_or_default(),
        frequencies_hz: s.modes.frequencies.iter().map(|&w| rad_to_hz(w)).collect(),
        stats: stats_of(&s.modes)?.map(StatsOut::from),
        top_mode_mismatch: top_mode_mismatch(&s.chain, &s.modes),
    };
    write_json(&out.join("stats.json"), &report)
}

fn mu_grid(cfg: &RunConfig, modes: &NormalModeSet) -> Result<Vec<f64>, CliError> {
    let g = cfg.gate.as_ref().expect("validated gate block");
    Ok(match &g.mu {
        None => default_mu_grid(modes),
        Some(MuGrid::Values { values_hz }) => values_hz.iter().map(|&v| hz_to_rad(v)).collect(),
        Some(MuGrid::Range { start_hz, stop_hz, step_hz }) => {
            linear_grid(hz_to_rad(*start_hz), hz_to_rad(*stop_hz), hz_to_rad(*step_hz))
        }
        Some(MuGrid::Points { points }) => {
            points.iter().map(|p| p.resolve(&modes.frequencies)).collect::<Result<_, _>>()?
        }
    })
}

/// Runs the configured gate scheme on a prepared chain.
pub fn solve_gate(cfg: &RunConfig, s: &Setup) -> Result<(OptimizationReport, (usize, usize)), CliError> {
    let g = cfg.gate.as_ref().ok_or_else(|| CliError::Config("no `gate` block".into()))?;
    let n = s.modes.len();
    let pair = (g.pair[0].resolve(n)?, g.pair[1].resolve(n)?);
    let model = FidelityModel { nbar: g.nbar.resolve(n)? };
    let report = match g.scheme {
        Scheme::Am | Scheme::DualAm => {
            let opts = AmSolveOptions::new(g.segments, g.tau_s, mu_grid(cfg, &s.modes)?)?;
            if g.scheme == Scheme::Am {
                solve_am(&s.modes, &s.eta, pair, &opts, &model)?
            } else {
                let w = (g.norm_weights[0], g.norm_weights[1]);
                solve_dual_am(&s.modes, &s.eta, pair, &opts, w, &model)?
            }
        }
        Scheme::Amfm => {
            let a = g.amfm.as_ref().ok_or_else(|| CliError::Config("scheme amfm needs an `amfm` block".into()))?;
            let mut opts = AmFmOptions::new(g.tau_s, a.mu_init.resolve(&s.modes.frequencies)?, a.turning_points);
            opts.envelope = a.envelope();
            opts.restarts = a.restarts;
            opts.seed = cfg.seed;
            opts.cost = a.cost;
            opts.search_range = hz_to_rad(a.search_range_hz);
            opts.max_evals = a.max_evals;
            opts.cost_threshold = a.cost_threshold;
            solve_amfm(&s.modes, &s.eta, pair, &opts, &model)?
        }
    };
    Ok((report, pair))
}

#[derive(Serialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
enum PulseOut {
    Am { tau_s: f64, mu_hz: f64, segments_hz: Vec<f64> },
    DualAm { tau_s: f64, mu_hz: f64, beam_a_hz: Vec<f64>, beam_b_hz: Vec<f64>, beam_b_ions: Vec<usize> },
    Amfm { tau_s: f64, mu_ref_hz: f64, turning_points_hz: Vec<f64>, omega_max_hz: f64, plateau_levels: [f64; 3], ramp_fraction: f64 },
}

fn hz(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&w| rad_to_hz(w)).collect()
}

impl From<&PulseProgram> for PulseOut {
    fn from(p: &PulseProgram) -> Self {
        match p {
            PulseProgram::Am(a) => PulseOut::Am { tau_s: a.tau, mu_hz: rad_to_hz(a.mu), segments_hz: hz(&a.omegas) },
            PulseProgram::DualAm(d) => PulseOut::DualAm {
                tau_s: d.tau,
                mu_hz: rad_to_hz(d.mu),
                beam_a_hz: hz(&d.omegas_a),
                beam_b_hz: hz(&d.omegas_b),
                beam_b_ions: d.ions_b.iter().map(|i| i + 1).collect(),
            },
            PulseProgram::AmFm(f) => PulseOut::Amfm {
                tau_s: f.tau(),
                mu_ref_hz: rad_to_hz(f.profile.mu_ref),
                turning_points_hz: hz(&f.profile.turning_points),
                omega_max_hz: rad_to_hz(f.envelope.omega_max),
                plateau_levels: f.envelope.plateau_levels,
                ramp_fraction: f.envelope.ramp_fraction,
            },
        }
    }
}

#[derive(Serialize)]
struct ComplexOut {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct ScanOut {
    mu_hz: f64,
    fidelity: Option<f64>,
    omega_max_hz: Option<f64>,
    error: Option<String>,
}

#[derive(Serialize)]
struct GateReport<'a> {
    config: &'a RunConfig,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<GateOut>,
}

#[derive(Serialize)]
struct GateOut {
    pair: [usize; 2],
    best_mu_hz: f64,
    fidelity: f64,
    chi: f64,
    omega_max_hz: f64,
    beam_maxima_hz: Option<[f64; 2]>,
    /// `alpha[r][m]` for the two driven ions.
    alpha: Vec<Vec<ComplexOut>>,
    pulse: PulseOut,
    diagnostics: Diagnostics,
    per_mu: Vec<ScanOut>,
}

pub fn cmd_gate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let g = cfg.gate.as_ref().ok_or_else(|| CliError::Config("gate needs a `gate` block".into()))?;
    let (report, pair) = match solve_gate(cfg, &s) {
        Ok(r) => r,
        Err(e) => {
            let failed = GateReport { config: cfg, status: "failed", error: Some(e.to_string()), result: None };
            write_json(&out.join("report.json"), &failed)?;
            return Err(e);
        }
    };
    let best = &report.best;
    let converged = report.diagnostics.converged;

    let scan_rows: Vec<Vec<String>> = report
        .per_mu
        .iter()
        .map(|p| {
            vec![
                num(rad_to_hz(p.mu)),
                p.fidelity.map(num).unwrap_or_default(),
                p.omega_max.map(|w| num(rad_to_hz(w))).unwrap_or_default(),
                p.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&out.join("scan.csv"), &strings(&["mu_Hz", "fidelity", "omega_max_Hz", "error"]), &scan_rows)?;

    let tau = best.pulse.tau();
    let samples = g.trajectory_samples;
    let times: Vec<f64> = (0..samples).map(|k| tau * k as f64 / (samples - 1) as f64).collect();
    let mut pulse_rows = Vec::with_capacity(samples);
    for &t in &times {
        pulse_rows.push(vec![
            num(t),
            num(rad_to_hz(best.pulse.sample_amplitude(pair.0, t)?)),
            num(rad_to_hz(best.pulse.sample_amplitude(pair.1, t)?)),
            num(rad_to_hz(best.pulse.drive_frequency(t)?)),
        ]);
    }
    let pulse_header = vec![
        "t_s".to_string(),
        format!("omega_{}_Hz", pair.0 + 1),
        format!("omega_{}_Hz", pair.1 + 1),
        "mu_Hz".to_string(),
    ];
    write_csv(&out.join("pulse.csv"), &pulse_header, &pulse_rows)?;

    let driven = [pair.0, pair.1];
    let traj = alpha_trajectory(&best.pulse, &s.modes, &s.eta, &driven, &times)?;
    let n = s.modes.len();
    let mut header = vec!["t_s".to_string()];
    for ion in driven {
        for m in 1..=n {
            header.push(format!("alpha_{}_{m}_re", ion + 1));
            header.push(format!("alpha_{}_{m}_im", ion + 1));
        }
    }
    let rows: Vec<Vec<String>> = times
        .iter()
        .zip(&traj)
        .map(|(&t, a)| {
            let mut r = vec![num(t)];
            for row in 0..2 {
                for m in 0..n {
                    r.push(num(a[(row, m)].re));
                    r.push(num(a[(row, m)].im));
                }
            }
            r
        })
        .collect();
    write_csv(&out.join("alpha_trajectory.csv"), &header, &rows)?;

    let result = GateOut {
        pair: [pair.0 + 1, pair.1 + 1],
        best_mu_hz: rad_to_hz(report.best_mu),
        fidelity: best.fidelity,
        chi: best.chi,
        omega_max_hz: rad_to_hz(best.omega_max),
        beam_maxima_hz: best.beam_maxima.map(|[a, b]| [rad_to_hz(a), rad_to_hz(b)]),
        alpha: best.alpha.iter().map(|r| r.iter().map(|z| ComplexOut { re: z.re, im: z.im }).collect()).collect(),
        pulse: PulseOut::from(&best.pulse),
        diagnostics: report.diagnostics.clone(),
        per_mu: report
            .per_mu
            .iter()
            .map(|p| ScanOut {
                mu_hz: rad_to_hz(p.mu),
                fidelity: p.fidelity,
                omega_max_hz: p.omega_max.map(rad_to_hz),
                error: p.error.clone(),
            })
            .collect(),
    };
    let status = if converged { "ok" } else { "not-converged" };
    write_json(&out.join("report.json"), &GateReport { config: cfg, status, error: None, result: Some(result) })?;
    if !converged {
        return Err(CliError::Solver(format!(
            "optimiser did not reach the cost threshold (final cost {:.3e})",
            report.diagnostics.cost.unwrap_or(f64::NAN)
        )));
    }
    Ok(())
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[derive(Serialize)]
struct CoolingOut<'a> {
    config: &'a RunConfig,
    coolant: Vec<usize>,
    normalization: FluctuationNormalization,
    stats: Option<StatsOut>,
    participation: &'a [f64],
    delta_q_m: &'a [f64],
    hard_to_cool_count: usize,
    isolated_band_participation: f64,
    min_participation_outside_isolated_band: Option<f64>,
}

pub fn cmd_cooling(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = setup(cfg)?;
    let c = cfg.cooling.as_ref().ok_or_else(|| CliError::Config("cooling needs a `cooling` block".into()))?;
    let n = s.modes.len();
    let coolant: Vec<usize> = match &c.coolant {
        Some(v) => v.iter().map(|i| i - 1).collect(),
        None => s.coolant.clone().ok_or_else(|| CliError::Config("no coolant positions".into()))?,
    };
    let r: CoolingReport = cooling_report(&s.chain, &s.modes, &coolant, &c.nbar.resolve(n)?, c.normalization, c.hard_threshold)?;

    let part_rows: Vec<Vec<String>> = (0..n)
        .map(|m| {
            vec![
                (m + 1).to_string(),
                num(rad_to_hz(s.modes.frequencies[m])),
                num(r.participation[m]),
                r.hard_to_cool[m].to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("participation.csv"),
        &strings(&["mode_index", "frequency_Hz", "participation", "hard_to_cool"]),
        &part_rows,
    )?;
    let dq_rows: Vec<Vec<String>> = (0..n)
        .map(|i| vec![(i + 1).to_string(), s.chain.ions()[i].label.clone(), num(r.delta_q[i])])
        .collect();
    write_csv(&out.join("fluctuations.csv"), &strings(&["ion_index", "species", "delta_q_m"]), &dq_rows)?;

    let iso = r.stats.map(|x| x.isolated_mode_count).unwrap_or(0);
    let report = CoolingOut {
        config: cfg,
        coolant: r.coolant.iter().map(|i| i + 1).collect(),
        normalization: c.normalization,
        stats: r.stats.map(StatsOut::from),
        participation: &r.participation,
        delta_q_m: &r.delta_q,
        hard_to_cool_count: r.hard_to_cool.iter().filter(|&&h| h).count(),
        isolated_band_participation: r.participation[n - iso..].iter().sum(),
        min_participation_outside_isolated_band: r.participation[..n - iso].iter().copied().reduce(f64::min),
    };
    write_json(&out.join("cooling.json"), &report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub n_ions: Option<usize>,
    pub top_mode_hz: Option<f64>,
    pub largest_gap_hz: Option<f64>,
    pub mean_spacing_hz: Option<f64>,
    pub isolated_mode_count: Option<usize>,
    pub top_mode_mismatch: Option<f64>,
    pub fidelity: Option<f64>,
    pub omega_max_hz: Option<f64>,
    pub best_mu_hz: Option<f64>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

/// The run configuration with the sweep axis set to `value`.
fn config_at(cfg: &RunConfig, axis: SweepAxis, value: f64) -> Result<RunConfig, CliError> {
    let mut c = cfg.clone();
    c.sweep = None;
    match axis {
        SweepAxis::MassRatio => {
            let p = c.chain.pattern.as_mut().expect("validated pattern chain");
            let (host, _) = p.host.resolve()?;
            let (cool, wl) = p.coolant.resolve()?;
            p.coolant = SpeciesSpec::Custom(CustomSpecies {
                label: cool.label,
                mass: host.mass / value,
                wavelength_nm: wl * 1e9,
            });
        }
        SweepAxis::NIons => {
            let p = c.chain.pattern.as_mut().expect("validated pattern chain");
            p.n_ions = value as usize;
            p.n_coolant = p.n_coolant.min(p.n_ions);
            if let PlacementSpec::Explicit(_) = p.placement {
                return Err(CliError::Config("explicit placements cannot be resized".into()));
            }
        }
        SweepAxis::Segments => c.gate.as_mut().expect("validated gate").segments = value as usize,
        SweepAxis::TurningPoints => {
            let g = c.gate.as_mut().expect("validated gate");
            g.amfm.as_mut().ok_or_else(|| CliError::Config("no `amfm` block".into()))?.turning_points = value as usize;
        }
        SweepAxis::Mu => c.gate.as_mut().expect("validated gate").mu = Some(MuGrid::Values { values_hz: vec![value] }),
    }
    c.validate()?;
    Ok(c)
}

fn sweep_row(cfg: &RunConfig, axis: SweepAxis, index: usize, value: f64) -> SweepRow {
    let mut row = SweepRow {
        index,
        value,
        n_ions: None,
        top_mode_hz: None,
        largest_gap_hz: None,
        mean_spacing_hz: None,
        isolated_mode_count: None,
        top_mode_mismatch: None,
        fidelity: None,
        omega_max_hz: None,
        best_mu_hz: None,
        converged: None,
        error: None,
    };
    let outcome = (|| -> Result<(), CliError> {
        let c = config_at(cfg, axis, value)?;
        let s = setup(&c)?;
        row.n_ions = Some(s.modes.len());
        row.top_mode_hz = s.modes.frequencies.last().map(|&w| rad_to_hz(w));
        row.top_mode_mismatch = Some(top_mode_mismatch(&s.chain, &s.modes));
        if let Some(st) = stats_of(&s.modes)? {
            row.largest_gap_hz = Some(rad_to_hz(st.largest_gap));
            row.mean_spacing_hz = Some(rad_to_hz(st.mean_adjacent_spacing));
            row.isolated_mode_count = Some(st.isolated_mode_count);
        }
        if c.gate.is_some() {
            let (r, _) = solve_gate(&c, &s)?;
            row.fidelity = Some(r.best.fidelity);
            row.omega_max_hz = Some(rad_to_hz(r.best.omega_max));
            row.best_mu_hz = Some(rad_to_hz(r.best_mu));
            row.converged = Some(r.diagnostics.converged);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.to_string());
    }
    row
}

/// Sweep rows in value order; rows are computed concurrently.
pub fn sweep_rows(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep needs a `sweep` block".into()))?;
    Ok(sw.values.par_iter().enumerate().map(|(k, &v)| sweep_row(cfg, sw.axis, k, v)).collect())
}

#[derive(Serialize)]
struct SweepOut<'a> {
    config: &'a RunConfig,
    rows: &'a [SweepRow],
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let rows = sweep_rows(cfg)?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                num(r.value),
                r.n_ions.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.top_mode_hz),
                opt(r.largest_gap_hz),
                opt(r.mean_spacing_hz),
                r.isolated_mode_count.map(|n| n.to_string()).unwrap_or_default(),
                opt(r.top_mode_mismatch),
                opt(r.fidelity),
                opt(r.omega_max_hz),
                opt(r.best_mu_hz),
                r.converged.map(|b| b.to_string()).unwrap_or_default(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let header = strings(&[
        "index",
        "value",
        "n_ions",
        "top_mode_Hz",
        "largest_gap_Hz",
        "mean_spacing_Hz",
        "isolated_mode_count",
        "top_mode_mismatch",
        "fidelity",
        "omega_max_Hz",
        "best_mu_Hz",
        "converged",
        "error",
    ]);
    write_csv(&out.join("sweep.csv"), &header, &table)?;
    write_json(&out.join("sweep.json"), &SweepOut { config: cfg, rows: &rows })?;
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(CliError::Solver(format!("all {} sweep rows failed", rows.len())));
    }
    Ok(())
}
