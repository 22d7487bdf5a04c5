//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use mixion::constants::{hz_to_rad, rad_to_hz};
use mixion::cooling::{coolant_indices, coolant_participation, Placement, DEFAULT_HARD_THRESHOLD};
use mixion::fock::fock_oracle;
use mixion::modes::{
    counter_propagating_delta_k, dynamical_matrix, lamb_dicke_matrix, normal_modes, spectral_stats,
};
use mixion::msgate::{alpha_map, chi, FidelityModel};
use mixion::optimize::{
    axial_mu_grid, solve_am, solve_am_at, solve_amfm, solve_dual_am, transverse_mu_grid, AmFmOptions, AmSolveOptions,
    OptimizationReport,
};
use mixion::{Direction, IonChain, NormalModeSet, PulseProgram, SegmentedAm, Species, TransverseModel, TrapConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const TAU: f64 = 200e-6;
const PAIRS: [(usize, usize); 4] = [(0, 4), (1, 4), (2, 4), (3, 4)];

fn trap(model: TransverseModel) -> TrapConfig {
    TrapConfig::new(171.0, hz_to_rad(3.06e6), hz_to_rad(3.06e6), hz_to_rad(0.16e6), model).unwrap()
}

fn mixed_chain(n: usize, n_ba: usize, placement: Placement, model: TransverseModel) -> IonChain {
    let ions = mixion::cooling::placement(&placement, n, n_ba, &Species::yb171(), &Species::ba138()).unwrap();
    IonChain::solved(ions, trap(model)).unwrap()
}

fn modes_eta(chain: &IonChain, dir: Direction) -> (NormalModeSet, DMatrix<f64>) {
    let modes = normal_modes(chain, dir).unwrap();
    let dk: Vec<f64> = chain
        .ions()
        .iter()
        .map(|s| counter_propagating_delta_k(if s.mass == 138.0 { 532e-9 } else { 355e-9 }))
        .collect();
    let eta = lamb_dicke_matrix(&modes, chain, &dk).unwrap();
    (modes, eta)
}

fn five_ion(dir: Direction) -> (NormalModeSet, DMatrix<f64>) {
    modes_eta(&mixed_chain(5, 1, Placement::Edge, TransverseModel::StaticCurvature), dir)
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x / target - 1.0).abs() <= rel
}

fn khz(w: f64) -> f64 {
    rad_to_hz(w) / 1e3
}

fn am_table(dir: Direction) -> Vec<OptimizationReport> {
    let (modes, eta) = five_ion(dir);
    let grid = if dir.is_transverse() { transverse_mu_grid(&modes) } else { axial_mu_grid(&modes) };
    let opts = AmSolveOptions::new(5, TAU, grid).unwrap();
    PAIRS
        .iter()
        .map(|&p| solve_am(&modes, &eta, p, &opts, &FidelityModel::ground_state(5)).unwrap())
        .collect()
}

struct Criterion {
    number: usize,
    title: &'static str,
    limit: Option<Duration>,
}

fn check(c: Criterion, body: impl FnOnce() -> (bool, String)) -> bool {
    let start = Instant::now();
    let (ok, detail) = body();
    let elapsed = start.elapsed();
    let in_time = c.limit.is_none_or(|l| elapsed <= l);
    let pass = ok && in_time;
    let timing = match c.limit {
        Some(l) => format!("{:.2} s, limit {:.0} s", elapsed.as_secs_f64(), l.as_secs_f64()),
        None => format!("{:.2} s", elapsed.as_secs_f64()),
    };
    println!("{} criterion {} ({}) [{timing}]", if pass { "PASS" } else { "FAIL" }, c.number, c.title);
    for line in detail.lines() {
        println!("    {line}");
    }
    pass
}

fn criterion_1() -> (bool, String) {
    let mut ok = false;
    let mut out = String::new();
    for model in [TransverseModel::PureRfScaling, TransverseModel::RfWithStaticDefocusing, TransverseModel::StaticCurvature]
    {
        let chain = mixed_chain(5, 1, Placement::Edge, model);
        let modes = normal_modes(&chain, Direction::TransverseX).unwrap();
        let s = spectral_stats(&modes).unwrap();
        let top = rad_to_hz(*modes.frequencies.last().unwrap());
        let pass = within(top, 3.403e6, 0.005)
            && within(rad_to_hz(s.largest_gap), 340e3, 0.15)
            && within(rad_to_hz(s.mean_adjacent_spacing), 8e3, 0.25);
        ok |= pass;
        out += &format!(
            "{model:?}: top {:.4} MHz, gap {:.1} kHz, spacing {:.2} kHz -> {}\n",
            top / 1e6,
            khz(s.largest_gap),
            khz(s.mean_adjacent_spacing),
            if pass { "match" } else { "no match" }
        );
    }
    (ok, out)
}

fn criterion_2() -> (bool, String) {
    let chain = mixed_chain(13, 4, Placement::Periodic, TransverseModel::StaticCurvature);
    let modes = normal_modes(&chain, Direction::TransverseX).unwrap();
    let s = spectral_stats(&modes).unwrap();
    let ok = s.isolated_mode_count == 4
        && within(rad_to_hz(s.largest_gap), 350e3, 0.15)
        && within(rad_to_hz(s.mean_adjacent_spacing), 15e3, 0.25);
    let detail = format!(
        "isolated {} (want 4), gap {:.1} kHz (want 350 ± 15%), spacing {:.2} kHz (want 15 ± 25%)",
        s.isolated_mode_count,
        khz(s.largest_gap),
        khz(s.mean_adjacent_spacing)
    );
    (ok, detail)
}

fn table_check(reports: &[OptimizationReport], fids: [f64; 4], oms: [f64; 4], fid_tol: f64, om_tol: f64) -> (bool, String) {
    let mut ok = true;
    let mut out = String::new();
    for (k, r) in reports.iter().enumerate() {
        let f = r.best.fidelity * 100.0;
        let om = khz(r.best.omega_max);
        let pass = (f - fids[k]).abs() <= fid_tol && within(om, oms[k], om_tol);
        ok &= pass;
        out += &format!(
            "pair ({}, 5): F {:.3}% (want {} ± {fid_tol}), Ω_max {:.1} kHz (want {} ± {:.0}%), μ {:.2} kHz\n",
            PAIRS[k].0 + 1,
            f,
            fids[k],
            om,
            oms[k],
            om_tol * 100.0,
            khz(r.best_mu)
        );
    }
    (ok, out)
}

fn criterion_3() -> (bool, String) {
    table_check(&am_table(Direction::Axial), [99.86, 99.86, 99.82, 99.81], [11.0, 11.0, 12.0, 9.0], 0.3, 0.20)
}

fn criterion_4() -> (bool, String) {
    let axial = am_table(Direction::Axial);
    let trans = am_table(Direction::TransverseX);
    let (mut ok, mut out) = table_check(&trans, [81.03, 85.86, 95.65, 99.22], [400.0, 310.0, 175.0, 70.0], 3.0, 0.25);
    for k in 0..2 {
        let ratio = trans[k].best.omega_max / axial[k].best.omega_max;
        ok &= ratio > 10.0;
        out += &format!("pair ({}, 5): transverse/axial Ω_max ratio {ratio:.1} (want > 10)\n", k + 1);
    }
    (ok, out)
}

fn criterion_5() -> (bool, String) {
    let (modes, eta) = five_ion(Direction::TransverseX);
    let opts = AmSolveOptions::new(10, TAU, transverse_mu_grid(&modes)).unwrap();
    let r = solve_am(&modes, &eta, (0, 4), &opts, &FidelityModel::ground_state(5)).unwrap();
    let f = r.best.fidelity;
    let om = khz(r.best.omega_max);
    let ok = f >= 0.999 && within(om, 900.0, 0.25);
    (ok, format!("F {:.4}% (want ≥ 99.9), Ω_max {om:.1} kHz (want 900 ± 25%)", f * 100.0))
}

fn criterion_6() -> (bool, String) {
    let (modes, eta) = five_ion(Direction::TransverseX);
    let grid = transverse_mu_grid(&modes);
    let model = FidelityModel::ground_state(5);
    let p5 = solve_dual_am(&modes, &eta, (0, 4), &AmSolveOptions::new(5, TAU, grid.clone()).unwrap(), (1.0, 1.0), &model)
        .unwrap();
    let p7 = solve_dual_am(&modes, &eta, (0, 4), &AmSolveOptions::new(7, TAU, grid).unwrap(), (1.0, 1.0), &model).unwrap();
    let [a, b] = p5.best.beam_maxima.unwrap();
    let target_mu = modes.frequencies[3] + hz_to_rad(8e3);
    let f5 = p5.best.fidelity * 100.0;
    let f7 = p7.best.fidelity * 100.0;
    let checks = [
        ((f5 - 95.22).abs() <= 2.0, format!("P=5: F {f5:.3}% (want 95.22 ± 2)")),
        (b / a > 10.0, format!("P=5: Ω_532 {:.1} kHz / Ω_355 {:.1} kHz = {:.2} (want > 10)", khz(b), khz(a), b / a)),
        (
            (p5.best_mu - target_mu).abs() <= hz_to_rad(4e3),
            format!("P=5: μ − ω_4 = {:.2} kHz (want 8 ± 4)", khz(p5.best_mu - modes.frequencies[3])),
        ),
        (f7 >= 99.0, format!("P=7: F {f7:.3}% (want ≥ 99)")),
    ];
    let ok = checks.iter().all(|c| c.0);
    let detail = checks.iter().map(|c| format!("{} {}", if c.0 { "ok  " } else { "MISS" }, c.1)).collect::<Vec<_>>().join("\n");
    (ok, detail)
}

fn criterion_7() -> (bool, String) {
    let (modes, eta) = five_ion(Direction::TransverseX);
    let opts = AmFmOptions::new(TAU, modes.frequencies[3] + hz_to_rad(2.5e3), 4);
    let r = solve_amfm(&modes, &eta, (0, 4), &opts, &FidelityModel::ground_state(5)).unwrap();
    let f = r.best.fidelity * 100.0;
    let om = khz(r.best.omega_max);
    let ok = f >= 99.5 && om <= 200.0;
    let detail = format!(
        "F {f:.3}% (want ≥ 99.5), Ω_max {om:.1} kHz (want ≤ 200), final cost {:.3e}, converged {}",
        r.diagnostics.cost.unwrap_or(f64::NAN),
        r.diagnostics.converged
    );
    (ok, detail)
}

fn criterion_8() -> (bool, String) {
    let chain = IonChain::solved(vec![Species::yb171(), Species::ba138()], trap(TransverseModel::StaticCurvature)).unwrap();
    let (modes, eta) = modes_eta(&chain, Direction::Axial);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let tau = 50e-6;
    let (mut worst_chi, mut worst_alpha) = (0.0f64, 0.0f64);
    let cases = 24;
    for _ in 0..cases {
        let lo = rad_to_hz(modes.frequencies[0]) + 15e3;
        let hi = rad_to_hz(modes.frequencies[1]) - 15e3;
        let mu = hz_to_rad(rng.random_range(lo..hi));
        let dmin = modes.frequencies.iter().map(|w| (mu - w).abs()).fold(f64::INFINITY, f64::min);
        let cap = 0.1 * dmin / eta.amax();
        let segments = rng.random_range(1..=4);
        let omegas: Vec<f64> = (0..segments).map(|_| rng.random_range(-cap..cap)).collect();
        let pulse = PulseProgram::Am(SegmentedAm::new(tau, omegas, mu).unwrap());
        let est = fock_oracle(&pulse, &modes, &eta, 12).unwrap();
        let a = alpha_map(&pulse, &modes, &eta, &[0, 1]).unwrap();
        let x = chi(&pulse, &modes, &eta, 0, 1).unwrap();
        worst_chi = worst_chi.max((est.chi - x).abs());
        for i in 0..2 {
            for m in 0..2 {
                worst_alpha = worst_alpha.max((est.alpha[i][m] - a[(i, m)]).norm());
            }
        }
    }
    let ok = worst_chi < 1e-4 && worst_alpha < 1e-4;
    (ok, format!("{cases} pulses: max |Δχ| = {worst_chi:.2e}, max |Δα| = {worst_alpha:.2e} (want < 1e-4)"))
}

fn orthonormality() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_orth = 0.0f64;
    let mut worst_res = 0.0f64;
    for _ in 0..40 {
        let n = rng.random_range(2..=13);
        let ions: Vec<Species> =
            (0..n).map(|_| if rng.random_bool(0.3) { Species::ba138() } else { Species::yb171() }).collect();
        let chain = IonChain::solved(ions, trap(TransverseModel::StaticCurvature)).unwrap();
        for dir in [Direction::Axial, Direction::TransverseX] {
            let m = normal_modes(&chain, dir).unwrap();
            let d = dynamical_matrix(&chain, dir).unwrap();
            let eye = DMatrix::<f64>::identity(n, n);
            worst_orth = worst_orth.max((m.b.transpose() * &m.b - eye).amax());
            let wmax2 = m.frequencies.last().unwrap().powi(2);
            for k in 0..n {
                let col = m.b.column(k);
                let r = (&d * col - col * m.frequencies[k].powi(2)).norm() / wmax2;
                worst_res = worst_res.max(r);
            }
        }
    }
    (worst_orth < 1e-10 && worst_res < 1e-8, format!("modes: max |BᵀB − I| {worst_orth:.1e}, max eigen-residual {worst_res:.1e}"))
}

fn linearity() -> (bool, String) {
    let (modes, eta) = five_ion(Direction::TransverseX);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = rng.random_range(1..=10);
        let omegas: Vec<f64> = (0..p).map(|_| rng.random_range(-1e6..1e6)).collect();
        let c = rng.random_range(-4.0..4.0);
        let mu = modes.frequencies[rng.random_range(0..5)] + rng.random_range(-3e5..3e5);
        let p1 = PulseProgram::Am(SegmentedAm::new(TAU, omegas.clone(), mu).unwrap());
        let p2 = PulseProgram::Am(SegmentedAm::new(TAU, omegas.iter().map(|o| o * c).collect(), mu).unwrap());
        let a1 = alpha_map(&p1, &modes, &eta, &[0, 4]).unwrap();
        let a2 = alpha_map(&p2, &modes, &eta, &[0, 4]).unwrap();
        let scale = a2.iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst = worst.max(a1.iter().zip(a2.iter()).map(|(x, y)| (x * c - y).norm()).fold(0.0, f64::max) / scale);
        let (x1, x2) = (chi(&p1, &modes, &eta, 0, 4).unwrap(), chi(&p2, &modes, &eta, 0, 4).unwrap());
        worst = worst.max((x1 * c * c - x2).abs() / x2.abs());
    }
    (worst < 1e-12, format!("msgate: max relative linearity/bilinearity error {worst:.1e}"))
}

fn decoupling() -> (bool, String) {
    let mut worst_alpha = 0.0f64;
    let mut worst_chi = 0.0f64;
    for dir in [Direction::Axial, Direction::TransverseX] {
        let (modes, eta) = five_ion(dir);
        for &pair in &PAIRS {
            for k in 0..5 {
                let mu = modes.frequencies[k] + hz_to_rad(4e3);
                let opts = AmSolveOptions::new(11, TAU, vec![mu]).unwrap();
                let s = solve_am_at(&modes, &eta, pair, mu, &opts, &FidelityModel::ground_state(5)).unwrap();
                worst_alpha = worst_alpha.max(s.result.alpha.iter().flatten().map(|a| a.norm()).fold(0.0, f64::max));
                worst_chi = worst_chi.max((s.result.chi.abs() - FRAC_PI_4).abs());
            }
        }
    }
    (
        worst_alpha < 1e-10 && worst_chi < 1e-10,
        format!("optimize: P = 11 max |α| {worst_alpha:.1e}, max ||χ| − π/4| {worst_chi:.1e}"),
    )
}

fn completeness() -> (bool, String) {
    let mut worst = 0.0f64;
    for n in 2..=13 {
        for k in 1..=n {
            for placement in [Placement::Edge, Placement::Periodic] {
                let chain = mixed_chain(n, k, placement.clone(), TransverseModel::StaticCurvature);
                let idx = coolant_indices(&placement, n, k).unwrap();
                for dir in [Direction::Axial, Direction::TransverseX] {
                    let modes = normal_modes(&chain, dir).unwrap();
                    let total: f64 = coolant_participation(&modes, &idx).unwrap().iter().sum();
                    worst = worst.max((total - k as f64).abs());
                }
            }
        }
    }
    (worst < 1e-9, format!("cooling: max |Σ p_m − n_coolant| {worst:.1e}"))
}

fn round_trip() -> (bool, String) {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg = json!({
        "chain": { "pattern": { "n_ions": 5, "n_coolant": 1, "host": "171Yb+", "coolant": "138Ba+", "placement": "edge" } },
        "trap": { "omega_x_hz": 3.06e6, "omega_y_hz": 3.06e6, "omega_z_hz": 0.16e6, "transverse_model": "static-curvature" },
        "direction": "transverse-x",
        "gate": { "pair": [1, 5], "scheme": "dual-am" }
    });
    let run = |cfg: &serde_json::Value, tag: &str| {
        let path = dir.path().join(format!("{tag}.json"));
        fs::write(&path, cfg.to_string()).unwrap();
        let out = dir.path().join(tag);
        let status = Command::new(env!("CARGO_BIN_EXE_mixion"))
            .args(["gate", "--config"])
            .arg(&path)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        (status.success(), fs::read(out.join("report.json")).unwrap_or_default())
    };
    let (ok1, first) = run(&cfg, "first");
    let (ok2, second) = run(&cfg, "second");
    let embedded: serde_json::Value = serde_json::from_slice::<serde_json::Value>(&first).map(|v| v["config"].clone()).unwrap_or_default();
    let (ok3, third) = run(&embedded, "embedded");
    let ok = ok1 && ok2 && ok3 && !first.is_empty() && first == second && first == third;
    (ok, format!("cli: rerun identical {}, embedded-config rerun identical {}", first == second, first == third))
}

fn criterion_9() -> (bool, String) {
    let parts = [orthonormality(), linearity(), decoupling(), completeness(), round_trip()];
    let ok = parts.iter().all(|p| p.0);
    (ok, parts.iter().map(|p| format!("{} {}", if p.0 { "ok  " } else { "MISS" }, p.1)).collect::<Vec<_>>().join("\n"))
}

fn criterion_10() -> (bool, String) {
    let chain = mixed_chain(13, 4, Placement::Periodic, TransverseModel::StaticCurvature);
    let coolant = coolant_indices(&Placement::Periodic, 13, 4).unwrap();
    let mt = normal_modes(&chain, Direction::TransverseX).unwrap();
    let ma = normal_modes(&chain, Direction::Axial).unwrap();
    let iso = spectral_stats(&mt).unwrap().isolated_mode_count;
    let pt = coolant_participation(&mt, &coolant).unwrap();
    let pa = coolant_participation(&ma, &coolant).unwrap();
    let band = &pt[..13 - iso];
    let dark = band.iter().filter(|&&p| p < DEFAULT_HARD_THRESHOLD).count();
    let min_axial = pa.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = iso == 4 && dark >= 8 && min_axial > DEFAULT_HARD_THRESHOLD;
    let listing = band.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(", ");
    let detail = format!(
        "{dark} of {} non-isolated transverse modes below 0.01 (want ≥ 8 of 9): [{listing}]\nmin axial participation {min_axial:.4} (want > 0.01)",
        band.len()
    );
    (ok, detail)
}

fn main() {
    let secs = |s: u64| Some(Duration::from_secs(s));
    let results = [
        check(Criterion { number: 1, title: "five-ion mode spectrum", limit: secs(1) }, criterion_1),
        check(Criterion { number: 2, title: "thirteen-ion mode spectrum", limit: secs(1) }, criterion_2),
        check(Criterion { number: 3, title: "axial five-segment AM table", limit: secs(60) }, criterion_3),
        check(Criterion { number: 4, title: "transverse five-segment AM table", limit: None }, criterion_4),
        check(Criterion { number: 5, title: "ten-segment transverse AM", limit: None }, criterion_5),
        check(Criterion { number: 6, title: "dual-beam AM", limit: None }, criterion_6),
        check(Criterion { number: 7, title: "AM-FM with four turning points", limit: None }, criterion_7),
        check(Criterion { number: 8, title: "truncated Fock-space oracle", limit: None }, criterion_8),
        check(Criterion { number: 9, title: "property suites", limit: None }, criterion_9),
        check(Criterion { number: 10, title: "cooling hardness", limit: secs(1) }, criterion_10),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed} of {} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
