mod common;

use std::f64::consts::FRAC_PI_4;

use common::{chain, five_ion_mixed, modes_and_eta};
use mixion::constants::hz_to_rad;
use mixion::msgate::FidelityModel;
use mixion::optimize::{
    axial_mu_grid, scan_mu, solve_am, solve_am_at, solve_amfm, solve_dual_am, transverse_mu_grid, AmFmOptions,
    AmSolveOptions,
};
use mixion::{Direction, Error, Species};
use nalgebra::DMatrix;

const TAU: f64 = 200e-6;

fn max_alpha(r: &mixion::GateResult) -> f64 {
    r.alpha.iter().flatten().map(|a| a.norm()).fold(0.0, f64::max)
}

#[test]
fn full_rank_segmentation_decouples_exactly() {
    let c = chain(five_ion_mixed());
    for dir in [Direction::Axial, Direction::TransverseX] {
        let (modes, eta) = modes_and_eta(&c, dir);
        let model = FidelityModel::ground_state(5);
        let grid: Vec<f64> = (0..5).map(|k| modes.frequencies[k] + hz_to_rad(3e3 + 1e3 * k as f64)).collect();
        for &mu in &grid {
            let opts = AmSolveOptions::new(11, TAU, vec![mu]).unwrap();
            for pair in [(0, 4), (1, 4), (0, 2)] {
                let s = solve_am_at(&modes, &eta, pair, mu, &opts, &model).unwrap();
                assert!(max_alpha(&s.result) < 1e-10, "{dir:?} {pair:?}: {:e}", max_alpha(&s.result));
                assert!((s.result.chi.abs() - FRAC_PI_4).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn returned_phase_is_a_quarter_turn_for_every_solver() {
    let c = chain(five_ion_mixed());
    let (modes, eta) = modes_and_eta(&c, Direction::TransverseX);
    let model = FidelityModel::ground_state(5);
    let mu = modes.frequencies[3] + hz_to_rad(8e3);
    let opts = AmSolveOptions::new(5, TAU, vec![mu]).unwrap();
    let am = solve_am(&modes, &eta, (0, 4), &opts, &model).unwrap();
    let dual = solve_dual_am(&modes, &eta, (0, 4), &opts, (1.0, 1.0), &model).unwrap();
    for r in [&am.best, &dual.best] {
        assert!((r.chi.abs() - FRAC_PI_4).abs() < 1e-10, "{}", r.chi);
    }
    let mut fm = AmFmOptions::new(TAU, modes.frequencies[3] + hz_to_rad(2.5e3), 2);
    fm.restarts = 2;
    fm.max_evals = 60;
    let r = solve_amfm(&modes, &eta, (0, 4), &fm, &model).unwrap();
    assert!((r.best.chi.abs() - FRAC_PI_4).abs() < 1e-10, "{}", r.best.chi);
}

#[test]
fn dual_beam_matches_single_beam_on_equal_masses() {
    let c = chain(vec![Species::yb171(); 5]);
    let (modes, eta) = modes_and_eta(&c, Direction::TransverseX);
    let model = FidelityModel::ground_state(5);
    let opts = AmSolveOptions::new(5, TAU, transverse_mu_grid(&modes)).unwrap();
    let am = solve_am(&modes, &eta, (0, 4), &opts, &model).unwrap();
    let dual = solve_dual_am(&modes, &eta, (0, 4), &opts, (1.0, 1.0), &model).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    assert!(rel(dual.best.fidelity, am.best.fidelity) < 1e-6, "{} vs {}", dual.best.fidelity, am.best.fidelity);
    assert!(rel(dual.best.omega_max, am.best.omega_max) < 1e-6, "{} vs {}", dual.best.omega_max, am.best.omega_max);
}

#[test]
fn single_point_scan_equals_direct_call() {
    let c = chain(five_ion_mixed());
    let (modes, eta) = modes_and_eta(&c, Direction::Axial);
    let model = FidelityModel::ground_state(5);
    let mu = modes.frequencies[4] + hz_to_rad(5e3);
    let opts = AmSolveOptions::new(5, TAU, vec![mu]).unwrap();
    let direct = solve_am_at(&modes, &eta, (0, 4), mu, &opts, &model).unwrap();
    let scanned = solve_am(&modes, &eta, (0, 4), &opts, &model).unwrap();
    assert_eq!(scanned.best, direct.result);
    assert_eq!(scanned.best_mu, mu);
    assert_eq!(scanned.per_mu.len(), 1);
}

#[test]
fn permuted_grid_selects_the_same_gate() {
    let c = chain(five_ion_mixed());
    let (modes, eta) = modes_and_eta(&c, Direction::Axial);
    let model = FidelityModel::ground_state(5);
    let grid = axial_mu_grid(&modes);
    let mut shuffled = grid.clone();
    shuffled.reverse();
    shuffled.rotate_left(grid.len() / 3);
    let opts = AmSolveOptions::new(5, TAU, grid).unwrap();
    let mut opts2 = opts.clone();
    opts2.mu_grid = shuffled;
    let a = solve_am(&modes, &eta, (0, 4), &opts, &model).unwrap();
    let b = solve_am(&modes, &eta, (0, 4), &opts2, &model).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(a.best_mu, b.best_mu);
}

#[test]
fn degenerate_geometry_is_infeasible() {
    let c = chain(five_ion_mixed());
    let (modes, _) = modes_and_eta(&c, Direction::Axial);
    let eta = DMatrix::zeros(5, 5);
    let opts = AmSolveOptions::new(5, TAU, vec![modes.frequencies[0] + 1e4]).unwrap();
    let err = solve_am(&modes, &eta, (0, 4), &opts, &FidelityModel::ground_state(5)).unwrap_err();
    assert!(matches!(err, Error::Infeasible(_)), "{err}");
    assert!(scan_mu(&[1.0], |_| Err(Error::Infeasible("x".into()))).is_err());
}

#[test]
fn simplex_never_ends_above_its_start() {
    let c = chain(five_ion_mixed());
    let (modes, eta) = modes_and_eta(&c, Direction::TransverseX);
    let mut fm = AmFmOptions::new(TAU, modes.frequencies[3] + hz_to_rad(2.5e3), 4);
    fm.restarts = 4;
    fm.max_evals = 150;
    fm.seed = 3;
    let r = solve_amfm(&modes, &eta, (0, 4), &fm, &FidelityModel::ground_state(5)).unwrap();
    assert_eq!(r.diagnostics.restart_costs.len(), 4);
    for [start, end] in &r.diagnostics.restart_costs {
        assert!(end <= start, "{end} > {start}");
    }
    let again = solve_amfm(&modes, &eta, (0, 4), &fm, &FidelityModel::ground_state(5)).unwrap();
    assert_eq!(r.best, again.best);
}

#[test]
fn transverse_gates_need_an_order_of_magnitude_more_power() {
    let c = chain(five_ion_mixed());
    let model = FidelityModel::ground_state(5);
    let (ma, ea) = modes_and_eta(&c, Direction::Axial);
    let (mt, et) = modes_and_eta(&c, Direction::TransverseX);
    for pair in [(0, 4), (1, 4)] {
        let axial = solve_am(&ma, &ea, pair, &AmSolveOptions::new(5, TAU, axial_mu_grid(&ma)).unwrap(), &model).unwrap();
        let trans =
            solve_am(&mt, &et, pair, &AmSolveOptions::new(5, TAU, transverse_mu_grid(&mt)).unwrap(), &model).unwrap();
        let ratio = trans.best.omega_max / axial.best.omega_max;
        assert!(ratio > 10.0, "{pair:?}: ratio {ratio}");
    }
}

#[test]
fn dual_beam_is_at_least_as_good_as_single_beam() {
    let c = chain(five_ion_mixed());
    let (modes, eta) = modes_and_eta(&c, Direction::TransverseX);
    let model = FidelityModel::ground_state(5);
    let opts = AmSolveOptions::new(5, TAU, transverse_mu_grid(&modes)).unwrap();
    let am = solve_am(&modes, &eta, (0, 4), &opts, &model).unwrap();
    let dual = solve_dual_am(&modes, &eta, (0, 4), &opts, (1.0, 1.0), &model).unwrap();
    assert!(dual.best.fidelity >= am.best.fidelity, "{} < {}", dual.best.fidelity, am.best.fidelity);
}
