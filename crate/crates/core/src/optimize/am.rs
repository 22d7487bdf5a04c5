//! Segmented AM and dual-beam segmented AM.
//!
//! With segment amplitudes `Ω ∈ ℝᴾ` the displacements are linear, `α = A Ω`,
//! and the phase is a quadratic form, `χ = Ωᵀ G Ω`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{AmSolveOptions, Diagnostics, OptimizationReport, Solution, MIN_UNIT_CHI, NULL_SPACE_TOL};
use crate::error::{Error, Result};
use crate::modes::NormalModeSet;
use crate::msgate::{evaluate_gate, segment_double_integrals, segment_integrals, FidelityModel};
use crate::pulses::{DualSegmentedAm, PulseProgram, SegmentedAm};

/// Rows `Re/Im(−η_im I_m)` for one ion, `2N × P`.
fn ion_block(modes: &NormalModeSet, eta: &DMatrix<f64>, ion: usize, mu: f64, tau: f64, p: usize) -> DMatrix<f64> {
    let n = modes.len();
    let mut a = DMatrix::zeros(2 * n, p);
    for m in 0..n {
        let ints = segment_integrals(mu - modes.frequencies[m], tau, p);
        for (s, z) in ints.iter().enumerate() {
            a[(2 * m, s)] = -eta[(ion, m)] * z.re;
            a[(2 * m + 1, s)] = -eta[(ion, m)] * z.im;
        }
    }
    a
}

/// `Σ_m η_im η_jm (K_m + K_mᵀ)`.
fn phase_form(modes: &NormalModeSet, eta: &DMatrix<f64>, i: usize, j: usize, mu: f64, tau: f64, p: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(p, p);
    for m in 0..modes.len() {
        let c = eta[(i, m)] * eta[(j, m)];
        if c == 0.0 {
            continue;
        }
        let k = segment_double_integrals(mu - modes.frequencies[m], tau, p);
        g += (&k + k.transpose()) * c;
    }
    g
}

/// Right singular vectors of `a` in ascending singular-value order, with
/// the values themselves.
fn right_singular(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let p = a.ncols();
    // Pad so the SVD returns a full set of right singular vectors.
    let padded = if a.nrows() < p {
        let mut m = DMatrix::zeros(p, p);
        m.view_mut((0, 0), (a.nrows(), p)).copy_from(a);
        m
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let values = order.iter().map(|&k| svd.singular_values[k]).collect();
    let v = DMatrix::from_fn(p, p, |r, c| vt[(order[c], r)]);
    (values, v)
}

/// Null-space basis of `a` if it has one, else its smallest right singular
/// vector.
fn decoupling_subspace(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let (s, v) = right_singular(a);
    let smax = s.last().copied().unwrap_or(0.0);
    let k = s.iter().take_while(|&&x| x <= NULL_SPACE_TOL * smax).count();
    if k > 0 {
        (v.columns(0, k).into_owned(), true)
    } else {
        (v.columns(0, 1).into_owned(), false)
    }
}

/// Leading eigenvector (by |eigenvalue|) of a symmetric matrix.
fn leading_eigenvector(g: &DMatrix<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(g.clone());
    let k = (0..eig.eigenvalues.len())
        .max_by(|&a, &b| eig.eigenvalues[a].abs().total_cmp(&eig.eigenvalues[b].abs()).then(b.cmp(&a)))
        .expect("non-empty matrix");
    eig.eigenvectors.column(k).into_owned()
}

fn sign_normalised(mut v: DVector<f64>) -> DVector<f64> {
    let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.neg_mut();
    }
    v
}

fn check_pair(modes: &NormalModeSet, pair: (usize, usize)) -> Result<()> {
    let n = modes.len();
    if pair.0 == pair.1 || pair.0 >= n || pair.1 >= n {
        return Err(Error::InvalidInput(format!("invalid ion pair ({}, {}) for {n} ions", pair.0, pair.1)));
    }
    Ok(())
}

/// Segmented AM at a single beatnote `mu`.
pub fn solve_am_at(
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    pair: (usize, usize),
    mu: f64,
    options: &AmSolveOptions,
    model: &FidelityModel,
) -> Result<Solution> {
    check_pair(modes, pair)?;
    let (p, tau) = (options.segments, options.tau);
    let a_i = ion_block(modes, eta, pair.0, mu, tau, p);
    let a_j = ion_block(modes, eta, pair.1, mu, tau, p);
    let mut a = DMatrix::zeros(a_i.nrows() * 2, p);
    a.view_mut((0, 0), a_i.shape()).copy_from(&a_i);
    a.view_mut((a_i.nrows(), 0), a_j.shape()).copy_from(&a_j);
    let g = phase_form(modes, eta, pair.0, pair.1, mu, tau, p);

    let (z, _) = decoupling_subspace(&a);
    let omega = if z.ncols() == 1 {
        z.column(0).into_owned()
    } else {
        let gz = z.transpose() * &g * &z;
        &z * leading_eigenvector(&gz)
    };
    let omega = sign_normalised(omega);
    let chi_unit = omega.dot(&(&g * &omega));
    if !(chi_unit.abs() >= MIN_UNIT_CHI) {
        return Err(Error::Infeasible(format!("entangling phase {chi_unit:e} rad at unit amplitude")));
    }
    let omega = omega * (options.target_phase.abs() / chi_unit.abs()).sqrt();

    let pulse = PulseProgram::Am(SegmentedAm::new(tau, omega.iter().copied().collect(), mu)?);
    let result = evaluate_gate(&pulse, modes, eta, pair, model)?;
    let residual = result.residual();
    Ok(Solution {
        result,
        diagnostics: Diagnostics { iterations: 1, residual, restarts: 0, converged: true, cost: None, restart_costs: vec![] },
    })
}

/// Segmented AM, scanning `options.mu_grid`.
pub fn solve_am(
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    pair: (usize, usize),
    options: &AmSolveOptions,
    model: &FidelityModel,
) -> Result<OptimizationReport> {
    options.validate()?;
    super::scan_mu(&options.mu_grid, |mu| solve_am_at(modes, eta, pair, mu, options, model))
}

/// Dual-beam AM at a single beatnote: ion `pair.0` follows beam A, ion
/// `pair.1` beam B.
///
/// Each beam's amplitudes are confined to the decoupling subspace of its own
/// ion (null space, or least-displacement direction), the pair of directions
/// maximising the cross phase `χ = Ω_aᵀ C Ω_b` is taken, and the beams are
/// balanced to minimise `Σ_i ‖α_i‖² + ε (w_a‖Ω_a‖² + w_b‖Ω_b‖²)` at fixed χ,
/// with `ε` small enough that the weights only matter for exact decoupling.
pub fn solve_dual_am_at(
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    pair: (usize, usize),
    mu: f64,
    options: &AmSolveOptions,
    norm_weights: (f64, f64),
    model: &FidelityModel,
) -> Result<Solution> {
    check_pair(modes, pair)?;
    let (w_a, w_b) = norm_weights;
    if !(w_a > 0.0 && w_b > 0.0 && w_a.is_finite() && w_b.is_finite()) {
        return Err(Error::InvalidInput("norm weights must be positive".into()));
    }
    let (p, tau) = (options.segments, options.tau);
    let a_i = ion_block(modes, eta, pair.0, mu, tau, p);
    let a_j = ion_block(modes, eta, pair.1, mu, tau, p);
    let c = phase_form(modes, eta, pair.0, pair.1, mu, tau, p);

    let (za, _) = decoupling_subspace(&a_i);
    let (zb, _) = decoupling_subspace(&a_j);
    let cross = za.transpose() * &c * &zb;
    let svd = cross.svd(true, true);
    let k = (0..svd.singular_values.len())
        .max_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]).then(y.cmp(&x)))
        .expect("non-empty cross form");
    let u = svd.u.as_ref().expect("left vectors").column(k).into_owned();
    let v = svd.v_t.as_ref().expect("right vectors").row(k).transpose();
    let (a_dir, flip) = {
        let d = &za * u;
        let s = sign_normalised(d.clone());
        let flipped = s != d;
        (s, flipped)
    };
    let mut b_dir = &zb * v;
    if flip {
        b_dir.neg_mut();
    }

    let chi_unit = a_dir.dot(&(&c * &b_dir));
    if !(chi_unit.abs() >= MIN_UNIT_CHI) {
        return Err(Error::Infeasible(format!("entangling phase {chi_unit:e} rad at unit amplitude")));
    }
    let scale_ref = (a_i.norm_squared() + a_j.norm_squared()) / (2 * p) as f64;
    let eps = 1e-12 * scale_ref;
    let r_a = (&a_i * &a_dir).norm_squared() + eps * w_a;
    let r_b = (&a_j * &b_dir).norm_squared() + eps * w_b;
    let s = options.target_phase.abs() / chi_unit.abs();
    let c_a = (s * (r_b / r_a).sqrt()).sqrt();
    let c_b = (s * (r_a / r_b).sqrt()).sqrt();

    let pulse = PulseProgram::DualAm(DualSegmentedAm::new(
        tau,
        (a_dir * c_a).iter().copied().collect(),
        (b_dir * c_b).iter().copied().collect(),
        mu,
        vec![pair.1],
    )?);
    let result = evaluate_gate(&pulse, modes, eta, pair, model)?;
    let residual = result.residual();
    Ok(Solution {
        result,
        diagnostics: Diagnostics {
            iterations: 1,
            residual,
            restarts: 0,
            converged: true,
            cost: None,
            restart_costs: vec![],
        },
    })
}

/// Dual-beam AM, scanning `options.mu_grid`.
pub fn solve_dual_am(
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    pair: (usize, usize),
    options: &AmSolveOptions,
    norm_weights: (f64, f64),
    model: &FidelityModel,
) -> Result<OptimizationReport> {
    options.validate()?;
    super::scan_mu(&options.mu_grid, |mu| solve_dual_am_at(modes, eta, pair, mu, options, norm_weights, model))
}
