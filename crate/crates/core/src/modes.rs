//! Normal modes of the chain along one direction.
//!
//! The eigenproblem `Σ_j V_ij b_jm = ω_m² m_i b_im` is solved in its
//! mass-weighted symmetric form `D_ij = V_ij / √(m_i m_j)`, so the returned
//! eigenvector matrix is orthonormal in the plain sense.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::chain::{Direction, IonChain};
use crate::constants::HBAR;
use crate::error::{Error, Result};

pub const DEFAULT_ISOLATION_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeSet {
    pub direction: Direction,
    /// Mode angular frequencies (rad/s), ascending.
    pub frequencies: Vec<f64>,
    /// `b[(i, m)]`: component of ion `i` in mode `m`.
    pub b: DMatrix<f64>,
}

impl NormalModeSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn mode_vector(&self, m: usize) -> Vec<f64> {
        self.b.column(m).iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralStats {
    /// Largest adjacent spacing (rad/s).
    pub largest_gap: f64,
    /// Mean of the remaining adjacent spacings (rad/s).
    pub mean_adjacent_spacing: f64,
    pub isolated_mode_count: usize,
}

/// Mass-weighted dynamical matrix `D_ij = V_ij / √(m_i m_j)`.
pub fn dynamical_matrix(chain: &IonChain, direction: Direction) -> Result<DMatrix<f64>> {
    let v = chain.hessian(direction)?;
    let m = chain.masses_kg();
    Ok(DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] / (m[i] * m[j]).sqrt()))
}

pub fn normal_modes(chain: &IonChain, direction: Direction) -> Result<NormalModeSet> {
    let d = dynamical_matrix(chain, direction)?;
    let n = d.nrows();
    let eig = SymmetricEigen::new(d);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut frequencies = Vec::with_capacity(n);
    let mut b = DMatrix::zeros(n, n);
    for (m, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= 0.0 {
            return Err(Error::ZigzagInstability { mode: m + 1, omega_sq: lambda });
        }
        frequencies.push(lambda.sqrt());

        let col = eig.eigenvectors.column(k);
        // Sign convention: the largest-magnitude component is positive.
        let pivot = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            b[(i, m)] = sign * col[i];
        }
    }
    Ok(NormalModeSet { direction, frequencies, b })
}

/// Lamb–Dicke matrix `η_im = Δk_i b_im √(ħ / (2 m_i ω_m))`.
///
/// `delta_k[i]` is the wavevector-difference magnitude (1/m) seen by ion `i`;
/// zero marks an undriven ion.
pub fn lamb_dicke_matrix(
    modes: &NormalModeSet,
    chain: &IonChain,
    delta_k: &[f64],
) -> Result<DMatrix<f64>> {
    let n = chain.len();
    if delta_k.len() != n || modes.len() != n {
        return Err(Error::InvalidInput(format!(
            "Lamb-Dicke inputs must all have length {n} (delta_k: {}, modes: {})",
            delta_k.len(),
            modes.len()
        )));
    }
    if delta_k.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
        return Err(Error::InvalidInput("wavevector differences must be non-negative".into()));
    }
    let masses = chain.masses_kg();
    Ok(DMatrix::from_fn(n, n, |i, m| {
        delta_k[i] * modes.b[(i, m)] * (HBAR / (2.0 * masses[i] * modes.frequencies[m])).sqrt()
    }))
}

/// Wavevector difference of counter-propagating Raman beams, `2 · 2π/λ`.
pub fn counter_propagating_delta_k(wavelength_m: f64) -> f64 {
    2.0 * std::f64::consts::TAU / wavelength_m
}

pub fn spectral_stats(modes: &NormalModeSet) -> Result<SpectralStats> {
    spectral_stats_with_factor(modes, DEFAULT_ISOLATION_FACTOR)
}

pub fn spectral_stats_with_factor(modes: &NormalModeSet, isolation_factor: f64) -> Result<SpectralStats> {
    let f = &modes.frequencies;
    if f.len() < 2 {
        return Err(Error::InvalidInput("spectral statistics need at least two modes".into()));
    }
    let gaps: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
    let (k_max, largest_gap) = gaps
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, g)| if g > acc.1 { (k, g) } else { acc });
    let rest: Vec<f64> = gaps.iter().enumerate().filter(|&(k, _)| k != k_max).map(|(_, g)| *g).collect();
    if rest.is_empty() {
        return Ok(SpectralStats { largest_gap, mean_adjacent_spacing: largest_gap, isolated_mode_count: 0 });
    }
    let mean = rest.iter().sum::<f64>() / rest.len() as f64;
    let isolated_mode_count = if largest_gap > isolation_factor * mean { f.len() - 1 - k_max } else { 0 };
    Ok(SpectralStats { largest_gap, mean_adjacent_spacing: mean, isolated_mode_count })
}

/// Participation mismatch in the highest mode: mean `|b|` over the lightest
/// ions minus mean `|b|` over the heaviest ions. Zero for a single-mass chain.
pub fn top_mode_mismatch(chain: &IonChain, modes: &NormalModeSet) -> f64 {
    let masses: Vec<f64> = chain.ions().iter().map(|s| s.mass).collect();
    let lo = masses.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return 0.0;
    }
    let top = modes.len() - 1;
    let mean_abs = |target: f64| {
        let sel: Vec<f64> = (0..masses.len())
            .filter(|&i| masses[i] == target)
            .map(|i| modes.b[(i, top)].abs())
            .collect();
        sel.iter().sum::<f64>() / sel.len() as f64
    };
    mean_abs(lo) - mean_abs(hi)
}
