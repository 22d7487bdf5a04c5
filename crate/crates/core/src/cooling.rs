//! Sympathetic-cooling diagnostics: coolant placement, RMS position
//! fluctuations and how strongly the coolant ions take part in each mode.

use serde::{Deserialize, Serialize};

use crate::chain::{IonChain, Species};
use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::modes::{spectral_stats, NormalModeSet, SpectralStats};

pub const DEFAULT_HARD_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Coolants taken from the chain ends, last ion first: N, 1, N−1, 2, ...
    Edge,
    /// One coolant at the centre of each of `n` near-equal contiguous blocks.
    Periodic,
    /// Explicit 0-based indices.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluctuationNormalization {
    /// `⟨q²⟩ = Σ_m ħ/(m ω_m) b² (n̄ + ½)`, the ground-state variance `ħ/(2mω)`
    /// per mode at `n̄ = 0`.
    #[default]
    Standard,
    /// `⟨q²⟩ = Σ_m ħ/(2 m ω_m) b² (n̄ + ½)`.
    HalfVariance,
}

/// Coolant positions (0-based, ascending) for a chain of `n` ions.
pub fn coolant_indices(placement: &Placement, n: usize, n_coolant: usize) -> Result<Vec<usize>> {
    let mut idx = match placement {
        Placement::Explicit(list) => {
            let mut v = list.clone();
            v.sort_unstable();
            v.dedup();
            if v.len() != list.len() {
                return Err(Error::InvalidInput("explicit coolant indices must be unique".into()));
            }
            if let Some(&bad) = v.iter().find(|&&i| i >= n) {
                return Err(Error::OutOfRange { value: bad as f64, lo: 0.0, hi: n as f64 - 1.0 });
            }
            v
        }
        _ if n_coolant == 0 || n_coolant > n => {
            return Err(Error::OutOfRange { value: n_coolant as f64, lo: 1.0, hi: n as f64 });
        }
        Placement::Edge => (0..n_coolant).map(|k| if k % 2 == 0 { n - 1 - k / 2 } else { k / 2 }).collect(),
        Placement::Periodic => (0..n_coolant).map(|k| ((2 * k + 1) * n) / (2 * n_coolant)).collect(),
    };
    if idx.is_empty() {
        return Err(Error::InvalidInput("at least one coolant ion is required".into()));
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Species sequence with `coolant` at the placed positions and `host`
/// elsewhere.
pub fn placement(
    placement: &Placement,
    n: usize,
    n_coolant: usize,
    host: &Species,
    coolant: &Species,
) -> Result<Vec<Species>> {
    let idx = coolant_indices(placement, n, n_coolant)?;
    Ok((0..n).map(|i| if idx.binary_search(&i).is_ok() { coolant.clone() } else { host.clone() }).collect())
}

/// Per-ion RMS displacement `δq_i = √⟨q_i²⟩` (m).
pub fn rms_fluctuations(
    chain: &IonChain,
    modes: &NormalModeSet,
    nbar: &[f64],
    normalization: FluctuationNormalization,
) -> Result<Vec<f64>> {
    let n = chain.len();
    if nbar.len() != n || modes.len() != n {
        return Err(Error::InvalidInput(format!("expected {n} occupations and modes")));
    }
    if nbar.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidInput("thermal occupations must be non-negative".into()));
    }
    let factor = match normalization {
        FluctuationNormalization::Standard => 1.0,
        FluctuationNormalization::HalfVariance => 0.5,
    };
    let masses = chain.masses_kg();
    Ok((0..n)
        .map(|i| {
            let var: f64 = (0..n)
                .map(|m| factor * HBAR / (masses[i] * modes.frequencies[m]) * modes.b[(i, m)].powi(2) * (nbar[m] + 0.5))
                .sum();
            var.sqrt()
        })
        .collect())
}

/// `p_m = Σ_{i ∈ coolant} b_im²`.
pub fn coolant_participation(modes: &NormalModeSet, coolant: &[usize]) -> Result<Vec<f64>> {
    if let Some(&bad) = coolant.iter().find(|&&i| i >= modes.len()) {
        return Err(Error::OutOfRange { value: bad as f64, lo: 0.0, hi: modes.len() as f64 - 1.0 });
    }
    Ok((0..modes.len()).map(|m| coolant.iter().map(|&i| modes.b[(i, m)].powi(2)).sum()).collect())
}

pub fn hard_to_cool(participation: &[f64], threshold: f64) -> Vec<bool> {
    participation.iter().map(|&p| p < threshold).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingReport {
    pub coolant: Vec<usize>,
    pub delta_q: Vec<f64>,
    pub participation: Vec<f64>,
    pub hard_to_cool: Vec<bool>,
    /// Absent for a single ion.
    pub stats: Option<SpectralStats>,
}

pub fn cooling_report(
    chain: &IonChain,
    modes: &NormalModeSet,
    coolant: &[usize],
    nbar: &[f64],
    normalization: FluctuationNormalization,
    threshold: f64,
) -> Result<CoolingReport> {
    let delta_q = rms_fluctuations(chain, modes, nbar, normalization)?;
    let participation = coolant_participation(modes, coolant)?;
    let stats = if modes.len() >= 2 { Some(spectral_stats(modes)?) } else { None };
    Ok(CoolingReport {
        coolant: coolant.to_vec(),
        delta_q,
        hard_to_cool: hard_to_cool(&participation, threshold),
        participation,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{Direction, TransverseModel, TrapConfig};
    use crate::constants::hz_to_rad;
    use crate::modes::normal_modes;

    #[test]
    fn edge_and_periodic_layouts() {
        assert_eq!(coolant_indices(&Placement::Edge, 5, 1).unwrap(), vec![4]);
        assert_eq!(coolant_indices(&Placement::Edge, 5, 2).unwrap(), vec![0, 4]);
        assert_eq!(coolant_indices(&Placement::Edge, 6, 3).unwrap(), vec![0, 4, 5]);
        assert_eq!(coolant_indices(&Placement::Periodic, 13, 4).unwrap(), vec![1, 4, 8, 11]);
        assert_eq!(coolant_indices(&Placement::Periodic, 7, 7).unwrap(), (0..7).collect::<Vec<_>>());
        assert_eq!(coolant_indices(&Placement::Edge, 4, 4).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn invalid_counts_are_rejected() {
        assert!(coolant_indices(&Placement::Edge, 5, 0).is_err());
        assert!(coolant_indices(&Placement::Periodic, 5, 6).is_err());
        assert!(coolant_indices(&Placement::Explicit(vec![1, 1]), 5, 2).is_err());
        assert!(coolant_indices(&Placement::Explicit(vec![5]), 5, 1).is_err());
    }

    #[test]
    fn single_ion_ground_state_spread() {
        let trap = TrapConfig::new(171.0, hz_to_rad(3.06e6), hz_to_rad(3.06e6), hz_to_rad(0.16e6), TransverseModel::StaticCurvature)
            .unwrap();
        let chain = IonChain::solved(vec![Species::yb171()], trap).unwrap();
        let modes = normal_modes(&chain, Direction::TransverseX).unwrap();
        let dq = rms_fluctuations(&chain, &modes, &[0.0], FluctuationNormalization::Standard).unwrap();
        let expected = (HBAR / (2.0 * Species::yb171().mass_kg() * hz_to_rad(3.06e6))).sqrt();
        assert!((dq[0] / expected - 1.0).abs() < 1e-12);
        let lit = rms_fluctuations(&chain, &modes, &[0.0], FluctuationNormalization::HalfVariance).unwrap();
        assert!((lit[0] * 2f64.sqrt() / expected - 1.0).abs() < 1e-12);
    }
}
