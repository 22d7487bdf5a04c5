//! Brute-force check of the displacement/phase formulas: propagate the
//! first-order Lamb–Dicke spin-motion Hamiltonian of two ions and two modes
//! in a truncated Fock basis.
//!
//! `H(t) = −i Σ_i σx_i Σ_m η_im Ω_i(t) (a_m† e^{iδ_m t} − a_m e^{−iδ_m t})`,
//! whose exact propagator is `D(Σ_i σx_i α_i) · exp(i χ σx_1 σx_2)` up to a
//! global phase.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::modes::NormalModeSet;
use crate::pulses::PulseProgram;

pub const MIN_FOCK_LEVELS: usize = 8;
const LEAKAGE_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FockEstimate {
    /// `alpha[i][m]`.
    pub alpha: [[Complex64; 2]; 2],
    pub chi: f64,
    /// Largest population found in the top Fock level.
    pub leakage: f64,
}

struct Space {
    levels: usize,
}

impl Space {
    fn dim(&self) -> usize {
        4 * self.levels * self.levels
    }

    fn index(&self, spins: usize, n1: usize, n2: usize) -> usize {
        (spins * self.levels + n1) * self.levels + n2
    }
}

/// `out = −i H psi` with `H` built from the couplings `g[i][m]`.
fn apply(space: &Space, g: &[[Complex64; 2]; 2], psi: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    let l = space.levels;
    for spins in 0..4 {
        for n1 in 0..l {
            for n2 in 0..l {
                let amp = psi[space.index(spins, n1, n2)];
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (ion, gi) in g.iter().enumerate() {
                    // σx on `ion` flips its bit.
                    let flipped = spins ^ (1 << ion);
                    // −i · (−i) (g a† − g* a) = −(g a† − g* a).
                    if n1 + 1 < l {
                        let c = (n1 as f64 + 1.0).sqrt();
                        out[space.index(flipped, n1 + 1, n2)] -= gi[0] * c * amp;
                    }
                    if n1 > 0 {
                        let c = (n1 as f64).sqrt();
                        out[space.index(flipped, n1 - 1, n2)] += gi[0].conj() * c * amp;
                    }
                    if n2 + 1 < l {
                        let c = (n2 as f64 + 1.0).sqrt();
                        out[space.index(flipped, n1, n2 + 1)] -= gi[1] * c * amp;
                    }
                    if n2 > 0 {
                        let c = (n2 as f64).sqrt();
                        out[space.index(flipped, n1, n2 - 1)] += gi[1].conj() * c * amp;
                    }
                }
            }
        }
    }
}

fn couplings(omega: [f64; 2], mu: f64, modes: &NormalModeSet, eta: &DMatrix<f64>, t: f64) -> [[Complex64; 2]; 2] {
    let mut g = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in g.iter_mut().enumerate() {
        for (m, z) in row.iter_mut().enumerate() {
            *z = Complex64::from_polar(eta[(i, m)] * omega[i], (mu - modes.frequencies[m]) * t);
        }
    }
    g
}

/// Propagates `|00⟩ ⊗ |0,0⟩` under a segmented AM pulse on a two-ion chain and
/// reads back `α_im` and `χ_12`.
pub fn fock_oracle(
    pulse: &PulseProgram,
    modes: &NormalModeSet,
    eta: &DMatrix<f64>,
    n_max: usize,
) -> Result<FockEstimate> {
    if modes.len() != 2 || eta.nrows() != 2 || eta.ncols() != 2 {
        return Err(Error::InvalidInput("the Fock oracle handles exactly two ions and two modes".into()));
    }
    if n_max < MIN_FOCK_LEVELS {
        return Err(Error::InvalidInput(format!("n_max must be at least {MIN_FOCK_LEVELS}")));
    }
    let (tau, segments, mu) = match pulse {
        PulseProgram::Am(p) => (p.tau, p.segments(), p.mu),
        PulseProgram::DualAm(p) => (p.tau, p.segments(), p.mu),
        PulseProgram::AmFm(_) => {
            return Err(Error::InvalidInput("the Fock oracle takes piecewise-constant pulses".into()))
        }
    };

    let space = Space { levels: n_max + 1 };
    let dim = space.dim();
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    psi[space.index(0, 0, 0)] = Complex64::new(1.0, 0.0);

    let fastest = modes.frequencies.iter().map(|w| (mu - w).abs()).fold(0.0f64, f64::max);
    let h_max = if fastest > 0.0 { (std::f64::consts::TAU / (400.0 * fastest)).min(tau / 4000.0) } else { tau / 4000.0 };

    let mut k = [vec![Complex64::new(0.0, 0.0); dim], vec![Complex64::new(0.0, 0.0); dim], vec![Complex64::new(0.0, 0.0); dim], vec![Complex64::new(0.0, 0.0); dim]];
    let mut tmp = vec![Complex64::new(0.0, 0.0); dim];
    for s in 0..segments {
        let (a, b) = (tau * s as f64 / segments as f64, tau * (s + 1) as f64 / segments as f64);
        let steps = ((b - a) / h_max).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        let omega = match pulse {
            PulseProgram::Am(p) => [p.omegas[s]; 2],
            PulseProgram::DualAm(p) => [p.beam_for(0)[s], p.beam_for(1)[s]],
            PulseProgram::AmFm(_) => unreachable!(),
        };
        for n in 0..steps {
            let t = a + n as f64 * h;
            let g1 = couplings(omega, mu, modes, eta, t);
            let g2 = couplings(omega, mu, modes, eta, t + 0.5 * h);
            let g3 = couplings(omega, mu, modes, eta, t + h);

            apply(&space, &g1, &psi, &mut k[0]);
            for ((x, p), d) in tmp.iter_mut().zip(&psi).zip(&k[0]) {
                *x = p + d * (0.5 * h);
            }
            let (k0, rest) = k.split_at_mut(1);
            apply(&space, &g2, &tmp, &mut rest[0]);
            for ((x, p), d) in tmp.iter_mut().zip(&psi).zip(&rest[0]) {
                *x = p + d * (0.5 * h);
            }
            apply(&space, &g2, &tmp, &mut rest[1]);
            for ((x, p), d) in tmp.iter_mut().zip(&psi).zip(&rest[1]) {
                *x = p + d * h;
            }
            apply(&space, &g3, &tmp, &mut rest[2]);
            for (idx, p) in psi.iter_mut().enumerate() {
                *p += (k0[0][idx] + (rest[0][idx] + rest[1][idx]) * 2.0 + rest[2][idx]) * (h / 6.0);
            }
        }
    }

    // Rotate each qubit into the σx basis: |±⟩ = (|0⟩ ± |1⟩)/√2.
    let l = space.levels;
    let mut sectors = vec![vec![Complex64::new(0.0, 0.0); l * l]; 4];
    for (x, sector) in sectors.iter_mut().enumerate() {
        for z in 0..4 {
            let overlap = if (x & z).count_ones() % 2 == 0 { 0.5 } else { -0.5 };
            for n1 in 0..l {
                for n2 in 0..l {
                    sector[n1 * l + n2] += psi[space.index(z, n1, n2)] * overlap;
                }
            }
        }
    }

    let mut leakage = 0.0f64;
    let mut phases = [0.0f64; 4];
    let mut beta = [[Complex64::new(0.0, 0.0); 2]; 4];
    for (x, sector) in sectors.iter().enumerate() {
        let norm: f64 = sector.iter().map(|z| z.norm_sqr()).sum();
        let mut top = 0.0;
        for n in 0..l {
            top += sector[(l - 1) * l + n].norm_sqr() + sector[n * l + l - 1].norm_sqr();
        }
        leakage = leakage.max(top / norm);
        phases[x] = sector[0].arg();
        for n1 in 0..l {
            for n2 in 0..l {
                let c = sector[n1 * l + n2].conj();
                if n1 + 1 < l {
                    beta[x][0] += c * sector[(n1 + 1) * l + n2] * (n1 as f64 + 1.0).sqrt();
                }
                if n2 + 1 < l {
                    beta[x][1] += c * sector[n1 * l + n2 + 1] * (n2 as f64 + 1.0).sqrt();
                }
            }
        }
        for b in beta[x].iter_mut() {
            *b /= norm;
        }
    }
    if leakage > LEAKAGE_LIMIT {
        return Err(Error::Truncation { leakage, n_max });
    }

    // Sector index bit i set ⇔ ion i in |−⟩, i.e. s_i = −1.
    let sign = |x: usize| if (x & 1 == 0) == (x & 2 == 0) { 1.0 } else { -1.0 };
    let mut chi = 0.0;
    for (x, ph) in phases.iter().enumerate() {
        let rel = wrap(ph - phases[0]);
        chi += sign(x) * rel;
    }
    chi /= 4.0;
    // β_{s} = s_1 α_1 + s_2 α_2 with sectors 0 = (+,+) and 2 = (+,−).
    let mut alpha = [[Complex64::new(0.0, 0.0); 2]; 2];
    for m in 0..2 {
        alpha[0][m] = (beta[0][m] + beta[2][m]) * 0.5;
        alpha[1][m] = (beta[0][m] - beta[2][m]) * 0.5;
    }
    Ok(FockEstimate { alpha, chi, leakage })
}

fn wrap(x: f64) -> f64 {
    let t = std::f64::consts::TAU;
    x - t * (x / t).round()
}
