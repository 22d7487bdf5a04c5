//! Ion species, trap configuration and the linear chain: potential energy,
//! axial equilibrium and second-derivative matrices.
//!
//! Internally the axial problem is solved in dimensionless units: lengths in
//! `ℓ = (e²/(4πε₀ m_ref ω_z²))^{1/3}` and energies in `m_ref ω_z² ℓ²`. The axial
//! trap curvature is static and therefore identical for every species, which
//! makes the equilibrium independent of the ion masses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::{ATOMIC_MASS_UNIT, COULOMB_CONSTANT};
use crate::error::{Error, Result};

const MAX_NEWTON_ITERATIONS: usize = 200;
const GRADIENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub label: String,
    /// Mass in atomic mass units.
    pub mass: f64,
}

impl Species {
    pub fn new(label: impl Into<String>, mass: f64) -> Result<Self> {
        let s = Species { label: label.into(), mass };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.trim().is_empty() {
            return Err(Error::InvalidInput("species label is empty".into()));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidInput(format!(
                "species {} has non-positive mass {}",
                self.label, self.mass
            )));
        }
        Ok(())
    }

    pub fn mass_kg(&self) -> f64 {
        self.mass * ATOMIC_MASS_UNIT
    }

    pub fn yb171() -> Self {
        Species { label: "171Yb+".into(), mass: 171.0 }
    }

    pub fn ba138() -> Self {
        Species { label: "138Ba+".into(), mass: 138.0 }
    }
}

/// How the transverse confinement of a species scales with its mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransverseModel {
    /// Ponderomotive confinement only: `ω_x,i = ω_x,ref · m_ref/m_i`.
    #[default]
    PureRfScaling,
    /// Ponderomotive confinement minus the static axial defocusing:
    /// `ω_x,i² = (m_ref/m_i)² ω_rf² − ½ (m_ref/m_i) ω_z²`.
    RfWithStaticDefocusing,
    /// Mass-independent curvature: `m_i ω_x,i² = m_ref ω_x,ref²`.
    StaticCurvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Axial,
    TransverseX,
    TransverseY,
}

impl Direction {
    pub fn is_transverse(self) -> bool {
        !matches!(self, Direction::Axial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Reference mass (u) for which the trap frequencies below are quoted.
    pub reference_mass: f64,
    /// Angular frequencies in rad/s.
    pub omega_x_ref: f64,
    pub omega_y_ref: f64,
    pub omega_z_ref: f64,
    #[serde(default)]
    pub transverse_model: TransverseModel,
}

impl TrapConfig {
    pub fn new(
        reference_mass: f64,
        omega_x_ref: f64,
        omega_y_ref: f64,
        omega_z_ref: f64,
        transverse_model: TransverseModel,
    ) -> Result<Self> {
        let t = TrapConfig { reference_mass, omega_x_ref, omega_y_ref, omega_z_ref, transverse_model };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.reference_mass, self.omega_x_ref, self.omega_y_ref, self.omega_z_ref];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("trap mass and frequencies must be positive".into()));
        }
        if self.omega_z_ref >= self.omega_x_ref.min(self.omega_y_ref) {
            return Err(Error::InvalidInput(
                "axial frequency must be below both transverse frequencies".into(),
            ));
        }
        Ok(())
    }

    fn reference_mass_kg(&self) -> f64 {
        self.reference_mass * ATOMIC_MASS_UNIT
    }

    /// Characteristic length `ℓ` in metres.
    pub fn length_scale(&self) -> f64 {
        (COULOMB_CONSTANT / (self.reference_mass_kg() * self.omega_z_ref.powi(2))).cbrt()
    }

    /// Axial spring constant (J/m²), the same for all species.
    pub fn axial_curvature(&self) -> f64 {
        self.reference_mass_kg() * self.omega_z_ref.powi(2)
    }

    /// Single-ion secular frequency (rad/s) of a species of mass `mass_u`.
    pub fn secular_frequency(&self, direction: Direction, mass_u: f64) -> f64 {
        (self.curvature(direction, mass_u) / (mass_u * ATOMIC_MASS_UNIT)).sqrt()
    }

    /// Trap spring constant (J/m²) seen by a species of mass `mass_u`.
    pub fn curvature(&self, direction: Direction, mass_u: f64) -> f64 {
        let w_ref = match direction {
            Direction::Axial => return self.axial_curvature(),
            Direction::TransverseX => self.omega_x_ref,
            Direction::TransverseY => self.omega_y_ref,
        };
        let m = mass_u * ATOMIC_MASS_UNIT;
        let r = self.reference_mass / mass_u;
        let wz2 = self.omega_z_ref.powi(2);
        match self.transverse_model {
            TransverseModel::PureRfScaling => m * (w_ref * r).powi(2),
            TransverseModel::RfWithStaticDefocusing => {
                let w_rf2 = w_ref * w_ref + 0.5 * wz2;
                m * (r * r * w_rf2 - 0.5 * r * wz2)
            }
            TransverseModel::StaticCurvature => self.reference_mass_kg() * w_ref * w_ref,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonChain {
    ions: Vec<Species>,
    trap: TrapConfig,
    equilibrium_z: Option<Vec<f64>>,
}

impl IonChain {
    pub fn new(ions: Vec<Species>, trap: TrapConfig) -> Result<Self> {
        if ions.is_empty() {
            return Err(Error::InvalidInput("chain must contain at least one ion".into()));
        }
        for s in &ions {
            s.validate()?;
        }
        trap.validate()?;
        Ok(IonChain { ions, trap, equilibrium_z: None })
    }

    /// Builds the chain and solves for its axial equilibrium.
    pub fn solved(ions: Vec<Species>, trap: TrapConfig) -> Result<Self> {
        let mut chain = Self::new(ions, trap)?;
        chain.equilibrium_z = Some(chain.equilibrium_positions()?);
        Ok(chain)
    }

    pub fn len(&self) -> usize {
        self.ions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ions.is_empty()
    }

    pub fn ions(&self) -> &[Species] {
        &self.ions
    }

    pub fn trap(&self) -> &TrapConfig {
        &self.trap
    }

    pub fn equilibrium_z(&self) -> Option<&[f64]> {
        self.equilibrium_z.as_deref()
    }

    pub fn masses_kg(&self) -> Vec<f64> {
        self.ions.iter().map(Species::mass_kg).collect()
    }

    /// The same chain with the ion order reversed (equilibrium mirrored).
    pub fn reversed(&self) -> IonChain {
        let mut ions = self.ions.clone();
        ions.reverse();
        let equilibrium_z = self
            .equilibrium_z
            .as_ref()
            .map(|z| z.iter().rev().map(|v| -v).collect());
        IonChain { ions, trap: self.trap.clone(), equilibrium_z }
    }

    /// Axial potential energy (J) for the given ion coordinates (m).
    pub fn total_potential(&self, axial_coords: &[f64]) -> Result<f64> {
        self.check_coords(axial_coords)?;
        let k = self.trap.axial_curvature();
        let mut u: f64 = axial_coords.iter().map(|z| 0.5 * k * z * z).sum();
        for i in 0..axial_coords.len() {
            for j in (i + 1)..axial_coords.len() {
                u += COULOMB_CONSTANT / (axial_coords[i] - axial_coords[j]).abs();
            }
        }
        Ok(u)
    }

    /// Gradient of the axial potential (N) at the given coordinates.
    pub fn potential_gradient(&self, axial_coords: &[f64]) -> Result<Vec<f64>> {
        self.check_coords(axial_coords)?;
        let k = self.trap.axial_curvature();
        let n = axial_coords.len();
        let mut g: Vec<f64> = axial_coords.iter().map(|z| k * z).collect();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = axial_coords[i] - axial_coords[j];
                    g[i] -= COULOMB_CONSTANT * d.signum() / (d * d);
                }
            }
        }
        Ok(g)
    }

    /// Full 3-D potential energy (J). `positions[i] = [x, y, z]` in metres.
    pub fn potential_energy_3d(&self, positions: &[[f64; 3]]) -> Result<f64> {
        if positions.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} positions, got {}",
                self.len(),
                positions.len()
            )));
        }
        let mut u = 0.0;
        for (p, s) in positions.iter().zip(&self.ions) {
            u += 0.5 * self.trap.curvature(Direction::TransverseX, s.mass) * p[0] * p[0];
            u += 0.5 * self.trap.curvature(Direction::TransverseY, s.mass) * p[1] * p[1];
            u += 0.5 * self.trap.axial_curvature() * p[2] * p[2];
        }
        for i in 0..positions.len() {
            for j in (i + 1)..positions.len() {
                let r2: f64 = (0..3).map(|c| (positions[i][c] - positions[j][c]).powi(2)).sum();
                if r2 == 0.0 {
                    return Err(Error::DegenerateInput(i, j));
                }
                u += COULOMB_CONSTANT / r2.sqrt();
            }
        }
        Ok(u)
    }

    fn check_coords(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                self.len(),
                z.len()
            )));
        }
        for i in 0..z.len() {
            for j in (i + 1)..z.len() {
                if z[i] == z[j] {
                    return Err(Error::DegenerateInput(i, j));
                }
            }
        }
        Ok(())
    }

    /// Ordered axial equilibrium positions (m).
    pub fn equilibrium_positions(&self) -> Result<Vec<f64>> {
        let l = self.trap.length_scale();
        Ok(dimensionless_equilibrium(self.len())?.into_iter().map(|u| u * l).collect())
    }

    /// Second-derivative matrix of the potential at equilibrium (J/m²).
    pub fn hessian(&self, direction: Direction) -> Result<DMatrix<f64>> {
        let z = self.equilibrium_z.as_ref().ok_or_else(|| {
            Error::InvalidInput("equilibrium positions have not been computed".into())
        })?;
        let n = self.len();
        let mut v = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let k = COULOMB_CONSTANT / (z[i] - z[j]).abs().powi(3);
                // Axial: d²/dz_i dz_j of 1/|z_i - z_j| gives -2k; transverse gives +k.
                v[(i, j)] = match direction {
                    Direction::Axial => -2.0 * k,
                    _ => k,
                };
            }
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| v[(i, j)]).sum();
            v[(i, i)] = self.trap.curvature(direction, self.ions[i].mass) - off;
        }
        Ok(v)
    }
}

fn dimensionless_energy(u: &[f64]) -> f64 {
    let mut e: f64 = u.iter().map(|x| 0.5 * x * x).sum();
    for i in 0..u.len() {
        for j in (i + 1)..u.len() {
            e += 1.0 / (u[j] - u[i]).abs();
        }
    }
    e
}

fn dimensionless_gradient(u: &[f64]) -> DVector<f64> {
    let n = u.len();
    DVector::from_fn(n, |i, _| {
        let mut g = u[i];
        for j in 0..n {
            if j != i {
                let d = u[i] - u[j];
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

fn dimensionless_hessian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = 1.0;
        for j in 0..n {
            if j != i {
                let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                h[(i, j)] = -c;
                h[(i, i)] += c;
            }
        }
    }
    h
}

fn is_strictly_increasing(u: &[f64]) -> bool {
    u.windows(2).all(|w| w[1] > w[0])
}

/// Equilibrium of `Σ u²/2 + Σ 1/|u_i - u_j|` by damped Newton iteration.
pub fn dimensionless_equilibrium(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("chain must contain at least one ion".into()));
    }
    let centre = (n as f64 + 1.0) / 2.0;
    let spacing = 0.9 * (n as f64).powf(-0.44);
    let mut u: Vec<f64> = (1..=n).map(|i| (i as f64 - centre) * spacing).collect();
    let mut residual = f64::INFINITY;

    for _ in 0..MAX_NEWTON_ITERATIONS {
        let g = dimensionless_gradient(&u);
        residual = g.amax();
        if residual < GRADIENT_TOLERANCE {
            return Ok(u);
        }
        let h = dimensionless_hessian(&u);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => -&g,
        };
        let e0 = dimensionless_energy(&u);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
            if is_strictly_increasing(&trial) {
                let e1 = dimensionless_energy(&trial);
                // Near convergence rounding dominates the energy difference.
                if e1 <= e0 + 1e-14 * e0.abs() {
                    u = trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual = residual.min(dimensionless_gradient(&u).amax());
    if residual < GRADIENT_TOLERANCE {
        return Ok(u);
    }
    Err(Error::Convergence { iterations: MAX_NEWTON_ITERATIONS, residual })
}

/// Max-norm of the dimensionless gradient at `z` (m) for the given trap.
pub fn dimensionless_residual(trap: &TrapConfig, z: &[f64]) -> f64 {
    let l = trap.length_scale();
    let u: Vec<f64> = z.iter().map(|v| v / l).collect();
    dimensionless_gradient(&u).amax()
}
