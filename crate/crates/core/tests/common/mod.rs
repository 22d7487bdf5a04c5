#![allow(dead_code)]

use mixion::constants::hz_to_rad;
use mixion::modes::{counter_propagating_delta_k, lamb_dicke_matrix, normal_modes};
use mixion::{Direction, IonChain, NormalModeSet, Species, TransverseModel, TrapConfig};
use nalgebra::DMatrix;

pub fn trap(model: TransverseModel) -> TrapConfig {
    TrapConfig::new(171.0, hz_to_rad(3.06e6), hz_to_rad(3.06e6), hz_to_rad(0.16e6), model).unwrap()
}

/// 4 Yb with one Ba at the end.
pub fn five_ion_mixed() -> Vec<Species> {
    let mut v = vec![Species::yb171(); 4];
    v.push(Species::ba138());
    v
}

/// 9 Yb and 4 Ba, Ba at 0-based positions 1, 4, 8, 11.
pub fn thirteen_ion_mixed() -> Vec<Species> {
    (0..13).map(|i| if [1, 4, 8, 11].contains(&i) { Species::ba138() } else { Species::yb171() }).collect()
}

pub fn chain(ions: Vec<Species>) -> IonChain {
    IonChain::solved(ions, trap(TransverseModel::StaticCurvature)).unwrap()
}

/// Modes and Lamb–Dicke matrix with 355 nm beams on Yb and 532 nm on Ba.
pub fn modes_and_eta(chain: &IonChain, direction: Direction) -> (NormalModeSet, DMatrix<f64>) {
    let modes = normal_modes(chain, direction).unwrap();
    let dk: Vec<f64> = chain
        .ions()
        .iter()
        .map(|s| counter_propagating_delta_k(if s.mass == 138.0 { 532e-9 } else { 355e-9 }))
        .collect();
    let eta = lamb_dicke_matrix(&modes, chain, &dk).unwrap();
    (modes, eta)
}
