//! Globally adaptive 15-point Gauss–Kronrod quadrature for complex integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).norm();
    Panel { a, b, value, error }
}

/// Integrates `f` over consecutive `breakpoints`, each piece initially split
/// into `panels_per_piece` panels, refining until the summed error estimate is
/// below `abs_tol`.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    breakpoints: &[f64],
    panels_per_piece: usize,
    abs_tol: f64,
    max_panels: usize,
) -> Result<Complex64> {
    let mut heap = BinaryHeap::new();
    let n = panels_per_piece.max(1);
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        for k in 0..n {
            let lo = a + (b - a) * k as f64 / n as f64;
            let hi = if k + 1 == n { b } else { a + (b - a) * (k + 1) as f64 / n as f64 };
            heap.push(gk15(&f, lo, hi));
        }
    }
    let mut total_err: f64 = heap.iter().map(|p| p.error).sum();
    while total_err > abs_tol {
        if heap.len() >= max_panels {
            return Err(Error::Accuracy { achieved: total_err, requested: abs_tol });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Accuracy { achieved: total_err, requested: abs_tol });
        }
        let l = gk15(&f, worst.a, mid);
        let r = gk15(&f, mid, worst.b);
        total_err += l.error + r.error - worst.error;
        heap.push(l);
        heap.push(r);
        // Re-sum occasionally to avoid drift from incremental updates.
        if heap.len() % 64 == 0 {
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    // Sum smallest-first for a stable result independent of heap order.
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(panels.iter().map(|p| p.value).sum())
}
