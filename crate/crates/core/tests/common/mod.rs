#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pkmdyn::models::delta::{delta_pkm, delta_pkm_cut_body, DeltaParams};
use pkmdyn::pkm::Pkm;

pub fn delta() -> Pkm {
    delta_pkm(&DeltaParams::default()).unwrap()
}

pub fn delta_cut_body() -> Pkm {
    delta_pkm_cut_body(&DeltaParams::default()).unwrap()
}

/// Loop-closing Delta limb configurations `(ϑ1, ϑ2, −ϑ4, ϑ4, −ϑ4, ϑ6)`.
pub fn delta_configs(count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let t1 = rng.random_range(-0.8..0.8);
            let t2 = rng.random_range(-0.8..0.8);
            let t4 = rng.random_range(-0.6..0.6);
            let t6 = rng.random_range(-0.8..0.8);
            DVector::from_vec(vec![t1, t2, -t4, t4, -t4, t6])
        })
        .collect()
}

pub fn xi() -> f64 {
    8911f64.sqrt()
}

/// Closed-form platform pose of the representative limb (meters).
pub fn cp_closed(t: &DVector<f64>) -> Matrix4<f64> {
    let (t1, t2, t4, t6) = (t[0], t[1], t[3], t[5]);
    let xi = xi();
    let c = f64::cos;
    let s = f64::sin;
    let x = (33.0 * (c(t1 + t2 + t4) + c(t1 + t2 - t4)) + 14.0 * c(t1 + t2 + t6) - 50.0 * c(t1)
        + 2.0 * xi * s(t1 + t2) * c(t4)
        - 30.0)
        / 200.0;
    let z = (14.0 * s(t1 + t2 + t6) + 66.0 * s(t1 + t2) * c(t4) - 50.0 * s(t1) - xi * (c(t1 + t2 + t4) + c(t1 + t2 - t4)))
        / 200.0;
    let (c126, s126) = (c(t1 + t2 + t6), s(t1 + t2 + t6));
    Matrix4::new(c126, 0.0, -s126, x, 0.0, 1.0, 0.0, -s(t4), s126, 0.0, c126, z, 0.0, 0.0, 0.0, 1.0)
}

/// Closed-form velocity IK matrix of the representative limb, rows in `q = (ϑ4, ϑ1, ϑ2, ϑ6)`.
pub fn f_closed(t: &DVector<f64>) -> DMatrix<f64> {
    let (t2, t4, t6) = (t[1], t[3], t[5]);
    let xi = xi();
    let (s2, c2, s6, c6) = (t2.sin(), t2.cos(), t6.sin(), t6.cos());
    let u2 = xi * s2 + 33.0 * c2;
    let w2 = xi * c2 - 33.0 * s2;
    let u6 = 33.0 * s6 + xi * c6;
    let w6 = 33.0 * c6 - xi * s6;
    let sec = 1.0 / t4.cos();
    let tan = t4.tan();
    let (c26, s26) = ((t2 + t6).cos(), (t2 + t6).sin());
    DMatrix::from_row_slice(
        4,
        3,
        &[
            0.0,
            -w2 * sec,
            0.0,
            4.0 * w6,
            -400.0 * tan,
            -4.0 * u6,
            -4.0 * (w6 - 25.0 * sec * c26),
            tan * (400.0 - u2 * sec),
            4.0 * (u6 - 25.0 * sec * s26),
            -100.0 * sec * c26,
            u2 * tan * sec,
            100.0 * sec * s26,
        ],
    ) / w2
}
