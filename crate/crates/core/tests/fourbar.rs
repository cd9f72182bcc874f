use approx::assert_abs_diff_eq;
use nalgebra::DVector;

use pkmdyn::checks::{derivative_errors, random_samples};
use pkmdyn::dynamics::reference_guess;
use pkmdyn::limb_kin::{acceleration_ik, limb_h, machine_ik, velocity_ik};
use pkmdyn::models::fourbar::{fourbar_pkm, FourbarParams};

fn configs(p: &FourbarParams) -> Vec<Vec<DVector<f64>>> {
    let pkm = fourbar_pkm(p).unwrap();
    let x0 = pkm.reference_x();
    let g = reference_guess(&pkm);
    (0..10)
        .map(|k| {
            let s = k as f64 / 10.0;
            let dx = DVector::from_fn(x0.len(), |i, _| 0.03 * ((i + 1) as f64 * 2.1 * s).sin());
            machine_ik(&pkm, &(&x0 + dx), &g).unwrap().0
        })
        .collect()
}

#[test]
fn limb_structure() {
    let pkm = fourbar_pkm(&FourbarParams::default()).unwrap();
    assert_eq!(pkm.limbs.len(), 1);
    let limb = &pkm.limbs[0];
    assert_eq!(limb.cycles(), 1);
    assert_eq!(limb.q_joints, vec![2, 0, 4]);
    assert_eq!(limb.actuated, vec![0, 1, 4]);
}

#[test]
fn parallelogram_loop_solution_is_constant() {
    let p = FourbarParams::parallelogram();
    let pkm = fourbar_pkm(&p).unwrap();
    for th in configs(&p) {
        let (_, loops, _) = limb_h(&pkm.limbs[0], &th[0]).unwrap();
        for (v, e) in loops[0].solution.h.iter().zip([-1.0, -1.0, 1.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-8);
        }
    }
}

#[test]
fn generic_loop_solution_varies() {
    let p = FourbarParams::default();
    let pkm = fourbar_pkm(&p).unwrap();
    let hs: Vec<_> = configs(&p).iter().map(|th| limb_h(&pkm.limbs[0], &th[0]).unwrap().1[0].solution.h.clone()).collect();
    let spread = hs.iter().map(|h| (h - &hs[0]).amax()).fold(0.0, f64::max);
    assert!(spread > 1e-2, "loop solution spread {spread}");

    let th = &configs(&p)[3][0];
    let vel = velocity_ik(&pkm.limbs[0], &pkm.task, th).unwrap();
    let vt = DVector::from_element(pkm.dof(), 0.3);
    let m = acceleration_ik(&pkm.limbs[0], &pkm.task, vel, &vt, &DVector::zeros(pkm.dof())).unwrap();
    assert!(m.h_dot.amax() > 1e-3);
}

#[test]
fn parallelogram_loop_rate_vanishes() {
    let p = FourbarParams::parallelogram();
    let pkm = fourbar_pkm(&p).unwrap();
    let th = &configs(&p)[4][0];
    let vel = velocity_ik(&pkm.limbs[0], &pkm.task, th).unwrap();
    let vt = DVector::from_element(pkm.dof(), 0.3);
    let m = acceleration_ik(&pkm.limbs[0], &pkm.task, vel, &vt, &DVector::zeros(pkm.dof())).unwrap();
    let (_, loops, _) = limb_h(&pkm.limbs[0], th).unwrap();
    let rows: Vec<usize> = loops[0].solution.partition.y.iter().filter_map(|&v| pkm.limbs[0].loops[0].vars[v]).collect();
    for r in rows {
        assert_abs_diff_eq!(m.h_dot.row(r).amax(), 0.0, epsilon = 1e-7);
    }
}

#[test]
fn derivative_checks() {
    for p in [FourbarParams::default(), FourbarParams::parallelogram()] {
        let pkm = fourbar_pkm(&p).unwrap();
        for s in random_samples(&pkm, &[0.03, 0.03, 0.2], 0.5, 10, 4).unwrap() {
            let e = derivative_errors(&pkm, 0, &s).unwrap();
            assert!(e.iter().all(|v| *v < 1e-6), "{e:?}");
        }
    }
}
