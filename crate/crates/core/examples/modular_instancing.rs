//! Stamping a representative Delta limb at rotated mounts.

use nalgebra::{DVector, Vector3};
use pkmdyn::limb_kin::velocity_ik;
use pkmdyn::models::delta::{delta_pkm, DeltaParams};
use pkmdyn::modular::{instance_gravity_vector, instantiate_limb, rotational_mounts};
use pkmdyn::pkm::Mount;
use pkmdyn::se3::Pose;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pkm = delta_pkm(&DeltaParams::default())?;
    let rep = instantiate_limb(&pkm.limbs[0], Mount { base: Pose::identity(), platform: Pose::identity() })?;
    let theta = DVector::from_vec(vec![0.3, -0.5, -0.2, 0.2, -0.2, 0.4]);
    let lp0 = velocity_ik(&rep, &pkm.task, &theta)?.lp;
    let g = Vector3::new(0.0, 0.0, -9.81);
    for (k, mount) in rotational_mounts(3).into_iter().enumerate() {
        let inst = instantiate_limb(&rep, mount)?;
        let lp = velocity_ik(&inst, &pkm.task, &theta)?.lp;
        let ad = mount.platform.adjoint();
        let ad = nalgebra::DMatrix::from_fn(6, 6, |i, j| ad[(i, j)]);
        println!(
            "mount {k}: Y1 = {:?}, |L_p - Ad(S_p) L_p'| = {:.2e}, limb gravity {:?}",
            inst.tree.screws[0].coords.as_slice(),
            (&lp - &ad * &lp0).amax(),
            instance_gravity_vector(&mount.base, &g).as_slice()
        );
    }
    Ok(())
}
