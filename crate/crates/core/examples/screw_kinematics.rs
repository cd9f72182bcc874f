//! Screw coordinates and product-of-exponentials kinematics of one Delta limb.

use nalgebra::DVector;
use pkmdyn::models::delta::{delta_pkm, DeltaParams};
use pkmdyn::se3::spatial_to_body;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pkm = delta_pkm(&DeltaParams::default())?;
    let limb = &pkm.limbs[0];
    println!("limb {} ({} tree joints)", limb.name, limb.n());
    for (i, (y, a)) in limb.tree.screws.iter().zip(&limb.tree.reference).enumerate() {
        let x = spatial_to_body(y, a);
        println!(
            "{:>4}  Y = {:?}\n      X = {:?}",
            limb.joint_names[i],
            y.coords.as_slice(),
            x.coords.as_slice()
        );
    }
    let theta = DVector::from_vec(vec![0.3, -0.5, -0.2, 0.2, -0.2, 0.4]);
    let cache = limb.tree.kinematics(&theta);
    let pb = limb.platform_body;
    println!("platform pose at theta = {:?}:\n{}", theta.as_slice(), cache.poses[pb].homogeneous());
    println!("platform body Jacobian:\n{}", cache.jacobians[pb]);
    Ok(())
}
