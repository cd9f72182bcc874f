//! Kinematics and dynamics of parallel kinematic machines with complex limbs.

pub mod bench;
pub mod checks;
pub mod dynamics;
pub mod error;
pub mod limb_kin;
pub mod linalg;
pub mod loops;
pub mod models;
pub mod modular;
pub mod pkm;
pub mod se3;
pub mod simulation;
pub mod topology;
pub mod trajectory;
pub mod tree_kin;

pub use error::{Error, Result};
