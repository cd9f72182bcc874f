//! Inertia of geometric primitives.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::SpatialInertia;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    /// Full solid cylinder: `I_ax = m r²/2`, `I_tr = m(3r² + L²)/12`.
    SolidCylinder,
    /// Thin cylinder: `I_ax = m r²/2`, `I_tr = m L²/12`.
    Rod,
    /// Cuboid with edge lengths `size`.
    Box,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(&self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Primitive body shape with density or mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertiaPrimitive {
    pub kind: PrimitiveKind,
    /// Symmetry axis in the body frame (cylinders and rods).
    #[serde(default = "default_axis")]
    pub axis: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    /// Edge lengths along the body axes (boxes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<[f64; 3]>,
    /// kg/m³.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    /// kg; overrides the density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// Center of the primitive in the body frame.
    #[serde(default)]
    pub center: [f64; 3],
}

fn default_axis() -> Axis {
    Axis::Z
}

fn positive(v: Option<f64>, what: &str) -> Result<f64> {
    match v {
        Some(x) if x > 0.0 && x.is_finite() => Ok(x),
        Some(x) => Err(Error::Validation(format!("{what} must be positive, got {x}"))),
        None => Err(Error::Validation(format!("{what} is missing"))),
    }
}

impl InertiaPrimitive {
    pub fn cylinder(kind: PrimitiveKind, axis: Axis, length: f64, diameter: f64, density: f64) -> Self {
        Self {
            kind,
            axis,
            length: Some(length),
            diameter: Some(diameter),
            size: None,
            density: Some(density),
            mass: None,
            center: [0.0; 3],
        }
    }

    /// Volume in the primitive's units cubed.
    pub fn volume(&self) -> Result<f64> {
        match self.kind {
            PrimitiveKind::SolidCylinder | PrimitiveKind::Rod => {
                let l = positive(self.length, "primitive length")?;
                let d = positive(self.diameter, "primitive diameter")?;
                Ok(std::f64::consts::PI * d * d / 4.0 * l)
            }
            PrimitiveKind::Box => {
                let s = self.size.ok_or_else(|| Error::Validation("box size is missing".into()))?;
                for v in s {
                    positive(Some(v), "box edge")?;
                }
                Ok(s[0] * s[1] * s[2])
            }
        }
    }

    pub fn mass_value(&self) -> Result<f64> {
        match (self.mass, self.density) {
            (Some(m), _) => positive(Some(m), "primitive mass"),
            (None, d) => Ok(positive(d, "primitive density")? * self.volume()?),
        }
    }

    /// Inertia tensor about the center in body axes; dimensions in meters.
    pub fn central_inertia(&self) -> Result<Matrix3<f64>> {
        let m = self.mass_value()?;
        let diag = match self.kind {
            PrimitiveKind::SolidCylinder | PrimitiveKind::Rod => {
                let l = positive(self.length, "primitive length")?;
                let r = positive(self.diameter, "primitive diameter")? / 2.0;
                let ax = m * r * r / 2.0;
                let tr = if self.kind == PrimitiveKind::Rod {
                    m * l * l / 12.0
                } else {
                    m * (3.0 * r * r + l * l) / 12.0
                };
                let mut d = Vector3::repeat(tr);
                d[self.axis.index()] = ax;
                d
            }
            PrimitiveKind::Box => {
                self.volume()?;
                let s = self.size.unwrap_or([0.0; 3]);
                Vector3::new(
                    m * (s[1] * s[1] + s[2] * s[2]) / 12.0,
                    m * (s[0] * s[0] + s[2] * s[2]) / 12.0,
                    m * (s[0] * s[0] + s[1] * s[1]) / 12.0,
                )
            }
        };
        Ok(Matrix3::from_diagonal(&diag))
    }

    pub fn spatial_inertia(&self) -> Result<SpatialInertia> {
        Ok(SpatialInertia::from_com(self.mass_value()?, Vector3::from(self.center), self.central_inertia()?))
    }

    /// Copy with lengths divided by `f` (mm to m uses 1000).
    pub fn scaled(&self, f: f64) -> Self {
        Self {
            length: self.length.map(|v| v / f),
            diameter: self.diameter.map(|v| v / f),
            size: self.size.map(|s| s.map(|v| v / f)),
            center: self.center.map(|v| v / f),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_closed_forms() {
        let c = InertiaPrimitive::cylinder(PrimitiveKind::SolidCylinder, Axis::X, 0.25, 0.03, 2700.0);
        let m = 2700.0 * std::f64::consts::PI * 0.015 * 0.015 * 0.25;
        assert!((c.mass_value().unwrap() - m).abs() < 1e-15);
        let i = c.central_inertia().unwrap();
        assert!((i[(0, 0)] - m * 0.015 * 0.015 / 2.0).abs() < 1e-18);
        assert!((i[(1, 1)] - m * (3.0 * 0.015 * 0.015 + 0.0625) / 12.0).abs() < 1e-18);
        let r = InertiaPrimitive::cylinder(PrimitiveKind::Rod, Axis::Z, 1.0, 0.01, 2700.0);
        let mr = r.mass_value().unwrap();
        let ir = r.central_inertia().unwrap();
        assert_eq!(ir[(0, 0)], mr / 12.0);
        assert_eq!(ir[(2, 2)], mr * 0.005 * 0.005 / 2.0);
    }

    #[test]
    fn box_and_errors() {
        let b = InertiaPrimitive {
            kind: PrimitiveKind::Box,
            axis: Axis::Z,
            length: None,
            diameter: None,
            size: Some([0.1, 0.2, 0.3]),
            density: None,
            mass: Some(2.0),
            center: [0.0; 3],
        };
        let i = b.central_inertia().unwrap();
        assert!((i[(0, 0)] - 2.0 * 0.13 / 12.0).abs() < 1e-16);
        let mut bad = InertiaPrimitive::cylinder(PrimitiveKind::Rod, Axis::Z, 0.0, 0.01, 2700.0);
        assert!(bad.central_inertia().is_err());
        bad.length = Some(1.0);
        bad.density = Some(-1.0);
        assert!(bad.mass_value().is_err());
    }
}
