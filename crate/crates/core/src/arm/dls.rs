use nalgebra::{Matrix3, Vector3};

use super::dh::{jacobian, DhTable};
use super::JointVector;
use crate::control::VelocityResolver;

/// `q̇ = Jᵥᵀ (Jᵥ Jᵥᵀ + λ² I)⁻¹ v` with the 3×6 linear block of the Jacobian.
pub fn resolve_velocity(v: &[f64; 3], q: &JointVector, dh: &DhTable, damping: f64) -> JointVector {
    let v = Vector3::from_column_slice(v);
    if v.iter().all(|c| *c == 0.0) {
        return [0.0; 6];
    }
    let jv = jacobian(q, dh).fixed_rows::<3>(0).into_owned();
    let a = jv * jv.transpose() + Matrix3::identity() * (damping * damping);
    // symmetric positive definite for damping > 0
    let y = match a.cholesky() {
        Some(c) => c.solve(&v),
        None => a.try_inverse().map(|inv| inv * v).unwrap_or_else(Vector3::zeros),
    };
    let qdot = jv.transpose() * y;
    let mut out = [0.0; 6];
    out.copy_from_slice(qdot.as_slice());
    out
}

/// Kinematic model plus damping, usable wherever a [`VelocityResolver`] is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel {
    pub dh: DhTable,
    pub damping: f64,
}

impl Default for ArmModel {
    fn default() -> Self {
        Self {
            dh: DhTable::default(),
            damping: 0.05,
        }
    }
}

impl VelocityResolver for ArmModel {
    fn joint_velocity(&self, v: &[f64; 3], q: &[f64; 6]) -> [f64; 6] {
        resolve_velocity(v, q, &self.dh, self.damping)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_velocity_gives_zero() {
        let q = [0.0, -1.5, 1.5, -1.5, -1.5, 0.0];
        assert_eq!(resolve_velocity(&[0.0; 3], &q, &DhTable::default(), 0.05), [0.0; 6]);
    }

    #[test]
    fn stays_bounded_at_full_stretch() {
        // q = 0 is an elbow and wrist singularity
        let qdot = resolve_velocity(&[0.0, 0.0, 0.05], &[0.0; 6], &DhTable::default(), 0.05);
        assert!(qdot.iter().all(|v| v.is_finite()));
        let n: f64 = qdot.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(n < 0.05 / (2.0 * 0.05) + 1e-12);
    }
}
