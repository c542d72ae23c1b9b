use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3};
use serde::{Deserialize, Serialize};

use super::JointVector;

/// Standard DH link constants; the joint angle is the variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
}

impl DhRow {
    /// `Rot_z(θ) · Trans_z(d) · Trans_x(a) · Rot_x(α)`
    pub fn transform(&self, theta: f64) -> Matrix4<f64> {
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        Matrix4::new(
            ct, -st * ca, st * sa, self.a * ct,
            st, ct * ca, -ct * sa, self.a * st,
            0.0, sa, ca, self.d,
            0.0, 0.0, 0.0, 1.0,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhTable {
    pub rows: [DhRow; 6],
}

impl Default for DhTable {
    /// Universal Robots' published UR5 parameters (flange frame, no tool offset).
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let row = |a, d, alpha| DhRow { a, d, alpha };
        Self {
            rows: [
                row(0.0, 0.089159, FRAC_PI_2),
                row(-0.425, 0.0, 0.0),
                row(-0.39225, 0.0, 0.0),
                row(0.0, 0.10915, FRAC_PI_2),
                row(0.0, 0.09465, -FRAC_PI_2),
                row(0.0, 0.0823, 0.0),
            ],
        }
    }
}

impl DhTable {
    /// Σ(|a| + |d|), an upper bound on the flange distance from the base origin.
    pub fn reach(&self) -> f64 {
        self.rows.iter().map(|r| r.a.abs() + r.d.abs()).sum()
    }

    /// Base-to-frame transforms `T_0^i` for i = 0..=6.
    pub fn frames(&self, q: &JointVector) -> [Matrix4<f64>; 7] {
        let mut out = [Matrix4::identity(); 7];
        for i in 0..6 {
            out[i + 1] = out[i] * self.rows[i].transform(q[i]);
        }
        out
    }
}

/// Flange position and orientation in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    fn from_matrix(t: &Matrix4<f64>) -> Self {
        Self {
            position: t.fixed_view::<3, 1>(0, 3).into_owned(),
            rotation: t.fixed_view::<3, 3>(0, 0).into_owned(),
        }
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
        ]
    }

    /// max |RᵀR − I| and |det R − 1|.
    pub fn orthonormality_error(&self) -> f64 {
        let e = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        e.max((self.rotation.determinant() - 1.0).abs())
    }
}

pub fn forward_kinematics(q: &JointVector, dh: &DhTable) -> Pose {
    Pose::from_matrix(&dh.frames(q)[6])
}

/// Geometric Jacobian of the flange: rows 0..3 linear, rows 3..6 angular.
pub fn jacobian(q: &JointVector, dh: &DhTable) -> Matrix6<f64> {
    let frames = dh.frames(q);
    let tip: Vector3<f64> = frames[6].fixed_view::<3, 1>(0, 3).into_owned();
    let mut j = Matrix6::zeros();
    for i in 0..6 {
        let z: Vector3<f64> = frames[i].fixed_view::<3, 1>(0, 2).into_owned();
        let o: Vector3<f64> = frames[i].fixed_view::<3, 1>(0, 3).into_owned();
        let lin = z.cross(&(tip - o));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&z);
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn home_pose_position() {
        let p = forward_kinematics(&[0.0; 6], &DhTable::default());
        // a2 + a3, -(d4 + d6), d1 - d5
        let expected = [-0.81725, -0.19145, 0.089159 - 0.09465];
        for k in 0..3 {
            assert!((p.position[k] - expected[k]).abs() < 1e-12, "{k}: {}", p.position[k]);
        }
        assert!(p.orthonormality_error() < 1e-12);
    }

    #[test]
    fn last_joint_only_rotates() {
        let dh = DhTable::default();
        let mut q = [0.3, -1.2, 1.1, -0.4, 0.9, 0.0];
        let a = forward_kinematics(&q, &dh);
        q[5] = 2.0;
        let b = forward_kinematics(&q, &dh);
        assert!((a.position - b.position).norm() < 1e-12);
        assert!((a.rotation - b.rotation).norm() > 0.1);
    }

    #[test]
    fn jacobian_is_finite_6x6() {
        let j = jacobian(&[0.1, -1.0, 1.0, 0.2, -0.3, 0.4], &DhTable::default());
        assert_eq!(j.shape(), (6, 6));
        assert!(j.iter().all(|v| v.is_finite()));
    }
}
