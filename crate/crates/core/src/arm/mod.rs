//! UR5 stand-in: DH kinematics, damped least-squares velocity resolution and
//! a fixed-step simulator.

mod dh;
mod dls;
mod sim;

pub use dh::{forward_kinematics, jacobian, DhRow, DhTable, Pose};
pub use dls::{resolve_velocity, ArmModel};
pub use sim::{step, SimConfig, SimError, SimState, StepOutcome};

/// Joint angles in radians.
pub type JointVector = [f64; 6];
