//! Dynamic parameter identification for a hydraulically actuated serial arm.
//!
//! The crate covers the whole identification chain: D-H kinematics, Newton-Euler
//! inverse dynamics and its linear regressor, numerical base-parameter
//! reduction, a hydraulic-cylinder testbed with Stribeck friction, friction
//! identification by batch and recursive least squares, Fourier excitation
//! design, and the batch estimation pipeline with torque-residual validation.

pub mod dynamics;
pub mod error;
pub mod excitation;
pub mod friction;
pub mod hydraulic;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod presets;
pub mod reduction;
pub mod stribeck;

pub use dynamics::{inverse_dynamics, regressor, LinkInertialSet, LinkParams};
pub use error::{Error, Result};
pub use model::{JointLimits, JointState, RobotModel};
pub use stribeck::{FrictionParams, StribeckParams};
