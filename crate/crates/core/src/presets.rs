//! Reference data for the shipped arm and the synthetic testbed.

use nalgebra::{Matrix3, Vector3};

use crate::dynamics::{LinkInertialSet, LinkParams};
use crate::model::RobotModel;
use crate::stribeck::FrictionParams;

/// Identified linearized Stribeck coefficients per joint, planted as ground truth.
pub const JOINT_FRICTION: [FrictionParams; 6] = [
    FrictionParams::new(20.77, 7.83, -15.15),
    FrictionParams::new(12.62, 4.51, -11.53),
    FrictionParams::new(12.41, 7.03, -11.99),
    FrictionParams::new(8.73, 2.23, -5.18),
    FrictionParams::new(9.23, 4.41, -5.60),
    FrictionParams::new(6.62, 3.99, -3.01),
];

/// Piston masses (kg) of the six cylinders.
pub const PISTON_MASS: [f64; 6] = [4.595, 4.914, 2.324, 1.937, 1.729, 1.705];

/// Residual standard deviations reported for the physical arm, per joint.
pub const REPORTED_RSD: [f64; 6] = [0.226, 0.289, 0.378, 0.1929, 0.1787, 0.3356];

/// Fourier coefficients `(a_1, b_1, a_2, b_2, a_3, b_3, q_0)` per joint as
/// published: velocity amplitudes in deg/s and offsets in degrees.
pub const FOURIER_TABLE_DEG: [[f64; 7]; 6] = [
    [-8.996, 8.600, -8.464, 8.106, 17.460, -8.270, 31.500],
    [8.615, 6.350, 6.524, 3.476, -15.138, -4.434, 21.038],
    [5.486, 5.941, 5.265, 5.936, -10.751, -5.938, 22.058],
    [-5.669, -4.520, 7.319, -4.702, -1.650, 4.642, -8.473],
    [4.879, 7.538, -8.006, 6.429, 3.127, -6.798, 13.507],
    [-4.169, -4.151, 4.731, -8.877, -0.562, 7.302, -9.797],
];

/// Link masses (kg) of the synthetic ground truth.
const LINK_MASS: [f64; 6] = [14.0, 18.0, 6.5, 4.2, 3.6, 2.4];

/// Synthetic ground-truth parameters for the shipped arm.
///
/// Each link is modelled as a slightly offset slender body lying along the
/// negative x axis of its frame (distal D-H frames sit at the link tip),
/// with friction taken from [`JOINT_FRICTION`].
pub fn ground_truth_params() -> LinkInertialSet {
    let model = RobotModel::default_arm();
    let links = (0..6)
        .map(|i| {
            let a = model.joint_row(i).a;
            let m = LINK_MASS[i];
            let k = i as f64;
            let com = Vector3::new(-0.45 * a, 0.012 * (k - 2.5), 0.02 + 0.005 * k);
            let rod = m * a * a / 12.0;
            let radial = 0.02 * m * 0.05;
            let inertia_com = Matrix3::new(
                radial + 0.01,
                0.002 * (k + 1.0),
                -0.001 * k, //
                0.002 * (k + 1.0),
                rod + 0.02,
                0.0015, //
                -0.001 * k,
                0.0015,
                rod + 0.03,
            );
            LinkParams::from_com(m, com, inertia_com, JOINT_FRICTION[i])
        })
        .collect();
    LinkInertialSet { links }
}
