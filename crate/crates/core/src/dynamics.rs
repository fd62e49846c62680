//! Recursive Newton-Euler inverse dynamics and the linear regressor.
//!
//! Link parameters are expressed in the link's own D-H frame (frame `i` for
//! link `i`) with the inertia tensor taken about the frame origin, which makes
//! joint torque exactly linear in the 13 per-link parameters
//!
//! ```text
//! m, m·r_x, m·r_y, m·r_z, I_xx, I_yy, I_zz, I_xy, I_xz, I_yz, f_c, f_v, f_s
//! ```
//!
//! That column order is frozen; reduction, estimation and the file formats
//! all index into it.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JointState, RobotModel};
use crate::stribeck::FrictionParams;

pub const PARAMS_PER_LINK: usize = 13;
pub const INERTIAL_PARAMS_PER_LINK: usize = 10;

/// Short names of the per-link parameters, in column order.
pub const PARAM_NAMES: [&str; PARAMS_PER_LINK] = [
    "m", "mx", "my", "mz", "Ixx", "Iyy", "Izz", "Ixy", "Ixz", "Iyz", "fc", "fv", "fs",
];

/// Label of a column of the full regressor, e.g. `Izz3`.
pub fn column_label(col: usize) -> String {
    format!("{}{}", PARAM_NAMES[col % PARAMS_PER_LINK], col / PARAMS_PER_LINK + 1)
}

pub fn is_friction_column(col: usize) -> bool {
    col % PARAMS_PER_LINK >= INERTIAL_PARAMS_PER_LINK
}

/// `I_com + m (pᵀp·E − p pᵀ)`: inertia about a point displaced by `-p` from the COM.
pub fn parallel_axis(inertia_com: &Matrix3<f64>, mass: f64, p: &Vector3<f64>) -> Matrix3<f64> {
    inertia_com + (Matrix3::identity() * p.dot(p) - p * p.transpose()) * mass
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub mass: f64,
    /// Mass-weighted centre of mass, `m·r`, in the link frame.
    pub first_moment: Vector3<f64>,
    /// Inertia tensor about the link frame origin.
    pub inertia: Matrix3<f64>,
    pub friction: FrictionParams,
}

impl LinkParams {
    pub fn zero() -> Self {
        LinkParams {
            mass: 0.0,
            first_moment: Vector3::zeros(),
            inertia: Matrix3::zeros(),
            friction: FrictionParams::ZERO,
        }
    }

    /// Build from CAD-style data: COM position and inertia about the COM.
    pub fn from_com(mass: f64, com: Vector3<f64>, inertia_com: Matrix3<f64>, friction: FrictionParams) -> Self {
        LinkParams {
            mass,
            first_moment: com * mass,
            inertia: parallel_axis(&inertia_com, mass, &com),
            friction,
        }
    }

    pub fn to_array(&self) -> [f64; PARAMS_PER_LINK] {
        let i = &self.inertia;
        let h = &self.first_moment;
        let f = &self.friction;
        [
            self.mass,
            h.x,
            h.y,
            h.z,
            i[(0, 0)],
            i[(1, 1)],
            i[(2, 2)],
            i[(0, 1)],
            i[(0, 2)],
            i[(1, 2)],
            f.f_c,
            f.f_v,
            f.f_s,
        ]
    }

    pub fn from_slice(p: &[f64]) -> Self {
        assert_eq!(p.len(), PARAMS_PER_LINK);
        LinkParams {
            mass: p[0],
            first_moment: Vector3::new(p[1], p[2], p[3]),
            inertia: Matrix3::new(
                p[4], p[7], p[8], //
                p[7], p[5], p[9], //
                p[8], p[9], p[6],
            ),
            friction: FrictionParams::new(p[10], p[11], p[12]),
        }
    }
}

/// Full parameter set of the arm, one [`LinkParams`] per actuated link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkInertialSet {
    pub links: Vec<LinkParams>,
}

impl LinkInertialSet {
    pub fn zeros(n: usize) -> Self {
        LinkInertialSet {
            links: vec![LinkParams::zero(); n],
        }
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.links.len() * PARAMS_PER_LINK,
            self.links.iter().flat_map(|l| l.to_array()),
        )
    }

    pub fn from_vector(v: &DVector<f64>) -> Self {
        assert_eq!(v.len() % PARAMS_PER_LINK, 0);
        LinkInertialSet {
            links: v
                .as_slice()
                .chunks(PARAMS_PER_LINK)
                .map(LinkParams::from_slice)
                .collect(),
        }
    }

    pub fn friction(&self) -> Vec<FrictionParams> {
        self.links.iter().map(|l| l.friction).collect()
    }

    pub fn with_friction(mut self, friction: &[FrictionParams]) -> Self {
        for (l, f) in self.links.iter_mut().zip(friction) {
            l.friction = *f;
        }
        self
    }

    pub fn without_friction(self) -> Self {
        let n = self.n_links();
        self.with_friction(&vec![FrictionParams::ZERO; n])
    }

    /// True when every link has positive mass and a positive definite inertia.
    pub fn is_physical(&self) -> bool {
        self.links
            .iter()
            .all(|l| l.mass > 0.0 && nalgebra::Cholesky::new(l.inertia).is_some())
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        if self.n_links() != model.n_joints() {
            return Err(Error::Count {
                what: "links",
                expected: model.n_joints(),
                found: self.n_links(),
            });
        }
        Ok(())
    }
}

/// Joint friction torque from the linearized Stribeck law.
pub fn friction_torque(params: &FrictionParams, dq: f64) -> f64 {
    params.force(dq)
}

/// Per-link motion quantities from the outward recursion, all in frame `i`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LinkMotion {
    /// Rotation of frame `i` relative to frame `i-1`.
    rot: Matrix3<f64>,
    /// Vector from origin `i-1` to origin `i`, in frame `i`.
    offset: Vector3<f64>,
    omega: Vector3<f64>,
    omega_dot: Vector3<f64>,
    /// Linear acceleration of the origin, gravity folded in as a base acceleration.
    accel: Vector3<f64>,
}

pub(crate) fn outward_pass(model: &RobotModel, s: &JointState) -> Vec<LinkMotion> {
    let n = model.n_joints();
    assert_eq!(s.n_joints(), n, "state dimension");
    let z = Vector3::z();
    let mut omega = Vector3::zeros();
    let mut omega_dot = Vector3::zeros();
    let mut accel = -model.gravity_in_base_frame();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (rot, origin) = model.joint_row(i).rotation_translation(s.q[i]);
        let rt = rot.transpose();
        let offset = rt * origin;
        let (dq, ddq) = (s.dq[i], s.ddq[i]);
        let omega_dot_next = rt * (omega_dot + z * ddq + omega.cross(&(z * dq)));
        let omega_next = rt * (omega + z * dq);
        // accel is the previous origin's acceleration in frame i-1
        let accel_next = rt * accel + omega_dot_next.cross(&offset) + omega_next.cross(&omega_next.cross(&offset));
        omega = omega_next;
        omega_dot = omega_dot_next;
        accel = accel_next;
        out.push(LinkMotion {
            rot,
            offset,
            omega,
            omega_dot,
            accel,
        });
    }
    out
}

/// Newton-Euler wrench (force, moment about the frame origin) of one link.
fn link_wrench(m: &LinkMotion, p: &LinkParams) -> (Vector3<f64>, Vector3<f64>) {
    let h = p.first_moment;
    let force = m.accel * p.mass + m.omega_dot.cross(&h) + m.omega.cross(&m.omega.cross(&h));
    let moment = p.inertia * m.omega_dot + m.omega.cross(&(p.inertia * m.omega)) + h.cross(&m.accel);
    (force, moment)
}

/// Inverse dynamics `τ = M(q)q̈ + C(q,q̇)q̇ + G(q) + τ_f(q̇)`.
pub fn inverse_dynamics(model: &RobotModel, params: &LinkInertialSet, s: &JointState) -> DVector<f64> {
    let n = model.n_joints();
    assert_eq!(params.n_links(), n, "parameter set size");
    let motion = outward_pass(model, s);
    let mut tau = DVector::zeros(n);
    let mut f = Vector3::zeros();
    let mut nm = Vector3::zeros();
    for i in (0..n).rev() {
        let (fi, ni) = link_wrench(&motion[i], &params.links[i]);
        // f, nm hold the child's wrench already mapped into frame i
        let f_i = fi + f;
        let n_i = ni + nm;
        let m = &motion[i];
        f = m.rot * f_i;
        nm = m.rot * (n_i + m.offset.cross(&f_i));
        tau[i] = nm.z + friction_torque(&params.links[i].friction, s.dq[i]);
    }
    tau
}

/// Regressor `Y(q, q̇, q̈)` with `τ = Y · vec(X)`, shape `n × 13n`.
///
/// Column `13j + k` is the torque produced by a unit value of parameter `k`
/// of link `j`, all other parameters zero. The outward kinematics are shared
/// across columns; each unit wrench is then propagated inward.
pub fn regressor(model: &RobotModel, s: &JointState) -> DMatrix<f64> {
    let n = model.n_joints();
    let motion = outward_pass(model, s);
    let mut y = DMatrix::zeros(n, n * PARAMS_PER_LINK);
    for j in 0..n {
        let mut unit = [0.0; PARAMS_PER_LINK];
        for k in 0..INERTIAL_PARAMS_PER_LINK {
            unit[k] = 1.0;
            let (mut f, mut nm) = link_wrench(&motion[j], &LinkParams::from_slice(&unit));
            unit[k] = 0.0;
            for i in (0..=j).rev() {
                let m = &motion[i];
                let n_parent = m.rot * (nm + m.offset.cross(&f));
                f = m.rot * f;
                nm = n_parent;
                y[(i, j * PARAMS_PER_LINK + k)] = nm.z;
            }
        }
        let basis = FrictionParams::basis(s.dq[j]);
        for (k, b) in basis.iter().enumerate() {
            y[(j, j * PARAMS_PER_LINK + INERTIAL_PARAMS_PER_LINK + k)] = *b;
        }
    }
    y
}

/// Joint-space inertia matrix by unit accelerations with gravity, velocity and friction removed.
pub fn mass_matrix(model: &RobotModel, params: &LinkInertialSet, q: &DVector<f64>) -> DMatrix<f64> {
    let n = model.n_joints();
    let free = model.clone().with_gravity(Vector3::zeros());
    let params = params.clone().without_friction();
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut ddq = DVector::zeros(n);
        ddq[k] = 1.0;
        let s = JointState::new(0.0, q.clone(), DVector::zeros(n), ddq);
        m.set_column(k, &inverse_dynamics(&free, &params, &s));
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forward_kinematics;
    use crate::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(model: &RobotModel, rng: &mut ChaCha8Rng) -> JointState {
        let n = model.n_joints();
        let mut s = JointState::zeros(n);
        for (i, l) in model.limits().iter().enumerate() {
            s.q[i] = rng.random_range(l.q_min..=l.q_max);
            s.dq[i] = rng.random_range(-l.dq_max..=l.dq_max);
            s.ddq[i] = rng.random_range(-l.ddq_max..=l.ddq_max);
        }
        s
    }

    fn random_params(n: usize, rng: &mut ChaCha8Rng) -> LinkInertialSet {
        LinkInertialSet::from_vector(&DVector::from_fn(n * PARAMS_PER_LINK, |_, _| {
            rng.random_range(-3.0..3.0)
        }))
    }

    #[test]
    fn parallel_axis_cases() {
        let ic = Matrix3::new(1.0, 0.1, 0.2, 0.1, 2.0, 0.3, 0.2, 0.3, 3.0);
        assert_eq!(parallel_axis(&ic, 5.0, &Vector3::zeros()), ic);
        let pm = parallel_axis(&Matrix3::zeros(), 2.0, &Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(pm, Matrix3::from_diagonal(&Vector3::new(0.0, 2.0, 2.0)));
        let shifted = parallel_axis(&ic, 3.0, &Vector3::new(0.2, -0.4, 0.7));
        assert!((shifted - shifted.transpose()).amax() < 1e-15);
        assert!(shifted.trace() >= ic.trace());
    }

    #[test]
    fn friction_torque_values() {
        let j1 = FrictionParams::new(20.77, 7.83, -15.15);
        assert_eq!(friction_torque(&j1, 0.0), 0.0);
        assert!((friction_torque(&j1, 1.0) - 13.45).abs() < 1e-12);
        for v in [0.01, 0.3, 2.0] {
            assert_eq!(friction_torque(&j1, -v), -friction_torque(&j1, v));
        }
    }

    #[test]
    fn zero_motion_no_gravity_no_torque() {
        let model = RobotModel::default_arm().with_gravity(Vector3::zeros());
        let gt = presets::ground_truth_params();
        let tau = inverse_dynamics(&model, &gt, &JointState::zeros(6));
        assert!(tau.amax() < 1e-14);
    }

    /// Holding torque from world-frame moment arms of every distal COM.
    fn gravity_oracle(model: &RobotModel, params: &LinkInertialSet, q: &[f64]) -> Vec<f64> {
        let frames = forward_kinematics(model, q);
        let g = model.gravity();
        let n = model.n_joints();
        let coms: Vec<Vector3<f64>> = (0..n)
            .map(|j| {
                let f = &frames[j + 1];
                let r = f.fixed_view::<3, 3>(0, 0);
                let o = f.fixed_view::<3, 1>(0, 3);
                o + r * (params.links[j].first_moment / params.links[j].mass)
            })
            .collect();
        (0..n)
            .map(|i| {
                let axis_frame = &frames[i];
                let z = axis_frame.fixed_view::<3, 1>(0, 2).into_owned();
                let o = axis_frame.fixed_view::<3, 1>(0, 3).into_owned();
                let moment: Vector3<f64> = (i..n).map(|j| (coms[j] - o).cross(&(g * params.links[j].mass))).sum();
                -z.dot(&moment)
            })
            .collect()
    }

    #[test]
    fn static_torque_matches_gravity_oracle() {
        let model = RobotModel::default_arm();
        let gt = presets::ground_truth_params().without_friction();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut s = random_state(&model, &mut rng);
            s.dq.fill(0.0);
            s.ddq.fill(0.0);
            let tau = inverse_dynamics(&model, &gt, &s);
            let oracle = gravity_oracle(&model, &gt, s.q.as_slice());
            for i in 0..6 {
                assert!(
                    (tau[i] - oracle[i]).abs() < 1e-9 * (1.0 + oracle[i].abs()),
                    "{i}: {} vs {}",
                    tau[i],
                    oracle[i]
                );
            }
        }
    }

    /// Kinetic plus potential energy from world-frame Jacobian velocities.
    fn energy(model: &RobotModel, params: &LinkInertialSet, q: &[f64], dq: &[f64]) -> f64 {
        let frames = forward_kinematics(model, q);
        let n = model.n_joints();
        let g = model.gravity();
        let mut e = 0.0;
        for j in 0..n {
            let fj = &frames[j + 1];
            let rj = fj.fixed_view::<3, 3>(0, 0).into_owned();
            let oj = fj.fixed_view::<3, 1>(0, 3).into_owned();
            let mut w = Vector3::zeros();
            let mut v = Vector3::zeros();
            for i in 0..=j {
                let z = frames[i].fixed_view::<3, 1>(0, 2).into_owned();
                let o = frames[i].fixed_view::<3, 1>(0, 3).into_owned();
                w += z * dq[i];
                v += z.cross(&(oj - o)) * dq[i];
            }
            let p = &params.links[j];
            let h_world = rj * p.first_moment;
            let i_world = rj * p.inertia * rj.transpose();
            e += 0.5 * p.mass * v.dot(&v) + v.dot(&w.cross(&h_world)) + 0.5 * w.dot(&(i_world * w));
            e -= g.dot(&(oj * p.mass + h_world));
        }
        e
    }

    #[test]
    fn power_matches_energy_rate() {
        let model = RobotModel::default_arm();
        let gt = presets::ground_truth_params().without_friction();
        let traj = |t: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut q = vec![0.0; 6];
            let mut dq = vec![0.0; 6];
            let mut ddq = vec![0.0; 6];
            for i in 0..6 {
                let w = 0.7 + 0.3 * i as f64;
                let a = 0.4 / (1.0 + i as f64);
                q[i] = 0.1 + a * (w * t).sin();
                dq[i] = a * w * (w * t).cos();
                ddq[i] = -a * w * w * (w * t).sin();
            }
            (q, dq, ddq)
        };
        let h = 1e-4;
        for k in 0..20 {
            let t = 0.37 * k as f64;
            let (q, dq, ddq) = traj(t);
            let s = JointState::from_slices(t, &q, &dq, &ddq);
            let power = inverse_dynamics(&model, &gt, &s).dot(&DVector::from_column_slice(&dq));
            let e = |tt: f64| {
                let (q, dq, _) = traj(tt);
                energy(&model, &gt, &q, &dq)
            };
            let de = (e(t + h) - e(t - h)) / (2.0 * h);
            let scale = power.abs().max(1.0);
            assert!((power - de).abs() < 1e-6 * scale, "t={t}: {power} vs {de}");
        }
    }

    #[test]
    fn regressor_times_params_matches_rnea() {
        let model = RobotModel::default_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let s = random_state(&model, &mut rng);
            let x = random_params(6, &mut rng);
            let lhs = regressor(&model, &s) * x.to_vector();
            let rhs = inverse_dynamics(&model, &x, &s);
            assert!((lhs - &rhs).amax() <= 1e-9 * rhs.amax().max(1e-12));
        }
    }

    #[test]
    fn friction_columns_structure() {
        let model = RobotModel::default_arm();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_state(&model, &mut rng);
        let y = regressor(&model, &s);
        for j in 0..6 {
            let c = j * PARAMS_PER_LINK + INERTIAL_PARAMS_PER_LINK;
            for i in 0..6 {
                let expect = if i == j {
                    FrictionParams::basis(s.dq[j])
                } else {
                    [0.0; 3]
                };
                assert_eq!([y[(i, c)], y[(i, c + 1)], y[(i, c + 2)]], expect);
            }
        }
    }

    #[test]
    fn static_state_only_gravity_columns() {
        let model = RobotModel::default_arm();
        let y = regressor(&model, &JointState::zeros(6));
        // inertia columns need velocity or acceleration
        for j in 0..6 {
            for k in 4..PARAMS_PER_LINK {
                assert!(
                    y.column(j * PARAMS_PER_LINK + k).amax() < 1e-14,
                    "{}",
                    column_label(j * 13 + k)
                );
            }
        }
        assert!(y.column(1).amax() > 1.0, "mx1 feels gravity");
        let no_g = regressor(&model.with_gravity(Vector3::zeros()), &JointState::zeros(6));
        assert!(no_g.amax() < 1e-14);
    }

    #[test]
    fn mass_matrix_positive_definite() {
        let model = RobotModel::default_arm();
        let gt = presets::ground_truth_params();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let q = random_state(&model, &mut rng).q;
            let m = mass_matrix(&model, &gt, &q);
            assert!((&m - m.transpose()).amax() < 1e-12);
            assert!(nalgebra::Cholesky::new(m).is_some());
        }
    }

    #[test]
    fn labels() {
        assert_eq!(column_label(0), "m1");
        assert_eq!(column_label(13 * 2 + 6), "Izz3");
        assert_eq!(column_label(77), "fs6");
        assert!(is_friction_column(10) && !is_friction_column(9));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn regressor_is_linear(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
                let model = RobotModel::default_arm();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let s = random_state(&model, &mut rng);
                let x1 = random_params(6, &mut rng);
                let x2 = random_params(6, &mut rng);
                let mix = LinkInertialSet::from_vector(&(x1.to_vector() * a + x2.to_vector() * b));
                let lhs = regressor(&model, &s) * mix.to_vector();
                let rhs = inverse_dynamics(&model, &x1, &s) * a + inverse_dynamics(&model, &x2, &s) * b;
                prop_assert!((lhs - &rhs).amax() <= 1e-9 * rhs.amax().max(1.0));
            }

            #[test]
            fn friction_is_odd(fc in -30.0..30.0f64, fv in -10.0..10.0f64, fs in -20.0..20.0f64, v in -5.0..5.0f64) {
                let p = FrictionParams::new(fc, fv, fs);
                prop_assert_eq!(friction_torque(&p, -v), -friction_torque(&p, v));
            }
        }
    }
}
