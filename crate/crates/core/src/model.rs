//! Kinematic description of the arm: D-H rows, joint limits and gravity.
//!
//! Config documents use millimetres and degrees for the D-H table and
//! radians for the limits. Everything inside [`RobotModel`] is SI.

use nalgebra::{DVector, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shipped model config reproducing the arm's D-H table and motion limits.
pub const DEFAULT_MODEL_CONFIG: &str = include_str!("../data/model.json");

/// One row of a distal (standard) Denavit-Hartenberg table, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DHRow {
    pub d: f64,
    pub alpha: f64,
    pub a: f64,
    pub theta_offset: f64,
}

impl DHRow {
    pub const IDENTITY: DHRow = DHRow {
        d: 0.0,
        alpha: 0.0,
        a: 0.0,
        theta_offset: 0.0,
    };

    pub fn new(d: f64, alpha: f64, a: f64, theta_offset: f64) -> Result<Self> {
        let row = DHRow {
            d,
            alpha,
            a,
            theta_offset,
        };
        if ![d, alpha, a, theta_offset].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite D-H row {row:?}")));
        }
        if a < 0.0 {
            return Err(Error::InvalidParameter(format!("negative link length {a}")));
        }
        Ok(row)
    }

    /// Rotation block and origin of `Rz(q + θ) · Tz(d) · Tx(a) · Rx(α)`.
    pub fn rotation_translation(&self, q: f64) -> (Matrix3<f64>, Vector3<f64>) {
        let (st, ct) = (q + self.theta_offset).sin_cos();
        let (sa, ca) = self.alpha.sin_cos();
        let rot = Matrix3::new(
            ct,
            -st * ca,
            st * sa, //
            st,
            ct * ca,
            -ct * sa, //
            0.0,
            sa,
            ca,
        );
        let origin = Vector3::new(self.a * ct, self.a * st, self.d);
        (rot, origin)
    }
}

/// Homogeneous transform of frame `i` expressed in frame `i-1`.
pub fn link_transform(row: &DHRow, q: f64) -> Matrix4<f64> {
    let (rot, origin) = row.rotation_translation(q);
    let mut t = Matrix4::identity();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(&origin);
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub q_min: f64,
    pub q_max: f64,
    pub dq_max: f64,
    pub ddq_max: f64,
}

impl JointLimits {
    pub fn new(q_min: f64, q_max: f64, dq_max: f64, ddq_max: f64) -> Result<Self> {
        let lim = JointLimits {
            q_min,
            q_max,
            dq_max,
            ddq_max,
        };
        lim.check(0)?;
        Ok(lim)
    }

    fn check(&self, joint: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::InvalidLimits { joint, reason });
        if ![self.q_min, self.q_max, self.dq_max, self.ddq_max]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("non-finite bound".into());
        }
        if self.q_min >= self.q_max {
            return bad(format!("q_min {} >= q_max {}", self.q_min, self.q_max));
        }
        if self.dq_max <= 0.0 {
            return bad(format!("dq_max {} <= 0", self.dq_max));
        }
        if self.ddq_max <= 0.0 {
            return bad(format!("ddq_max {} <= 0", self.ddq_max));
        }
        Ok(())
    }

    pub fn q_span(&self) -> f64 {
        self.q_max - self.q_min
    }
}

/// Serial arm: a fixed base row followed by one row per actuated joint.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    dh_rows: Vec<DHRow>,
    limits: Vec<JointLimits>,
    gravity: Vector3<f64>,
}

impl RobotModel {
    pub fn new(dh_rows: Vec<DHRow>, limits: Vec<JointLimits>, gravity: Vector3<f64>) -> Result<Self> {
        if dh_rows.len() != limits.len() + 1 {
            return Err(Error::Count {
                what: "D-H rows (base row plus one per limit entry)",
                expected: limits.len() + 1,
                found: dh_rows.len(),
            });
        }
        if limits.is_empty() {
            return Err(Error::Malformed("model has no actuated joints".into()));
        }
        for (i, lim) in limits.iter().enumerate() {
            lim.check(i + 1)?;
        }
        if !gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidParameter("non-finite gravity".into()));
        }
        Ok(RobotModel {
            dh_rows,
            limits,
            gravity,
        })
    }

    /// The shipped six-joint arm.
    pub fn default_arm() -> Self {
        load_model(DEFAULT_MODEL_CONFIG).expect("shipped model config is valid")
    }

    pub fn n_joints(&self) -> usize {
        self.limits.len()
    }

    pub fn dh_rows(&self) -> &[DHRow] {
        &self.dh_rows
    }

    pub fn base_row(&self) -> &DHRow {
        &self.dh_rows[0]
    }

    /// D-H row of actuated joint `i` (zero-based).
    pub fn joint_row(&self, i: usize) -> &DHRow {
        &self.dh_rows[i + 1]
    }

    pub fn limits(&self) -> &[JointLimits] {
        &self.limits
    }

    /// Gravity in the world (base) frame.
    pub fn gravity(&self) -> Vector3<f64> {
        self.gravity
    }

    pub fn with_gravity(mut self, gravity: Vector3<f64>) -> Self {
        self.gravity = gravity;
        self
    }

    /// Gravity expressed in the frame produced by the fixed base row.
    pub fn gravity_in_base_frame(&self) -> Vector3<f64> {
        let (rot, _) = self.base_row().rotation_translation(0.0);
        rot.transpose() * self.gravity
    }

    /// Same model with every link length replaced.
    pub fn with_link_lengths(&self, lengths: &[f64]) -> Result<Self> {
        if lengths.len() != self.n_joints() {
            return Err(Error::Count {
                what: "link lengths",
                expected: self.n_joints(),
                found: lengths.len(),
            });
        }
        let mut rows = self.dh_rows.clone();
        for (row, &a) in rows[1..].iter_mut().zip(lengths) {
            row.a = a;
        }
        RobotModel::new(rows, self.limits.clone(), self.gravity)
    }
}

/// Joint-space sample: positions, velocities, accelerations at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub t: f64,
    pub q: DVector<f64>,
    pub dq: DVector<f64>,
    pub ddq: DVector<f64>,
}

impl JointState {
    pub fn new(t: f64, q: DVector<f64>, dq: DVector<f64>, ddq: DVector<f64>) -> Self {
        debug_assert!(q.len() == dq.len() && q.len() == ddq.len());
        JointState { t, q, dq, ddq }
    }

    pub fn zeros(n: usize) -> Self {
        JointState::new(0.0, DVector::zeros(n), DVector::zeros(n), DVector::zeros(n))
    }

    pub fn from_slices(t: f64, q: &[f64], dq: &[f64], ddq: &[f64]) -> Self {
        JointState::new(
            t,
            DVector::from_column_slice(q),
            DVector::from_column_slice(dq),
            DVector::from_column_slice(ddq),
        )
    }

    pub fn n_joints(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q
            .iter()
            .chain(self.dq.iter())
            .chain(self.ddq.iter())
            .all(|v| v.is_finite())
    }
}

/// World-frame pose of every frame along the chain.
///
/// Entry 0 is the frame after the fixed base row; entry `i` is the frame
/// carried by joint `i`. The list has `n_joints + 1` entries.
pub fn forward_kinematics(model: &RobotModel, q: &[f64]) -> Vec<Matrix4<f64>> {
    assert_eq!(q.len(), model.n_joints(), "joint vector length");
    let mut frames = Vec::with_capacity(model.n_joints() + 1);
    let mut t = link_transform(model.base_row(), 0.0);
    frames.push(t);
    for (i, &qi) in q.iter().enumerate() {
        t *= link_transform(model.joint_row(i), qi);
        frames.push(t);
    }
    frames
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Position,
    Velocity,
    Acceleration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateViolation {
    /// One-based joint number.
    pub joint: usize,
    pub quantity: Quantity,
    pub value: f64,
    pub bound: f64,
}

/// Every limit exceeded by `state`; bounds are closed intervals.
pub fn validate_state(model: &RobotModel, state: &JointState) -> Vec<StateViolation> {
    let mut out = Vec::new();
    for (i, lim) in model.limits().iter().enumerate() {
        let joint = i + 1;
        let q = state.q[i];
        if q < lim.q_min || q.is_nan() {
            out.push(StateViolation {
                joint,
                quantity: Quantity::Position,
                value: q,
                bound: lim.q_min,
            });
        } else if q > lim.q_max {
            out.push(StateViolation {
                joint,
                quantity: Quantity::Position,
                value: q,
                bound: lim.q_max,
            });
        }
        let dq = state.dq[i];
        if !(dq.abs() <= lim.dq_max) {
            out.push(StateViolation {
                joint,
                quantity: Quantity::Velocity,
                value: dq,
                bound: lim.dq_max.copysign(dq),
            });
        }
        let ddq = state.ddq[i];
        if !(ddq.abs() <= lim.ddq_max) {
            out.push(StateViolation {
                joint,
                quantity: Quantity::Acceleration,
                value: ddq,
                bound: lim.ddq_max.copysign(ddq),
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Config document

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DHRowConfig {
    pub d_mm: f64,
    pub alpha_deg: f64,
    pub a_mm: f64,
    pub theta_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    pub q_min_rad: f64,
    pub q_max_rad: f64,
    pub dq_max: f64,
    pub ddq_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dh: Vec<DHRowConfig>,
    pub limits: Vec<LimitConfig>,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

impl ModelConfig {
    pub fn to_model(&self) -> Result<RobotModel> {
        let rows = self
            .dh
            .iter()
            .map(|r| {
                DHRow::new(
                    r.d_mm / 1000.0,
                    r.alpha_deg.to_radians(),
                    r.a_mm / 1000.0,
                    r.theta_deg.to_radians(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let limits = self
            .limits
            .iter()
            .map(|l| JointLimits {
                q_min: l.q_min_rad,
                q_max: l.q_max_rad,
                dq_max: l.dq_max,
                ddq_max: l.ddq_max,
            })
            .collect();
        RobotModel::new(rows, limits, Vector3::from(self.gravity))
    }

    pub fn from_model(model: &RobotModel) -> Self {
        ModelConfig {
            dh: model
                .dh_rows()
                .iter()
                .map(|r| DHRowConfig {
                    d_mm: r.d * 1000.0,
                    alpha_deg: r.alpha.to_degrees(),
                    a_mm: r.a * 1000.0,
                    theta_deg: r.theta_offset.to_degrees(),
                })
                .collect(),
            limits: model
                .limits()
                .iter()
                .map(|l| LimitConfig {
                    q_min_rad: l.q_min,
                    q_max_rad: l.q_max,
                    dq_max: l.dq_max,
                    ddq_max: l.ddq_max,
                })
                .collect(),
            gravity: model.gravity().into(),
        }
    }
}

/// Parse a JSON model document into SI units.
pub fn load_model(config_text: &str) -> Result<RobotModel> {
    let cfg: ModelConfig = serde_json::from_str(config_text)?;
    cfg.to_model()
}

pub fn model_to_json(model: &RobotModel) -> String {
    serde_json::to_string_pretty(&ModelConfig::from_model(model)).expect("model config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn rotation_error(t: &Matrix4<f64>) -> f64 {
        let r = t.fixed_view::<3, 3>(0, 0).into_owned();
        (r.transpose() * r - Matrix3::identity()).norm()
    }

    #[test]
    fn default_config_matches_tables() {
        let m = RobotModel::default_arm();
        assert_eq!(m.n_joints(), 6);
        assert_eq!(m.dh_rows().len(), 7);
        let j2 = m.joint_row(1);
        assert!((j2.a - 0.84246).abs() < 1e-15);
        assert!((j2.theta_offset - 130f64.to_radians()).abs() < 1e-15);
        let l1 = m.limits()[0];
        assert_eq!((l1.q_min, l1.q_max, l1.dq_max, l1.ddq_max), (-0.0523, 1.0472, 0.2, 0.1));
        assert!((m.base_row().alpha - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn degenerate_bound_rejected() {
        let text = DEFAULT_MODEL_CONFIG.replacen("\"q_min_rad\": -0.0523", "\"q_min_rad\": 1.0472", 1);
        match load_model(&text) {
            Err(Error::InvalidLimits { joint: 1, .. }) => {}
            other => panic!("expected limit error, got {other:?}"),
        }
    }

    #[test]
    fn row_count_mismatch_rejected() {
        let mut cfg: ModelConfig = serde_json::from_str(DEFAULT_MODEL_CONFIG).unwrap();
        cfg.dh.pop();
        assert!(matches!(cfg.to_model(), Err(Error::Count { .. })));
        assert!(matches!(load_model("{\"dh\": 3}"), Err(Error::Json(_))));
    }

    #[test]
    fn identity_row_gives_identity() {
        assert_eq!(link_transform(&DHRow::IDENTITY, 0.0), Matrix4::identity());
    }

    #[test]
    fn unit_link_quarter_turn() {
        let row = DHRow::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let t = link_transform(&row, FRAC_PI_2);
        assert!((t[(0, 3)] - 0.0).abs() < 1e-15);
        assert!((t[(1, 3)] - 1.0).abs() < 1e-15);
        assert_eq!(t[(2, 3)], 0.0);
    }

    #[test]
    fn zero_lengths_share_origin() {
        let m = RobotModel::default_arm().with_link_lengths(&[0.0; 6]).unwrap();
        for f in forward_kinematics(&m, &[0.3, -0.2, 0.1, 0.0, 0.2, -0.1]) {
            assert!(f.fixed_view::<3, 1>(0, 3).norm() < 1e-15);
        }
    }

    #[test]
    fn folded_home_position() {
        // Base row rotates the chain plane into world x-z; the chain is planar
        // so the end point is the sum of a_i along the accumulated angle.
        let m = RobotModel::default_arm();
        let frames = forward_kinematics(&m, &[0.0; 6]);
        let mut angle = 0.0;
        let (mut x, mut y) = (0.0, 0.0);
        for i in 0..6 {
            let row = m.joint_row(i);
            angle += row.theta_offset;
            x += row.a * angle.cos();
            y += row.a * angle.sin();
        }
        let end = frames[6];
        // frame-0 y axis maps to world z, so plane (x, y) -> world (x, z)
        assert!((end[(0, 3)] - x).abs() < 1e-12);
        assert!((end[(2, 3)] - y).abs() < 1e-12);
        assert!(end[(1, 3)].abs() < 1e-12);
    }

    #[test]
    fn gravity_lies_in_chain_plane() {
        let g = RobotModel::default_arm().gravity_in_base_frame();
        assert!(g.z.abs() < 1e-12);
        assert!((g.y + 9.81).abs() < 1e-12);
    }

    #[test]
    fn zero_state_is_feasible() {
        let m = RobotModel::default_arm();
        assert!(validate_state(&m, &JointState::zeros(6)).is_empty());
    }

    #[test]
    fn velocity_violation_reported() {
        let m = RobotModel::default_arm();
        let mut s = JointState::zeros(6);
        s.dq[0] = 0.3;
        let v = validate_state(&m, &s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].joint, 1);
        assert_eq!(v[0].quantity, Quantity::Velocity);
        assert_eq!(v[0].bound, 0.2);
    }

    #[test]
    fn bounds_are_closed() {
        let m = RobotModel::default_arm();
        let mut s = JointState::zeros(6);
        for (i, l) in m.limits().iter().enumerate() {
            s.q[i] = l.q_max;
            s.dq[i] = -l.dq_max;
            s.ddq[i] = l.ddq_max;
        }
        assert!(validate_state(&m, &s).is_empty());
        s.q[2] = m.limits()[2].q_min;
        assert!(validate_state(&m, &s).is_empty());
    }

    #[test]
    fn config_round_trip() {
        let m = RobotModel::default_arm();
        let cfg0: ModelConfig = serde_json::from_str(DEFAULT_MODEL_CONFIG).unwrap();
        let cfg1 = ModelConfig::from_model(&m);
        let pairs = cfg0.dh.iter().zip(&cfg1.dh).flat_map(|(a, b)| {
            [
                (a.d_mm, b.d_mm),
                (a.alpha_deg, b.alpha_deg),
                (a.a_mm, b.a_mm),
                (a.theta_deg, b.theta_deg),
            ]
        });
        for (a, b) in pairs {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
        assert_eq!(cfg0.limits, cfg1.limits);
        assert_eq!(
            load_model(&model_to_json(&m)).unwrap(),
            load_model(&model_to_json(&load_model(&model_to_json(&m)).unwrap())).unwrap()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rotation_orthonormal(d in -2.0..2.0f64, alpha in -4.0..4.0f64, a in 0.0..2.0f64, th in -4.0..4.0f64, q in -10.0..10.0f64) {
                let t = link_transform(&DHRow::new(d, alpha, a, th).unwrap(), q);
                prop_assert!(rotation_error(&t) < 1e-12);
                let det = t.fixed_view::<3, 3>(0, 0).determinant();
                prop_assert!((det - 1.0).abs() < 1e-12);
            }

            #[test]
            fn frames_compose(q in proptest::collection::vec(-1.5..1.5f64, 6)) {
                let m = RobotModel::default_arm();
                let frames = forward_kinematics(&m, &q);
                prop_assert_eq!(frames.len(), 7);
                let mut direct = link_transform(m.base_row(), 0.0);
                for i in 0..6 {
                    direct *= link_transform(m.joint_row(i), q[i]);
                    prop_assert!((frames[i + 1] - direct).amax() < 1e-12);
                    prop_assert!(rotation_error(&frames[i + 1]) < 1e-12);
                }
            }
        }
    }
}
