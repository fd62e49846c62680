//! Periodic Fourier excitation trajectories: evaluation, limit and boundary
//! checks, regressor conditioning and a derivative-free coefficient search.
//!
//! Joint `i` follows
//! `q(t) = Σ_l (a_l/(ω l)) sin(ω l t) − (b_l/(ω l)) cos(ω l t) + q0`,
//! so `a_l`, `b_l` are velocity amplitudes.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::singular_values;
use crate::model::{JointLimits, JointState, RobotModel};
use crate::presets::FOURIER_TABLE_DEG;
use crate::reduction::{base_regressor, stack_rows, BaseParamMapping};

pub const DEFAULT_OMEGA_F: f64 = 0.1 * std::f64::consts::PI;
pub const FAST_OMEGA_F: f64 = 0.2 * std::f64::consts::PI;
pub const DEFAULT_HARMONICS: usize = 3;
pub const DEFAULT_KAPPA_SAMPLES: usize = 100;
pub const DEFAULT_GRID_DT: f64 = 1e-3;
pub const BOUNDARY_TOL: f64 = 1e-6;

/// How the start pose is pinned. Velocity and acceleration always vanish at
/// the period boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// `q(t₀) = q0`: the motion starts and ends at the offset pose.
    #[default]
    StartAtOffset,
    /// `q(t₀) = 0`: the offset is fixed by the sine amplitudes.
    ZeroStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierJoint {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub q0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTrajectory {
    pub omega_f: f64,
    #[serde(rename = "n_H")]
    pub n_h: usize,
    #[serde(default)]
    pub boundary: BoundaryMode,
    pub joints: Vec<FourierJoint>,
}

impl FourierTrajectory {
    pub fn new(omega_f: f64, n_h: usize, boundary: BoundaryMode, joints: Vec<FourierJoint>) -> Result<Self> {
        let t = FourierTrajectory {
            omega_f,
            n_h,
            boundary,
            joints,
        };
        t.validate()?;
        Ok(t)
    }

    /// All coefficients zero; joints rest at `offsets`.
    pub fn stationary(omega_f: f64, n_h: usize, offsets: &[f64]) -> Result<Self> {
        let joints = offsets
            .iter()
            .map(|&q0| FourierJoint {
                a: vec![0.0; n_h],
                b: vec![0.0; n_h],
                q0,
            })
            .collect();
        Self::new(omega_f, n_h, BoundaryMode::StartAtOffset, joints)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_h < 1 {
            return Err(Error::InvalidParameter("need at least one harmonic".into()));
        }
        if !(self.omega_f > 0.0 && self.omega_f.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "omega_f must be positive, got {}",
                self.omega_f
            )));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if j.a.len() != self.n_h || j.b.len() != self.n_h {
                return Err(Error::InvalidParameter(format!(
                    "joint {}: expected {} coefficients per series, found a={} b={}",
                    i + 1,
                    self.n_h,
                    j.a.len(),
                    j.b.len()
                )));
            }
            if !j.a.iter().chain(&j.b).chain([&j.q0]).all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "joint {}: non-finite coefficient",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega_f
    }

    /// Coefficients before boundary elimination: `2 n_H + 1` per joint.
    pub fn n_coefficients(&self) -> usize {
        self.n_joints() * (2 * self.n_h + 1)
    }

    pub fn eval_joint(&self, i: usize, t: f64) -> (f64, f64, f64) {
        let j = &self.joints[i];
        let mut q = j.q0;
        let mut dq = 0.0;
        let mut ddq = 0.0;
        for l in 1..=self.n_h {
            let w = self.omega_f * l as f64;
            let (s, c) = (w * t).sin_cos();
            let (a, b) = (j.a[l - 1], j.b[l - 1]);
            q += (a * s - b * c) / w;
            dq += a * c + b * s;
            ddq += w * (b * c - a * s);
        }
        (q, dq, ddq)
    }

    pub fn eval(&self, t: f64) -> JointState {
        let n = self.n_joints();
        let mut q = vec![0.0; n];
        let mut dq = vec![0.0; n];
        let mut ddq = vec![0.0; n];
        for i in 0..n {
            (q[i], dq[i], ddq[i]) = self.eval_joint(i, t);
        }
        JointState::from_slices(t, &q, &dq, &ddq)
    }

    /// States at `t = k / rate` for every `k` with `t < period`.
    pub fn sample_at_rate(&self, rate_hz: f64) -> Vec<JointState> {
        let n = (self.period() * rate_hz - 1e-9).ceil().max(1.0) as usize;
        (0..n).map(|k| self.eval(k as f64 / rate_hz)).collect()
    }

    /// Coefficients in degrees as published, converted to radians.
    pub fn table3_preset(omega_f: f64) -> Self {
        let r = std::f64::consts::PI / 180.0;
        let joints = FOURIER_TABLE_DEG
            .iter()
            .map(|row| FourierJoint {
                a: vec![row[0] * r, row[2] * r, row[4] * r],
                b: vec![row[1] * r, row[3] * r, row[5] * r],
                q0: row[6] * r,
            })
            .collect();
        FourierTrajectory {
            omega_f,
            n_h: 3,
            boundary: BoundaryMode::StartAtOffset,
            joints,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectory serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: FourierTrajectory = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }
}

fn eliminated_b(n_h: usize, mode: BoundaryMode) -> usize {
    match mode {
        BoundaryMode::StartAtOffset => n_h.min(2),
        BoundaryMode::ZeroStart => 1,
    }
}

/// Free coefficients per joint once the boundary equations are solved.
pub fn n_free_per_joint(n_h: usize, mode: BoundaryMode) -> usize {
    let q0 = match mode {
        BoundaryMode::StartAtOffset => 1,
        BoundaryMode::ZeroStart => 0,
    };
    (n_h - 1) + (n_h - eliminated_b(n_h, mode)) + q0
}

/// Complete one joint from its free coefficients `[a_2.., b_k.., (q0)]` so
/// that `Σ a_l = 0`, `Σ l b_l = 0` and the position condition hold.
fn joint_from_free(z: &[f64], n_h: usize, omega_f: f64, mode: BoundaryMode) -> FourierJoint {
    let mut a = vec![0.0; n_h];
    a[1..].copy_from_slice(&z[..n_h - 1]);
    a[0] = -a[1..].iter().sum::<f64>();
    let kb = eliminated_b(n_h, mode);
    let mut b = vec![0.0; n_h];
    b[kb..].copy_from_slice(&z[n_h - 1..n_h - 1 + n_h - kb]);
    let q0 = match mode {
        BoundaryMode::StartAtOffset => {
            if n_h >= 2 {
                let r1: f64 = -(3..=n_h).map(|l| l as f64 * b[l - 1]).sum::<f64>();
                let r2: f64 = -(3..=n_h).map(|l| b[l - 1] / l as f64).sum::<f64>();
                // b1 + 2 b2 = r1, b1 + b2/2 = r2
                let det = 0.5 - 2.0;
                b[0] = (0.5 * r1 - 2.0 * r2) / det;
                b[1] = (r2 - r1) / det;
            }
            z[z.len() - 1]
        }
        BoundaryMode::ZeroStart => {
            b[0] = -(2..=n_h).map(|l| l as f64 * b[l - 1]).sum::<f64>();
            (1..=n_h).map(|l| b[l - 1] / (omega_f * l as f64)).sum()
        }
    };
    FourierJoint { a, b, q0 }
}

fn free_from_joint(j: &FourierJoint, n_h: usize, mode: BoundaryMode) -> Vec<f64> {
    let kb = eliminated_b(n_h, mode);
    let mut z: Vec<f64> = j.a[1..].to_vec();
    z.extend_from_slice(&j.b[kb..]);
    if mode == BoundaryMode::StartAtOffset {
        z.push(j.q0);
    }
    z
}

/// Trajectory whose boundary conditions hold by construction.
pub fn trajectory_from_free(
    z: &[f64],
    n_joints: usize,
    n_h: usize,
    omega_f: f64,
    mode: BoundaryMode,
) -> Result<FourierTrajectory> {
    let per = n_free_per_joint(n_h, mode);
    if z.len() != per * n_joints {
        return Err(Error::Count {
            what: "free trajectory parameters",
            expected: per * n_joints,
            found: z.len(),
        });
    }
    let joints = (0..n_joints)
        .map(|i| joint_from_free(&z[i * per..(i + 1) * per], n_h, omega_f, mode))
        .collect();
    FourierTrajectory::new(omega_f, n_h, mode, joints)
}

pub fn free_parameters(traj: &FourierTrajectory) -> Vec<f64> {
    traj.joints
        .iter()
        .flat_map(|j| free_from_joint(j, traj.n_h, traj.boundary))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Pos,
    Vel,
    Acc,
    BoundaryPos,
    BoundaryVel,
    BoundaryAcc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    /// 1-based joint index.
    pub joint: usize,
    pub kind: ConstraintKind,
    pub worst: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub feasible: bool,
    pub violations: Vec<ConstraintViolation>,
    /// Per joint: the closed-form amplitude bound keeps position, velocity
    /// and acceleration inside the limits.
    pub conservative_bound_ok: Vec<bool>,
}

impl ConstraintReport {
    /// Sum of limit excesses, each relative to the joint's limit scale.
    pub fn violation_magnitude(&self, limits: &[JointLimits]) -> f64 {
        self.violations
            .iter()
            .map(|v| {
                let l = &limits[v.joint - 1];
                let scale = match v.kind {
                    ConstraintKind::Pos | ConstraintKind::BoundaryPos => l.q_span(),
                    ConstraintKind::Vel | ConstraintKind::BoundaryVel => l.dq_max,
                    ConstraintKind::Acc | ConstraintKind::BoundaryAcc => l.ddq_max,
                };
                (v.worst - v.bound).abs() / scale
            })
            .sum()
    }
}

/// Closed-form envelope of one joint: `(position radius, speed bound, acceleration bound)`.
fn envelope(j: &FourierJoint, omega_f: f64) -> (f64, f64, f64) {
    j.a.iter()
        .zip(&j.b)
        .enumerate()
        .fold((0.0, 0.0, 0.0), |(r, v, acc), (k, (a, b))| {
            let amp = a.hypot(*b);
            let w = omega_f * (k + 1) as f64;
            (r + amp / w, v + amp, acc + amp * w)
        })
}

/// Precomputed `sin`, `cos` of every harmonic on a fixed time grid.
struct GridTable {
    omega_f: f64,
    n_h: usize,
    sin: Vec<f64>,
    cos: Vec<f64>,
    len: usize,
}

impl GridTable {
    fn new(omega_f: f64, n_h: usize, grid_dt: f64) -> Self {
        let period = 2.0 * std::f64::consts::PI / omega_f;
        let steps = (period / grid_dt - 1e-9).ceil() as usize;
        let len = steps + 1;
        let mut sin = Vec::with_capacity(len * n_h);
        let mut cos = Vec::with_capacity(len * n_h);
        for k in 0..len {
            let t = if k == steps { period } else { k as f64 * grid_dt };
            for l in 1..=n_h {
                let (s, c) = (omega_f * l as f64 * t).sin_cos();
                sin.push(s);
                cos.push(c);
            }
        }
        GridTable {
            omega_f,
            n_h,
            sin,
            cos,
            len,
        }
    }

    /// `(q_min, q_max, max |q̇|, max |q̈|)` of one joint over the grid.
    fn extremes(&self, j: &FourierJoint) -> (f64, f64, f64, f64) {
        let n = self.n_h;
        let mut out = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, 0.0f64);
        for k in 0..self.len {
            let (mut q, mut dq, mut ddq) = (j.q0, 0.0, 0.0);
            for l in 0..n {
                let s = self.sin[k * n + l];
                let c = self.cos[k * n + l];
                let w = self.omega_f * (l + 1) as f64;
                let (a, b) = (j.a[l], j.b[l]);
                q += (a * s - b * c) / w;
                dq += a * c + b * s;
                ddq += w * (b * c - a * s);
            }
            out.0 = out.0.min(q);
            out.1 = out.1.max(q);
            out.2 = out.2.max(dq.abs());
            out.3 = out.3.max(ddq.abs());
        }
        out
    }
}

fn check_with_table(traj: &FourierTrajectory, limits: &[JointLimits], table: &GridTable) -> ConstraintReport {
    let mut violations = Vec::new();
    let mut conservative = Vec::with_capacity(traj.n_joints());
    let period = traj.period();
    for (i, (j, lim)) in traj.joints.iter().zip(limits).enumerate() {
        let joint = i + 1;
        let mut push = |kind, worst, bound| {
            violations.push(ConstraintViolation {
                joint,
                kind,
                worst,
                bound,
            })
        };
        let (q_lo, q_hi, v, acc) = table.extremes(j);
        if q_hi > lim.q_max {
            push(ConstraintKind::Pos, q_hi, lim.q_max);
        }
        if q_lo < lim.q_min {
            push(ConstraintKind::Pos, q_lo, lim.q_min);
        }
        if v > lim.dq_max {
            push(ConstraintKind::Vel, v, lim.dq_max);
        }
        if acc > lim.ddq_max {
            push(ConstraintKind::Acc, acc, lim.ddq_max);
        }
        let target = match traj.boundary {
            BoundaryMode::StartAtOffset => j.q0,
            BoundaryMode::ZeroStart => 0.0,
        };
        for t in [0.0, period] {
            let (q, dq, ddq) = traj.eval_joint(i, t);
            if (q - target).abs() > BOUNDARY_TOL {
                push(ConstraintKind::BoundaryPos, q, target);
            }
            if dq.abs() > BOUNDARY_TOL {
                push(ConstraintKind::BoundaryVel, dq, 0.0);
            }
            if ddq.abs() > BOUNDARY_TOL {
                push(ConstraintKind::BoundaryAcc, ddq, 0.0);
            }
        }
        let (r, vb, ab) = envelope(j, traj.omega_f);
        conservative.push(j.q0 - r >= lim.q_min && j.q0 + r <= lim.q_max && vb <= lim.dq_max && ab <= lim.ddq_max);
    }
    ConstraintReport {
        feasible: violations.is_empty(),
        violations,
        conservative_bound_ok: conservative,
    }
}

/// Grid check over one period at spacing `grid_dt` plus the boundary
/// conditions at both ends of the period.
pub fn check_constraints(traj: &FourierTrajectory, limits: &[JointLimits], grid_dt: f64) -> Result<ConstraintReport> {
    if !(grid_dt > 0.0 && grid_dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid spacing must be positive, got {grid_dt}"
        )));
    }
    if limits.len() != traj.n_joints() {
        return Err(Error::Count {
            what: "joint limits",
            expected: traj.n_joints(),
            found: limits.len(),
        });
    }
    traj.validate()?;
    let table = GridTable::new(traj.omega_f, traj.n_h, grid_dt);
    Ok(check_with_table(traj, limits, &table))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditioning {
    /// `σ_max / σ_min`; infinite when `σ_min` is at round-off level.
    pub kappa: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
}

/// Base regressors at `n_samples` uniform times over one period starting at `phase`.
pub fn stacked_base_regressor(
    model: &RobotModel,
    mapping: &BaseParamMapping,
    traj: &FourierTrajectory,
    n_samples: usize,
    phase: f64,
) -> DMatrix<f64> {
    let dt = traj.period() / n_samples as f64;
    let blocks: Vec<DMatrix<f64>> = (0..n_samples)
        .map(|k| base_regressor(model, mapping, &traj.eval(phase + k as f64 * dt)))
        .collect();
    stack_rows(&blocks)
}

fn conditioning_of(h: &DMatrix<f64>) -> Conditioning {
    let sv = singular_values(h);
    let sigma_max = sv.max();
    let sigma_min = sv.min();
    let floor = sigma_max * f64::EPSILON * h.nrows().max(h.ncols()) as f64;
    let kappa = if sigma_max == 0.0 || sigma_min <= floor {
        f64::INFINITY
    } else {
        sigma_max / sigma_min
    };
    Conditioning {
        kappa,
        sigma_max,
        sigma_min,
    }
}

pub fn condition_number(
    model: &RobotModel,
    mapping: &BaseParamMapping,
    traj: &FourierTrajectory,
    n_samples: usize,
) -> Result<Conditioning> {
    condition_number_with_phase(model, mapping, traj, n_samples, 0.0)
}

pub fn condition_number_with_phase(
    model: &RobotModel,
    mapping: &BaseParamMapping,
    traj: &FourierTrajectory,
    n_samples: usize,
    phase: f64,
) -> Result<Conditioning> {
    let rows = n_samples * model.n_joints();
    if rows < mapping.rank {
        return Err(Error::Count {
            what: "stacked rows (at least)",
            expected: mapping.rank,
            found: rows,
        });
    }
    if traj.n_joints() != model.n_joints() {
        return Err(Error::Count {
            what: "trajectory joints",
            expected: model.n_joints(),
            found: traj.n_joints(),
        });
    }
    Ok(conditioning_of(&stacked_base_regressor(
        model, mapping, traj, n_samples, phase,
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerOptions {
    pub boundary: BoundaryMode,
    /// Sample count per period for the condition number.
    pub kappa_samples: usize,
    /// Grid spacing of the feasibility check applied to every candidate.
    pub grid_dt: f64,
    /// Share of the budget spent on random starts.
    pub multistart_fraction: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            boundary: BoundaryMode::StartAtOffset,
            kappa_samples: DEFAULT_KAPPA_SAMPLES,
            grid_dt: DEFAULT_GRID_DT,
            multistart_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub trajectory: FourierTrajectory,
    pub kappa: f64,
    pub report: ConstraintReport,
    /// Best feasible κ after each evaluation (infinite before the first).
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub n_coefficients: usize,
    pub n_free: usize,
}

const INFEASIBLE: f64 = 1e30;
const UNCONDITIONED: f64 = 1e20;

struct Search<'a> {
    model: &'a RobotModel,
    mapping: &'a BaseParamMapping,
    limits: &'a [JointLimits],
    omega_f: f64,
    n_h: usize,
    opts: OptimizerOptions,
    table: GridTable,
    evaluations: usize,
    best: Option<(f64, Vec<f64>)>,
    history: Vec<f64>,
}

impl Search<'_> {
    fn evaluate(&mut self, z: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let traj = trajectory_from_free(z, self.limits.len(), self.n_h, self.omega_f, self.opts.boundary)?;
        let report = check_with_table(&traj, self.limits, &self.table);
        let score = if report.feasible {
            let c = condition_number(self.model, self.mapping, &traj, self.opts.kappa_samples)?;
            if c.kappa.is_finite() {
                if self.best.as_ref().is_none_or(|(b, _)| c.kappa < *b) {
                    self.best = Some((c.kappa, z.to_vec()));
                }
                c.kappa
            } else {
                UNCONDITIONED
            }
        } else {
            INFEASIBLE * (1.0 + report.violation_magnitude(self.limits))
        };
        self.history.push(self.best.as_ref().map_or(f64::INFINITY, |b| b.0));
        Ok(score)
    }
}

/// Random candidate with every joint inside its closed-form envelope, so the
/// result is feasible by construction.
fn random_free(rng: &mut ChaCha8Rng, limits: &[JointLimits], n_h: usize, omega_f: f64, mode: BoundaryMode) -> Vec<f64> {
    let per = n_free_per_joint(n_h, mode);
    let mut z = Vec::with_capacity(per * limits.len());
    for lim in limits {
        let mut unit: Vec<f64> = (0..per).map(|_| rng.random_range(-1.0..1.0)).collect();
        if mode == BoundaryMode::StartAtOffset {
            unit[per - 1] = 0.0;
        }
        let j = joint_from_free(&unit, n_h, omega_f, mode);
        let (r, v, acc) = envelope(&j, omega_f);
        let mut s_max = f64::INFINITY;
        if v > 0.0 {
            s_max = s_max.min(lim.dq_max / v).min(lim.ddq_max / acc);
        }
        match mode {
            BoundaryMode::StartAtOffset => {
                if r > 0.0 {
                    s_max = s_max.min(0.5 * lim.q_span() / r);
                }
            }
            BoundaryMode::ZeroStart => {
                let hi = j.q0 + r;
                let lo = j.q0 - r;
                if hi > 0.0 {
                    s_max = s_max.min(lim.q_max.max(0.0) / hi);
                }
                if lo < 0.0 {
                    s_max = s_max.min(lim.q_min.min(0.0) / lo);
                }
            }
        }
        if !s_max.is_finite() {
            s_max = 0.0;
        }
        // stay a hair inside the envelope so round-off cannot cross a limit
        let s = s_max * rng.random_range(0.3..0.98);
        let mut scaled: Vec<f64> = unit.iter().map(|u| u * s).collect();
        if mode == BoundaryMode::StartAtOffset {
            let rr = r * s;
            let lo = lim.q_min + rr;
            let hi = lim.q_max - rr;
            scaled[per - 1] = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                0.5 * (lim.q_min + lim.q_max)
            };
        }
        z.extend(scaled);
    }
    z
}

/// `count` random trajectories drawn exactly as the optimizer's random starts.
pub fn random_feasible_trajectories(
    limits: &[JointLimits],
    omega_f: f64,
    n_h: usize,
    mode: BoundaryMode,
    seed: u64,
    count: usize,
) -> Result<Vec<FourierTrajectory>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z = random_free(&mut rng, limits, n_h, omega_f, mode);
            trajectory_from_free(&z, limits.len(), n_h, omega_f, mode)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
/// Random multistart followed by a compass search from the best start.
/// Candidates that leave the limits on the check grid are penalized by their
/// violation; the returned trajectory is the best feasible one evaluated.
pub fn optimize_trajectory(
    model: &RobotModel,
    mapping: &BaseParamMapping,
    limits: &[JointLimits],
    omega_f: f64,
    n_h: usize,
    seed: u64,
    budget: usize,
    opts: &OptimizerOptions,
) -> Result<OptimizationResult> {
    if budget == 0 {
        return Err(Error::InvalidParameter("evaluation budget must be positive".into()));
    }
    if n_h < 1 || !(omega_f > 0.0 && omega_f.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need n_H >= 1 and omega_f > 0 (n_H={n_h}, omega_f={omega_f})"
        )));
    }
    if limits.len() != model.n_joints() {
        return Err(Error::Count {
            what: "joint limits",
            expected: model.n_joints(),
            found: limits.len(),
        });
    }
    if !(opts.grid_dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid spacing must be positive, got {}",
            opts.grid_dt
        )));
    }
    let mode = opts.boundary;
    let per = n_free_per_joint(n_h, mode);
    let n_free = per * limits.len();
    let mut search = Search {
        model,
        mapping,
        limits,
        omega_f,
        n_h,
        opts: *opts,
        table: GridTable::new(omega_f, n_h, opts.grid_dt),
        evaluations: 0,
        best: None,
        history: Vec::with_capacity(budget),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = ((budget as f64 * opts.multistart_fraction) as usize).clamp(1, budget);
    let mut start: Option<(f64, Vec<f64>)> = None;
    for _ in 0..starts {
        let z = random_free(&mut rng, limits, n_h, omega_f, mode);
        let score = search.evaluate(&z)?;
        if start.as_ref().is_none_or(|(s, _)| score < *s) {
            start = Some((score, z));
        }
    }

    let (mut score, mut x) = start.expect("at least one start");
    // initial steps: a fraction of the largest admissible amplitude or offset range
    let mut steps: Vec<f64> = Vec::with_capacity(n_free);
    for lim in limits {
        let amp = lim.dq_max.min(lim.ddq_max / omega_f) / n_h as f64;
        for k in 0..per {
            let is_offset = mode == BoundaryMode::StartAtOffset && k == per - 1;
            steps.push(if is_offset { 0.1 * lim.q_span() } else { 0.5 * amp });
        }
    }
    let floors: Vec<f64> = steps.iter().map(|s| s * 1e-7).collect();
    let caps: Vec<f64> = steps.iter().map(|s| s * 2.0).collect();
    'outer: while search.evaluations < budget {
        let mut improved = false;
        for c in 0..n_free {
            if steps[c] < floors[c] {
                continue;
            }
            let mut moved = false;
            for dir in [1.0, -1.0] {
                if search.evaluations >= budget {
                    break 'outer;
                }
                let mut trial = x.clone();
                trial[c] += dir * steps[c];
                let s = search.evaluate(&trial)?;
                if s < score {
                    score = s;
                    x = trial;
                    moved = true;
                    break;
                }
            }
            if moved {
                steps[c] = (steps[c] * 1.5).min(caps[c]);
                improved = true;
            } else {
                steps[c] *= 0.5;
            }
        }
        if !improved && steps.iter().zip(&floors).all(|(s, f)| s < f) {
            break;
        }
    }

    let Some((kappa, z)) = search.best.clone() else {
        return Err(Error::NoFeasibleCandidate { budget });
    };
    let trajectory = trajectory_from_free(&z, limits.len(), n_h, omega_f, mode)?;
    let report = check_with_table(&trajectory, limits, &search.table);
    Ok(OptimizationResult {
        n_coefficients: trajectory.n_coefficients(),
        trajectory,
        kappa,
        report,
        history: search.history,
        evaluations: search.evaluations,
        n_free,
    })
}
