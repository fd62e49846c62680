//! Cylinder friction and stiffness identification from pressure/displacement
//! records, by batch least squares and by recursive least squares.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulic::CylinderRecord;
use crate::linalg::lstsq;
use crate::stribeck::{sgn, signed_cbrt, FrictionParams};

pub const THETA_NAMES: [&str; 5] = ["m", "K", "f_c", "f_v", "f_s"];
const BASIS_NAMES: [&str; 5] = ["ddx", "x", "sgn(dx)", "dx", "cbrt(dx)"];

/// Relative singular value below which the batch problem is refused.
pub const RANK_TOL: f64 = 1e-10;
/// Relative singular value below which a conditioning warning is attached.
pub const WARN_TOL: f64 = 1e-6;
pub const DEFAULT_P0: f64 = 1e6;

/// One row of `y = λᵀθ` with `θ = [m, K, f_c, f_v, f_s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionSample {
    pub y: f64,
    pub lambda: [f64; 5],
}

/// `y = p₁A₁ − p₂A₂ − F − c ẋ`, `λ = [ẍ, x, sgn ẋ, ẋ, ẋ^{1/3}]`.
pub fn build_sample(rec: &CylinderRecord, a1: f64, a2: f64, c: f64) -> RegressionSample {
    let y = rec.net_force(a1, a2) - c * rec.dx;
    RegressionSample {
        y,
        lambda: [rec.ddx, rec.x, sgn(rec.dx), rec.dx, signed_cbrt(rec.dx)],
    }
}

/// Which entries of θ are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum ParamLayout {
    /// All five of `[m, K, f_c, f_v, f_s]`.
    Full,
    /// Known piston mass: `m ẍ` moves to the output side, `[K, f_c, f_v, f_s]` remain.
    FixedMass { mass: f64 },
}

impl ParamLayout {
    pub fn from_fixed_mass(mass: Option<f64>) -> Self {
        match mass {
            Some(mass) => ParamLayout::FixedMass { mass },
            None => ParamLayout::Full,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParamLayout::Full => 5,
            ParamLayout::FixedMass { .. } => 4,
        }
    }

    pub fn names(&self) -> &'static [&'static str] {
        match self {
            ParamLayout::Full => &THETA_NAMES,
            ParamLayout::FixedMass { .. } => &THETA_NAMES[1..],
        }
    }

    fn basis_names(&self) -> &'static [&'static str] {
        match self {
            ParamLayout::Full => &BASIS_NAMES,
            ParamLayout::FixedMass { .. } => &BASIS_NAMES[1..],
        }
    }

    pub fn row(&self, s: &RegressionSample) -> (f64, DVector<f64>) {
        match *self {
            ParamLayout::Full => (s.y, DVector::from_column_slice(&s.lambda)),
            ParamLayout::FixedMass { mass } => (s.y - mass * s.lambda[0], DVector::from_column_slice(&s.lambda[1..])),
        }
    }
}

/// Physical reading of an estimated θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionEstimate {
    pub m: f64,
    pub mass_fixed: bool,
    pub k: f64,
    pub friction: FrictionParams,
}

pub fn extract_friction(theta_hat: &[f64], layout: &ParamLayout) -> FrictionEstimate {
    let (m, mass_fixed, rest) = match *layout {
        ParamLayout::Full => (theta_hat[0], false, &theta_hat[1..]),
        ParamLayout::FixedMass { mass } => (mass, true, theta_hat),
    };
    FrictionEstimate {
        m,
        mass_fixed,
        k: rest[0],
        friction: FrictionParams::new(rest[1], rest[2], rest[3]),
    }
}

fn stack(samples: &[RegressionSample], layout: &ParamLayout) -> (DMatrix<f64>, DVector<f64>) {
    let n = layout.dim();
    let mut a = DMatrix::zeros(samples.len(), n);
    let mut b = DVector::zeros(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let (y, l) = layout.row(s);
        a.row_mut(i).copy_from(&l.transpose());
        b[i] = y;
    }
    (a, b)
}

fn describe_direction(v: &DVector<f64>, names: &[&str]) -> String {
    let norm = v.amax();
    let terms: Vec<String> = v
        .iter()
        .zip(names)
        .filter(|(c, _)| c.abs() > 0.05 * norm)
        .map(|(c, n)| format!("{:+.3}·{}", c / norm, n))
        .collect();
    terms.join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchFit {
    pub names: Vec<String>,
    pub theta_hat: Vec<f64>,
    /// `σ̂² (ΛᵀΛ)⁻¹` with `σ̂²` from the residual.
    pub covariance: Vec<Vec<f64>>,
    pub condition_number: f64,
    pub residual_rms: f64,
    pub samples_used: usize,
    pub rank_warning: Option<String>,
}

impl BatchFit {
    pub fn standard_errors(&self) -> Vec<f64> {
        (0..self.theta_hat.len())
            .map(|i| self.covariance[i][i].sqrt())
            .collect()
    }
}

pub fn batch_ls(samples: &[RegressionSample], layout: &ParamLayout) -> Result<BatchFit> {
    let n = layout.dim();
    if samples.len() < n {
        return Err(Error::Count {
            what: "regression samples",
            expected: n,
            found: samples.len(),
        });
    }
    let (a, b) = stack(samples, layout);
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite regression sample".into()));
    }
    let sol = lstsq(&a, &b);
    let names = layout.basis_names();
    let weak = sol.weak_directions(RANK_TOL);
    if !weak.is_empty() {
        let directions = weak
            .iter()
            .map(|(_, v)| describe_direction(v, names))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::RankDeficient {
            rank: n - weak.len(),
            columns: n,
            directions,
        });
    }
    let mut warnings = Vec::new();
    let w = sol.weak_directions(WARN_TOL);
    if !w.is_empty() {
        warnings.push(format!(
            "poorly excited: {}",
            w.iter()
                .map(|(s, v)| format!("[{}] (σ/σmax {:.1e})", describe_direction(v, names), s))
                .collect::<Vec<_>>()
                .join("; ")
        ));
    }
    let first_sign = samples[0].lambda[2];
    if samples.iter().all(|s| s.lambda[2] == first_sign) {
        warnings.push("motion never reverses: sgn(dx) is constant, so f_c absorbs any constant force offset".into());
    }
    let rank_warning = if warnings.is_empty() {
        None
    } else {
        Some(warnings.join("; "))
    };
    let dof = (samples.len() - n).max(1) as f64;
    let sigma2 = sol.residual.norm_squared() / dof;
    let cov = sol.unscaled_covariance() * sigma2;
    Ok(BatchFit {
        names: layout.names().iter().map(|s| s.to_string()).collect(),
        theta_hat: sol.x.iter().copied().collect(),
        covariance: cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
        condition_number: sol.condition_number(),
        residual_rms: sol.residual_rms(),
        samples_used: samples.len(),
        rank_warning,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub alpha_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub k: usize,
    forgetting: f64,
}

impl RlsState {
    /// `α̂₀ = 0`, `P₀ = p0·I`, no forgetting.
    pub fn new(dim: usize, p0: f64) -> Self {
        RlsState {
            alpha_hat: DVector::zeros(dim),
            p: DMatrix::identity(dim, dim) * p0,
            k: 0,
            forgetting: 1.0,
        }
    }

    pub fn with_forgetting(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.95 && factor <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "forgetting factor must lie in (0.95, 1], got {factor}"
            )));
        }
        self.forgetting = factor;
        Ok(self)
    }

    pub fn forgetting(&self) -> f64 {
        self.forgetting
    }

    /// One recursion step. Fails if `P` stops being positive definite.
    pub fn update(&mut self, y: f64, lambda: &DVector<f64>) -> Result<()> {
        self.k += 1;
        if lambda.iter().all(|&v| v == 0.0) && self.forgetting == 1.0 {
            return Ok(());
        }
        let pl = &self.p * lambda;
        let denom = self.forgetting + lambda.dot(&pl);
        let gain = &pl / denom;
        let err = y - lambda.dot(&self.alpha_hat);
        self.alpha_hat += &gain * err;
        // (I − gλᵀ)P = P − g(Pλ)ᵀ since P is symmetric
        self.p -= &gain * pl.transpose();
        if self.forgetting != 1.0 {
            self.p /= self.forgetting;
        }
        let sym = (&self.p + self.p.transpose()) * 0.5;
        self.p = sym;
        if !self.p.iter().all(|v| v.is_finite()) || Cholesky::new(self.p.clone()).is_none() {
            let min_diag = self.p.diagonal().min();
            return Err(Error::NotPositiveDefinite { step: self.k, min_diag });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlsRun {
    pub state: RlsState,
    /// `trace(P)` after every update, starting with the prior.
    pub trace_history: Vec<f64>,
}

pub fn run_rls(samples: &[RegressionSample], layout: &ParamLayout, init: RlsState) -> Result<RlsRun> {
    if init.alpha_hat.len() != layout.dim() {
        return Err(Error::Count {
            what: "RLS parameters",
            expected: layout.dim(),
            found: init.alpha_hat.len(),
        });
    }
    let mut state = init;
    let mut trace_history = Vec::with_capacity(samples.len() + 1);
    trace_history.push(state.p.trace());
    for s in samples {
        let (y, l) = layout.row(s);
        state.update(y, &l)?;
        trace_history.push(state.p.trace());
    }
    Ok(RlsRun { state, trace_history })
}

pub fn stribeck_curve(params: &FrictionParams, v_grid: &[f64]) -> Vec<(f64, f64)> {
    v_grid.iter().map(|&v| (v, params.force(v))).collect()
}

/// Uniform grid of `n` velocities over `[-v_max, v_max]`.
pub fn velocity_grid(v_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            // written so that entries k and n−1−k are exact negatives
            .map(|k| v_max * (2.0 * k as f64 - (n - 1) as f64) / (n - 1) as f64)
            .collect(),
    }
}

fn centered_mean(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = x.len();
    (0..n)
        .map(|i| {
            // shrink symmetrically near the ends so no phase shift is introduced
            let h = half.min(i).min(n - 1 - i);
            let s: f64 = x[i - h..=i + h].iter().sum();
            s / (2 * h + 1) as f64
        })
        .collect()
}

fn central_difference(t: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                _ if i == n - 1 => (n - 2, n - 1),
                _ => (i - 1, i + 1),
            };
            (x[b] - x[a]) / (t[b] - t[a])
        })
        .collect()
}

/// Velocity and acceleration of a sampled displacement: centered moving
/// average of length `window` followed by central differences, twice.
pub fn differentiate(t: &[f64], x: &[f64], window: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if t.len() != x.len() {
        return Err(Error::Count {
            what: "displacement samples",
            expected: t.len(),
            found: x.len(),
        });
    }
    if t.len() < 3 {
        return Err(Error::Count {
            what: "samples for differentiation (at least)",
            expected: 3,
            found: t.len(),
        });
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("time stamps must increase strictly".into()));
    }
    let w = window.max(1);
    let dx = central_difference(t, &centered_mean(x, w));
    let ddx = central_difference(t, &centered_mean(&dx, w));
    Ok((dx, ddx))
}

/// Fill `dx` and `ddx` of records from their displacement channel.
pub fn with_differentiated(records: &[CylinderRecord], window: usize) -> Result<Vec<CylinderRecord>> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let x: Vec<f64> = records.iter().map(|r| r.x).collect();
    let (dx, ddx) = differentiate(&t, &x, window)?;
    Ok(records
        .iter()
        .zip(dx.into_iter().zip(ddx))
        .map(|(r, (dx, ddx))| CylinderRecord { dx, ddx, ..*r })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Batch,
    Rls,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlsSummary {
    pub names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub p_trace: f64,
    pub p_diagonal: Vec<f64>,
    pub samples_used: usize,
    pub residual_rms: f64,
}

/// Result of identifying one cylinder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrictionIdentification {
    pub layout: ParamLayout,
    pub batch: Option<BatchFit>,
    pub rls: Option<RlsSummary>,
    /// Friction triple from the batch fit when available, otherwise RLS.
    pub estimate: FrictionEstimate,
}

fn residual_rms(samples: &[RegressionSample], layout: &ParamLayout, theta: &DVector<f64>) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let ss: f64 = samples
        .iter()
        .map(|s| {
            let (y, l) = layout.row(s);
            (y - l.dot(theta)).powi(2)
        })
        .sum();
    (ss / samples.len() as f64).sqrt()
}

pub fn identify_cylinder(
    records: &[CylinderRecord],
    a1: f64,
    a2: f64,
    c: f64,
    layout: ParamLayout,
    estimator: Estimator,
) -> Result<FrictionIdentification> {
    if records.is_empty() {
        return Err(Error::Count {
            what: "cylinder records (at least)",
            expected: 1,
            found: 0,
        });
    }
    let samples: Vec<RegressionSample> = records.iter().map(|r| build_sample(r, a1, a2, c)).collect();
    let batch = match estimator {
        Estimator::Batch | Estimator::Both => Some(batch_ls(&samples, &layout)?),
        Estimator::Rls => None,
    };
    let rls = match estimator {
        Estimator::Rls | Estimator::Both => {
            let run = run_rls(&samples, &layout, RlsState::new(layout.dim(), DEFAULT_P0))?;
            let theta = run.state.alpha_hat.clone();
            Some(RlsSummary {
                names: layout.names().iter().map(|s| s.to_string()).collect(),
                theta_hat: theta.iter().copied().collect(),
                p_trace: run.state.p.trace(),
                p_diagonal: run.state.p.diagonal().iter().copied().collect(),
                samples_used: samples.len(),
                residual_rms: residual_rms(&samples, &layout, &theta),
            })
        }
        Estimator::Batch => None,
    };
    let theta = match (&batch, &rls) {
        (Some(b), _) => b.theta_hat.clone(),
        (None, Some(r)) => r.theta_hat.clone(),
        (None, None) => unreachable!("at least one estimator runs"),
    };
    Ok(FrictionIdentification {
        layout,
        estimate: extract_friction(&theta, &layout),
        batch,
        rls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydraulic::{
        simulate_cylinder, CylinderExperiment, CylinderParams, Excitation, SensorNoise, SineComponent,
    };
    use crate::presets::{JOINT_FRICTION, PISTON_MASS};

    fn quiet() -> CylinderExperiment {
        CylinderExperiment {
            noise: SensorNoise::NONE,
            ..CylinderExperiment::default()
        }
    }

    fn two_tone() -> Excitation {
        Excitation {
            components: vec![
                SineComponent {
                    amplitude: 6.0,
                    omega: 0.05,
                },
                SineComponent {
                    amplitude: 0.5,
                    omega: 0.5,
                },
            ],
        }
    }

    fn samples_for(p: &CylinderParams, exp: &CylinderExperiment, seed: u64) -> Vec<RegressionSample> {
        simulate_cylinder(p, exp, seed)
            .unwrap()
            .records
            .iter()
            .map(|r| build_sample(r, p.a1, p.a2, p.c))
            .collect()
    }

    fn truth(p: &CylinderParams) -> [f64; 5] {
        let f = JOINT_FRICTION
            .iter()
            .find(|f| matches!(p.friction, crate::hydraulic::FrictionModel::Linearized(l) if l == **f));
        let f = f.copied().unwrap_or(FrictionParams::ZERO);
        [p.m, p.k, f.f_c, f.f_v, f.f_s]
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        num / b.iter().map(|y| y * y).sum::<f64>().sqrt()
    }

    #[test]
    fn sample_matches_plant() {
        let p = CylinderParams::for_joint(2);
        let theta = truth(&p);
        for s in samples_for(&p, &quiet(), 0) {
            let pred: f64 = s.lambda.iter().zip(theta).map(|(l, t)| l * t).sum();
            assert!((pred - s.y).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_velocity_sample() {
        let rec = CylinderRecord {
            t: 0.0,
            x: 0.2,
            dx: 0.0,
            ddx: 1.0,
            p1: 2e5,
            p2: 1e5,
            f: 3.0,
        };
        let s = build_sample(&rec, 2e-3, 1e-3, 2.0);
        assert_eq!(&s.lambda[2..], &[0.0, 0.0, 0.0]);
        let s0 = build_sample(&CylinderRecord { dx: 0.5, ..rec }, 2e-3, 1e-3, 0.0);
        assert_eq!(s0.y, 2e5 * 2e-3 - 1e5 * 1e-3 - 3.0);
    }

    #[test]
    fn fixed_mass_recovers_every_joint_noiseless() {
        for j in 0..6 {
            let p = CylinderParams::for_joint(j);
            let layout = ParamLayout::FixedMass { mass: PISTON_MASS[j] };
            let samples = samples_for(&p, &quiet(), 0);
            let fit = batch_ls(&samples, &layout).unwrap();
            let t = truth(&p);
            assert!(rel_err(&fit.theta_hat, &t[1..]) < 1e-9, "joint {j}");
            assert!(fit.residual_rms < 1e-9);
            let est = extract_friction(&fit.theta_hat, &layout);
            assert!(est.mass_fixed && est.m == PISTON_MASS[j]);
            let rls = run_rls(&samples, &layout, RlsState::new(4, DEFAULT_P0)).unwrap();
            let r: Vec<f64> = rls.state.alpha_hat.iter().copied().collect();
            assert!(rel_err(&r, &fit.theta_hat) < 1e-6, "joint {j}: rls {r:?}");
        }
    }

    #[test]
    fn full_layout_needs_two_tones() {
        let p = CylinderParams::for_joint(0);
        // a single sine makes ẍ = −ω²x, so m and K cannot be separated
        let err = batch_ls(&samples_for(&p, &quiet(), 0), &ParamLayout::Full).unwrap_err();
        match err {
            Error::RankDeficient { rank, directions, .. } => {
                assert_eq!(rank, 4);
                assert!(directions.contains("ddx") && directions.contains('x'));
            }
            e => panic!("unexpected {e}"),
        }
        let exp = CylinderExperiment {
            excitation: two_tone(),
            ..quiet()
        };
        let samples = samples_for(&p, &exp, 0);
        let fit = batch_ls(&samples, &ParamLayout::Full).unwrap();
        assert!(rel_err(&fit.theta_hat, &truth(&p)) < 1e-9);
        let rls = run_rls(&samples, &ParamLayout::Full, RlsState::new(5, DEFAULT_P0)).unwrap();
        let r: Vec<f64> = rls.state.alpha_hat.iter().copied().collect();
        assert!(rel_err(&r, &truth(&p)) < 1e-4);
    }

    #[test]
    fn mass_recovered_under_default_noise() {
        for j in 0..6 {
            let p = CylinderParams::for_joint(j);
            let exp = CylinderExperiment {
                excitation: two_tone(),
                ..CylinderExperiment::default()
            };
            let fit = batch_ls(&samples_for(&p, &exp, 5 + j as u64), &ParamLayout::Full).unwrap();
            let m_hat = fit.theta_hat[0];
            assert!(
                (m_hat - PISTON_MASS[j]).abs() / PISTON_MASS[j] < 0.01,
                "joint {j}: {m_hat}"
            );
        }
    }

    #[test]
    fn rls_health() {
        let p = CylinderParams::for_joint(3);
        let layout = ParamLayout::FixedMass { mass: p.m };
        let run = run_rls(
            &samples_for(&p, &CylinderExperiment::default(), 1),
            &layout,
            RlsState::new(4, DEFAULT_P0),
        )
        .unwrap();
        assert!(run.trace_history.windows(2).all(|w| w[1] <= w[0]));
        let p = &run.state.p;
        assert_eq!(p, &p.transpose());
        assert!(Cholesky::new(p.clone()).is_some());
    }

    #[test]
    fn null_lambda_leaves_state() {
        let mut s = RlsState::new(3, 10.0);
        s.alpha_hat[1] = 2.0;
        let before = s.clone();
        s.update(5.0, &DVector::zeros(3)).unwrap();
        assert_eq!(s.alpha_hat, before.alpha_hat);
        assert_eq!(s.p, before.p);
        assert_eq!(s.k, 1);
    }

    #[test]
    fn forgetting_bounds() {
        assert!(RlsState::new(2, 1.0).with_forgetting(0.9).is_err());
        assert!(RlsState::new(2, 1.0).with_forgetting(1.01).is_err());
        let s = RlsState::new(2, 1.0).with_forgetting(0.99).unwrap();
        assert_eq!(s.forgetting(), 0.99);
    }

    #[test]
    fn forgetting_tracks_a_step_change() {
        let lam = |k: usize| DVector::from_vec(vec![1.0, (k as f64 * 0.3).sin()]);
        let run = |factor: f64| {
            let mut s = RlsState::new(2, 1e3).with_forgetting(factor).unwrap();
            for k in 0..400 {
                let theta = if k < 200 { [1.0, 2.0] } else { [3.0, -1.0] };
                let l = lam(k);
                s.update(l[0] * theta[0] + l[1] * theta[1], &l).unwrap();
            }
            (s.alpha_hat[0] - 3.0).abs().max((s.alpha_hat[1] + 1.0).abs())
        };
        // old data keeps weight 0.97^200 ≈ 2e-3 against the recent window
        assert!(run(0.97) < 0.05);
        assert!(run(1.0) > 0.5);
    }

    #[test]
    fn constant_velocity_is_rank_deficient() {
        // ramp x = 0.1 t: sgn, dx and cbrt(dx) are all constant columns
        let samples: Vec<RegressionSample> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.02;
                let rec = CylinderRecord {
                    t,
                    x: 0.1 * t,
                    dx: 0.1,
                    ddx: 0.0,
                    p1: 0.0,
                    p2: 0.0,
                    f: 0.0,
                };
                let mut s = build_sample(&rec, 2e-3, 1e-3, 0.0);
                s.y = 50.0 * rec.x + JOINT_FRICTION[0].force(0.1);
                s
            })
            .collect();
        let err = batch_ls(&samples, &ParamLayout::FixedMass { mass: 1.0 }).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sgn(dx)") && msg.contains("cbrt(dx)"), "{msg}");
    }

    #[test]
    fn one_sided_motion_warns() {
        // x = 1 − cos t on half a period: dx > 0 throughout
        let samples: Vec<RegressionSample> = (1..300)
            .map(|k| {
                let t = k as f64 * std::f64::consts::PI / 300.0;
                let rec = CylinderRecord {
                    t,
                    x: 1.0 - t.cos(),
                    dx: t.sin(),
                    ddx: t.cos(),
                    p1: 0.0,
                    p2: 0.0,
                    f: 0.0,
                };
                let mut s = build_sample(&rec, 2e-3, 1e-3, 0.0);
                s.y = 10.0 * rec.x + JOINT_FRICTION[1].force(rec.dx);
                s
            })
            .collect();
        let layout = ParamLayout::FixedMass { mass: 0.0 };
        let fit = batch_ls(&samples, &layout).unwrap();
        assert!(fit.rank_warning.as_deref().unwrap().contains("sgn(dx) is constant"));
        // a constant offset in y lands entirely in f_c
        let shifted: Vec<RegressionSample> = samples
            .iter()
            .map(|s| RegressionSample { y: s.y + 4.0, ..*s })
            .collect();
        let fit2 = batch_ls(&shifted, &layout).unwrap();
        assert!((fit2.theta_hat[1] - fit.theta_hat[1] - 4.0).abs() < 1e-8);
    }

    #[test]
    fn noisy_residual_matches_propagated_noise() {
        let p = CylinderParams::for_joint(1);
        let exp = CylinderExperiment::default();
        let samples = samples_for(&p, &exp, 9);
        let fit = batch_ls(&samples, &ParamLayout::FixedMass { mass: p.m }).unwrap();
        // only the pressures and x carry noise: y picks up A1·n1 − A2·n2, λ picks up K·n_x
        let s = exp.noise;
        let sigma_eff = ((p.a1 * s.p).powi(2) + (p.a2 * s.p).powi(2) + (p.k * s.x).powi(2)).sqrt();
        assert!(fit.residual_rms > 0.5 * sigma_eff && fit.residual_rms < 2.0 * sigma_eff);
    }

    #[test]
    fn zero_friction_plant() {
        let mut p = CylinderParams::for_joint(0);
        p.friction = crate::hydraulic::FrictionModel::Linearized(FrictionParams::ZERO);
        let fit = batch_ls(
            &samples_for(&p, &CylinderExperiment::default(), 2),
            &ParamLayout::FixedMass { mass: p.m },
        )
        .unwrap();
        let se = fit.standard_errors();
        for i in 1..4 {
            assert!(
                fit.theta_hat[i].abs() < 5.0 * se[i],
                "{} vs {}",
                fit.theta_hat[i],
                se[i]
            );
        }
    }

    #[test]
    fn curves() {
        let j6 = JOINT_FRICTION[5];
        let c = stribeck_curve(&j6, &[1.0]);
        assert!((c[0].1 - 7.60).abs() < 1e-9);
        assert!(stribeck_curve(&j6, &[]).is_empty());
        let grid = velocity_grid(0.4, 41);
        let curve = stribeck_curve(&j6, &grid);
        for k in 0..41 {
            assert_eq!(curve[k].1, -curve[40 - k].1);
        }
    }

    #[test]
    fn differentiation_of_sine() {
        let t: Vec<f64> = (0..2000).map(|k| k as f64 * 0.02).collect();
        let x: Vec<f64> = t.iter().map(|t| 6.0 * (0.05 * t).sin()).collect();
        let (dx, ddx) = differentiate(&t, &x, 5).unwrap();
        for i in 10..1990 {
            assert!((dx[i] - 0.3 * (0.05 * t[i]).cos()).abs() < 1e-6);
            assert!((ddx[i] + 0.015 * (0.05 * t[i]).sin()).abs() < 1e-6);
        }
        assert!(differentiate(&t[..2], &x[..2], 5).is_err());
        assert!(differentiate(&t, &x[..10], 5).is_err());
    }

    #[test]
    fn identify_from_differentiated_positions() {
        let p = CylinderParams::for_joint(4);
        let run = simulate_cylinder(&p, &quiet(), 0).unwrap();
        let recs = with_differentiated(&run.records, 5).unwrap();
        let layout = ParamLayout::FixedMass { mass: p.m };
        let id = identify_cylinder(&recs[5..recs.len() - 5], p.a1, p.a2, p.c, layout, Estimator::Batch).unwrap();
        let f = id.estimate.friction;
        let t = JOINT_FRICTION[4];
        assert!(rel_err(&f.as_array(), &t.as_array()) < 0.02, "{f:?}");
    }

    #[test]
    fn identify_cylinder_estimators() {
        let p = CylinderParams::for_joint(5);
        let recs = simulate_cylinder(&p, &quiet(), 0).unwrap().records;
        let layout = ParamLayout::FixedMass { mass: p.m };
        let both = identify_cylinder(&recs, p.a1, p.a2, p.c, layout, Estimator::Both).unwrap();
        let b = both.batch.as_ref().unwrap();
        let r = both.rls.as_ref().unwrap();
        assert!(rel_err(&r.theta_hat, &b.theta_hat) < 1e-6);
        assert!(identify_cylinder(&recs, p.a1, p.a2, p.c, layout, Estimator::Rls)
            .unwrap()
            .batch
            .is_none());
        assert!(identify_cylinder(&[], p.a1, p.a2, p.c, layout, Estimator::Batch).is_err());
    }
}
