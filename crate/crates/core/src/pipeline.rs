//! Inertial identification: simulate or ingest joint data, remove friction,
//! stack base regressors, solve by least squares and validate the predicted
//! torques.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{friction_torque, inverse_dynamics, LinkInertialSet};
use crate::error::{Error, Result};
use crate::excitation::{check_constraints, FourierTrajectory, DEFAULT_GRID_DT};
use crate::friction::{identify_cylinder, Estimator, ParamLayout};
use crate::hydraulic::{simulate_cylinder, CylinderExperiment, CylinderParams};
use crate::linalg::{condition_number, lstsq};
use crate::model::{JointState, RobotModel};
use crate::reduction::{base_regressor, project_params, reduce_model, BaseParamMapping, ReductionOptions};
use crate::stribeck::FrictionParams;

pub const DEFAULT_TORQUE_NOISE: f64 = 0.1;
pub const DEFAULT_RATE_HZ: f64 = 50.0;
/// Relative singular value (after column scaling) treated as rank loss.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub rate_hz: f64,
    pub noise_sigma: f64,
    pub seed: Option<u64>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationDataset {
    pub states: Vec<JointState>,
    pub torques: Vec<DVector<f64>>,
    pub meta: DatasetMeta,
}

impl IdentificationDataset {
    pub fn new(states: Vec<JointState>, torques: Vec<DVector<f64>>, meta: DatasetMeta) -> Result<Self> {
        let ds = IdentificationDataset { states, torques, meta };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::Count {
                what: "dataset samples (at least)",
                expected: 1,
                found: 0,
            });
        }
        if self.states.len() != self.torques.len() {
            return Err(Error::Count {
                what: "torque samples",
                expected: self.states.len(),
                found: self.torques.len(),
            });
        }
        let n = self.states[0].n_joints();
        for (s, tau) in self.states.iter().zip(&self.torques) {
            if s.n_joints() != n || tau.len() != n {
                return Err(Error::Count {
                    what: "joints per sample",
                    expected: n,
                    found: s.n_joints().max(tau.len()),
                });
            }
            if !s.is_finite() || !tau.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite sample at t = {}", s.t)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_joints(&self) -> usize {
        self.states.first().map_or(0, |s| s.n_joints())
    }

    /// Torques with the friction of each joint removed.
    pub fn without_friction(&self, friction: &[FrictionParams]) -> Result<Self> {
        if friction.len() != self.n_joints() {
            return Err(Error::Count {
                what: "friction sets",
                expected: self.n_joints(),
                found: friction.len(),
            });
        }
        let torques = self
            .states
            .iter()
            .zip(&self.torques)
            .map(|(s, tau)| DVector::from_fn(tau.len(), |i, _| tau[i] - friction_torque(&friction[i], s.dq[i])))
            .collect();
        Ok(IdentificationDataset {
            states: self.states.clone(),
            torques,
            meta: self.meta.clone(),
        })
    }
}

/// Sample `traj` over one period at `rate_hz`; torques from the ground truth
/// plus Gaussian noise of standard deviation `noise_sigma`.
pub fn simulate_arm_run(
    model: &RobotModel,
    ground_truth: &LinkInertialSet,
    traj: &FourierTrajectory,
    rate_hz: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<IdentificationDataset> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sampling rate must be positive, got {rate_hz}"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be nonnegative, got {noise_sigma}"
        )));
    }
    ground_truth.validate(model)?;
    let report = check_constraints(traj, model.limits(), DEFAULT_GRID_DT)?;
    if !report.feasible {
        let v = &report.violations[0];
        return Err(Error::Infeasible(format!(
            "{} violation(s), first: joint {} {:?} reaches {} against {}",
            report.violations.len(),
            v.joint,
            v.kind,
            v.worst,
            v.bound
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("sigma validated"));
    let states = traj.sample_at_rate(rate_hz);
    let torques = states
        .iter()
        .map(|s| {
            let mut tau = inverse_dynamics(model, ground_truth, s);
            if let Some(n) = &normal {
                tau.iter_mut().for_each(|v| *v += n.sample(&mut rng));
            }
            tau
        })
        .collect();
    IdentificationDataset::new(
        states,
        torques,
        DatasetMeta {
            rate_hz,
            noise_sigma,
            seed: Some(seed),
            source: "simulated".into(),
        },
    )
}

/// Stacked system `Γ = H β`, rows grouped joint by joint: rows
/// `i·N .. (i+1)·N` hold joint `i` over all `N` samples.
pub fn assemble_system(
    mapping: &BaseParamMapping,
    model: &RobotModel,
    ds: &IdentificationDataset,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    ds.validate()?;
    let n = ds.n_joints();
    if n != model.n_joints() {
        return Err(Error::Count {
            what: "dataset joints",
            expected: model.n_joints(),
            found: n,
        });
    }
    let samples = ds.len();
    let mut h = DMatrix::zeros(n * samples, mapping.rank);
    let mut gamma = DVector::zeros(n * samples);
    for (k, (s, tau)) in ds.states.iter().zip(&ds.torques).enumerate() {
        let y = base_regressor(model, mapping, s);
        for i in 0..n {
            h.row_mut(i * samples + k).copy_from(&y.row(i));
            gamma[i * samples + k] = tau[i];
        }
    }
    Ok((h, gamma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsEstimate {
    pub beta_hat: DVector<f64>,
    /// `σ̂²(HᵀH)⁻¹` with `σ̂²` the residual variance.
    pub covariance: DMatrix<f64>,
    /// `κ(H)` of the unscaled matrix.
    pub condition_number: f64,
    pub residual_rms: f64,
}

impl LsEstimate {
    pub fn std_errors(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

/// Orthogonal least squares for `Γ ≈ H β`. `labels` name the columns in the
/// rank-deficiency diagnostic.
pub fn solve_ls(h: &DMatrix<f64>, gamma: &DVector<f64>, labels: &[String]) -> Result<LsEstimate> {
    let p = h.ncols();
    if h.nrows() != gamma.len() {
        return Err(Error::Count {
            what: "observations",
            expected: h.nrows(),
            found: gamma.len(),
        });
    }
    if h.nrows() < p {
        return Err(Error::RankDeficient {
            rank: h.nrows(),
            columns: p,
            directions: "fewer rows than parameters".into(),
        });
    }
    let sol = lstsq(h, gamma);
    let weak = sol.weak_directions(RANK_TOL);
    if !weak.is_empty() {
        let directions = weak
            .iter()
            .map(|(_, v)| {
                let top = v.amax();
                v.iter()
                    .enumerate()
                    .filter(|(_, c)| c.abs() > 0.1 * top)
                    .map(|(j, c)| {
                        let name = labels.get(j).cloned().unwrap_or_else(|| format!("col{j}"));
                        format!("{:+.3}·[{}]", c / top, name)
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::RankDeficient {
            rank: p - weak.len(),
            columns: p,
            directions,
        });
    }
    let dof = (h.nrows() - p).max(1) as f64;
    let sigma2 = sol.residual.norm_squared() / dof;
    Ok(LsEstimate {
        covariance: sol.unscaled_covariance() * sigma2,
        condition_number: condition_number(h),
        residual_rms: sol.residual_rms(),
        beta_hat: sol.x,
    })
}

pub fn predict_torques(
    mapping: &BaseParamMapping,
    model: &RobotModel,
    beta_hat: &DVector<f64>,
    states: &[JointState],
) -> Vec<DVector<f64>> {
    states
        .iter()
        .map(|s| base_regressor(model, mapping, s) * beta_hat)
        .collect()
}

/// `sqrt(Σ(τ̂ − τ')² / Σ τ̂²)` over one joint's series.
pub fn rsd(predicted: &[f64], measured: &[f64]) -> Result<f64> {
    if predicted.len() != measured.len() || predicted.is_empty() {
        return Err(Error::Count {
            what: "aligned torque samples",
            expected: predicted.len().max(1),
            found: measured.len(),
        });
    }
    let num: f64 = predicted.iter().zip(measured).map(|(p, m)| (p - m).powi(2)).sum();
    let den: f64 = predicted.iter().map(|p| p * p).sum();
    if den == 0.0 {
        return Err(Error::ZeroDenominator(
            "predicted torque series is identically zero".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Root mean square of `predicted − measured` in torque units.
pub fn rms_error(predicted: &[f64], measured: &[f64]) -> f64 {
    let n = predicted.len().min(measured.len());
    if n == 0 {
        return 0.0;
    }
    let ss: f64 = predicted.iter().zip(measured).map(|(p, m)| (p - m).powi(2)).sum();
    (ss / n as f64).sqrt()
}

fn joint_series(v: &[DVector<f64>], i: usize) -> Vec<f64> {
    v.iter().map(|t| t[i]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrictionStage {
    /// Simulate each joint's cylinder and identify its friction (mass known).
    Identify {
        experiment: CylinderExperiment,
        estimator: Estimator,
        seed: u64,
    },
    Given(Vec<FrictionParams>),
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Simulate {
        ground_truth: LinkInertialSet,
        trajectory: FourierTrajectory,
        rate_hz: f64,
        noise_sigma: f64,
        seed: u64,
    },
    Dataset(IdentificationDataset),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub model: RobotModel,
    pub reduction: ReductionOptions,
    pub friction: FrictionStage,
    pub data: DataSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseEstimate {
    pub label: String,
    pub value: f64,
    pub std_error: f64,
    /// Projected ground truth when the data were simulated.
    pub truth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub rank: usize,
    pub n_samples: usize,
    pub condition_number: f64,
    pub residual_rms: f64,
    pub beta: Vec<BaseEstimate>,
    /// Per joint, `sqrt(Σ(τ̂ − τ')² / Σ τ̂²)` (dimensionless).
    pub rsd: Vec<f64>,
    /// Per joint RMS of `τ̂ − τ'` in N·m.
    pub rms_error: Vec<f64>,
    pub friction_stage: String,
    pub friction: Option<Vec<FrictionParams>>,
    pub data_source: String,
    /// Torque noise used to simulate the data; absent for measured data.
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: IdentificationReport,
    pub mapping: BaseParamMapping,
    pub dataset: IdentificationDataset,
    /// Predicted total torque (inertial plus friction) per sample.
    pub predicted: Vec<DVector<f64>>,
    pub timings: Vec<(&'static str, Duration)>,
}

fn identify_friction_stage(
    n_joints: usize,
    experiment: &CylinderExperiment,
    estimator: Estimator,
    seed: u64,
) -> Result<Vec<FrictionParams>> {
    if n_joints != 6 {
        return Err(Error::Count {
            what: "joints with a cylinder testbed",
            expected: 6,
            found: n_joints,
        });
    }
    (0..n_joints)
        .map(|j| {
            let p = CylinderParams::for_joint(j);
            let run = simulate_cylinder(&p, experiment, seed.wrapping_add(j as u64))?;
            let id = identify_cylinder(
                &run.records,
                p.a1,
                p.a2,
                p.c,
                ParamLayout::FixedMass { mass: p.m },
                estimator,
            )?;
            Ok(id.estimate.friction)
        })
        .collect()
}

/// Friction → reduction → data → assembly → solve → prediction → validation.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    let model = &config.model;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, Duration)>| {
        timings.push((name, clock.elapsed()));
        clock = Instant::now();
    };

    let (friction, friction_stage) = match &config.friction {
        FrictionStage::Identify {
            experiment,
            estimator,
            seed,
        } => (
            Some(
                identify_friction_stage(model.n_joints(), experiment, *estimator, *seed)
                    .map_err(|e| e.in_stage("friction"))?,
            ),
            "identified",
        ),
        FrictionStage::Given(f) => (Some(f.clone()), "given"),
        FrictionStage::Skip => (None, "skipped"),
    };
    lap("friction", &mut timings);

    let mapping = reduce_model(
        model,
        &ReductionOptions {
            include_friction: false,
            ..config.reduction
        },
    )
    .map_err(|e| e.in_stage("reduction"))?;
    lap("reduction", &mut timings);

    let (dataset, truth) = match &config.data {
        DataSource::Simulate {
            ground_truth,
            trajectory,
            rate_hz,
            noise_sigma,
            seed,
        } => (
            simulate_arm_run(model, ground_truth, trajectory, *rate_hz, *noise_sigma, *seed)
                .map_err(|e| e.in_stage("simulate"))?,
            Some(project_params(&mapping, ground_truth)),
        ),
        DataSource::Dataset(ds) => (ds.clone(), None),
    };
    lap("data", &mut timings);

    let inertial = match &friction {
        Some(f) => dataset.without_friction(f).map_err(|e| e.in_stage("friction"))?,
        None => dataset.clone(),
    };
    let (h, gamma) = assemble_system(&mapping, model, &inertial).map_err(|e| e.in_stage("assemble"))?;
    lap("assemble", &mut timings);

    let est = solve_ls(&h, &gamma, &mapping.labels).map_err(|e| e.in_stage("solve"))?;
    lap("solve", &mut timings);

    let mut predicted = predict_torques(&mapping, model, &est.beta_hat, &dataset.states);
    if let Some(f) = &friction {
        for (tau, s) in predicted.iter_mut().zip(&dataset.states) {
            for i in 0..tau.len() {
                tau[i] += friction_torque(&f[i], s.dq[i]);
            }
        }
    }
    let n = model.n_joints();
    let mut rsd_values = Vec::with_capacity(n);
    let mut rms_values = Vec::with_capacity(n);
    for i in 0..n {
        let p = joint_series(&predicted, i);
        let m = joint_series(&dataset.torques, i);
        rsd_values.push(rsd(&p, &m).map_err(|e| e.in_stage("validate"))?);
        rms_values.push(rms_error(&p, &m));
    }
    lap("validate", &mut timings);

    let se = est.std_errors();
    let beta = (0..mapping.rank)
        .map(|k| BaseEstimate {
            label: mapping.labels[k].clone(),
            value: est.beta_hat[k],
            std_error: se[k],
            truth: truth.as_ref().map(|t| t[k]),
        })
        .collect();
    let report = IdentificationReport {
        rank: mapping.rank,
        n_samples: dataset.len(),
        condition_number: est.condition_number,
        residual_rms: est.residual_rms,
        beta,
        rsd: rsd_values,
        rms_error: rms_values,
        friction_stage: friction_stage.into(),
        friction,
        data_source: dataset.meta.source.clone(),
        noise_sigma: matches!(config.data, DataSource::Simulate { .. }).then_some(dataset.meta.noise_sigma),
        seed: dataset.meta.seed,
    };
    Ok(PipelineOutput {
        report,
        mapping,
        dataset,
        predicted,
        timings,
    })
}
