use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use hydrarm_core::excitation::{
    check_constraints, condition_number, n_free_per_joint, optimize_trajectory, BoundaryMode, ConstraintReport,
    FourierTrajectory, OptimizerOptions,
};
use hydrarm_core::io::write_trajectory_csv;
use hydrarm_core::reduction::{reduce_model, ReductionOptions};
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::config::MIN_BUDGET;
use crate::output::{joint_columns, StageDir};

pub const STAGE: &str = "trajectory";
pub const TRAJECTORY: &str = "trajectory.json";
pub const DESIGN: &str = "design.json";

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundaryArg {
    /// Start and end at the offset q0 with zero velocity and acceleration.
    StartAtOffset,
    /// As above, with q(0) = 0 as well.
    ZeroStart,
}

impl From<BoundaryArg> for BoundaryMode {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::StartAtOffset => BoundaryMode::StartAtOffset,
            BoundaryArg::ZeroStart => BoundaryMode::ZeroStart,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Published coefficient table (degrees), evaluated but not optimized.
    Table3,
}

#[derive(Debug, Args)]
pub struct DesignTrajectoryArgs {
    /// Harmonics per joint.
    #[arg(long = "nH", value_parser = clap::value_parser!(u64).range(1..))]
    pub n_h: Option<u64>,
    /// Fundamental angular frequency, rad/s.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Objective evaluations (at least 100).
    #[arg(long, value_parser = clap::value_parser!(u64).range(MIN_BUDGET as u64..))]
    pub budget: Option<u64>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    /// Evaluate a stored coefficient set instead of optimizing.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

/// Written to `design.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct DesignSummary {
    pub preset: Option<Preset>,
    pub omega_f: f64,
    pub n_h: usize,
    pub boundary: BoundaryMode,
    pub n_coefficients: usize,
    pub n_free: usize,
    pub kappa: f64,
    pub feasible: bool,
    pub max_boundary_rate: f64,
    pub budget: Option<usize>,
    pub evaluations: Option<usize>,
    /// Best feasible κ after each evaluation; null until one is found.
    pub history: Vec<Option<f64>>,
    pub constraints: ConstraintReport,
}

/// Largest |q̇| or |q̈| at either end of the period.
fn boundary_rate(traj: &FourierTrajectory) -> f64 {
    [traj.eval(0.0), traj.eval(traj.period())]
        .iter()
        .flat_map(|s| s.dq.iter().chain(s.ddq.iter()).map(|v| v.abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max)
}

pub fn run(ctx: &Ctx, args: &DesignTrajectoryArgs) -> Result<()> {
    let tc = &ctx.config.trajectory;
    let omega_f = args.omega.unwrap_or(tc.omega_f);
    let n_h = args.n_h.map_or(tc.n_h, |v| v as usize);
    let budget = args.budget.map_or(tc.budget, |v| v as usize);
    let boundary: BoundaryMode = args.boundary.map_or(tc.boundary, Into::into);
    if !(omega_f > 0.0 && omega_f.is_finite()) {
        bail!("--omega must be positive, got {omega_f}");
    }
    if budget < MIN_BUDGET {
        bail!("budget must be at least {MIN_BUDGET}, got {budget}");
    }
    let model = ctx.config.robot_model()?;
    let mapping = reduce_model(&model, &ReductionOptions::default())?;
    let options = serde_json::json!({
        "omega_f": omega_f, "n_h": n_h, "budget": budget, "boundary": boundary, "preset": args.preset,
    });
    let fingerprint = ctx.fingerprint("design-trajectory", &options)?;
    let n_joints = model.n_joints();

    let (traj, summary) = match args.preset {
        Some(preset) => {
            let traj = FourierTrajectory::table3_preset(omega_f);
            let constraints = check_constraints(&traj, model.limits(), OptimizerOptions::default().grid_dt)?;
            let kappa = condition_number(&model, &mapping, &traj, tc.kappa_samples)?.kappa;
            (
                traj.clone(),
                DesignSummary {
                    preset: Some(preset),
                    omega_f,
                    n_h: traj.n_h,
                    boundary: traj.boundary,
                    n_coefficients: traj.n_coefficients(),
                    n_free: n_free_per_joint(traj.n_h, traj.boundary) * n_joints,
                    kappa,
                    feasible: constraints.feasible,
                    max_boundary_rate: boundary_rate(&traj),
                    budget: None,
                    evaluations: None,
                    history: Vec::new(),
                    constraints,
                },
            )
        }
        None => {
            let opts = OptimizerOptions {
                boundary,
                kappa_samples: tc.kappa_samples,
                ..OptimizerOptions::default()
            };
            let res = optimize_trajectory(&model, &mapping, model.limits(), omega_f, n_h, ctx.seed, budget, &opts)?;
            let traj = res.trajectory.clone();
            (
                traj.clone(),
                DesignSummary {
                    preset: None,
                    omega_f,
                    n_h,
                    boundary,
                    n_coefficients: res.n_coefficients,
                    n_free: res.n_free,
                    kappa: res.kappa,
                    feasible: res.report.feasible,
                    max_boundary_rate: boundary_rate(&traj),
                    budget: Some(budget),
                    evaluations: Some(res.evaluations),
                    history: res.history.iter().map(|&k| k.is_finite().then_some(k)).collect(),
                    constraints: res.report,
                },
            )
        }
    };

    println!(
        "search space: {} coefficients ({} free after boundary elimination)",
        summary.n_coefficients, summary.n_free
    );
    if let Some(e) = summary.evaluations {
        println!("evaluations: {e}");
    }
    println!("condition number: {}", summary.kappa);
    println!(
        "feasible on {} s grid: {}",
        OptimizerOptions::default().grid_dt,
        summary.feasible
    );
    for v in &summary.constraints.violations {
        println!("  joint {} {:?}: {} (bound {})", v.joint, v.kind, v.worst, v.bound);
    }
    println!("max boundary velocity/acceleration: {:e}", summary.max_boundary_rate);

    let mut stage = StageDir::create(&ctx.out, STAGE, "design-trajectory", ctx.seed, fingerprint)?;
    stage.write_text(
        TRAJECTORY,
        "Fourier coefficients (rad, rad/s)",
        &(traj.to_json() + "\n"),
    )?;
    let samples = traj.sample_at_rate(ctx.config.rate_hz);
    let mut cols = vec![("t".to_string(), "s".to_string())];
    cols.extend(joint_columns("q", "rad", n_joints));
    cols.extend(joint_columns("dq", "rad/s", n_joints));
    cols.extend(joint_columns("ddq", "rad/s^2", n_joints));
    stage.write_csv("samples.csv", "trajectory sampled over one period", cols, |w| {
        write_trajectory_csv(w, &samples)
    })?;
    stage.write_json(DESIGN, "design diagnostics", &summary)?;
    let dir = stage.finish()?;
    println!("wrote {}", dir.display());
    Ok(())
}
