use std::fs::File;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use hydrarm_core::excitation::FourierTrajectory;
use hydrarm_core::io::{read_dataset_csv, write_dataset_csv, write_residual_csv};
use hydrarm_core::pipeline::{
    run_pipeline, DataSource, DatasetMeta, FrictionStage, IdentificationReport, PipelineConfig,
};
use hydrarm_core::presets::ground_truth_params;
use hydrarm_core::reduction::ReductionOptions;
use serde::{Deserialize, Serialize};

use super::friction::FrictionTable;
use super::Ctx;
use crate::output::{columns, joint_columns, read_json_file, StageDir};

pub const STAGE: &str = "dynamics";
pub const REPORT: &str = "report.json";
/// Per-joint bound on the absolute residual, N·m.
pub const RESIDUAL_THRESHOLD: f64 = 0.4;

#[derive(Debug, Args)]
pub struct IdentifyDynamicsArgs {
    /// Generate the dataset from the built-in ground truth along the trajectory.
    #[arg(long)]
    pub simulate: bool,
    /// Torque noise standard deviation for --simulate, N·m.
    #[arg(long, requires = "simulate")]
    pub noise: Option<f64>,
    /// Trajectory JSON for --simulate [default: <out>/trajectory/trajectory.json]
    #[arg(long, requires = "simulate")]
    pub trajectory: Option<PathBuf>,
    /// Measured dataset CSV (t,q1..,dq1..,ddq1..,tau1..).
    #[arg(long, conflicts_with = "simulate")]
    pub dataset: Option<PathBuf>,
    /// Friction table from identify-friction [default: <out>/friction/friction.json]
    #[arg(long)]
    pub friction: Option<PathBuf>,
    /// Run without subtracting joint friction.
    #[arg(long, conflicts_with = "friction")]
    pub skip_friction: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DynamicsReport {
    /// Metric compared against `threshold`: the per-joint RMS residual in N·m.
    pub validation_metric: String,
    pub threshold: f64,
    pub within_threshold: bool,
    #[serde(flatten)]
    pub report: IdentificationReport,
}

pub fn run(ctx: &Ctx, args: &IdentifyDynamicsArgs) -> Result<()> {
    let model = ctx.config.robot_model()?;
    let n = model.n_joints();

    let friction = if args.skip_friction {
        FrictionStage::Skip
    } else {
        let path = args
            .friction
            .clone()
            .unwrap_or_else(|| ctx.out.join(super::friction::STAGE).join(super::friction::TABLE));
        if !path.is_file() {
            bail!(
                "friction results not found at {}; run identify-friction first, pass --friction, or use --skip-friction",
                path.display()
            );
        }
        let table: FrictionTable = read_json_file(&path)?;
        FrictionStage::Given(table.params_for(n)?)
    };

    let noise = args.noise.unwrap_or(ctx.config.torque_noise);
    let (data, source) = if args.simulate {
        let path = args.trajectory.clone().unwrap_or_else(|| {
            ctx.out
                .join(super::trajectory::STAGE)
                .join(super::trajectory::TRAJECTORY)
        });
        if !path.is_file() {
            bail!(
                "trajectory not found at {}; run design-trajectory first or pass --trajectory",
                path.display()
            );
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let trajectory = FourierTrajectory::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        (
            DataSource::Simulate {
                ground_truth: ground_truth_params(),
                trajectory,
                rate_hz: ctx.config.rate_hz,
                noise_sigma: noise,
                seed: ctx.seed,
            },
            serde_json::json!({ "simulate": true, "noise": noise, "trajectory": text }),
        )
    } else {
        let Some(path) = &args.dataset else {
            bail!("no data: pass --simulate or --dataset <CSV>");
        };
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let meta = DatasetMeta {
            rate_hz: ctx.config.rate_hz,
            noise_sigma: 0.0,
            seed: None,
            source: path
                .file_name()
                .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
        };
        let ds = read_dataset_csv(file, meta).with_context(|| format!("reading {}", path.display()))?;
        let digest = {
            use sha2::{Digest, Sha256};
            hex::encode(Sha256::digest(std::fs::read(path)?))
        };
        (DataSource::Dataset(ds), serde_json::json!({ "dataset_sha256": digest }))
    };
    let friction_doc = match &friction {
        FrictionStage::Given(f) => serde_json::to_value(f)?,
        _ => serde_json::Value::Null,
    };
    let fingerprint = ctx.fingerprint(
        "identify-dynamics",
        &serde_json::json!({ "data": source, "friction": friction_doc }),
    )?;

    let out = run_pipeline(&PipelineConfig {
        model,
        reduction: ReductionOptions::default(),
        friction,
        data,
    })?;
    let r = &out.report;

    println!("base parameters ({} of {}):", r.rank, out.mapping.recombination.ncols());
    println!(
        "  {:<40} {:>14} {:>12} {:>14}",
        "combination", "estimate", "std err", "truth"
    );
    for b in &r.beta {
        let truth = b.truth.map_or_else(|| "-".into(), |t| format!("{t:.6}"));
        println!(
            "  {:<40} {:>14.6} {:>12.2e} {:>14}",
            b.label, b.value, b.std_error, truth
        );
    }
    println!("condition number of H: {:.4e}", r.condition_number);
    println!("joint  {:>12}  {:>14}", "rsd", "rms [N·m]");
    for j in 0..n {
        println!("{:>5}  {:>12.6}  {:>14.6}", j + 1, r.rsd[j], r.rms_error[j]);
    }
    for (stage, d) in &out.timings {
        println!("time {stage}: {:.3} ms", d.as_secs_f64() * 1e3);
    }

    let mut stage = StageDir::create(&ctx.out, STAGE, "identify-dynamics", ctx.seed, fingerprint)?;
    let within = r.rms_error.iter().all(|&e| e < RESIDUAL_THRESHOLD);
    stage.write_json(
        REPORT,
        "base parameter estimates and validation metrics",
        &DynamicsReport {
            validation_metric: "rms_error".into(),
            threshold: RESIDUAL_THRESHOLD,
            within_threshold: within,
            report: r.clone(),
        },
    )?;
    if args.simulate {
        let mut cols = vec![("t".to_string(), "s".to_string())];
        cols.extend(joint_columns("q", "rad", n));
        cols.extend(joint_columns("dq", "rad/s", n));
        cols.extend(joint_columns("ddq", "rad/s^2", n));
        cols.extend(joint_columns("tau", "N·m", n));
        stage.write_csv("dataset.csv", "simulated joint dataset", cols, |w| {
            write_dataset_csv(w, &out.dataset)
        })?;
    }
    let t: Vec<f64> = out.dataset.states.iter().map(|s| s.t).collect();
    for j in 0..n {
        let measured: Vec<f64> = out.dataset.torques.iter().map(|v| v[j]).collect();
        let predicted: Vec<f64> = out.predicted.iter().map(|v| v[j]).collect();
        stage.write_csv(
            &format!("residual_joint{}.csv", j + 1),
            &format!("measured and predicted torque, joint {}", j + 1),
            columns(&[("t", "s"), ("tau_measured", "N·m"), ("tau_predicted", "N·m")]),
            |w| write_residual_csv(w, &t, &measured, &predicted),
        )?;
    }
    let dir = stage.finish()?;
    println!("wrote {}", dir.display());
    Ok(())
}
