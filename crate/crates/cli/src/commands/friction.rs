use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use hydrarm_core::friction::{
    identify_cylinder, stribeck_curve, velocity_grid, Estimator, FrictionIdentification, ParamLayout,
};
use hydrarm_core::io::{read_cylinder_csv, write_curve_csv};
use hydrarm_core::stribeck::FrictionParams;
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::output::{columns, StageDir};

pub const STAGE: &str = "friction";
pub const TABLE: &str = "friction.json";
const CURVE_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EstimatorArg {
    Batch,
    Rls,
    Both,
}

impl From<EstimatorArg> for Estimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Batch => Estimator::Batch,
            EstimatorArg::Rls => Estimator::Rls,
            EstimatorArg::Both => Estimator::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct IdentifyFrictionArgs {
    /// Estimator whose result is kept; `both` keeps the batch fit and reports RLS alongside.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorArg>,
    /// A record CSV, or a directory holding joint1.csv .. joint6.csv [default: <out>/cylinders]
    #[arg(long)]
    pub records: Option<PathBuf>,
    /// Joint (1-6) a single record file belongs to.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..=6))]
    pub joint: u64,
    /// Estimate the piston mass as well instead of treating it as known.
    #[arg(long)]
    pub mass_free: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JointFriction {
    pub joint: usize,
    pub source: String,
    #[serde(flatten)]
    pub identification: FrictionIdentification,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrictionEntry {
    pub joint: usize,
    #[serde(flatten)]
    pub params: FrictionParams,
}

/// Handoff document read by `identify-dynamics`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrictionTable {
    pub estimator: Estimator,
    pub mass_known: bool,
    pub joints: Vec<FrictionEntry>,
}

impl FrictionTable {
    /// Friction per joint in joint order; every joint must be present.
    pub fn params_for(&self, n_joints: usize) -> Result<Vec<FrictionParams>> {
        (1..=n_joints)
            .map(|j| {
                self.joints
                    .iter()
                    .find(|e| e.joint == j)
                    .map(|e| e.params)
                    .with_context(|| format!("friction results have no entry for joint {j}"))
            })
            .collect()
    }
}

fn inputs(ctx: &Ctx, args: &IdentifyFrictionArgs) -> Result<Vec<(usize, PathBuf)>> {
    let path = args
        .records
        .clone()
        .unwrap_or_else(|| ctx.out.join(super::cylinder::STAGE));
    if path.is_file() {
        return Ok(vec![(args.joint as usize, path)]);
    }
    if !path.is_dir() {
        bail!(
            "no cylinder records at {}; run simulate-cylinder first or pass --records",
            path.display()
        );
    }
    let files: Vec<_> = (1..=6).map(|j| (j, path.join(format!("joint{j}.csv")))).collect();
    let missing: Vec<String> = files
        .iter()
        .filter(|(_, p)| !p.is_file())
        .map(|(_, p)| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("missing record files: {}", missing.join(", "));
    }
    Ok(files)
}

fn source_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn run(ctx: &Ctx, args: &IdentifyFrictionArgs) -> Result<()> {
    let estimator: Estimator = args.estimator.map_or(ctx.config.friction_estimator, Into::into);
    let files = inputs(ctx, args)?;
    let options = serde_json::json!({
        "estimator": estimator,
        "mass_free": args.mass_free,
        "inputs": files.iter().map(|(j, p)| (j, source_name(p))).collect::<Vec<_>>(),
    });
    let fingerprint = ctx.fingerprint("identify-friction", &options)?;
    let mut stage = StageDir::create(&ctx.out, STAGE, "identify-friction", ctx.seed, fingerprint)?;

    let mut table = Vec::new();
    let mut failures = Vec::new();
    println!(
        "joint  {:>12}  {:>12}  {:>12}  {:>10}  {:>10}  residual [N]",
        "f_c [N]", "f_v [N·s/m]", "f_s", "m [kg]", "K [N/m]"
    );
    for (joint, path) in files {
        let result = (|| -> Result<JointFriction> {
            let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let records = read_cylinder_csv(file).with_context(|| format!("reading {}", path.display()))?;
            let p = ctx.config.cylinder_params(joint - 1);
            let layout = if args.mass_free {
                ParamLayout::Full
            } else {
                ParamLayout::FixedMass { mass: p.m }
            };
            let id = identify_cylinder(&records, p.a1, p.a2, p.c, layout, estimator)?;
            let v_max = records.iter().map(|r| r.dx.abs()).fold(0.0, f64::max);
            let curve = stribeck_curve(&id.estimate.friction, &velocity_grid(v_max, CURVE_POINTS));
            stage.write_csv(
                &format!("curve_joint{joint}.csv"),
                &format!("identified friction curve, cylinder {joint}"),
                columns(&[("v", "m/s"), ("F_d", "N")]),
                |w| write_curve_csv(w, &curve),
            )?;
            Ok(JointFriction {
                joint,
                source: source_name(&path),
                identification: id,
            })
        })();
        match result {
            Ok(jf) => {
                let e = &jf.identification.estimate;
                let residual = jf
                    .identification
                    .batch
                    .as_ref()
                    .map(|b| b.residual_rms)
                    .or(jf.identification.rls.as_ref().map(|r| r.residual_rms))
                    .unwrap_or(f64::NAN);
                println!(
                    "{:>5}  {:>12.6}  {:>12.6}  {:>12.6}  {:>10.4}  {:>10.4}  {:.4e}",
                    joint, e.friction.f_c, e.friction.f_v, e.friction.f_s, e.m, e.k, residual
                );
                if let Some(w) = jf.identification.batch.as_ref().and_then(|b| b.rank_warning.as_ref()) {
                    eprintln!("warning: joint {joint}: {w}");
                }
                table.push(FrictionEntry {
                    joint,
                    params: e.friction,
                });
                stage.write_json(
                    &format!("joint{joint}.json"),
                    &format!("identification result, cylinder {joint}"),
                    &jf,
                )?;
            }
            Err(e) => {
                eprintln!("joint {joint}: {e:#}");
                failures.push(format!("joint {joint}: {e:#}"));
            }
        }
    }
    if !failures.is_empty() {
        stage.finish()?;
        bail!(
            "friction identification failed for {} of the inputs:\n  {}",
            failures.len(),
            failures.join("\n  ")
        );
    }
    stage.write_json(
        TABLE,
        "friction triple per joint for the inertial stage",
        &FrictionTable {
            estimator,
            mass_known: !args.mass_free,
            joints: table,
        },
    )?;
    let dir = stage.finish()?;
    println!("wrote {}", dir.display());
    Ok(())
}
