use anyhow::{bail, Context, Result};
use clap::Args;
use hydrarm_core::hydraulic::{simulate_cylinder, CylinderParams};
use hydrarm_core::io::write_cylinder_csv;
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::output::{columns, StageDir};

pub const STAGE: &str = "cylinders";

#[derive(Debug, Args)]
pub struct SimulateCylinderArgs {
    /// Factor applied to every sensor noise level; 0 gives exact records.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlantedCylinder {
    pub joint: usize,
    pub seed: u64,
    pub samples: usize,
    pub rod_side_samples: usize,
    pub params: CylinderParams,
}

pub fn record_columns() -> Vec<(String, String)> {
    columns(&[
        ("t", "s"),
        ("x", "m"),
        ("dx", "m/s"),
        ("ddx", "m/s^2"),
        ("p1", "Pa"),
        ("p2", "Pa"),
        ("F", "N"),
    ])
}

pub fn run(ctx: &Ctx, args: &SimulateCylinderArgs) -> Result<()> {
    if !(args.noise >= 0.0 && args.noise.is_finite()) {
        bail!("--noise must be a nonnegative factor, got {}", args.noise);
    }
    let mut exp = ctx.config.cylinder.experiment.clone();
    exp.noise = exp.noise.scaled(args.noise);
    let fingerprint = ctx.fingerprint("simulate-cylinder", &serde_json::json!({ "noise": args.noise }))?;
    let mut stage = StageDir::create(&ctx.out, STAGE, "simulate-cylinder", ctx.seed, fingerprint)?;

    let mut planted = Vec::new();
    println!("joint  samples  rod-side  mass [kg]");
    for j in 0..6 {
        let params = ctx.config.cylinder_params(j);
        let seed = ctx.seed.wrapping_add(j as u64);
        let run = simulate_cylinder(&params, &exp, seed).with_context(|| format!("cylinder {}", j + 1))?;
        stage.write_csv(
            &format!("joint{}.csv", j + 1),
            &format!("cylinder {} records", j + 1),
            record_columns(),
            |w| write_cylinder_csv(w, &run.records),
        )?;
        println!(
            "{:>5}  {:>7}  {:>8}  {}",
            j + 1,
            run.records.len(),
            run.rod_side_samples,
            params.m
        );
        planted.push(PlantedCylinder {
            joint: j + 1,
            seed,
            samples: run.records.len(),
            rod_side_samples: run.rod_side_samples,
            params,
        });
    }
    stage.write_json("planted.json", "cylinder parameters used by the simulator", &planted)?;
    let dir = stage.finish()?;
    println!("wrote {}", dir.display());
    Ok(())
}
