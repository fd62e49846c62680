use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use clap::Args;
use hydrarm_core::io::write_text_csv;

use super::cylinder::PlantedCylinder;
use super::dynamics::DynamicsReport;
use super::friction::FrictionTable;
use super::trajectory::DesignSummary;
use super::Ctx;
use crate::output::{columns, read_json_file, Manifest, StageDir, MANIFEST};

pub const STAGE: &str = "report";

#[derive(Debug, Args)]
pub struct ReportArgs {}

struct StageInfo {
    name: &'static str,
    command: &'static str,
    main_file: &'static str,
}

const STAGES: [StageInfo; 4] = [
    StageInfo {
        name: super::cylinder::STAGE,
        command: "simulate-cylinder",
        main_file: "planted.json",
    },
    StageInfo {
        name: super::friction::STAGE,
        command: "identify-friction",
        main_file: super::friction::TABLE,
    },
    StageInfo {
        name: super::trajectory::STAGE,
        command: "design-trajectory",
        main_file: super::trajectory::DESIGN,
    },
    StageInfo {
        name: super::dynamics::STAGE,
        command: "identify-dynamics",
        main_file: super::dynamics::REPORT,
    },
];

fn present(root: &Path, s: &StageInfo) -> bool {
    let dir = root.join(s.name);
    dir.join(MANIFEST).is_file() && dir.join(s.main_file).is_file()
}

pub fn run(ctx: &Ctx, _args: &ReportArgs) -> Result<()> {
    let root = &ctx.out;
    let missing: Vec<&StageInfo> = STAGES.iter().filter(|s| !present(root, s)).collect();
    if missing.len() == STAGES.len() {
        bail!(
            "nothing to report under {}; missing: {}",
            root.display(),
            missing
                .iter()
                .map(|s| format!("{}/ ({})", s.name, s.command))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }

    let mut md = String::new();
    writeln!(md, "# hydrarm summary\n")?;
    writeln!(md, "hydrarm {}\n", env!("CARGO_PKG_VERSION"))?;
    writeln!(md, "| stage | command | status | seed | config fingerprint |")?;
    writeln!(md, "|---|---|---|---|---|")?;
    let mut fingerprints = Vec::new();
    for s in &STAGES {
        if present(root, s) {
            let m: Manifest = read_json_file(&root.join(s.name).join(MANIFEST))?;
            writeln!(
                md,
                "| {} | {} | present | {} | `{}` |",
                s.name, s.command, m.seed, m.config_fingerprint
            )?;
            fingerprints.push(m.config_fingerprint);
        } else {
            writeln!(md, "| {} | {} | **missing** | - | - |", s.name, s.command)?;
        }
    }

    if present(root, &STAGES[0]) {
        let planted: Vec<PlantedCylinder> = read_json_file(&root.join(STAGES[0].name).join(STAGES[0].main_file))?;
        writeln!(md, "\n## Cylinder simulation\n")?;
        writeln!(md, "| joint | samples | rod-side samples | mass [kg] | seed |")?;
        writeln!(md, "|---|---|---|---|---|")?;
        for p in &planted {
            writeln!(
                md,
                "| {} | {} | {} | {} | {} |",
                p.joint, p.samples, p.rod_side_samples, p.params.m, p.seed
            )?;
        }
    }

    if present(root, &STAGES[1]) {
        let table: FrictionTable = read_json_file(&root.join(STAGES[1].name).join(STAGES[1].main_file))?;
        writeln!(md, "\n## Friction\n")?;
        writeln!(
            md,
            "estimator: {:?}, piston mass known: {}\n",
            table.estimator, table.mass_known
        )?;
        writeln!(md, "| joint | f_c [N] | f_v [N·s/m] | f_s |")?;
        writeln!(md, "|---|---|---|---|")?;
        for e in &table.joints {
            writeln!(
                md,
                "| {} | {:.6} | {:.6} | {:.6} |",
                e.joint, e.params.f_c, e.params.f_v, e.params.f_s
            )?;
        }
    }

    if present(root, &STAGES[2]) {
        let d: DesignSummary = read_json_file(&root.join(STAGES[2].name).join(STAGES[2].main_file))?;
        writeln!(md, "\n## Excitation trajectory\n")?;
        if let Some(p) = d.preset {
            writeln!(md, "- preset: {p:?}")?;
        }
        writeln!(md, "- omega_f: {} rad/s, harmonics: {}", d.omega_f, d.n_h)?;
        writeln!(md, "- coefficients: {} ({} free)", d.n_coefficients, d.n_free)?;
        writeln!(md, "- condition number: {:.6e}", d.kappa)?;
        writeln!(md, "- feasible: {}", d.feasible)?;
        writeln!(md, "- max boundary velocity/acceleration: {:e}", d.max_boundary_rate)?;
        if let Some(e) = d.evaluations {
            writeln!(md, "- evaluations: {e}")?;
        }
    }

    let mut stage = StageDir::create(root, STAGE, "report", ctx.seed, fingerprints.join(":"))?;
    if present(root, &STAGES[3]) {
        let d: DynamicsReport = read_json_file(&root.join(STAGES[3].name).join(STAGES[3].main_file))?;
        let r = &d.report;
        writeln!(md, "\n## Base parameters\n")?;
        writeln!(
            md,
            "rank {}, {} samples, condition number {:.6e}\n",
            r.rank, r.n_samples, r.condition_number
        )?;
        writeln!(md, "| # | combination | estimate | std err | truth |")?;
        writeln!(md, "|---|---|---|---|---|")?;
        for (k, b) in r.beta.iter().enumerate() {
            let truth = b.truth.map_or_else(|| "-".to_string(), |t| format!("{t:.6}"));
            writeln!(
                md,
                "| {} | `{}` | {:.6} | {:.2e} | {} |",
                k + 1,
                b.label,
                b.value,
                b.std_error,
                truth
            )?;
        }
        writeln!(md, "\n## Validation\n")?;
        writeln!(md, "friction stage: {}, data: {}\n", r.friction_stage, r.data_source)?;
        writeln!(md, "| joint | rsd | rms [N·m] |")?;
        writeln!(md, "|---|---|---|")?;
        for j in 0..r.rsd.len() {
            writeln!(md, "| {} | {:.6} | {:.6} |", j + 1, r.rsd[j], r.rms_error[j])?;
        }
        writeln!(
            md,
            "\nall joints {} the {} N·m residual threshold",
            if d.within_threshold { "within" } else { "NOT within" },
            d.threshold
        )?;
        stage.write_csv(
            "base_parameters.csv",
            "identified base parameters",
            columns(&[("label", "-"), ("estimate", "SI"), ("std_error", "SI"), ("truth", "SI")]),
            |w| {
                let rows: Vec<Vec<String>> = r
                    .beta
                    .iter()
                    .map(|b| {
                        let truth = b.truth.map_or_else(String::new, |t| format!("{t}"));
                        vec![
                            b.label.clone(),
                            format!("{}", b.value),
                            format!("{}", b.std_error),
                            truth,
                        ]
                    })
                    .collect();
                write_text_csv(w, &["label", "estimate", "std_error", "truth"], &rows)
            },
        )?;
    }
    if !missing.is_empty() {
        writeln!(md, "\n## Missing stages\n")?;
        for s in &missing {
            writeln!(md, "- {}: run `hydrarm {}`", s.name, s.command)?;
        }
    }
    stage.write_text("summary.md", "consolidated summary", &md)?;
    let dir = stage.finish()?;
    print!("{md}");
    println!("wrote {}", dir.display());
    Ok(())
}
