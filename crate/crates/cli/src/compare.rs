//! `polsr compare`: two configurations on the same scenario and seeds.

use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use polsr::scenarios::{Algorithm, ExperimentSummary};

use crate::run::execute;
use crate::spec::{RunArgs, RunSpec};

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Baseline: an algorithm name or a run config file.
    pub a: String,
    /// Candidate: an algorithm name or a run config file.
    pub b: String,
    /// Applied to both sides; two_relay, open_area or file:<trace.csv>.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Applied to both sides.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Applied to both sides.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Applied to both sides.
    #[arg(long)]
    pub d50: Option<f64>,
    /// Applied to both sides.
    #[arg(long)]
    pub steepness: Option<f64>,
}

impl CompareArgs {
    fn side(&self, what: &str) -> Result<RunSpec> {
        let mut args = RunArgs {
            scenario: self.scenario.clone(),
            runs: self.runs,
            seed: self.seed,
            d50: self.d50,
            steepness: self.steepness,
            ..Default::default()
        };
        if Algorithm::parse(what).is_some() {
            args.algorithm = Some(what.to_string());
        } else {
            args.config = Some(PathBuf::from(what));
        }
        args.resolve()
    }

    /// Both sides, checked to share scenario, seed and run count.
    pub fn resolve(&self) -> Result<(RunSpec, RunSpec)> {
        let a = self.side(&self.a)?;
        let b = self.side(&self.b)?;
        if a.scenario != b.scenario {
            bail!(
                "mismatched scenarios: {} vs {}",
                a.scenario.name(),
                b.scenario.name()
            );
        }
        if a.seed != b.seed || a.runs != b.runs {
            bail!(
                "mismatched replications: seed {} x {} runs vs seed {} x {} runs",
                a.seed,
                a.runs,
                b.seed,
                b.runs
            );
        }
        if (a.d50, a.steepness) != (b.d50, b.steepness) {
            bail!("mismatched channels: d50/steepness differ between the two configurations");
        }
        Ok((a, b))
    }
}

/// `b / a`, with 0/0 read as no change.
pub fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        b / a
    }
}

pub fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let (a, b) = args.resolve()?;
    let sa = execute(&a)?.summary;
    let sb = execute(&b)?.summary;
    write_report(&mut io::stdout().lock(), &a, &sa, &sb)?;
    Ok(())
}

pub fn write_report<W: Write>(
    w: &mut W,
    spec: &RunSpec,
    a: &ExperimentSummary,
    b: &ExperimentSummary,
) -> io::Result<()> {
    writeln!(
        w,
        "scenario {}, seeds {}..{}, {} runs",
        a.scenario,
        spec.seed,
        spec.seed + spec.runs as u64 - 1,
        a.runs
    )?;
    let (ha, hb) = (format!("a: {}", a.algorithm), format!("b: {}", b.algorithm));
    writeln!(w, "{:<16}{:>22}{:>22}{:>10}", "metric", ha, hb, "b/a")?;
    for (name, x, y) in [
        ("outage_percent", a.outage_percent, b.outage_percent),
        ("mean_dlr", a.mean_dlr, b.mean_dlr),
        ("max_dlr", a.max_dlr, b.max_dlr),
    ] {
        writeln!(w, "{name:<16}{x:>22.6}{y:>22.6}{:>10.4}", ratio(x, y))?;
    }
    Ok(())
}
