//! Replication driver and output files of `polsr run`.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use polsr::scenarios::{
    average_dlr_profile, run_replications, DlrSeries, ExperimentSummary, Replication, Scenario,
    OUTAGE_THRESHOLD,
};

use crate::spec::{reseed, RunSpec};

pub struct Outcome {
    pub summary: ExperimentSummary,
    pub runs: Vec<Replication>,
    pub average: DlrSeries,
}

/// Runs every replication of `spec` in parallel and aggregates them.
pub fn execute(spec: &RunSpec) -> Result<Outcome> {
    let template = spec.template()?;
    let runs = run_replications(|seed| reseed(&template, seed), spec.runs, spec.seed, false)?;
    aggregate(spec, runs)
}

fn aggregate(spec: &RunSpec, runs: Vec<Replication>) -> Result<Outcome> {
    let series: Vec<DlrSeries> = runs.iter().map(|r| r.dlr.clone()).collect();
    let average = average_dlr_profile(&series)?;
    let summary = ExperimentSummary::from_runs(&spec.scenario.name(), spec.algorithm, &runs)?;
    Ok(Outcome {
        summary,
        runs,
        average,
    })
}

/// Files written so far; removed again unless `commit` is called.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            created_dir,
            files: Vec::new(),
            committed: false,
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        let mut w = BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        );
        body(&mut w)
            .and_then(|()| w.flush())
            .with_context(|| format!("writing {}", path.display()))
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// `polsr run`: simulate, then write per-run and averaged DLR CSVs, the
/// summary and, if asked, the event logs.
pub fn cmd_run(spec: &RunSpec) -> Result<ExperimentSummary> {
    let template = spec.template()?;
    let mut out = Outputs::open(&spec.output_dir)?;
    let runs = if spec.emit_event_log {
        // Full logs are large; run one at a time and write each before the next.
        let mut runs = Vec::with_capacity(spec.runs);
        for seed in (0..spec.runs as u64).map(|i| spec.seed + i) {
            let mut rep = run_replications(|s| reseed(&template, s), 1, seed, true)?.remove(0);
            let log = rep.log.take().expect("log kept on request");
            out.write(&format!("events_seed{seed}.csv"), |w| log.write_csv(w))?;
            runs.push(rep);
        }
        runs
    } else {
        run_replications(|s| reseed(&template, s), spec.runs, spec.seed, false)?
    };
    let outcome = aggregate(spec, runs)?;
    for rep in &outcome.runs {
        out.write(&format!("dlr_seed{}.csv", rep.seed), |w| {
            rep.dlr.write_csv(w)
        })?;
    }
    out.write("dlr_avg.csv", |w| outcome.average.write_csv(w))?;
    out.write("summary.txt", |w| {
        write_summary(w, spec, &template, &outcome.summary)
    })?;
    out.commit();
    Ok(outcome.summary)
}

pub fn write_summary<W: Write>(
    w: &mut W,
    spec: &RunSpec,
    scenario: &Scenario,
    s: &ExperimentSummary,
) -> io::Result<()> {
    let p = &spec.protocol;
    writeln!(w, "scenario = {}", s.scenario)?;
    writeln!(w, "algorithm = {}", s.algorithm)?;
    writeln!(w, "seed = {}", spec.seed)?;
    writeln!(w, "runs = {}", s.runs)?;
    writeln!(w, "alpha = {}", p.alpha)?;
    writeln!(w, "beta = {}", p.beta)?;
    writeln!(w, "gamma = {}", p.gamma)?;
    writeln!(w, "hello_interval = {}", p.hello_interval)?;
    writeln!(w, "tc_interval = {}", p.tc_interval)?;
    writeln!(w, "d50 = {}", scenario.channel.d50)?;
    writeln!(w, "steepness = {}", scenario.channel.steepness)?;
    writeln!(w, "outage_threshold = {OUTAGE_THRESHOLD}")?;
    writeln!(w, "outage_percent = {}", s.outage_percent)?;
    writeln!(w, "mean_dlr = {}", s.mean_dlr)?;
    writeln!(w, "max_dlr = {}", s.max_dlr)
}
