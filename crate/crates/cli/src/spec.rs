//! Run specification: command-line flags merged over an optional
//! `key = value` config file.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use polsr::scenarios::{Algorithm, Scenario, ScenarioKind};
use polsr::sim::{self, ChannelModel};
use polsr::ProtocolConfig;

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat key=value file; keys are the flag names with `_` for `-`.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// two_relay, open_area or file:<trace.csv>.
    #[arg(long)]
    pub scenario: Option<String>,
    /// olsr_etx or predictive_olsr.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Replications; defaults to 20 for two_relay and 10 otherwise.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Seed of the first replication; later ones add 1 each.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Receiving-ratio aging factor.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Speed weight, s/m.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Relative-speed smoothing factor.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Seconds between Hellos; the neighbor hold time follows at 3x.
    #[arg(long)]
    pub hello_interval: Option<f64>,
    /// Seconds between TCs.
    #[arg(long)]
    pub tc_interval: Option<f64>,
    /// Channel distance of 50% delivery, meters.
    #[arg(long)]
    pub d50: Option<f64>,
    /// Channel steepness, 1/m.
    #[arg(long)]
    pub steepness: Option<f64>,
    /// Where CSVs and summary.txt go; created if missing. Default polsr-out.
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Also write the full per-run event log.
    #[arg(long)]
    pub emit_event_log: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioChoice {
    Builtin(ScenarioKind),
    File(PathBuf),
}

impl ScenarioChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "two_relay" => Ok(ScenarioChoice::Builtin(ScenarioKind::TwoRelay)),
            "open_area" => Ok(ScenarioChoice::Builtin(ScenarioKind::OpenArea)),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(ScenarioChoice::File(PathBuf::from(path))),
                _ => bail!("unknown scenario {s:?}; expected two_relay, open_area or file:<path>"),
            },
        }
    }

    pub fn name(&self) -> String {
        match self {
            ScenarioChoice::Builtin(k) => k.name().to_string(),
            ScenarioChoice::File(p) => format!("file:{}", p.display()),
        }
    }
}

/// Fully resolved and validated run request.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub scenario: ScenarioChoice,
    pub algorithm: Algorithm,
    pub runs: usize,
    pub seed: u64,
    pub protocol: ProtocolConfig,
    pub d50: f64,
    pub steepness: f64,
    pub output_dir: PathBuf,
    pub emit_event_log: bool,
}

const KEYS: &[&str] = &[
    "scenario",
    "algorithm",
    "runs",
    "seed",
    "alpha",
    "beta",
    "gamma",
    "hello_interval",
    "tc_interval",
    "d50",
    "steepness",
    "output_dir",
    "emit_event_log",
];

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got {raw:?}", i + 1);
        };
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            bail!("line {}: unknown key {:?}", i + 1, k.trim());
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

fn from_file<T: std::str::FromStr>(file: &BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    file.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| anyhow::anyhow!("config key {key}: {v:?}: {e}"))
        })
        .transpose()
}

impl RunArgs {
    /// Applies config-file values under the flags, fills defaults and
    /// validates everything before any simulation starts.
    pub fn resolve(&self) -> Result<RunSpec> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                parse_config(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => BTreeMap::new(),
        };
        let pick_str =
            |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.get(key).cloned());

        let scenario = ScenarioChoice::parse(
            &pick_str(&self.scenario, "scenario").unwrap_or("two_relay".into()),
        )?;
        let alg_name = pick_str(&self.algorithm, "algorithm").unwrap_or("predictive_olsr".into());
        let Some(algorithm) = Algorithm::parse(&alg_name) else {
            bail!("unknown algorithm {alg_name:?}; expected olsr_etx or predictive_olsr");
        };
        let default_runs = match &scenario {
            ScenarioChoice::Builtin(k) => k.default_runs(),
            ScenarioChoice::File(_) => 10,
        };
        let runs = self
            .runs
            .map_or_else(|| from_file(&file, "runs"), |v| Ok(Some(v)))?
            .unwrap_or(default_runs);
        if runs == 0 {
            bail!("runs must be at least 1");
        }
        let seed = self
            .seed
            .map_or_else(|| from_file(&file, "seed"), |v| Ok(Some(v)))?
            .unwrap_or(1);

        let num = |flag: Option<f64>, key: &str| -> Result<Option<f64>> {
            flag.map_or_else(|| from_file(&file, key), |v| Ok(Some(v)))
        };
        let mut protocol = algorithm.default_config();
        if let Some(h) = num(self.hello_interval, "hello_interval")? {
            protocol = protocol.with_hello_interval(h);
        }
        if let Some(v) = num(self.tc_interval, "tc_interval")? {
            protocol.tc_interval = v;
        }
        if let Some(v) = num(self.alpha, "alpha")? {
            protocol.alpha = v;
        }
        if let Some(v) = num(self.beta, "beta")? {
            protocol.beta = v;
        }
        if let Some(v) = num(self.gamma, "gamma")? {
            protocol.gamma = v;
        }
        protocol.validate()?;
        let d50 = num(self.d50, "d50")?.unwrap_or(ChannelModel::DEFAULT_D50);
        let steepness =
            num(self.steepness, "steepness")?.unwrap_or(ChannelModel::DEFAULT_STEEPNESS);
        ChannelModel::new(d50, steepness, seed).validate()?;

        let output_dir = self
            .output_dir
            .clone()
            .or_else(|| file.get("output_dir").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("polsr-out"));
        let emit_event_log =
            self.emit_event_log || from_file::<bool>(&file, "emit_event_log")?.unwrap_or(false);

        Ok(RunSpec {
            scenario,
            algorithm,
            runs,
            seed,
            protocol,
            d50,
            steepness,
            output_dir,
            emit_event_log,
        })
    }
}

impl RunSpec {
    /// Scenario of the first replication, with the requested channel.
    pub fn template(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            ScenarioChoice::Builtin(kind) => kind.build(self.protocol.clone(), self.seed),
            ScenarioChoice::File(path) => {
                load_trace_scenario(path, self.protocol.clone(), self.seed)?
            }
        };
        s.channel = ChannelModel::new(self.d50, self.steepness, self.seed);
        s.validate()?;
        Ok(s)
    }
}

/// Same scenario under another seed.
pub fn reseed(template: &Scenario, seed: u64) -> Scenario {
    let mut s = template.clone();
    s.seed = seed;
    s.channel.rng_seed = seed;
    s
}

fn load_trace_scenario(path: &Path, protocol: ProtocolConfig, seed: u64) -> Result<Scenario> {
    let f = fs::File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
    let traces = sim::read_traces(BufReader::new(f))
        .with_context(|| format!("reading trace {}", path.display()))?;
    let name = format!("file:{}", path.display());
    Ok(Scenario::from_traces(
        &name,
        traces,
        protocol,
        ChannelModel::with_seed(seed),
        seed,
    )?)
}
