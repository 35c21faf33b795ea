//! Run configuration: an optional TOML file overridden by command-line
//! flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tablelogit_core::inference::Resampling;
use tablelogit_core::selection::Criterion;
use tablelogit_core::simulation::{StudyMethod, SyntheticSpec};
use tablelogit_core::{MarginalTarget, OptimizerSettings};

use crate::dataset::{resolve, toml_error};
use crate::error::{CliError, Result};

pub const DEFAULT_IMPUTATIONS: usize = 5;
pub const DEFAULT_BOOTSTRAP: usize = 1000;

fn parse_criterion(s: &str) -> std::result::Result<Criterion, String> {
    match s.to_ascii_lowercase().as_str() {
        "aic" => Ok(Criterion::Aic),
        "bic" => Ok(Criterion::Bic),
        _ => Err(format!("unknown criterion `{s}` (expected aic or bic)")),
    }
}

/// Flags shared by the pipeline commands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunFlags {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Individual-level CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Manifest describing the CSV columns.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Contingency table file; repeat for several tables.
    #[arg(long = "table")]
    pub tables: Vec<PathBuf>,
    /// Marginal rate P(Y = 1) used to calibrate the intercept.
    #[arg(long)]
    pub p1: Option<f64>,
    /// Model covariates (fit, predict, bootstrap) or candidates (select).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long, value_parser = parse_criterion)]
    pub criterion: Option<Criterion>,
    /// Number of imputations when model covariates have missing values.
    #[arg(long)]
    pub imputations: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grouping schemes to aggregate over (default: all in the manifest).
    #[arg(long, value_delimiter = ',')]
    pub groups: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub replicates: usize,
    /// (m1, m0) of every generated table.
    pub label_totals: (f64, f64),
    pub truth_covariates: Vec<String>,
    pub truth_slopes: Vec<f64>,
    pub methods: Vec<StudyMethod>,
    /// Population used when no dataset is given.
    pub synthetic: SyntheticSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            replicates: 200,
            label_totals: (994.0, 3739.0),
            truth_covariates: vec!["ODn".into()],
            truth_slopes: vec![-1.0],
            methods: vec![
                StudyMethod::Proposed {
                    covariates: vec!["ODn".into()],
                },
                StudyMethod::AlternativeCategorical,
            ],
            synthetic: SyntheticSpec {
                n: 2000,
                missing_cd4: 0,
                ..SyntheticSpec::default()
            },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    data: Option<PathBuf>,
    manifest: Option<PathBuf>,
    #[serde(default)]
    tables: Vec<PathBuf>,
    p1: Option<f64>,
    #[serde(default)]
    covariates: Vec<String>,
    criterion: Option<Criterion>,
    imputations: Option<usize>,
    bootstrap: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    groups: Vec<String>,
    level: Option<f64>,
    optimizer: Option<OptimizerSettings>,
    resampling: Option<Resampling>,
    simulate: Option<SimulateConfig>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub data: Option<PathBuf>,
    #[serde(skip)]
    pub manifest: Option<PathBuf>,
    #[serde(skip)]
    pub tables: Vec<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    pub p1: Option<f64>,
    pub covariates: Vec<String>,
    pub criterion: Criterion,
    pub imputations: usize,
    pub bootstrap: Option<usize>,
    pub seed: u64,
    pub groups: Vec<String>,
    pub level: f64,
    pub optimizer: OptimizerSettings,
    pub resampling: Resampling,
    pub simulate: SimulateConfig,
}

impl RunConfig {
    pub fn resolve(flags: &RunFlags) -> Result<Self> {
        let (file, base) = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let file: ConfigFile = toml::from_str(&text).map_err(|e| toml_error(path, &text, &e))?;
                (file, path.parent().map(Path::to_path_buf))
            }
            None => (ConfigFile::default(), None),
        };
        let base = base.as_deref();
        let pick_path = |flag: &Option<PathBuf>, file: Option<PathBuf>| {
            flag.clone().or_else(|| file.map(|p| resolve(base, &p)))
        };
        let pick_list = |flag: &[String], file: Vec<String>| if flag.is_empty() { file } else { flag.to_vec() };
        let tables = if flags.tables.is_empty() {
            file.tables.iter().map(|p| resolve(base, p)).collect()
        } else {
            flags.tables.clone()
        };
        let cfg = RunConfig {
            data: pick_path(&flags.data, file.data),
            manifest: pick_path(&flags.manifest, file.manifest),
            tables,
            out: pick_path(&flags.out, file.out).unwrap_or_else(|| PathBuf::from("out")),
            p1: flags.p1.or(file.p1),
            covariates: pick_list(&flags.covariates, file.covariates),
            criterion: flags.criterion.or(file.criterion).unwrap_or_default(),
            imputations: flags.imputations.or(file.imputations).unwrap_or(DEFAULT_IMPUTATIONS),
            bootstrap: flags.bootstrap.or(file.bootstrap),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            groups: pick_list(&flags.groups, file.groups),
            level: file.level.unwrap_or(0.95),
            optimizer: file.optimizer.unwrap_or_default(),
            resampling: file.resampling.unwrap_or_default(),
            simulate: file.simulate.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(p1) = self.p1 {
            MarginalTarget::new(p1).map_err(|_| CliError::Config(format!("p1 = {p1} is outside (0, 1)")))?;
        }
        if self.imputations == 0 {
            return Err(CliError::Config("imputations must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!("level = {} is outside (0, 1)", self.level)));
        }
        self.optimizer.validate()?;
        for p in self.inputs() {
            if !p.is_file() {
                return Err(CliError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Every input file, in a fixed order.
    pub fn inputs(&self) -> Vec<&Path> {
        self.data
            .iter()
            .chain(&self.manifest)
            .chain(&self.tables)
            .map(PathBuf::as_path)
            .collect()
    }

    pub fn target(&self) -> Result<MarginalTarget> {
        let p1 = self.p1.ok_or_else(|| CliError::Config("--p1 is required".into()))?;
        Ok(MarginalTarget::new(p1)?)
    }

    pub fn require_data(&self) -> Result<(&Path, &Path)> {
        match (&self.data, &self.manifest) {
            (Some(d), Some(m)) => Ok((d, m)),
            _ => Err(CliError::Config("--data and --manifest are required".into())),
        }
    }

    pub fn require_tables(&self) -> Result<&[PathBuf]> {
        if self.tables.is_empty() {
            Err(CliError::Config("at least one --table is required".into()))
        } else {
            Ok(&self.tables)
        }
    }

    /// SHA-256 over the command, the resolved settings (without paths) and
    /// the bytes of every input file.
    pub fn hash(&self, command: &str) -> Result<String> {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(self).expect("config serializes"));
        for p in self.inputs() {
            let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}
