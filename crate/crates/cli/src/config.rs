//! Command options. Every option can come from a flag or from the matching
//! section of a TOML config file; flags win.

use std::path::{Path, PathBuf};

use bnmix::io::DatasetLayout;
use bnmix::mixture::{AssignmentLikelihood, FitConfig};
use bnmix::{Error, Result};
use clap::Args;
use serde::Deserialize;

/// Sections of a config file, one per subcommand.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub generate: GenerateOpts,
    pub fit: FitOpts,
    pub select: SelectOpts,
    pub evaluate: EvaluateOpts,
    pub summarize: SummarizeOpts,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&bnmix::io::read_text(path)?).map_err(|e| e.context(path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            location: "config".into(),
            message,
        };
        let table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        for (section, value) in &table {
            let known = match section.as_str() {
                "generate" => option_names::<GenerateOpts>(),
                "fit" => option_names::<FitOpts>(),
                "select" => option_names::<SelectOpts>(),
                "evaluate" => option_names::<EvaluateOpts>(),
                "summarize" => option_names::<SummarizeOpts>(),
                _ => return Err(parse_err(format!("unknown section [{section}]"))),
            };
            let keys = value
                .as_table()
                .ok_or_else(|| parse_err(format!("[{section}] must be a table")))?;
            if let Some(key) = keys.keys().find(|k| !known.contains(k)) {
                return Err(parse_err(format!("[{section}]: unknown key {key:?}")));
            }
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| parse_err(e.to_string()))
    }
}

fn option_names<T: Args>() -> Vec<String> {
    T::augment_args(clap::Command::new("config"))
        .get_arguments()
        .map(|a| a.get_id().to_string())
        .collect()
}

macro_rules! overlay {
    ($ty:ident { $($nested:ident),* } $($field:ident),+) => {
        impl $ty {
            /// Fills every unset option from `file`.
            pub fn overlay(self, file: $ty) -> $ty {
                $ty {
                    $($nested: self.$nested.overlay(file.$nested),)*
                    $($field: self.$field.or(file.$field),)+
                }
            }
        }
    };
}

pub fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::Parameter(format!(
            "{name}: required (flag --{} or config file)",
            name.replace('_', "-")
        ))
    })
}

/// Input files must exist; output files must sit in an existing directory.
pub fn check_input(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{what}: no such file"),
            ),
        })
    }
}

pub fn check_output(path: &Path, what: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if path.is_dir() {
        return Err(Error::Parameter(format!(
            "{what}: {} is a directory",
            path.display()
        )));
    }
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{what}: directory {} does not exist", dir.display()),
            ),
        })
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct LayoutOpts {
    /// Number of modifiable (y) columns, which come first.
    #[arg(long)]
    pub modifiable: Option<usize>,
    /// Number of covariate (x) columns, which follow the y columns.
    #[arg(long)]
    pub covariates: Option<usize>,
    /// The last column holds 1-based true labels.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub labels: Option<bool>,
}

overlay!(LayoutOpts {} modifiable, covariates, labels);

impl LayoutOpts {
    pub fn resolve(&self) -> Result<DatasetLayout> {
        Ok(DatasetLayout {
            modifiable: required(self.modifiable, "modifiable")?,
            covariates: self.covariates.unwrap_or(0),
            labels: self.labels.unwrap_or(false),
        })
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct ChainOpts {
    /// Gibbs sweeps.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Sweeps discarded before recording (default: half of the sweeps).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Keep every `thin`-th sweep after burn-in.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Prior variance of the gating coefficients.
    #[arg(long, visible_alias = "c")]
    pub gate_prior_var: Option<f64>,
    /// Structure moves per component per sweep.
    #[arg(long)]
    pub moves_per_sweep: Option<usize>,
    /// Likelihood used to resample assignments: conditional or prior-marginal.
    #[arg(long)]
    pub likelihood: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

overlay!(ChainOpts {} iterations, burn_in, thin, gate_prior_var, moves_per_sweep, likelihood, seed);

fn parse_likelihood(s: &str) -> Result<AssignmentLikelihood> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "conditional" | "conditional-params" => Ok(AssignmentLikelihood::ConditionalParams),
        "prior-marginal" => Ok(AssignmentLikelihood::PriorMarginal),
        _ => Err(Error::Parameter(format!(
            "likelihood: unknown value {s:?} (expected one of: conditional, prior-marginal)"
        ))),
    }
}

impl ChainOpts {
    pub fn resolve(&self, k: usize) -> Result<FitConfig> {
        let mut config = FitConfig::new(
            k,
            required(self.iterations, "iterations")?,
            required(self.seed, "seed")?,
        );
        config.burn_in = self.burn_in;
        if let Some(t) = self.thin {
            config.thin = t;
        }
        if let Some(c) = self.gate_prior_var {
            config.gate_prior_var = c;
        }
        if let Some(m) = self.moves_per_sweep {
            config.structure.moves_per_sweep = m;
        }
        if let Some(l) = &self.likelihood {
            config.likelihood = parse_likelihood(l)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct GenerateOpts {
    /// Number of true components.
    #[arg(long)]
    pub components: Option<usize>,
    /// Observations per component.
    #[arg(long)]
    pub per_component: Option<usize>,
    /// Edge probability class: low, high or mixed.
    #[arg(long)]
    pub sparsity: Option<String>,
    /// Covariate cluster separation: sparse, mid or dense.
    #[arg(long)]
    pub density: Option<String>,
    /// Modifiable features per observation (default 5).
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Covariates per observation (default 3).
    #[arg(long)]
    pub covariates: Option<usize>,
    /// Covariate kind: gaussian or binary.
    #[arg(long)]
    pub covariate_kind: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Ground-truth output path.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

overlay!(GenerateOpts {} components, per_component, sparsity, density, nodes, covariates, covariate_kind, seed, out, truth);

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct FitOpts {
    /// Dataset to fit.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub layout: LayoutOpts,
    /// Number of mixture components.
    #[arg(short, long)]
    pub k: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainOpts,
    /// Trace output path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Summary output path (default: standard output).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

overlay!(FitOpts { layout, chain } data, k, trace, summary);

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct SelectOpts {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub layout: LayoutOpts,
    /// Candidate K values, as `1..5`, `1-5` or `1,2,4`.
    #[arg(long)]
    pub k_range: Option<String>,
    /// Share of rows held out for scoring.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Score on this dataset instead of a random split.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainOpts,
    /// Table output path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

overlay!(SelectOpts { layout, chain } data, k_range, test_fraction, test_data, out);

pub fn parse_k_range(s: &str) -> Result<Vec<usize>> {
    let bad = || {
        Error::Parameter(format!(
            "k_range: cannot read {s:?} (expected `1..5`, `1-5` or `1,2,4`)"
        ))
    };
    let s = s.trim();
    let range = s
        .split_once("..=")
        .or_else(|| s.split_once(".."))
        .or_else(|| s.split_once('-'));
    let ks: Vec<usize> = match range {
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            (a..=b).collect()
        }
        None => s
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?,
    };
    if ks.is_empty() {
        return Err(Error::Parameter(format!("k_range: {s:?} is empty")));
    }
    if ks.contains(&0) {
        return Err(Error::Parameter("k_range: K must be at least 1".into()));
    }
    Ok(ks)
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct EvaluateOpts {
    /// Trace to evaluate.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Ground-truth file; enables MSHD.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Held-out dataset; enables LMPPD.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Training dataset; enables WAIC.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Dataset files end with a label column.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub labels: Option<bool>,
    /// Report output path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

overlay!(EvaluateOpts {} trace, truth, test_data, data, labels, out);

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default)]
pub struct SummarizeOpts {
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Summary output path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

overlay!(SummarizeOpts {} trace, out);
