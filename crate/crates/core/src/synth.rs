//! Synthetic ground-truth mixtures and datasets.
//!
//! Each true component is an Erdős–Rényi DAG over `M` nodes whose intercepts
//! and coefficients are uniform on `(−2, −1) ∪ (1, 2)` and whose variances are
//! uniform on `(0.75, 1.25)`. Covariates of component `k` are `N(μ_k, I)` with
//! the centres `μ_k` forming a regular simplex whose edge length is set by the
//! cluster density.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Dataset};
use crate::error::{Error, Result};
use crate::gbn::{sample_observation, ComponentParams, NodeParams};
use crate::graphs::{random_dag, Dag};
use crate::io::{read_text, write_atomic};

pub const DEFAULT_NODES: usize = 5;
pub const DEFAULT_COVARIATES: usize = 3;

/// Edge probability of the generating graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sparsity {
    /// `p = 0.25`
    Low,
    /// `p = 0.5`
    High,
    /// Each component independently `Low` or `High`.
    Mixed,
}

impl Sparsity {
    fn edge_probability<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Sparsity::Low => 0.25,
            Sparsity::High => 0.5,
            Sparsity::Mixed => {
                if rng.random::<bool>() {
                    0.25
                } else {
                    0.5
                }
            }
        }
    }
}

/// Separation of the covariate clusters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterDensity {
    Sparse,
    Mid,
    Dense,
}

impl ClusterDensity {
    /// Distance between every pair of cluster centres.
    pub fn separation(self) -> f64 {
        match self {
            ClusterDensity::Sparse => 1.0,
            ClusterDensity::Mid => 2.5,
            ClusterDensity::Dense => 4.0,
        }
    }
}

/// How covariates are reported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    #[default]
    Gaussian,
    /// `1[x > 0]` of the Gaussian draw.
    Binary,
}

macro_rules! token_enum {
    ($ty:ty, $field:literal, $($tok:literal => $val:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($tok => Ok($val),)+
                    _ => Err(Error::param(format!(
                        concat!($field, ": unknown value {:?} (expected one of: {})"),
                        s,
                        [$($tok),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let tok = match self {
                    $(v if *v == $val => $tok,)+
                    _ => unreachable!(),
                };
                f.write_str(tok)
            }
        }
    };
}

token_enum!(Sparsity, "sparsity", "low" => Sparsity::Low, "high" => Sparsity::High, "mixed" => Sparsity::Mixed);
token_enum!(ClusterDensity, "cluster density", "sparse" => ClusterDensity::Sparse, "mid" => ClusterDensity::Mid, "dense" => ClusterDensity::Dense);
token_enum!(CovariateKind, "covariates", "gaussian" => CovariateKind::Gaussian, "binary" => CovariateKind::Binary);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthCondition {
    /// Number of true components.
    pub components: usize,
    /// Observations per component.
    pub n_per_component: usize,
    pub sparsity: Sparsity,
    pub density: ClusterDensity,
    pub seed: u64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_covariates")]
    pub covariates: usize,
    #[serde(default)]
    pub covariate_kind: CovariateKind,
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

fn default_covariates() -> usize {
    DEFAULT_COVARIATES
}

impl SynthCondition {
    /// Standard grid cell: 5 nodes, 3 Gaussian covariates.
    pub fn new(
        components: usize,
        n_per_component: usize,
        sparsity: Sparsity,
        density: ClusterDensity,
        seed: u64,
    ) -> Self {
        Self {
            components,
            n_per_component,
            sparsity,
            density,
            seed,
            nodes: DEFAULT_NODES,
            covariates: DEFAULT_COVARIATES,
            covariate_kind: CovariateKind::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::param("components: must be at least 1"));
        }
        if self.n_per_component == 0 {
            return Err(Error::param(
                "observations per component: must be at least 1",
            ));
        }
        if self.nodes == 0 || self.nodes > crate::graphs::MAX_NODES {
            return Err(Error::param(format!(
                "nodes: must be in 1..={}",
                crate::graphs::MAX_NODES
            )));
        }
        if self.components > self.covariates + 1 {
            return Err(Error::param(format!(
                "covariates: {} components need at least {} covariates for equidistant cluster centres",
                self.components,
                self.components - 1
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub condition: SynthCondition,
    pub graphs: Vec<Dag>,
    pub params: Vec<ComponentParams>,
    /// Covariate cluster centre of each component.
    pub centers: Vec<Vec<f64>>,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.graphs.len()
    }
}

/// Vertices of a regular simplex with `k` vertices and edge length `d`,
/// embedded in the first `k − 1` of `p` coordinates.
pub fn simplex_centers(k: usize, p: usize, d: f64) -> Vec<Vec<f64>> {
    // e_i − mean, projected on an orthonormal basis of the sum-zero subspace
    let shifted: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| f64::from(u8::from(i == j)) - 1.0 / k as f64)
                .collect()
        })
        .collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in shifted.iter().take(k.saturating_sub(1)) {
        let mut u = v.clone();
        for b in &basis {
            let dot: f64 = u.iter().zip(b).map(|(a, b)| a * b).sum();
            u.iter_mut().zip(b).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        basis.push(u.into_iter().map(|a| a / norm).collect());
    }
    let scale = d / std::f64::consts::SQRT_2;
    shifted
        .iter()
        .map(|v| {
            let mut c = vec![0.0; p];
            for (slot, b) in c.iter_mut().zip(&basis) {
                *slot = scale * v.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
            }
            c
        })
        .collect()
}

fn signed_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let magnitude = rng.random_range(1.0..2.0);
    if rng.random::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

pub fn generate_model<R: Rng + ?Sized>(cond: &SynthCondition, rng: &mut R) -> Result<GroundTruth> {
    cond.validate()?;
    let mut graphs = Vec::with_capacity(cond.components);
    let mut params = Vec::with_capacity(cond.components);
    for _ in 0..cond.components {
        let p = cond.sparsity.edge_probability(rng);
        let dag = random_dag(cond.nodes, p, rng)?;
        let nodes = (0..cond.nodes)
            .map(|i| {
                let k = dag.parent_mask(i).count_ones() as usize;
                let intercept = signed_uniform(rng);
                let coefs = (0..k).map(|_| signed_uniform(rng)).collect();
                NodeParams::new(intercept, coefs, rng.random_range(0.75..1.25))
            })
            .collect::<Result<Vec<_>>>()?;
        graphs.push(dag);
        params.push(ComponentParams { nodes });
    }
    Ok(GroundTruth {
        condition: cond.clone(),
        graphs,
        params,
        centers: simplex_centers(cond.components, cond.covariates, cond.density.separation()),
    })
}

pub fn generate_dataset<R: Rng + ?Sized>(truth: &GroundTruth, rng: &mut R) -> Result<Dataset> {
    let cond = &truth.condition;
    let n = cond.n_per_component;
    let mut rows: Vec<(Vec<f64>, Vec<f64>, usize)> = Vec::with_capacity(n * truth.k());
    for (k, (g, p)) in truth.graphs.iter().zip(&truth.params).enumerate() {
        for _ in 0..n {
            let x: Vec<f64> = truth.centers[k]
                .iter()
                .map(|mu| {
                    let v = mu + rng.sample::<f64, _>(StandardNormal);
                    match cond.covariate_kind {
                        CovariateKind::Gaussian => v,
                        CovariateKind::Binary => f64::from(u8::from(v > 0.0)),
                    }
                })
                .collect();
            rows.push((sample_observation(g, p, rng), x, k));
        }
    }
    rows.shuffle(rng);
    let total = rows.len();
    let mut y = Vec::with_capacity(total * cond.nodes);
    let mut x = Vec::with_capacity(total * cond.covariates);
    let mut z = Vec::with_capacity(total);
    for (yr, xr, k) in rows {
        y.extend(yr);
        x.extend(xr);
        z.push(k);
    }
    Dataset::new(
        DataMatrix::new(total, cond.nodes, y)?,
        DataMatrix::new(total, cond.covariates, x)?,
        Some(z),
    )
}

/// Model and dataset from the condition's own seed.
pub fn generate(cond: &SynthCondition) -> Result<(GroundTruth, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cond.seed);
    let truth = generate_model(cond, &mut rng)?;
    let data = generate_dataset(&truth, &mut rng)?;
    Ok((truth, data))
}

pub const TRUTH_SCHEMA: &str = "bnmix-truth";
pub const TRUTH_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TruthFile {
    schema: String,
    version: u32,
    condition: SynthCondition,
    graphs: Vec<String>,
    params: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

pub fn truth_to_string(truth: &GroundTruth) -> String {
    let file = TruthFile {
        schema: TRUTH_SCHEMA.into(),
        version: TRUTH_VERSION,
        condition: truth.condition.clone(),
        graphs: truth.graphs.iter().map(Dag::to_bitstring).collect(),
        params: truth.params.iter().map(ComponentParams::to_flat).collect(),
        centers: truth.centers.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("ground truth is finite");
    s.push('\n');
    s
}

pub fn parse_truth(text: &str) -> Result<GroundTruth> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::parse("ground truth", e.to_string()))?;
    if value.get("schema").and_then(|s| s.as_str()) != Some(TRUTH_SCHEMA) {
        return Err(Error::parse("ground truth", "not a ground-truth file"));
    }
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != TRUTH_VERSION {
        return Err(Error::Schema {
            what: "ground truth".into(),
            found: version,
            expected: TRUTH_VERSION,
        });
    }
    let file: TruthFile =
        serde_json::from_value(value).map_err(|e| Error::parse("ground truth", e.to_string()))?;
    if file.graphs.len() != file.params.len() {
        return Err(Error::parse(
            "ground truth",
            "graph and parameter counts differ",
        ));
    }
    let graphs = file
        .graphs
        .iter()
        .map(|s| Dag::from_bitstring(s))
        .collect::<Result<Vec<_>>>()?;
    let params = graphs
        .iter()
        .zip(&file.params)
        .map(|(g, f)| ComponentParams::from_flat(g, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroundTruth {
        condition: file.condition,
        graphs,
        params,
        centers: file.centers,
    })
}

pub fn write_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    write_atomic(path, truth_to_string(truth).as_bytes())
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    parse_truth(&read_text(path)?).map_err(|e| e.context(path.display()))
}
