//! Linear-Gaussian Bayesian networks.
//!
//! Each node is a linear regression on its parents,
//! `y_i | y_pa ~ N(m_i + b_i · y_pa, v_i)`, so a component is fully described by
//! its [`Dag`] and one [`NodeParams`] per node. The conjugate normal-inverse-gamma
//! node prior gives the closed-form family score in [`score`].

mod mvn;
mod posterior;
pub mod score;

pub use mvn::{bn_to_mvn, MvnForm};
pub use posterior::{sample_observation, sample_posterior_params, sample_posterior_params_from};
pub use score::{graph_score, node_marginal_loglik, FamilyStats, NigHyper, Scatter, ScoreTable};

use crate::error::{Error, Result};
use crate::graphs::{mask_indices, Dag};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Intercept, parent coefficients (ascending parent index) and conditional variance.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeParams {
    pub intercept: f64,
    pub coefs: Vec<f64>,
    pub variance: f64,
}

impl NodeParams {
    pub fn new(intercept: f64, coefs: Vec<f64>, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::param(format!(
                "conditional variance must be positive and finite, got {variance}"
            )));
        }
        Ok(Self {
            intercept,
            coefs,
            variance,
        })
    }

    #[inline]
    fn mean_from_row(&self, parent_mask: u64, row: &[f64]) -> f64 {
        self.intercept
            + mask_indices(parent_mask)
                .zip(&self.coefs)
                .map(|(j, b)| b * row[j])
                .sum::<f64>()
    }
}

/// Log-density of one node given its parent values.
pub fn node_logpdf(y: f64, parent_values: &[f64], params: &NodeParams) -> Result<f64> {
    if parent_values.len() != params.coefs.len() {
        return Err(Error::param(format!(
            "{} parent values for {} coefficients",
            parent_values.len(),
            params.coefs.len()
        )));
    }
    if params.variance.is_nan() || params.variance <= 0.0 {
        return Err(Error::param(format!(
            "conditional variance must be positive, got {}",
            params.variance
        )));
    }
    let mean = params.intercept
        + parent_values
            .iter()
            .zip(&params.coefs)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    Ok(gaussian_logpdf(y, mean, params.variance))
}

#[inline]
pub(crate) fn gaussian_logpdf(y: f64, mean: f64, variance: f64) -> f64 {
    let r = y - mean;
    -0.5 * (LN_2PI + variance.ln()) - 0.5 * r * r / variance
}

/// Parameters of every node of one mixture component.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentParams {
    pub nodes: Vec<NodeParams>,
}

impl ComponentParams {
    /// Checks node count and per-node coefficient counts against `dag`.
    pub fn check_against(&self, dag: &Dag) -> Result<()> {
        if self.nodes.len() != dag.m() {
            return Err(Error::Structure(format!(
                "{} node parameter sets for a {}-node graph",
                self.nodes.len(),
                dag.m()
            )));
        }
        for (i, p) in self.nodes.iter().enumerate() {
            let k = dag.parent_mask(i).count_ones() as usize;
            if p.coefs.len() != k {
                return Err(Error::Structure(format!(
                    "node {i} has {k} parents but {} coefficients",
                    p.coefs.len()
                )));
            }
            if p.variance.is_nan() || p.variance <= 0.0 {
                return Err(Error::param(format!(
                    "node {i} variance {} not positive",
                    p.variance
                )));
            }
        }
        Ok(())
    }

    /// Flattened `[m, b.., v]` per node in node order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.nodes {
            out.push(p.intercept);
            out.extend_from_slice(&p.coefs);
            out.push(p.variance);
        }
        out
    }

    pub fn from_flat(dag: &Dag, flat: &[f64]) -> Result<Self> {
        let mut nodes = Vec::with_capacity(dag.m());
        let mut pos = 0;
        for i in 0..dag.m() {
            let k = dag.parent_mask(i).count_ones() as usize;
            let chunk = flat.get(pos..pos + k + 2).ok_or_else(|| {
                Error::parse(
                    "parameter array",
                    format!("too short for node {i} ({} values)", flat.len()),
                )
            })?;
            nodes.push(NodeParams::new(
                chunk[0],
                chunk[1..=k].to_vec(),
                chunk[k + 1],
            )?);
            pos += k + 2;
        }
        if pos != flat.len() {
            return Err(Error::parse(
                "parameter array",
                format!("{} trailing values", flat.len() - pos),
            ));
        }
        Ok(Self { nodes })
    }
}

/// Joint log-density of a full observation: the sum of node log-densities.
///
/// Assumes `params` was checked against `dag`.
pub fn component_logpdf(dag: &Dag, params: &ComponentParams, y: &[f64]) -> f64 {
    params
        .nodes
        .iter()
        .enumerate()
        .map(|(i, p)| gaussian_logpdf(y[i], p.mean_from_row(dag.parent_mask(i), y), p.variance))
        .sum()
}
