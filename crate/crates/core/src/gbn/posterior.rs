use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::score::{NigHyper, Scatter};
use super::{ComponentParams, NodeParams};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graphs::{mask_indices, Dag};

/// Ancestral draw of one observation.
pub fn sample_observation<R: Rng + ?Sized>(
    dag: &Dag,
    params: &ComponentParams,
    rng: &mut R,
) -> Vec<f64> {
    let mut y = vec![0.0; dag.m()];
    for i in dag.topological_order() {
        let p = &params.nodes[i];
        let mean = p.intercept
            + mask_indices(dag.parent_mask(i))
                .zip(&p.coefs)
                .map(|(j, b)| b * y[j])
                .sum::<f64>();
        let eps: f64 = rng.sample(StandardNormal);
        y[i] = mean + p.variance.sqrt() * eps;
    }
    y
}

/// Draws `(m, b, v)` for every node from the exact normal-inverse-gamma posterior
/// given the rows of `data` (all rows; pass a subset to condition on fewer).
/// With no rows this is a prior draw.
pub fn sample_posterior_params<R: Rng + ?Sized>(
    dag: &Dag,
    data: &DataMatrix,
    rng: &mut R,
) -> Result<ComponentParams> {
    if data.cols() != dag.m() {
        return Err(Error::param(format!(
            "data has {} columns for a {}-node graph",
            data.cols(),
            dag.m()
        )));
    }
    sample_posterior_params_from(dag, &Scatter::from_all(data), rng)
}

pub fn sample_posterior_params_from<R: Rng + ?Sized>(
    dag: &Dag,
    scatter: &Scatter,
    rng: &mut R,
) -> Result<ComponentParams> {
    if scatter.m() != dag.m() {
        return Err(Error::param("scatter and graph node counts differ"));
    }
    let mut nodes = Vec::with_capacity(dag.m());
    for i in 0..dag.m() {
        let mask = dag.parent_mask(i);
        let hyper = NigHyper::for_parents(mask.count_ones() as usize);
        let post = scatter.family(i, mask).posterior(&hyper)?;
        // v ~ IG(shape, rate)  <=>  1/v ~ Gamma(shape, scale = 1/rate)
        let precision = Gamma::new(post.shape, 1.0 / post.rate)
            .map_err(|e| Error::numeric(format!("node {i}: {e}")))?
            .sample(rng);
        let variance = 1.0 / precision;
        if !variance.is_finite() || variance <= 0.0 {
            return Err(Error::numeric(format!(
                "node {i}: variance draw {variance}"
            )));
        }
        // w ~ N(mean, v Λ⁻¹) with Λ = L Lᵀ: w = mean + sqrt(v) L⁻ᵀ ξ
        let d = post.mean.len();
        let xi = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let offset = post
            .chol_l
            .transpose()
            .solve_upper_triangular(&xi)
            .ok_or_else(|| Error::numeric(format!("node {i}: singular Cholesky factor")))?;
        let w = &post.mean + offset * variance.sqrt();
        nodes.push(NodeParams {
            intercept: w[0],
            coefs: w.iter().skip(1).copied().collect(),
            variance,
        });
    }
    Ok(ComponentParams { nodes })
}
