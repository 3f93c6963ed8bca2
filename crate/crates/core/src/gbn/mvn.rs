use nalgebra::{DMatrix, DVector};

use super::{ComponentParams, LN_2PI};
use crate::error::{Error, Result};
use crate::graphs::{mask_indices, Dag};

/// Joint multivariate normal form `N(mu, precision⁻¹)` of a linear-Gaussian network.
#[derive(Clone, Debug, PartialEq)]
pub struct MvnForm {
    pub mu: DVector<f64>,
    pub precision: DMatrix<f64>,
}

impl MvnForm {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn logpdf(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::param(format!(
                "point of dimension {} for a {}-dimensional normal",
                y.len(),
                self.dim()
            )));
        }
        let chol = self
            .precision
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numeric("precision matrix not positive definite"))?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let r = DVector::from_column_slice(y) - &self.mu;
        let quad = (&self.precision * &r).dot(&r);
        Ok(-0.5 * self.dim() as f64 * LN_2PI + 0.5 * log_det - 0.5 * quad)
    }

    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        self.precision
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::numeric("precision matrix is singular"))
    }
}

/// Joint normal implied by the network: with `B[i][j] = b_{i←j}` and
/// `D = diag(v)`, `mu = (I − B)⁻¹ m` and `precision = (I − B)ᵀ D⁻¹ (I − B)`.
pub fn bn_to_mvn(dag: &Dag, params: &ComponentParams) -> Result<MvnForm> {
    params.check_against(dag)?;
    let m = dag.m();
    let mut i_minus_b = DMatrix::<f64>::identity(m, m);
    for (i, p) in params.nodes.iter().enumerate() {
        for (j, b) in mask_indices(dag.parent_mask(i)).zip(&p.coefs) {
            i_minus_b[(i, j)] = -b;
        }
    }
    let mut mu = DVector::zeros(m);
    for i in dag.topological_order() {
        let p = &params.nodes[i];
        mu[i] = p.intercept
            + mask_indices(dag.parent_mask(i))
                .zip(&p.coefs)
                .map(|(j, b)| b * mu[j])
                .sum::<f64>();
    }
    let inv_var = DMatrix::from_diagonal(&DVector::from_iterator(
        m,
        params.nodes.iter().map(|p| 1.0 / p.variance),
    ));
    let precision = i_minus_b.transpose() * inv_var * &i_minus_b;
    Ok(MvnForm { mu, precision })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gbn::{component_logpdf, NodeParams};
    use crate::graphs::random_dag;

    #[test]
    fn single_node() {
        let dag = Dag::empty(1).unwrap();
        let params = ComponentParams {
            nodes: vec![NodeParams::new(0.0, vec![], 1.0).unwrap()],
        };
        let f = bn_to_mvn(&dag, &params).unwrap();
        assert_eq!(f.mu.as_slice(), &[0.0]);
        assert_eq!(f.precision[(0, 0)], 1.0);
    }

    #[test]
    fn two_node_chain_precision() {
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let params = ComponentParams {
            nodes: vec![
                NodeParams::new(0.0, vec![], 1.0).unwrap(),
                NodeParams::new(0.0, vec![1.0], 1.0).unwrap(),
            ],
        };
        let f = bn_to_mvn(&dag, &params).unwrap();
        assert_eq!(f.mu.as_slice(), &[0.0, 0.0]);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]);
        assert_relative_eq!(f.precision, expected, epsilon = 1e-14);
        let cov = f.covariance().unwrap();
        assert_relative_eq!(
            cov,
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]),
            epsilon = 1e-12
        );
    }

    #[test]
    fn density_equals_factorized_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let dag = random_dag(5, 0.5, &mut rng).unwrap();
            let nodes = (0..5)
                .map(|i| {
                    let k = dag.parent_mask(i).count_ones() as usize;
                    NodeParams::new(
                        rng.random_range(-2.0..2.0),
                        (0..k).map(|_| rng.random_range(-2.0..2.0)).collect(),
                        rng.random_range(0.5..1.5),
                    )
                    .unwrap()
                })
                .collect();
            let params = ComponentParams { nodes };
            let f = bn_to_mvn(&dag, &params).unwrap();
            for _ in 0..100 {
                let y: Vec<f64> = (0..5).map(|_| rng.random_range(-4.0..4.0)).collect();
                let a = f.logpdf(&y).unwrap();
                let b = component_logpdf(&dag, &params, &y);
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_inconsistent_params() {
        let dag = Dag::from_edges(2, &[(0, 1)]).unwrap();
        let params = ComponentParams {
            nodes: vec![
                NodeParams::new(0.0, vec![], 1.0).unwrap(),
                NodeParams::new(0.0, vec![], 1.0).unwrap(),
            ],
        };
        assert!(matches!(bn_to_mvn(&dag, &params), Err(Error::Structure(_))));
    }
}
