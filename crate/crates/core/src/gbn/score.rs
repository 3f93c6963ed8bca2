//! Closed-form family marginal likelihood (BGe-family score).
//!
//! For a node regressed on design `X` (intercept column plus parent values) with
//! prior `(m, b) | v ~ N(0, s·v·I)` and `v ~ IG(a0, b0)`:
//!
//! ```text
//! Λn = XᵀX + I/s            an = a0 + n/2
//! μn = Λn⁻¹ Xᵀy             bn = b0 + (yᵀy − μnᵀ Λn μn) / 2
//! log p(y) = −n/2·log 2π + ½(log|I/s| − log|Λn|) + a0·log b0 − an·log bn
//!            + lnΓ(an) − lnΓ(a0)
//! ```
//!
//! With `a0 = (3 + |pa|)/2`, `b0 = 1/2`, `s = 1` the score is equal across
//! Markov-equivalent graphs.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use super::LN_2PI;
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::graphs::{mask_indices, Dag};

/// Normal-inverse-gamma prior of one node family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NigHyper {
    /// Inverse-gamma shape of the conditional variance.
    pub shape: f64,
    /// Inverse-gamma rate of the conditional variance.
    pub rate: f64,
    /// Coefficient prior covariance is `coef_scale · v · I`.
    pub coef_scale: f64,
}

impl NigHyper {
    /// Prior for a node with `n_parents` parents: `IG((3 + |pa|)/2, 1/2)`, unit scale.
    pub fn for_parents(n_parents: usize) -> Self {
        Self {
            shape: (3.0 + n_parents as f64) / 2.0,
            rate: 0.5,
            coef_scale: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.rate > 0.0 && self.coef_scale > 0.0) {
            return Err(Error::param(format!(
                "invalid NIG hyperparameters {self:?}"
            )));
        }
        Ok(())
    }
}

/// Sufficient statistics `(n, XᵀX, Xᵀy, yᵀy)` of one node family.
#[derive(Clone, Debug)]
pub struct FamilyStats {
    pub n: f64,
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
}

/// Conjugate posterior of one family.
pub(crate) struct NigPosterior {
    /// Lower Cholesky factor of the posterior precision `Λn` (per unit variance).
    pub chol_l: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub shape: f64,
    pub rate: f64,
}

impl FamilyStats {
    /// Statistics from a response column and an explicit design matrix.
    pub fn from_design(y: &[f64], design: &DataMatrix) -> Result<Self> {
        if design.rows() != y.len() {
            return Err(Error::param(format!(
                "design has {} rows for {} responses",
                design.rows(),
                y.len()
            )));
        }
        let d = design.cols();
        let mut xtx = DMatrix::zeros(d, d);
        let mut xty = DVector::zeros(d);
        let mut yty = 0.0;
        for (row, &yt) in design.iter_rows().zip(y) {
            for a in 0..d {
                xty[a] += row[a] * yt;
                for b in 0..=a {
                    xtx[(a, b)] += row[a] * row[b];
                }
            }
            yty += yt * yt;
        }
        symmetrize_lower(&mut xtx);
        Ok(Self {
            n: y.len() as f64,
            xtx,
            xty,
            yty,
        })
    }

    pub(crate) fn posterior(&self, hyper: &NigHyper) -> Result<NigPosterior> {
        let d = self.xty.len();
        let mut precision = self.xtx.clone();
        for a in 0..d {
            precision[(a, a)] += 1.0 / hyper.coef_scale;
        }
        let chol = precision
            .cholesky()
            .ok_or_else(|| Error::numeric("posterior precision not positive definite"))?;
        let mean = chol.solve(&self.xty);
        let quad = self.xty.dot(&mean);
        Ok(NigPosterior {
            chol_l: chol.unpack(),
            mean,
            shape: hyper.shape + 0.5 * self.n,
            rate: hyper.rate + 0.5 * (self.yty - quad),
        })
    }

    /// Log marginal likelihood of the family's responses.
    pub fn log_marginal(&self, hyper: &NigHyper) -> Result<f64> {
        hyper.validate()?;
        if self.n == 0.0 {
            return Ok(0.0);
        }
        let d = self.xty.len() as f64;
        let post = self.posterior(hyper)?;
        if post.rate.is_nan() || post.rate <= 0.0 {
            return Err(Error::numeric(format!(
                "posterior inverse-gamma rate {} not positive",
                post.rate
            )));
        }
        let log_det_post: f64 = 2.0 * post.chol_l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let log_det_prior = -d * hyper.coef_scale.ln();
        Ok(-0.5 * self.n * LN_2PI
            + 0.5 * (log_det_prior - log_det_post)
            + hyper.shape * hyper.rate.ln()
            - post.shape * post.rate.ln()
            + ln_gamma(post.shape)
            - ln_gamma(hyper.shape))
    }
}

fn symmetrize_lower(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for a in 0..d {
        for b in 0..a {
            m[(b, a)] = m[(a, b)];
        }
    }
}

/// Log marginal likelihood of `y` under a linear-Gaussian regression on `design`
/// (which must already contain the intercept column), integrated over the
/// normal-inverse-gamma prior. Zero observations give zero.
pub fn node_marginal_loglik(y: &[f64], design: &DataMatrix, hyper: &NigHyper) -> Result<f64> {
    FamilyStats::from_design(y, design)?.log_marginal(hyper)
}

/// Scatter matrix `Σ [1, y][1, y]ᵀ` over a set of rows; index 0 is the intercept,
/// node `i` sits at index `i + 1`. Every family's statistics are sub-blocks of it.
#[derive(Clone, Debug)]
pub struct Scatter {
    m: usize,
    s: DMatrix<f64>,
}

impl Scatter {
    pub fn empty(m: usize) -> Self {
        Self {
            m,
            s: DMatrix::zeros(m + 1, m + 1),
        }
    }

    pub fn from_rows(data: &DataMatrix, rows: &[usize]) -> Self {
        let m = data.cols();
        let mut acc = vec![0.0; (m + 1) * (m + 1)];
        let mut aug = vec![1.0; m + 1];
        for &n in rows {
            aug[1..].copy_from_slice(data.row(n));
            for a in 0..=m {
                let ra = aug[a];
                let dst = &mut acc[a * (m + 1)..a * (m + 1) + a + 1];
                for (slot, &rb) in dst.iter_mut().zip(&aug[..=a]) {
                    *slot += ra * rb;
                }
            }
        }
        let mut s = DMatrix::from_row_slice(m + 1, m + 1, &acc);
        symmetrize_lower(&mut s);
        Self { m, s }
    }

    pub fn from_all(data: &DataMatrix) -> Self {
        let rows: Vec<usize> = (0..data.rows()).collect();
        Self::from_rows(data, &rows)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> f64 {
        self.s[(0, 0)]
    }

    /// Statistics of node `node` regressed on the parents in `parent_mask`.
    pub fn family(&self, node: usize, parent_mask: u64) -> FamilyStats {
        let idx: Vec<usize> = std::iter::once(0)
            .chain(mask_indices(parent_mask).map(|j| j + 1))
            .collect();
        let d = idx.len();
        let xtx = DMatrix::from_fn(d, d, |a, b| self.s[(idx[a], idx[b])]);
        let xty = DVector::from_fn(d, |a, _| self.s[(idx[a], node + 1)]);
        FamilyStats {
            n: self.n(),
            xtx,
            xty,
            yty: self.s[(node + 1, node + 1)],
        }
    }
}

/// Memoized family scores for one row subset.
///
/// Entries are keyed by `(node, parent mask)`; the table is tied to the row set
/// it was built from (see [`ScoreTable::fingerprint`]) and must be rebuilt when
/// that set changes.
#[derive(Clone, Debug)]
pub struct ScoreTable {
    scatter: Scatter,
    fingerprint: u64,
    cache: HashMap<(usize, u64), f64>,
}

/// Order-sensitive hash of a row-index set.
pub fn row_fingerprint(rows: &[usize]) -> u64 {
    let mut h = DefaultHasher::new();
    rows.len().hash(&mut h);
    rows.hash(&mut h);
    h.finish()
}

impl ScoreTable {
    pub fn new(data: &DataMatrix, rows: &[usize]) -> Self {
        Self {
            scatter: Scatter::from_rows(data, rows),
            fingerprint: row_fingerprint(rows),
            cache: HashMap::new(),
        }
    }

    pub fn for_all_rows(data: &DataMatrix) -> Self {
        let rows: Vec<usize> = (0..data.rows()).collect();
        Self::new(data, &rows)
    }

    /// Table for a target with no data: every family scores zero.
    pub fn empty(m: usize) -> Self {
        Self {
            scatter: Scatter::empty(m),
            fingerprint: row_fingerprint(&[]),
            cache: HashMap::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.scatter.m()
    }

    pub fn n(&self) -> f64 {
        self.scatter.n()
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn scatter(&self) -> &Scatter {
        &self.scatter
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.len()
    }

    /// Family score of `node` given `parent_mask`; NaN if the statistics are degenerate.
    pub fn local_score(&mut self, node: usize, parent_mask: u64) -> f64 {
        if let Some(&v) = self.cache.get(&(node, parent_mask)) {
            return v;
        }
        let hyper = NigHyper::for_parents(parent_mask.count_ones() as usize);
        let v = self
            .scatter
            .family(node, parent_mask)
            .log_marginal(&hyper)
            .unwrap_or(f64::NAN);
        self.cache.insert((node, parent_mask), v);
        v
    }

    pub fn dag_score(&mut self, dag: &Dag) -> f64 {
        (0..dag.m())
            .map(|i| self.local_score(i, dag.parent_mask(i)))
            .sum()
    }
}

/// `log p(data | dag)`: the sum of family marginal likelihoods.
pub fn graph_score(dag: &Dag, data: &DataMatrix) -> Result<f64> {
    if data.cols() != dag.m() {
        return Err(Error::param(format!(
            "data has {} columns for a {}-node graph",
            data.cols(),
            dag.m()
        )));
    }
    let scatter = Scatter::from_all(data);
    let mut total = 0.0;
    for i in 0..dag.m() {
        let mask = dag.parent_mask(i);
        let hyper = NigHyper::for_parents(mask.count_ones() as usize);
        total += scatter.family(i, mask).log_marginal(&hyper)?;
    }
    Ok(total)
}
