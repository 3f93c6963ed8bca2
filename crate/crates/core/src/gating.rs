//! Multinomial-logistic gate `π_k(x) ∝ exp(x̃ · β_k)` with `β_K = 0`, and its
//! Pólya-Gamma data-augmentation update.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// `K × (P + 1)` gating coefficients, intercept first; the last row is pinned at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GatingCoefficients {
    k: usize,
    p: usize,
    values: Vec<f64>,
}

impl GatingCoefficients {
    pub fn zeros(k: usize, p: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("number of components must be at least 1"));
        }
        Ok(Self {
            k,
            p,
            values: vec![0.0; k * (p + 1)],
        })
    }

    /// Builds from row-major values; the reference row must be exactly zero.
    pub fn from_values(k: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || values.len() != k * (p + 1) {
            return Err(Error::param(format!(
                "{} gating values for K = {k}, P = {p}",
                values.len()
            )));
        }
        if values[(k - 1) * (p + 1)..].iter().any(|&b| b != 0.0) {
            return Err(Error::param("reference gating row must be zero"));
        }
        if values.iter().any(|b| !b.is_finite()) {
            return Err(Error::numeric("non-finite gating coefficient"));
        }
        Ok(Self { k, p, values })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * (self.p + 1)..(k + 1) * (self.p + 1)]
    }

    fn set_row(&mut self, k: usize, beta: &[f64]) {
        let w = self.p + 1;
        self.values[k * w..(k + 1) * w].copy_from_slice(beta);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// `x̃ · β_k` for covariates `x` (without the leading one).
    pub fn logit(&self, k: usize, x: &[f64]) -> f64 {
        let b = self.row(k);
        b[0] + b[1..].iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k).map(|k| self.logit(k, x)).collect()
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + v.iter().map(|a| (a - max).exp()).sum::<f64>().ln()
}

/// `log π_k(x)` for every component.
pub fn log_mixing_probs(beta: &GatingCoefficients, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != beta.p() {
        return Err(Error::param(format!(
            "{} covariates for a gate over {}",
            x.len(),
            beta.p()
        )));
    }
    let logits = beta.logits(x);
    let norm = log_sum_exp(&logits);
    Ok(logits.into_iter().map(|l| l - norm).collect())
}

pub fn mixing_probs(beta: &GatingCoefficients, x: &[f64]) -> Result<Vec<f64>> {
    Ok(log_mixing_probs(beta, x)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Component labels, 0-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignments(pub Vec<usize>);

impl Assignments {
    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut c = vec![0; k];
        for &z in &self.0 {
            c[z] += 1;
        }
        c
    }

    pub fn rows_of(&self, k: usize) -> Vec<usize> {
        (0..self.0.len()).filter(|&n| self.0[n] == k).collect()
    }
}

/// Draws each `z_n` from the normalised `exp(log_weights[n, ·])`.
pub fn update_assignments<R: Rng + ?Sized>(
    log_weights: &DataMatrix,
    rng: &mut R,
) -> Result<Assignments> {
    let mut z = Vec::with_capacity(log_weights.rows());
    for n in 0..log_weights.rows() {
        let w = log_weights.row(n);
        if w.iter().any(|a| a.is_nan() || *a == f64::INFINITY) {
            return Err(Error::numeric(format!(
                "observation {n}: assignment weights {w:?}"
            )));
        }
        let norm = log_sum_exp(w);
        if !norm.is_finite() {
            return Err(Error::numeric(format!(
                "observation {n}: all assignment weights are zero"
            )));
        }
        let mut u = rng.random::<f64>();
        let mut pick = w.len() - 1;
        for (k, a) in w.iter().enumerate() {
            u -= (a - norm).exp();
            if u < 0.0 {
                pick = k;
                break;
            }
        }
        z.push(pick);
    }
    Ok(Assignments(z))
}

const PG_TRUNC: f64 = 0.64;

fn ln_std_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / SQRT_2)).ln()
    } else {
        // Mills-ratio expansion of the far left tail
        let x2 = x * x;
        -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Coefficient of the alternating-series representation of the `J*(1, z)` density.
fn pg_series_coef(n: usize, x: f64) -> f64 {
    let k = n as f64 + 0.5;
    if x <= PG_TRUNC {
        PI * k * (FRAC_2_PI / x).powf(1.5) * (-2.0 * k * k / x).exp()
    } else {
        PI * k * (-0.5 * k * k * PI * PI * x).exp()
    }
}

/// Inverse-Gaussian `IG(1/z, 1)` truncated to `(0, t)`.
fn truncated_inverse_gaussian<R: Rng + ?Sized>(z: f64, t: f64, rng: &mut R) -> f64 {
    let mu = if z > 0.0 { 1.0 / z } else { f64::INFINITY };
    if mu > t {
        loop {
            let x = loop {
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                if e1 * e1 <= 2.0 * e2 / t {
                    break t / ((1.0 + t * e1) * (1.0 + t * e1));
                }
            };
            if rng.random::<f64>() <= (-0.5 * z * z * x).exp() {
                return x;
            }
        }
    } else {
        loop {
            let n: f64 = rng.sample(StandardNormal);
            let y = n * n;
            let mut x =
                mu + 0.5 * mu * mu * y - 0.5 * mu * (4.0 * mu * y + (mu * y).powi(2)).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x <= t {
                return x;
            }
        }
    }
}

/// Exact draw from the Pólya-Gamma distribution `PG(1, c)` (Devroye's method).
pub fn pg_sample<R: Rng + ?Sized>(c: f64, rng: &mut R) -> f64 {
    let z = 0.5 * c.abs();
    let t = PG_TRUNC;
    let k = PI * PI / 8.0 + 0.5 * z * z;
    // proposal mixture: exponential tail right of t, inverse Gaussian left of t
    let log_p = (PI / (2.0 * k)).ln() - k * t;
    let r = (1.0 / t).sqrt();
    let log_q = 2f64.ln()
        + log_sum_exp(&[
            -z + ln_std_normal_cdf(r * (t * z - 1.0)),
            z + ln_std_normal_cdf(-r * (t * z + 1.0)),
        ]);
    let p_exp = 1.0 / (1.0 + (log_q - log_p).exp());
    loop {
        let x = if rng.random::<f64>() < p_exp {
            t + rng.sample::<f64, _>(Exp1) / k
        } else {
            truncated_inverse_gaussian(z, t, rng)
        };
        let mut s = pg_series_coef(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= pg_series_coef(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += pg_series_coef(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Gibbs update of every free gating row given labels `z`, one row at a time,
/// under the prior `β_k ~ N(0, prior_var · I)`.
pub fn update_gating<R: Rng + ?Sized>(
    beta: &GatingCoefficients,
    x: &DataMatrix,
    z: &Assignments,
    prior_var: f64,
    rng: &mut R,
) -> Result<GatingCoefficients> {
    if x.rows() != z.len() {
        return Err(Error::param(format!(
            "{} covariate rows for {} labels",
            x.rows(),
            z.len()
        )));
    }
    if x.cols() != beta.p() {
        return Err(Error::param(format!(
            "{} covariates for a gate over {}",
            x.cols(),
            beta.p()
        )));
    }
    if !(prior_var > 0.0 && prior_var.is_finite()) {
        return Err(Error::param(format!(
            "gating prior variance must be positive, got {prior_var}"
        )));
    }
    if let Some(&bad) = z.labels().iter().find(|&&l| l >= beta.k()) {
        return Err(Error::param(format!(
            "label {bad} out of range for K = {}",
            beta.k()
        )));
    }
    let mut beta = beta.clone();
    let n = x.rows();
    let d = beta.p() + 1;
    let design = DMatrix::from_fn(n, d, |r, c| if c == 0 { 1.0 } else { x.get(r, c - 1) });
    for k in 0..beta.k() - 1 {
        let mut omega = DVector::zeros(n);
        let mut offsets = DVector::zeros(n);
        for r in 0..n {
            let mut logits = beta.logits(x.row(r));
            let eta = logits[k];
            logits.remove(k);
            let c = log_sum_exp(&logits);
            offsets[r] = c;
            omega[r] = pg_sample(eta - c, rng);
        }
        let kappa = DVector::from_fn(n, |r, _| if z.labels()[r] == k { 0.5 } else { -0.5 });
        let weighted = DMatrix::from_fn(n, d, |r, c| design[(r, c)] * omega[r]);
        let precision = design.transpose() * weighted + DMatrix::identity(d, d) / prior_var;
        let rhs = design.transpose() * (kappa + omega.component_mul(&offsets));
        let chol = precision.cholesky().ok_or_else(|| {
            Error::numeric(format!("gating row {k}: precision not positive definite"))
        })?;
        let mean = chol.solve(&rhs);
        let xi = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let offset = chol
            .l()
            .transpose()
            .solve_upper_triangular(&xi)
            .ok_or_else(|| Error::numeric(format!("gating row {k}: singular factor")))?;
        let draw = mean + offset;
        if draw.iter().any(|b| !b.is_finite()) {
            return Err(Error::numeric(format!("gating row {k}: non-finite draw")));
        }
        beta.set_row(k, draw.as_slice());
    }
    Ok(beta)
}

/// `Σ_n log π_{z_n}(x_n)`.
pub fn gate_loglik(beta: &GatingCoefficients, x: &DataMatrix, z: &Assignments) -> Result<f64> {
    let mut total = 0.0;
    for (r, &k) in z.labels().iter().enumerate() {
        total += log_mixing_probs(beta, x.row(r))?[k];
    }
    Ok(total)
}

/// `Σ_k log N(β_k; 0, prior_var · I)` over the free rows.
pub fn gate_log_prior(beta: &GatingCoefficients, prior_var: f64) -> f64 {
    let d = (beta.p() + 1) as f64;
    (0..beta.k() - 1)
        .map(|k| {
            let ss: f64 = beta.row(k).iter().map(|b| b * b).sum();
            -0.5 * d * (2.0 * PI * prior_var).ln() - 0.5 * ss / prior_var
        })
        .sum()
}
