//! Structure-recovery and predictive metrics, and choosing `K` by held-out LMPPD.

use std::collections::BTreeSet;
use std::time::Instant;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gating::log_sum_exp;
use crate::graphs::{shd, Dag};
use crate::mixture::{mixture_logpdf, run_chain, ChainTrace, FitConfig};

/// Model SHD: the best labelling of fitted against true components.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MshdReport {
    /// `mean_shd[k][j]`: mean SHD between fitted component `k`'s samples and true graph `j`.
    pub mean_shd: Vec<Vec<f64>>,
    /// Every distinct labelling with its summed cost; entry `k` of a labelling is
    /// the true component matched to fitted component `k`, if any.
    pub labellings: Vec<(Vec<Option<usize>>, f64)>,
    pub best: Vec<Option<usize>>,
    pub value: f64,
}

/// Sum over components of the mean SHD between sampled and true graphs,
/// minimised over labellings. With unequal counts, labellings are injections of
/// the smaller set into the larger; an unmatched true component costs its SHD
/// to the empty graph, an unmatched fitted component costs nothing.
pub fn mshd(trace: &ChainTrace, truth: &[Dag]) -> Result<MshdReport> {
    if trace.records.is_empty() {
        return Err(Error::param("MSHD needs a non-empty trace"));
    }
    if truth.is_empty() {
        return Err(Error::param("MSHD needs at least one true graph"));
    }
    let k = trace.k();
    let kt = truth.len();
    let s = trace.records.len() as f64;
    let mut mean_shd = vec![vec![0.0; kt]; k];
    for r in &trace.records {
        for (c, g) in r.graphs.iter().enumerate() {
            for (j, t) in truth.iter().enumerate() {
                mean_shd[c][j] += shd(g, t)? as f64;
            }
        }
    }
    for row in &mut mean_shd {
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    let empty_cost = truth
        .iter()
        .map(|t| Ok(shd(&Dag::empty(t.m())?, t)? as f64))
        .collect::<Result<Vec<_>>>()?;

    let slots = k.max(kt);
    let mut seen = BTreeSet::new();
    let mut labellings = Vec::new();
    for perm in (0..slots).permutations(slots) {
        let mapping: Vec<Option<usize>> =
            (0..k).map(|c| Some(perm[c]).filter(|&j| j < kt)).collect();
        if !seen.insert(mapping.clone()) {
            continue;
        }
        let mut cost = 0.0;
        for j in 0..kt {
            cost += match mapping.iter().position(|&m| m == Some(j)) {
                Some(c) => mean_shd[c][j],
                None => empty_cost[j],
            };
        }
        labellings.push((mapping, cost));
    }
    let (best, value) = labellings
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("at least one labelling");
    Ok(MshdReport {
        mean_shd,
        labellings,
        best,
        value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictiveScore {
    pub total: f64,
    pub per_point: Vec<f64>,
    pub samples: usize,
}

/// `log p(y_n | x_n, θ_s, β_s, G_s)` for every record `s` and point `n`
/// (outer index: point).
fn pointwise_logpdf(data: &Dataset, trace: &ChainTrace) -> Result<Vec<Vec<f64>>> {
    if data.n() > 0 && (data.m() != trace.m() || data.p() != trace.header.p) {
        return Err(Error::param(format!(
            "data has {} features and {} covariates, trace expects {} and {}",
            data.m(),
            data.p(),
            trace.m(),
            trace.header.p
        )));
    }
    (0..data.n())
        .into_par_iter()
        .map(|n| {
            trace
                .records
                .iter()
                .map(|r| {
                    mixture_logpdf(data.y.row(n), data.x.row(n), &r.graphs, &r.params, &r.beta)
                })
                .collect()
        })
        .collect()
}

fn log_mean_exp(v: &[f64]) -> f64 {
    log_sum_exp(v) - (v.len() as f64).ln()
}

/// Log marginal posterior predictive density of `test`: per point, the log of
/// the mixture density averaged over kept sweeps.
pub fn lmppd(test: &Dataset, trace: &ChainTrace) -> Result<PredictiveScore> {
    if test.n() == 0 {
        return Ok(PredictiveScore {
            total: 0.0,
            per_point: Vec::new(),
            samples: trace.records.len(),
        });
    }
    if trace.records.is_empty() {
        return Err(Error::param("LMPPD needs a non-empty trace"));
    }
    let per_point: Vec<f64> = pointwise_logpdf(test, trace)?
        .iter()
        .map(|l| log_mean_exp(l))
        .collect();
    Ok(PredictiveScore {
        total: per_point.iter().sum(),
        per_point,
        samples: trace.records.len(),
    })
}

/// WAIC on the log-density scale, `waic = lppd − p_waic` (larger is better);
/// `deviance = −2 · waic` is the conventional information-criterion scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaicReport {
    pub lppd: f64,
    pub p_waic: f64,
    pub waic: f64,
    pub deviance: f64,
    pub samples: usize,
}

pub fn waic(train: &Dataset, trace: &ChainTrace) -> Result<WaicReport> {
    let s = trace.records.len();
    if s < 2 {
        return Err(Error::param(format!(
            "WAIC needs at least 2 kept sweeps, trace has {s}"
        )));
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for l in pointwise_logpdf(train, trace)? {
        lppd += log_mean_exp(&l);
        let mean = l.iter().sum::<f64>() / s as f64;
        p_waic += l.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
    }
    let waic = lppd - p_waic;
    Ok(WaicReport {
        lppd,
        p_waic,
        waic,
        deviance: -2.0 * waic,
        samples: s,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub k: usize,
    pub lmppd: f64,
    /// Training-set WAIC (`lppd − p_waic`); absent with fewer than two kept sweeps.
    pub waic: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
    pub best_k: usize,
}

impl SelectionTable {
    /// Delimited text `k,lmppd,waic,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,lmppd,waic,seconds\n");
        for r in &self.rows {
            let waic = r.waic.map(|w| w.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{:.3}\n", r.k, r.lmppd, waic, r.seconds));
        }
        out
    }
}

/// Fits one chain per `K` on a random training split and scores the held-out
/// part. The split and every chain are seeded from `base.seed`.
pub fn select_k(
    data: &Dataset,
    k_range: &[usize],
    test_fraction: f64,
    base: &FitConfig,
) -> Result<SelectionTable> {
    if k_range.is_empty() {
        return Err(Error::param("K range is empty"));
    }
    if k_range.contains(&0) {
        return Err(Error::param("K range must not contain 0"));
    }
    for &k in k_range {
        FitConfig { k, ..base.clone() }.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    let (train, test) = data.split(test_fraction, &mut rng)?;
    select_k_on_split(&train, &test, k_range, base)
}

/// As [`select_k`] with an explicit split.
pub fn select_k_on_split(
    train: &Dataset,
    test: &Dataset,
    k_range: &[usize],
    base: &FitConfig,
) -> Result<SelectionTable> {
    if k_range.is_empty() {
        return Err(Error::param("K range is empty"));
    }
    let rows = k_range
        .par_iter()
        .map(|&k| {
            let start = Instant::now();
            let config = FitConfig { k, ..base.clone() };
            let annotate = |e: Error| e.context(format!("K = {k}"));
            let trace = run_chain(train, &config).map_err(annotate)?;
            let score = lmppd(test, &trace).map_err(annotate)?;
            let waic = if trace.records.len() >= 2 {
                Some(waic(train, &trace).map_err(annotate)?.waic)
            } else {
                None
            };
            Ok(SelectionRow {
                k,
                lmppd: score.total,
                waic,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best_k = rows
        .iter()
        .max_by(|a, b| a.lmppd.total_cmp(&b.lmppd))
        .map(|r| r.k)
        .expect("non-empty K range");
    Ok(SelectionTable { rows, best_k })
}
