//! Block Gibbs sampler over assignments, gating coefficients and component graphs.
//!
//! One sweep runs, in order:
//!
//! 1. `z | β, G, θ` from `π_k(x_n) · p(y_n | G_k, θ_k)`;
//! 2. `β | z` by Pólya-Gamma augmentation;
//! 3. `G_k | z` by structure MCMC against the rows currently assigned to `k`
//!    (parameters integrated out);
//! 4. `θ_k | G_k, z` from the exact conjugate posterior.
//!
//! The `θ_k` drawn at the end of a sweep drive the next sweep's assignment
//! update and are the parameter draws stored in the trace for predictive
//! evaluation. [`AssignmentLikelihood::PriorMarginal`] replaces step 1's
//! likelihood by the single-observation prior predictive `p(y_n | G_k)`.

mod trace;

pub use trace::{
    edge_frequencies, parse_trace, read_trace, trace_to_string, write_trace, ChainTrace,
    TraceHeader, TraceRecord, TRACE_SCHEMA, TRACE_VERSION,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Dataset};
use crate::error::{Error, Result};
use crate::gating::{
    gate_log_prior, gate_loglik, log_mixing_probs, log_sum_exp, update_assignments, update_gating,
    Assignments, GatingCoefficients,
};
use crate::gbn::{component_logpdf, sample_posterior_params_from, ComponentParams, ScoreTable};
use crate::graphs::Dag;
use crate::structure::{sample_graph, GraphPosteriorTarget, MoveStats, StructureSamplerConfig};

/// Likelihood term used when resampling assignments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentLikelihood {
    /// `p(y_n | G_k, θ_k)` with `θ_k` from the previous sweep's posterior draw.
    #[default]
    ConditionalParams,
    /// `p(y_n | G_k)`, parameters integrated against their prior.
    PriorMarginal,
}

/// Optional starting values; anything left `None` gets the default start
/// (uniform random labels, zero gate, empty graphs).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Init {
    pub assignments: Option<Assignments>,
    pub beta: Option<GatingCoefficients>,
    pub graphs: Option<Vec<Dag>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub k: usize,
    pub iterations: usize,
    /// Defaults to `iterations / 2`.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub structure: StructureSamplerConfig,
    /// Prior variance `c` of every free gating coefficient.
    pub gate_prior_var: f64,
    pub seed: u64,
    pub likelihood: AssignmentLikelihood,
    pub init: Init,
}

impl FitConfig {
    pub fn new(k: usize, iterations: usize, seed: u64) -> Self {
        Self {
            k,
            iterations,
            burn_in: None,
            thin: 5,
            structure: StructureSamplerConfig::default(),
            gate_prior_var: 100.0,
            seed,
            likelihood: AssignmentLikelihood::default(),
            init: Init::default(),
        }
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 2)
    }

    pub fn expected_records(&self) -> usize {
        (self.iterations - self.burn_in()) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("K must be at least 1"));
        }
        if self.burn_in() > self.iterations {
            return Err(Error::param(format!(
                "burn-in {} exceeds {} iterations",
                self.burn_in(),
                self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::param("thinning interval must be at least 1"));
        }
        if !(self.gate_prior_var > 0.0 && self.gate_prior_var.is_finite()) {
            return Err(Error::param(format!(
                "gating prior variance must be positive, got {}",
                self.gate_prior_var
            )));
        }
        self.structure.validate()
    }

    fn keeps(&self, t: usize) -> bool {
        let b = self.burn_in();
        t > b && (t - b).is_multiple_of(self.thin)
    }
}

/// Full sampler state after a sweep.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub iteration: usize,
    pub z: Assignments,
    pub beta: GatingCoefficients,
    pub graphs: Vec<Dag>,
    pub params: Vec<ComponentParams>,
    /// `N × K` assignment log-likelihoods for the current graphs and parameters.
    pub loglik: DataMatrix,
    /// Joint log-score of `(z, β, G)`.
    pub log_score: f64,
    pub move_stats: Vec<MoveStats>,
}

impl ChainState {
    pub fn k(&self) -> usize {
        self.graphs.len()
    }

    /// Initial state at iteration 0.
    pub fn initialize<R: Rng + ?Sized>(
        data: &Dataset,
        config: &FitConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        check_data(data)?;
        let (k, n, m) = (config.k, data.n(), data.m());
        let z = match &config.init.assignments {
            Some(z) => {
                if z.len() != n || z.labels().iter().any(|&l| l >= k) {
                    return Err(Error::param(
                        "initial assignments do not match the data and K",
                    ));
                }
                z.clone()
            }
            None => Assignments((0..n).map(|_| rng.random_range(0..k)).collect()),
        };
        let beta = match &config.init.beta {
            Some(b) => {
                if b.k() != k || b.p() != data.p() {
                    return Err(Error::param(
                        "initial gating coefficients have the wrong shape",
                    ));
                }
                b.clone()
            }
            None => GatingCoefficients::zeros(k, data.p())?,
        };
        let graphs = match &config.init.graphs {
            Some(g) => {
                if g.len() != k || g.iter().any(|d| d.m() != m) {
                    return Err(Error::param(
                        "initial graphs do not match K and the node count",
                    ));
                }
                g.clone()
            }
            None => vec![Dag::empty(m)?; k],
        };
        let mut state = Self {
            iteration: 0,
            z,
            beta,
            graphs,
            params: Vec::with_capacity(k),
            loglik: DataMatrix::zeros(n, k),
            log_score: 0.0,
            move_stats: vec![MoveStats::default(); k],
        };
        let mut component_score = 0.0;
        for c in 0..k {
            let mut table = ScoreTable::new(&data.y, &state.z.rows_of(c));
            component_score += table.dag_score(&state.graphs[c]);
            state.params.push(sample_posterior_params_from(
                &state.graphs[c],
                table.scatter(),
                rng,
            )?);
        }
        state.refresh_loglik(data, config.likelihood)?;
        state.log_score = gate_loglik(&state.beta, &data.x, &state.z)?
            + gate_log_prior(&state.beta, config.gate_prior_var)
            + component_score;
        Ok(state)
    }

    fn refresh_loglik(&mut self, data: &Dataset, mode: AssignmentLikelihood) -> Result<()> {
        let k = self.k();
        let (graphs, params) = (&self.graphs, &self.params);
        let values: Vec<f64> = match mode {
            AssignmentLikelihood::ConditionalParams => (0..data.n())
                .into_par_iter()
                .flat_map_iter(|n| {
                    let y = data.y.row(n);
                    (0..k).map(move |c| component_logpdf(&graphs[c], &params[c], y))
                })
                .collect(),
            AssignmentLikelihood::PriorMarginal => (0..data.n())
                .into_par_iter()
                .flat_map_iter(|n| {
                    let mut table = ScoreTable::new(&data.y, &[n]);
                    (0..k)
                        .map(|c| table.dag_score(&graphs[c]))
                        .collect::<Vec<_>>()
                })
                .collect(),
        };
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "observation {}: component {} log-likelihood {}",
                pos / k,
                pos % k,
                values[pos]
            )));
        }
        self.loglik = DataMatrix::new(data.n(), k, values)?;
        Ok(())
    }
}

fn check_data(data: &Dataset) -> Result<()> {
    if data.n() == 0 {
        return Err(Error::param("dataset has no rows"));
    }
    if data.m() == 0 {
        return Err(Error::param("dataset has no modifiable features"));
    }
    if data
        .y
        .as_slice()
        .iter()
        .chain(data.x.as_slice())
        .any(|v| !v.is_finite())
    {
        return Err(Error::param("dataset contains non-finite values"));
    }
    Ok(())
}

struct ComponentUpdate {
    dag: Dag,
    params: ComponentParams,
    stats: MoveStats,
    score: f64,
}

/// One full sweep; the successor state has `iteration + 1`.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &ChainState,
    data: &Dataset,
    config: &FitConfig,
    rng: &mut R,
) -> Result<ChainState> {
    let t = state.iteration + 1;
    let k = state.k();
    let sweep = |e: Error| e.context(format!("sweep {t}"));

    let mut weights = state.loglik.clone();
    for n in 0..data.n() {
        let log_pi = log_mixing_probs(&state.beta, data.x.row(n)).map_err(sweep)?;
        for (w, lp) in weights.row_mut(n).iter_mut().zip(log_pi) {
            *w += lp;
        }
    }
    let z = update_assignments(&weights, rng).map_err(sweep)?;
    let beta =
        update_gating(&state.beta, &data.x, &z, config.gate_prior_var, rng).map_err(sweep)?;

    let seeds: Vec<u64> = (0..k).map(|_| rng.random()).collect();
    let updates: Vec<Result<ComponentUpdate>> = (0..k)
        .into_par_iter()
        .map(|c| {
            let mut crng = ChaCha8Rng::seed_from_u64(seeds[c]);
            let mut target = GraphPosteriorTarget::new(&data.y, &z.rows_of(c))?;
            let (dag, stats) = sample_graph(
                state.graphs[c].clone(),
                &mut target,
                &config.structure,
                &mut crng,
            )?;
            let score = target.log_score(&dag);
            let params = sample_posterior_params_from(&dag, target.table().scatter(), &mut crng)?;
            Ok(ComponentUpdate {
                dag,
                params,
                stats,
                score,
            })
        })
        .collect();

    let mut next = ChainState {
        iteration: t,
        z,
        beta,
        graphs: Vec::with_capacity(k),
        params: Vec::with_capacity(k),
        loglik: DataMatrix::zeros(0, k),
        log_score: 0.0,
        move_stats: state.move_stats.clone(),
    };
    let mut component_score = 0.0;
    for (c, u) in updates.into_iter().enumerate() {
        let u = u.map_err(|e| sweep(e.context(format!("component {}", c + 1))))?;
        next.graphs.push(u.dag);
        next.params.push(u.params);
        next.move_stats[c].merge(u.stats);
        component_score += u.score;
    }
    next.refresh_loglik(data, config.likelihood)
        .map_err(sweep)?;
    next.log_score = gate_loglik(&next.beta, &data.x, &next.z).map_err(sweep)?
        + gate_log_prior(&next.beta, config.gate_prior_var)
        + component_score;
    if !next.log_score.is_finite() {
        return Err(Error::numeric(format!(
            "sweep {t}: joint log-score is {}",
            next.log_score
        )));
    }
    Ok(next)
}

/// Runs the chain; `observer` sees every state after its sweep.
pub fn run_chain_with<F: FnMut(&ChainState)>(
    data: &Dataset,
    config: &FitConfig,
    mut observer: F,
) -> Result<ChainTrace> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = ChainState::initialize(data, config, &mut rng)?;
    let mut trace = ChainTrace::new(TraceHeader::for_fit(data, config));
    for _ in 0..config.iterations {
        state = gibbs_sweep(&state, data, config, &mut rng)?;
        trace.log_scores.push(state.log_score);
        if config.keeps(state.iteration) {
            trace.records.push(TraceRecord::from_state(&state));
        }
        observer(&state);
    }
    trace.acceptance = state.move_stats.clone();
    Ok(trace)
}

pub fn run_chain(data: &Dataset, config: &FitConfig) -> Result<ChainTrace> {
    run_chain_with(data, config, |s| {
        if s.iteration % 500 == 0 {
            log::info!("sweep {}: joint log-score {:.3}", s.iteration, s.log_score);
        }
    })
}

/// Joint log-score of `(z, β, G)` with component parameters integrated out:
/// `Σ_n log π_{z_n}(x_n) + Σ_k log p(Y_k | G_k) + log p(β)`.
pub fn joint_log_score(
    data: &Dataset,
    z: &Assignments,
    beta: &GatingCoefficients,
    graphs: &[Dag],
    gate_prior_var: f64,
) -> Result<f64> {
    if graphs.len() != beta.k() {
        return Err(Error::param(format!(
            "{} graphs for K = {}",
            graphs.len(),
            beta.k()
        )));
    }
    let mut total = gate_loglik(beta, &data.x, z)? + gate_log_prior(beta, gate_prior_var);
    for (c, g) in graphs.iter().enumerate() {
        total += ScoreTable::new(&data.y, &z.rows_of(c)).dag_score(g);
    }
    Ok(total)
}

/// `log Σ_k π_k(x) p(y | G_k, θ_k)`.
pub fn mixture_logpdf(
    y: &[f64],
    x: &[f64],
    graphs: &[Dag],
    params: &[ComponentParams],
    beta: &GatingCoefficients,
) -> Result<f64> {
    if graphs.len() != beta.k() || params.len() != beta.k() {
        return Err(Error::param(format!(
            "{} graphs and {} parameter sets for K = {}",
            graphs.len(),
            params.len(),
            beta.k()
        )));
    }
    let log_pi = log_mixing_probs(beta, x)?;
    let mut terms = Vec::with_capacity(beta.k());
    for (c, (g, p)) in graphs.iter().zip(params).enumerate() {
        if g.m() != y.len() {
            return Err(Error::param(format!(
                "point of dimension {} for a {}-node component",
                y.len(),
                g.m()
            )));
        }
        p.check_against(g)
            .map_err(|e| e.context(format!("component {}", c + 1)))?;
        terms.push(log_pi[c] + component_logpdf(g, p, y));
    }
    Ok(log_sum_exp(&terms))
}
