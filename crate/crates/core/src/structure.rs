//! Sampling DAGs from `p(G | data) ∝ exp(graph score)` under a uniform graph prior.
//!
//! The sampler is Metropolis–Hastings over single-edge moves. A move type is
//! chosen with the configured probabilities, then a candidate uniformly among
//! that type's candidates: additions range over all non-adjacent ordered pairs,
//! deletions and reversals over existing edges. Proposals that would close a
//! cycle are rejected. The Hastings factor is the ratio of candidate counts in
//! the two directions, which makes the chain exact for the target.

use std::collections::HashMap;

use rand::Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gbn::ScoreTable;
use crate::graphs::{bit, enumerate_dags, Dag};

#[derive(Clone, Debug, PartialEq)]
pub struct StructureSamplerConfig {
    pub p_add: f64,
    pub p_delete: f64,
    pub p_reverse: f64,
    /// Moves per component per Gibbs sweep.
    pub moves_per_sweep: usize,
}

impl Default for StructureSamplerConfig {
    fn default() -> Self {
        Self {
            p_add: 0.4,
            p_delete: 0.4,
            p_reverse: 0.2,
            moves_per_sweep: 50,
        }
    }
}

impl StructureSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let ps = [self.p_add, self.p_delete, self.p_reverse];
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::param(format!(
                "move probabilities must lie in [0, 1]: {ps:?}"
            )));
        }
        if (ps.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!(
                "move probabilities must sum to 1: {ps:?}"
            )));
        }
        if self.p_add == 0.0 || self.p_delete == 0.0 {
            return Err(Error::param(
                "addition and deletion moves both need positive probability",
            ));
        }
        if self.moves_per_sweep == 0 {
            return Err(Error::param("moves per sweep must be at least 1"));
        }
        Ok(())
    }
}

/// Number of labelled DAGs on `m` nodes (Robinson's recurrence), as `f64`.
pub fn dag_count(m: usize) -> f64 {
    let mut a = vec![1.0f64; m + 1];
    for n in 1..=m {
        let mut total = 0.0;
        let mut binom = 1.0;
        for k in 1..=n {
            binom *= (n - k + 1) as f64 / k as f64;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * binom * 2f64.powi((k * (n - k)) as i32) * a[n - k];
        }
        a[n] = total;
    }
    a[m]
}

/// Posterior over graphs for one data subset: uniform prior times the score.
#[derive(Clone, Debug)]
pub struct GraphPosteriorTarget {
    table: ScoreTable,
}

impl GraphPosteriorTarget {
    pub fn new(data: &DataMatrix, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&n| n >= data.rows()) {
            return Err(Error::param(format!(
                "row index {bad} out of range for {} rows",
                data.rows()
            )));
        }
        Ok(Self {
            table: ScoreTable::new(data, rows),
        })
    }

    pub fn from_data(data: &DataMatrix) -> Self {
        Self {
            table: ScoreTable::for_all_rows(data),
        }
    }

    /// Target without data: the uniform prior over DAGs.
    pub fn prior_only(m: usize) -> Self {
        Self {
            table: ScoreTable::empty(m),
        }
    }

    pub fn from_table(table: ScoreTable) -> Self {
        Self { table }
    }

    pub fn m(&self) -> usize {
        self.table.m()
    }

    pub fn table(&self) -> &ScoreTable {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut ScoreTable {
        &mut self.table
    }

    pub fn into_table(self) -> ScoreTable {
        self.table
    }

    /// `log p(data | G)`; the uniform prior `−ln N_G` is a constant and omitted.
    pub fn log_score(&mut self, dag: &Dag) -> f64 {
        self.table.dag_score(dag)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: MoveStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }
}

/// A graph together with its incrementally maintained score.
#[derive(Clone, Debug)]
pub struct StructureChain {
    dag: Dag,
    score: f64,
    pub stats: MoveStats,
}

impl StructureChain {
    pub fn new(dag: Dag, target: &mut GraphPosteriorTarget) -> Result<Self> {
        if dag.m() != target.m() {
            return Err(Error::param(format!(
                "{}-node graph for a {}-node target",
                dag.m(),
                target.m()
            )));
        }
        let score = target.log_score(&dag);
        Ok(Self {
            dag,
            score,
            stats: MoveStats::default(),
        })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn into_dag(self) -> Dag {
        self.dag
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// One Metropolis–Hastings move; returns whether it was accepted.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        target: &mut GraphPosteriorTarget,
        config: &StructureSamplerConfig,
        rng: &mut R,
    ) -> bool {
        self.stats.proposed += 1;
        let Some(proposal) = propose(&self.dag, config, rng) else {
            return false;
        };
        let table = target.table_mut();
        let mut delta = 0.0;
        for &(node, new_mask) in proposal.changed() {
            delta += table.local_score(node, new_mask)
                - table.local_score(node, self.dag.parent_mask(node));
        }
        let log_ratio = delta + proposal.log_hastings;
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            for &(node, new_mask) in proposal.changed() {
                self.dag.set_parent_mask_unchecked(node, new_mask);
            }
            self.score += delta;
            self.stats.accepted += 1;
            true
        } else {
            false
        }
    }
}

struct Proposal {
    changes: [(usize, u64); 2],
    n_changes: usize,
    log_hastings: f64,
}

impl Proposal {
    fn changed(&self) -> &[(usize, u64)] {
        &self.changes[..self.n_changes]
    }
}

fn propose<R: Rng + ?Sized>(
    dag: &Dag,
    config: &StructureSamplerConfig,
    rng: &mut R,
) -> Option<Proposal> {
    let m = dag.m();
    let n_edges = dag.edge_count();
    let n_free = m * (m - 1) - 2 * n_edges;
    let u = rng.random::<f64>();
    if u < config.p_add {
        if n_free == 0 {
            return None;
        }
        let mut r = rng.random_range(0..n_free);
        let (from, to) = (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && !dag.adjacent(a, b))
            .find(|_| {
                let hit = r == 0;
                r = r.wrapping_sub(1);
                hit
            })?;
        if dag.reaches(to, from) {
            return None;
        }
        Some(Proposal {
            changes: [(to, dag.parent_mask(to) | bit(from)), (0, 0)],
            n_changes: 1,
            log_hastings: (config.p_delete / (n_edges + 1) as f64).ln()
                - (config.p_add / n_free as f64).ln(),
        })
    } else {
        if n_edges == 0 {
            return None;
        }
        let (from, to) = dag.edges()[rng.random_range(0..n_edges)];
        if u < config.p_add + config.p_delete {
            Some(Proposal {
                changes: [(to, dag.parent_mask(to) & !bit(from)), (0, 0)],
                n_changes: 1,
                log_hastings: (config.p_add / (n_free + 2) as f64).ln()
                    - (config.p_delete / n_edges as f64).ln(),
            })
        } else {
            let mut reversed = dag.clone();
            if !reversed.try_reverse_edge(from, to) {
                return None;
            }
            Some(Proposal {
                changes: [
                    (to, reversed.parent_mask(to)),
                    (from, reversed.parent_mask(from)),
                ],
                n_changes: 2,
                log_hastings: 0.0,
            })
        }
    }
}

/// One move from `current`; a rejected or invalid proposal returns `current`.
pub fn structure_mcmc_step<R: Rng + ?Sized>(
    current: &Dag,
    target: &mut GraphPosteriorTarget,
    config: &StructureSamplerConfig,
    rng: &mut R,
) -> Result<Dag> {
    let mut chain = StructureChain::new(current.clone(), target)?;
    chain.step(target, config, rng);
    Ok(chain.into_dag())
}

/// Runs `config.moves_per_sweep` moves starting from `current`.
pub fn sample_graph<R: Rng + ?Sized>(
    current: Dag,
    target: &mut GraphPosteriorTarget,
    config: &StructureSamplerConfig,
    rng: &mut R,
) -> Result<(Dag, MoveStats)> {
    let mut chain = StructureChain::new(current, target)?;
    for _ in 0..config.moves_per_sweep {
        chain.step(target, config, rng);
    }
    let stats = chain.stats;
    Ok((chain.into_dag(), stats))
}

/// Graph update for component `k`: structure moves against the rows with `z == k`.
/// A component without rows samples from the uniform prior.
pub fn sample_graph_given_assignments<R: Rng + ?Sized>(
    k: usize,
    assignments: &[usize],
    data: &DataMatrix,
    current: Dag,
    config: &StructureSamplerConfig,
    rng: &mut R,
) -> Result<Dag> {
    if assignments.len() != data.rows() {
        return Err(Error::param(format!(
            "{} assignments for {} rows",
            assignments.len(),
            data.rows()
        )));
    }
    let rows: Vec<usize> = (0..assignments.len())
        .filter(|&n| assignments[n] == k)
        .collect();
    let mut target = GraphPosteriorTarget::new(data, &rows)?;
    Ok(sample_graph(current, &mut target, config, rng)?.0)
}

/// Exact posterior over every DAG on up to five nodes.
pub fn exact_graph_posterior(target: &mut GraphPosteriorTarget) -> Result<Vec<(Dag, f64)>> {
    let m = target.m();
    if m > 5 {
        return Err(Error::param(format!(
            "exact enumeration is limited to 5 nodes, target has {m}"
        )));
    }
    let dags = enumerate_dags(m)?;
    let scores: Vec<f64> = dags.iter().map(|g| target.log_score(g)).collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::numeric("graph scores are not finite"));
    }
    let weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(dags
        .into_iter()
        .zip(weights.into_iter().map(|w| w / total))
        .collect())
}

/// Total-variation distance between an exact distribution and empirical counts.
pub fn total_variation(exact: &[(Dag, f64)], counts: &HashMap<Dag, u64>) -> f64 {
    let total: u64 = counts.values().sum();
    let mut tv = 0.0;
    for (g, p) in exact {
        let q = *counts.get(g).unwrap_or(&0) as f64 / total as f64;
        tv += (p - q).abs();
    }
    // mass on graphs outside `exact` (should not happen)
    let covered: u64 = exact
        .iter()
        .map(|(g, _)| *counts.get(g).unwrap_or(&0))
        .sum();
    tv += (total - covered) as f64 / total as f64;
    0.5 * tv
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::gbn::{graph_score, sample_observation, ComponentParams, NodeParams};

    fn chain_data(n: usize, seed: u64) -> DataMatrix {
        let dag = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let params = ComponentParams {
            nodes: vec![
                NodeParams::new(0.5, vec![], 1.0).unwrap(),
                NodeParams::new(-1.0, vec![1.5], 1.0).unwrap(),
                NodeParams::new(1.0, vec![-1.2], 1.0).unwrap(),
            ],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| sample_observation(&dag, &params, &mut rng))
            .collect();
        DataMatrix::from_rows(3, &rows).unwrap()
    }

    fn run_counts(
        target: &mut GraphPosteriorTarget,
        steps: usize,
        thin: usize,
        seed: u64,
    ) -> HashMap<Dag, u64> {
        let config = StructureSamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chain = StructureChain::new(Dag::empty(target.m()).unwrap(), target).unwrap();
        let mut counts = HashMap::new();
        for t in 0..steps {
            chain.step(target, &config, &mut rng);
            if t % thin == 0 {
                *counts.entry(chain.dag().clone()).or_insert(0) += 1;
            }
        }
        counts
    }

    #[test]
    fn dag_counts_follow_recurrence() {
        let counts: Vec<f64> = (1..=6).map(dag_count).collect();
        assert_eq!(counts, vec![1.0, 3.0, 25.0, 543.0, 29281.0, 3_781_503.0]);
    }

    #[test]
    fn config_validation() {
        assert!(StructureSamplerConfig::default().validate().is_ok());
        let c = StructureSamplerConfig {
            p_add: 0.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = StructureSamplerConfig {
            p_add: 0.0,
            p_delete: 0.5,
            p_reverse: 0.5,
            moves_per_sweep: 1,
        };
        assert!(c.validate().is_err());
        let c = StructureSamplerConfig {
            moves_per_sweep: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn exact_posterior_prior_only() {
        let mut t = GraphPosteriorTarget::prior_only(2);
        let post = exact_graph_posterior(&mut t).unwrap();
        assert_eq!(post.len(), 3);
        for (_, p) in &post {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        let mut big = GraphPosteriorTarget::prior_only(6);
        assert!(exact_graph_posterior(&mut big).is_err());
    }

    #[test]
    fn exact_posterior_correlated_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| {
                let a: f64 = rng.sample(rand_distr::StandardNormal);
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                vec![a, 2.0 * a + 0.3 * e]
            })
            .collect();
        let data = DataMatrix::from_rows(2, &rows).unwrap();
        let mut t = GraphPosteriorTarget::from_data(&data);
        let post = exact_graph_posterior(&mut t).unwrap();
        let total: f64 = post.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let p = |edges: &[(usize, usize)]| {
            let g = Dag::from_edges(2, edges).unwrap();
            post.iter().find(|(d, _)| *d == g).unwrap().1
        };
        assert!((p(&[(0, 1)]) - p(&[(1, 0)])).abs() < 1e-9);
        assert!(p(&[(0, 1)]) > 0.49 && p(&[]) < 0.02);
    }

    #[test]
    fn cycle_creating_reversal_is_rejected() {
        // 0->1->2 and 0->2: reversing 0->2 would close 2->0->1->2.
        let start = Dag::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let config = StructureSamplerConfig {
            p_add: 0.01,
            p_delete: 0.01,
            p_reverse: 0.98,
            moves_per_sweep: 1,
        };
        let mut target = GraphPosteriorTarget::prior_only(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut saw_reject = false;
        for _ in 0..200 {
            let mut g = start.clone();
            g.remove_edge(0, 2);
            let closes = g.reaches(0, 2);
            let next = structure_mcmc_step(&start, &mut target, &config, &mut rng).unwrap();
            if next.has_edge(2, 0) {
                assert!(!closes);
            }
            if next == start {
                saw_reject = true;
            }
            assert!(crate::graphs::Dag::from_parent_masks(next.parent_masks().to_vec()).is_ok());
        }
        assert!(saw_reject);
    }

    #[test]
    fn incremental_score_matches_full_rescore() {
        let data = chain_data(40, 1);
        let mut target = GraphPosteriorTarget::from_data(&data);
        let mut chain = StructureChain::new(Dag::empty(3).unwrap(), &mut target).unwrap();
        let config = StructureSamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..2000 {
            if chain.step(&mut target, &config, &mut rng) {
                let full = graph_score(chain.dag(), &data).unwrap();
                assert!((full - chain.score()).abs() < 1e-8);
            }
        }
        assert!(chain.stats.accepted > 0);
    }

    #[test]
    fn prior_only_chain_is_uniform() {
        let mut target = GraphPosteriorTarget::prior_only(3);
        let counts = run_counts(&mut target, 1_000_000, 1, 4);
        let exact = exact_graph_posterior(&mut target).unwrap();
        let tv = total_variation(&exact, &counts);
        assert!(tv < 0.02, "tv {tv}");
    }

    #[test]
    fn chain_data_matches_enumeration() {
        let data = chain_data(200, 5);
        let mut target = GraphPosteriorTarget::from_data(&data);
        let counts = run_counts(&mut target, 500_000, 5, 6);
        let exact = exact_graph_posterior(&mut target).unwrap();
        let tv = total_variation(&exact, &counts);
        assert!(tv < 0.05, "tv {tv}");
        // most mass sits on the three members of the chain's equivalence class
        let class = crate::graphs::to_cpdag(&Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap());
        let mass: f64 = exact
            .iter()
            .filter(|(g, _)| crate::graphs::to_cpdag(g) == class)
            .map(|(_, p)| p)
            .sum();
        assert!(mass > 0.5, "class mass {mass}");
    }

    #[test]
    fn detailed_balance_flux_prior_only() {
        let mut target = GraphPosteriorTarget::prior_only(3);
        let config = StructureSamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut chain = StructureChain::new(Dag::empty(3).unwrap(), &mut target).unwrap();
        let mut flux: HashMap<(Dag, Dag), u64> = HashMap::new();
        for _ in 0..1_000_000 {
            let before = chain.dag().clone();
            if chain.step(&mut target, &config, &mut rng) {
                *flux.entry((before, chain.dag().clone())).or_insert(0) += 1;
            }
        }
        let mut checked = 0;
        for ((a, b), &f_ab) in &flux {
            let f_ba = *flux.get(&(b.clone(), a.clone())).unwrap_or(&0);
            let total = (f_ab + f_ba) as f64;
            if total < 2000.0 {
                continue;
            }
            // under balance f_ab ~ Binomial(total, 1/2)
            let z = (f_ab as f64 - total / 2.0) / (total / 4.0).sqrt();
            assert!(z.abs() < 4.5, "{a:?} -> {b:?}: {f_ab} vs {f_ba}");
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn assignments_restrict_rows_and_seed_reproduces() {
        let data = chain_data(50, 9);
        let z: Vec<usize> = (0..50).map(|n| n % 2).collect();
        let config = StructureSamplerConfig::default();
        let a = sample_graph_given_assignments(
            1,
            &z,
            &data,
            Dag::empty(3).unwrap(),
            &config,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let b = sample_graph_given_assignments(
            1,
            &z,
            &data,
            Dag::empty(3).unwrap(),
            &config,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(sample_graph_given_assignments(
            0,
            &z[..10],
            &data,
            a,
            &config,
            &mut ChaCha8Rng::seed_from_u64(1)
        )
        .is_err());
    }
}
