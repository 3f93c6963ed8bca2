//! Markov equivalence classes and structural Hamming distance.

use super::dag::{bit, mask_indices, Dag};
use crate::error::{Error, Result};

/// Completed partially directed acyclic graph.
///
/// `directed[i]` holds the parents of `i` along compelled edges; `undirected[i]`
/// holds the neighbours of `i` along reversible edges (stored symmetrically).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Cpdag {
    directed: Vec<u64>,
    undirected: Vec<u64>,
}

/// Relation between an unordered node pair `(a, b)` with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairState {
    Absent,
    /// `a -> b`
    Forward,
    /// `b -> a`
    Backward,
    Undirected,
}

impl Cpdag {
    pub fn m(&self) -> usize {
        self.directed.len()
    }

    pub fn pair_state(&self, a: usize, b: usize) -> PairState {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if self.undirected[lo] & bit(hi) != 0 {
            PairState::Undirected
        } else if self.directed[hi] & bit(lo) != 0 {
            PairState::Forward
        } else if self.directed[lo] & bit(hi) != 0 {
            PairState::Backward
        } else {
            PairState::Absent
        }
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.directed
            .iter()
            .enumerate()
            .flat_map(|(i, &pa)| mask_indices(pa).map(move |j| (j, i)))
            .collect()
    }

    /// Undirected edges as `(a, b)` with `a < b`.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.undirected
            .iter()
            .enumerate()
            .flat_map(|(a, &nb)| {
                mask_indices(nb)
                    .filter(move |&b| b > a)
                    .map(move |b| (a, b))
            })
            .collect()
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.pair_state(a, b) != PairState::Absent
    }

    fn orient(&mut self, from: usize, to: usize) {
        self.undirected[from] &= !bit(to);
        self.undirected[to] &= !bit(from);
        self.directed[to] |= bit(from);
    }

    fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected[a] & bit(b) != 0
    }

    fn is_directed(&self, from: usize, to: usize) -> bool {
        self.directed[to] & bit(from) != 0
    }
}

/// Equivalence-class completion: keep v-structures directed, then close under
/// Meek's orientation rules R1–R3.
pub fn to_cpdag(dag: &Dag) -> Cpdag {
    let m = dag.m();
    let directed = vec![0u64; m];
    let mut undirected = vec![0u64; m];
    for (j, i) in dag.edges() {
        undirected[i] |= bit(j);
        undirected[j] |= bit(i);
    }
    let mut g = Cpdag {
        directed,
        undirected,
    };

    for c in 0..m {
        let pa: Vec<usize> = mask_indices(dag.parent_mask(c)).collect();
        for (x, &a) in pa.iter().enumerate() {
            for &b in &pa[x + 1..] {
                if !dag.adjacent(a, b) {
                    g.orient(a, c);
                    g.orient(b, c);
                }
            }
        }
    }

    loop {
        let mut changed = false;
        for a in 0..m {
            for b in 0..m {
                if a == b || !g.is_undirected(a, b) {
                    continue;
                }
                if meek_orients(&g, a, b) {
                    g.orient(a, b);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    g
}

/// Whether one of R1–R3 forces the undirected edge `a - b` to become `a -> b`.
fn meek_orients(g: &Cpdag, a: usize, b: usize) -> bool {
    let m = g.m();
    // R1: c -> a - b with c, b non-adjacent.
    for c in mask_indices(g.directed[a]) {
        if c != b && !g.adjacent(c, b) {
            return true;
        }
    }
    // R2: a -> c -> b.
    for c in 0..m {
        if g.is_directed(a, c) && g.is_directed(c, b) {
            return true;
        }
    }
    // R3: a - c -> b and a - d -> b with c, d non-adjacent.
    let cands: Vec<usize> = mask_indices(g.undirected[a])
        .filter(|&c| c != b && g.is_directed(c, b))
        .collect();
    for (x, &c) in cands.iter().enumerate() {
        for &d in &cands[x + 1..] {
            if !g.adjacent(c, d) {
                return true;
            }
        }
    }
    false
}

/// Structural Hamming distance between the CPDAGs of two DAGs.
///
/// Each node pair whose relation differs (absent/present, opposite direction,
/// directed vs undirected) costs one.
pub fn shd(a: &Dag, b: &Dag) -> Result<usize> {
    if a.m() != b.m() {
        return Err(Error::param(format!(
            "shd: node counts differ ({} vs {})",
            a.m(),
            b.m()
        )));
    }
    Ok(shd_cpdag(&to_cpdag(a), &to_cpdag(b)))
}

pub fn shd_cpdag(a: &Cpdag, b: &Cpdag) -> usize {
    assert_eq!(a.m(), b.m(), "shd_cpdag: node count mismatch");
    let m = a.m();
    let mut d = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            if a.pair_state(i, j) != b.pair_state(i, j) {
                d += 1;
            }
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeSet, HashMap};

    use super::*;
    use crate::graphs::enumerate_dags;

    type Skeleton = BTreeSet<(usize, usize)>;
    type VStructs = BTreeSet<(usize, usize, usize)>;

    fn signature(g: &Dag) -> (Skeleton, VStructs) {
        let skel = g
            .edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        let mut vs = BTreeSet::new();
        for c in 0..g.m() {
            let pa = g.parents(c).unwrap();
            for (x, &a) in pa.iter().enumerate() {
                for &b in &pa[x + 1..] {
                    if !g.adjacent(a, b) {
                        vs.insert((a, c, b));
                    }
                }
            }
        }
        (skel, vs)
    }

    /// Brute force: an edge is directed iff every equivalent DAG orients it the same way.
    fn oracle_states(m: usize) -> Vec<(Dag, Vec<PairState>)> {
        let dags = enumerate_dags(m).unwrap();
        let mut classes: HashMap<(Skeleton, VStructs), Vec<usize>> = HashMap::new();
        for (idx, g) in dags.iter().enumerate() {
            classes.entry(signature(g)).or_default().push(idx);
        }
        let mut out = Vec::new();
        for g in &dags {
            let members = &classes[&signature(g)];
            let mut states = Vec::new();
            for i in 0..m {
                for j in (i + 1)..m {
                    let fwd = members.iter().all(|&k| dags[k].has_edge(i, j));
                    let bwd = members.iter().all(|&k| dags[k].has_edge(j, i));
                    let state = if !g.adjacent(i, j) {
                        PairState::Absent
                    } else if fwd {
                        PairState::Forward
                    } else if bwd {
                        PairState::Backward
                    } else {
                        PairState::Undirected
                    };
                    states.push(state);
                }
            }
            out.push((g.clone(), states));
        }
        out
    }

    #[test]
    fn completion_matches_equivalence_class_oracle() {
        for m in 1..=4 {
            for (g, expected) in oracle_states(m) {
                let c = to_cpdag(&g);
                let mut got = Vec::new();
                for i in 0..m {
                    for j in (i + 1)..m {
                        got.push(c.pair_state(i, j));
                    }
                }
                assert_eq!(got, expected, "m={m}, {g:?}");
            }
        }
    }

    #[test]
    fn grouping_by_cpdag_matches_signature_grouping() {
        let dags = enumerate_dags(3).unwrap();
        assert_eq!(dags.len(), 25);
        for a in &dags {
            for b in &dags {
                assert_eq!(
                    to_cpdag(a) == to_cpdag(b),
                    signature(a) == signature(b),
                    "{a:?} vs {b:?}"
                );
            }
        }
    }

    #[test]
    fn examples() {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let c = to_cpdag(&chain);
        assert!(c.directed_edges().is_empty());
        assert_eq!(c.undirected_edges(), vec![(0, 1), (1, 2)]);

        let collider = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let c = to_cpdag(&collider);
        assert_eq!(c.directed_edges(), vec![(0, 2), (1, 2)]);
        assert!(c.undirected_edges().is_empty());

        let empty = to_cpdag(&Dag::empty(4).unwrap());
        assert!(empty.directed_edges().is_empty() && empty.undirected_edges().is_empty());
    }

    #[test]
    fn shd_examples() {
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let collider = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        assert_eq!(shd(&chain, &chain).unwrap(), 0);
        let e = Dag::empty(2).unwrap();
        let one = Dag::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(shd(&e, &one).unwrap(), 1);
        // 0-1 removed, 0->2 added, and 1-2 becomes the compelled 1->2.
        assert_eq!(shd(&chain, &collider).unwrap(), 3);
        assert!(shd(&chain, &e).is_err());
    }

    #[test]
    fn shd_metric_axioms_exhaustive_m3() {
        let dags = enumerate_dags(3).unwrap();
        for a in &dags {
            assert_eq!(shd(a, a).unwrap(), 0);
            for b in &dags {
                let ab = shd(a, b).unwrap();
                assert_eq!(ab, shd(b, a).unwrap());
                for c in &dags {
                    assert!(ab <= shd(a, c).unwrap() + shd(c, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn completion_is_idempotent_over_class_members() {
        let dags = enumerate_dags(4).unwrap();
        let mut by_class: HashMap<Cpdag, Vec<&Dag>> = HashMap::new();
        for g in &dags {
            by_class.entry(to_cpdag(g)).or_default().push(g);
        }
        for (c, members) in by_class {
            for g in members {
                assert_eq!(to_cpdag(g), c);
                // every member orients compelled edges as the CPDAG does
                for (j, i) in c.directed_edges() {
                    assert!(g.has_edge(j, i));
                }
            }
        }
    }
}
