use std::fmt;

use crate::error::{Error, Result};

/// Largest node count representable with one `u64` parent mask per node.
pub const MAX_NODES: usize = 64;

/// Directed acyclic graph over `m` nodes, stored as one parent bitmask per node.
///
/// Bit `j` of `parents[i]` is set iff `j -> i`. Every constructor and mutation
/// keeps the graph acyclic.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dag {
    parents: Vec<u64>,
}

#[inline]
pub(crate) fn bit(i: usize) -> u64 {
    1u64 << i
}

/// Iterates the set bits of a mask in ascending order.
pub(crate) fn mask_indices(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

fn check_node_count(m: usize) -> Result<()> {
    if m == 0 || m > MAX_NODES {
        return Err(Error::param(format!(
            "node count must be in 1..={MAX_NODES}, got {m}"
        )));
    }
    Ok(())
}

/// Topological order of the graph described by `parents`, or `None` if it has a cycle.
pub(crate) fn topological_order_of(parents: &[u64]) -> Option<Vec<usize>> {
    let m = parents.len();
    let mut placed = 0u64;
    let mut order = Vec::with_capacity(m);
    while order.len() < m {
        let before = order.len();
        for (i, &pa) in parents.iter().enumerate() {
            if placed & bit(i) == 0 && pa & !placed == 0 {
                order.push(i);
            }
        }
        if order.len() == before {
            return None;
        }
        for &i in &order[before..] {
            placed |= bit(i);
        }
    }
    Some(order)
}

impl Dag {
    /// Graph with `m` nodes and no edges.
    pub fn empty(m: usize) -> Result<Self> {
        check_node_count(m)?;
        Ok(Self {
            parents: vec![0; m],
        })
    }

    /// Builds a graph from `(parent, child)` pairs.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        check_node_count(m)?;
        let mut parents = vec![0u64; m];
        for &(from, to) in edges {
            if from >= m || to >= m {
                return Err(Error::param(format!(
                    "edge {from}->{to} out of range for {m} nodes"
                )));
            }
            if from == to {
                return Err(Error::Structure(format!("self-loop at node {from}")));
            }
            parents[to] |= bit(from);
        }
        Self::from_parent_masks(parents)
    }

    /// Builds a graph from per-node parent bitmasks, rejecting cycles.
    pub fn from_parent_masks(parents: Vec<u64>) -> Result<Self> {
        let m = parents.len();
        check_node_count(m)?;
        for (i, &pa) in parents.iter().enumerate() {
            if pa & bit(i) != 0 {
                return Err(Error::Structure(format!("self-loop at node {i}")));
            }
            if m < 64 && pa >> m != 0 {
                return Err(Error::param(format!(
                    "parent mask of node {i} exceeds {m} nodes"
                )));
            }
        }
        if topological_order_of(&parents).is_none() {
            return Err(Error::Structure("graph contains a directed cycle".into()));
        }
        Ok(Self { parents })
    }

    pub fn m(&self) -> usize {
        self.parents.len()
    }

    pub fn parent_mask(&self, i: usize) -> u64 {
        self.parents[i]
    }

    pub fn parent_masks(&self) -> &[u64] {
        &self.parents
    }

    /// Parents of node `i` in ascending order.
    pub fn parents(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.m() {
            return Err(Error::param(format!(
                "node {i} out of range for {} nodes",
                self.m()
            )));
        }
        Ok(mask_indices(self.parents[i]).collect())
    }

    pub fn children_mask(&self, j: usize) -> u64 {
        self.parents
            .iter()
            .enumerate()
            .filter(|(_, &pa)| pa & bit(j) != 0)
            .fold(0, |acc, (i, _)| acc | bit(i))
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to] & bit(from) != 0
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(|p| p.count_ones() as usize).sum()
    }

    /// All edges as `(parent, child)`, ordered by child then parent.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(i, &pa)| mask_indices(pa).map(move |j| (j, i)))
            .collect()
    }

    pub fn topological_order(&self) -> Vec<usize> {
        topological_order_of(&self.parents).expect("Dag invariant: acyclic")
    }

    /// True if a directed path `from -> ... -> to` exists (a node reaches itself).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        reaches_in(&self.parents, from, to)
    }

    /// Adds `from -> to` unless the edge exists or would close a cycle.
    pub fn try_add_edge(&mut self, from: usize, to: usize) -> bool {
        if from == to || self.adjacent(from, to) || self.reaches(to, from) {
            return false;
        }
        self.parents[to] |= bit(from);
        true
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) -> bool {
        if !self.has_edge(from, to) {
            return false;
        }
        self.parents[to] &= !bit(from);
        true
    }

    /// Replaces `from -> to` by `to -> from` unless that would close a cycle.
    pub fn try_reverse_edge(&mut self, from: usize, to: usize) -> bool {
        if !self.has_edge(from, to) {
            return false;
        }
        self.parents[to] &= !bit(from);
        if self.reaches(from, to) {
            self.parents[to] |= bit(from);
            return false;
        }
        self.parents[from] |= bit(to);
        true
    }

    /// Caller guarantees the result stays acyclic.
    pub(crate) fn set_parent_mask_unchecked(&mut self, i: usize, mask: u64) {
        self.parents[i] = mask;
    }

    /// Row-major `m*m` string of `0`/`1`; row = parent, column = child.
    pub fn to_bitstring(&self) -> String {
        let m = self.m();
        let mut s = String::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m {
                s.push(if self.has_edge(j, i) { '1' } else { '0' });
            }
        }
        s
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        let len = s.len();
        let m = (len as f64).sqrt().round() as usize;
        if m * m != len || m == 0 {
            return Err(Error::parse(
                "adjacency bitstring",
                format!("length {len} is not a positive perfect square"),
            ));
        }
        check_node_count(m)?;
        let mut parents = vec![0u64; m];
        for (idx, c) in s.bytes().enumerate() {
            let (j, i) = (idx / m, idx % m);
            match c {
                b'0' => {}
                b'1' => parents[i] |= bit(j),
                other => {
                    return Err(Error::parse(
                        "adjacency bitstring",
                        format!("unexpected character {:?} at offset {idx}", other as char),
                    ))
                }
            }
        }
        Self::from_parent_masks(parents)
    }
}

pub(crate) fn reaches_in(parents: &[u64], from: usize, to: usize) -> bool {
    let mut reached = bit(from);
    loop {
        if reached & bit(to) != 0 {
            return true;
        }
        let mut next = reached;
        for (i, &pa) in parents.iter().enumerate() {
            if pa & reached != 0 {
                next |= bit(i);
            }
        }
        if next == reached {
            return false;
        }
        reached = next;
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag({}; ", self.m())?;
        let edges = self.edges();
        if edges.is_empty() {
            write!(f, "no edges")?;
        }
        for (n, (j, i)) in edges.iter().enumerate() {
            if n > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{j}->{i}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// Every DAG on `m` nodes (1 ≤ m ≤ 5), in a fixed order.
///
/// Counts are 1, 3, 25, 543 and 29281.
pub fn enumerate_dags(m: usize) -> Result<Vec<Dag>> {
    if !(1..=5).contains(&m) {
        return Err(Error::param(format!(
            "DAG enumeration supports 1..=5 nodes, got {m}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    let mut parents = vec![0u64; m];
    for mut code in 0..total {
        parents.iter_mut().for_each(|p| *p = 0);
        for &(i, j) in &pairs {
            match code % 3 {
                1 => parents[j] |= bit(i),
                2 => parents[i] |= bit(j),
                _ => {}
            }
            code /= 3;
        }
        if topological_order_of(&parents).is_some() {
            out.push(Dag {
                parents: parents.clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parents_examples() {
        let empty = Dag::empty(3).unwrap();
        assert!(empty.parents(1).unwrap().is_empty());
        let chain = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(chain.parents(1).unwrap(), vec![0]);
        let collider = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        assert_eq!(collider.parents(2).unwrap(), vec![0, 1]);
        assert!(matches!(chain.parents(3), Err(Error::Parameter(_))));
    }

    #[test]
    fn rejects_cycles_and_self_loops() {
        assert!(matches!(
            Dag::from_edges(3, &[(0, 1), (1, 2), (2, 0)]),
            Err(Error::Structure(_))
        ));
        assert!(matches!(
            Dag::from_edges(2, &[(1, 1)]),
            Err(Error::Structure(_))
        ));
        assert!(Dag::empty(0).is_err());
    }

    #[test]
    fn mutations_keep_acyclicity() {
        let mut g = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(!g.try_add_edge(2, 0));
        assert!(g.try_add_edge(0, 2));
        // reversing 0->1 would create 1->0->2 with 1->2: fine, but reversing 0->2
        // with path 0->1->2 present closes a cycle.
        assert!(!g.try_reverse_edge(0, 2));
        assert!(g.remove_edge(0, 2));
        assert!(g.try_reverse_edge(0, 1));
        assert!(g.has_edge(1, 0));
        assert!(topological_order_of(g.parent_masks()).is_some());
    }

    #[test]
    fn bitstring_layout() {
        let g = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.to_bitstring(), "010001000");
        assert_eq!(Dag::from_bitstring("010001000").unwrap(), g);
        assert!(Dag::from_bitstring("0100").is_ok());
        assert!(Dag::from_bitstring("01000").is_err());
        assert!(Dag::from_bitstring("0110").is_err());
        assert!(Dag::from_bitstring("01x0").is_err());
    }

    #[test]
    fn dag_counts() {
        let counts: Vec<usize> = (1..=5).map(|m| enumerate_dags(m).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 3, 25, 543, 29281]);
        assert!(enumerate_dags(6).is_err());
    }
}
