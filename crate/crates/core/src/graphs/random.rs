use rand::seq::SliceRandom;
use rand::Rng;

use super::dag::{bit, Dag, MAX_NODES};
use crate::error::{Error, Result};

/// Erdős–Rényi DAG: draw a uniform node ordering, then include each of the
/// `m(m-1)/2` order-compatible edges independently with probability `p`.
pub fn random_dag<R: Rng + ?Sized>(m: usize, p: f64, rng: &mut R) -> Result<Dag> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(format!(
            "edge probability must be in [0, 1], got {p}"
        )));
    }
    if m == 0 || m > MAX_NODES {
        return Err(Error::param(format!(
            "node count must be in 1..={MAX_NODES}, got {m}"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut parents = vec![0u64; m];
    for (x, &from) in order.iter().enumerate() {
        for &to in &order[x + 1..] {
            if rng.random::<f64>() < p {
                parents[to] |= bit(from);
            }
        }
    }
    Dag::from_parent_masks(parents)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(random_dag(5, 0.0, &mut rng).unwrap().edge_count(), 0);
        let full = random_dag(5, 1.0, &mut rng).unwrap();
        assert_eq!(full.edge_count(), 10);
        assert!(random_dag(5, 1.5, &mut rng).is_err());
        assert!(random_dag(5, -0.1, &mut rng).is_err());
    }

    #[test]
    fn mean_edge_count_matches_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 10_000;
        let counts: Vec<f64> = (0..draws)
            .map(|_| random_dag(5, 0.25, &mut rng).unwrap().edge_count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / draws as f64;
        // Binomial(10, 0.25): variance 1.875
        let se = (10.0 * 0.25 * 0.75 / draws as f64).sqrt();
        assert!((mean - 2.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn seeded_is_reproducible() {
        let a = random_dag(6, 0.4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_dag(6, 0.4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
