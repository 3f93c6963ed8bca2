//! DAGs, Markov-equivalence completion and structural distances.

mod cpdag;
mod dag;
mod random;

pub use cpdag::{shd, shd_cpdag, to_cpdag, Cpdag, PairState};
pub use dag::{enumerate_dags, Dag, MAX_NODES};
pub use random::random_dag;

pub(crate) use dag::{bit, mask_indices};
