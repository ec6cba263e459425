//! Command-line front end for hierarchical lasso fits: CSV input, polynomial
//! design expansion, replicated simulation studies and timing runs.

pub mod benchmark;
pub mod design;
pub mod simulate;
pub mod stats;
pub mod table;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use benchmark::{run_benchmark, timings_csv, BenchmarkConfig, TimingRow};
pub use simulate::{
    simulate_coincidence, simulate_prediction, Candidate, ColumnScaling, CoincidenceReport, DesignKind,
    PredictionReport, SimulationConfig, Truth,
};
pub use table::{centering, design_matrix, expand_design, RawTable, Scaling};

/// Environment variable capping the worker threads of simulation runs.
pub const THREADS_ENV: &str = "HIERLASSO_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<hierlasso::Error> for CliError {
    fn from(e: hierlasso::Error) -> Self {
        use hierlasso::Error as E;
        match e {
            E::Dimension(_) | E::Argument(_) | E::RankDeficient { .. } => CliError::Input(e.to_string()),
            E::Numerical(_) | E::IterationLimit(_) => CliError::Numerical(e.to_string()),
        }
    }
}

/// Independent stream `counter` of the master seed, so replication `r` sees the
/// same numbers whatever thread runs it.
pub fn replication_rng(seed: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    rng
}

/// Pool sized by `HIERLASSO_THREADS` when set, otherwise rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{THREADS_ENV} must be a thread count, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| CliError::Numerical(format!("cannot start worker threads: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = replication_rng(5, 0).random();
        let b: u64 = replication_rng(5, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, replication_rng(5, 0).random::<u64>());
    }

    #[test]
    fn exit_codes() {
        let e: CliError = hierlasso::Error::Argument("x".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = hierlasso::Error::IterationLimit(3).into();
        assert_eq!(e.exit_code(), 3);
    }
}
