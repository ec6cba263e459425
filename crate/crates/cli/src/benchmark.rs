//! Run-time comparison of the orthant, relaxed and plain solvers on random
//! hierarchical models.

use std::time::Instant;

use hierlasso::{
    constrained_lasso_path, lambda_grid, model_from_directing_monomials, plain_lasso_path,
    relaxed_lasso_path, ConstraintKind, ConstraintSystem, Dataset, Exponent, HasseDiagram, Model,
    PathMethod, PathOptions, WeightScheme,
};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::latin_hypercube;
use crate::table::design_matrix;
use crate::{replication_rng, CliError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub scenarios: usize,
    /// Scenario `i` uses `k = 1 + i mod max_k` inputs.
    pub max_k: usize,
    /// Degree `m` is drawn from `2..=max_degree`.
    pub max_degree: u16,
    pub weight_s: f64,
    pub weight_w: f64,
    pub n_lambda: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seed: 1,
            scenarios: 12,
            max_k: 3,
            max_degree: 5,
            weight_s: 10.0,
            weight_w: 0.1,
            n_lambda: 60,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.scenarios == 0 || self.max_k == 0 {
            return Err(CliError::Input("scenarios and max_k must be positive".into()));
        }
        if !(2..=7).contains(&self.max_degree) {
            return Err(CliError::Input(format!("max degree must lie in 2..=7, got {}", self.max_degree)));
        }
        if !(self.weight_s > 0.0 && self.weight_w > 0.0) {
            return Err(CliError::Input("weights must be positive".into()));
        }
        if self.n_lambda < 2 {
            return Err(CliError::Input("need at least 2 lambda values".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub scenario: usize,
    pub k: usize,
    pub degree: u16,
    pub n: usize,
    pub model_size: usize,
    pub method: PathMethod,
    pub constraint: ConstraintKind,
    pub seconds: f64,
}

fn binomial(n: usize, r: usize) -> usize {
    (1..=r).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

/// Hierarchical model generated by one to three random monomials of degree at most `m`.
pub fn random_hierarchical_model(rng: &mut ChaCha8Rng, k: usize, m: u16) -> Result<Model, CliError> {
    let count = rng.random_range(1..=3);
    let mut directors = Vec::with_capacity(count);
    while directors.len() < count {
        let deg = rng.random_range(1..=m);
        let mut e = vec![0u16; k];
        for _ in 0..deg {
            e[rng.random_range(0..k)] += 1;
        }
        directors.push(Exponent::new(e));
    }
    Ok(model_from_directing_monomials(k, &directors)?)
}

fn time<F: FnOnce() -> Result<(), CliError>>(f: F) -> Result<f64, CliError> {
    let start = Instant::now();
    f()?;
    Ok(start.elapsed().as_secs_f64())
}

/// Seven timings per scenario: orthant and relaxed fits under `S`, `H` and `W`,
/// then the plain lasso. Scenarios run one at a time so timings do not compete.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<TimingRow>, CliError> {
    cfg.validate()?;
    let opts = PathOptions::default();
    let mut rows = Vec::with_capacity(cfg.scenarios * 7);
    for s in 0..cfg.scenarios {
        let mut rng = replication_rng(cfg.seed, s as u64);
        let k = 1 + s % cfg.max_k;
        let m = rng.random_range(2..=cfg.max_degree);
        let n = 2 * binomial(k + m as usize, m as usize);
        let model = random_hierarchical_model(&mut rng, k, m)?;
        let pts = latin_hypercube(&mut rng, n, k);
        let x = design_matrix(&model, &pts)?;
        let y = DVector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
        let ds = Dataset::standardized(model.clone(), x, y)?;
        let grid = lambda_grid(&ds, cfg.n_lambda)?;
        let hasse = HasseDiagram::new(&model);
        let mut push = |method, constraint, seconds| {
            rows.push(TimingRow {
                scenario: s,
                k,
                degree: m,
                n,
                model_size: model.len(),
                method,
                constraint,
                seconds,
            })
        };
        for kind in [ConstraintKind::S, ConstraintKind::H, ConstraintKind::W] {
            let weights = match kind {
                ConstraintKind::S => WeightScheme::Constant(cfg.weight_s),
                ConstraintKind::W => WeightScheme::Constant(cfg.weight_w),
                _ => WeightScheme::Unit,
            };
            let cs = ConstraintSystem::build(kind, &hasse, &weights)?;
            let t = time(|| constrained_lasso_path(&ds, &cs, &grid, &opts).map(drop).map_err(Into::into))?;
            push(PathMethod::Constrained, kind, t);
            let t = time(|| relaxed_lasso_path(&ds, &cs, &grid, &opts).map(drop).map_err(Into::into))?;
            push(PathMethod::Relaxed, kind, t);
        }
        let t = time(|| plain_lasso_path(&ds, &grid, &opts).map(drop).map_err(Into::into))?;
        push(PathMethod::Plain, ConstraintKind::None, t);
    }
    Ok(rows)
}

pub fn timings_csv(rows: &[TimingRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Numerical(format!("csv: {e}")))
}
