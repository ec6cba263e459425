//! Replicated simulation studies: prediction wins of the `S` constrained lasso over
//! the plain lasso, and selection agreement between the relaxed and orthant fits.

use hierlasso::{
    build_s, constrained_lasso_path, full_model, lambda_grid, model_from_directing_monomials,
    plain_lasso_path, relaxed_lasso_path, select_by_validation, ConstraintSystem, Dataset, Exponent,
    HasseDiagram, Model, PathOptions, PathPoint, WeightScheme,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{latin_hypercube, uniform_design};
use crate::stats::{proportion, Proportion};
use crate::table::{centering, design_matrix};
use crate::{replication_rng, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Uniform,
    LatinHypercube,
}

/// Column preprocessing, fitted on the training sample and reused on the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnScaling {
    Standardize,
    /// Centering only. The designs already live on `[-1, 1]^k` and the `S`
    /// constraints are not scale invariant, so this is the default.
    Center,
    /// No intercept is fitted.
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    /// Hierarchical polynomial with random nonzero integer coefficients drawn from
    /// `coef_min..=coef_max`, intercept included.
    Polynomial {
        directors: Vec<Vec<u32>>,
        coef_min: i32,
        coef_max: i32,
    },
    /// `1 + 2 exp(x1) + 3 sin(pi x3)^2`; needs `k >= 3`.
    ExpSine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Candidate {
    Directors { directors: Vec<Vec<u32>> },
    FullDegree { degree: u16 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub replications: usize,
    pub k: usize,
    pub design: DesignKind,
    pub n_train: usize,
    pub n_valid: usize,
    /// Held-out points for prediction error; unused by the coincidence study.
    pub n_pred: usize,
    /// Gaussian noise variances, one study cell per value.
    pub noise_variances: Vec<f64>,
    pub truth: Truth,
    pub candidate: Candidate,
    /// Constant `S` weights, one study cell per value.
    pub weights: Vec<f64>,
    pub n_lambda: usize,
    pub use_refit: bool,
    pub scaling: ColumnScaling,
}

impl SimulationConfig {
    /// Two inputs on a uniform design, 11-term truth, 24-term candidate.
    pub fn prediction_default() -> Self {
        SimulationConfig {
            seed: 1,
            replications: 100,
            k: 2,
            design: DesignKind::Uniform,
            n_train: 100,
            n_valid: 40,
            n_pred: 40,
            noise_variances: vec![0.25, 1.0, 4.0],
            truth: Truth::Polynomial {
                directors: vec![vec![1, 3], vec![2, 2], vec![3, 0]],
                coef_min: -3,
                coef_max: 3,
            },
            candidate: Candidate::Directors {
                directors: vec![vec![4, 4]],
            },
            weights: vec![1.0, 10.0, 100.0],
            n_lambda: 60,
            use_refit: true,
            scaling: ColumnScaling::Center,
        }
    }

    /// Latin hypercube scenarios with a full cubic candidate. `k = 3` uses 40
    /// training and 15 validation points, `k = 5` uses 100 and 30.
    pub fn coincidence_default(k: usize) -> Result<Self, CliError> {
        let (n_train, n_valid) = match k {
            3 => (40, 15),
            5 => (100, 30),
            _ => return Err(CliError::Input(format!("coincidence scenarios exist for k = 3 and k = 5, got {k}"))),
        };
        Ok(SimulationConfig {
            seed: 1,
            replications: 100,
            k,
            design: DesignKind::LatinHypercube,
            n_train,
            n_valid,
            n_pred: 0,
            noise_variances: vec![0.0],
            truth: Truth::ExpSine,
            candidate: Candidate::FullDegree { degree: 3 },
            weights: vec![1.0],
            n_lambda: 60,
            use_refit: true,
            scaling: ColumnScaling::Center,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(m));
        if self.replications == 0 || self.k == 0 || self.n_train == 0 || self.n_valid == 0 {
            return bad("replications, k and sample sizes must be positive".into());
        }
        if self.n_lambda < 2 {
            return bad(format!("need at least 2 lambda values, got {}", self.n_lambda));
        }
        if self.noise_variances.is_empty() || self.noise_variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("noise variances must be a non-empty list of finite values >= 0".into());
        }
        if self.weights.is_empty() || self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return bad("weights must be a non-empty list of positive values".into());
        }
        match &self.truth {
            Truth::Polynomial {
                directors,
                coef_min,
                coef_max,
            } => {
                if coef_min > coef_max || (*coef_min == 0 && *coef_max == 0) {
                    return bad(format!("coefficient range {coef_min}..={coef_max} has no nonzero integer"));
                }
                if directors.iter().any(|d| d.len() != self.k) {
                    return bad("truth directing monomials must have length k".into());
                }
            }
            Truth::ExpSine if self.k < 3 => return bad("this truth uses x3 and needs k >= 3".into()),
            Truth::ExpSine => {}
        }
        if let Candidate::Directors { directors } = &self.candidate {
            if directors.iter().any(|d| d.len() != self.k) {
                return bad("candidate directing monomials must have length k".into());
            }
        }
        Ok(())
    }

    pub fn candidate_model(&self) -> Result<Model, CliError> {
        Ok(match &self.candidate {
            Candidate::Directors { directors } => model_from_directing_monomials(self.k, &exponents(directors)?)?,
            Candidate::FullDegree { degree } => full_model(self.k, *degree)?,
        })
    }

    pub fn truth_model(&self) -> Result<Option<Model>, CliError> {
        Ok(match &self.truth {
            Truth::Polynomial { directors, .. } => {
                Some(model_from_directing_monomials(self.k, &exponents(directors)?)?)
            }
            Truth::ExpSine => None,
        })
    }

    fn points(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        match self.design {
            DesignKind::Uniform => uniform_design(rng, n, self.k),
            DesignKind::LatinHypercube => latin_hypercube(rng, n, self.k),
        }
    }
}

fn exponents(list: &[Vec<u32>]) -> Result<Vec<Exponent>, CliError> {
    Ok(list
        .iter()
        .map(|d| Exponent::from_u32(d))
        .collect::<hierlasso::Result<Vec<_>>>()?)
}

/// Mean response at each point.
enum Signal {
    Polynomial {
        model: Model,
        intercept: f64,
        coefs: Vec<f64>,
    },
    ExpSine,
}

impl Signal {
    fn draw(cfg: &SimulationConfig, truth: Option<&Model>, rng: &mut ChaCha8Rng) -> Self {
        match (&cfg.truth, truth) {
            (Truth::Polynomial { coef_min, coef_max, .. }, Some(m)) => {
                let mut draw = || loop {
                    let c = rng.random_range(*coef_min..=*coef_max);
                    if c != 0 {
                        return f64::from(c);
                    }
                };
                let intercept = draw();
                let coefs = (0..m.len()).map(|_| draw()).collect();
                Signal::Polynomial {
                    model: m.clone(),
                    intercept,
                    coefs,
                }
            }
            _ => Signal::ExpSine,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Signal::Polynomial {
                model,
                intercept,
                coefs,
            } => intercept + model.terms().iter().zip(coefs).map(|(t, c)| c * t.evaluate(x)).sum::<f64>(),
            Signal::ExpSine => {
                let s = (std::f64::consts::PI * x[2]).sin();
                1.0 + 2.0 * x[0].exp() + 3.0 * s * s
            }
        }
    }
}

/// Design points, mean response and standard normal noise for one sample.
struct Sample {
    x: DMatrix<f64>,
    mean: Vec<f64>,
    z: Vec<f64>,
}

impl Sample {
    fn draw(
        cfg: &SimulationConfig,
        cand: &Model,
        signal: &Signal,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, CliError> {
        let pts = cfg.points(rng, n);
        let x = design_matrix(cand, &pts)?;
        let mean = pts.iter().map(|p| signal.eval(p)).collect();
        let z = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        Ok(Sample { x, mean, z })
    }

    fn response(&self, variance: f64) -> DVector<f64> {
        let sd = variance.sqrt();
        DVector::from_iterator(self.mean.len(), self.mean.iter().zip(&self.z).map(|(m, z)| m + sd * z))
    }
}

/// Training, validation and optional prediction datasets at one noise level; the
/// latter two reuse the training standardization.
fn datasets(
    cfg: &SimulationConfig,
    cand: &Model,
    samples: &[&Sample],
    variance: f64,
) -> Result<Vec<Dataset>, CliError> {
    let train = samples[0];
    let (x, y) = (train.x.clone(), train.response(variance));
    let first = match cfg.scaling {
        ColumnScaling::Standardize => Dataset::standardized(cand.clone(), x, y)?,
        ColumnScaling::Center => {
            let st = centering(&x, &y);
            Dataset::with_standardization(cand.clone(), x, y, st)?
        }
        ColumnScaling::Raw => Dataset::new(cand.clone(), x, y)?,
    };
    let mut out = Vec::with_capacity(samples.len());
    for s in &samples[1..] {
        let ds = match first.standardization() {
            Some(st) => Dataset::with_standardization(cand.clone(), s.x.clone(), s.response(variance), st.clone())?,
            None => Dataset::new(cand.clone(), s.x.clone(), s.response(variance))?,
        };
        out.push(ds);
    }
    out.insert(0, first);
    Ok(out)
}

fn s_systems(hasse: &HasseDiagram, weights: &[f64]) -> Result<Vec<ConstraintSystem>, CliError> {
    Ok(weights
        .iter()
        .map(|&w| build_s(hasse, &WeightScheme::Constant(w)))
        .collect::<hierlasso::Result<Vec<_>>>()?)
}

fn selected_coefs(pt: &PathPoint, use_refit: bool) -> &[f64] {
    match (&pt.refit_theta, use_refit) {
        (Some(r), true) => r,
        _ => &pt.theta,
    }
}

/// Runs `f(rep)` for every replication on the configured pool, in replication order.
fn replicate<T, F>(cfg: &SimulationConfig, f: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(usize) -> Result<T, CliError> + Sync,
{
    let pool = crate::thread_pool()?;
    pool.install(|| (0..cfg.replications).into_par_iter().map(&f).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionOutcome {
    pub replication: usize,
    pub noise_variance: f64,
    pub weight: f64,
    pub error_s: f64,
    pub error_lasso: f64,
}

impl PredictionOutcome {
    /// Ties count as wins; the relative slack absorbs rounding when both errors
    /// are essentially zero.
    pub fn s_wins(&self) -> bool {
        self.error_s <= self.error_lasso + 1e-12 * (1.0 + self.error_lasso.abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionCell {
    pub noise_variance: f64,
    pub weight: f64,
    pub wins: Proportion,
    pub mean_error_s: f64,
    pub mean_error_lasso: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionReport {
    pub seed: u64,
    pub replications: usize,
    pub truth_terms: usize,
    pub candidate_terms: usize,
    pub config: SimulationConfig,
    pub cells: Vec<PredictionCell>,
    /// All cells pooled.
    pub overall: Proportion,
}

pub fn prediction_replication(
    cfg: &SimulationConfig,
    truth: &Model,
    cand: &Model,
    systems: &[ConstraintSystem],
    rep: usize,
) -> Result<Vec<PredictionOutcome>, CliError> {
    let mut rng = replication_rng(cfg.seed, rep as u64);
    let signal = Signal::draw(cfg, Some(truth), &mut rng);
    let train = Sample::draw(cfg, cand, &signal, cfg.n_train, &mut rng)?;
    let valid = Sample::draw(cfg, cand, &signal, cfg.n_valid, &mut rng)?;
    let pred = Sample::draw(cfg, cand, &signal, cfg.n_pred, &mut rng)?;
    let opts = PathOptions {
        refit: cfg.use_refit,
        ..PathOptions::default()
    };
    let mut out = Vec::with_capacity(cfg.noise_variances.len() * systems.len());
    for &var in &cfg.noise_variances {
        let sets = datasets(cfg, cand, &[&train, &valid, &pred], var)?;
        let grid = lambda_grid(&sets[0], cfg.n_lambda)?;
        let plain = plain_lasso_path(&sets[0], &grid, &opts)?;
        let (_, pt) = select_by_validation(&plain, &sets[1], cfg.use_refit)?;
        let error_lasso = sets[2].mse(selected_coefs(pt, cfg.use_refit))?;
        for (cs, &w) in systems.iter().zip(&cfg.weights) {
            let path = constrained_lasso_path(&sets[0], cs, &grid, &opts)?;
            let (_, pt) = select_by_validation(&path, &sets[1], cfg.use_refit)?;
            out.push(PredictionOutcome {
                replication: rep,
                noise_variance: var,
                weight: w,
                error_s: sets[2].mse(selected_coefs(pt, cfg.use_refit))?,
                error_lasso,
            });
        }
    }
    Ok(out)
}

pub fn simulate_prediction(cfg: &SimulationConfig) -> Result<PredictionReport, CliError> {
    cfg.validate()?;
    if cfg.n_pred == 0 {
        return Err(CliError::Input("prediction study needs a positive prediction size".into()));
    }
    let truth = cfg
        .truth_model()?
        .ok_or_else(|| CliError::Input("prediction study needs a polynomial truth".into()))?;
    let cand = cfg.candidate_model()?;
    let hasse = HasseDiagram::new(&cand);
    let systems = s_systems(&hasse, &cfg.weights)?;
    let reps = replicate(cfg, |r| prediction_replication(cfg, &truth, &cand, &systems, r))?;
    let outcomes: Vec<PredictionOutcome> = reps.into_iter().flatten().collect();

    let mut cells = Vec::new();
    for &var in &cfg.noise_variances {
        for &w in &cfg.weights {
            let sel: Vec<&PredictionOutcome> = outcomes
                .iter()
                .filter(|o| o.noise_variance == var && o.weight == w)
                .collect();
            let n = sel.len() as f64;
            cells.push(PredictionCell {
                noise_variance: var,
                weight: w,
                wins: proportion(sel.iter().filter(|o| o.s_wins()).count() as u64, sel.len() as u64),
                mean_error_s: sel.iter().map(|o| o.error_s).sum::<f64>() / n,
                mean_error_lasso: sel.iter().map(|o| o.error_lasso).sum::<f64>() / n,
            });
        }
    }
    let overall = proportion(
        outcomes.iter().filter(|o| o.s_wins()).count() as u64,
        outcomes.len() as u64,
    );
    Ok(PredictionReport {
        seed: cfg.seed,
        replications: cfg.replications,
        truth_terms: truth.len(),
        candidate_terms: cand.len(),
        config: cfg.clone(),
        cells,
        overall,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoincidenceOutcome {
    pub replication: usize,
    pub noise_variance: f64,
    pub weight: f64,
    pub same_terms: bool,
    pub same_terms_and_signs: bool,
    pub constrained_terms: usize,
    pub relaxed_terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoincidenceCell {
    pub noise_variance: f64,
    pub weight: f64,
    pub terms_only: Proportion,
    pub terms_and_signs: Proportion,
    pub mean_constrained_terms: f64,
    pub mean_relaxed_terms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoincidenceReport {
    pub seed: u64,
    pub replications: usize,
    pub candidate_terms: usize,
    pub config: SimulationConfig,
    pub cells: Vec<CoincidenceCell>,
}

fn signs_at(pt: &PathPoint, use_refit: bool) -> Vec<(usize, bool)> {
    let c = selected_coefs(pt, use_refit);
    pt.active.iter().map(|&j| (j, c[j] > 0.0)).collect()
}

pub fn coincidence_replication(
    cfg: &SimulationConfig,
    cand: &Model,
    systems: &[ConstraintSystem],
    rep: usize,
) -> Result<Vec<CoincidenceOutcome>, CliError> {
    let mut rng = replication_rng(cfg.seed, rep as u64);
    let signal = Signal::draw(cfg, None, &mut rng);
    let train = Sample::draw(cfg, cand, &signal, cfg.n_train, &mut rng)?;
    let valid = Sample::draw(cfg, cand, &signal, cfg.n_valid, &mut rng)?;
    let opts = PathOptions {
        refit: cfg.use_refit,
        ..PathOptions::default()
    };
    let mut out = Vec::new();
    for &var in &cfg.noise_variances {
        let sets = datasets(cfg, cand, &[&train, &valid], var)?;
        let grid = lambda_grid(&sets[0], cfg.n_lambda)?;
        for (cs, &w) in systems.iter().zip(&cfg.weights) {
            let orth = constrained_lasso_path(&sets[0], cs, &grid, &opts)?;
            let relax = relaxed_lasso_path(&sets[0], cs, &grid, &opts)?;
            let (_, a) = select_by_validation(&orth, &sets[1], cfg.use_refit)?;
            let (_, b) = select_by_validation(&relax, &sets[1], cfg.use_refit)?;
            out.push(CoincidenceOutcome {
                replication: rep,
                noise_variance: var,
                weight: w,
                same_terms: a.active == b.active,
                same_terms_and_signs: signs_at(a, cfg.use_refit) == signs_at(b, cfg.use_refit),
                constrained_terms: a.active.len(),
                relaxed_terms: b.active.len(),
            });
        }
    }
    Ok(out)
}

pub fn simulate_coincidence(cfg: &SimulationConfig) -> Result<CoincidenceReport, CliError> {
    cfg.validate()?;
    let cand = cfg.candidate_model()?;
    let hasse = HasseDiagram::new(&cand);
    let systems = s_systems(&hasse, &cfg.weights)?;
    let reps = replicate(cfg, |r| coincidence_replication(cfg, &cand, &systems, r))?;
    let outcomes: Vec<CoincidenceOutcome> = reps.into_iter().flatten().collect();

    let mut cells = Vec::new();
    for &var in &cfg.noise_variances {
        for &w in &cfg.weights {
            let sel: Vec<&CoincidenceOutcome> = outcomes
                .iter()
                .filter(|o| o.noise_variance == var && o.weight == w)
                .collect();
            let n = sel.len() as u64;
            cells.push(CoincidenceCell {
                noise_variance: var,
                weight: w,
                terms_only: proportion(sel.iter().filter(|o| o.same_terms).count() as u64, n),
                terms_and_signs: proportion(sel.iter().filter(|o| o.same_terms_and_signs).count() as u64, n),
                mean_constrained_terms: sel.iter().map(|o| o.constrained_terms as f64).sum::<f64>() / n as f64,
                mean_relaxed_terms: sel.iter().map(|o| o.relaxed_terms as f64).sum::<f64>() / n as f64,
            });
        }
    }
    Ok(CoincidenceReport {
        seed: cfg.seed,
        replications: cfg.replications,
        candidate_terms: cand.len(),
        config: cfg.clone(),
        cells,
    })
}
