//! Lasso paths with hierarchy constraints.
//!
//! The penalized criterion is `L = 1/2 ||Y - X theta||^2 + lambda ||theta||_1`.
//! Three path builders share a dataset and a lambda grid:
//!
//! * [`constrained_lasso_path`] solves `A|theta| >= 0` orthant by orthant, exploring
//!   descending through single-flip neighbours of the current orthant at every lambda.
//! * [`relaxed_lasso_path`] splits `theta = theta+ - theta-` and imposes the
//!   constraints on `theta+ + theta-`, which gives one convex QP per lambda.
//! * [`plain_lasso_path`] has no hierarchy constraints.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constraints::{build_relaxed_b, ConstraintKind, ConstraintSystem};
use crate::error::{arg_err, dim_err, Error, Result};
use crate::monomial::{is_strong_hierarchical, is_weak_hierarchical, Model};
use crate::qp::{HessianFactor, QpOptions, QpProblem, QpSolution, QpSolver, QpStatus};

/// Relative tolerance of the Gram-Schmidt rank check.
const RANK_TOL: f64 = 1e-10;

/// Column centering and scaling, fitted on training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_means: Vec<f64>,
    pub x_scales: Vec<f64>,
    pub y_mean: f64,
}

impl Standardization {
    /// Means and sample standard deviations (divisor `n - 1`) of each column.
    pub fn fit(x: &DMatrix<f64>, y: &DVector<f64>, labels: &[String]) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return arg_err("standardization needs at least two rows");
        }
        if y.len() != n {
            return dim_err(format!("X has {n} rows, Y has {} entries", y.len()));
        }
        let mut x_means = Vec::with_capacity(x.ncols());
        let mut x_scales = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let mean = col.mean();
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if !(sd > 0.0) {
                let name = labels.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
                return arg_err(format!("{name} is constant and cannot be scaled"));
            }
            x_means.push(mean);
            x_scales.push(sd);
        }
        Ok(Standardization {
            x_means,
            x_scales,
            y_mean: y.mean(),
        })
    }

    pub fn apply(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if x.ncols() != self.x_means.len() {
            return dim_err(format!(
                "X has {} columns, standardization has {}",
                x.ncols(),
                self.x_means.len()
            ));
        }
        let xs = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.x_means[j]) / self.x_scales[j]
        });
        let ys = y.map(|v| v - self.y_mean);
        Ok((xs, ys))
    }

    /// Coefficients on the original scale, returned as `(intercept, slopes)`.
    pub fn to_original(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        if theta.len() != self.x_scales.len() {
            return dim_err(format!(
                "theta has length {}, standardization has {} columns",
                theta.len(),
                self.x_scales.len()
            ));
        }
        let slopes: Vec<f64> = theta
            .iter()
            .zip(&self.x_scales)
            .map(|(t, s)| t / s)
            .collect();
        let shift: f64 = slopes.iter().zip(&self.x_means).map(|(b, m)| b * m).sum();
        Ok((self.y_mean - shift, slopes))
    }
}

/// Design matrix and response with columns in model term order.
#[derive(Clone, Debug)]
pub struct Dataset {
    model: Model,
    x: DMatrix<f64>,
    y: DVector<f64>,
    labels: Vec<String>,
    standardization: Option<Standardization>,
    gram: DMatrix<f64>,
    xty: DVector<f64>,
}

impl Dataset {
    /// Checks shapes and finiteness only. Rank and `n > p` are checked by the fitting
    /// routines, so validation sets may be small.
    pub fn new(model: Model, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.ncols() != model.len() {
            return dim_err(format!(
                "X has {} columns, model has {} terms",
                x.ncols(),
                model.len()
            ));
        }
        if x.nrows() != y.len() {
            return dim_err(format!("X has {} rows, Y has {} entries", x.nrows(), y.len()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return arg_err("design or response contains non-finite values");
        }
        let gram = x.tr_mul(&x);
        let xty = x.tr_mul(&y);
        let labels = model.labels();
        Ok(Dataset {
            model,
            x,
            y,
            labels,
            standardization: None,
            gram,
            xty,
        })
    }

    /// Fits a standardization on `(x, y)` and applies it.
    pub fn standardized(model: Model, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let st = Standardization::fit(&x, &y, &model.labels())?;
        Dataset::with_standardization(model, x, y, st)
    }

    /// Applies a standardization fitted elsewhere, typically on training data.
    pub fn with_standardization(
        model: Model,
        x: DMatrix<f64>,
        y: DVector<f64>,
        st: Standardization,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return dim_err(format!("X has {} rows, Y has {} entries", x.nrows(), y.len()));
        }
        let (xs, ys) = st.apply(&x, &y)?;
        let mut ds = Dataset::new(model, xs, ys)?;
        ds.standardization = Some(st);
        Ok(ds)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization.is_some()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    /// `X'X`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `X'Y`.
    pub fn xty(&self) -> &DVector<f64> {
        &self.xty
    }

    /// Requires `n > p` and full column rank.
    pub fn check_estimable(&self) -> Result<()> {
        if self.n() <= self.p() {
            return arg_err(format!(
                "need more observations than terms, got n = {} and p = {}",
                self.n(),
                self.p()
            ));
        }
        let dependent = dependent_columns(&self.x);
        if !dependent.is_empty() {
            return Err(Error::RankDeficient {
                columns: dependent.iter().map(|&j| self.labels[j].clone()).collect(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, theta: &[f64]) -> Result<DVector<f64>> {
        if theta.len() != self.p() {
            return dim_err(format!("theta has length {}, p = {}", theta.len(), self.p()));
        }
        Ok(&self.x * DVector::from_column_slice(theta))
    }

    /// `||Y - X theta||^2 / n`.
    pub fn mse(&self, theta: &[f64]) -> Result<f64> {
        let r = &self.y - self.predict(theta)?;
        Ok(r.norm_squared() / self.n() as f64)
    }

    /// `1/2 ||Y - X theta||^2 + lambda ||theta||_1`.
    pub fn lasso_objective(&self, theta: &[f64], lambda: f64) -> Result<f64> {
        let r = &self.y - self.predict(theta)?;
        Ok(0.5 * r.norm_squared() + lambda * theta.iter().map(|t| t.abs()).sum::<f64>())
    }
}

/// Columns lying in the span of earlier columns, by modified Gram-Schmidt.
fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut dependent = Vec::new();
    for (j, col) in x.column_iter().enumerate() {
        let scale = col.norm();
        let mut v = col.into_owned();
        // two passes keep the residual orthogonal in floating point
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let r = v.norm();
        if scale == 0.0 || r <= RANK_TOL * scale {
            dependent.push(j);
        } else {
            basis.push(v / r);
        }
    }
    dependent
}

fn qr_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = x.clone().qr();
    let qty = qr.q().tr_mul(y);
    qr.r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("triangular solve failed in least squares".into()))
}

/// Ordinary least squares through a QR factorization.
pub fn least_squares(ds: &Dataset) -> Result<DVector<f64>> {
    ds.check_estimable()?;
    qr_solve(&ds.x, &ds.y)
}

/// Least squares on the columns in `active`, zeros elsewhere.
pub fn refit_least_squares(ds: &Dataset, active: &[usize]) -> Result<DVector<f64>> {
    if active.is_empty() {
        return arg_err("refit needs at least one active term");
    }
    if let Some(&j) = active.iter().find(|&&j| j >= ds.p()) {
        return dim_err(format!("active index {j} out of range for p = {}", ds.p()));
    }
    let mut cols = active.to_vec();
    cols.sort_unstable();
    cols.dedup();
    if ds.n() <= cols.len() {
        return arg_err(format!(
            "refit needs more observations than active terms, got n = {} and {} terms",
            ds.n(),
            cols.len()
        ));
    }
    let sub = ds.x.select_columns(&cols);
    let dependent = dependent_columns(&sub);
    if !dependent.is_empty() {
        return Err(Error::RankDeficient {
            columns: dependent.iter().map(|&j| ds.labels[cols[j]].clone()).collect(),
        });
    }
    let beta = qr_solve(&sub, &ds.y)?;
    let mut theta = DVector::zeros(ds.p());
    for (k, &j) in cols.iter().enumerate() {
        theta[j] = beta[k];
    }
    Ok(theta)
}

/// `n_lambda` equally spaced values from 0 to `max_i |(X'Y)_i|`. A zero maximum
/// collapses the grid to the single value 0.
pub fn lambda_grid(ds: &Dataset, n_lambda: usize) -> Result<Vec<f64>> {
    if n_lambda < 2 {
        return arg_err(format!("n_lambda must be at least 2, got {n_lambda}"));
    }
    let lmax = ds.xty.amax();
    if lmax == 0.0 {
        return Ok(vec![0.0]);
    }
    let steps = (n_lambda - 1) as f64;
    Ok((0..n_lambda)
        .map(|i| {
            if i == n_lambda - 1 {
                lmax
            } else {
                lmax * i as f64 / steps
            }
        })
        .collect())
}

/// Orthant of the parameter space as a vector of signs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return arg_err("sign entries must be +1 or -1");
        }
        Ok(SignVector(signs))
    }

    pub fn positive(p: usize) -> Self {
        SignVector(vec![1; p])
    }

    /// Signs of `theta`, with `+1` for zeros.
    pub fn from_theta(theta: &[f64]) -> Self {
        SignVector(theta.iter().map(|&t| if t < 0.0 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, j: usize) -> f64 {
        f64::from(self.0[j])
    }

    pub fn flipped(&self, j: usize) -> Self {
        let mut s = self.0.clone();
        s[j] = -s[j];
        SignVector(s)
    }
}

fn orthant_rows(cs: &ConstraintSystem, s: &SignVector) -> DMatrix<f64> {
    let p = s.len();
    let r = cs.n_rows();
    let mut c = DMatrix::zeros(r + p, p);
    for (i, row) in cs.rows.iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            c[(i, j)] = a * s.get(j);
        }
    }
    for j in 0..p {
        c[(r + j, j)] = s.get(j);
    }
    c
}

fn orthant_linear_term(ds: &Dataset, s: &SignVector, lambda: f64) -> DVector<f64> {
    DVector::from_fn(ds.p(), |j, _| ds.xty[j] - lambda * s.get(j))
}

/// The QP restricting the lasso criterion to orthant `s`:
/// minimize `1/2 theta' X'X theta - (X'Y - lambda s)' theta` subject to
/// `[A diag(s); diag(s)] theta >= 0`.
pub fn orthant_subproblem(
    ds: &Dataset,
    cs: &ConstraintSystem,
    s: &SignVector,
    lambda: f64,
) -> Result<QpProblem> {
    let p = ds.p();
    if cs.columns != p || s.len() != p {
        return dim_err(format!(
            "dataset has {p} columns, constraints {}, sign vector {}",
            cs.columns,
            s.len()
        ));
    }
    let r = cs.n_rows();
    QpProblem::new(
        ds.gram.clone(),
        orthant_linear_term(ds, s, lambda),
        orthant_rows(cs, s),
        DVector::zeros(r + p),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMethod {
    Constrained,
    Relaxed,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathOptions {
    /// Refit least squares on each point's active terms.
    pub refit: bool,
    /// Tolerance for constraint satisfaction checks.
    pub feas_tol: f64,
    /// Tolerance for the relaxed proxy check. The relaxed Hessian is only
    /// `delta`-definite, so active rows carry larger rounding error.
    pub proxy_tol: f64,
    /// Relative zero threshold; the absolute one is `zero_tol_rel * (1 + ||theta||_inf)`.
    pub zero_tol_rel: f64,
    /// Ridge on the `theta-` block of the relaxed Hessian. `None` selects
    /// `1e-6 * mean(diag(X'X))`.
    pub delta: Option<f64>,
    pub qp: QpOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            refit: true,
            feas_tol: 1e-8,
            proxy_tol: 1e-6,
            zero_tol_rel: 1e-8,
            delta: None,
            qp: QpOptions::default(),
        }
    }
}

/// Split coefficients of a relaxed fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RelaxedParts {
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    /// `theta+ + theta-` satisfies the constraint system.
    pub proxy_hierarchy_ok: bool,
    /// `min(theta+_i, theta-_i)` is below the zero threshold for every `i`.
    pub complementary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub theta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orthant: Option<SignVector>,
    pub objective: f64,
    pub active_terms: Vec<String>,
    #[serde(skip)]
    pub active: Vec<usize>,
    pub hierarchy_ok: bool,
    /// `theta` satisfies the constraint system.
    pub constraints_ok: bool,
    pub refit_theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    pub relaxed: Option<RelaxedParts>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PathStats {
    pub qp_solves: usize,
    pub orthant_switches: usize,
    /// Relaxed points with `theta+_i theta-_i` not close to zero.
    pub non_complementary: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LassoPath {
    pub method: PathMethod,
    pub constraint: ConstraintSystem,
    pub labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardization: Option<Standardization>,
    pub points: Vec<PathPoint>,
    pub stats: PathStats,
}

impl LassoPath {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numerical(format!("path serialization failed: {e}")))
    }

    /// One row per lambda, one column per term.
    pub fn to_wide_csv(&self, use_refit: bool) -> String {
        let mut out = String::from("lambda");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for pt in &self.points {
            let coefs = match (&pt.refit_theta, use_refit) {
                (Some(r), true) => r,
                _ => &pt.theta,
            };
            out.push_str(&pt.lambda.to_string());
            for c in coefs {
                out.push(',');
                out.push_str(&c.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return arg_err("lambda grid is empty");
    }
    if grid.iter().any(|l| !l.is_finite() || *l < 0.0) {
        return arg_err("lambda values must be finite and non-negative");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return arg_err("lambda grid must be strictly increasing");
    }
    Ok(())
}

fn zero_threshold(theta: &[f64], rel: f64) -> f64 {
    rel * (1.0 + theta.iter().fold(0.0f64, |a, t| a.max(t.abs())))
}

fn active_indices(theta: &[f64], tol: f64) -> Vec<usize> {
    (0..theta.len()).filter(|&j| theta[j].abs() > tol).collect()
}

fn hierarchy_holds(model: &Model, kind: ConstraintKind, active: &[usize]) -> bool {
    let sub = model.subset(active);
    match kind {
        ConstraintKind::W => is_weak_hierarchical(&sub),
        _ => is_strong_hierarchical(&sub),
    }
}

/// Fills in the fields shared by every path method.
fn make_point(
    ds: &Dataset,
    cs: &ConstraintSystem,
    lambda: f64,
    theta: Vec<f64>,
    opts: &PathOptions,
) -> Result<PathPoint> {
    let tol = zero_threshold(&theta, opts.zero_tol_rel);
    // rounding residue on coordinates pinned by several rows at once
    let theta: Vec<f64> = theta
        .into_iter()
        .map(|v| if v.abs() <= tol { 0.0 } else { v })
        .collect();
    let active = active_indices(&theta, tol);
    let objective = ds.lasso_objective(&theta, lambda)?;
    if !objective.is_finite() {
        return Err(Error::Numerical(format!("non-finite objective at lambda = {lambda}")));
    }
    let refit_theta = if !opts.refit {
        None
    } else if active.is_empty() {
        Some(vec![0.0; ds.p()])
    } else {
        refit_least_squares(ds, &active)
            .ok()
            .map(|v| v.as_slice().to_vec())
    };
    Ok(PathPoint {
        lambda,
        orthant: None,
        objective,
        active_terms: active.iter().map(|&j| ds.labels[j].clone()).collect(),
        hierarchy_ok: hierarchy_holds(&ds.model, cs.kind, &active),
        constraints_ok: cs.satisfies(&theta, opts.feas_tol)?,
        active,
        theta,
        refit_theta,
        relaxed: None,
    })
}

/// Solution of one orthant QP with orthant rows snapped to exact zeros.
struct OrthantFit {
    signs: SignVector,
    theta: Vec<f64>,
    objective: f64,
    active_set: Vec<usize>,
}

struct OrthantSolver<'a> {
    ds: &'a Dataset,
    cs: &'a ConstraintSystem,
    factor: HessianFactor,
    solver: QpSolver,
    solves: usize,
}

impl<'a> OrthantSolver<'a> {
    fn new(ds: &'a Dataset, cs: &'a ConstraintSystem, qp: QpOptions) -> Result<Self> {
        Ok(OrthantSolver {
            ds,
            cs,
            factor: HessianFactor::new(&ds.gram, 0.0, true)?,
            solver: QpSolver::new(qp),
            solves: 0,
        })
    }

    fn solve(&mut self, s: &SignVector, lambda: f64, hint: &[usize]) -> Result<Option<OrthantFit>> {
        let problem = orthant_subproblem(self.ds, self.cs, s, lambda)?;
        let sol: QpSolution = self.solver.solve_factored(&problem, &self.factor, hint)?;
        self.solves += 1;
        if sol.status == QpStatus::Infeasible {
            return Ok(None);
        }
        let r = self.cs.n_rows();
        let mut theta = sol.x.as_slice().to_vec();
        for &i in &sol.active_set {
            if i >= r {
                theta[i - r] = 0.0;
            }
        }
        let objective = self.ds.lasso_objective(&theta, lambda)?;
        Ok(Some(OrthantFit {
            signs: s.clone(),
            theta,
            objective,
            active_set: sol.active_set,
        }))
    }
}

fn strictly_better(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - 1e-12 * (1.0 + incumbent.abs())
}

fn check_shapes(ds: &Dataset, cs: &ConstraintSystem) -> Result<()> {
    if cs.columns != ds.p() {
        return dim_err(format!(
            "constraint system has {} columns, dataset has {}",
            cs.columns,
            ds.p()
        ));
    }
    Ok(())
}

/// Passes of the single-flip search per term, as a guard against runaway searches.
const MAX_SEARCH_PASSES_PER_TERM: usize = 2;

/// Constrained lasso by orthant search. The search starts in the orthant of the
/// least-squares estimate. At each lambda it moves to the best single-flip
/// neighbour while that is strictly better, starting from the previous winner;
/// ties keep the incumbent.
pub fn constrained_lasso_path(
    ds: &Dataset,
    cs: &ConstraintSystem,
    grid: &[f64],
    opts: &PathOptions,
) -> Result<LassoPath> {
    check_shapes(ds, cs)?;
    check_grid(grid)?;
    let ols = least_squares(ds)?;
    let mut current = SignVector::from_theta(ols.as_slice());
    let mut hint: Vec<usize> = Vec::new();
    let mut solver = OrthantSolver::new(ds, cs, opts.qp)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut switches = 0;
    for &lambda in grid {
        let mut best = solver.solve(&current, lambda, &hint)?;
        let mut seen = HashSet::from([current.clone()]);
        let mut centre = current.clone();
        // descend through single flips until no neighbour improves; the objective
        // strictly decreases between passes, so the cap is only a guard
        for _ in 0..MAX_SEARCH_PASSES_PER_TERM * ds.p() {
            for j in 0..ds.p() {
                let signs = centre.flipped(j);
                if !seen.insert(signs.clone()) {
                    continue;
                }
                if let Some(c) = solver.solve(&signs, lambda, &hint)? {
                    let better = match &best {
                        Some(b) => strictly_better(c.objective, b.objective),
                        None => true,
                    };
                    if better {
                        best = Some(c);
                    }
                }
            }
            match &best {
                Some(b) if b.signs != centre => centre = b.signs.clone(),
                _ => break,
            }
        }
        // theta = 0 satisfies every homogeneous orthant system
        let best = best.ok_or_else(|| {
            Error::Numerical(format!("every explored orthant infeasible at lambda = {lambda}"))
        })?;
        if best.signs != current {
            switches += 1;
        }
        current = best.signs.clone();
        hint = best.active_set;
        let mut pt = make_point(ds, cs, lambda, best.theta, opts)?;
        pt.objective = best.objective;
        pt.orthant = Some(best.signs);
        points.push(pt);
    }
    Ok(LassoPath {
        method: PathMethod::Constrained,
        constraint: cs.clone(),
        labels: ds.labels.clone(),
        standardization: ds.standardization.clone(),
        points,
        stats: PathStats {
            qp_solves: solver.solves,
            orthant_switches: switches,
            non_complementary: 0,
        },
    })
}

/// Unconstrained lasso. Each lambda starts in the previous orthant; zero
/// coordinates whose gradient `|X_j'(Y - X theta)|` exceeds lambda are flipped
/// until the optimality conditions hold.
pub fn plain_lasso_path(ds: &Dataset, grid: &[f64], opts: &PathOptions) -> Result<LassoPath> {
    check_grid(grid)?;
    let cs = ConstraintSystem::none(ds.p());
    let ols = least_squares(ds)?;
    let mut current = SignVector::from_theta(ols.as_slice());
    let mut hint: Vec<usize> = Vec::new();
    let mut solver = OrthantSolver::new(ds, &cs, opts.qp)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut switches = 0;
    let max_repairs = 10 * ds.p().max(1);
    for &lambda in grid {
        let mut repairs = 0;
        let fit = loop {
            let fit = solver
                .solve(&current, lambda, &hint)?
                .ok_or_else(|| Error::Numerical("orthant QP reported infeasible".into()))?;
            let theta = DVector::from_column_slice(&fit.theta);
            let grad = &ds.xty - &ds.gram * &theta;
            let slack = 1e-9 * (1.0 + lambda) + 1e-12 * ds.xty.amax();
            let mut next = current.clone();
            let mut changed = false;
            for j in 0..ds.p() {
                if fit.theta[j] == 0.0 && grad[j].abs() > lambda + slack {
                    let want: i8 = if grad[j] > 0.0 { 1 } else { -1 };
                    if next.signs()[j] != want {
                        next = next.flipped(j);
                        changed = true;
                    }
                }
            }
            if !changed {
                // zero coordinates that meet the optimality condition but were not
                // pinned by an orthant row, as happens at lambda = max |X'Y|
                let mut fit = fit;
                let tol = zero_threshold(&fit.theta, opts.zero_tol_rel);
                for j in 0..ds.p() {
                    if fit.theta[j].abs() <= tol && grad[j].abs() <= lambda + slack {
                        fit.theta[j] = 0.0;
                    }
                }
                break fit;
            }
            repairs += 1;
            if repairs > max_repairs {
                return Err(Error::Numerical(format!(
                    "sign repair did not settle at lambda = {lambda}"
                )));
            }
            hint = fit.active_set;
            current = next;
        };
        if fit.signs != current {
            switches += 1;
        }
        switches += repairs;
        hint = fit.active_set;
        let mut pt = make_point(ds, &cs, lambda, fit.theta, opts)?;
        pt.objective = fit.objective;
        pt.orthant = Some(fit.signs);
        points.push(pt);
    }
    Ok(LassoPath {
        method: PathMethod::Plain,
        constraint: cs.clone(),
        labels: ds.labels.clone(),
        standardization: ds.standardization.clone(),
        points,
        stats: PathStats {
            qp_solves: solver.solves,
            orthant_switches: switches,
            non_complementary: 0,
        },
    })
}

/// Default ridge for the relaxed Hessian.
pub fn default_delta(ds: &Dataset) -> f64 {
    let mean = ds.gram.diagonal().mean();
    if mean > 0.0 {
        1e-6 * mean
    } else {
        1e-6
    }
}

/// Relaxed constrained lasso over `u = (theta+, theta-)`:
/// minimize `1/2 u' H u - ((X'Y; -X'Y) - lambda 1)' u` subject to `B u >= 0`, with
/// `H = [[G, -G], [-G, G + delta I]]` and `G = X'X`.
pub fn relaxed_lasso_path(
    ds: &Dataset,
    cs: &ConstraintSystem,
    grid: &[f64],
    opts: &PathOptions,
) -> Result<LassoPath> {
    check_shapes(ds, cs)?;
    check_grid(grid)?;
    ds.check_estimable()?;
    let p = ds.p();
    let delta = opts.delta.unwrap_or_else(|| default_delta(ds));
    if !(delta > 0.0) || !delta.is_finite() {
        return arg_err(format!("delta must be positive, got {delta}"));
    }
    let mut h = DMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        for k in 0..p {
            let g = ds.gram[(i, k)];
            h[(i, k)] = g;
            h[(i, k + p)] = -g;
            h[(i + p, k)] = -g;
            h[(i + p, k + p)] = g;
        }
        h[(i + p, i + p)] += delta;
    }
    let factor = HessianFactor::new(&h, 0.0, false).map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!("{msg}; try a larger delta than {delta:e}")),
        other => other,
    })?;
    let b = build_relaxed_b(cs, p)?.matrix;
    let r = cs.n_rows();
    let solver = QpSolver::new(opts.qp);
    let mut hint: Vec<usize> = Vec::new();
    let mut points = Vec::with_capacity(grid.len());
    let mut non_complementary = 0;
    for &lambda in grid {
        let d = DVector::from_fn(2 * p, |i, _| {
            if i < p {
                ds.xty[i] - lambda
            } else {
                -ds.xty[i - p] - lambda
            }
        });
        let problem = QpProblem::new(h.clone(), d, b.clone(), DVector::zeros(r + 2 * p))?;
        let sol = solver.solve_factored(&problem, &factor, &hint)?;
        if sol.status == QpStatus::Infeasible {
            return Err(Error::Numerical(format!(
                "relaxed QP reported infeasible at lambda = {lambda}"
            )));
        }
        let mut u = sol.x.as_slice().to_vec();
        for &i in &sol.active_set {
            if i >= r {
                u[i - r] = 0.0;
            }
        }
        let (plus, minus) = u.split_at(p);
        let theta: Vec<f64> = plus.iter().zip(minus).map(|(a, b)| a - b).collect();
        let proxy: Vec<f64> = plus.iter().zip(minus).map(|(a, b)| a + b).collect();
        let tol = zero_threshold(&proxy, opts.zero_tol_rel);
        let complementary = plus.iter().zip(minus).all(|(a, b)| a.min(*b) <= tol);
        if !complementary {
            non_complementary += 1;
        }
        let parts = RelaxedParts {
            theta_plus: plus.to_vec(),
            theta_minus: minus.to_vec(),
            proxy_hierarchy_ok: cs.satisfies(&proxy, opts.proxy_tol)?,
            complementary,
        };
        hint = sol.active_set;
        let mut pt = make_point(ds, cs, lambda, theta, opts)?;
        pt.relaxed = Some(parts);
        points.push(pt);
    }
    Ok(LassoPath {
        method: PathMethod::Relaxed,
        constraint: cs.clone(),
        labels: ds.labels.clone(),
        standardization: ds.standardization.clone(),
        points,
        stats: PathStats {
            qp_solves: grid.len(),
            orthant_switches: 0,
            non_complementary,
        },
    })
}

/// Point with the lowest validation MSE, using refit coefficients when asked and
/// available. Ties go to the larger lambda. Returns the index and the point.
pub fn select_by_validation<'a>(
    path: &'a LassoPath,
    valid: &Dataset,
    use_refit: bool,
) -> Result<(usize, &'a PathPoint)> {
    if path.points.is_empty() {
        return arg_err("path has no points");
    }
    if valid.p() != path.labels.len() {
        return dim_err(format!(
            "validation design has {} columns, path has {} terms",
            valid.p(),
            path.labels.len()
        ));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, pt) in path.points.iter().enumerate() {
        let coefs = match (&pt.refit_theta, use_refit) {
            (Some(r), true) => r,
            _ => &pt.theta,
        };
        let mse = valid.mse(coefs)?;
        // later points have larger lambda, so ties move forward
        if best.is_none_or(|(_, b)| mse <= b) {
            best = Some((i, mse));
        }
    }
    let (i, _) = best.expect("path is non-empty");
    Ok((i, &path.points[i]))
}
