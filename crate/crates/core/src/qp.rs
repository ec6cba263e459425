//! Dense strictly convex quadratic programs
//!
//! ```text
//!     minimize     1/2 x' G x - d' x
//!     subject to   C x >= c
//! ```
//!
//! solved with the dual active-set method of Goldfarb and Idnani. The method starts
//! at the unconstrained minimizer, repeatedly adds the most violated constraint and
//! drops active constraints whose multipliers would turn negative. It never needs a
//! primal feasible starting point.
//!
//! The factorization is kept as `J = L^-T Q` and an upper triangular `R` with
//! `L^-1 N = Q [R; 0]`, where `G = L L'` and `N` holds the active constraint normals
//! as columns.

use log::trace;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{arg_err, dim_err, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub g: DMatrix<f64>,
    pub d: DVector<f64>,
    pub c_mat: DMatrix<f64>,
    pub c_vec: DVector<f64>,
    /// Added to the diagonal of `G` only if its Cholesky factorization fails.
    /// Zero selects `1e-8 * mean(diag(G))`.
    pub ridge: f64,
}

impl QpProblem {
    pub fn new(
        g: DMatrix<f64>,
        d: DVector<f64>,
        c_mat: DMatrix<f64>,
        c_vec: DVector<f64>,
    ) -> Result<Self> {
        let n = d.len();
        if g.nrows() != n || g.ncols() != n {
            return dim_err(format!("G is {}x{}, d has {n} entries", g.nrows(), g.ncols()));
        }
        if c_mat.ncols() != n {
            return dim_err(format!("C has {} columns, expected {n}", c_mat.ncols()));
        }
        if c_mat.nrows() != c_vec.len() {
            return dim_err(format!(
                "C has {} rows, c has {} entries",
                c_mat.nrows(),
                c_vec.len()
            ));
        }
        Ok(QpProblem {
            g,
            d,
            c_mat,
            c_vec,
            ridge: 0.0,
        })
    }

    /// Problem without constraints.
    pub fn unconstrained(g: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        let n = d.len();
        QpProblem::new(g, d, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn m(&self) -> usize {
        self.c_vec.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.g * x)) - self.d.dot(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

/// Residuals of the optimality conditions at the returned point.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize)]
pub struct KktResiduals {
    /// `||G x - d - C_act' u||`.
    pub stationarity: f64,
    /// Largest violation `max(0, c_i - C_i x)`.
    pub primal: f64,
    /// Largest negative multiplier, as a positive number.
    pub dual: f64,
    /// Largest `|C_i x - c_i|` over active rows.
    pub complementarity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub active_set: Vec<usize>,
    /// Multipliers aligned with `active_set`.
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
    /// Constraint additions and deletions, hint additions included.
    pub iterations: usize,
    /// Additions and deletions beyond those made to install a warm-start hint.
    pub active_set_changes: usize,
    /// Ridge added to `G`, zero when the factorization succeeded as given.
    pub ridge_applied: f64,
    pub kkt: KktResiduals,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpOptions {
    /// Normalized violation `(C_i x - c_i) / ||C_i||` below `-feas_tol` marks a row violated.
    pub feas_tol: f64,
    pub mult_tol: f64,
    /// Iteration cap is `max_iter_factor * (n + m)`.
    pub max_iter_factor: usize,
    pub trace: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            feas_tol: 1e-9,
            mult_tol: 1e-9,
            max_iter_factor: 50,
            trace: false,
        }
    }
}

/// Solver state for one problem: iterate, active set and the `J`, `R` factors.
struct ActiveSetState<'a> {
    p: &'a QpProblem,
    g: DMatrix<f64>,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    x: DVector<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
    row_norms: Vec<f64>,
    opts: QpOptions,
    iterations: usize,
    changes: usize,
    max_iter: usize,
}

const DEPENDENCE_TOL: f64 = 1e-10;

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    (a / h, b / h, h)
}

/// Cholesky-based factor of a Hessian, reusable across problems sharing `G`.
///
/// Holds `J = L^-T` with `G + ridge*I = L L'`.
#[derive(Clone, Debug)]
pub struct HessianFactor {
    g: DMatrix<f64>,
    j: DMatrix<f64>,
    ridge: f64,
}

impl HessianFactor {
    /// Factors `g`, retrying with a ridge when the plain factorization fails and
    /// `allow_ridge` is set. `ridge == 0` selects `1e-8 * mean(diag(G))`.
    pub fn new(g: &DMatrix<f64>, ridge: f64, allow_ridge: bool) -> Result<Self> {
        let n = g.nrows();
        if g.ncols() != n {
            return dim_err(format!("G is {}x{}", n, g.ncols()));
        }
        let scale = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let asym = (0..n)
            .flat_map(|i| (0..i).map(move |k| (i, k)))
            .fold(0.0f64, |acc, (i, k)| acc.max((g[(i, k)] - g[(k, i)]).abs()));
        if asym > 1e-12 * scale {
            return arg_err(format!("G is not symmetric (max asymmetry {asym:e})"));
        }
        let (chol, ridge) = match Cholesky::new(g.clone()) {
            Some(c) => (c, 0.0),
            None if allow_ridge => {
                let ridge = if ridge > 0.0 {
                    ridge
                } else {
                    let mean_diag = g.diagonal().mean();
                    if mean_diag > 0.0 {
                        1e-8 * mean_diag
                    } else {
                        1e-8
                    }
                };
                let c = Cholesky::new(g + DMatrix::identity(n, n) * ridge).ok_or_else(|| {
                    Error::Numerical(format!(
                        "G is not positive definite even after adding ridge {ridge:e}"
                    ))
                })?;
                (c, ridge)
            }
            None => return Err(Error::Numerical("G is not positive definite".into())),
        };
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let mut g = g.clone();
        for i in 0..n {
            g[(i, i)] += ridge;
        }
        Ok(HessianFactor {
            g,
            j: l_inv.transpose(),
            ridge,
        })
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

impl<'a> ActiveSetState<'a> {
    fn new(p: &'a QpProblem, factor: &HessianFactor, opts: QpOptions) -> Result<Self> {
        let n = p.n();
        if factor.dim() != n {
            return dim_err(format!("factor has dimension {}, problem {n}", factor.dim()));
        }
        let j = factor.j.clone();
        let x = &j * j.tr_mul(&p.d);
        let row_norms = (0..p.m())
            .map(|i| p.c_mat.row(i).norm())
            .collect::<Vec<_>>();
        let max_iter = opts.max_iter_factor * (n + p.m()).max(1);
        Ok(ActiveSetState {
            p,
            g: factor.g.clone(),
            j,
            r: DMatrix::zeros(n, n),
            x,
            active: Vec::new(),
            u: Vec::new(),
            row_norms,
            opts,
            iterations: 0,
            changes: 0,
            max_iter,
        })
    }

    fn n(&self) -> usize {
        self.p.n()
    }

    fn q(&self) -> usize {
        self.active.len()
    }

    fn slack(&self, i: usize) -> f64 {
        self.p.c_mat.row(i).transpose().dot(&self.x) - self.p.c_vec[i]
    }

    fn objective(&self) -> f64 {
        0.5 * self.x.dot(&(&self.g * &self.x)) - self.p.d.dot(&self.x)
    }

    fn bump(&mut self) -> Result<()> {
        self.iterations += 1;
        if self.iterations > self.max_iter {
            return Err(Error::IterationLimit(self.max_iter));
        }
        Ok(())
    }

    /// Most violated inactive row by normalized slack; lowest index on ties.
    fn most_violated(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.p.m() {
            if self.row_norms[i] == 0.0 || self.active.contains(&i) {
                continue;
            }
            let v = self.slack(i) / self.row_norms[i];
            if v < -self.opts.feas_tol && best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }

    /// `J' n` for the normal of row `i`.
    fn project(&self, i: usize) -> DVector<f64> {
        self.j.tr_mul(&self.p.c_mat.row(i).transpose())
    }

    /// Solves `R r = v` for the leading `q` entries.
    fn back_substitute(&self, v: &[f64]) -> Vec<f64> {
        let q = self.q();
        let mut r = v[..q].to_vec();
        for i in (0..q).rev() {
            for k in i + 1..q {
                r[i] -= self.r[(i, k)] * r[k];
            }
            r[i] /= self.r[(i, i)];
        }
        r
    }

    fn rotate_j_columns(&mut self, a: usize, b: usize, c: f64, s: f64) {
        let n = self.n();
        for row in 0..n {
            let ja = self.j[(row, a)];
            let jb = self.j[(row, b)];
            self.j[(row, a)] = c * ja + s * jb;
            self.j[(row, b)] = -s * ja + c * jb;
        }
    }

    /// Appends row `i` with multiplier `mult`; `dvec = J' n_i` on entry.
    fn add_constraint(&mut self, i: usize, mut dvec: DVector<f64>, mult: f64) {
        let n = self.n();
        let q = self.q();
        for k in (q + 1..n).rev() {
            if dvec[k] == 0.0 {
                continue;
            }
            let (c, s, h) = givens(dvec[k - 1], dvec[k]);
            dvec[k - 1] = h;
            dvec[k] = 0.0;
            self.rotate_j_columns(k - 1, k, c, s);
        }
        for k in 0..=q {
            self.r[(k, q)] = dvec[k];
        }
        self.active.push(i);
        self.u.push(mult);
        if self.opts.trace {
            trace!("add constraint {i}, active set {:?}", self.active);
        }
    }

    /// Removes the active constraint at position `pos` and restores the factors.
    fn drop_constraint(&mut self, pos: usize) {
        let q = self.q();
        for col in pos..q - 1 {
            for row in 0..=col + 1 {
                self.r[(row, col)] = self.r[(row, col + 1)];
            }
        }
        for row in 0..q {
            self.r[(row, q - 1)] = 0.0;
        }
        for k in pos..q - 1 {
            let a = self.r[(k, k)];
            let b = self.r[(k + 1, k)];
            if b == 0.0 {
                continue;
            }
            let (c, s, h) = givens(a, b);
            self.r[(k, k)] = h;
            self.r[(k + 1, k)] = 0.0;
            for col in k + 1..q - 1 {
                let ra = self.r[(k, col)];
                let rb = self.r[(k + 1, col)];
                self.r[(k, col)] = c * ra + s * rb;
                self.r[(k + 1, col)] = -s * ra + c * rb;
            }
            self.rotate_j_columns(k, k + 1, c, s);
        }
        let removed = self.active.remove(pos);
        self.u.remove(pos);
        if self.opts.trace {
            trace!("drop constraint {removed}, active set {:?}", self.active);
        }
    }

    /// `J_2 v_2`, the primal direction built from the trailing columns of `J`.
    fn null_space_combination(&self, v: &DVector<f64>) -> DVector<f64> {
        let q = self.q();
        let n = self.n();
        let mut z = DVector::zeros(n);
        for k in q..n {
            if v[k] != 0.0 {
                z.axpy(v[k], &self.j.column(k), 1.0);
            }
        }
        z
    }

    /// Moves `x` to the minimizer on the current active manifold and recomputes multipliers.
    fn recenter(&mut self) {
        let grad = &self.g * &self.x - &self.p.d;
        let jt_grad = self.j.tr_mul(&grad);
        let neg: DVector<f64> = -&jt_grad;
        let step = self.null_space_combination(&neg);
        self.x += step;
        let grad = &self.g * &self.x - &self.p.d;
        let jt_grad = self.j.tr_mul(&grad);
        self.u = self.back_substitute(jt_grad.as_slice());
    }

    /// Installs hinted constraints as temporary equalities, then releases the ones
    /// whose multipliers come out negative.
    fn install_hint(&mut self, hint: &[usize]) -> Result<()> {
        let mut installed = false;
        for &i in hint {
            if i >= self.p.m() {
                return arg_err(format!("warm-start index {i} out of range"));
            }
            if self.active.contains(&i) || self.row_norms[i] == 0.0 {
                continue;
            }
            let dvec = self.project(i);
            let q = self.q();
            let d2 = dvec.rows(q, self.n() - q).norm();
            if d2 <= DEPENDENCE_TOL * dvec.norm() {
                continue;
            }
            self.bump()?;
            let z = self.null_space_combination(&dvec);
            let t = -self.slack(i) / (d2 * d2);
            let r = self.back_substitute(dvec.as_slice());
            self.x.axpy(t, &z, 1.0);
            for (uk, rk) in self.u.iter_mut().zip(&r) {
                *uk -= t * rk;
            }
            self.add_constraint(i, dvec, t);
            installed = true;
        }
        if !installed {
            return Ok(());
        }
        self.recenter();
        loop {
            let worst = self
                .u
                .iter()
                .enumerate()
                .filter(|(_, &v)| v < -self.opts.mult_tol)
                .fold(None, |best: Option<(usize, f64)>, (k, &v)| match best {
                    Some((_, b)) if b <= v => best,
                    _ => Some((k, v)),
                });
            match worst {
                Some((k, _)) => {
                    self.bump()?;
                    self.changes += 1;
                    self.drop_constraint(k);
                    self.recenter();
                }
                None => break,
            }
        }
        Ok(())
    }

    /// Main dual active-set loop. Returns `false` when the constraints are infeasible.
    fn run(&mut self) -> Result<bool> {
        if (0..self.p.m()).any(|i| self.row_norms[i] == 0.0 && self.p.c_vec[i] > self.opts.feas_tol) {
            return Ok(false);
        }
        #[cfg(debug_assertions)]
        let mut last_obj = self.objective();
        while let Some(p_idx) = self.most_violated() {
            let mut mult = 0.0;
            loop {
                self.bump()?;
                self.changes += 1;
                let dvec = self.project(p_idx);
                let q = self.q();
                let n = self.n();
                let d2 = dvec.rows(q, n - q).norm();
                let dependent = d2 <= DEPENDENCE_TOL * dvec.norm();
                let r = self.back_substitute(dvec.as_slice());

                // largest dual step keeping multipliers non-negative
                let mut t1 = f64::INFINITY;
                let mut drop_pos = None;
                for (k, (&uk, &rk)) in self.u.iter().zip(&r).enumerate() {
                    if rk > 0.0 {
                        let t = uk / rk;
                        if t < t1 {
                            t1 = t;
                            drop_pos = Some(k);
                        }
                    }
                }
                let slack = self.slack(p_idx);
                let t2 = if dependent {
                    f64::INFINITY
                } else {
                    -slack / (d2 * d2)
                };
                if t1.is_infinite() && t2.is_infinite() {
                    return Ok(false);
                }
                if t2 <= t1 {
                    let z = self.null_space_combination(&dvec);
                    self.x.axpy(t2, &z, 1.0);
                    for (uk, rk) in self.u.iter_mut().zip(&r) {
                        *uk -= t2 * rk;
                    }
                    mult += t2;
                    self.add_constraint(p_idx, dvec, mult);
                    break;
                }
                if !dependent {
                    let z = self.null_space_combination(&dvec);
                    self.x.axpy(t1, &z, 1.0);
                }
                for (uk, rk) in self.u.iter_mut().zip(&r) {
                    *uk -= t1 * rk;
                }
                mult += t1;
                self.drop_constraint(drop_pos.expect("finite partial step has a drop index"));
            }
            #[cfg(debug_assertions)]
            {
                let obj = self.objective();
                debug_assert!(
                    obj >= last_obj - 1e-9 * (1.0 + last_obj.abs()),
                    "dual objective decreased from {last_obj} to {obj}"
                );
                last_obj = obj;
            }
        }
        Ok(true)
    }

    fn kkt(&self) -> KktResiduals {
        let mut grad = &self.g * &self.x - &self.p.d;
        for (&i, &ui) in self.active.iter().zip(&self.u) {
            grad.axpy(-ui, &self.p.c_mat.row(i).transpose(), 1.0);
        }
        let primal = (0..self.p.m())
            .map(|i| (-self.slack(i)).max(0.0))
            .fold(0.0, f64::max);
        let dual = self.u.iter().map(|&v| (-v).max(0.0)).fold(0.0, f64::max);
        let complementarity = self
            .active
            .iter()
            .map(|&i| self.slack(i).abs())
            .fold(0.0, f64::max);
        KktResiduals {
            stationarity: grad.norm(),
            primal,
            dual,
            complementarity,
        }
    }
}

/// Reusable solver configuration.
#[derive(Clone, Copy, Debug, Default)]
pub struct QpSolver {
    pub options: QpOptions,
}

impl QpSolver {
    pub fn new(options: QpOptions) -> Self {
        QpSolver { options }
    }

    pub fn solve(&self, p: &QpProblem) -> Result<QpSolution> {
        self.solve_warm(p, &[])
    }

    /// Same contract as [`QpSolver::solve`]; `initial_active` only changes how many
    /// active-set updates are needed.
    pub fn solve_warm(&self, p: &QpProblem, initial_active: &[usize]) -> Result<QpSolution> {
        let factor = HessianFactor::new(&p.g, p.ridge, true)?;
        self.solve_factored(p, &factor, initial_active)
    }

    /// Solves with a precomputed factor of `p.g`.
    pub fn solve_factored(
        &self,
        p: &QpProblem,
        factor: &HessianFactor,
        initial_active: &[usize],
    ) -> Result<QpSolution> {
        let mut st = ActiveSetState::new(p, factor, self.options)?;
        let ridge = factor.ridge;
        st.install_hint(initial_active)?;
        let hint_iterations = st.iterations;
        let feasible = st.run()?;
        let kkt = st.kkt();
        let objective = st.objective();
        let iterations = st.iterations;
        let changes = st.changes;
        debug_assert!(iterations >= hint_iterations);
        Ok(QpSolution {
            x: st.x,
            active_set: st.active,
            multipliers: st.u,
            objective,
            status: if feasible {
                QpStatus::Optimal
            } else {
                QpStatus::Infeasible
            },
            iterations,
            active_set_changes: changes,
            ridge_applied: ridge,
            kkt,
        })
    }
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    QpSolver::default().solve(p)
}

pub fn solve_qp_warm(p: &QpProblem, initial_active: &[usize]) -> Result<QpSolution> {
    QpSolver::default().solve_warm(p, initial_active)
}
