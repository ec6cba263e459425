//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use hierlasso::constraints::RowOrigin;
use hierlasso::{
    orthant_subproblem, solve_qp, ConstraintKind, ConstraintSystem, Dataset, Exponent,
    HasseDiagram, Model, QpProblem, SignVector,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Table of the small synthetic example: columns x1, x2, x3, y.
pub const SMALL_TABLE: [[i64; 4]; 7] = [
    [0, -1, -1, -2],
    [-1, 0, 0, 0],
    [-1, -1, -1, 1],
    [-1, 0, 1, 1],
    [-3, -1, 1, -1],
    [-1, 0, 1, -1],
    [7, 3, -1, 2],
];

pub fn small_model() -> Model {
    let terms = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, 0, 1]]
        .iter()
        .map(|t| Exponent::new(t.to_vec()))
        .collect();
    Model::new(3, terms).unwrap()
}

/// Integer design for `small_model` on the small table, and the response.
pub fn small_design() -> (Vec<Vec<i64>>, Vec<i64>) {
    let m = small_model();
    let x = SMALL_TABLE
        .iter()
        .map(|r| {
            m.terms()
                .iter()
                .map(|t| {
                    t.entries()
                        .iter()
                        .zip(&r[..3])
                        .map(|(&e, &v)| v.pow(u32::from(e)))
                        .product()
                })
                .collect()
        })
        .collect();
    let y = SMALL_TABLE.iter().map(|r| r[3]).collect();
    (x, y)
}

pub fn small_dataset() -> Dataset {
    let (x, y) = small_design();
    let n = x.len();
    let p = x[0].len();
    let xm = DMatrix::from_fn(n, p, |i, j| x[i][j] as f64);
    let yv = DVector::from_fn(n, |i, _| y[i] as f64);
    Dataset::new(small_model(), xm, yv).unwrap()
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frac {
    pub num: i128,
    pub den: i128,
}

impl Frac {
    pub fn int(v: i128) -> Self {
        Frac { num: v, den: 1 }
    }

    fn norm(num: i128, den: i128) -> Self {
        let g = gcd(num, den).max(1);
        let s = if den < 0 { -1 } else { 1 };
        Frac {
            num: s * num / g,
            den: s * den / g,
        }
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::norm(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    pub fn sub(self, o: Frac) -> Frac {
        Frac::norm(self.num * o.den - o.num * self.den, self.den * o.den)
    }

    pub fn mul(self, o: Frac) -> Frac {
        Frac::norm(self.num * o.num, self.den * o.den)
    }

    pub fn div(self, o: Frac) -> Frac {
        Frac::norm(self.num * o.den, self.den * o.num)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Exact solution of `X'X b = X'y` on the given integer columns.
pub fn exact_normal_equations(x: &[Vec<i64>], y: &[i64], cols: &[usize]) -> Vec<f64> {
    let p = cols.len();
    let mut a = vec![vec![Frac::int(0); p + 1]; p];
    for (r, &i) in cols.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            let v: i64 = x.iter().map(|row| row[i] * row[j]).sum();
            a[r][c] = Frac::int(v as i128);
        }
        let v: i64 = x.iter().zip(y).map(|(row, yi)| row[i] * yi).sum();
        a[r][p] = Frac::int(v as i128);
    }
    for c in 0..p {
        let piv = (c..p).find(|&r| a[r][c].num != 0).expect("singular normal equations");
        a.swap(c, piv);
        for r in 0..p {
            if r != c && a[r][c].num != 0 {
                let f = a[r][c].div(a[c][c]);
                for k in c..=p {
                    a[r][k] = a[r][k].sub(f.mul(a[c][k]));
                }
            }
        }
    }
    (0..p).map(|r| a[r][p].div(a[r][r]).to_f64()).collect()
}

/// Minimizer of a strictly convex QP by enumerating candidate active sets.
/// Practical for `m <= 10`.
pub fn enumerate_qp(p: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = p.n();
    let m = p.m();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if act.len() > n {
            continue;
        }
        let q = act.len();
        let mut k = DMatrix::zeros(n + q, n + q);
        let mut rhs = DVector::zeros(n + q);
        k.view_mut((0, 0), (n, n)).copy_from(&p.g);
        for (r, &i) in act.iter().enumerate() {
            for j in 0..n {
                k[(j, n + r)] = -p.c_mat[(i, j)];
                k[(n + r, j)] = p.c_mat[(i, j)];
            }
            rhs[n + r] = p.c_vec[i];
        }
        rhs.rows_mut(0, n).copy_from(&p.d);
        let Some(sol) = k.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        if sol.rows(n, q).iter().any(|&u| u < -1e-9) {
            continue;
        }
        let slack = &p.c_mat * &x - &p.c_vec;
        if slack.iter().any(|&s| s < -1e-9) {
            continue;
        }
        let obj = p.objective(&x);
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((x, obj));
        }
    }
    best
}

/// Lowest lasso objective over all `2^p` orthants.
pub fn exhaustive_orthants(ds: &Dataset, cs: &ConstraintSystem, lambda: f64) -> (Vec<f64>, f64) {
    let p = ds.p();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1 << p) {
        let s = SignVector::new((0..p).map(|j| if mask & (1 << j) != 0 { -1 } else { 1 }).collect())
            .unwrap();
        let qp = orthant_subproblem(ds, cs, &s, lambda).unwrap();
        let sol = solve_qp(&qp).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        let theta = sol.x.as_slice().to_vec();
        let obj = ds.lasso_objective(&theta, lambda).unwrap();
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((theta, obj));
        }
    }
    best.expect("theta = 0 is feasible in every orthant")
}

/// Draws `|theta|` satisfying an `S` or `W` system by construction, with about a
/// third of the rows tight, then attaches random signs.
pub fn sample_feasible(cs: &ConstraintSystem, h: &HasseDiagram, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = cs.columns;
    let mut weight = vec![None; p];
    for (row, origin) in cs.rows.iter().zip(&cs.origins) {
        if let RowOrigin::Node(a) = origin {
            weight[*a] = Some(match cs.kind {
                ConstraintKind::S => row[*a],
                _ => -row[*a],
            });
        }
    }
    let mut abs = vec![0.0; p];
    let slack = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.3) {
            0.0
        } else {
            rng.random_range(0.0..1.0)
        }
    };
    match cs.kind {
        ConstraintKind::S => {
            for a in (0..p).rev() {
                abs[a] = match weight[a] {
                    Some(w) => {
                        h.descendants(a).iter().map(|&b| abs[b]).sum::<f64>() / w + slack(rng)
                    }
                    None => rng.random_range(0.0..2.0),
                };
            }
        }
        _ => {
            for b in 0..p {
                abs[b] = match weight[b] {
                    Some(w) => {
                        let sum: f64 = h.ascendants(b).iter().map(|&a| abs[a]).sum();
                        sum / w * (1.0 - slack(rng))
                    }
                    None => rng.random_range(0.0..2.0),
                };
            }
        }
    }
    abs.iter()
        .map(|&v| if rng.random_bool(0.5) { v } else { -v })
        .collect()
}

/// Random strictly convex QP with a known feasible point.
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
    let a = DMatrix::from_fn(n + 2, n, |_, _| rng.random_range(-1.0..1.0));
    let g = a.tr_mul(&a) + DMatrix::identity(n, n) * 0.1;
    let g = (&g + g.transpose()) * 0.5;
    let d = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let c_mat = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let c_vec = DVector::from_fn(m, |i, _| {
        let v = c_mat.row(i).transpose().dot(&x0);
        if rng.random_bool(0.3) {
            v
        } else {
            v - rng.random_range(0.0..1.0)
        }
    });
    QpProblem::new(g, d, c_mat, c_vec).unwrap()
}
