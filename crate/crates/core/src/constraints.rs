//! Hierarchy constraints `A|theta| >= 0` read off a Hasse diagram.
//!
//! Three families are built:
//! - `H`: one row per edge, `|theta_a| >= |theta_b|`;
//! - `S`: one row per node with multiples, `w_a |theta_a| >= sum_{b in B(a)} |theta_b|`;
//! - `W`: one row per node with divisors, `sum_{a in A(b)} |theta_a| >= w_b |theta_b|`.
//!
//! Columns follow the model's term order.

use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Result};
use crate::monomial::{Exponent, HasseDiagram};

/// Default absolute tolerance on `A|theta|` when checking satisfaction.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    H,
    S,
    W,
    #[serde(rename = "none")]
    None,
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintKind::H => "H",
            ConstraintKind::S => "S",
            ConstraintKind::W => "W",
            ConstraintKind::None => "none",
        })
    }
}

impl std::str::FromStr for ConstraintKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" | "h" => Ok(ConstraintKind::H),
            "S" | "s" => Ok(ConstraintKind::S),
            "W" | "w" => Ok(ConstraintKind::W),
            "none" => Ok(ConstraintKind::None),
            other => arg_err(format!("unknown constraint kind {other:?}")),
        }
    }
}

/// Weights `w_a` for `S` rows and `w_b` for `W` rows.
///
/// `Count` resolves to `|B(a)|` for `S` and `|A(b)|` for `W`. `PerNode` must cover every
/// node that produces a row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Unit,
    Count,
    Constant(f64),
    PerNode(Vec<(Exponent, f64)>),
}

impl WeightScheme {
    fn validate(&self) -> Result<()> {
        match self {
            WeightScheme::Constant(c) if !(c.is_finite() && *c > 0.0) => {
                arg_err(format!("weight must be positive, got {c}"))
            }
            WeightScheme::PerNode(list) => {
                match list.iter().find(|(_, w)| !(w.is_finite() && *w > 0.0)) {
                    Some((e, w)) => arg_err(format!("weight for {e} must be positive, got {w}")),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    fn resolve(&self, node: &Exponent, count: usize) -> Result<f64> {
        match self {
            WeightScheme::Unit => Ok(1.0),
            WeightScheme::Count => Ok(count as f64),
            WeightScheme::Constant(c) => Ok(*c),
            WeightScheme::PerNode(list) => list
                .iter()
                .find(|(e, _)| e == node)
                .map(|(_, w)| *w)
                .ok_or_else(|| crate::Error::Argument(format!("no weight given for node {node}"))),
        }
    }
}

impl std::str::FromStr for WeightScheme {
    type Err = crate::Error;

    /// Parses `unit`, `count` or `const:<c>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(WeightScheme::Unit),
            "count" => Ok(WeightScheme::Count),
            _ => match s.strip_prefix("const:") {
                Some(v) => {
                    let c: f64 = v
                        .parse()
                        .map_err(|_| crate::Error::Argument(format!("bad weight value {v:?}")))?;
                    let w = WeightScheme::Constant(c);
                    w.validate()?;
                    Ok(w)
                }
                None => arg_err(format!("unknown weight scheme {s:?}")),
            },
        }
    }
}

/// The node or edge a constraint row was generated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowOrigin {
    Edge { divisor: usize, multiple: usize },
    Node(usize),
}

/// Dense system `A|theta| >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub kind: ConstraintKind,
    pub weights: WeightScheme,
    pub columns: usize,
    pub rows: Vec<Vec<f64>>,
    pub row_labels: Vec<String>,
    pub origins: Vec<RowOrigin>,
}

fn abs_label(l: &str) -> String {
    format!("|{l}|")
}

fn fmt_weight(w: f64) -> String {
    if w == 1.0 {
        String::new()
    } else {
        format!("{w}*")
    }
}

impl ConstraintSystem {
    /// The empty system on `p` columns.
    pub fn none(p: usize) -> Self {
        ConstraintSystem {
            kind: ConstraintKind::None,
            weights: WeightScheme::Unit,
            columns: p,
            rows: Vec::new(),
            row_labels: Vec::new(),
            origins: Vec::new(),
        }
    }

    /// Dispatches on `kind`; weights are ignored for `H` and `none`.
    pub fn build(kind: ConstraintKind, h: &HasseDiagram, weights: &WeightScheme) -> Result<Self> {
        match kind {
            ConstraintKind::H => Ok(build_h(h)),
            ConstraintKind::S => build_s(h, weights),
            ConstraintKind::W => build_w(h, weights),
            ConstraintKind::None => Ok(ConstraintSystem::none(h.node_count())),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.columns, |i, j| self.rows[i][j])
    }

    /// `A|theta|`, one entry per row.
    pub fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.columns {
            return dim_err(format!(
                "theta has length {}, system has {} columns",
                theta.len(),
                self.columns
            ));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| row.iter().zip(theta).map(|(a, t)| a * t.abs()).sum())
            .collect())
    }

    /// `A|theta| >= -tol` componentwise.
    pub fn satisfies(&self, theta: &[f64], tol: f64) -> Result<bool> {
        Ok(self.evaluate(theta)?.iter().all(|&v| v >= -tol))
    }

    /// Label of the first row violated beyond `tol`, if any.
    pub fn first_violation(&self, theta: &[f64], tol: f64) -> Result<Option<&str>> {
        Ok(self
            .evaluate(theta)?
            .iter()
            .position(|&v| v < -tol)
            .map(|i| self.row_labels[i].as_str()))
    }
}

pub fn satisfies(cs: &ConstraintSystem, theta: &[f64], tol: f64) -> Result<bool> {
    cs.satisfies(theta, tol)
}

/// One row `|theta_a| - |theta_b| >= 0` per Hasse edge.
pub fn build_h(h: &HasseDiagram) -> ConstraintSystem {
    let p = h.node_count();
    let labels = h.model().labels();
    let mut cs = ConstraintSystem::none(p);
    cs.kind = ConstraintKind::H;
    for r in h.relations().iter() {
        let mut row = vec![0.0; p];
        row[r.divisor] = 1.0;
        row[r.multiple] = -1.0;
        cs.rows.push(row);
        cs.row_labels.push(format!(
            "{} >= {}",
            abs_label(&labels[r.divisor]),
            abs_label(&labels[r.multiple])
        ));
        cs.origins.push(RowOrigin::Edge {
            divisor: r.divisor,
            multiple: r.multiple,
        });
    }
    cs
}

/// One row `w_a|theta_a| - sum_{b in B(a)} |theta_b| >= 0` per node with multiples.
pub fn build_s(h: &HasseDiagram, weights: &WeightScheme) -> Result<ConstraintSystem> {
    weights.validate()?;
    let p = h.node_count();
    let labels = h.model().labels();
    let mut cs = ConstraintSystem::none(p);
    cs.kind = ConstraintKind::S;
    cs.weights = weights.clone();
    for (a, term) in h.model().terms().iter().enumerate() {
        let desc = h.descendants(a);
        if desc.is_empty() {
            continue;
        }
        let w = weights.resolve(term, desc.len())?;
        let mut row = vec![0.0; p];
        row[a] = w;
        for &b in desc {
            row[b] = -1.0;
        }
        cs.rows.push(row);
        let rhs: Vec<String> = desc.iter().map(|&b| abs_label(&labels[b])).collect();
        cs.row_labels.push(format!(
            "{}{} >= {}",
            fmt_weight(w),
            abs_label(&labels[a]),
            rhs.join(" + ")
        ));
        cs.origins.push(RowOrigin::Node(a));
    }
    Ok(cs)
}

/// One row `sum_{a in A(b)} |theta_a| - w_b|theta_b| >= 0` per node with divisors.
pub fn build_w(h: &HasseDiagram, weights: &WeightScheme) -> Result<ConstraintSystem> {
    weights.validate()?;
    let p = h.node_count();
    let labels = h.model().labels();
    let mut cs = ConstraintSystem::none(p);
    cs.kind = ConstraintKind::W;
    cs.weights = weights.clone();
    for (b, term) in h.model().terms().iter().enumerate() {
        let asc = h.ascendants(b);
        if asc.is_empty() {
            continue;
        }
        let w = weights.resolve(term, asc.len())?;
        let mut row = vec![0.0; p];
        for &a in asc {
            row[a] = 1.0;
        }
        row[b] = -w;
        cs.rows.push(row);
        let lhs: Vec<String> = asc.iter().map(|&a| abs_label(&labels[a])).collect();
        cs.row_labels.push(format!(
            "{} >= {}{}",
            lhs.join(" + "),
            fmt_weight(w),
            abs_label(&labels[b])
        ));
        cs.origins.push(RowOrigin::Node(b));
    }
    Ok(cs)
}

/// Constraint matrix of the relaxed problem in `u = (theta+, theta-)`:
///
/// ```text
/// B = [ A  A ]
///     [ I  0 ]
///     [ 0  I ]
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedConstraintMatrix {
    pub matrix: DMatrix<f64>,
}

pub fn build_relaxed_b(cs: &ConstraintSystem, p: usize) -> Result<RelaxedConstraintMatrix> {
    if cs.columns != p {
        return dim_err(format!(
            "constraint system has {} columns, expected {p}",
            cs.columns
        ));
    }
    let r = cs.n_rows();
    let mut b = DMatrix::zeros(r + 2 * p, 2 * p);
    for (i, row) in cs.rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            b[(i, j)] = v;
            b[(i, j + p)] = v;
        }
    }
    for j in 0..2 * p {
        b[(r + j, j)] = 1.0;
    }
    Ok(RelaxedConstraintMatrix { matrix: b })
}

/// Outcome of sampling an implication between two constraint systems.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImplicationReport {
    pub samples: usize,
    /// Samples satisfying the antecedent.
    pub accepted: usize,
    /// Accepted samples violating the consequent.
    pub violations: usize,
    pub witness: Option<Vec<f64>>,
    /// Fewer than `samples / 100` draws satisfied the antecedent.
    pub low_acceptance: bool,
}

/// Draws `n` vectors with entries uniform on `[-2, 2]`, keeps those satisfying
/// `antecedent` exactly and counts how many of them violate `consequent`.
pub fn implication_samples(
    antecedent: &ConstraintSystem,
    consequent: &ConstraintSystem,
    n: usize,
    seed: u64,
) -> Result<ImplicationReport> {
    if antecedent.columns != consequent.columns {
        return dim_err(format!(
            "systems have {} and {} columns",
            antecedent.columns, consequent.columns
        ));
    }
    let p = antecedent.columns;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; p];
    let mut report = ImplicationReport {
        samples: n,
        accepted: 0,
        violations: 0,
        witness: None,
        low_acceptance: false,
    };
    for _ in 0..n {
        for t in theta.iter_mut() {
            *t = rng.random_range(-2.0..=2.0);
        }
        if !antecedent.satisfies(&theta, 0.0)? {
            continue;
        }
        report.accepted += 1;
        if !consequent.satisfies(&theta, DEFAULT_TOL)? {
            report.violations += 1;
            if report.witness.is_none() {
                report.witness = Some(theta.clone());
            }
        }
    }
    report.low_acceptance = report.accepted * 100 < n;
    Ok(report)
}
