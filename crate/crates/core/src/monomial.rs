//! Monomials, polynomial models and the divisibility order between their terms.
//!
//! A monomial `x^a = x1^a1 * ... * xk^ak` is identified with its exponent vector.
//! `x^a` precedes `x^b` when `b - a >= 0` componentwise and the two differ. The
//! relations kept for a model are only those whose degrees differ by exactly one;
//! the remaining ones follow by transitivity.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Result};

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Exponent(Vec<u16>);

impl Exponent {
    pub fn new(entries: Vec<u16>) -> Self {
        Exponent(entries)
    }

    /// Builds an exponent from wider integers, rejecting entries that do not fit in 16 bits.
    pub fn from_u32(entries: &[u32]) -> Result<Self> {
        entries
            .iter()
            .map(|&e| {
                u16::try_from(e).map_err(|_| {
                    crate::Error::Argument(format!("exponent entry {e} exceeds {}", u16::MAX))
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Exponent)
    }

    pub fn zero(k: usize) -> Self {
        Exponent(vec![0; k])
    }

    /// Exponent of the single variable `x_{var+1}`.
    pub fn unit(k: usize, var: usize) -> Self {
        let mut e = vec![0; k];
        e[var] = 1;
        Exponent(e)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[u16] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| u32::from(e)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Componentwise `self <= other`. Equal exponents compare true.
    fn le_componentwise(&self, other: &Exponent) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// All exponents `g` with `0 <= g <= self` componentwise, including zero and `self`.
    pub fn divisors(&self) -> Vec<Exponent> {
        let mut out = vec![Vec::with_capacity(self.k())];
        for &top in &self.0 {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=top).map(move |e| {
                        let mut v = prefix.clone();
                        v.push(e);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(Exponent).collect()
    }

    /// Divisors of degree exactly one less than `self`.
    pub fn immediate_divisors(&self) -> Vec<Exponent> {
        (0..self.k())
            .filter(|&i| self.0[i] > 0)
            .map(|i| {
                let mut v = self.0.clone();
                v[i] -= 1;
                Exponent(v)
            })
            .collect()
    }

    /// Value of the monomial at a point.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(i32::from(e)))
            .product()
    }

    /// Label such as `x1*x2^3`; the zero exponent is `1`.
    pub fn label(&self) -> String {
        if self.is_zero() {
            return "1".to_string();
        }
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &e)| e > 0)
            .map(|(i, &e)| {
                if e == 1 {
                    format!("x{}", i + 1)
                } else {
                    format!("x{}^{}", i + 1, e)
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Column order used everywhere: ascending degree, and within a degree the larger
/// monomial under graded reverse lexicographic order comes first (`x1, x2, x3, x1*x2, ...`).
pub fn graded_cmp(a: &Exponent, b: &Exponent) -> Ordering {
    a.degree().cmp(&b.degree()).then_with(|| {
        // grevlex: a > b when the rightmost nonzero entry of a - b is negative
        for (x, y) in a.0.iter().zip(&b.0).rev() {
            match x.cmp(y) {
                Ordering::Equal => continue,
                // a larger in grevlex -> sorts first
                Ordering::Less => return Ordering::Less,
                Ordering::Greater => return Ordering::Greater,
            }
        }
        Ordering::Equal
    })
}

/// `true` when `x^a` strictly divides `x^b`.
pub fn divides(a: &Exponent, b: &Exponent) -> Result<bool> {
    if a.k() != b.k() {
        return dim_err(format!("exponents of length {} and {}", a.k(), b.k()));
    }
    Ok(a != b && a.le_componentwise(b))
}

/// A finite set of candidate terms in `k` variables, intercept removed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct Model {
    k: usize,
    terms: Vec<Exponent>,
    intercept_present: bool,
}

/// On-disk form: `{"k": 3, "terms": [[1,0,0], ...]}`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    k: usize,
    terms: Vec<Vec<u32>>,
}

impl TryFrom<ModelFile> for Model {
    type Error = crate::Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let terms = f
            .terms
            .iter()
            .map(|t| Exponent::from_u32(t))
            .collect::<Result<Vec<_>>>()?;
        Model::new(f.k, terms)
    }
}

impl From<Model> for ModelFile {
    fn from(m: Model) -> Self {
        let mut terms: Vec<Vec<u32>> = Vec::with_capacity(m.terms.len() + 1);
        if m.intercept_present {
            terms.push(vec![0; m.k]);
        }
        terms.extend(
            m.terms
                .iter()
                .map(|t| t.entries().iter().map(|&e| u32::from(e)).collect()),
        );
        ModelFile { k: m.k, terms }
    }
}

impl Model {
    /// Validates and orders the terms. The zero exponent is accepted, recorded and removed.
    pub fn new(k: usize, terms: Vec<Exponent>) -> Result<Self> {
        if k == 0 {
            return arg_err("a model needs at least one variable");
        }
        let mut seen = HashSet::with_capacity(terms.len());
        let mut intercept_present = false;
        let mut kept = Vec::with_capacity(terms.len());
        for t in terms {
            if t.k() != k {
                return dim_err(format!("term {:?} has length {}, expected {k}", t.0, t.k()));
            }
            if !seen.insert(t.clone()) {
                return arg_err(format!("duplicate term {t}"));
            }
            if t.is_zero() {
                intercept_present = true;
            } else {
                kept.push(t);
            }
        }
        kept.sort_by(graded_cmp);
        Ok(Model {
            k,
            terms: kept,
            intercept_present,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> &[Exponent] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn intercept_present(&self) -> bool {
        self.intercept_present
    }

    pub fn index_of(&self, e: &Exponent) -> Option<usize> {
        self.terms
            .binary_search_by(|t| graded_cmp(t, e))
            .ok()
    }

    pub fn contains(&self, e: &Exponent) -> bool {
        self.index_of(e).is_some()
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(Exponent::label).collect()
    }

    /// Model made of the terms at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Model {
        let mut terms: Vec<Exponent> = indices.iter().map(|&i| self.terms[i].clone()).collect();
        terms.sort_by(graded_cmp);
        terms.dedup();
        Model {
            k: self.k,
            terms,
            intercept_present: self.intercept_present,
        }
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(Exponent::degree).max().unwrap_or(0)
    }
}

/// A relation `x^divisor < x^multiple`, stored as indices into the model's term order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub divisor: usize,
    pub multiple: usize,
}

/// Degree-one divisibility relations of a model.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RelationSet {
    pub relations: Vec<Relation>,
}

impl RelationSet {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    /// Relations as exponent pairs.
    pub fn pairs<'a>(&'a self, m: &'a Model) -> impl Iterator<Item = (&'a Exponent, &'a Exponent)> {
        self.relations
            .iter()
            .map(move |r| (&m.terms[r.divisor], &m.terms[r.multiple]))
    }
}

/// Divisibility relations between model terms whose degrees differ by one.
///
/// The intercept never takes part since [`Model`] strips it. Order follows the
/// model's term order, divisor first.
pub fn generate_relations(m: &Model) -> RelationSet {
    let mut relations = Vec::new();
    for (i, a) in m.terms.iter().enumerate() {
        let da = a.degree();
        for (j, b) in m.terms.iter().enumerate() {
            if i != j && b.degree() == da + 1 && a.le_componentwise(b) {
                relations.push(Relation {
                    divisor: i,
                    multiple: j,
                });
            }
        }
    }
    RelationSet { relations }
}

/// Hasse diagram of a model: terms are nodes and degree-one divisibility relations
/// are edges. Ascendants of a node are its divisors, descendants its multiples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HasseDiagram {
    model: Model,
    relations: RelationSet,
    ascendants: Vec<Vec<usize>>,
    descendants: Vec<Vec<usize>>,
}

impl HasseDiagram {
    pub fn new(m: &Model) -> Self {
        let relations = generate_relations(m);
        let mut ascendants = vec![Vec::new(); m.len()];
        let mut descendants = vec![Vec::new(); m.len()];
        for r in relations.iter() {
            descendants[r.divisor].push(r.multiple);
            ascendants[r.multiple].push(r.divisor);
        }
        HasseDiagram {
            model: m.clone(),
            relations,
            ascendants,
            descendants,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn relations(&self) -> &RelationSet {
        &self.relations
    }

    pub fn node_count(&self) -> usize {
        self.model.len()
    }

    pub fn edge_count(&self) -> usize {
        self.relations.len()
    }

    /// `A(node)`: immediate divisors present in the model.
    pub fn ascendants(&self, node: usize) -> &[usize] {
        &self.ascendants[node]
    }

    /// `B(node)`: immediate multiples present in the model.
    pub fn descendants(&self, node: usize) -> &[usize] {
        &self.descendants[node]
    }

    /// Graphviz rendering with divisors ranked above their multiples.
    pub fn export_dot(&self) -> String {
        let labels = self.model.labels();
        let mut out = String::from("digraph hasse {\n  rankdir=TB;\n  node [shape=plaintext];\n");
        let max_deg = self.model.max_degree();
        for deg in 1..=max_deg {
            let names: Vec<String> = self
                .model
                .terms()
                .iter()
                .zip(&labels)
                .filter(|(t, _)| t.degree() == deg)
                .map(|(_, l)| format!("\"{l}\";"))
                .collect();
            if !names.is_empty() {
                out.push_str(&format!("  {{ rank=same; {} }}\n", names.join(" ")));
            }
        }
        for r in self.relations.iter() {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\";\n",
                labels[r.divisor], labels[r.multiple]
            ));
        }
        out.push_str("}\n");
        out
    }
}

pub fn build_hasse(m: &Model) -> HasseDiagram {
    HasseDiagram::new(m)
}

/// Every divisor of every term is in the model (the intercept counts as present).
pub fn is_strong_hierarchical(m: &Model) -> bool {
    let present: HashSet<&Exponent> = m.terms.iter().collect();
    m.terms.iter().all(|t| {
        t.divisors()
            .iter()
            .all(|g| g.is_zero() || g == t || present.contains(g))
    })
}

/// Every term of degree two or more has at least one immediate divisor in the model.
pub fn is_weak_hierarchical(m: &Model) -> bool {
    let present: HashSet<&Exponent> = m.terms.iter().collect();
    m.terms.iter().all(|t| {
        t.degree() < 2 || t.immediate_divisors().iter().any(|g| present.contains(g))
    })
}

/// Maximal terms under divisibility: those with no multiple in the model.
pub fn directing_monomials(m: &Model) -> Vec<Exponent> {
    m.terms
        .iter()
        .filter(|a| {
            !m.terms
                .iter()
                .any(|b| *a != b && a.le_componentwise(b))
        })
        .cloned()
        .collect()
}

/// The hierarchical model generated by the divisors of the given directing monomials.
pub fn model_from_directing_monomials(k: usize, directors: &[Exponent]) -> Result<Model> {
    if directors.is_empty() {
        return arg_err("at least one directing monomial is required");
    }
    let mut seen = HashSet::new();
    let mut terms = Vec::new();
    for d in directors {
        if d.k() != k {
            return dim_err(format!("directing monomial {d} has length {}, expected {k}", d.k()));
        }
        for g in d.divisors() {
            if seen.insert(g.clone()) {
                terms.push(g);
            }
        }
    }
    Model::new(k, terms)
}

/// All terms of degree one and two; pure squares are left out when `square_free`.
pub fn full_quadratic_model(k: usize, square_free: bool) -> Result<Model> {
    if k == 0 {
        return arg_err("k must be at least 1");
    }
    let mut terms: Vec<Exponent> = (0..k).map(|i| Exponent::unit(k, i)).collect();
    for i in 0..k {
        let start = if square_free { i + 1 } else { i };
        for j in start..k {
            let mut e = vec![0u16; k];
            e[i] += 1;
            e[j] += 1;
            terms.push(Exponent::new(e));
        }
    }
    Model::new(k, terms)
}

/// All terms of degree `1..=degree` in `k` variables.
pub fn full_model(k: usize, degree: u16) -> Result<Model> {
    if k == 0 || degree == 0 {
        return arg_err("k and degree must be at least 1");
    }
    let corner = Exponent::new(vec![degree; k]);
    let terms = corner
        .divisors()
        .into_iter()
        .filter(|t| t.degree() <= u32::from(degree))
        .collect();
    Model::new(k, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[u16]) -> Exponent {
        Exponent::new(v.to_vec())
    }

    fn example_model() -> Model {
        Model::new(
            3,
            vec![
                e(&[0, 0, 0]),
                e(&[1, 0, 0]),
                e(&[0, 1, 0]),
                e(&[0, 0, 1]),
                e(&[1, 1, 0]),
                e(&[1, 0, 1]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn divides_examples() {
        assert!(divides(&e(&[1, 0, 0]), &e(&[1, 1, 0])).unwrap());
        assert!(!divides(&e(&[1, 0, 0]), &e(&[1, 0, 0])).unwrap());
        assert!(!divides(&e(&[1, 0, 0]), &e(&[0, 1, 0])).unwrap());
        assert!(matches!(
            divides(&e(&[1, 0]), &e(&[1, 0, 0])),
            Err(crate::Error::Dimension(_))
        ));
    }

    #[test]
    fn model_strips_intercept_and_orders_terms() {
        let m = example_model();
        assert!(m.intercept_present());
        assert_eq!(m.labels(), vec!["x1", "x2", "x3", "x1*x2", "x1*x3"]);
        let q = full_quadratic_model(2, false).unwrap();
        assert_eq!(q.labels(), vec!["x1", "x2", "x1^2", "x1*x2", "x2^2"]);
    }

    #[test]
    fn model_rejects_duplicates_and_bad_lengths() {
        assert!(matches!(
            Model::new(2, vec![e(&[1, 0]), e(&[1, 0])]),
            Err(crate::Error::Argument(_))
        ));
        assert!(matches!(
            Model::new(2, vec![e(&[1, 0, 0])]),
            Err(crate::Error::Dimension(_))
        ));
        assert!(Exponent::from_u32(&[70_000]).is_err());
    }

    #[test]
    fn example_relations() {
        let m = example_model();
        let r = generate_relations(&m);
        let labels: Vec<(String, String)> = r
            .pairs(&m)
            .map(|(a, b)| (a.label(), b.label()))
            .collect();
        assert_eq!(
            labels,
            vec![
                ("x1".into(), "x1*x2".into()),
                ("x1".into(), "x1*x3".into()),
                ("x2".into(), "x1*x2".into()),
                ("x3".into(), "x1*x3".into()),
            ]
        );
    }

    #[test]
    fn linear_and_chain_relations() {
        let lin = Model::new(3, vec![e(&[1, 0, 0]), e(&[0, 1, 0]), e(&[0, 0, 1])]).unwrap();
        assert!(generate_relations(&lin).is_empty());
        let chain = Model::new(1, vec![e(&[1]), e(&[2]), e(&[3])]).unwrap();
        let r = generate_relations(&chain);
        assert_eq!(
            r.relations,
            vec![
                Relation { divisor: 0, multiple: 1 },
                Relation { divisor: 1, multiple: 2 }
            ]
        );
    }

    #[test]
    fn hasse_indices() {
        let h = build_hasse(&example_model());
        assert_eq!((h.node_count(), h.edge_count()), (5, 4));
        let m = Model::new(2, vec![e(&[1, 0]), e(&[0, 1]), e(&[1, 1])]).unwrap();
        let h = build_hasse(&m);
        assert_eq!(h.descendants(0), &[2]);
        assert_eq!(h.ascendants(2), &[0, 1]);
        let lin = Model::new(3, vec![e(&[1, 0, 0]), e(&[0, 1, 0]), e(&[0, 0, 1])]).unwrap();
        let h = build_hasse(&lin);
        assert_eq!((h.node_count(), h.edge_count()), (3, 0));
    }

    #[test]
    fn hierarchy_checks() {
        assert!(is_strong_hierarchical(&example_model()));
        let only_inter = Model::new(2, vec![e(&[1, 1])]).unwrap();
        assert!(!is_strong_hierarchical(&only_inter));
        assert!(!is_weak_hierarchical(&only_inter));
        let half = Model::new(2, vec![e(&[1, 0]), e(&[1, 1])]).unwrap();
        assert!(!is_strong_hierarchical(&half));
        assert!(is_weak_hierarchical(&half));
    }

    #[test]
    fn directing_monomial_examples() {
        let d = directing_monomials(&example_model());
        assert_eq!(d, vec![e(&[1, 1, 0]), e(&[1, 0, 1])]);
        let single = Model::new(1, vec![e(&[1])]).unwrap();
        assert_eq!(directing_monomials(&single), vec![e(&[1])]);
    }

    #[test]
    fn models_from_directors() {
        let truth =
            model_from_directing_monomials(2, &[e(&[1, 3]), e(&[2, 2]), e(&[3, 0])]).unwrap();
        assert_eq!(truth.len(), 11);
        assert!(truth.intercept_present());
        let mut d = directing_monomials(&truth);
        d.sort_by(graded_cmp);
        let mut expected = vec![e(&[1, 3]), e(&[2, 2]), e(&[3, 0])];
        expected.sort_by(graded_cmp);
        assert_eq!(d, expected);
        let cand = model_from_directing_monomials(2, &[e(&[4, 4])]).unwrap();
        assert_eq!(cand.len(), 24);
        let one = model_from_directing_monomials(1, &[e(&[1])]).unwrap();
        assert_eq!(one.terms(), &[e(&[1])]);
        assert!(model_from_directing_monomials(2, &[]).is_err());
    }

    #[test]
    fn quadratic_model_sizes() {
        assert_eq!(full_quadratic_model(8, false).unwrap().len(), 44);
        assert_eq!(full_quadratic_model(8, true).unwrap().len(), 36);
        assert_eq!(full_quadratic_model(1, false).unwrap().labels(), vec!["x1", "x1^2"]);
        assert_eq!(full_model(3, 3).unwrap().len(), 19);
        assert_eq!(full_model(5, 3).unwrap().len(), 55);
    }

    #[test]
    fn dot_export() {
        let dot = build_hasse(&example_model()).export_dot();
        assert_eq!(dot.matches("->").count(), 4);
        assert!(dot.contains("\"x1\" -> \"x1*x2\";"));
        assert!(dot.contains("{ rank=same; \"x1\"; \"x2\"; \"x3\"; }"));

        let lin = Model::new(2, vec![e(&[1, 0]), e(&[0, 1])]).unwrap();
        let dot = build_hasse(&lin).export_dot();
        assert_eq!(dot.matches("->").count(), 0);
        assert!(dot.contains("\"x2\""));

        let single = Model::new(1, vec![e(&[2])]).unwrap();
        let dot = build_hasse(&single).export_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("\"x1^2\""));
    }

    #[test]
    fn model_json_round_trip() {
        let json = r#"{"k": 3, "terms": [[1,0,0],[0,1,0],[0,0,1],[1,1,0],[1,0,1]]}"#;
        let m: Model = serde_json::from_str(json).unwrap();
        assert_eq!(m.len(), 5);
        assert!(!m.intercept_present());
        let back: Model = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        let dup = r#"{"k": 1, "terms": [[1],[1]]}"#;
        assert!(serde_json::from_str::<Model>(dup).is_err());
    }
}
