//! CSV input and polynomial design expansion.

use std::io::Read;
use std::path::Path;

use hierlasso::{Dataset, Model, Standardization};
use nalgebra::{DMatrix, DVector};

use crate::CliError;

/// Numeric table with one designated response column.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    /// Predictor names in column order; predictor `i` plays the role of `x{i+1}`.
    pub predictors: Vec<String>,
    pub response: String,
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl RawTable {
    pub fn from_path(path: &Path, response: Option<&str>) -> Result<Self, CliError> {
        let file = std::fs::File::open(path)
            .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
        RawTable::from_reader(file, response)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    /// Reads comma-separated text with a header row. The response defaults to the
    /// last column.
    pub fn from_reader<R: Read>(reader: R, response: Option<&str>) -> Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| format!("bad header: {e}"))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < 2 {
            return Err("need at least one predictor and a response column".into());
        }
        let resp_idx = match response {
            Some(name) => header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| format!("response column {name:?} not found"))?,
            None => header.len() - 1,
        };
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| format!("row {}: {e}", line + 2))?;
            if rec.len() != header.len() {
                return Err(format!(
                    "row {} has {} fields, header has {}",
                    line + 2,
                    rec.len(),
                    header.len()
                ));
            }
            let mut row = Vec::with_capacity(header.len() - 1);
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| format!("row {}, column {}: {cell:?} is not a number", line + 2, header[j]))?;
                if !v.is_finite() {
                    return Err(format!("row {}, column {}: non-finite value", line + 2, header[j]));
                }
                if j == resp_idx {
                    y.push(v);
                } else {
                    row.push(v);
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err("no data rows".into());
        }
        let response = header[resp_idx].clone();
        let predictors = header
            .into_iter()
            .enumerate()
            .filter(|(j, _)| *j != resp_idx)
            .map(|(_, h)| h)
            .collect();
        Ok(RawTable {
            predictors,
            response,
            rows,
            y,
        })
    }

    pub fn k(&self) -> usize {
        self.predictors.len()
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }
}

/// Evaluates every model term on the rows of `points`.
pub fn design_matrix(model: &Model, points: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    if let Some(r) = points.iter().find(|r| r.len() != model.k()) {
        return Err(CliError::Input(format!(
            "data has {} predictors, model has k = {}",
            r.len(),
            model.k()
        )));
    }
    let x = DMatrix::from_fn(points.len(), model.len(), |i, j| {
        model.terms()[j].evaluate(&points[i])
    });
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Input("a monomial column overflowed to a non-finite value".into()));
    }
    Ok(x)
}

/// How to preprocess the expanded design.
#[derive(Clone, Debug, PartialEq)]
pub enum Scaling {
    Raw,
    /// Fit a standardization on this table.
    Fit,
    /// Center columns and response on this table without rescaling.
    Center,
    /// Reuse one fitted elsewhere.
    Apply(Standardization),
}

/// Column and response means with unit scales, so that an unpenalized
/// intercept is fitted while coefficients keep their original scale.
pub fn centering(x: &DMatrix<f64>, y: &DVector<f64>) -> Standardization {
    Standardization {
        x_means: x.column_iter().map(|c| c.mean()).collect(),
        x_scales: vec![1.0; x.ncols()],
        y_mean: y.mean(),
    }
}

/// Polynomial design for `model` built from the predictor columns of `raw`.
pub fn expand_design(raw: &RawTable, model: &Model, scaling: &Scaling) -> Result<Dataset, CliError> {
    if model.is_empty() {
        return Err(CliError::Input(
            "model has no terms besides the intercept, which is not fitted".into(),
        ));
    }
    if raw.k() != model.k() {
        return Err(CliError::Input(format!(
            "data has {} predictors, model has k = {}",
            raw.k(),
            model.k()
        )));
    }
    let x = design_matrix(model, &raw.rows)?;
    let y = DVector::from_column_slice(&raw.y);
    let ds = match scaling {
        Scaling::Raw => Dataset::new(model.clone(), x, y),
        Scaling::Fit => Dataset::standardized(model.clone(), x, y),
        Scaling::Center => {
            let st = centering(&x, &y);
            Dataset::with_standardization(model.clone(), x, y, st)
        }
        Scaling::Apply(st) => Dataset::with_standardization(model.clone(), x, y, st.clone()),
    };
    Ok(ds?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hierlasso::Exponent;

    const SMALL: &str = "x1,x2,x3,y\n0,-1,-1,-2\n-1,0,0,0\n-1,-1,-1,1\n-1,0,1,1\n-3,-1,1,-1\n-1,0,1,-1\n7,3,-1,2\n";

    fn model() -> Model {
        let terms = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, 0, 1]]
            .iter()
            .map(|t| Exponent::new(t.to_vec()))
            .collect();
        Model::new(3, terms).unwrap()
    }

    #[test]
    fn reads_table() {
        let t = RawTable::from_reader(SMALL.as_bytes(), None).unwrap();
        assert_eq!(t.predictors, vec!["x1", "x2", "x3"]);
        assert_eq!(t.response, "y");
        assert_eq!(t.n(), 7);
        let t = RawTable::from_reader(SMALL.as_bytes(), Some("x1")).unwrap();
        assert_eq!(t.predictors, vec!["x2", "x3", "y"]);
        assert_eq!(t.y[6], 7.0);
        assert!(RawTable::from_reader(SMALL.as_bytes(), Some("z")).is_err());
        assert!(RawTable::from_reader("a,b\n1,x\n".as_bytes(), None).is_err());
        assert!(RawTable::from_reader("a,b\n1,2,3\n".as_bytes(), None).is_err());
    }

    #[test]
    fn interaction_cells() {
        let t = RawTable::from_reader(SMALL.as_bytes(), None).unwrap();
        let ds = expand_design(&t, &model(), &Scaling::Raw).unwrap();
        // row (0,-1,-1), term x1*x2
        assert_eq!(ds.x()[(0, 3)], 0.0);
        // row (-3,-1,1), term x1*x3
        assert_eq!(ds.x()[(4, 4)], -3.0);
    }

    #[test]
    fn centering_keeps_scale() {
        let t = RawTable::from_reader(SMALL.as_bytes(), None).unwrap();
        let raw = expand_design(&t, &model(), &Scaling::Raw).unwrap();
        let c = expand_design(&t, &model(), &Scaling::Center).unwrap();
        for j in 0..5 {
            let mean = raw.x().column(j).mean();
            for i in 0..7 {
                assert!((c.x()[(i, j)] - (raw.x()[(i, j)] - mean)).abs() < 1e-14);
            }
        }
        assert!(c.y().sum().abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatch_and_intercept_only() {
        let t = RawTable::from_reader(SMALL.as_bytes(), None).unwrap();
        let m2 = Model::new(2, vec![Exponent::unit(2, 0)]).unwrap();
        assert!(matches!(expand_design(&t, &m2, &Scaling::Raw), Err(CliError::Input(_))));
        let only = Model::new(3, vec![Exponent::zero(3)]).unwrap();
        assert!(matches!(expand_design(&t, &only, &Scaling::Raw), Err(CliError::Input(_))));
    }
}
