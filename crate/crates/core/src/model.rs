//! Model specification and design-matrix construction.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Relative tolerance for the rank-revealing collinearity check.
const RANK_TOL: f64 = 1e-10;

/// Distribution family of the composed error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "OLS")]
    Ols,
    #[serde(rename = "NHN")]
    Nhn,
    #[serde(rename = "NHN_HET")]
    NhnHet,
    #[serde(rename = "TN")]
    Tn,
}

impl Family {
    pub fn uses_ineff_vars(self) -> bool {
        matches!(self, Family::NhnHet | Family::Tn)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ols => "OLS",
            Family::Nhn => "NHN",
            Family::NhnHet => "NHN_HET",
            Family::Tn => "TN",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_true() -> bool {
    true
}

/// Which variables enter the frontier and the inefficiency function, and
/// under which distribution family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub frontier_vars: Vec<String>,
    #[serde(default)]
    pub ineff_vars: Vec<String>,
    /// Model ln(annual_kwh) rather than the raw level.
    #[serde(default = "default_true")]
    pub log_dependent: bool,
    #[serde(default = "default_true")]
    pub include_frontier_intercept: bool,
    #[serde(default = "default_true")]
    pub include_ineff_intercept: bool,
    /// Expand `income_quartile` into dummies for quartiles 2–4.
    #[serde(default)]
    pub income_quartile_one_hot: bool,
}

impl ModelSpec {
    pub fn new(family: Family, frontier_vars: &[&str], ineff_vars: &[&str]) -> Self {
        ModelSpec {
            family,
            frontier_vars: frontier_vars.iter().map(|s| s.to_string()).collect(),
            ineff_vars: ineff_vars.iter().map(|s| s.to_string()).collect(),
            log_dependent: true,
            include_frontier_intercept: true,
            include_ineff_intercept: true,
            income_quartile_one_hot: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.family.uses_ineff_vars() && !self.ineff_vars.is_empty() {
            return Err(Error::Spec(format!(
                "family {} does not take inefficiency variables",
                self.family
            )));
        }
        if self.frontier_vars.is_empty() && !self.include_frontier_intercept {
            return Err(Error::Spec(
                "frontier must have at least one variable or an intercept".to_string(),
            ));
        }
        for (list, what) in [(&self.frontier_vars, "frontier"), (&self.ineff_vars, "inefficiency")]
        {
            let mut seen = std::collections::HashSet::new();
            for v in list.iter() {
                if !seen.insert(v) {
                    return Err(Error::Spec(format!("duplicate {what} variable `{v}`")));
                }
            }
        }
        Ok(())
    }
}

/// Numeric matrices for one model on one dataset.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    /// Inefficiency design; `None` for OLS and plain NHN.
    pub z: Option<DMatrix<f64>>,
    pub labels_x: Vec<String>,
    pub labels_z: Vec<String>,
    pub log_dependent: bool,
}

impl DesignMatrices {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.z.as_ref().map_or(0, |z| z.ncols())
    }

    /// FNV-1a hash over labels, dimensions and raw matrix bytes; stored in
    /// fit artefacts so scoring can detect mismatched data.
    pub fn column_hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for lbl in self.labels_x.iter().chain(self.labels_z.iter()) {
            eat(lbl.as_bytes());
            eat(&[0xff]);
        }
        eat(&(self.n() as u64).to_le_bytes());
        eat(&(self.p() as u64).to_le_bytes());
        eat(&(self.q() as u64).to_le_bytes());
        eat(&[u8::from(self.log_dependent)]);
        for v in self.y.iter() {
            eat(&v.to_le_bytes());
        }
        for v in self.x.iter() {
            eat(&v.to_le_bytes());
        }
        if let Some(z) = &self.z {
            for v in z.iter() {
                eat(&v.to_le_bytes());
            }
        }
        format!("{h:016x}")
    }
}

/// Build the dependent vector and design matrices for a spec.
///
/// Columns appear exactly in declaration order, intercept first when
/// included. Rank deficiency in either matrix is rejected, naming the
/// offending column.
pub fn build(spec: &ModelSpec, ds: &Dataset) -> Result<DesignMatrices> {
    spec.validate()?;
    let n = ds.n();

    let y_raw = ds.column("annual_kwh").expect("annual_kwh is canonical");
    let y = if spec.log_dependent {
        DVector::from_iterator(n, y_raw.iter().map(|v| v.ln()))
    } else {
        DVector::from_vec(y_raw)
    };

    let (x, labels_x) = assemble(
        ds,
        &spec.frontier_vars,
        spec.include_frontier_intercept,
        spec.income_quartile_one_hot,
    )?;
    check_finite(&y, "y")?;
    check_finite_mat(&x, &labels_x)?;
    check_full_rank(&x, &labels_x)?;

    let (z, labels_z) = if spec.family.uses_ineff_vars() {
        let (z, labels_z) = assemble(
            ds,
            &spec.ineff_vars,
            spec.include_ineff_intercept,
            spec.income_quartile_one_hot,
        )?;
        check_finite_mat(&z, &labels_z)?;
        check_full_rank(&z, &labels_z)?;
        (Some(z), labels_z)
    } else {
        (None, Vec::new())
    };

    Ok(DesignMatrices { y, x, z, labels_x, labels_z, log_dependent: spec.log_dependent })
}

fn assemble(
    ds: &Dataset,
    vars: &[String],
    intercept: bool,
    income_one_hot: bool,
) -> Result<(DMatrix<f64>, Vec<String>)> {
    let n = ds.n();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    if intercept {
        columns.push(("const".to_string(), vec![1.0; n]));
    }
    for var in vars {
        if var == "income_quartile" && income_one_hot {
            for q in 2..=4u8 {
                let col: Vec<f64> = ds
                    .records()
                    .iter()
                    .map(|r| if r.income_quartile == q { 1.0 } else { 0.0 })
                    .collect();
                columns.push((format!("income_q{q}"), col));
            }
            continue;
        }
        let col = ds
            .column(var)
            .ok_or_else(|| Error::Spec(format!("unknown variable `{var}`")))?;
        columns.push((var.clone(), col));
    }
    let p = columns.len();
    let mut m = DMatrix::zeros(n, p);
    let mut labels = Vec::with_capacity(p);
    for (j, (label, col)) in columns.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            m[(i, j)] = v;
        }
        labels.push(label);
    }
    Ok((m, labels))
}

fn check_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid(format!("non-finite entry in {what}")));
    }
    Ok(())
}

fn check_finite_mat(m: &DMatrix<f64>, labels: &[String]) -> Result<()> {
    for j in 0..m.ncols() {
        if m.column(j).iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("non-finite entry in column `{}`", labels[j])));
        }
    }
    Ok(())
}

/// Modified Gram-Schmidt sweep with re-orthogonalization; the first column
/// whose residual norm falls below `RANK_TOL` times its original norm is
/// reported as linearly dependent.
fn check_full_rank(m: &DMatrix<f64>, labels: &[String]) -> Result<()> {
    let n = m.nrows();
    let p = m.ncols();
    if n < p {
        return Err(Error::InsufficientData { n, p });
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let col = m.column(j).into_owned();
        let orig_norm = col.norm();
        if orig_norm == 0.0 {
            return Err(Error::Collinear(labels[j].clone()));
        }
        let mut v = col;
        for _pass in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        let res_norm = v.norm();
        if res_norm <= RANK_TOL * orig_norm {
            return Err(Error::Collinear(labels[j].clone()));
        }
        basis.push(v / res_norm);
    }
    Ok(())
}
