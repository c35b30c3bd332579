//! Household survey data: schema, validation, CSV ingestion, summaries.
//!
//! The canonical schema mirrors a cross-sectional appliance survey: one row
//! per household with annual consumption, socio-economics, 0/1 ownership
//! flags and daily usage hours per appliance. Rows violating hard
//! invariants are rejected listwise (no imputation); soft inconsistencies
//! (usage hours without ownership) only warn, because shared appliances are
//! a legitimate encoding in this kind of data.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Appliances with an ownership dummy, in canonical column order.
pub const OWNERSHIP_APPLIANCES: [&str; 13] = [
    "refrigerator",
    "ac",
    "iron",
    "washing_machine",
    "exhaust_fan",
    "tv",
    "laptop",
    "ceiling_fan",
    "table_fan",
    "mixer",
    "cfl",
    "led",
    "bulb",
];

/// Appliances with a usage-hours column, in canonical column order.
pub const USAGE_APPLIANCES: [&str; 12] = [
    "refrigerator",
    "ac",
    "iron",
    "ceiling_fan",
    "table_fan",
    "washing_machine",
    "exhaust_fan",
    "tv",
    "laptop",
    "cfl",
    "led",
    "bulb",
];

pub const N_OWNERSHIP: usize = OWNERSHIP_APPLIANCES.len();
pub const N_USAGE: usize = USAGE_APPLIANCES.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HousingType {
    #[serde(rename = "SRH")]
    Srh,
    #[serde(rename = "SLUM")]
    Slum,
}

impl fmt::Display for HousingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HousingType::Srh => write!(f, "SRH"),
            HousingType::Slum => write!(f, "SLUM"),
        }
    }
}

impl std::str::FromStr for HousingType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SRH" => Ok(HousingType::Srh),
            "SLUM" => Ok(HousingType::Slum),
            other => Err(format!("unknown housing_type `{other}` (expected SRH or SLUM)")),
        }
    }
}

/// One surveyed household.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdRecord {
    pub id: String,
    pub housing_type: HousingType,
    /// kWh per household per year; the dependent-variable source.
    pub annual_kwh: f64,
    /// Workforce participation rate in [0, 1].
    pub wfpr: f64,
    pub hh_size: u32,
    pub avg_hh_age: f64,
    /// Ordinal income quartile, 1–4.
    pub income_quartile: u8,
    /// 0/1 flags, indexed by `OWNERSHIP_APPLIANCES`.
    pub ownership: [u8; N_OWNERSHIP],
    /// Hours/day, indexed by `USAGE_APPLIANCES`.
    pub usage_hours: [f64; N_USAGE],
}

impl HouseholdRecord {
    /// Hard invariant violations; a non-empty result rejects the row.
    pub fn hard_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.annual_kwh > 0.0) || !self.annual_kwh.is_finite() {
            v.push("annual_kwh > 0".to_string());
        }
        if !(0.0..=1.0).contains(&self.wfpr) || !self.wfpr.is_finite() {
            v.push("0 <= wfpr <= 1".to_string());
        }
        if self.hh_size < 1 {
            v.push("hh_size >= 1".to_string());
        }
        if !(self.avg_hh_age > 0.0) || !self.avg_hh_age.is_finite() {
            v.push("avg_hh_age > 0".to_string());
        }
        if !(1..=4).contains(&self.income_quartile) {
            v.push("1 <= income_quartile <= 4".to_string());
        }
        for (k, &own) in self.ownership.iter().enumerate() {
            if own > 1 {
                v.push(format!("own_{} in {{0,1}}", OWNERSHIP_APPLIANCES[k]));
            }
        }
        for (k, &hrs) in self.usage_hours.iter().enumerate() {
            if hrs < 0.0 || !hrs.is_finite() {
                v.push(format!("hrs_{} >= 0", USAGE_APPLIANCES[k]));
            }
        }
        v
    }

    /// Soft inconsistencies: usage hours recorded without ownership.
    pub fn soft_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (k, &name) in USAGE_APPLIANCES.iter().enumerate() {
            if self.usage_hours[k] > 0.0 {
                let own_idx = OWNERSHIP_APPLIANCES.iter().position(|&o| o == name);
                if let Some(i) = own_idx {
                    if self.ownership[i] == 0 {
                        v.push(format!("hrs_{name} > 0 but own_{name} = 0"));
                    }
                }
            }
        }
        v
    }

    /// Numeric value of a canonical variable, if it exists.
    pub fn value(&self, var: &str) -> Option<f64> {
        match var {
            "annual_kwh" => Some(self.annual_kwh),
            "wfpr" => Some(self.wfpr),
            "hh_size" => Some(f64::from(self.hh_size)),
            "avg_hh_age" => Some(self.avg_hh_age),
            "income_quartile" => Some(f64::from(self.income_quartile)),
            _ => {
                if let Some(name) = var.strip_prefix("own_") {
                    OWNERSHIP_APPLIANCES
                        .iter()
                        .position(|&a| a == name)
                        .map(|i| f64::from(self.ownership[i]))
                } else if let Some(name) = var.strip_prefix("hrs_") {
                    USAGE_APPLIANCES
                        .iter()
                        .position(|&a| a == name)
                        .map(|i| self.usage_hours[i])
                } else {
                    None
                }
            }
        }
    }
}

/// Canonical numeric variable names, in summary order.
pub fn numeric_variables() -> Vec<String> {
    let mut vars = vec![
        "annual_kwh".to_string(),
        "wfpr".to_string(),
        "hh_size".to_string(),
        "avg_hh_age".to_string(),
        "income_quartile".to_string(),
    ];
    vars.extend(OWNERSHIP_APPLIANCES.iter().map(|a| format!("own_{a}")));
    vars.extend(USAGE_APPLIANCES.iter().map(|a| format!("hrs_{a}")));
    vars
}

/// Canonical CSV header, in column order.
pub fn canonical_columns() -> Vec<String> {
    let mut cols = vec!["id".to_string(), "housing_type".to_string()];
    cols.extend(numeric_variables());
    cols
}

/// An immutable, validated collection of household records.
#[derive(Debug, Clone)]
pub struct Dataset {
    name: String,
    records: Vec<HouseholdRecord>,
}

impl Dataset {
    /// Build a dataset, enforcing non-emptiness and id uniqueness.
    pub fn new(name: impl Into<String>, records: Vec<HouseholdRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset { rejected: 0 });
        }
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(Dataset { name: name.into(), records })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn records(&self) -> &[HouseholdRecord] {
        &self.records
    }

    /// Column of values for a canonical variable.
    pub fn column(&self, var: &str) -> Option<Vec<f64>> {
        if self.records.first()?.value(var).is_none() {
            return None;
        }
        Some(self.records.iter().map(|r| r.value(var).unwrap()).collect())
    }
}

/// A rejected or suspicious row, with its 1-based data-row index.
#[derive(Debug, Clone, Serialize)]
pub struct RowIssue {
    pub row: usize,
    pub column: Option<String>,
    pub reason: String,
}

/// Outcome of a CSV load: the valid rows plus per-row rejections/warnings.
#[derive(Debug)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub rejections: Vec<RowIssue>,
    pub warnings: Vec<RowIssue>,
    /// Raw data-row count (valid + rejected).
    pub raw_rows: usize,
}

/// Load a survey CSV.
///
/// `schema` optionally remaps file header names onto canonical names
/// (`file_header -> canonical_name`). Rows that fail to parse or violate a
/// hard invariant are rejected, not fatal; a file yielding zero valid rows
/// is an error. Row order is preserved.
pub fn load_csv(path: &Path, schema: Option<&HashMap<String, String>>) -> Result<LoadReport> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();

    // Map canonical column name -> position in the file.
    let mut position: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in headers.iter().enumerate() {
        let canonical = schema
            .and_then(|m| m.get(raw))
            .cloned()
            .unwrap_or_else(|| raw.to_string());
        position.entry(canonical).or_insert(idx);
    }
    let col = |name: &str| -> Result<usize> {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let idx_id = col("id")?;
    let idx_housing = col("housing_type")?;
    let mut idx_num = Vec::new();
    for var in numeric_variables() {
        idx_num.push((var.clone(), col(&var)?));
    }

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut warnings = Vec::new();
    let mut raw_rows = 0usize;
    let mut seen_ids: HashSet<String> = HashSet::new();

    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        raw_rows += 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejections.push(RowIssue {
                    row: row_no,
                    column: None,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };

        match parse_row(&row, row_no, idx_id, idx_housing, &idx_num) {
            Ok(record) => {
                let hard = record.hard_violations();
                if !hard.is_empty() {
                    for reason in hard {
                        rejections.push(RowIssue { row: row_no, column: None, reason });
                    }
                    continue;
                }
                if !seen_ids.insert(record.id.clone()) {
                    rejections.push(RowIssue {
                        row: row_no,
                        column: Some("id".to_string()),
                        reason: format!("duplicate id `{}`", record.id),
                    });
                    continue;
                }
                for reason in record.soft_violations() {
                    warnings.push(RowIssue { row: row_no, column: None, reason });
                }
                records.push(record);
            }
            Err(issue) => rejections.push(issue),
        }
    }

    if records.is_empty() {
        return Err(Error::EmptyDataset { rejected: rejections.len() });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(LoadReport { dataset: Dataset::new(name, records)?, rejections, warnings, raw_rows })
}

fn parse_row(
    row: &csv::StringRecord,
    row_no: usize,
    idx_id: usize,
    idx_housing: usize,
    idx_num: &[(String, usize)],
) -> std::result::Result<HouseholdRecord, RowIssue> {
    let cell = |idx: usize, name: &str| -> std::result::Result<&str, RowIssue> {
        row.get(idx).ok_or_else(|| RowIssue {
            row: row_no,
            column: Some(name.to_string()),
            reason: "missing cell".to_string(),
        })
    };

    let id = cell(idx_id, "id")?.trim().to_string();
    if id.is_empty() {
        return Err(RowIssue {
            row: row_no,
            column: Some("id".to_string()),
            reason: "empty id".to_string(),
        });
    }
    let housing_type: HousingType =
        cell(idx_housing, "housing_type")?.parse().map_err(|e| RowIssue {
            row: row_no,
            column: Some("housing_type".to_string()),
            reason: e,
        })?;

    let mut numeric = HashMap::new();
    for (name, idx) in idx_num {
        let raw = cell(*idx, name)?.trim();
        let value: f64 = raw.parse().map_err(|_| RowIssue {
            row: row_no,
            column: Some(name.clone()),
            reason: format!("unparseable numeric cell `{raw}`"),
        })?;
        numeric.insert(name.as_str(), value);
    }

    let int_field = |name: &str| -> std::result::Result<u32, RowIssue> {
        let v = numeric[name];
        if v.fract() != 0.0 || v < 0.0 || v > f64::from(u32::MAX) {
            return Err(RowIssue {
                row: row_no,
                column: Some(name.to_string()),
                reason: format!("expected a non-negative integer, got `{v}`"),
            });
        }
        Ok(v as u32)
    };

    let mut ownership = [0u8; N_OWNERSHIP];
    for (k, a) in OWNERSHIP_APPLIANCES.iter().enumerate() {
        let name = format!("own_{a}");
        let v = numeric[name.as_str()];
        if v != 0.0 && v != 1.0 {
            return Err(RowIssue {
                row: row_no,
                column: Some(name),
                reason: format!("ownership flag must be 0 or 1, got `{v}`"),
            });
        }
        ownership[k] = v as u8;
    }
    let mut usage_hours = [0f64; N_USAGE];
    for (k, a) in USAGE_APPLIANCES.iter().enumerate() {
        usage_hours[k] = numeric[format!("hrs_{a}").as_str()];
    }

    Ok(HouseholdRecord {
        id,
        housing_type,
        annual_kwh: numeric["annual_kwh"],
        wfpr: numeric["wfpr"],
        hh_size: int_field("hh_size")?,
        avg_hh_age: numeric["avg_hh_age"],
        income_quartile: int_field("income_quartile")? as u8,
        ownership,
        usage_hours,
    })
}

/// Write a dataset in the canonical CSV schema.
///
/// Floats use the shortest round-trip representation, so
/// `load_csv(write_csv(ds))` reproduces `ds` exactly.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(canonical_columns())?;
    for r in ds.records() {
        let mut row: Vec<String> = vec![r.id.clone(), r.housing_type.to_string()];
        row.push(fmt_f64(r.annual_kwh));
        row.push(fmt_f64(r.wfpr));
        row.push(r.hh_size.to_string());
        row.push(fmt_f64(r.avg_hh_age));
        row.push(r.income_quartile.to_string());
        for &o in &r.ownership {
            row.push(o.to_string());
        }
        for &h in &r.usage_hours {
            row.push(fmt_f64(h));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Per-variable summary statistics.
#[derive(Debug, Clone, Serialize)]
pub struct VariableSummary {
    pub variable: String,
    pub mean: f64,
    /// Sample standard deviation (divisor n−1); absent when n = 1.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
}

/// Summarize every numeric variable (mean, SD, min, max).
pub fn summarize(ds: &Dataset) -> Result<Vec<VariableSummary>> {
    if ds.n() == 0 {
        return Err(Error::EmptyDataset { rejected: 0 });
    }
    let mut out = Vec::new();
    for var in numeric_variables() {
        let values = ds.column(&var).expect("canonical variable");
        out.push(summarize_column(&var, &values));
    }
    Ok(out)
}

fn summarize_column(name: &str, values: &[f64]) -> VariableSummary {
    // Welford's online mean/M2.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i as f64 + 1.0);
        m2 += delta * (x - mean);
        min = min.min(x);
        max = max.max(x);
    }
    let n = values.len();
    let sd = if n >= 2 { Some((m2 / (n as f64 - 1.0)).sqrt()) } else { None };
    VariableSummary { variable: name.to_string(), mean, sd, min, max }
}
