//! Individual-level data: a delimited file plus a TOML manifest that
//! declares the weight column, covariates (with storage scale and whether
//! they may be imputed), grouping schemes and the threshold-rule columns.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tablelogit_core::inference::BctRule;
use tablelogit_core::{Column, IndividualDataset, Scale};

use crate::error::{line_column, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub name: String,
    #[serde(default)]
    pub scale: Scale,
    #[serde(default)]
    pub imputable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: String,
    /// Reporting order; levels listed here but absent from the data are
    /// reported with n = 0.
    #[serde(default)]
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BctSpec {
    pub odn: String,
    pub vl: String,
    #[serde(default = "default_odn_max")]
    pub odn_max: f64,
    #[serde(default = "default_vl_min")]
    pub vl_min: f64,
}

fn default_odn_max() -> f64 {
    1.5
}

fn default_vl_min() -> f64 {
    1000.0
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "NA".to_string()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub weight: String,
    #[serde(default = "default_missing")]
    pub missing: Vec<String>,
    pub covariates: Vec<CovariateSpec>,
    #[serde(default)]
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub bct: Option<BctSpec>,
}

impl Manifest {
    pub fn scale_of(&self, covariate: &str) -> Option<Scale> {
        self.covariates.iter().find(|c| c.name == covariate).map(|c| c.scale)
    }

    pub fn bct_rule(&self) -> Option<BctRule> {
        let b = self.bct.as_ref()?;
        Some(BctRule {
            odn: b.odn.clone(),
            vl: b.vl.clone(),
            vl_scale: self.scale_of(&b.vl).unwrap_or_default(),
            odn_max: b.odn_max,
            vl_min: b.vl_min,
        })
    }

    pub fn declared_levels(&self) -> BTreeMap<String, Vec<String>> {
        self.groups.iter().map(|g| (g.name.clone(), g.levels.clone())).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest> {
    toml::from_str(text).map_err(|e| toml_error(path, text, &e))
}

pub(crate) fn toml_error(path: &Path, text: &str, e: &toml::de::Error) -> CliError {
    let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: e.message().to_string(),
    }
}

/// A loaded dataset together with what is needed to write it back out.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub manifest: Manifest,
    pub dataset: IndividualDataset,
    /// Weights as read, before normalization.
    pub raw_weights: Vec<f64>,
    pub headers: Vec<String>,
    /// Every field of every data row, verbatim.
    pub records: Vec<Vec<String>>,
}

pub fn load_dataset(data: &Path, manifest: &Path) -> Result<LoadedDataset> {
    let manifest_text = fs::read_to_string(manifest).map_err(|e| CliError::io(manifest, e))?;
    let manifest = parse_manifest(&manifest_text, manifest)?;
    let bytes = fs::read(data).map_err(|e| CliError::io(data, e))?;
    read_dataset(&bytes, manifest, data)
}

fn parse_error(path: &Path, line: u64, column: usize, message: String) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        column,
        message,
    }
}

pub fn read_dataset(bytes: &[u8], manifest: Manifest, path: &Path) -> Result<LoadedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(path, &e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut seen = BTreeSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(CliError::DuplicateColumn {
                path: path.to_path_buf(),
                name: h.clone(),
            });
        }
    }
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_error(path, 1, 1, format!("column `{name}` declared in the manifest is not in the header")))
    };
    let weight_col = position(&manifest.weight)?;
    let cov_cols: Vec<usize> = manifest.covariates.iter().map(|c| position(&c.name)).collect::<Result<_>>()?;
    let group_cols: Vec<usize> = manifest.groups.iter().map(|g| position(&g.name)).collect::<Result<_>>()?;

    let mut raw_weights = Vec::new();
    let mut values: Vec<Vec<Option<f64>>> = vec![Vec::new(); cov_cols.len()];
    let mut groups: Vec<Vec<String>> = vec![Vec::new(); group_cols.len()];
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, &e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(parse_error(
                path,
                line,
                rec.len().min(headers.len()) + 1,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        let w = &rec[weight_col];
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => raw_weights.push(v),
            _ => {
                return Err(CliError::NonPositiveWeight {
                    path: path.to_path_buf(),
                    line: line as usize,
                    value: w.to_string(),
                })
            }
        }
        for (j, &c) in cov_cols.iter().enumerate() {
            let field = &rec[c];
            let v = if manifest.missing.iter().any(|m| m == field) {
                None
            } else {
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Some(v),
                    _ => {
                        return Err(parse_error(
                            path,
                            line,
                            c + 1,
                            format!("`{field}` is not a finite number or missing marker"),
                        ))
                    }
                }
            };
            values[j].push(v);
        }
        for (j, &c) in group_cols.iter().enumerate() {
            groups[j].push(rec[c].to_string());
        }
        records.push(rec.iter().map(str::to_string).collect());
    }
    let columns = manifest
        .covariates
        .iter()
        .zip(values)
        .map(|(spec, values)| Column {
            name: spec.name.clone(),
            values,
            imputable: spec.imputable,
        })
        .collect();
    let group_map = manifest
        .groups
        .iter()
        .zip(groups)
        .map(|(g, labels)| (g.name.clone(), labels))
        .collect();
    let dataset = IndividualDataset::new(columns, raw_weights.clone(), group_map)?;
    Ok(LoadedDataset {
        manifest,
        dataset,
        raw_weights,
        headers,
        records,
    })
}

fn csv_error(path: &Path, e: &csv::Error) -> CliError {
    let line = e.position().map_or(1, |p| p.line());
    parse_error(path, line, 1, e.to_string())
}

/// Write the declared columns (weight, covariates, groups) as CSV.
pub fn write_dataset(loaded: &LoadedDataset) -> Vec<u8> {
    let ds = &loaded.dataset;
    let marker = loaded
        .manifest
        .missing
        .iter()
        .find(|m| !m.is_empty())
        .cloned()
        .unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![loaded.manifest.weight.clone()];
    header.extend(ds.covariate_names().map(str::to_string));
    header.extend(loaded.manifest.groups.iter().map(|g| g.name.clone()));
    w.write_record(&header).expect("in-memory write");
    for row in 0..ds.n_rows() {
        let mut rec = vec![format!("{}", loaded.raw_weights[row])];
        for col in 0..ds.n_covariates() {
            rec.push(ds.value(row, col).map_or_else(|| marker.clone(), |v| format!("{v}")));
        }
        for g in &loaded.manifest.groups {
            rec.push(ds.group_labels(&g.name).map_or_else(String::new, |l| l[row].clone()));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub(crate) fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}
