//! Contingency tables as TOML documents with explicit interval flags.
//!
//! ```toml
//! name = "ODn"
//! table_covariates = ["ODn"]
//!
//! [[cells]]
//! bounds = [{ lo = 0.0, hi = 1.0, lo_open = true, hi_closed = true }]
//! count_y1 = 239.6
//! count_y0 = 24
//! ```
//!
//! Bounds are on the raw scale unless `scales` says otherwise. They are
//! converted to the dataset's storage scale when the table is bound to a
//! manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tablelogit_core::{Cell, CellBox, CellPartition, ContingencyTable, Interval, Scale};

use crate::dataset::{toml_error, Manifest};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub bounds: Vec<Interval>,
    pub count_y1: f64,
    pub count_y0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub table_covariates: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scales: BTreeMap<String, Scale>,
    pub cells: Vec<CellSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTable {
    pub path: PathBuf,
    pub file: TableFile,
    /// Bounds as written in the file.
    pub table: ContingencyTable,
}

impl TableFile {
    pub fn scale_of(&self, covariate: &str) -> Scale {
        self.scales.get(covariate).copied().unwrap_or_default()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("table serializes")
    }

    pub fn from_table(name: &str, table: &ContingencyTable, scales: BTreeMap<String, Scale>) -> Result<Self> {
        let cells = table
            .partition()
            .cells()
            .iter()
            .zip(table.counts1().iter().zip(table.counts0()))
            .map(|(cell, (&c1, &c0))| match cell.boxes.as_slice() {
                [b] => Ok(CellSpec {
                    bounds: b.bounds.clone(),
                    count_y1: c1,
                    count_y0: c0,
                }),
                _ => Err(CliError::Config(format!("cell {cell} is not a single box"))),
            })
            .collect::<Result<_>>()?;
        Ok(TableFile {
            name: name.to_string(),
            table_covariates: table.partition().covariates().to_vec(),
            scales,
            cells,
        })
    }
}

pub fn load_table(path: &Path) -> Result<LoadedTable> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_table(&text, path)
}

pub fn parse_table(text: &str, path: &Path) -> Result<LoadedTable> {
    let file: TableFile = toml::from_str(text).map_err(|e| toml_error(path, text, &e))?;
    let table = build(&file, path, |_, iv| Ok(*iv))?;
    table
        .partition()
        .check_geometry(None)
        .map_err(|e| partition_error(path, e))?;
    Ok(LoadedTable {
        path: path.to_path_buf(),
        file,
        table,
    })
}

fn partition_error(path: &Path, e: tablelogit_core::Error) -> CliError {
    CliError::PartitionInvalid {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn build(
    file: &TableFile,
    path: &Path,
    convert: impl Fn(&str, &Interval) -> Result<Interval>,
) -> Result<ContingencyTable> {
    let q = file.table_covariates.len();
    let mut cells = Vec::with_capacity(file.cells.len());
    for (k, c) in file.cells.iter().enumerate() {
        if c.bounds.len() != q {
            return Err(CliError::PartitionInvalid {
                path: path.to_path_buf(),
                message: format!("cell {k} has {} bounds for {q} covariates", c.bounds.len()),
            });
        }
        if !(c.count_y1 >= 0.0 && c.count_y0 >= 0.0) || !c.count_y1.is_finite() || !c.count_y0.is_finite() {
            return Err(CliError::NegativeCount {
                path: path.to_path_buf(),
                cell: k,
            });
        }
        let bounds = c
            .bounds
            .iter()
            .zip(&file.table_covariates)
            .map(|(iv, name)| {
                let checked = Interval::new(iv.lo, iv.hi, iv.lo_open, iv.hi_closed).map_err(|e| partition_error(path, e))?;
                convert(name, &checked)
            })
            .collect::<Result<Vec<_>>>()?;
        cells.push(Cell::from_box(CellBox::new(bounds)));
    }
    let partition = CellPartition::new(file.table_covariates.clone(), cells).map_err(|e| partition_error(path, e))?;
    let counts1 = file.cells.iter().map(|c| c.count_y1).collect();
    let counts0 = file.cells.iter().map(|c| c.count_y0).collect();
    Ok(ContingencyTable::new(partition, counts1, counts0)?)
}

/// Re-express the table's bounds on the storage scale the manifest declares
/// for each table covariate.
pub fn bind_table(loaded: &LoadedTable, manifest: &Manifest) -> Result<ContingencyTable> {
    build(&loaded.file, &loaded.path, |name, iv| {
        let to = manifest
            .scale_of(name)
            .ok_or_else(|| tablelogit_core::Error::UnknownCovariate(name.to_string()))?;
        let from = loaded.file.scale_of(name);
        if from == to {
            return Ok(*iv);
        }
        iv.map_increasing(|x| to.from_raw(from.to_raw(x)))
            .map_err(|e| partition_error(&loaded.path, e))
    })
}
