//! Shared domain types: the unlabeled dataset, cell geometry, contingency
//! tables and fitted models.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Probe points per axis for the coverage check.
const GRID_POINTS: usize = 50;

/// An interval on one covariate axis. Bounds may be infinite; each end is
/// independently open or closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const FULL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_open: true,
        hi_closed: false,
    };

    pub fn new(lo: f64, hi: f64, lo_open: bool, hi_closed: bool) -> Result<Self> {
        let iv = Interval {
            lo,
            hi,
            lo_open,
            hi_closed,
        };
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        {
            return Err(Error::InvalidPartition(format!("malformed interval {iv}")));
        }
        if iv.is_empty() {
            return Err(Error::InvalidPartition(format!("empty interval {iv}")));
        }
        Ok(iv)
    }

    /// `(lo, hi]`
    pub fn open_closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, false, false)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_open { x > self.lo } else { x >= self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        if self.lo < self.hi {
            false
        } else {
            !(self.lo == self.hi && !self.lo_open && self.hi_closed && self.lo.is_finite())
        }
    }

    pub fn is_full(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_open) = if self.lo > other.lo {
            (self.lo, self.lo_open)
        } else if other.lo > self.lo {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open || other.lo_open)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        let iv = Interval {
            lo,
            hi,
            lo_open,
            hi_closed,
        };
        (!iv.is_empty()).then_some(iv)
    }

    /// True when `self` ends exactly where `upper` begins, with the shared
    /// finite boundary point belonging to exactly one of the two.
    pub fn abuts(&self, upper: &Interval) -> bool {
        self.hi.is_finite() && self.hi == upper.lo && self.hi_closed == upper.lo_open
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        let (lo, lo_open) = if self.lo < other.lo {
            (self.lo, self.lo_open)
        } else if other.lo < self.lo {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open && other.lo_open)
        };
        let (hi, hi_closed) = if self.hi > other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi > self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed || other.hi_closed)
        };
        Interval {
            lo,
            hi,
            lo_open,
            hi_closed,
        }
    }

    /// Re-express the interval through a strictly increasing map.
    pub fn map_increasing(&self, f: impl Fn(f64) -> f64) -> Result<Interval> {
        let lo = if self.lo == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            f(self.lo)
        };
        let hi = if self.hi == f64::INFINITY {
            f64::INFINITY
        } else {
            f(self.hi)
        };
        Interval::new(lo, hi, self.lo_open, self.hi_closed)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.lo_open { '(' } else { '[' };
        let close = if self.hi_closed { ']' } else { ')' };
        write!(f, "{open}{},{}{close}", fmt_bound(self.lo), fmt_bound(self.hi))
    }
}

fn fmt_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

/// An axis-aligned box: one interval per table covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellBox {
    pub bounds: Vec<Interval>,
}

impl CellBox {
    pub fn new(bounds: Vec<Interval>) -> Self {
        CellBox { bounds }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.bounds.iter().zip(point).all(|(iv, &x)| iv.contains(x))
    }

    pub fn intersect(&self, other: &CellBox) -> Option<CellBox> {
        self.bounds
            .iter()
            .zip(&other.bounds)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(CellBox::new)
    }

    /// If the boxes share a face perpendicular to some axis (and overlap on
    /// every other axis), returns that axis and whether `other` lies above.
    pub fn adjacency(&self, other: &CellBox) -> Option<(usize, bool)> {
        for axis in 0..self.bounds.len() {
            let others_overlap = (0..self.bounds.len())
                .filter(|&a| a != axis)
                .all(|a| self.bounds[a].intersect(&other.bounds[a]).is_some());
            if !others_overlap {
                continue;
            }
            if self.bounds[axis].abuts(&other.bounds[axis]) {
                return Some((axis, true));
            }
            if other.bounds[axis].abuts(&self.bounds[axis]) {
                return Some((axis, false));
            }
        }
        None
    }
}

impl fmt::Display for CellBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, iv) in self.bounds.iter().enumerate() {
            if i > 0 {
                f.write_str(" x ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

/// A table cell. Cells read from files are single boxes; merging adjacent
/// cells produces unions of boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub boxes: Vec<CellBox>,
}

impl Cell {
    pub fn from_box(b: CellBox) -> Self {
        Cell { boxes: vec![b] }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(point))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.boxes.iter().enumerate() {
            if i > 0 {
                f.write_str(" U ")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// K cells over the ordered table covariates.
///
/// Construction checks only dimensions; [`CellPartition::check_geometry`]
/// and [`validate_partition`] verify disjointness and coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPartition {
    covariates: Vec<String>,
    cells: Vec<Cell>,
}

impl CellPartition {
    pub fn new(covariates: Vec<String>, cells: Vec<Cell>) -> Result<Self> {
        if covariates.is_empty() {
            return Err(Error::InvalidPartition("no table covariates".into()));
        }
        if let Some(dup) = first_duplicate(&covariates) {
            return Err(Error::DuplicateCovariate(dup));
        }
        if cells.is_empty() {
            return Err(Error::InvalidPartition("no cells".into()));
        }
        for (k, cell) in cells.iter().enumerate() {
            if cell.boxes.is_empty() {
                return Err(Error::InvalidPartition(format!("cell {k} has no boxes")));
            }
            for b in &cell.boxes {
                if b.bounds.len() != covariates.len() {
                    return Err(Error::InvalidPartition(format!(
                        "cell {k} has {} bounds for {} covariates",
                        b.bounds.len(),
                        covariates.len()
                    )));
                }
                if b.bounds.iter().any(|iv| iv.is_empty() || iv.lo.is_nan() || iv.hi.is_nan()) {
                    return Err(Error::InvalidPartition(format!("cell {k} is empty")));
                }
            }
        }
        Ok(CellPartition { covariates, cells })
    }

    /// Partition of a single covariate into consecutive intervals.
    pub fn univariate(covariate: &str, intervals: Vec<Interval>) -> Result<Self> {
        let cells = intervals
            .into_iter()
            .map(|iv| Cell::from_box(CellBox::new(vec![iv])))
            .collect();
        Self::new(vec![covariate.to_string()], cells)
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the first cell containing `point`.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        self.cells.iter().position(|c| c.contains(point))
    }

    fn count_containing(&self, point: &[f64]) -> usize {
        self.cells.iter().filter(|c| c.contains(point)).count()
    }

    /// Pairwise overlap check over all boxes.
    pub fn check_disjoint(&self) -> Result<()> {
        let boxes: Vec<(usize, &CellBox)> = self
            .cells
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.boxes.iter().map(move |b| (k, b)))
            .collect();
        for (i, (ki, bi)) in boxes.iter().enumerate() {
            for (kj, bj) in &boxes[i + 1..] {
                if let Some(region) = bi.intersect(bj) {
                    return Err(Error::CellOverlap {
                        first: *ki,
                        second: *kj,
                        region: region.to_string(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Per-axis hull of all boxes.
    pub fn hull(&self) -> Vec<Interval> {
        let mut boxes = self.cells.iter().flat_map(|c| c.boxes.iter());
        let mut hull = boxes.next().map(|b| b.bounds.clone()).unwrap_or_default();
        for b in boxes {
            for (h, iv) in hull.iter_mut().zip(&b.bounds) {
                *h = h.hull(iv);
            }
        }
        hull
    }

    /// Disjointness plus probe-based coverage.
    ///
    /// Probes on each axis are every finite cell bound, its two floating
    /// point neighbours, and a grid over `ranges` (or over the span of the
    /// finite bounds) widened by 10%. Probes outside the partition's own hull
    /// are skipped. Every combination of per-axis probes must fall in exactly
    /// one cell.
    pub fn check_geometry(&self, ranges: Option<&[(f64, f64)]>) -> Result<usize> {
        self.check_disjoint()?;
        let hull = self.hull();
        let axes: Vec<Vec<f64>> = (0..self.covariates.len())
            .map(|a| self.axis_probes(a, ranges.map(|r| r[a]), &hull[a]))
            .collect();
        if axes.iter().any(|v| v.is_empty()) {
            return Ok(0);
        }
        let mut idx = vec![0usize; axes.len()];
        let mut point = vec![0.0; axes.len()];
        let mut checked = 0;
        loop {
            for (a, &i) in idx.iter().enumerate() {
                point[a] = axes[a][i];
            }
            if self.count_containing(&point) == 0 {
                return Err(Error::CoverageGap {
                    point: format_point(&point),
                });
            }
            checked += 1;
            let mut a = 0;
            loop {
                idx[a] += 1;
                if idx[a] < axes[a].len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
                if a == axes.len() {
                    return Ok(checked);
                }
            }
        }
    }

    fn axis_probes(&self, axis: usize, range: Option<(f64, f64)>, hull: &Interval) -> Vec<f64> {
        let mut bounds: Vec<f64> = self
            .cells
            .iter()
            .flat_map(|c| c.boxes.iter())
            .flat_map(|b| [b.bounds[axis].lo, b.bounds[axis].hi])
            .filter(|x| x.is_finite())
            .collect();
        bounds.sort_by(f64::total_cmp);
        bounds.dedup();

        let (lo, hi) = match range {
            Some((lo, hi)) if lo.is_finite() && hi.is_finite() => (lo, hi),
            _ => match (bounds.first(), bounds.last()) {
                (Some(&lo), Some(&hi)) => (lo, hi),
                _ => (-1.0, 1.0),
            },
        };
        let span = if hi > lo { hi - lo } else { 1.0f64.max(lo.abs()) };
        let (lo, hi) = (lo - 0.1 * span, hi + 0.1 * span);

        let mut probes: Vec<f64> = (0..GRID_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        for &b in &bounds {
            probes.extend([b.next_down(), b, b.next_up()]);
        }
        probes.retain(|&x| hull.contains(x));
        probes.sort_by(f64::total_cmp);
        probes.dedup();
        probes
    }
}

fn format_point(point: &[f64]) -> String {
    let parts: Vec<String> = point.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

fn first_duplicate(names: &[String]) -> Option<String> {
    let mut seen = alloc::collections::BTreeSet::new();
    names.iter().find(|n| !seen.insert(n.as_str())).cloned()
}

/// Labeled counts per cell. Counts may be fractional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    partition: CellPartition,
    counts1: Vec<f64>,
    counts0: Vec<f64>,
}

impl ContingencyTable {
    pub fn new(partition: CellPartition, counts1: Vec<f64>, counts0: Vec<f64>) -> Result<Self> {
        let k = partition.len();
        if counts1.len() != k || counts0.len() != k {
            return Err(Error::LengthMismatch {
                left: k,
                right: counts1.len().max(counts0.len()),
            });
        }
        for cell in 0..k {
            let (a, b) = (counts1[cell], counts0[cell]);
            if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                return Err(Error::NegativeCount { cell });
            }
        }
        let table = ContingencyTable {
            partition,
            counts1,
            counts0,
        };
        if table.total1() <= 0.0 {
            return Err(Error::EmptyLabelTotal { label: 1 });
        }
        if table.total0() <= 0.0 {
            return Err(Error::EmptyLabelTotal { label: 0 });
        }
        Ok(table)
    }

    pub fn partition(&self) -> &CellPartition {
        &self.partition
    }

    pub fn counts1(&self) -> &[f64] {
        &self.counts1
    }

    pub fn counts0(&self) -> &[f64] {
        &self.counts0
    }

    pub fn counts(&self, label: u8) -> &[f64] {
        if label == 1 {
            &self.counts1
        } else {
            &self.counts0
        }
    }

    pub fn total1(&self) -> f64 {
        self.counts1.iter().sum()
    }

    pub fn total0(&self) -> f64 {
        self.counts0.iter().sum()
    }

    /// m = m0 + m1
    pub fn total(&self) -> f64 {
        self.total1() + self.total0()
    }

    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition.is_empty()
    }

    /// Replace the counts, keeping the partition.
    pub fn with_counts(&self, counts1: Vec<f64>, counts0: Vec<f64>) -> Result<Self> {
        ContingencyTable::new(self.partition.clone(), counts1, counts0)
    }

    /// Fold cell `absorbed` into cell `kept`: boxes are united and counts
    /// summed. Cell indices above `absorbed` shift down by one.
    pub fn merge_cells(&self, kept: usize, absorbed: usize) -> Result<Self> {
        let k = self.len();
        if kept == absorbed || kept >= k || absorbed >= k {
            return Err(Error::InvalidArgument(format!(
                "cannot merge cell {absorbed} into {kept} of {k}"
            )));
        }
        let mut cells = self.partition.cells.clone();
        let mut counts1 = self.counts1.clone();
        let mut counts0 = self.counts0.clone();
        let moved = cells[absorbed].boxes.clone();
        cells[kept].boxes.extend(moved);
        counts1[kept] += counts1[absorbed];
        counts0[kept] += counts0[absorbed];
        cells.remove(absorbed);
        counts1.remove(absorbed);
        counts0.remove(absorbed);
        let partition = CellPartition::new(self.partition.covariates.clone(), cells)?;
        ContingencyTable::new(partition, counts1, counts0)
    }
}

/// Storage scale of a covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Raw,
    /// Natural logarithm of the raw value.
    Log,
    Log10,
}

impl Scale {
    pub fn to_raw(self, stored: f64) -> f64 {
        match self {
            Scale::Raw => stored,
            Scale::Log => libm::exp(stored),
            Scale::Log10 => libm::pow(10.0, stored),
        }
    }

    pub fn from_raw(self, raw: f64) -> f64 {
        match self {
            Scale::Raw => raw,
            Scale::Log => libm::log(raw),
            Scale::Log10 => libm::log10(raw),
        }
    }
}

/// One covariate column; `None` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<Option<f64>>,
    pub imputable: bool,
}

impl Column {
    pub fn observed(name: &str, values: Vec<f64>) -> Self {
        Column {
            name: name.to_string(),
            values: values.into_iter().map(Some).collect(),
            imputable: false,
        }
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// The unlabeled primary dataset: covariate columns, sampling weights
/// (normalized to sum to one) and optional grouping schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualDataset {
    columns: Vec<Column>,
    weights: Vec<f64>,
    groups: BTreeMap<String, Vec<String>>,
}

impl IndividualDataset {
    pub fn new(
        columns: Vec<Column>,
        raw_weights: Vec<f64>,
        groups: BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let n = raw_weights.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no rows".into()));
        }
        if columns.is_empty() {
            return Err(Error::InvalidDataset("no covariates".into()));
        }
        let names: Vec<String> = columns.iter().map(|c| c.name.clone()).collect();
        if let Some(dup) = first_duplicate(&names) {
            return Err(Error::DuplicateCovariate(dup));
        }
        for col in &columns {
            if col.values.len() != n {
                return Err(Error::LengthMismatch {
                    left: n,
                    right: col.values.len(),
                });
            }
            for (row, v) in col.values.iter().enumerate() {
                match v {
                    Some(x) if !x.is_finite() => {
                        return Err(Error::InvalidDataset(format!(
                            "non-finite value for `{}` at row {row}",
                            col.name
                        )))
                    }
                    None if !col.imputable => {
                        return Err(Error::UnexpectedMissing {
                            covariate: col.name.clone(),
                            row,
                        })
                    }
                    _ => {}
                }
            }
        }
        for (name, labels) in &groups {
            if labels.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "group scheme `{name}` has {} labels for {n} rows",
                    labels.len()
                )));
            }
        }
        for (row, &w) in raw_weights.iter().enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::NonPositiveWeight { row, value: w });
            }
        }
        let total: f64 = raw_weights.iter().sum();
        let weights = raw_weights.iter().map(|w| w / total).collect();
        Ok(IndividualDataset {
            columns,
            weights,
            groups,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.weights.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn covariate_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    /// Normalized weights (sum to one).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<String>> {
        &self.groups
    }

    pub fn group_labels(&self, scheme: &str) -> Option<&[String]> {
        self.groups.get(scheme).map(|v| v.as_slice())
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownCovariate(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        Ok(&self.columns[self.covariate_index(name)?])
    }

    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        self.columns[col].values[row]
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.missing_count() > 0)
    }

    /// Fully observed values of a column, or the first missing row.
    pub fn observed_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = self.column(name)?;
        col.values
            .iter()
            .enumerate()
            .map(|(row, v)| {
                v.ok_or_else(|| Error::MissingCovariateAtPredict {
                    covariate: name.to_string(),
                    row,
                })
            })
            .collect()
    }

    /// New dataset built from the given rows (repeats allowed); weights are
    /// renormalized.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                values: rows.iter().map(|&r| c.values[r]).collect(),
                imputable: c.imputable,
            })
            .collect();
        let weights = rows.iter().map(|&r| self.weights[r]).collect();
        let groups = self
            .groups
            .iter()
            .map(|(k, v)| (k.clone(), rows.iter().map(|&r| v[r].clone()).collect()))
            .collect();
        IndividualDataset::new(columns, weights, groups)
    }

    /// Copy with the given missing entries of one column filled in.
    pub fn with_filled(&self, col: usize, fills: &[(usize, f64)]) -> Self {
        let mut out = self.clone();
        for &(row, v) in fills {
            out.columns[col].values[row] = Some(v);
        }
        out
    }
}

/// Result of checking a partition against a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub disjoint: bool,
    pub covered: bool,
    pub probes_checked: usize,
    /// Dataset rows per cell.
    pub occupancy: Vec<usize>,
    /// Cells holding no dataset rows (permitted, but the likelihood cannot
    /// use them until merged).
    pub empty_cells: Vec<usize>,
}

/// Table-covariate values of every row, one `Vec` per row.
pub(crate) fn table_points(partition: &CellPartition, dataset: &IndividualDataset) -> Result<Vec<Vec<f64>>> {
    let cols: Vec<usize> = partition
        .covariates()
        .iter()
        .map(|name| dataset.covariate_index(name))
        .collect::<Result<_>>()?;
    (0..dataset.n_rows())
        .map(|row| {
            cols.iter()
                .map(|&c| {
                    dataset.value(row, c).ok_or_else(|| Error::MissingTableCovariateValue {
                        covariate: dataset.columns()[c].name.clone(),
                        row,
                    })
                })
                .collect()
        })
        .collect()
}

/// Check disjointness and coverage of `partition` against `dataset` and
/// report per-cell occupancy.
pub fn validate_partition(
    partition: &CellPartition,
    dataset: &IndividualDataset,
) -> Result<ValidationReport> {
    let points = table_points(partition, dataset)?;
    let ranges: Vec<(f64, f64)> = (0..partition.covariates().len())
        .map(|a| {
            points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[a]), hi.max(p[a]))
            })
        })
        .collect();
    let probes_checked = partition.check_geometry(Some(&ranges))?;
    let assignment = assign_points(partition, &points)?;
    let mut occupancy = vec![0usize; partition.len()];
    for k in assignment {
        occupancy[k] += 1;
    }
    let empty_cells: Vec<usize> = (0..occupancy.len()).filter(|&k| occupancy[k] == 0).collect();
    for &k in &empty_cells {
        log::warn!("cell {k} ({}) holds no dataset rows", partition.cells()[k]);
    }
    Ok(ValidationReport {
        disjoint: true,
        covered: true,
        probes_checked,
        occupancy,
        empty_cells,
    })
}

fn assign_points(partition: &CellPartition, points: &[Vec<f64>]) -> Result<Vec<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(row, p)| partition.locate(p).ok_or(Error::RowOutsidePartition { row }))
        .collect()
}

/// Zero-based cell index of every dataset row.
pub fn assign_cells(partition: &CellPartition, dataset: &IndividualDataset) -> Result<Vec<usize>> {
    let points = table_points(partition, dataset)?;
    assign_points(partition, &points)
}

/// Degrees-of-freedom condition `2K - 1 >= p`, where `p` is the length of
/// the coefficient vector including the intercept. Violations only warn:
/// the intercept is re-solved during calibration anyway.
pub fn check_identifiability(partition: &CellPartition, n_coefficients: usize) -> bool {
    let ok = 2 * partition.len() > n_coefficients;
    if !ok {
        log::warn!(
            "{} cells give {} degrees of freedom for {} coefficients",
            partition.len(),
            2 * partition.len() - 1,
            n_coefficients
        );
    }
    ok
}

/// External estimate of the marginal rate P(Y = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalTarget {
    p1: f64,
}

impl MarginalTarget {
    pub fn new(p1: f64) -> Result<Self> {
        if p1 > 0.0 && p1 < 1.0 {
            Ok(MarginalTarget { p1 })
        } else {
            Err(Error::InvalidTarget(p1))
        }
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }
}

/// A fitted logistic model. `beta[0]` is the intercept; it equals
/// `beta0_raw` until [`ModelFit::calibrate`] replaces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub covariates: Vec<String>,
    pub beta: Vec<f64>,
    pub beta0_raw: f64,
    pub calibrated: bool,
    /// Inverse negative Hessian at the uncalibrated optimum, if available.
    pub covariance: Option<Matrix>,
    /// Why `covariance` is missing or suspect.
    pub covariance_issue: Option<String>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub optimizer_iterations: usize,
    pub evaluations: usize,
    /// Objective evaluations in which some cell probability hit the clamp.
    pub clamped_evaluations: usize,
}

impl ModelFit {
    pub fn n_params(&self) -> usize {
        self.beta.len()
    }

    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        let cov = self.covariance.as_ref()?;
        Some(
            (0..cov.n_rows())
                .map(|i| {
                    let v = cov.get(i, i);
                    if v > 0.0 {
                        libm::sqrt(v)
                    } else {
                        f64::NAN
                    }
                })
                .collect(),
        )
    }

    pub fn correlation(&self) -> Option<Matrix> {
        let cov = self.covariance.as_ref()?;
        let se = self.standard_errors()?;
        let n = cov.n_rows();
        Some(Matrix::from_fn(n, n, |i, j| cov.get(i, j) / (se[i] * se[j])))
    }

    /// Re-solve the intercept so the weighted mean prediction on `dataset`
    /// equals the target.
    pub fn calibrate(&mut self, dataset: &IndividualDataset, target: MarginalTarget) -> Result<()> {
        let b0 = crate::estimation::calibrate_intercept(dataset, &self.covariates, &self.beta, target)?;
        self.beta[0] = b0;
        self.calibrated = true;
        Ok(())
    }
}
