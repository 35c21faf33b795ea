//! Conditional multinomial likelihood of the table counts, with the
//! per-cell label probabilities approximated by weighted averages of
//! individual logistic probabilities over the dataset rows in each cell.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{table_points, ContingencyTable, IndividualDataset};

/// Cell probabilities are clamped to this range inside the optimizer
/// objective.
pub const PROBABILITY_FLOOR: f64 = 1e-300;
pub const PROBABILITY_CEIL: f64 = 1.0 - 1e-300;

/// Logistic function without overflow for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// (P(Y=1), P(Y=0)) at linear predictor `eta`, each computed without
/// cancellation.
#[inline]
pub(crate) fn label_probabilities(eta: f64) -> (f64, f64) {
    let e = libm::exp(-libm::fabs(eta));
    let d = 1.0 + e;
    if eta >= 0.0 {
        (1.0 / d, e / d)
    } else {
        (e / d, 1.0 / d)
    }
}

pub fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// P(Y = 1 | x) for coefficients `beta` (intercept first).
pub fn individual_probability(beta: &[f64], row: &[f64]) -> f64 {
    debug_assert_eq!(beta.len(), row.len() + 1);
    sigmoid(beta[0] + row.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>())
}

/// Fully observed values of the active covariates, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    covariates: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
}

impl Design {
    pub fn new<S: AsRef<str>>(dataset: &IndividualDataset, covariates: &[S]) -> Result<Self> {
        let cols: Vec<usize> = covariates
            .iter()
            .map(|c| dataset.covariate_index(c.as_ref()))
            .collect::<Result<_>>()?;
        let n = dataset.n_rows();
        let q = cols.len();
        let mut values = vec![0.0; n * q];
        for row in 0..n {
            for (j, &c) in cols.iter().enumerate() {
                values[row * q + j] =
                    dataset.value(row, c).ok_or_else(|| Error::MissingCovariateAtPredict {
                        covariate: covariates[j].as_ref().to_string(),
                        row,
                    })?;
            }
        }
        Ok(Design {
            covariates: covariates.iter().map(|c| c.as_ref().to_string()).collect(),
            n_rows: n,
            values,
        })
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let q = self.covariates.len();
        &self.values[i * q..(i + 1) * q]
    }

    /// Non-intercept part of the linear predictor, per row.
    pub fn offsets(&self, beta: &[f64]) -> Vec<f64> {
        let slopes = &beta[1..];
        (0..self.n_rows)
            .map(|i| self.row(i).iter().zip(slopes).map(|(x, b)| x * b).sum())
            .collect()
    }

    /// P(Y = 1 | x_i) for every row.
    pub fn probabilities(&self, beta: &[f64]) -> Vec<f64> {
        self.offsets(beta).into_iter().map(|o| sigmoid(beta[0] + o)).collect()
    }
}

#[derive(Debug, Clone)]
struct TableBinding {
    assignment: Vec<usize>,
    weight_sums: Vec<f64>,
}

/// Dataset, tables and active covariates bound together, with row-to-cell
/// assignments and per-cell weight sums precomputed. Immutable once built.
#[derive(Debug, Clone)]
pub struct LikelihoodContext {
    design: Design,
    weights: Vec<f64>,
    tables: Vec<ContingencyTable>,
    bindings: Vec<TableBinding>,
}

impl LikelihoodContext {
    pub fn new<S: AsRef<str>>(
        dataset: &IndividualDataset,
        tables: &[ContingencyTable],
        covariates: &[S],
    ) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::InvalidArgument("at least one table is required".into()));
        }
        let design = Design::new(dataset, covariates)?;
        let weights = dataset.weights().to_vec();
        let mut bindings = Vec::with_capacity(tables.len());
        for (t, table) in tables.iter().enumerate() {
            let partition = table.partition();
            let points = table_points(partition, dataset)?;
            let assignment = points
                .iter()
                .enumerate()
                .map(|(row, p)| partition.locate(p).ok_or(Error::RowOutsidePartition { row }))
                .collect::<Result<Vec<_>>>()?;
            let mut weight_sums = vec![0.0; table.len()];
            for (row, &k) in assignment.iter().enumerate() {
                weight_sums[k] += weights[row];
            }
            if let Some(cell) = weight_sums.iter().position(|&w| w <= 0.0) {
                return Err(Error::EmptyCell { table: t, cell });
            }
            bindings.push(TableBinding {
                assignment,
                weight_sums,
            });
        }
        Ok(LikelihoodContext {
            design,
            weights,
            tables: tables.to_vec(),
            bindings,
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn covariates(&self) -> &[String] {
        self.design.covariates()
    }

    /// Length of the coefficient vector, intercept included.
    pub fn n_coefficients(&self) -> usize {
        self.design.covariates().len() + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tables(&self) -> &[ContingencyTable] {
        &self.tables
    }

    /// Total labeled count over all tables (the BIC sample size).
    pub fn table_sample_size(&self) -> f64 {
        self.tables.iter().map(|t| t.total()).sum()
    }

    pub fn cell_assignment(&self, table: usize) -> &[usize] {
        &self.bindings[table].assignment
    }

    pub fn cell_weight_sums(&self, table: usize) -> &[f64] {
        &self.bindings[table].weight_sums
    }

    /// Per table, per cell: (P(Y=1 | cell), P(Y=0 | cell)).
    pub fn cell_probabilities(&self, beta: &[f64]) -> Vec<Vec<(f64, f64)>> {
        assert_eq!(beta.len(), self.n_coefficients(), "coefficient length");
        let offsets = self.design.offsets(beta);
        let row_probs: Vec<(f64, f64)> = offsets
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| {
                let (p1, p0) = label_probabilities(beta[0] + o);
                (p1 * w, p0 * w)
            })
            .collect();
        self.bindings
            .iter()
            .map(|b| {
                let mut sums = vec![(0.0, 0.0); b.weight_sums.len()];
                for (&k, &(a, c)) in b.assignment.iter().zip(&row_probs) {
                    sums[k].0 += a;
                    sums[k].1 += c;
                }
                sums.iter()
                    .zip(&b.weight_sums)
                    .map(|(&(s1, s0), &w)| (s1 / w, s0 / w))
                    .collect()
            })
            .collect()
    }

    /// Approximate P(Y = label | T in cell) for one table cell.
    pub fn cell_conditional_probability(
        &self,
        beta: &[f64],
        table: usize,
        cell: usize,
        label: u8,
    ) -> Result<f64> {
        let b = self
            .bindings
            .get(table)
            .ok_or_else(|| Error::InvalidArgument("table index out of range".into()))?;
        if cell >= b.weight_sums.len() {
            return Err(Error::InvalidArgument("cell index out of range".into()));
        }
        if b.weight_sums[cell] <= 0.0 {
            return Err(Error::EmptyCell { table, cell });
        }
        let (p1, p0) = self.cell_probabilities(beta)[table][cell];
        Ok(if label == 1 { p1 } else { p0 })
    }

    /// Sum over tables and cells of `m_k^(h) log P(Y = h | cell k)`.
    pub fn log_likelihood(&self, beta: &[f64]) -> Result<f64> {
        let probs = self.cell_probabilities(beta);
        let mut total = 0.0;
        for (t, (table, cells)) in self.tables.iter().zip(&probs).enumerate() {
            for (k, &(p1, p0)) in cells.iter().enumerate() {
                for (label, m, p) in [(1u8, table.counts1()[k], p1), (0u8, table.counts0()[k], p0)] {
                    if m == 0.0 {
                        continue;
                    }
                    if p <= 0.0 {
                        return Err(Error::DegenerateCellProbability { table: t, cell: k, label });
                    }
                    total += m * libm::log(p);
                }
            }
        }
        Ok(total)
    }

    /// Negative log-likelihood with cell probabilities clamped to
    /// `[PROBABILITY_FLOOR, PROBABILITY_CEIL]`; the flag reports whether
    /// any weighted term was clamped.
    pub fn clamped_objective(&self, beta: &[f64]) -> (f64, bool) {
        let probs = self.cell_probabilities(beta);
        let mut total = 0.0;
        let mut clamped = false;
        for (table, cells) in self.tables.iter().zip(&probs) {
            for (k, &(p1, p0)) in cells.iter().enumerate() {
                for (m, p) in [(table.counts1()[k], p1), (table.counts0()[k], p0)] {
                    if m == 0.0 {
                        continue;
                    }
                    let c = p.clamp(PROBABILITY_FLOOR, PROBABILITY_CEIL);
                    clamped |= c != p;
                    total += m * libm::log(c);
                }
            }
        }
        (-total, clamped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellPartition, Column, Interval};
    use alloc::collections::BTreeMap;

    fn one_cell_table(m1: f64, m0: f64) -> ContingencyTable {
        let p = CellPartition::univariate("x", vec![Interval::FULL]).unwrap();
        ContingencyTable::new(p, vec![m1], vec![m0]).unwrap()
    }

    fn dataset(x: &[f64], w: &[f64]) -> IndividualDataset {
        IndividualDataset::new(vec![Column::observed("x", x.to_vec())], w.to_vec(), BTreeMap::new()).unwrap()
    }

    #[test]
    fn sigmoid_limits() {
        assert_eq!(individual_probability(&[0.0], &[]), 0.5);
        assert_eq!(individual_probability(&[0.0, 1.0], &[0.0]), 0.5);
        assert!(individual_probability(&[0.0, 1.0], &[-800.0]) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn fitted_coefficients_example() {
        // logit^-1(-2.82 - 1.56 * 0.5 + 0.21 * 10) = logit^-1(-1.5)
        let p = individual_probability(&[-2.82, -1.56, 0.21], &[0.5, 10.0]);
        let want = 1.0 / (1.0 + libm::exp(1.5));
        assert!((p - want).abs() < 1e-12);
        assert!((p - 0.182).abs() < 5e-4);
    }

    #[test]
    fn single_row_cell_is_individual_probability() {
        let ctx = LikelihoodContext::new(&dataset(&[0.3], &[1.0]), &[one_cell_table(1.0, 1.0)], &[] as &[&str])
            .unwrap();
        assert_eq!(ctx.cell_conditional_probability(&[0.0], 0, 0, 1).unwrap(), 0.5);
    }

    #[test]
    fn weighted_cell_average() {
        // Two rows with probabilities 0.2 and 0.6 via x = logit(p), beta = (0, 1).
        let x = [logit(0.2), logit(0.6)];
        let ctx =
            LikelihoodContext::new(&dataset(&x, &[0.25, 0.75]), &[one_cell_table(1.0, 1.0)], &["x"]).unwrap();
        let p1 = ctx.cell_conditional_probability(&[0.0, 1.0], 0, 0, 1).unwrap();
        assert!((p1 - 0.5).abs() < 1e-15);
        let p0 = ctx.cell_conditional_probability(&[0.0, 1.0], 0, 0, 0).unwrap();
        assert!((p0 + p1 - 1.0).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn uniform_probabilities_give_closed_form() {
        let ctx = LikelihoodContext::new(&dataset(&[1.0, 2.0], &[1.0, 1.0]), &[one_cell_table(3.0, 7.0)], &[] as &[&str])
            .unwrap();
        let ll = ctx.log_likelihood(&[0.0]).unwrap();
        assert!((ll - 10.0 * libm::log(0.5)).abs() < 1e-12);
    }

    #[test]
    fn tables_add() {
        let ds = dataset(&[-1.0, 0.5, 2.0], &[1.0, 2.0, 3.0]);
        let a = one_cell_table(3.0, 7.0);
        let b = one_cell_table(5.0, 1.5);
        let beta = [0.3, -0.7];
        let both = LikelihoodContext::new(&ds, &[a.clone(), b.clone()], &["x"]).unwrap();
        let la = LikelihoodContext::new(&ds, &[a], &["x"]).unwrap().log_likelihood(&beta).unwrap();
        let lb = LikelihoodContext::new(&ds, &[b], &["x"]).unwrap().log_likelihood(&beta).unwrap();
        assert!((both.log_likelihood(&beta).unwrap() - (la + lb)).abs() < 1e-12);
    }

    #[test]
    fn empty_cell_rejected() {
        let p = CellPartition::univariate(
            "x",
            vec![
                Interval::new(f64::NEG_INFINITY, 0.0, true, true).unwrap(),
                Interval::new(0.0, f64::INFINITY, true, false).unwrap(),
            ],
        )
        .unwrap();
        let t = ContingencyTable::new(p, vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let err = LikelihoodContext::new(&dataset(&[1.0, 2.0], &[1.0, 1.0]), &[t], &["x"]).unwrap_err();
        assert_eq!(err, Error::EmptyCell { table: 0, cell: 0 });
    }

    #[test]
    fn degenerate_probability_is_an_error_but_objective_clamps() {
        let ctx = LikelihoodContext::new(&dataset(&[1.0], &[1.0]), &[one_cell_table(2.0, 1.0)], &["x"]).unwrap();
        let beta = [0.0, -2000.0];
        assert!(matches!(
            ctx.log_likelihood(&beta),
            Err(Error::DegenerateCellProbability { label: 1, .. })
        ));
        let (value, clamped) = ctx.clamped_objective(&beta);
        assert!(clamped);
        assert!(value.is_finite());
    }
}
