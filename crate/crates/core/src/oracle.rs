//! Brute-force reference for the conditional log-likelihood.
//!
//! Recomputes every cell probability by scanning all rows and testing cell
//! membership directly, with no precomputed assignments or weight sums.
//! Quadratic in the number of rows and cells; meant for tests on small
//! instances only.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{ContingencyTable, IndividualDataset};

pub fn brute_force_log_likelihood<S: AsRef<str>>(
    dataset: &IndividualDataset,
    tables: &[ContingencyTable],
    covariates: &[S],
    beta: &[f64],
) -> Result<f64> {
    let cols: Vec<usize> = covariates
        .iter()
        .map(|c| dataset.covariate_index(c.as_ref()))
        .collect::<Result<_>>()?;
    let value = |row: usize, col: usize| -> Result<f64> {
        dataset.value(row, col).ok_or_else(|| Error::MissingCovariateAtPredict {
            covariate: dataset.columns()[col].name.clone(),
            row,
        })
    };
    let mut total = 0.0;
    for (t, table) in tables.iter().enumerate() {
        let partition = table.partition();
        let tcols: Vec<usize> = partition
            .covariates()
            .iter()
            .map(|c| dataset.covariate_index(c))
            .collect::<Result<_>>()?;
        for k in 0..table.len() {
            let mut num1 = 0.0;
            let mut num0 = 0.0;
            let mut den = 0.0;
            for row in 0..dataset.n_rows() {
                let point = tcols.iter().map(|&c| value(row, c)).collect::<Result<Vec<f64>>>()?;
                if !partition.cells()[k].contains(&point) {
                    continue;
                }
                let mut eta = beta[0];
                for (j, &c) in cols.iter().enumerate() {
                    eta += value(row, c)? * beta[j + 1];
                }
                let w = dataset.weights()[row];
                num1 += w * (1.0 / (1.0 + libm::exp(-eta)));
                num0 += w * (1.0 / (1.0 + libm::exp(eta)));
                den += w;
            }
            if den == 0.0 {
                return Err(Error::EmptyCell { table: t, cell: k });
            }
            for (label, m, p) in [(1u8, table.counts1()[k], num1 / den), (0u8, table.counts0()[k], num0 / den)] {
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
