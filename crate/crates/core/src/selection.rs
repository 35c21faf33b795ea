//! Forward stepwise selection, multiple imputation, majority-vote consensus
//! across imputations and Rubin pooling.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit, OptimizerSettings};
use crate::likelihood::LikelihoodContext;
use crate::linalg::Matrix;
use crate::model::{ContingencyTable, IndividualDataset, MarginalTarget, ModelFit};
use crate::par;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Aic,
    Bic,
}

/// AIC `2k - 2 logL` or BIC `k ln(m) - 2 logL`, with `k` counting the
/// intercept and `m` the total labeled count of the tables.
pub fn information_criterion(fit: &ModelFit, kind: Criterion, table_sample_size: f64) -> f64 {
    let k = fit.n_params() as f64;
    let penalty = match kind {
        Criterion::Aic => 2.0 * k,
        Criterion::Bic => k * libm::log(table_sample_size),
    };
    penalty - 2.0 * fit.log_likelihood
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// `None` for the intercept-only start.
    pub added: Option<String>,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseResult {
    pub selected: Vec<String>,
    pub trace: Vec<TraceStep>,
    /// Uncalibrated fit of the final model.
    pub fit: ModelFit,
}

/// Greedy forward selection from the intercept-only model.
///
/// Each round fits every remaining candidate added to the current set and
/// accepts the one with the lowest criterion if it is strictly below the
/// current value. Ties go to the earlier candidate. A candidate whose fit
/// fails is skipped for that round.
pub fn forward_stepwise<S: AsRef<str>>(
    dataset: &IndividualDataset,
    tables: &[ContingencyTable],
    candidates: &[S],
    kind: Criterion,
    settings: &OptimizerSettings,
) -> Result<StepwiseResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate covariates".into()));
    }
    let settings = OptimizerSettings {
        compute_covariance: false,
        ..*settings
    };
    let fit_set = |set: &[String]| -> Result<(ModelFit, f64)> {
        let ctx = LikelihoodContext::new(dataset, tables, set)?;
        let f = fit(&ctx, &settings)?;
        let ic = information_criterion(&f, kind, ctx.table_sample_size());
        Ok((f, ic))
    };

    let mut selected: Vec<String> = Vec::new();
    let (mut current_fit, mut current) = fit_set(&selected)?;
    let mut trace = vec![TraceStep {
        step: 0,
        added: None,
        criterion: current,
    }];
    let mut remaining: Vec<String> = candidates.iter().map(|c| c.as_ref().to_string()).collect();

    while !remaining.is_empty() {
        let mut best: Option<(usize, ModelFit, f64)> = None;
        for (i, cand) in remaining.iter().enumerate() {
            let mut trial = selected.clone();
            trial.push(cand.clone());
            match fit_set(&trial) {
                Ok((f, ic)) => {
                    if best.as_ref().is_none_or(|b| ic < b.2) {
                        best = Some((i, f, ic));
                    }
                }
                Err(e) => log::warn!("skipping candidate `{cand}`: {e}"),
            }
        }
        match best {
            Some((i, f, ic)) if ic < current => {
                let name = remaining.remove(i);
                selected.push(name.clone());
                current = ic;
                current_fit = f;
                trace.push(TraceStep {
                    step: trace.len(),
                    added: Some(name),
                    criterion: ic,
                });
            }
            _ => break,
        }
    }
    Ok(StepwiseResult {
        selected,
        trace,
        fit: current_fit,
    })
}

/// J completed copies of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationSet {
    pub datasets: Vec<IndividualDataset>,
    /// (column index, row) of every filled entry.
    pub imputed_mask: Vec<(usize, usize)>,
}

impl ImputationSet {
    /// A single "imputation" of a dataset with nothing missing.
    pub fn complete(dataset: IndividualDataset) -> Self {
        ImputationSet {
            datasets: vec![dataset],
            imputed_mask: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }
}

/// Least-squares pieces of one imputation model.
struct NormalModel {
    col: usize,
    missing_rows: Vec<usize>,
    /// Predictor values of the missing rows, intercept first.
    missing_x: Vec<Vec<f64>>,
    beta_hat: Vec<f64>,
    /// Cholesky factor of X^T X.
    chol: Matrix,
    rss: f64,
    df: usize,
}

fn normal_model(dataset: &IndividualDataset, col: usize, predictors: &[usize]) -> Result<NormalModel> {
    let name = &dataset.columns()[col].name;
    let q = predictors.len() + 1;
    let x_of = |row: usize| -> Vec<f64> {
        let mut x = Vec::with_capacity(q);
        x.push(1.0);
        x.extend(predictors.iter().map(|&p| dataset.value(row, p).unwrap_or(f64::NAN)));
        x
    };
    let (complete, missing_rows): (Vec<usize>, Vec<usize>) =
        (0..dataset.n_rows()).partition(|&r| dataset.value(r, col).is_some());
    let required = q + 2;
    if complete.len() < required {
        return Err(Error::InsufficientCompleteRows {
            covariate: name.clone(),
            complete: complete.len(),
            required,
        });
    }

    let mut xtx = Matrix::zeros(q, q);
    let mut xty = vec![0.0; q];
    let mut rows = Vec::with_capacity(complete.len());
    for &r in &complete {
        let x = x_of(r);
        let y = dataset.value(r, col).unwrap_or(0.0);
        for a in 0..q {
            xty[a] += x[a] * y;
            for b in 0..q {
                xtx.set(a, b, xtx.get(a, b) + x[a] * x[b]);
            }
        }
        rows.push((x, y));
    }
    let chol = xtx
        .cholesky()
        .filter(|l| {
            let d = l.diagonal();
            let max = d.iter().fold(0.0f64, |m, v| m.max(*v));
            d.iter().all(|v| *v > 1e-7 * max)
        })
        .ok_or_else(|| Error::SingularImputationModel(name.clone()))?;
    let beta_hat = chol.solve_lower_transpose(&chol.solve_lower(&xty));
    let rss: f64 = rows
        .iter()
        .map(|(x, y)| {
            let fitted: f64 = x.iter().zip(&beta_hat).map(|(a, b)| a * b).sum();
            (y - fitted) * (y - fitted)
        })
        .sum();
    Ok(NormalModel {
        col,
        missing_x: missing_rows.iter().map(|&r| x_of(r)).collect(),
        missing_rows,
        beta_hat,
        chol,
        rss,
        df: complete.len() - q,
    })
}

impl NormalModel {
    /// One posterior-predictive draw for every missing row.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(usize, f64)> {
        let chi: f64 = ChiSquared::new(self.df as f64)
            .map(|d| d.sample(rng))
            .unwrap_or(1.0);
        let sigma = libm::sqrt(self.rss / chi);
        let z: Vec<f64> = (0..self.beta_hat.len()).map(|_| rng.sample(StandardNormal)).collect();
        let shift = self.chol.solve_lower_transpose(&z);
        let beta: Vec<f64> = self.beta_hat.iter().zip(&shift).map(|(b, s)| b + sigma * s).collect();
        self.missing_rows
            .iter()
            .zip(&self.missing_x)
            .map(|(&row, x)| {
                let mean: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let eps: f64 = rng.sample(StandardNormal);
                (row, mean + sigma * eps)
            })
            .collect()
    }
}

/// Multiple imputation under a Bayesian normal linear model.
///
/// Each column in `imputable` that has missing values is regressed on every
/// fully observed column over its complete rows. Imputation `j` draws the
/// coefficients and noise variance from their flat-prior posterior and then
/// the missing values from the posterior predictive, using the random
/// stream `(seed, j)`. Columns are imputed independently of each other.
pub fn impute<S: AsRef<str>>(
    dataset: &IndividualDataset,
    imputable: &[S],
    j: usize,
    seed: u64,
) -> Result<ImputationSet> {
    if j == 0 {
        return Err(Error::InvalidArgument("at least one imputation is required".into()));
    }
    let targets: Vec<usize> = imputable
        .iter()
        .map(|c| dataset.covariate_index(c.as_ref()))
        .collect::<Result<_>>()?;
    for (col, column) in dataset.columns().iter().enumerate() {
        if !targets.contains(&col) {
            if let Some(row) = column.values.iter().position(|v| v.is_none()) {
                return Err(Error::UnexpectedMissing {
                    covariate: column.name.clone(),
                    row,
                });
            }
        }
    }
    let predictors: Vec<usize> = (0..dataset.n_covariates())
        .filter(|&c| dataset.columns()[c].missing_count() == 0)
        .collect();
    let mut targets: Vec<usize> = targets
        .into_iter()
        .filter(|&c| dataset.columns()[c].missing_count() > 0)
        .collect();
    targets.sort_unstable();
    targets.dedup();

    let models = targets
        .iter()
        .map(|&c| normal_model(dataset, c, &predictors))
        .collect::<Result<Vec<_>>>()?;
    let imputed_mask = models
        .iter()
        .flat_map(|m| m.missing_rows.iter().map(move |&r| (m.col, r)))
        .collect();

    let datasets = par::map_indexed(j, |index| {
        let mut r = rng::stream(seed, rng::DOMAIN_IMPUTE, index as u64);
        let mut out = dataset.clone();
        for m in &models {
            out = out.with_filled(m.col, &m.draw(&mut r));
        }
        out
    });
    Ok(ImputationSet {
        datasets,
        imputed_mask,
    })
}

/// Covariates (in candidate order) chosen by at least `ceil(J/2)` of the
/// per-imputation selections, with every candidate's vote count.
pub fn majority_consensus<S: AsRef<str>>(
    candidates: &[S],
    selections: &[Vec<String>],
) -> (Vec<String>, Vec<(String, usize)>) {
    let threshold = selections.len().div_ceil(2);
    let votes: Vec<(String, usize)> = candidates
        .iter()
        .map(|c| {
            let c = c.as_ref();
            let n = selections.iter().filter(|s| s.iter().any(|x| x == c)).count();
            (c.to_string(), n)
        })
        .collect();
    let consensus = votes
        .iter()
        .filter(|(_, n)| !selections.is_empty() && *n >= threshold)
        .map(|(c, _)| c.clone())
        .collect();
    (consensus, votes)
}

/// Rubin-pooled coefficients across per-imputation fits of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub covariates: Vec<String>,
    pub beta: Vec<f64>,
    /// Mean of the per-imputation variances; `None` if any fit lacks a
    /// covariance.
    pub within_variance: Option<Vec<f64>>,
    /// Sample variance (denominator J - 1) of the estimates; zero for J = 1.
    pub between_variance: Vec<f64>,
    /// within + (1 + 1/J) between.
    pub total_variance: Option<Vec<f64>>,
}

pub fn pool(fits: &[ModelFit]) -> Result<PooledEstimate> {
    let first = fits
        .first()
        .ok_or_else(|| Error::InvalidArgument("no fits to pool".into()))?;
    if fits.iter().any(|f| f.covariates != first.covariates) {
        return Err(Error::InconsistentDesigns);
    }
    let j = fits.len() as f64;
    let p = first.n_params();
    let beta: Vec<f64> = (0..p).map(|i| fits.iter().map(|f| f.beta[i]).sum::<f64>() / j).collect();
    let between: Vec<f64> = (0..p)
        .map(|i| {
            if fits.len() < 2 {
                0.0
            } else {
                fits.iter().map(|f| (f.beta[i] - beta[i]) * (f.beta[i] - beta[i])).sum::<f64>() / (j - 1.0)
            }
        })
        .collect();
    let within: Option<Vec<f64>> = fits
        .iter()
        .map(|f| f.covariance.as_ref().map(|c| c.diagonal()))
        .collect::<Option<Vec<_>>>()
        .map(|diags| (0..p).map(|i| diags.iter().map(|d| d[i]).sum::<f64>() / j).collect());
    let total = within
        .as_ref()
        .map(|w| w.iter().zip(&between).map(|(w, b)| w + (1.0 + 1.0 / j) * b).collect());
    Ok(PooledEstimate {
        covariates: first.covariates.clone(),
        beta,
        within_variance: within,
        between_variance: between,
        total_variance: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub criterion: Criterion,
    pub per_imputation_sets: Vec<Vec<String>>,
    pub criterion_traces: Vec<Vec<TraceStep>>,
    pub votes: Vec<(String, usize)>,
    pub consensus_set: Vec<String>,
    /// Refit of the consensus model on each completed dataset (calibrated
    /// when a target was supplied).
    pub refits: Vec<ModelFit>,
    pub pooled: PooledEstimate,
}

/// Stepwise selection on every completed dataset, majority consensus, then
/// refit of the consensus model per imputation and Rubin pooling.
pub fn select_and_pool<S: AsRef<str> + Sync>(
    imputations: &ImputationSet,
    tables: &[ContingencyTable],
    candidates: &[S],
    kind: Criterion,
    settings: &OptimizerSettings,
    target: Option<MarginalTarget>,
) -> Result<SelectionResult> {
    if imputations.is_empty() {
        return Err(Error::InvalidArgument("no completed datasets".into()));
    }
    let runs = par::map_indexed(imputations.len(), |j| {
        forward_stepwise(&imputations.datasets[j], tables, candidates, kind, settings)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let per_imputation_sets: Vec<Vec<String>> = runs.iter().map(|r| r.selected.clone()).collect();
    let (consensus_set, votes) = majority_consensus(candidates, &per_imputation_sets);

    let refit_settings = OptimizerSettings {
        compute_covariance: true,
        ..*settings
    };
    let refits = par::map_indexed(imputations.len(), |j| -> Result<ModelFit> {
        let ds = &imputations.datasets[j];
        let ctx = LikelihoodContext::new(ds, tables, &consensus_set)?;
        let mut f = fit(&ctx, &refit_settings)?;
        if let Some(t) = target {
            f.calibrate(ds, t)?;
        }
        Ok(f)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let pooled = pool(&refits)?;
    Ok(SelectionResult {
        criterion: kind,
        per_imputation_sets,
        criterion_traces: runs.into_iter().map(|r| r.trace).collect(),
        votes,
        consensus_set,
        refits,
        pooled,
    })
}
