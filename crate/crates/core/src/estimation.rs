//! Maximum likelihood fitting, Hessian-based covariance and intercept
//! calibration.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hessian::{central_hessian, step_sizes};
use crate::likelihood::{sigmoid, Design, LikelihoodContext};
use crate::linalg::Matrix;
use crate::model::{check_identifiability, IndividualDataset, MarginalTarget, ModelFit};
use crate::rng;
use crate::simplex::{minimize, SimplexSettings};

/// Condition number above which the negative Hessian is treated as
/// singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Multiple of `eps * |logL| / h_min^2` (the finite-difference roundoff
/// scale) below which an eigenvalue of the negative Hessian counts as zero.
const NOISE_MULTIPLE: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Tolerance on the spread of objective values across the simplex.
    pub relative_tolerance: f64,
    /// Extra runs re-initialized at the incumbent.
    pub restarts: usize,
    /// Initial simplex edge length per coordinate.
    pub initial_step: f64,
    /// 0 gives the axis-aligned initial simplex; any other value scales and
    /// flips each edge pseudo-randomly (deterministically in the seed).
    pub seed: u64,
    /// Relative finite-difference step for the Hessian.
    pub hessian_step: f64,
    pub compute_covariance: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iterations: 2000,
            relative_tolerance: 1e-10,
            restarts: 2,
            initial_step: 0.5,
            seed: 0,
            hessian_step: 1e-4,
            compute_covariance: true,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.relative_tolerance > 0.0) {
            return Err(Error::InvalidArgument("relative_tolerance must be positive".into()));
        }
        if !(self.initial_step > 0.0) || !(self.hessian_step > 0.0) {
            return Err(Error::InvalidArgument("step sizes must be positive".into()));
        }
        Ok(())
    }

    fn initial_steps(&self, dim: usize) -> Vec<f64> {
        if self.seed == 0 {
            return vec![self.initial_step; dim];
        }
        let mut r = rng::stream(self.seed, rng::DOMAIN_SIMPLEX, 0);
        (0..dim)
            .map(|_| {
                let scale: f64 = r.random_range(0.5..1.5);
                let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                sign * scale * self.initial_step
            })
            .collect()
    }
}

/// Maximize the conditional log-likelihood from `beta = 0`.
///
/// The intercept in the result is the table-scale one (`calibrated` is
/// false); use [`ModelFit::calibrate`] before predicting.
pub fn fit(context: &LikelihoodContext, settings: &OptimizerSettings) -> Result<ModelFit> {
    settings.validate()?;
    let dim = context.n_coefficients();
    for table in context.tables() {
        check_identifiability(table.partition(), dim);
    }
    let mut clamped = 0usize;
    let simplex = SimplexSettings {
        max_iterations: settings.max_iterations,
        relative_tolerance: settings.relative_tolerance,
        restarts: settings.restarts,
    };
    let best = minimize(
        |beta| {
            let (value, hit) = context.clamped_objective(beta);
            clamped += hit as usize;
            value
        },
        &vec![0.0; dim],
        &settings.initial_steps(dim),
        &simplex,
    );
    let log_likelihood = context.log_likelihood(&best.x)?;
    if !best.converged {
        log::warn!(
            "simplex did not converge within {} iterations; keeping the best point",
            settings.max_iterations
        );
    }

    let (cov, issue) = if settings.compute_covariance {
        match covariance(context, &best.x, settings.hessian_step) {
            Ok(c) => {
                let bad = nonpositive_diagonal(&c);
                let issue = (!bad.is_empty())
                    .then(|| format!("non-positive variance for coefficients {bad:?}"));
                if let Some(msg) = &issue {
                    log::warn!("{msg}");
                }
                (Some(c), issue)
            }
            Err(e @ Error::SingularHessian { .. }) => {
                log::warn!("{e}");
                (None, Some(format!("{e}")))
            }
            Err(e) => return Err(e),
        }
    } else {
        (None, None)
    };

    Ok(ModelFit {
        covariates: context.covariates().to_vec(),
        beta0_raw: best.x[0],
        beta: best.x,
        calibrated: false,
        covariance: cov,
        covariance_issue: issue,
        log_likelihood,
        converged: best.converged,
        optimizer_iterations: best.iterations,
        evaluations: best.evaluations,
        clamped_evaluations: clamped,
    })
}

/// Inverse of the negative finite-difference Hessian of the log-likelihood
/// at `beta_hat`, with per-coordinate step `step * max(1, |beta_j|)`.
pub fn covariance(context: &LikelihoodContext, beta_hat: &[f64], step: f64) -> Result<Matrix> {
    let hessian = central_hessian(|b| -context.clamped_objective(b).0, beta_hat, step);
    let information = hessian.scale(-1.0).symmetrized();

    let f0 = context.clamped_objective(beta_hat).0.abs().max(1.0);
    let h_min = step_sizes(beta_hat, step).into_iter().fold(f64::INFINITY, f64::min);
    let noise = NOISE_MULTIPLE * f64::EPSILON * f0 / (h_min * h_min);
    let eig = information.symmetric_eigenvalues();
    let smallest = eig.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    let largest = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let condition = largest / smallest;
    if !(smallest > noise) || !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularHessian { condition });
    }
    let inverse = information.inverse().ok_or(Error::SingularHessian { condition })?;
    Ok(inverse.symmetrized())
}

pub fn nonpositive_diagonal(m: &Matrix) -> Vec<usize> {
    (0..m.n_rows()).filter(|&i| !(m.get(i, i) > 0.0)).collect()
}

/// Intercept `b0` such that `sum_i w_i * sigmoid(b0 + offsets_i) = p1`,
/// by bisection (the left side is increasing in `b0`). The bracket starts
/// at [-50, 50] and doubles outward as needed.
pub fn solve_intercept(offsets: &[f64], weights: &[f64], p1: f64) -> Result<f64> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::InvalidTarget(p1));
    }
    if offsets.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: offsets.len(),
            right: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    let mean = |b0: f64| {
        offsets.iter().zip(weights).map(|(o, w)| w * sigmoid(b0 + o)).sum::<f64>() / total
    };
    let failure = Error::BracketFailure { target: p1 };
    let (mut lo, mut hi) = (-50.0f64, 50.0f64);
    while mean(lo) > p1 {
        lo *= 2.0;
        if lo < -1e6 {
            return Err(failure);
        }
    }
    while mean(hi) < p1 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(failure);
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean(mid) < p1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (glo, ghi) = ((mean(lo) - p1).abs(), (mean(hi) - p1).abs());
    let (b0, gap) = if glo <= ghi { (lo, glo) } else { (hi, ghi) };
    if gap > 1e-10 {
        return Err(failure);
    }
    Ok(b0)
}

/// Calibrated intercept for `beta` (intercept first, slopes held fixed) so
/// that the weighted mean predicted probability on `dataset` equals the
/// target.
pub fn calibrate_intercept<S: AsRef<str>>(
    dataset: &IndividualDataset,
    covariates: &[S],
    beta: &[f64],
    target: MarginalTarget,
) -> Result<f64> {
    if beta.len() != covariates.len() + 1 {
        return Err(Error::LengthMismatch {
            left: beta.len(),
            right: covariates.len() + 1,
        });
    }
    let design = Design::new(dataset, covariates)?;
    solve_intercept(&design.offsets(beta), dataset.weights(), target.p1())
}
