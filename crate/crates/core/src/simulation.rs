//! Synthetic data and the method-comparison study: tables are generated
//! from a known logistic truth, both the table-supervised model and a
//! per-cell categorical baseline are fitted, and each is scored by its
//! mean absolute error against the true individual probabilities.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit, solve_intercept, OptimizerSettings};
use crate::inference::predict;
use crate::likelihood::{logit, sigmoid, Design, LikelihoodContext};
use crate::model::{
    assign_cells, CellPartition, Column, ContingencyTable, IndividualDataset, MarginalTarget,
};
use crate::par;
use crate::rng;

/// Counts of one multinomial draw of size `n`, by sequential conditional
/// binomials. `probs` need not be normalized.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        let c = if left == 0 || p <= 0.0 {
            0
        } else if p >= mass {
            left
        } else {
            Binomial::new(left, (p / mass).clamp(0.0, 1.0)).map_or(0, |b| b.sample(rng))
        };
        out.push(c);
        left -= c;
        mass -= p;
    }
    out
}

/// Shape of the synthetic survey-like dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Rows whose CD4 value is blanked (CD4 is then imputable).
    pub missing_cd4: usize,
    /// Extra pure-noise N(0, 1) covariates `noise1`, `noise2`, ...
    pub noise_covariates: usize,
    /// Share of rows drawn from the "recent" covariate profile.
    pub recent_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 705,
            missing_cd4: 24,
            noise_covariates: 0,
            recent_fraction: 0.15,
            seed: 1,
        }
    }
}

pub const REGIONS: [&str; 4] = ["North", "Central", "South", "East"];
pub const AGE_GROUPS: [&str; 3] = ["15-24", "25-34", "35+"];

/// Draw a synthetic dataset.
///
/// Columns: `ODn`, `VL` (natural log of copies/mL), `CD4` (fourth root),
/// `selfpos` (0/1) and optional noise columns. A latent profile flag shifts
/// every covariate: the recent profile has low ODn and high VL. Weights are
/// log-normal. Group schemes `region` and `age` are tilted by the profile
/// so their rates differ.
pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<IndividualDataset> {
    if spec.n == 0 || spec.missing_cd4 > spec.n {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {} rows with {} missing",
            spec.n, spec.missing_cd4
        )));
    }
    let mut r = rng::stream(spec.seed, rng::DOMAIN_SYNTHETIC, 0);
    let odn_recent = Gamma::new(2.0, 0.45).map_err(dist_err)?;
    let odn_long = LogNormal::new(libm::log(3.0), 0.35).map_err(dist_err)?;
    let vl_recent = Normal::new(10.5, 1.5).map_err(dist_err)?;
    let vl_long = Normal::new(8.5, 2.2).map_err(dist_err)?;
    let weight = LogNormal::new(0.0, 0.5).map_err(dist_err)?;
    let floor_vl = libm::log(20.0);

    let n = spec.n;
    let mut odn = Vec::with_capacity(n);
    let mut vl = Vec::with_capacity(n);
    let mut cd4 = Vec::with_capacity(n);
    let mut selfpos = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut region = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    for _ in 0..n {
        let recent = r.random::<f64>() < spec.recent_fraction;
        let z = if recent { 1.0 } else { 0.0 };
        odn.push(if recent { odn_recent.sample(&mut r) + 0.02 } else { odn_long.sample(&mut r) });
        let v: f64 = if recent { vl_recent.sample(&mut r) } else { vl_long.sample(&mut r) };
        vl.push(v.max(floor_vl));
        let c: f64 = Normal::new(4.2 - 0.3 * z, 0.6).map_err(dist_err)?.sample(&mut r);
        cd4.push(c.max(0.0));
        selfpos.push(if r.random::<f64>() < 0.35 - 0.25 * z { 1.0 } else { 0.0 });
        weights.push(weight.sample(&mut r));
        let region_w: [f64; 4] = if recent { [0.15, 0.2, 0.3, 0.35] } else { [0.35, 0.3, 0.2, 0.15] };
        region.push(REGIONS[categorical(&mut r, &region_w)].to_string());
        let age_w: [f64; 3] = if recent { [0.5, 0.3, 0.2] } else { [0.2, 0.35, 0.45] };
        age.push(AGE_GROUPS[categorical(&mut r, &age_w)].to_string());
    }
    let mut cd4: Vec<Option<f64>> = cd4.into_iter().map(Some).collect();
    let mut blanked = 0;
    while blanked < spec.missing_cd4 {
        let i = r.random_range(0..n);
        if cd4[i].is_some() {
            cd4[i] = None;
            blanked += 1;
        }
    }
    let mut columns = vec![
        Column::observed("ODn", odn),
        Column::observed("VL", vl),
        Column {
            name: "CD4".into(),
            values: cd4,
            imputable: true,
        },
        Column::observed("selfpos", selfpos),
    ];
    for k in 1..=spec.noise_covariates {
        let v: Vec<f64> = (0..n).map(|_| r.sample(rand_distr::StandardNormal)).collect();
        columns.push(Column::observed(&format!("noise{k}"), v));
    }
    let mut groups = BTreeMap::new();
    groups.insert("region".to_string(), region);
    groups.insert("age".to_string(), age);
    IndividualDataset::new(columns, weights, groups)
}

fn dist_err<E: core::fmt::Debug>(e: E) -> Error {
    Error::InvalidArgument(format!("distribution parameters: {e:?}"))
}

fn categorical<R: Rng + ?Sized>(r: &mut R, w: &[f64]) -> usize {
    let total: f64 = w.iter().sum();
    let mut u = r.random::<f64>() * total;
    for (i, &x) in w.iter().enumerate() {
        if u < x {
            return i;
        }
        u -= x;
    }
    w.len() - 1
}

/// A known logistic truth used to generate tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub covariates: Vec<String>,
    /// Slopes, without the intercept.
    pub beta: Vec<f64>,
    /// Population rate that fixes the true intercept.
    pub marginal: MarginalTarget,
    /// (m1, m0): label totals of the generated tables, which fix the
    /// adjusted intercept used for table generation.
    pub label_totals: (f64, f64),
    pub partition: CellPartition,
}

impl TruthSpec {
    pub fn table_count_total(&self) -> f64 {
        self.label_totals.0 + self.label_totals.1
    }

    fn validate(&self) -> Result<()> {
        if self.covariates.len() != self.beta.len() {
            return Err(Error::LengthMismatch {
                left: self.covariates.len(),
                right: self.beta.len(),
            });
        }
        let (m1, m0) = self.label_totals;
        if !(m1 > 0.0 && m0 > 0.0) {
            return Err(Error::InvalidArgument("table label totals must be positive".into()));
        }
        Ok(())
    }
}

fn offsets<S: AsRef<str>>(dataset: &IndividualDataset, covariates: &[S], slopes: &[f64]) -> Result<Vec<f64>> {
    let mut beta = vec![0.0];
    beta.extend_from_slice(slopes);
    Ok(Design::new(dataset, covariates)?.offsets(&beta))
}

/// Intercept making the weighted mean truth probability equal `p1`.
pub fn solve_true_intercept<S: AsRef<str>>(
    dataset: &IndividualDataset,
    covariates: &[S],
    slopes: &[f64],
    p1: MarginalTarget,
) -> Result<f64> {
    solve_intercept(&offsets(dataset, covariates, slopes)?, dataset.weights(), p1.p1())
}

/// Full true coefficient vector (intercept first) and the per-row truth.
pub fn true_probabilities(dataset: &IndividualDataset, truth: &TruthSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    truth.validate()?;
    let off = offsets(dataset, &truth.covariates, &truth.beta)?;
    let b0 = solve_intercept(&off, dataset.weights(), truth.marginal.p1())?;
    let mut beta = vec![b0];
    beta.extend_from_slice(&truth.beta);
    Ok((beta, off.iter().map(|o| sigmoid(b0 + o)).collect()))
}

/// Joint cell-by-label proportions for table generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProportions {
    /// Intercept matching the table's own label share m1 / (m1 + m0).
    pub adjusted_intercept: f64,
    pub label1: Vec<f64>,
    pub label0: Vec<f64>,
}

impl TableProportions {
    /// All 2K proportions, label 1 first.
    pub fn flat(&self) -> Vec<f64> {
        self.label1.iter().chain(&self.label0).copied().collect()
    }
}

/// `P(Y = h, T in C_k) ~ sum_{i in k} P(Y_i = h | x_i) w_i` under the truth
/// with its intercept replaced by the adjusted one.
pub fn table_multinomial_proportions(
    dataset: &IndividualDataset,
    truth: &TruthSpec,
) -> Result<TableProportions> {
    truth.validate()?;
    let (m1, m0) = truth.label_totals;
    let off = offsets(dataset, &truth.covariates, &truth.beta)?;
    let b0 = solve_intercept(&off, dataset.weights(), m1 / (m1 + m0))?;
    let assignment = assign_cells(&truth.partition, dataset)?;
    let k = truth.partition.len();
    let mut label1 = vec![0.0; k];
    let mut label0 = vec![0.0; k];
    let mut occupied = vec![false; k];
    for ((&cell, o), w) in assignment.iter().zip(&off).zip(dataset.weights()) {
        let p = sigmoid(b0 + o);
        label1[cell] += p * w;
        label0[cell] += (1.0 - p) * w;
        occupied[cell] = true;
    }
    if let Some(cell) = occupied.iter().position(|o| !o) {
        return Err(Error::EmptyCell { table: 0, cell });
    }
    Ok(TableProportions {
        adjusted_intercept: b0,
        label1,
        label0,
    })
}

/// One multinomial table of size `m`.
pub fn draw_table<R: Rng + ?Sized>(
    partition: &CellPartition,
    proportions: &TableProportions,
    m: u64,
    rng: &mut R,
) -> Result<ContingencyTable> {
    let k = partition.len();
    let counts = multinomial(rng, m, &proportions.flat());
    ContingencyTable::new(
        partition.clone(),
        counts[..k].iter().map(|&c| c as f64).collect(),
        counts[k..].iter().map(|&c| c as f64).collect(),
    )
}

/// The noiseless table `m * proportions`.
pub fn expected_table(partition: &CellPartition, proportions: &TableProportions, m: f64) -> Result<ContingencyTable> {
    ContingencyTable::new(
        partition.clone(),
        proportions.label1.iter().map(|p| p * m).collect(),
        proportions.label0.iter().map(|p| p * m).collect(),
    )
}

/// Per-row probabilities from the saturated per-cell model: each cell's
/// empirical rate `m1 / (m1 + m0)` (0.5 for a cell with no counts), then the
/// common intercept shift that calibrates the weighted mean to `target`.
pub fn fit_alternative_categorical(
    table: &ContingencyTable,
    dataset: &IndividualDataset,
    target: MarginalTarget,
) -> Result<Vec<f64>> {
    let cell_logit: Vec<f64> = table
        .counts1()
        .iter()
        .zip(table.counts0())
        .enumerate()
        .map(|(k, (&a, &b))| {
            if a + b > 0.0 {
                logit(a / (a + b))
            } else {
                log::warn!("cell {k} has no counts; using a 0.5 continuity correction");
                0.0
            }
        })
        .collect();
    let assignment = assign_cells(table.partition(), dataset)?;
    let off: Vec<f64> = assignment.iter().map(|&k| cell_logit[k]).collect();
    let b0 = solve_intercept(&off, dataset.weights(), target.p1())?;
    Ok(off.iter().map(|o| sigmoid(b0 + o)).collect())
}

/// Unweighted mean absolute difference.
pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument("mean absolute error of empty vectors".into()));
    }
    Ok(predicted.iter().zip(truth).map(|(a, b)| (a - b).abs()).sum::<f64>() / predicted.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StudyMethod {
    /// The table-supervised logistic model on the listed covariates.
    Proposed { covariates: Vec<String> },
    AlternativeCategorical,
}

impl StudyMethod {
    pub fn name(&self) -> String {
        match self {
            StudyMethod::Proposed { covariates } => format!("proposed[{}]", covariates.join("+")),
            StudyMethod::AlternativeCategorical => "alternative_categorical".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_mae: f64,
    pub sd_mae: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReplicate {
    pub index: usize,
    /// One MAE per method, in method order; empty when the replicate failed.
    pub mae: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub methods: Vec<String>,
    pub true_beta: Vec<f64>,
    pub adjusted_intercept: f64,
    pub replicates: Vec<StudyReplicate>,
    pub summary: Vec<MethodSummary>,
}

/// Draw `replicates` tables from the truth and score every method on each.
///
/// Replicate `r` uses the random stream `(seed, r)`. Fitted models are
/// calibrated to the truth's marginal rate. A replicate where any method
/// fails is dropped; more than 10% dropped aborts the study.
pub fn run_study(
    dataset: &IndividualDataset,
    truth: &TruthSpec,
    methods: &[StudyMethod],
    replicates: usize,
    seed: u64,
    optimizer: &OptimizerSettings,
) -> Result<StudyResult> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("a study needs at least two replicates".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to compare".into()));
    }
    let (true_beta, truth_probs) = true_probabilities(dataset, truth)?;
    let proportions = table_multinomial_proportions(dataset, truth)?;
    let m = libm::round(truth.table_count_total()) as u64;
    let optimizer = OptimizerSettings {
        compute_covariance: false,
        ..*optimizer
    };

    let one = |r: usize| -> Result<Vec<f64>> {
        let mut rng = rng::stream(seed, rng::DOMAIN_SIMULATE, r as u64);
        let table = draw_table(&truth.partition, &proportions, m, &mut rng)?;
        methods
            .iter()
            .map(|method| {
                let probs = match method {
                    StudyMethod::Proposed { covariates } => {
                        let ctx = LikelihoodContext::new(dataset, core::slice::from_ref(&table), covariates)?;
                        let mut f = fit(&ctx, &optimizer)?;
                        f.calibrate(dataset, truth.marginal)?;
                        predict(dataset, &f)?
                    }
                    StudyMethod::AlternativeCategorical => {
                        fit_alternative_categorical(&table, dataset, truth.marginal)?
                    }
                };
                mae(&probs, &truth_probs)
            })
            .collect()
    };
    let reps: Vec<StudyReplicate> = par::map_indexed(replicates, |r| match one(r) {
        Ok(mae) => StudyReplicate {
            index: r,
            mae,
            failure: None,
        },
        Err(e) => StudyReplicate {
            index: r,
            mae: Vec::new(),
            failure: Some(e.to_string()),
        },
    });
    let failed = reps.iter().filter(|r| r.failure.is_some()).count();
    if failed * 10 > replicates {
        return Err(Error::TooManyFailedReplicates {
            failed,
            total: replicates,
        });
    }
    let ok: Vec<&StudyReplicate> = reps.iter().filter(|r| r.failure.is_none()).collect();
    let summary = methods
        .iter()
        .enumerate()
        .map(|(i, method)| {
            let v: Vec<f64> = ok.iter().map(|r| r.mae[i]).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            MethodSummary {
                method: method.name(),
                mean_mae: mean,
                sd_mae: libm::sqrt(var),
                replicates: v.len(),
            }
        })
        .collect();
    Ok(StudyResult {
        methods: methods.iter().map(|m| m.name()).collect(),
        true_beta,
        adjusted_intercept: proportions.adjusted_intercept,
        replicates: reps,
        summary,
    })
}
