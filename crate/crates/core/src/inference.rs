//! Prediction, the threshold classifier baseline, weighted group
//! aggregation and bootstrap confidence intervals.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{fit, OptimizerSettings};
use crate::likelihood::{Design, LikelihoodContext};
use crate::model::{assign_cells, ContingencyTable, IndividualDataset, MarginalTarget, ModelFit, Scale};
use crate::par;
use crate::rng;
use crate::simulation::multinomial;

/// P(Y = 1 | x_i) for every row. The fit must be calibrated.
pub fn predict(dataset: &IndividualDataset, fit: &ModelFit) -> Result<Vec<f64>> {
    if !fit.calibrated {
        return Err(Error::Uncalibrated);
    }
    Ok(Design::new(dataset, &fit.covariates)?.probabilities(&fit.beta))
}

/// Row-wise average of `predict(datasets[j], fits[j])` over imputations.
pub fn predict_pooled(datasets: &[IndividualDataset], fits: &[ModelFit]) -> Result<Vec<f64>> {
    if datasets.len() != fits.len() {
        return Err(Error::LengthMismatch {
            left: datasets.len(),
            right: fits.len(),
        });
    }
    let Some(first) = datasets.first() else {
        return Err(Error::InvalidArgument("no imputations to predict from".into()));
    };
    let mut mean = vec![0.0; first.n_rows()];
    for (ds, f) in datasets.iter().zip(fits) {
        let p = predict(ds, f)?;
        if p.len() != mean.len() {
            return Err(Error::LengthMismatch {
                left: mean.len(),
                right: p.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    let j = datasets.len() as f64;
    Ok(mean.into_iter().map(|m| m / j).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbabilityBin {
    Low,
    Mid,
    High,
}

/// Bins `[0, 1/3)`, `[1/3, 2/3)` and `[2/3, 1]`.
pub fn probability_bin(p: f64) -> ProbabilityBin {
    if p < 1.0 / 3.0 {
        ProbabilityBin::Low
    } else if p < 2.0 / 3.0 {
        ProbabilityBin::Mid
    } else {
        ProbabilityBin::High
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BctLabel {
    Recent,
    LongTerm,
}

impl BctLabel {
    pub fn is_recent(self) -> bool {
        self == BctLabel::Recent
    }
}

/// The two-threshold baseline: Recent iff ODn <= `odn_max` and raw VL >=
/// `vl_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BctRule {
    pub odn: String,
    pub vl: String,
    /// Storage scale of the VL column; the threshold applies to raw values.
    pub vl_scale: Scale,
    pub odn_max: f64,
    pub vl_min: f64,
}

impl Default for BctRule {
    fn default() -> Self {
        BctRule {
            odn: "ODn".into(),
            vl: "VL".into(),
            vl_scale: Scale::Raw,
            odn_max: 1.5,
            vl_min: 1000.0,
        }
    }
}

impl BctRule {
    pub fn classify(&self, odn: f64, stored_vl: f64) -> BctLabel {
        let raw = self.vl_scale.to_raw(stored_vl);
        // exp/pow round-trips can land a few ulp below the threshold.
        let vl_min = match self.vl_scale {
            Scale::Raw => self.vl_min,
            _ => self.vl_min * (1.0 - 1e-12),
        };
        if odn <= self.odn_max && raw >= vl_min {
            BctLabel::Recent
        } else {
            BctLabel::LongTerm
        }
    }
}

pub fn bct_classify(dataset: &IndividualDataset, rule: &BctRule) -> Result<Vec<BctLabel>> {
    let odn = dataset.observed_column(&rule.odn)?;
    let vl = dataset.observed_column(&rule.vl)?;
    Ok(odn.iter().zip(&vl).map(|(&o, &v)| rule.classify(o, v)).collect())
}

/// Weighted estimate for one group level; `estimate` is `None` when the
/// group has no rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEstimate {
    pub level: String,
    pub n: usize,
    pub estimate: Option<f64>,
}

/// Group levels in reporting order: `declared` first, then any other
/// observed label in sorted order.
pub fn group_levels(labels: &[String], declared: &[String]) -> Vec<String> {
    let mut levels: Vec<String> = declared.to_vec();
    let seen: BTreeSet<&String> = labels.iter().collect();
    for l in seen {
        if !levels.contains(l) {
            levels.push(l.clone());
        }
    }
    levels
}

/// Per level: `sum p_i w_i / sum w_i` over rows carrying that label.
pub fn aggregate(
    values: &[f64],
    weights: &[f64],
    labels: &[String],
    levels: &[String],
) -> Result<Vec<GroupEstimate>> {
    if values.len() != weights.len() || values.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: if values.len() != weights.len() { weights.len() } else { labels.len() },
        });
    }
    let index: BTreeMap<&str, usize> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut acc = vec![(0usize, 0.0f64, 0.0f64); levels.len()];
    for ((v, w), l) in values.iter().zip(weights).zip(labels) {
        let i = *index
            .get(l.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("group label `{l}` is not a declared level")))?;
        acc[i].0 += 1;
        acc[i].1 += v * w;
        acc[i].2 += w;
    }
    Ok(levels
        .iter()
        .zip(acc)
        .map(|(level, (n, pw, w))| {
            if n == 0 {
                log::warn!("group `{level}` is empty");
            }
            GroupEstimate {
                level: level.clone(),
                n,
                estimate: (n > 0).then(|| pw / w),
            }
        })
        .collect())
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and non-empty.
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = (n - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// One merge of an empty cell into a neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub table: usize,
    pub absorbed: String,
    pub into: String,
}

/// Index of the neighbor an empty cell is merged into: the first table
/// covariate is tried first, the neighbor across the lower boundary before
/// the one across the upper boundary, then later covariates; ties go to
/// the lowest cell index.
fn merge_target(table: &ContingencyTable, k: usize) -> Option<usize> {
    let cells = table.partition().cells();
    let mut best: Option<((usize, bool), usize)> = None;
    for (j, other) in cells.iter().enumerate() {
        if j == k {
            continue;
        }
        for a in &cells[k].boxes {
            for b in &other.boxes {
                if let Some((axis, above)) = a.adjacency(b) {
                    let key = ((axis, above), j);
                    if best.as_ref().is_none_or(|cur| key < *cur) {
                        best = Some(key);
                    }
                }
            }
        }
    }
    best.map(|(_, j)| j)
}

/// Merge every cell with zero dataset weight into an adjacent cell until
/// none is empty. Counts are summed, so label totals are unchanged.
pub fn merge_empty_cells(
    table: &ContingencyTable,
    dataset: &IndividualDataset,
    table_index: usize,
) -> Result<(ContingencyTable, Vec<MergeEvent>)> {
    let assignment = assign_cells(table.partition(), dataset)?;
    let mut weight = vec![0.0; table.len()];
    for (row, &k) in assignment.iter().enumerate() {
        weight[k] += dataset.weights()[row];
    }
    let mut table = table.clone();
    let mut events = Vec::new();
    while let Some(k) = weight.iter().position(|&w| w <= 0.0) {
        let j = merge_target(&table, k).ok_or_else(|| {
            Error::InvalidPartition(format!("empty cell {} has no adjacent cell", table.partition().cells()[k]))
        })?;
        let event = MergeEvent {
            table: table_index,
            absorbed: table.partition().cells()[k].to_string(),
            into: table.partition().cells()[j].to_string(),
        };
        log::debug!("table {table_index}: merged empty cell {} into {}", event.absorbed, event.into);
        events.push(event);
        table = table.merge_cells(j, k)?;
        weight[j] += weight[k];
        weight.remove(k);
    }
    Ok((table, events))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Resampling {
    /// Draw n dataset rows uniformly with replacement.
    pub rows: bool,
    /// Redraw each table from a multinomial at its observed proportions.
    pub tables: bool,
}

impl Default for Resampling {
    fn default() -> Self {
        Resampling {
            rows: true,
            tables: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapSettings {
    pub replicates: usize,
    pub seed: u64,
    pub resampling: Resampling,
    /// Abort when more than this share of replicates fails.
    pub max_failure_fraction: f64,
    pub level: f64,
    pub optimizer: OptimizerSettings,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        BootstrapSettings {
            replicates: 1000,
            seed: 0,
            resampling: Resampling::default(),
            max_failure_fraction: 0.1,
            level: 0.95,
            optimizer: OptimizerSettings {
                compute_covariance: false,
                ..OptimizerSettings::default()
            },
        }
    }
}

/// Everything a replicate refits.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapInput<'a> {
    pub dataset: &'a IndividualDataset,
    pub tables: &'a [ContingencyTable],
    pub covariates: &'a [String],
    pub target: MarginalTarget,
    /// Grouping schemes to aggregate over.
    pub schemes: &'a [String],
    /// Declared level order per scheme (may be empty).
    pub declared_levels: &'a BTreeMap<String, Vec<String>>,
    pub bct: Option<&'a BctRule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Classifier,
    Bct,
}

/// Per scheme and method, the group estimates of one fit.
pub type GroupTable = BTreeMap<String, BTreeMap<Method, Vec<GroupEstimate>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    /// Why the replicate was dropped.
    pub failure: Option<String>,
    /// Uncalibrated coefficients.
    pub beta: Vec<f64>,
    pub calibrated_intercept: f64,
    pub groups: GroupTable,
    pub merges: Vec<MergeEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateEstimate {
    pub scheme: String,
    pub method: Method,
    pub group: String,
    pub n_group: usize,
    pub point: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub replicates_used: usize,
    /// The full-data estimate lies outside its interval.
    pub point_outside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub fit: ModelFit,
    pub full_data_merges: Vec<MergeEvent>,
    pub estimates: Vec<AggregateEstimate>,
    pub replicates: Vec<ReplicateRecord>,
    pub replicates_used: usize,
    pub failed: usize,
}

impl BootstrapResult {
    /// Standard deviation of each coefficient over successful replicates.
    pub fn coefficient_sd(&self) -> Vec<f64> {
        let ok: Vec<&ReplicateRecord> = self.replicates.iter().filter(|r| r.failure.is_none()).collect();
        let p = self.fit.n_params();
        let n = ok.len() as f64;
        (0..p)
            .map(|i| {
                let mean = ok.iter().map(|r| r.beta[i]).sum::<f64>() / n;
                libm::sqrt(ok.iter().map(|r| (r.beta[i] - mean) * (r.beta[i] - mean)).sum::<f64>() / (n - 1.0))
            })
            .collect()
    }
}

struct FitOutcome {
    fit: ModelFit,
    groups: GroupTable,
    merges: Vec<MergeEvent>,
}

fn fit_and_aggregate(
    input: &BootstrapInput<'_>,
    dataset: &IndividualDataset,
    tables: &[ContingencyTable],
    levels: &BTreeMap<String, Vec<String>>,
    optimizer: &OptimizerSettings,
) -> Result<FitOutcome> {
    let mut merged = Vec::with_capacity(tables.len());
    let mut merges = Vec::new();
    for (t, table) in tables.iter().enumerate() {
        let (m, ev) = merge_empty_cells(table, dataset, t)?;
        merged.push(m);
        merges.extend(ev);
    }
    let ctx = LikelihoodContext::new(dataset, &merged, input.covariates)?;
    let mut f = fit(&ctx, optimizer)?;
    if !f.converged {
        return Err(Error::InvalidArgument("optimizer did not converge".into()));
    }
    f.calibrate(dataset, input.target)?;
    let probs = predict(dataset, &f)?;
    let bct: Option<Vec<f64>> = input
        .bct
        .map(|rule| {
            bct_classify(dataset, rule).map(|l| l.into_iter().map(|x| if x.is_recent() { 1.0 } else { 0.0 }).collect())
        })
        .transpose()?;
    let mut groups = GroupTable::new();
    for scheme in input.schemes {
        let labels = dataset
            .group_labels(scheme)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown grouping scheme `{scheme}`")))?;
        let lv = &levels[scheme];
        let mut per = BTreeMap::new();
        per.insert(Method::Classifier, aggregate(&probs, dataset.weights(), labels, lv)?);
        if let Some(b) = &bct {
            per.insert(Method::Bct, aggregate(b, dataset.weights(), labels, lv)?);
        }
        groups.insert(scheme.clone(), per);
    }
    Ok(FitOutcome { fit: f, groups, merges })
}

fn resample_table<R: Rng + ?Sized>(table: &ContingencyTable, rng: &mut R) -> Result<ContingencyTable> {
    let k = table.len();
    let total = table.total();
    let probs: Vec<f64> = table.counts1().iter().chain(table.counts0()).map(|c| c / total).collect();
    let draw = multinomial(rng, libm::round(total) as u64, &probs);
    let counts1 = draw[..k].iter().map(|&c| c as f64).collect();
    let counts0 = draw[k..].iter().map(|&c| c as f64).collect();
    table.with_counts(counts1, counts0)
}

/// Full-data fit plus `replicates` refits on resampled data, summarized by
/// per-group percentile intervals.
///
/// Replicate `r` draws from the stream `(seed, r)` only. Each replicate
/// merges empty cells, refits the fixed covariate set, calibrates, predicts
/// and aggregates. Replicates whose fit fails or does not converge are
/// dropped; more than `max_failure_fraction` of them aborts the run.
pub fn bootstrap_ci(input: &BootstrapInput<'_>, settings: &BootstrapSettings) -> Result<BootstrapResult> {
    if settings.replicates < 2 {
        return Err(Error::InvalidArgument("at least two bootstrap replicates are required".into()));
    }
    if !(settings.level > 0.0 && settings.level < 1.0) {
        return Err(Error::InvalidArgument("confidence level must lie in (0, 1)".into()));
    }
    let mut levels = BTreeMap::new();
    for scheme in input.schemes {
        let labels = input
            .dataset
            .group_labels(scheme)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown grouping scheme `{scheme}`")))?;
        let declared = input.declared_levels.get(scheme).map_or(&[][..], |v| v.as_slice());
        levels.insert(scheme.clone(), group_levels(labels, declared));
    }
    let full = fit_and_aggregate(input, input.dataset, input.tables, &levels, &settings.optimizer)?;

    let n = input.dataset.n_rows();
    let replicates = par::map_indexed(settings.replicates, |r| {
        let mut rng = rng::stream(settings.seed, rng::DOMAIN_BOOTSTRAP, r as u64);
        let outcome = (|| {
            let dataset = if settings.resampling.rows {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                input.dataset.select_rows(&rows)?
            } else {
                input.dataset.clone()
            };
            let tables = if settings.resampling.tables {
                input
                    .tables
                    .iter()
                    .map(|t| resample_table(t, &mut rng))
                    .collect::<Result<Vec<_>>>()?
            } else {
                input.tables.to_vec()
            };
            fit_and_aggregate(input, &dataset, &tables, &levels, &settings.optimizer)
        })();
        match outcome {
            Ok(o) => ReplicateRecord {
                index: r,
                failure: None,
                calibrated_intercept: o.fit.beta[0],
                beta: {
                    let mut b = o.fit.beta.clone();
                    b[0] = o.fit.beta0_raw;
                    b
                },
                groups: o.groups,
                merges: o.merges,
            },
            Err(e) => ReplicateRecord {
                index: r,
                failure: Some(e.to_string()),
                beta: Vec::new(),
                calibrated_intercept: f64::NAN,
                groups: GroupTable::new(),
                merges: Vec::new(),
            },
        }
    });

    let failed = replicates.iter().filter(|r| r.failure.is_some()).count();
    if failed as f64 > settings.max_failure_fraction * settings.replicates as f64 {
        if let Some(first) = replicates.iter().find_map(|r| r.failure.as_ref()) {
            log::error!("first replicate failure: {first}");
        }
        return Err(Error::TooManyFailedReplicates {
            failed,
            total: settings.replicates,
        });
    }
    if failed > 0 {
        log::warn!("{failed} of {} replicates dropped", settings.replicates);
    }

    let alpha = (1.0 - settings.level) / 2.0;
    let mut estimates = Vec::new();
    for (scheme, per) in &full.groups {
        for (method, rows) in per {
            for (g, row) in rows.iter().enumerate() {
                let mut draws: Vec<f64> = replicates
                    .iter()
                    .filter_map(|r| r.groups.get(scheme)?.get(method)?[g].estimate)
                    .collect();
                draws.sort_by(f64::total_cmp);
                let (lo, hi) = if draws.is_empty() {
                    (None, None)
                } else {
                    (Some(quantile_type7(&draws, alpha)), Some(quantile_type7(&draws, 1.0 - alpha)))
                };
                let point_outside = match (row.estimate, lo, hi) {
                    (Some(p), Some(l), Some(h)) => p < l || p > h,
                    _ => false,
                };
                estimates.push(AggregateEstimate {
                    scheme: scheme.clone(),
                    method: *method,
                    group: row.level.clone(),
                    n_group: row.n,
                    point: row.estimate,
                    ci_low: lo,
                    ci_high: hi,
                    replicates_used: draws.len(),
                    point_outside,
                });
            }
        }
    }
    Ok(BootstrapResult {
        fit: full.fit,
        full_data_merges: full.merges,
        estimates,
        replicates_used: settings.replicates - failed,
        failed,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cell, CellBox, CellPartition, Column, Interval};

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn bct_boundaries_are_inclusive() {
        let rule = BctRule::default();
        assert_eq!(rule.classify(1.5, 1000.0), BctLabel::Recent);
        assert_eq!(rule.classify(1.6, 1e6), BctLabel::LongTerm);
        assert_eq!(rule.classify(0.3, 500.0), BctLabel::LongTerm);
        let log_rule = BctRule {
            vl_scale: Scale::Log,
            ..BctRule::default()
        };
        assert_eq!(log_rule.classify(1.5, libm::log(1000.0)), BctLabel::Recent);
        assert_eq!(log_rule.classify(1.5, libm::log(999.0)), BctLabel::LongTerm);
        let log10_rule = BctRule {
            vl_scale: Scale::Log10,
            ..BctRule::default()
        };
        assert_eq!(log10_rule.classify(1.0, 3.0), BctLabel::Recent);
    }

    #[test]
    fn bins() {
        assert_eq!(probability_bin(0.0), ProbabilityBin::Low);
        assert_eq!(probability_bin(0.33), ProbabilityBin::Low);
        assert_eq!(probability_bin(1.0 / 3.0), ProbabilityBin::Mid);
        assert_eq!(probability_bin(2.0 / 3.0), ProbabilityBin::High);
    }

    #[test]
    fn aggregation_examples() {
        let labels = s(&["a", "a"]);
        let g = aggregate(&[0.3, 0.6], &[1.0 / 3.0, 2.0 / 3.0], &labels, &s(&["a"])).unwrap();
        assert!((g[0].estimate.unwrap() - 0.5).abs() < 1e-15);
        let g2 = aggregate(&[0.3, 0.6], &[10.0, 20.0], &labels, &s(&["a", "b"])).unwrap();
        assert!((g2[0].estimate.unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(g2[1].n, 0);
        assert_eq!(g2[1].estimate, None);
        assert!(aggregate(&[0.1], &[1.0], &s(&["z"]), &s(&["a"])).is_err());
        assert_eq!(group_levels(&s(&["c", "a", "c"]), &s(&["b"])), s(&["b", "a", "c"]));
    }

    #[test]
    fn type7_quantiles() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
        assert!((quantile_type7(&v, 0.025) - 0.025975).abs() < 1e-12);
        assert!((quantile_type7(&v, 0.975) - 0.975025).abs() < 1e-12);
        assert_eq!(quantile_type7(&[3.0], 0.5), 3.0);
        assert_eq!(quantile_type7(&[1.0, 2.0], 0.5), 1.5);
    }

    fn univariate_table() -> ContingencyTable {
        let inf = f64::INFINITY;
        let p = CellPartition::univariate(
            "x",
            vec![
                Interval::open_closed(-inf, 1.0).unwrap(),
                Interval::open_closed(1.0, 2.0).unwrap(),
                Interval::open_closed(2.0, 3.0).unwrap(),
                Interval::new(3.0, inf, true, false).unwrap(),
            ],
        )
        .unwrap();
        ContingencyTable::new(p, vec![5.0, 4.0, 3.0, 2.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    fn ds(x: &[f64]) -> IndividualDataset {
        IndividualDataset::new(vec![Column::observed("x", x.to_vec())], vec![1.0; x.len()], BTreeMap::new()).unwrap()
    }

    #[test]
    fn empty_cells_merge_downward_first() {
        let t = univariate_table();
        let (m, ev) = merge_empty_cells(&t, &ds(&[0.5, 2.5, 3.5]), 0).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].absorbed, "(1,2]");
        assert_eq!(ev[0].into, "(-inf,1]");
        assert_eq!(m.counts1(), &[9.0, 3.0, 2.0]);
        assert_eq!(m.total1(), t.total1());
        assert_eq!(m.total0(), t.total0());

        // The lowest cell has no lower neighbor and merges upward.
        let (m, ev) = merge_empty_cells(&t, &ds(&[1.5, 2.5, 3.5]), 0).unwrap();
        assert_eq!(ev[0].into, "(1,2]");
        assert_eq!(m.counts0(), &[3.0, 3.0, 4.0]);

        // Repeated merges until every cell is occupied.
        let (m, ev) = merge_empty_cells(&t, &ds(&[5.0]), 0).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(ev.len(), 3);
        assert_eq!(m.total(), t.total());
    }

    #[test]
    fn bivariate_full_range_cell_merges_into_lowest_index_neighbor() {
        let inf = f64::INFINITY;
        let mut cells = Vec::new();
        for vl in [(0.0, 1000.0), (1000.0, inf)] {
            cells.push(Cell::from_box(CellBox::new(vec![
                Interval::open_closed(0.0, 4.5).unwrap(),
                Interval::closed_open(vl.0, vl.1).unwrap(),
            ])));
        }
        cells.push(Cell::from_box(CellBox::new(vec![
            Interval::new(4.5, inf, true, false).unwrap(),
            Interval::closed_open(0.0, inf).unwrap(),
        ])));
        let p = CellPartition::new(s(&["a", "b"]), cells).unwrap();
        let t = ContingencyTable::new(p, vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]).unwrap();
        let d = IndividualDataset::new(
            vec![Column::observed("a", vec![1.0, 2.0]), Column::observed("b", vec![10.0, 5000.0])],
            vec![1.0, 1.0],
            BTreeMap::new(),
        )
        .unwrap();
        let (m, ev) = merge_empty_cells(&t, &d, 0).unwrap();
        assert_eq!(ev[0].into, "(0,4.5] x [0,1000)");
        assert_eq!(m.counts1(), &[4.0, 2.0]);
        // The merged cell is a union of boxes and still locates its points.
        assert_eq!(m.partition().locate(&[9.0, 50.0]), Some(0));
        assert_eq!(m.partition().locate(&[9.0, 5e4]), Some(0));
    }

    #[test]
    fn predict_requires_calibration() {
        let d = ds(&[0.5, 1.5]);
        let mut f = ModelFit {
            covariates: Vec::new(),
            beta: vec![0.0],
            beta0_raw: 0.0,
            calibrated: false,
            covariance: None,
            covariance_issue: None,
            log_likelihood: 0.0,
            converged: true,
            optimizer_iterations: 0,
            evaluations: 0,
            clamped_evaluations: 0,
        };
        assert_eq!(predict(&d, &f), Err(Error::Uncalibrated));
        f.calibrate(&d, MarginalTarget::new(0.126).unwrap()).unwrap();
        for p in predict(&d, &f).unwrap() {
            assert!((p - 0.126).abs() < 1e-10);
        }
        let pooled = predict_pooled(&[d.clone(), d.clone()], &[f.clone(), f.clone()]).unwrap();
        assert!((pooled[0] - 0.126).abs() < 1e-10);
    }

    #[test]
    fn single_row_bootstrap_has_zero_width() {
        let mut groups = BTreeMap::new();
        groups.insert("g".to_string(), s(&["only"]));
        let d = IndividualDataset::new(vec![Column::observed("x", vec![1.5])], vec![2.0], groups).unwrap();
        let t = univariate_table();
        let schemes = s(&["g"]);
        let declared = BTreeMap::new();
        let input = BootstrapInput {
            dataset: &d,
            tables: core::slice::from_ref(&t),
            covariates: &[],
            target: MarginalTarget::new(0.2).unwrap(),
            schemes: &schemes,
            declared_levels: &declared,
            bct: None,
        };
        let settings = BootstrapSettings {
            replicates: 20,
            ..BootstrapSettings::default()
        };
        let r = bootstrap_ci(&input, &settings).unwrap();
        assert_eq!(r.failed, 0);
        let e = &r.estimates[0];
        assert_eq!(e.ci_low, e.ci_high);
        assert!((e.point.unwrap() - 0.2).abs() < 1e-10);
        assert_eq!(r.full_data_merges.len(), 3);
        assert_eq!(bootstrap_ci(&input, &settings).unwrap(), r);
    }
}
