//! The pipeline commands. Each returns the artifacts it wants written; the
//! caller writes them only when the command completes.

use std::collections::BTreeMap;

use serde::Serialize;
use tablelogit_core::inference::{
    aggregate, bct_classify, bootstrap_ci, group_levels, merge_empty_cells, predict_pooled, probability_bin,
    AggregateEstimate, BctRule, BootstrapInput, BootstrapResult, BootstrapSettings, GroupEstimate, MergeEvent, Method,
    ProbabilityBin,
};
use tablelogit_core::linalg::Matrix;
use tablelogit_core::model::{check_identifiability, validate_partition};
use tablelogit_core::selection::{impute, pool, select_and_pool, ImputationSet, PooledEstimate};
use tablelogit_core::simulation::{run_study, synthetic_dataset, TruthSpec};
use tablelogit_core::{ContingencyTable, IndividualDataset, LikelihoodContext, MarginalTarget, ModelFit, Scale};

use crate::config::{RunConfig, DEFAULT_BOOTSTRAP};
use crate::dataset::{load_dataset, LoadedDataset};
use crate::error::{CliError, Result};
use crate::output::{num, opt, Artifacts, Provenance};
use crate::table::{bind_table, load_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Fit,
    Select,
    Predict,
    Aggregate,
    Bootstrap,
    Simulate,
    PlotData,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Fit => "fit",
            Command::Select => "select",
            Command::Predict => "predict",
            Command::Aggregate => "aggregate",
            Command::Bootstrap => "bootstrap",
            Command::Simulate => "simulate",
            Command::PlotData => "plot-data",
        }
    }
}

/// Artifacts to write, plus a failure to report after writing them (only
/// `validate` produces both).
#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub failure: Option<CliError>,
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let prov = Provenance {
        config_hash: cfg.hash(command.name())?,
        seed: cfg.seed,
    };
    let mut artifacts = Artifacts::default();
    let failure = match command {
        Command::Validate => validate(cfg, &prov, &mut artifacts)?,
        Command::Fit => fit_cmd(cfg, &prov, &mut artifacts).map(|_| None)?,
        Command::Select => select(cfg, &prov, &mut artifacts).map(|_| None)?,
        Command::Predict => predict_cmd(cfg, &prov, &mut artifacts).map(|_| None)?,
        Command::Aggregate => aggregate_cmd(cfg, &prov, &mut artifacts).map(|_| None)?,
        Command::Bootstrap => bootstrap_cmd(cfg, &prov, &mut artifacts).map(|_| None)?,
        Command::Simulate => simulate(cfg, &prov, &mut artifacts).map(|_| None)?,
        Command::PlotData => plot_data(cfg, &prov, &mut artifacts).map(|_| None)?,
    };
    Ok(Outcome { artifacts, failure })
}

struct Inputs {
    data: LoadedDataset,
    /// Tables on the dataset's scales with empty cells merged away.
    bound: Vec<ContingencyTable>,
    merges: Vec<MergeEvent>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let (d, m) = cfg.require_data()?;
    let data = load_dataset(d, m)?;
    let tables = cfg
        .require_tables()?
        .iter()
        .map(|p| load_table(p))
        .collect::<Result<Vec<_>>>()?;
    let mut bound = Vec::with_capacity(tables.len());
    let mut merges = Vec::new();
    for (i, t) in tables.iter().enumerate() {
        let b = bind_table(t, &data.manifest)?;
        let covered = b
            .partition()
            .covariates()
            .iter()
            .all(|c| data.dataset.column(c).is_ok_and(|col| col.missing_count() == 0));
        if covered {
            let (merged, events) = merge_empty_cells(&b, &data.dataset, i)?;
            for e in &events {
                log::warn!("{}: empty cell {} merged into {}", t.path.display(), e.absorbed, e.into);
            }
            merges.extend(events);
            bound.push(merged);
        } else {
            bound.push(b);
        }
    }
    Ok(Inputs { data, bound, merges })
}

fn require_covariates(cfg: &RunConfig) -> Result<&[String]> {
    if cfg.covariates.is_empty() {
        Err(CliError::Config("--covariates is required".into()))
    } else {
        Ok(&cfg.covariates)
    }
}

/// Completed datasets: the dataset itself when none of `needed` has
/// missing values, otherwise `cfg.imputations` imputations of every
/// imputable column with gaps.
fn completed(cfg: &RunConfig, ds: &IndividualDataset, needed: &[String]) -> Result<ImputationSet> {
    let mut any = false;
    for name in needed {
        any |= ds.column(name)?.missing_count() > 0;
    }
    if !any {
        return Ok(ImputationSet::complete(ds.clone()));
    }
    let targets: Vec<&str> = ds
        .columns()
        .iter()
        .filter(|c| c.missing_count() > 0)
        .map(|c| c.name.as_str())
        .collect();
    log::info!("imputing {} ({} imputations)", targets.join(", "), cfg.imputations);
    Ok(impute(ds, &targets, cfg.imputations, cfg.seed)?)
}

fn fit_each(
    cfg: &RunConfig,
    sets: &ImputationSet,
    tables: &[ContingencyTable],
    covariates: &[String],
    target: Option<MarginalTarget>,
) -> Result<Vec<ModelFit>> {
    sets.datasets
        .iter()
        .map(|ds| {
            let ctx = LikelihoodContext::new(ds, tables, covariates)?;
            let mut f = tablelogit_core::fit(&ctx, &cfg.optimizer)?;
            if !f.converged {
                log::warn!("optimizer stopped after {} iterations without converging", f.optimizer_iterations);
            }
            if let Some(t) = target {
                f.calibrate(ds, t)?;
            }
            Ok(f)
        })
        .collect()
}

fn terms(covariates: &[String]) -> Vec<String> {
    std::iter::once("(Intercept)".to_string()).chain(covariates.iter().cloned()).collect()
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.n_rows()).map(|i| m.row(i).to_vec()).collect()
}

// ---------------------------------------------------------------- validate

#[derive(Serialize)]
struct TableDiagnostics {
    path: String,
    name: String,
    cells: usize,
    label_totals: (f64, f64),
    error: Option<String>,
    probes_checked: usize,
    occupancy: Vec<usize>,
    empty_cells: Vec<String>,
    identifiable: Option<bool>,
}

#[derive(Serialize)]
struct ColumnSummary {
    name: String,
    scale: Scale,
    missing: usize,
    imputable: bool,
}

#[derive(Serialize)]
struct ValidateReport {
    ok: bool,
    rows: usize,
    columns: Vec<ColumnSummary>,
    groups: BTreeMap<String, Vec<String>>,
    tables: Vec<TableDiagnostics>,
}

fn validate(cfg: &RunConfig, prov: &Provenance, out: &mut Artifacts) -> Result<Option<CliError>> {
    let (d, m) = cfg.require_data()?;
    let data = load_dataset(d, m)?;
    let ds = &data.dataset;
    let mut problems = Vec::new();
    let mut tables = Vec::new();
    for path in cfg.require_tables()? {
        let loaded = load_table(path)?;
        let t = &loaded.table;
        let mut diag = TableDiagnostics {
            path: path.display().to_string(),
            name: loaded.file.name.clone(),
            cells: t.len(),
            label_totals: (t.total1(), t.total0()),
            error: None,
            probes_checked: 0,
            occupancy: Vec::new(),
            empty_cells: Vec::new(),
            identifiable: None,
        };
        let checked = bind_table(&loaded, &data.manifest).and_then(|b| {
            let report = validate_partition(b.partition(), ds)?;
            Ok((b, report))
        });
        match checked {
            Ok((bound, report)) => {
                diag.probes_checked = report.probes_checked;
                diag.empty_cells = report
                    .empty_cells
                    .iter()
                    .map(|&k| t.partition().cells()[k].to_string())
                    .collect();
                diag.occupancy = report.occupancy;
                if !cfg.covariates.is_empty() {
                    let ok = check_identifiability(bound.partition(), cfg.covariates.len() + 1);
                    if !ok {
                        problems.push(format!("{}: too few cells for {} coefficients", diag.path, cfg.covariates.len() + 1));
                    }
                    diag.identifiable = Some(ok);
                }
            }
            Err(e) => {
                problems.push(format!("{}: {e}", diag.path));
                diag.error = Some(e.to_string());
            }
        }
        tables.push(diag);
    }
    for name in &cfg.covariates {
        if let Err(e) = ds.column(name) {
            problems.push(e.to_string());
        }
    }
    let report = ValidateReport {
        ok: problems.is_empty(),
        rows: ds.n_rows(),
        columns: data
            .manifest
            .covariates
            .iter()
            .map(|c| ColumnSummary {
                name: c.name.clone(),
                scale: c.scale,
                missing: ds.column(&c.name).map_or(0, |col| col.missing_count()),
                imputable: c.imputable,
            })
            .collect(),
        groups: ds
            .groups()
            .iter()
            .map(|(scheme, labels)| {
                let declared = data.manifest.declared_levels().remove(scheme).unwrap_or_default();
                (scheme.clone(), group_levels(labels, &declared))
            })
            .collect(),
        tables,
    };
    out.json("validate.json", prov, &report);
    Ok((!problems.is_empty()).then(|| CliError::Validation(problems.join("; "))))
}

// --------------------------------------------------------------------- fit

#[derive(Serialize)]
struct Coefficient {
    term: String,
    estimate: f64,
    std_error: Option<f64>,
}

#[derive(Serialize)]
struct FitReport {
    covariates: Vec<String>,
    imputations: usize,
    /// Calibrated intercept when `p1` was given, raw otherwise.
    coefficients: Vec<Coefficient>,
    intercept_raw: f64,
    intercept_calibrated: Option<f64>,
    log_likelihood: f64,
    converged: bool,
    optimizer_iterations: usize,
    covariance_issue: Option<String>,
    correlation: Option<Vec<Vec<f64>>>,
    identifiable: bool,
    merged_cells: Vec<MergeEvent>,
    pooled: Option<PooledEstimate>,
    per_imputation: Vec<ModelFit>,
}

struct Fitted {
    sets: ImputationSet,
    fits: Vec<ModelFit>,
}

fn fit_models(cfg: &RunConfig, inputs: &Inputs, target: Option<MarginalTarget>) -> Result<Fitted> {
    let covariates = require_covariates(cfg)?;
    let mut needed = covariates.to_vec();
    for t in &inputs.bound {
        needed.extend(t.partition().covariates().iter().cloned());
    }
    let sets = completed(cfg, &inputs.data.dataset, &needed)?;
    let fits = fit_each(cfg, &sets, &inputs.bound, covariates, target)?;
    Ok(Fitted { sets, fits })
}

fn fit_cmd(cfg: &RunConfig, prov: &Provenance, out: &mut Artifacts) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let target = cfg.p1.map(MarginalTarget::new).transpose()?;
    let Fitted { fits, .. } = fit_models(cfg, &inputs, target)?;
    let covariates = cfg.covariates.clone();
    let identifiable = inputs
        .bound
        .iter()
        .all(|t| check_identifiability(t.partition(), covariates.len() + 1));
    let j = fits.len() as f64;
    let report = if fits.len() == 1 {
        let f = &fits[0];
        let se = f.standard_errors();
        FitReport {
            covariates: covariates.clone(),
            imputations: 1,
            coefficients: terms(&covariates)
                .into_iter()
                .enumerate()
                .map(|(i, term)| Coefficient {
                    term,
                    estimate: f.beta[i],
                    std_error: se.as_ref().map(|s| s[i]),
                })
                .collect(),
            intercept_raw: f.beta0_raw,
            intercept_calibrated: f.calibrated.then_some(f.beta[0]),
            log_likelihood: f.log_likelihood,
            converged: f.converged,
            optimizer_iterations: f.optimizer_iterations,
            covariance_issue: f.covariance_issue.clone(),
            correlation: f.correlation().as_ref().map(matrix_rows),
            identifiable,
            merged_cells: inputs.merges.clone(),
            pooled: None,
            per_imputation: Vec::new(),
        }
    } else {
        let pooled = pool(&fits)?;
        let se = pooled
            .total_variance
            .as_ref()
            .map(|v| v.iter().map(|x| x.sqrt()).collect::<Vec<_>>());
        let calibrated = fits.iter().all(|f| f.calibrated);
        FitReport {
            covariates: covariates.clone(),
            imputations: fits.len(),
            coefficients: terms(&covariates)
                .into_iter()
                .enumerate()
                .map(|(i, term)| Coefficient {
                    term,
                    estimate: pooled.beta[i],
                    std_error: se.as_ref().map(|s| s[i]),
                })
                .collect(),
            intercept_raw: fits.iter().map(|f| f.beta0_raw).sum::<f64>() / j,
            intercept_calibrated: calibrated.then_some(pooled.beta[0]),
            log_likelihood: fits.iter().map(|f| f.log_likelihood).sum::<f64>() / j,
            converged: fits.iter().all(|f| f.converged),
            optimizer_iterations: fits.iter().map(|f| f.optimizer_iterations).max().unwrap_or(0),
            covariance_issue: fits.iter().find_map(|f| f.covariance_issue.clone()),
            correlation: None,
            identifiable,
            merged_cells: inputs.merges.clone(),
            pooled: Some(pooled),
            per_imputation: fits.clone(),
        }
    };
    let rows: Vec<Vec<String>> = report
        .coefficients
        .iter()
        .map(|c| vec![c.term.clone(), num(c.estimate), opt(c.std_error)])
        .collect();
    out.csv(
        "coefficients.csv",
        prov,
        &["term".into(), "estimate".into(), "std_error".into()],
        &rows,
    );
    out.json("fit.json", prov, &report);
    Ok(())
}

// ------------------------------------------------------------------ select

fn select(cfg: &RunConfig, prov: &Provenance, out: &mut Artifacts) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let candidates = require_covariates(cfg)?;
    let mut needed = candidates.to_vec();
    for t in &inputs.bound {
        needed.extend(t.partition().covariates().iter().cloned());
    }
    let sets = completed(cfg, &inputs.data.dataset, &needed)?;
    let target = cfg.p1.map(MarginalTarget::new).transpose()?;
    let result = select_and_pool(&sets, &inputs.bound, candidates, cfg.criterion, &cfg.optimizer, target)?;

    let j = sets.len();
    let votes: Vec<Vec<String>> = result
        .votes
        .iter()
        .map(|(c, v)| {
            vec![
                c.clone(),
                v.to_string(),
                j.to_string(),
                result.consensus_set.contains(c).to_string(),
            ]
        })
        .collect();
    out.csv(
        "votes.csv",
        prov,
        &["covariate".into(), "votes".into(), "imputations".into(), "selected".into()],
        &votes,
    );
    let mut trace = Vec::new();
    for (i, steps) in result.criterion_traces.iter().enumerate() {
        for s in steps {
            trace.push(vec![
                i.to_string(),
                s.step.to_string(),
                s.added.clone().unwrap_or_else(|| "(none)".into()),
                num(s.criterion),
            ]);
        }
    }
    out.csv(
        "trace.csv",
        prov,
        &["imputation".into(), "step".into(), "added".into(), "criterion".into()],
        &trace,
    );
    out.json("selection.json", prov, &result);
    Ok(())
}

// ----------------------------------------------------------------- predict

fn bin_name(b: ProbabilityBin) -> &'static str {
    match b {
        ProbabilityBin::Low => "low",
        ProbabilityBin::Mid => "mid",
        ProbabilityBin::High => "high",
    }
}

fn predictions(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<f64>> {
    let target = cfg.target()?;
    let fitted = fit_models(cfg, inputs, Some(target))?;
    Ok(predict_pooled(&fitted.sets.datasets, &fitted.fits)?)
}

fn predict_cmd(cfg: &RunConfig, prov: &Provenance, out: &mut Artifacts) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let probs = predictions(cfg, &inputs)?;
    let rule = inputs.data.manifest.bct_rule();
    let labels = rule
        .as_ref()
        .map(|r| bct_classify(&inputs.data.dataset, r))
        .transpose()?;
    let mut header = inputs.data.headers.clone();
    header.extend(["probability".to_string(), "probability_bin".to_string()]);
    if labels.is_some() {
        header.push("bct".into());
    }
    let rows: Vec<Vec<String>> = inputs
        .data
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let mut r = rec.clone();
            r.push(num(probs[i]));
            r.push(bin_name(probability_bin(probs[i])).into());
            if let Some(l) = &labels {
                r.push(if l[i].is_recent() { "recent" } else { "long_term" }.into());
            }
            r
        })
        .collect();
    out.csv("predictions.csv", prov, &header, &rows);
    Ok(())
}

// ------------------------------------------------------ aggregate/bootstrap

fn schemes(cfg: &RunConfig, data: &LoadedDataset) -> Result<Vec<String>> {
    let schemes = if cfg.groups.is_empty() {
        data.manifest.groups.iter().map(|g| g.name.clone()).collect()
    } else {
        cfg.groups.clone()
    };
    for s in &schemes {
        if data.dataset.group_labels(s).is_none() {
            return Err(CliError::Config(format!("unknown grouping scheme `{s}`")));
        }
    }
    Ok(schemes)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Classifier => "classifier",
        Method::Bct => "bct",
    }
}

fn aggregate_rows(estimates: &[AggregateEstimate]) -> Vec<Vec<String>> {
    estimates
        .iter()
        .map(|e| {
            vec![
                e.scheme.clone(),
                e.group.clone(),
                method_name(e.method).into(),
                e.n_group.to_string(),
                opt(e.point),
                opt(e.ci_low),
                opt(e.ci_high),
            ]
        })
        .collect()
}

fn aggregate_header() -> Vec<String> {
    ["scheme", "level", "method", "n", "estimate", "ci_low", "ci_high"]
        .map(String::from)
        .to_vec()
}

fn run_bootstrap(cfg: &RunConfig, inputs: &Inputs, replicates: usize) -> Result<BootstrapResult> {
    let covariates = require_covariates(cfg)?;
    let target = cfg.target()?;
    let mut needed = covariates.to_vec();
    for t in &inputs.bound {
        needed.extend(t.partition().covariates().iter().cloned());
    }
    let sets = completed(cfg, &inputs.data.dataset, &needed)?;
    if sets.len() > 1 {
        log::warn!("bootstrapping the first of {} imputations", sets.len());
    }
    let schemes = schemes(cfg, &inputs.data)?;
    let levels = inputs.data.manifest.declared_levels();
    let rule = inputs.data.manifest.bct_rule();
    let input = BootstrapInput {
        dataset: &sets.datasets[0],
        tables: &inputs.bound,
        covariates,
        target,
        schemes: &schemes,
        declared_levels: &levels,
        bct: rule.as_ref(),
    };
    let settings = BootstrapSettings {
        replicates,
        seed: cfg.seed,
        resampling: cfg.resampling,
        level: cfg.level,
        optimizer: tablelogit_core::OptimizerSettings {
            compute_covariance: false,
            ..cfg.optimizer
        },
        ..BootstrapSettings::default()
    };
    Ok(bootstrap_ci(&input, &settings)?)
}

fn aggregate_cmd(cfg: &RunConfig, prov: &Provenance, out: &mut Artifacts) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let b = cfg.bootstrap.unwrap_or(0);
    let estimates = if b > 0 {
        run_bootstrap(cfg, &inputs, b)?.estimates
    } else {
        point_estimates(cfg, &inputs)?
    };
    out.csv("aggregate.csv", prov, &aggregate_header(), &aggregate_rows(&estimates));
    Ok(())
}

/// Group estimates without intervals.
fn point_estimates(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<AggregateEstimate>> {
    let probs = predictions(cfg, inputs)?;
    let ds = &inputs.data.dataset;
    let bct: Option<Vec<f64>> = inputs
        .data
        .manifest
        .bct_rule()
        .map(|r: BctRule| -> Result<Vec<f64>> {
            Ok(bct_classify(ds, &r)?
                .into_iter()
                .map(|l| if l.is_recent() { 1.0 } else { 0.0 })
                .collect())
        })
        .transpose()?;
    let declared = inputs.data.manifest.declared_levels();
    let mut out = Vec::new();
    for scheme in schemes(cfg, &inputs.data)? {
        let labels = ds.group_labels(&scheme).expect("scheme checked");
        let levels = group_levels(labels, declared.get(&scheme).map_or(&[][..], |v| v.as_slice()));
        let mut per: Vec<(Method, Vec<GroupEstimate>)> =
            vec![(Method::Classifier, aggregate(&probs, ds.weights(), labels, &levels)?)];
        if let Some(b) = &bct {
            per.push((Method::Bct, aggregate(b, ds.weights(), labels, &levels)?));
        }
        for (method, rows) in per {
            for g in rows {
                out.push(AggregateEstimate {
                    scheme: scheme.clone(),
                    method,
                    group: g.level,
                    n_group: g.n,
                    point: g.estimate,
                    ci_low: None,
                    ci_high: None,
                    replicates_used: 0,
                    point_outside: false,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct BootstrapSummary<'a> {
    replicates: usize,
    replicates_used: usize,
    failed: usize,
    coefficient_sd: Vec<f64>,
    fit: &'a ModelFit,
    failures: Vec<(usize, &'a str)>,
}

fn bootstrap_cmd(cfg: &RunConfig, prov: &Provenance, out: &mut Artifacts) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let b = cfg.bootstrap.unwrap_or(DEFAULT_BOOTSTRAP);
    let res = run_bootstrap(cfg, &inputs, b)?;

    let mut header = aggregate_header();
    header.extend(["replicates_used".to_string(), "point_outside".to_string()]);
    let rows: Vec<Vec<String>> = aggregate_rows(&res.estimates)
        .into_iter()
        .zip(&res.estimates)
        .map(|(mut r, e)| {
            r.push(e.replicates_used.to_string());
            r.push(e.point_outside.to_string());
            r
        })
        .collect();
    out.csv("bootstrap_ci.csv", prov, &header, &rows);

    // Per-replicate file: coefficients then one column per group estimate.
    let terms = terms(&res.fit.covariates);
    let mut header: Vec<String> = vec!["replicate".into(), "status".into()];
    header.extend(terms.iter().map(|t| format!("beta:{t}")));
    header.push("calibrated_intercept".into());
    let group_cols: Vec<(String, Method, usize)> = res
        .estimates
        .iter()
        .scan(BTreeMap::<(String, Method), usize>::new(), |seen, e| {
            let i = seen.entry((e.scheme.clone(), e.method)).or_insert(0);
            *i += 1;
            Some((e.scheme.clone(), e.method, *i - 1))
        })
        .collect();
    header.extend(
        res.estimates
            .iter()
            .map(|e| format!("{}:{}:{}", e.scheme, method_name(e.method), e.group)),
    );
    let rows: Vec<Vec<String>> = res
        .replicates
        .iter()
        .map(|r| {
            let mut row = vec![r.index.to_string()];
            match &r.failure {
                None => {
                    row.push("ok".into());
                    row.extend(r.beta.iter().map(|&b| num(b)));
                    row.push(num(r.calibrated_intercept));
                    for (scheme, method, g) in &group_cols {
                        row.push(opt(r.groups.get(scheme).and_then(|m| m.get(method)).and_then(|v| v[*g].estimate)));
                    }
                }
                Some(_) => {
                    row.push("failed".into());
                    row.extend(std::iter::repeat_n("NA".to_string(), terms.len() + 1 + group_cols.len()));
                }
            }
            row
        })
        .collect();
    out.csv("bootstrap_replicates.csv", prov, &header, &rows);

    let mut merges: Vec<Vec<String>> = res
        .full_data_merges
        .iter()
        .map(|m| vec!["full".into(), m.table.to_string(), m.absorbed.clone(), m.into.clone()])
        .collect();
    for r in &res.replicates {
        merges.extend(
            r.merges
                .iter()
                .map(|m| vec![r.index.to_string(), m.table.to_string(), m.absorbed.clone(), m.into.clone()]),
        );
    }
    out.csv(
        "merges.csv",
        prov,
        &["replicate".into(), "table".into(), "absorbed".into(), "into".into()],
        &merges,
    );
    out.json(
        "bootstrap_summary.json",
        prov,
        &BootstrapSummary {
            replicates: b,
            replicates_used: res.replicates_used,
            failed: res.failed,
            coefficient_sd: res.coefficient_sd(),
            fit: &res.fit,
            failures: res
                .replicates
                .iter()
                .filter_map(|r| r.failure.as_deref().map(|f| (r.index, f)))
                .collect(),
        },
    );
    Ok(())
}

// ---------------------------------------------------------------- simulate

fn simulate(cfg: &RunConfig, prov: &Provenance, out: &mut Artifacts) -> Result<()> {
    let sim = &cfg.simulate;
    let target = cfg.target()?;
    let table_path = cfg
        .require_tables()?
        .first()
        .expect("at least one table");
    let table = load_table(table_path)?;
    let (dataset, partition) = match (&cfg.data, &cfg.manifest) {
        (Some(d), Some(m)) => {
            let data = load_dataset(d, m)?;
            let bound = bind_table(&table, &data.manifest)?;
            (data.dataset, bound.partition().clone())
        }
        _ => {
            // The synthetic population stores VL as a natural log.
            let scales: crate::dataset::Manifest = crate::synth::manifest(&sim.synthetic);
            let bound = bind_table(&table, &scales)?;
            (synthetic_dataset(&sim.synthetic)?, bound.partition().clone())
        }
    };
    let truth = TruthSpec {
        covariates: sim.truth_covariates.clone(),
        beta: sim.truth_slopes.clone(),
        marginal: target,
        label_totals: sim.label_totals,
        partition,
    };
    let result = run_study(&dataset, &truth, &sim.methods, sim.replicates, cfg.seed, &cfg.optimizer)?;

    let mut header = vec!["replicate".to_string(), "status".to_string()];
    header.extend(result.methods.iter().map(|m| format!("mae:{m}")));
    let rows: Vec<Vec<String>> = result
        .replicates
        .iter()
        .map(|r| {
            let mut row = vec![r.index.to_string()];
            if r.failure.is_none() {
                row.push("ok".into());
                row.extend(r.mae.iter().map(|&x| num(x)));
            } else {
                row.push("failed".into());
                row.extend(std::iter::repeat_n("NA".to_string(), result.methods.len()));
            }
            row
        })
        .collect();
    out.csv("simulate_replicates.csv", prov, &header, &rows);
    let summary: Vec<Vec<String>> = result
        .summary
        .iter()
        .map(|s| vec![s.method.clone(), num(s.mean_mae), num(s.sd_mae), s.replicates.to_string()])
        .collect();
    out.csv(
        "simulate_summary.csv",
        prov,
        &["method".into(), "mean_mae".into(), "sd_mae".into(), "replicates".into()],
        &summary,
    );
    out.json("simulate.json", prov, &result);
    Ok(())
}

// --------------------------------------------------------------- plot-data

fn plot_data(cfg: &RunConfig, prov: &Provenance, out: &mut Artifacts) -> Result<()> {
    let inputs = load_inputs(cfg)?;
    let rule = inputs
        .data
        .manifest
        .bct_rule()
        .ok_or_else(|| CliError::Config("plot-data needs a [bct] section in the manifest".into()))?;
    let probs = predictions(cfg, &inputs)?;
    let ds = &inputs.data.dataset;
    let odn = ds.observed_column(&rule.odn)?;
    let vl = ds.observed_column(&rule.vl)?;
    let labels = bct_classify(ds, &rule)?;
    let rows: Vec<Vec<String>> = (0..ds.n_rows())
        .map(|i| {
            let low_odn = odn[i] <= rule.odn_max;
            // A row is high-VL exactly when the rule would call it recent
            // at the lowest possible ODn.
            let high_vl = rule.classify(f64::NEG_INFINITY, vl[i]).is_recent();
            let quadrant = match (low_odn, high_vl) {
                (true, true) => "low_odn_high_vl",
                (true, false) => "low_odn_low_vl",
                (false, true) => "high_odn_high_vl",
                (false, false) => "high_odn_low_vl",
            };
            vec![
                i.to_string(),
                num(odn[i]),
                num(rule.vl_scale.to_raw(vl[i])),
                num(probs[i]),
                bin_name(probability_bin(probs[i])).into(),
                if labels[i].is_recent() { "recent" } else { "long_term" }.into(),
                quadrant.into(),
            ]
        })
        .collect();
    let header = ["row", "odn", "vl", "probability", "probability_bin", "bct", "quadrant"].map(String::from);
    out.csv("plot_data.csv", prov, &header, &rows);
    Ok(())
}
