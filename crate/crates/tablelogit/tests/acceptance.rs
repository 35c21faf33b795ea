//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line per
//! criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use tablelogit::table::{bind_table, load_table};
use tablelogit_core::estimation::calibrate_intercept;
use tablelogit_core::inference::{bootstrap_ci, BootstrapInput, BootstrapSettings, Resampling};
use tablelogit_core::rng::{stream, DOMAIN_SIMULATE};
use tablelogit_core::selection::{forward_stepwise, Criterion};
use tablelogit_core::simulation::{
    draw_table, expected_table, run_study, synthetic_dataset, table_multinomial_proportions, true_probabilities,
    StudyMethod, SyntheticSpec, TruthSpec,
};
use tablelogit_core::{
    fit, CellPartition, Column, ContingencyTable, IndividualDataset, Interval, LikelihoodContext, MarginalTarget,
    ModelFit, OptimizerSettings,
};

const P1: f64 = 0.126;
const TABLE_M1: f64 = 994.0;
const TABLE_M0: f64 = 3739.0;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// The ODn table fixture on the synthetic dataset's scales.
fn odn_partition() -> CellPartition {
    let loaded = load_table(&fixtures().join("odn_table.toml")).unwrap();
    let manifest = tablelogit::synth::manifest(&SyntheticSpec::default());
    bind_table(&loaded, &manifest).unwrap().partition().clone()
}

fn synthetic(n: usize, noise: usize, seed: u64) -> IndividualDataset {
    synthetic_dataset(&SyntheticSpec {
        n,
        missing_cd4: 0,
        noise_covariates: noise,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

fn truth(covariates: &[&str], slopes: &[f64], m: f64, partition: &CellPartition) -> TruthSpec {
    let share = TABLE_M1 / (TABLE_M1 + TABLE_M0);
    TruthSpec {
        covariates: covariates.iter().map(|s| s.to_string()).collect(),
        beta: slopes.to_vec(),
        marginal: MarginalTarget::new(P1).unwrap(),
        label_totals: (m * share, m * (1.0 - share)),
        partition: partition.clone(),
    }
}

// Calibration bookkeeping shared by every fit in the suite: (fits checked,
// worst |weighted mean - p1|).
static CALIBRATION: Mutex<(usize, f64)> = Mutex::new((0, 0.0));

/// Weighted mean prediction computed directly from the rows.
fn weighted_mean_prediction(ds: &IndividualDataset, covariates: &[String], beta: &[f64]) -> f64 {
    let cols: Vec<usize> = covariates.iter().map(|c| ds.covariate_index(c).unwrap()).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for (row, w) in ds.weights().iter().enumerate() {
        let eta = beta[0]
            + cols
                .iter()
                .enumerate()
                .map(|(j, &c)| beta[j + 1] * ds.value(row, c).unwrap())
                .sum::<f64>();
        num += w * sigmoid(eta);
        den += w;
    }
    num / den
}

fn check_calibration(ds: &IndividualDataset, f: &ModelFit, p1: f64) {
    assert!(f.calibrated);
    let err = (weighted_mean_prediction(ds, &f.covariates, &f.beta) - p1).abs();
    let mut c = CALIBRATION.lock().unwrap();
    c.0 += 1;
    c.1 = c.1.max(err);
}

fn fit_calibrated(ds: &IndividualDataset, tables: &[ContingencyTable], covariates: &[&str]) -> ModelFit {
    let ctx = LikelihoodContext::new(ds, tables, covariates).unwrap();
    let mut f = fit(&ctx, &OptimizerSettings::default()).unwrap();
    f.calibrate(ds, MarginalTarget::new(P1).unwrap()).unwrap();
    check_calibration(ds, &f, P1);
    f
}

type Check = (usize, &'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

// ------------------------------------------------------------ criterion 1

/// Axis-aligned cell given as (lo, hi, lo_open, hi_closed) per covariate.
type RawCell = Vec<(f64, f64, bool, bool)>;

fn raw_contains(cell: &RawCell, point: &[f64]) -> bool {
    cell.iter().zip(point).all(|(&(lo, hi, lo_open, hi_closed), &x)| {
        let above = if lo_open { x > lo } else { x >= lo };
        let below = if hi_closed { x <= hi } else { x < hi };
        above && below
    })
}

/// Conditional log-likelihood by direct summation over rows for every cell.
fn oracle_log_likelihood(
    x: &[Vec<f64>],
    w: &[f64],
    table_cols: &[usize],
    cells: &[RawCell],
    counts: &[(f64, f64)],
    beta: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (cell, &(m1, m0)) in cells.iter().zip(counts) {
        let mut num1 = 0.0;
        let mut num0 = 0.0;
        let mut den = 0.0;
        for (row, wi) in x.iter().zip(w) {
            let point: Vec<f64> = table_cols.iter().map(|&c| row[c]).collect();
            if raw_contains(cell, &point) {
                let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
                num1 += wi * sigmoid(eta);
                num0 += wi * sigmoid(-eta);
                den += wi;
            }
        }
        total += m1 * (num1 / den).ln() + m0 * (num0 / den).ln();
    }
    total
}

fn cuts_from<R: Rng>(rng: &mut R, values: &[f64], pieces: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..pieces)
        .map(|i| {
            let base = i * sorted.len() / pieces;
            sorted[(base + rng.random_range(0..2)).min(sorted.len() - 2)]
        })
        .collect();
    cuts.dedup();
    cuts
}

fn axis_intervals(cuts: &[f64], closed_right: bool) -> Vec<(f64, f64, bool, bool)> {
    let mut b = vec![f64::NEG_INFINITY];
    b.extend(cuts);
    b.push(f64::INFINITY);
    b.windows(2)
        .map(|w| {
            if closed_right {
                (w[0], w[1], true, w[1].is_finite())
            } else {
                (w[0], w[1], w[0] == f64::NEG_INFINITY, false)
            }
        })
        .collect()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut worst_abs: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    let mut instances = 0;
    let mut attempt = 0u64;
    while instances < 100 {
        attempt += 1;
        let mut rng = stream(1, DOMAIN_SIMULATE, attempt);
        let n = rng.random_range(10..=200);
        let q = rng.random_range(1..=3);
        let bivariate = q >= 2 && rng.random_bool(0.5);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..q).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let col = |j: usize| x.iter().map(|r| r[j]).collect::<Vec<_>>();
        let (table_cols, cells): (Vec<usize>, Vec<RawCell>) = if bivariate {
            let pieces = rng.random_range(1..=4);
            let a = axis_intervals(&cuts_from(&mut rng, &col(0), pieces), true);
            let b = axis_intervals(&cuts_from(&mut rng, &col(1), 2), false);
            let cells = a
                .iter()
                .flat_map(|ia| b.iter().map(move |ib| vec![*ia, *ib]))
                .collect();
            (vec![0, 1], cells)
        } else {
            let k = rng.random_range(1..=8);
            let a = axis_intervals(&cuts_from(&mut rng, &col(0), k), true);
            (vec![0], a.into_iter().map(|i| vec![i]).collect())
        };
        if cells.len() > 8 {
            continue;
        }
        let occupied = cells.iter().all(|c| {
            x.iter()
                .any(|r| raw_contains(c, &table_cols.iter().map(|&j| r[j]).collect::<Vec<_>>()))
        });
        if !occupied {
            continue;
        }
        let counts: Vec<(f64, f64)> = cells
            .iter()
            .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect();
        let beta: Vec<f64> = (0..=q).map(|_| rng.random_range(-3.0..3.0)).collect();

        let names: Vec<String> = (0..q).map(|j| format!("x{j}")).collect();
        let columns = (0..q).map(|j| Column::observed(&names[j], col(j))).collect();
        let ds = IndividualDataset::new(columns, w.clone(), BTreeMap::new()).unwrap();
        let core_cells = cells
            .iter()
            .map(|c| {
                tablelogit_core::model::Cell::from_box(tablelogit_core::model::CellBox::new(
                    c.iter()
                        .map(|&(lo, hi, lo_open, hi_closed)| Interval::new(lo, hi, lo_open, hi_closed).unwrap())
                        .collect(),
                ))
            })
            .collect();
        let partition =
            CellPartition::new(table_cols.iter().map(|&j| names[j].clone()).collect(), core_cells).unwrap();
        let table = ContingencyTable::new(
            partition,
            counts.iter().map(|c| c.0).collect(),
            counts.iter().map(|c| c.1).collect(),
        )
        .unwrap();
        let ctx = LikelihoodContext::new(&ds, &[table], &names).unwrap();
        let fast = ctx.log_likelihood(&beta).unwrap();
        let wn: Vec<f64> = ds.weights().to_vec();
        let slow = oracle_log_likelihood(&x, &wn, &table_cols, &cells, &counts, &beta);
        let library_oracle =
            tablelogit_core::oracle::brute_force_log_likelihood(&ds, ctx.tables(), &names, &beta).unwrap();
        for other in [slow, library_oracle] {
            worst_abs = worst_abs.max((fast - other).abs());
            worst_rel = worst_rel.max((fast - other).abs() / other.abs().max(1.0));
        }
        instances += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        pass: worst_abs <= 1e-12 && secs < 10.0,
        detail: format!(
            "{instances} instances, max |diff| {worst_abs:.2e}, max relative {worst_rel:.2e}, {secs:.2} s"
        ),
    }
}

// ------------------------------------------------------------ criterion 2

fn criterion_2() -> Verdict {
    let a = load_table(&fixtures().join("odn_table.toml")).unwrap().table;
    let b = load_table(&fixtures().join("odn_vl_table.toml")).unwrap().table;
    let close = |t: &ContingencyTable, m1: f64, m0: f64| (t.total1() - m1).abs() <= 0.5 && (t.total0() - m0).abs() <= 0.5;
    let first = a.partition().locate(&[0.5]).unwrap();
    let first_ok = a.partition().cells()[first].to_string() == "(0,1]"
        && a.counts1()[first] == 239.6
        && a.counts0()[first] == 24.0;
    Verdict {
        pass: close(&a, 994.0, 3739.0) && close(&b, 627.0, 873.0) && first_ok,
        detail: format!(
            "ODn table ({}, {}), ODn x VL table ({}, {}), cell (0,1] = ({}, {})",
            a.total1(),
            a.total0(),
            b.total1(),
            b.total0(),
            a.counts1()[first],
            a.counts0()[first]
        ),
    }
}

// ------------------------------------------------------------ criterion 3

fn slope_error(size: usize, seed: u64, partition: &CellPartition) -> f64 {
    let ds = synthetic(size, 0, 10_000 + seed);
    let t = truth(&["ODn"], &[-1.0], size as f64, partition);
    let props = table_multinomial_proportions(&ds, &t).unwrap();
    let mut rng = stream(seed, DOMAIN_SIMULATE, size as u64);
    let table = draw_table(partition, &props, size as u64, &mut rng).unwrap();
    let f = fit_calibrated(&ds, &[table], &["ODn"]);
    (f.beta[1] + 1.0).abs()
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let partition = odn_partition();
    let small: Vec<f64> = (0..20u64).into_par_iter().map(|s| slope_error(5000, s, &partition)).collect();
    let large: Vec<f64> = (0..20u64).into_par_iter().map(|s| slope_error(20_000, s, &partition)).collect();
    let (ms, ml) = (median(small), median(large));
    let ratio = ms / ml;
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        pass: ms <= 0.1 && ratio >= 1.5 && secs < 300.0,
        detail: format!("median |error| {ms:.4} at n=m=5000, {ml:.4} at 20000 (ratio {ratio:.2}), {secs:.1} s"),
    }
}

// ------------------------------------------------------------ criterion 4

fn criterion_4() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut zero_slope: f64 = 0.0;
    for seed in 0..10u64 {
        let ds = synthetic(500 + 100 * seed as usize, 2, 300 + seed);
        let mut rng = stream(seed, DOMAIN_SIMULATE, 99);
        let covs = ["ODn".to_string(), "VL".to_string(), "noise1".to_string()];
        let slopes: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        for p1 in [1e-3, 0.05, P1, 0.5, 0.9, 0.999] {
            let target = MarginalTarget::new(p1).unwrap();
            let mut beta = vec![0.0];
            beta.extend(&slopes);
            let b0 = calibrate_intercept(&ds, &covs, &beta, target).unwrap();
            beta[0] = b0;
            worst = worst.max((weighted_mean_prediction(&ds, &covs, &beta) - p1).abs());

            let zero = [0.0, 0.0, 0.0, 0.0];
            let b0 = calibrate_intercept(&ds, &covs, &zero, target).unwrap();
            zero_slope = zero_slope.max((b0 - (p1 / (1.0 - p1)).ln()).abs());
        }
    }
    let (fits, suite) = *CALIBRATION.lock().unwrap();
    Verdict {
        pass: worst <= 1e-10 && zero_slope <= 1e-10 && suite <= 1e-10 && fits > 0,
        detail: format!(
            "direct max error {worst:.1e}; zero slopes max |b0 - logit(p1)| {zero_slope:.1e}; {fits} suite fits max error {suite:.1e}"
        ),
    }
}

// ------------------------------------------------------------ criterion 5

fn criterion_5() -> Verdict {
    let partition = odn_partition();
    let ds = synthetic(2000, 0, 55);
    let t = truth(&["ODn"], &[-1.0], TABLE_M1 + TABLE_M0, &partition);
    let props = table_multinomial_proportions(&ds, &t).unwrap();
    let mut rng = stream(5, DOMAIN_SIMULATE, 0);
    let table = draw_table(&partition, &props, (TABLE_M1 + TABLE_M0) as u64, &mut rng).unwrap();
    let f = fit_calibrated(&ds, std::slice::from_ref(&table), &["ODn"]);
    let hessian_se = f.standard_errors().expect("covariance available")[1];

    let covariates = vec!["ODn".to_string()];
    let levels = BTreeMap::new();
    let input = BootstrapInput {
        dataset: &ds,
        tables: std::slice::from_ref(&table),
        covariates: &covariates,
        target: MarginalTarget::new(P1).unwrap(),
        schemes: &[],
        declared_levels: &levels,
        bct: None,
    };
    let res = bootstrap_ci(
        &input,
        &BootstrapSettings {
            replicates: 500,
            seed: 5,
            resampling: Resampling { rows: false, tables: true },
            ..BootstrapSettings::default()
        },
    )
    .unwrap();
    check_calibration(&ds, &res.fit, P1);
    let boot_se = res.coefficient_sd()[1];
    let ratio = hessian_se / boot_se;

    // Intercept only, one cell: the likelihood is binomial in sigmoid(b0).
    let one_cell = CellPartition::univariate("ODn", vec![Interval::FULL]).unwrap();
    let single = ContingencyTable::new(one_cell, vec![TABLE_M1], vec![TABLE_M0]).unwrap();
    let ctx = LikelihoodContext::new(&ds, &[single], &[] as &[&str]).unwrap();
    let g = fit(&ctx, &OptimizerSettings::default()).unwrap();
    let m = TABLE_M1 + TABLE_M0;
    let p = TABLE_M1 / m;
    let analytic = 1.0 / (m * p * (1.0 - p));
    let numeric = g.covariance.as_ref().expect("covariance available").get(0, 0);
    let fisher_rel = (numeric / analytic - 1.0).abs();

    Verdict {
        pass: (1.0 / 1.5..=1.5).contains(&ratio) && fisher_rel <= 0.05,
        detail: format!(
            "slope SE {hessian_se:.4} (Hessian) vs {boot_se:.4} (bootstrap, {} replicates), ratio {ratio:.3}; intercept variance {numeric:.4e} vs analytic {analytic:.4e} ({:.2}% off)",
            res.replicates_used,
            100.0 * fisher_rel
        ),
    }
}

// ------------------------------------------------------------ criterion 6

fn criterion_6() -> Verdict {
    let partition = odn_partition();
    let candidates = ["ODn", "noise1", "noise2", "noise3", "noise4", "noise5"];
    let runs: Vec<(bool, bool)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let ds = synthetic(5000, 5, 20_000 + seed);
            let t = truth(&["ODn"], &[-1.0], 5000.0, &partition);
            let props = table_multinomial_proportions(&ds, &t).unwrap();
            let mut rng = stream(seed, DOMAIN_SIMULATE, 6);
            let table = draw_table(&partition, &props, 5000, &mut rng).unwrap();
            let r = forward_stepwise(&ds, &[table], &candidates, Criterion::Aic, &OptimizerSettings::default()).unwrap();
            let mut f = r.fit.clone();
            f.calibrate(&ds, MarginalTarget::new(P1).unwrap()).unwrap();
            check_calibration(&ds, &f, P1);
            let decreasing = r.trace.windows(2).all(|w| w[1].criterion < w[0].criterion);
            (r.selected.iter().any(|s| s == "ODn"), decreasing)
        })
        .collect();
    let hits = runs.iter().filter(|r| r.0).count();
    let monotone = runs.iter().filter(|r| r.1).count();
    Verdict {
        pass: hits * 10 >= 9 * runs.len() && monotone == runs.len(),
        detail: format!(
            "signal selected in {hits}/{} seeds; criterion strictly decreasing in {monotone}/{} traces",
            runs.len(),
            runs.len()
        ),
    }
}

// ------------------------------------------------------------ criterion 7

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let partition = odn_partition();
    let ds = synthetic_dataset(&SyntheticSpec::default()).unwrap();
    let m = TABLE_M1 + TABLE_M0;
    let study = |covs: &[&str], slopes: &[f64], seed: u64| {
        let mut t = truth(covs, slopes, m, &partition);
        t.label_totals = (TABLE_M1, TABLE_M0);
        let methods = [
            StudyMethod::Proposed {
                covariates: covs.iter().map(|s| s.to_string()).collect(),
            },
            StudyMethod::AlternativeCategorical,
        ];
        run_study(&ds, &t, &methods, 200, seed, &OptimizerSettings::default()).unwrap()
    };
    let s1 = study(&["ODn"], &[-1.0], 71);
    let s2 = study(&["ODn", "VL"], &[-1.0, 1.0], 72);
    let ok: Vec<_> = s1.replicates.iter().filter(|r| r.failure.is_none()).collect();
    let wins = ok.iter().filter(|r| r.mae[0] < r.mae[1]).count();
    let gap = |s: &tablelogit_core::simulation::StudyResult| s.summary[1].mean_mae - s.summary[0].mean_mae;
    let (g1, g2) = (gap(&s1), gap(&s2));
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        pass: wins * 100 >= 95 * ok.len() && ok.len() == 200 && g2 > g1 && secs < 900.0,
        detail: format!(
            "simulation 1: proposed better in {wins}/{} (MAE {:.4} vs {:.4}); mean gap {g1:.4} then {g2:.4} in simulation 2 (MAE {:.4} vs {:.4}); {secs:.1} s",
            ok.len(),
            s1.summary[0].mean_mae,
            s1.summary[1].mean_mae,
            s2.summary[0].mean_mae,
            s2.summary[1].mean_mae
        ),
    }
}

// ------------------------------------------------------------ criterion 8

fn criterion_8() -> Verdict {
    let partition = odn_partition();
    let ds = synthetic(1500, 0, 88);
    let mut worst: f64 = 0.0;
    for (covs, slopes) in [(vec!["ODn"], vec![-1.0]), (vec!["ODn", "VL"], vec![-1.2, 0.3])] {
        let t = truth(&covs, &slopes, TABLE_M1 + TABLE_M0, &partition);
        let props = table_multinomial_proportions(&ds, &t).unwrap();
        let table = expected_table(&partition, &props, t.table_count_total()).unwrap();
        let f = fit_calibrated(&ds, &[table], &covs);
        for (b, s) in f.beta[1..].iter().zip(&slopes) {
            worst = worst.max((b - s).abs());
        }
    }
    Verdict {
        pass: worst < 1e-3,
        detail: format!("max slope error {worst:.2e} over one- and two-covariate truths"),
    }
}

// ------------------------------------------------------------ criterion 9

fn criterion_9() -> Verdict {
    let start = Instant::now();
    let partition = odn_partition();
    // The population: a large draw from the generator whose group rates are
    // the estimands.
    let population = synthetic(200_000, 0, 9_000);
    let m = 20_000.0;
    let t = truth(&["ODn"], &[-1.0], m, &partition);
    let (_, probs) = true_probabilities(&population, &t).unwrap();
    let props = table_multinomial_proportions(&population, &t).unwrap();
    let labels = population.group_labels("region").unwrap();
    let mut rates: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for ((p, w), l) in probs.iter().zip(population.weights()).zip(labels) {
        let e = rates.entry(l.as_str()).or_default();
        e.0 += p * w;
        e.1 += w;
    }
    let true_rate: BTreeMap<String, f64> = rates.into_iter().map(|(k, (a, b))| (k.to_string(), a / b)).collect();

    let covariates = vec!["ODn".to_string()];
    let schemes = vec!["region".to_string()];
    let levels = BTreeMap::new();
    let mut covered = 0;
    let mut total = 0;
    for sim in 0..50u64 {
        let ds = synthetic(1000, 0, 90_000 + sim);
        let mut rng = stream(sim, DOMAIN_SIMULATE, 9);
        let table = draw_table(&partition, &props, m as u64, &mut rng).unwrap();
        let input = BootstrapInput {
            dataset: &ds,
            tables: std::slice::from_ref(&table),
            covariates: &covariates,
            target: MarginalTarget::new(P1).unwrap(),
            schemes: &schemes,
            declared_levels: &levels,
            bct: None,
        };
        let res = bootstrap_ci(
            &input,
            &BootstrapSettings {
                replicates: 500,
                seed: sim,
                resampling: Resampling { rows: true, tables: true },
                ..BootstrapSettings::default()
            },
        )
        .unwrap();
        check_calibration(&ds, &res.fit, P1);
        for e in &res.estimates {
            let truth = true_rate[&e.group];
            total += 1;
            if let (Some(lo), Some(hi)) = (e.ci_low, e.ci_high) {
                if lo <= truth && truth <= hi {
                    covered += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        pass: covered * 10 >= 9 * total && total == 200 && secs < 1200.0,
        detail: format!(
            "{covered}/{total} group intervals cover the population rate ({:.1}%), {secs:.1} s",
            100.0 * covered as f64 / total as f64
        ),
    }
}

// ----------------------------------------------------------- criterion 10

fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).unwrap());
    }
    out
}

fn criterion_10() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let f = |name: &str| fixtures().join(name).display().to_string();
    let data = [
        "--data".to_string(),
        f("synthetic_phia.csv"),
        "--manifest".into(),
        f("synthetic_phia.manifest.toml"),
        "--table".into(),
        f("odn_table.toml"),
        "--p1".into(),
        "0.1".into(),
        "--seed".into(),
        "17".into(),
    ];
    let with = |extra: &[&str]| -> Vec<String> {
        let mut v = data.to_vec();
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("validate", with(&["--covariates", "ODn,VL"])),
        ("fit", with(&["--covariates", "ODn,CD4", "--imputations", "3"])),
        ("select", with(&["--covariates", "ODn,VL,CD4,selfpos", "--imputations", "3"])),
        ("predict", with(&["--covariates", "ODn,VL"])),
        ("aggregate", with(&["--covariates", "ODn", "--bootstrap", "30"])),
        ("bootstrap", with(&["--covariates", "ODn,VL", "--bootstrap", "40"])),
        ("plot-data", with(&["--covariates", "ODn,VL"])),
        (
            "simulate",
            vec![
                "--table".into(),
                f("odn_table.toml"),
                "--p1".into(),
                "0.126".into(),
                "--seed".into(),
                "3".into(),
                "--config".into(),
                f("example_run.toml"),
            ],
        ),
        ("synth", vec!["--n".into(), "120".into(), "--seed".into(), "4".into()]),
    ];
    let mut differing = Vec::new();
    let mut failed = Vec::new();
    let mut files = 0;
    for (cmd, args) in &commands {
        let mut trees = Vec::new();
        for rep in 0..2 {
            let out = tmp.path().join(format!("{cmd}-{rep}"));
            let o = Command::new(env!("CARGO_BIN_EXE_tablelogit"))
                .arg(cmd)
                .args(args)
                .arg("--out")
                .arg(&out)
                .env("RUST_LOG", "off")
                .output()
                .unwrap();
            if !o.status.success() {
                failed.push(format!("{cmd}: {}", String::from_utf8_lossy(&o.stderr).trim()));
            }
            trees.push(if out.exists() { tree_bytes(&out) } else { BTreeMap::new() });
        }
        files += trees[0].len();
        if trees[0] != trees[1] || trees[0].is_empty() {
            differing.push(cmd.to_string());
        }
    }
    Verdict {
        pass: differing.is_empty() && failed.is_empty(),
        detail: if differing.is_empty() && failed.is_empty() {
            format!("{} commands, {files} files identical across reruns", commands.len())
        } else {
            format!("differing: {differing:?}; failed: {failed:?}")
        },
    }
}

fn main() {
    let criteria: [Check; 10] = [
        (1, "oracle equivalence", criterion_1),
        (2, "fixture exactness", criterion_2),
        (3, "consistency", criterion_3),
        (5, "standard errors", criterion_5),
        (6, "stepwise recovery", criterion_6),
        (7, "simulation ordering", criterion_7),
        (8, "exact recovery", criterion_8),
        (9, "bootstrap coverage", criterion_9),
        (10, "determinism", criterion_10),
        // Last, so that it sees every calibrated fit above.
        (4, "calibration", criterion_4),
    ];
    // Optional criterion numbers on the command line restrict the run.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut results = Vec::new();
    for (id, name, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        eprintln!("criterion {id} done in {:.1} s", start.elapsed().as_secs_f64());
        results.push((id, name, v));
    }
    results.sort_by_key(|r| r.0);
    let mut all = true;
    for (id, name, v) in &results {
        all &= v.pass;
        println!("{} criterion {id} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
