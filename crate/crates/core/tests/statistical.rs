use tablelogit_core::estimation::{fit, OptimizerSettings};
use tablelogit_core::rng::{stream, DOMAIN_SIMULATE};
use tablelogit_core::selection::{forward_stepwise, impute, Criterion};
use tablelogit_core::simulation::{
    draw_table, expected_table, synthetic_dataset, table_multinomial_proportions, SyntheticSpec, TruthSpec,
};
use tablelogit_core::{CellPartition, Interval, LikelihoodContext, MarginalTarget};

fn odn_partition() -> CellPartition {
    let inf = f64::INFINITY;
    let cuts = [1.0, 1.25, 1.5, 1.75, 2.0];
    let mut cells = vec![Interval::open_closed(-inf, cuts[0]).unwrap()];
    for w in cuts.windows(2) {
        cells.push(Interval::open_closed(w[0], w[1]).unwrap());
    }
    cells.push(Interval::new(2.0, inf, true, false).unwrap());
    CellPartition::univariate("ODn", cells).unwrap()
}

fn truth(covariates: &[&str], beta: &[f64]) -> TruthSpec {
    TruthSpec {
        covariates: covariates.iter().map(|s| s.to_string()).collect(),
        beta: beta.to_vec(),
        marginal: MarginalTarget::new(0.126).unwrap(),
        label_totals: (994.0, 3739.0),
        partition: odn_partition(),
    }
}

/// Upper tail of the chi-square distribution via the regularized lower
/// incomplete gamma series.
fn chi_square_sf(x: f64, df: f64) -> f64 {
    let a = df / 2.0;
    let z = x / 2.0;
    let mut term = 1.0 / a;
    let mut sum = term;
    for n in 1..10_000 {
        term *= z / (a + n as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    let lower = (a * z.ln() - z - libm::lgamma(a)).exp() * sum;
    1.0 - lower
}

#[test]
fn chi_square_tail_reference_values() {
    // df = 2: survival is exp(-x/2).
    assert!((chi_square_sf(3.0, 2.0) - (-1.5f64).exp()).abs() < 1e-12);
    // 0.999 quantile of chi-square(11) is 31.264.
    assert!((chi_square_sf(31.264, 11.0) - 0.001).abs() < 1e-5);
}

#[test]
fn table_draws_match_proportions() {
    let ds = synthetic_dataset(&SyntheticSpec {
        n: 1500,
        missing_cd4: 0,
        seed: 4,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let t = truth(&["ODn"], &[-1.0]);
    let props = table_multinomial_proportions(&ds, &t).unwrap();
    let flat = props.flat();
    let m = 4733u64;
    let draws = 1000;
    let mut sums = vec![0.0; flat.len()];
    for r in 0..draws {
        let mut rng = stream(77, DOMAIN_SIMULATE, r);
        let table = draw_table(&t.partition, &props, m, &mut rng).unwrap();
        assert_eq!(table.total(), m as f64);
        for (s, c) in sums.iter_mut().zip(table.counts1().iter().chain(table.counts0())) {
            *s += c;
        }
    }
    let mut chi2 = 0.0;
    for (s, p) in sums.iter().zip(&flat) {
        let expected = m as f64 * p;
        let se = (m as f64 * p * (1.0 - p) / draws as f64).sqrt();
        let mean = s / draws as f64;
        assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} vs {expected} (se {se})");
        let e_total = expected * draws as f64;
        chi2 += (s - e_total) * (s - e_total) / e_total;
    }
    let p_value = chi_square_sf(chi2, (flat.len() - 1) as f64);
    assert!(p_value > 0.001, "chi-square {chi2}, p = {p_value}");

    let mut a = stream(5, DOMAIN_SIMULATE, 0);
    let mut b = stream(5, DOMAIN_SIMULATE, 0);
    assert_eq!(
        draw_table(&t.partition, &props, m, &mut a).unwrap(),
        draw_table(&t.partition, &props, m, &mut b).unwrap()
    );
}

#[test]
fn expected_table_recovers_two_slopes() {
    let ds = synthetic_dataset(&SyntheticSpec {
        n: 1500,
        missing_cd4: 0,
        seed: 8,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let t = truth(&["ODn", "VL"], &[-1.2, 0.3]);
    let props = table_multinomial_proportions(&ds, &t).unwrap();
    let table = expected_table(&t.partition, &props, t.table_count_total()).unwrap();
    let ctx = LikelihoodContext::new(&ds, &[table], &t.covariates).unwrap();
    let f = fit(&ctx, &OptimizerSettings::default()).unwrap();
    assert!(f.converged);
    assert!((f.beta[1] + 1.2).abs() < 1e-3, "{:?}", f.beta);
    assert!((f.beta[2] - 0.3).abs() < 1e-3, "{:?}", f.beta);
    assert!((f.beta[0] - props.adjusted_intercept).abs() < 1e-2);
}

#[test]
fn imputed_values_vary_across_imputations() {
    let ds = synthetic_dataset(&SyntheticSpec::default()).unwrap();
    let set = impute(&ds, &["CD4"], 20, 3).unwrap();
    assert_eq!(set.imputed_mask.len(), 24);
    let col = ds.covariate_index("CD4").unwrap();
    for &(c, row) in &set.imputed_mask {
        assert_eq!(c, col);
        let v: Vec<f64> = set.datasets.iter().map(|d| d.value(row, col).unwrap()).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64;
        assert!(var > 0.0);
        // Draws stay on the scale of the observed column.
        assert!(mean > 2.0 && mean < 6.5, "{mean}");
    }
}

#[test]
fn noise_candidates_are_mostly_rejected() {
    // Each noise candidate passes the AIC penalty with probability about
    // P(chi2_1 > 2) = 0.157, so about 71% of seeds should stay empty.
    let seeds = 40;
    let mut intercept_only = 0;
    for seed in 0..seeds {
        let ds = synthetic_dataset(&SyntheticSpec {
            n: 2000,
            missing_cd4: 0,
            noise_covariates: 2,
            seed: 100 + seed,
            ..SyntheticSpec::default()
        })
        .unwrap();
        // The table carries no covariate signal at all.
        let t = truth(&["ODn"], &[0.0]);
        let props = table_multinomial_proportions(&ds, &t).unwrap();
        let mut rng = stream(seed, DOMAIN_SIMULATE, 0);
        let table = draw_table(&t.partition, &props, 2000, &mut rng).unwrap();
        let r = forward_stepwise(
            &ds,
            &[table],
            &["noise1", "noise2"],
            Criterion::Aic,
            &OptimizerSettings::default(),
        )
        .unwrap();
        assert!(r.trace.windows(2).all(|w| w[1].criterion < w[0].criterion));
        if r.selected.is_empty() {
            intercept_only += 1;
        }
    }
    assert!(intercept_only * 2 > seeds, "{intercept_only} of {seeds}");
}
