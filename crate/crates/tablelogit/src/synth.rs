//! Synthetic survey-like fixtures on disk.

use tablelogit_core::simulation::{synthetic_dataset, SyntheticSpec, AGE_GROUPS, REGIONS};
use tablelogit_core::{IndividualDataset, Scale};

use crate::dataset::{write_dataset, BctSpec, CovariateSpec, GroupSpec, LoadedDataset, Manifest};
use crate::error::Result;

/// Manifest matching [`synthetic_dataset`] output.
pub fn manifest(spec: &SyntheticSpec) -> Manifest {
    let cov = |name: &str, scale: Scale, imputable: bool| CovariateSpec {
        name: name.into(),
        scale,
        imputable,
    };
    let mut covariates = vec![
        cov("ODn", Scale::Raw, false),
        cov("VL", Scale::Log, false),
        cov("CD4", Scale::Raw, true),
        cov("selfpos", Scale::Raw, false),
    ];
    covariates.extend((1..=spec.noise_covariates).map(|i| cov(&format!("noise{i}"), Scale::Raw, false)));
    Manifest {
        weight: "weight".into(),
        missing: vec![String::new(), "NA".into()],
        covariates,
        groups: vec![
            GroupSpec {
                name: "region".into(),
                levels: REGIONS.iter().map(|s| s.to_string()).collect(),
            },
            GroupSpec {
                name: "age".into(),
                levels: AGE_GROUPS.iter().map(|s| s.to_string()).collect(),
            },
        ],
        bct: Some(BctSpec {
            odn: "ODn".into(),
            vl: "VL".into(),
            odn_max: 1.5,
            vl_min: 1000.0,
        }),
    }
}

/// The dataset as CSV bytes plus its manifest as TOML. Weights are written
/// rescaled to mean one.
pub fn files(spec: &SyntheticSpec) -> Result<(IndividualDataset, Vec<u8>, String)> {
    let dataset = synthetic_dataset(spec)?;
    let n = dataset.n_rows() as f64;
    let manifest = manifest(spec);
    let loaded = LoadedDataset {
        raw_weights: dataset.weights().iter().map(|w| w * n).collect(),
        headers: Vec::new(),
        records: Vec::new(),
        manifest,
        dataset,
    };
    let csv = write_dataset(&loaded);
    Ok((loaded.dataset, csv, loaded.manifest.to_toml()))
}
