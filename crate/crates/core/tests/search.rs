//! Budgeted CNN search: the filter contract and the selection property.

use memclass::datasets::synth_image_split;
use memclass::directconv::{catalog, feasible_models, sampling_search, CnnSearchConfig, CnnTrainConfig};

fn config(seed: u64) -> CnnSearchConfig {
    CnnSearchConfig {
        samples: 6,
        partial_epochs: 1,
        full: CnnTrainConfig { epochs: 3, patience: None, seed, ..CnnTrainConfig::default() },
        seed,
    }
}

#[test]
fn feasible_sets_are_nested_and_exact() {
    let mut previous = 0;
    for kb in [8, 16, 32, 64, 128] {
        let f = feasible_models(kb);
        assert!(f.iter().all(|(_, fp)| fp.total_bytes <= kb as u64 * 1024));
        let by_filter = catalog().iter().filter(|(_, fp)| fp.total_bytes <= kb as u64 * 1024).count();
        assert_eq!(f.len(), by_filter);
        assert!(f.len() > previous);
        previous = f.len();
    }
}

#[test]
fn winner_fits_and_beats_the_pool_median() {
    let split = synth_image_split(10, 8, 3, 1, 4.0, 13).unwrap();
    let out = sampling_search(8, &split, &config(2)).unwrap();
    assert_eq!(out.pool.len(), 6);
    assert!(out.pool.iter().all(|c| c.footprint.fits(8)));
    assert!(out.footprint.fits(8));
    assert_eq!(out.model.footprint().unwrap(), out.footprint);
    let mut accs: Vec<f64> = out.pool.iter().map(|c| c.validation_accuracy).collect();
    accs.sort_by(f64::total_cmp);
    let median = (accs[2] + accs[3]) / 2.0;
    assert!(out.history.best_validation_accuracy >= median, "{} < {median}", out.history.best_validation_accuracy);
    // the winner is a best-ranked pool member
    let best = accs[5];
    assert!(out.pool.iter().any(|c| &c.arch == out.model.arch() && c.validation_accuracy == best));
    // reproducible under the same seed
    let again = sampling_search(8, &split, &config(2)).unwrap();
    assert_eq!(again.model, out.model);
}
