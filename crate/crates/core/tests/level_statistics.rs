use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use scar_metrology::spectrum::{gap_ratio, goe_gap_ratio};

#[test]
fn goe_reference_value() {
    let r = goe_gap_ratio(1000, 50, 7).unwrap();
    assert!((r - 0.53).abs() < 0.01, "{r}");
}

#[test]
fn poisson_reference_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut e = 0.0;
    let levels: Vec<f64> = (0..100_000)
        .map(|_| {
            e += rng.sample::<f64, _>(Exp1);
            e
        })
        .collect();
    let r = gap_ratio(&levels).unwrap();
    // 2 ln 2 - 1
    assert!((r - 0.3863).abs() < 0.01, "{r}");
}

#[test]
fn goe_is_seed_deterministic() {
    assert_eq!(goe_gap_ratio(200, 2, 11).unwrap(), goe_gap_ratio(200, 2, 11).unwrap());
}
