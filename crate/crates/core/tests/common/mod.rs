use mldcc::dataset::{FeatureMatrix, LabelMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random micro dataset with ties and missing cells; returns features,
/// labels, current probabilities and a mask.
pub fn micro(seed: u64) -> (FeatureMatrix, LabelMatrix, Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(2..=200);
    let q = rng.gen_range(1..=10);
    let n = rng.gen_range(1..=6);
    let levels = rng.gen_range(2..12) as f64;
    let x: Vec<f64> = (0..m * q)
        .map(|_| {
            if rng.gen_bool(0.1) {
                f64::NAN
            } else {
                (rng.gen_range(0.0..1.0) * levels).floor() / levels
            }
        })
        .collect();
    let y: Vec<u8> = (0..m * n).map(|_| rng.gen_bool(0.4) as u8).collect();
    let prob: Vec<f64> = (0..m * n).map(|_| rng.gen_range(0.05..0.95)).collect();
    let mask: Vec<bool> = (0..m * n).map(|_| rng.gen_bool(0.2)).collect();
    (
        FeatureMatrix::new(m, q, x),
        LabelMatrix::from_vec(m, n, y),
        prob,
        mask,
    )
}
