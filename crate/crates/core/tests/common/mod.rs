#![allow(dead_code)]

use momentflow::{Complex64, PolynomialMap};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random map with `a_1 = 1` and `Σ_{k≥2} k|a_k| ≤ budget < 1`, which is
/// univalent (and starlike) for every draw.
pub fn random_univalent_map(rng: &mut impl Rng, n: usize, budget: f64) -> PolynomialMap {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    let weights: Vec<f64> = (2..=n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum::<f64>().max(1e-12);
    let share = budget * rng.random::<f64>();
    for (i, w) in weights.iter().enumerate() {
        let k = (i + 2) as f64;
        let radius = share * w / total / k;
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        coeffs.push(Complex64::from_polar(radius, phase));
    }
    PolynomialMap::new(coeffs).expect("a_1 = 1")
}
