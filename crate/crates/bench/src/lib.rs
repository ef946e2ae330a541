//! Deterministic fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retigrade_core::grader::Network;
use retigrade_core::regions::RegionSet;
use retigrade_core::synth::{SynthSpec, Synthesizer};
use retigrade_core::{extract_regions, FeatureMode, FeatureVector, GradePair, LesionClass, LesionMask};

/// Default trunk for extended features.
pub const EXTENDED_DIMS: [usize; 9] = [12, 25, 50, 75, 100, 75, 50, 25, 12];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform noise mask; dense noise makes many small regions and long merge
/// chains, the hard case for labeling.
pub fn noise_mask(side: usize, density: f64, seed: u64) -> LesionMask {
    let mut rng = rng(seed);
    LesionMask::from_fn(side, side, LesionClass::He, |_, _| rng.random_bool(density)).expect("valid size")
}

/// The four region sets of one synthetic image with default profiles.
pub fn synthetic_region_sets(side: usize, seed: u64) -> Vec<RegionSet> {
    let spec = SynthSpec { n_images: 1, width: side, height: side, seed, ..Default::default() };
    let image = Synthesizer::new(spec).expect("valid spec").image(0).expect("packable");
    image.masks.iter().map(extract_regions).collect()
}

pub fn network(seed: u64) -> Network {
    Network::init(&EXTENDED_DIMS, &mut rng(seed))
}

pub fn standardized_input(seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    (0..EXTENDED_DIMS[0]).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Random labeled extended vectors, for timing training epochs.
pub fn dataset(n: usize, seed: u64) -> Vec<(FeatureVector, GradePair)> {
    let mut rng = rng(seed);
    (0..n)
        .map(|_| {
            let values = (0..12).map(|_| rng.random_range(0..60)).collect();
            let grades = GradePair::new(rng.random_range(0..5), rng.random_range(0..3)).expect("in range");
            (FeatureVector::new(FeatureMode::Extended, values).expect("12 values"), grades)
        })
        .collect()
}
