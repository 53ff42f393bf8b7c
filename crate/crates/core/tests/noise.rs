use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StudentT};
use snsm::noise_models::{
    density_count, fitted_proxy, verify_subgaussian, NoiseDistribution, NoiseModel, Objective,
    Placement,
};

fn draws(model: &NoiseModel, d: usize, n: u64, seed: u64) -> Vec<Vec<f64>> {
    let resolved = model.resolve(d).unwrap();
    (1..=n).map(|t| resolved.sample(seed, t)).collect()
}

#[test]
fn beta_zero_puts_all_variance_on_one_coordinate() {
    let model = NoiseModel::density(0.0, 2.0, Placement::Contiguous, NoiseDistribution::Gaussian);
    let samples = draws(&model, 64, 4000, 3);
    let var0 = samples.iter().map(|s| s[0] * s[0]).sum::<f64>() / samples.len() as f64;
    assert!((var0 - 4.0).abs() < 0.3, "{var0}");
    assert!(samples.iter().all(|s| s[1..].iter().all(|x| *x == 0.0)));
}

#[test]
fn noise_is_unbiased() {
    for dist in [NoiseDistribution::Gaussian, NoiseDistribution::Bounded] {
        let model = NoiseModel::density(0.5, 1.0, Placement::Random { seed: 4 }, dist);
        let samples = draws(&model, 100, 5000, 9);
        for j in 0..100 {
            let mean = samples.iter().map(|s| s[j]).sum::<f64>() / samples.len() as f64;
            // Five standard errors at unit variance.
            assert!(
                mean.abs() < 5.0 / (samples.len() as f64).sqrt(),
                "{dist:?} coordinate {j}: {mean}"
            );
        }
    }
}

#[test]
fn stochastic_gradient_centers_on_true_gradient() {
    let obj = Objective::quadratic(vec![1.0, 2.0, 3.0]).unwrap();
    let x = [1.0, -1.0, 0.5];
    let noise = NoiseModel::gaussian(vec![1.0; 3]);
    let n = 4000;
    let mut sum = [0.0; 3];
    for t in 1..=n {
        let g = snsm::noise_models::stoch_grad(&obj, &noise, &x, 5, t).unwrap();
        for j in 0..3 {
            sum[j] += g[j];
        }
    }
    let truth = obj.grad(&x).unwrap();
    for j in 0..3 {
        assert!((sum[j] / n as f64 - truth[j]).abs() < 0.1);
    }
}

#[test]
fn gaussian_passes_subgaussian_check_with_wide_proxy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let std = 0.7;
    let normal = Normal::new(0.0, std).unwrap();
    let samples: Vec<f64> = (0..20_000).map(|_| normal.sample(&mut rng)).collect();
    let check = verify_subgaussian(&samples, 1.6 * std, 0.05).unwrap();
    assert!(check.passed, "{check:?}");
    assert!(fitted_proxy(&samples, 1.0 / (1.6 * std)) <= 1.6 * std);
}

#[test]
fn heavy_tails_fail_subgaussian_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let t = StudentT::new(2.0).unwrap();
    let samples: Vec<f64> = (0..20_000).map(|_| t.sample(&mut rng)).collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let std = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
        / (samples.len() - 1) as f64)
        .sqrt();
    let check = verify_subgaussian(&samples, 1.6 * std, 0.05).unwrap();
    assert!(!check.passed, "{check:?}");
}

#[test]
fn subgaussian_check_needs_enough_samples() {
    assert!(verify_subgaussian(&[0.0; 10], 1.0, 0.0).is_err());
}

proptest! {
    #[test]
    fn density_count_stays_in_range(d in 1usize..5000, beta in 0.0f64..=1.0) {
        let c = density_count(d, beta);
        prop_assert!(c >= 1 && c <= d);
        prop_assert!(c as f64 + 1e-6 >= (d as f64).powf(beta));
    }

    #[test]
    fn draws_are_reproducible(seed in any::<u64>(), t in 1u64..1000) {
        let r = NoiseModel::gaussian(vec![0.5; 8]).resolve(8).unwrap();
        prop_assert_eq!(r.sample(seed, t), r.sample(seed, t));
    }

    #[test]
    fn bounded_draws_have_fixed_magnitude(seed in any::<u64>(), t in 1u64..1000) {
        let model = NoiseModel::density(0.7, 0.3, Placement::Contiguous, NoiseDistribution::Bounded);
        let r = model.resolve(50).unwrap();
        let s = r.sample(seed, t);
        let count = density_count(50, 0.7);
        prop_assert!(s[..count].iter().all(|x| x.abs() == 0.3));
        prop_assert!(s[count..].iter().all(|x| *x == 0.0));
    }
}
