//! Noise estimation, rate exponents and convergence-bound evaluators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Per-coordinate unbiased sample variances of a batch of gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub variances: Vec<f64>,
    pub samples: usize,
}

/// `S²_j = 1/(n−1) Σ_s (g_{s,j} − ḡ_j)²`, computed in two passes.
pub fn estimate_noise<S: AsRef<[f64]>>(samples: &[S]) -> Result<NoiseEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {n}")));
    }
    let d = samples[0].as_ref().len();
    if let Some((i, s)) = samples
        .iter()
        .enumerate()
        .find(|(_, s)| s.as_ref().len() != d)
    {
        return Err(Error::shape(
            "estimate_noise",
            format!("{d} coordinates"),
            format!("sample {i} has {}", s.as_ref().len()),
        ));
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.as_ref()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for s in samples {
        for ((acc, v), m) in var.iter_mut().zip(s.as_ref()).zip(&mean) {
            let dv = v - m;
            *acc += dv * dv;
        }
    }
    var.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    Ok(NoiseEstimate {
        variances: var,
        samples: n,
    })
}

/// Summary of how many coordinates carry noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub dimension: usize,
    pub samples: usize,
    pub threshold: f64,
    pub noisy_count: usize,
    pub noisy_fraction: f64,
    /// `ln(count) / ln(d)`; absent when nothing exceeds the threshold.
    pub beta_estimate: Option<f64>,
    pub mean_noisy_variance: Option<f64>,
    pub max_variance: f64,
}

impl NoiseEstimate {
    pub fn dimension(&self) -> usize {
        self.variances.len()
    }

    /// Coordinates with `S² > threshold`.
    pub fn noisy_count(&self, threshold: f64) -> usize {
        self.variances.iter().filter(|&&v| v > threshold).count()
    }

    pub fn density_report(&self, threshold: f64) -> DensityReport {
        let d = self.dimension();
        let noisy: Vec<f64> = self
            .variances
            .iter()
            .copied()
            .filter(|&v| v > threshold)
            .collect();
        let count = noisy.len();
        let beta_estimate = match (count, d) {
            (0, _) => None,
            (_, 0 | 1) => Some(1.0),
            _ => Some((count as f64).ln() / (d as f64).ln()),
        };
        DensityReport {
            dimension: d,
            samples: self.samples,
            threshold,
            noisy_count: count,
            noisy_fraction: if d == 0 { 0.0 } else { count as f64 / d as f64 },
            beta_estimate,
            mean_noisy_variance: (count > 0).then(|| noisy.iter().sum::<f64>() / count as f64),
            max_variance: self.variances.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Estimated `‖σ_{Ψ_i}‖` for every subset of `partition`.
    pub fn subset_noise_norms(&self, partition: &Partition) -> Result<Vec<f64>> {
        if partition.d() != self.dimension() {
            return Err(Error::shape(
                "subset_noise_norms",
                partition.d(),
                self.dimension(),
            ));
        }
        let mut acc = vec![0.0; partition.c()];
        for (j, v) in self.variances.iter().enumerate() {
            acc[partition.subset_of(j)] += v;
        }
        Ok(acc.into_iter().map(f64::sqrt).collect())
    }
}

/// `‖σ_{Ψ_i}‖₂` from per-coordinate noise levels.
pub fn subset_sigma_norms(sigma: &[f64], partition: &Partition) -> Result<Vec<f64>> {
    Ok(partition
        .subset_sqnorms(sigma)?
        .into_iter()
        .map(f64::sqrt)
        .collect())
}

/// Exponents of `d` in the slow (`1/√T`) and fast (`1/T`) terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub slow: f64,
    pub fast: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateExponents {
    pub beta: f64,
    pub coordinate: Rate,
    pub norm: Rate,
    pub subset_norm: Rate,
    /// Subset size `k = d^e` at the optimum, clamped to `[0, 1]`.
    pub optimal_k_exponent: f64,
}

/// Dimension exponents under noise density `d^β`.
pub fn rate_exponents(beta: f64) -> Result<RateExponents> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid(format!(
            "density rate beta = {beta} must lie in [0, 1]"
        )));
    }
    // Coefficients are multiples of 1/10, so evaluate on the grid of 10β:
    // for β on that grid the numerators are exact integers and the single
    // division lands on the nearest double of the tabulated value.
    let b10 = beta * 10.0;
    let per100 = |a: f64, b: f64| (a + b * b10) / 100.0;
    let sn_fast = if beta <= 2.0 / 3.0 {
        per100(100.0, 10.0)
    } else {
        per100(60.0, 16.0)
    };
    Ok(RateExponents {
        beta,
        coordinate: Rate {
            slow: per100(150.0, 10.0),
            fast: 2.5,
        },
        norm: Rate {
            slow: per100(0.0, 25.0),
            fast: per100(0.0, 30.0),
        },
        subset_norm: Rate {
            slow: per100(30.0, 18.0),
            fast: sn_fast,
        },
        optimal_k_exponent: per100(-60.0, 14.0).clamp(0.0, 1.0),
    })
}

/// High-probability bound for SGD with subspace momentum and its step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm2Bound {
    pub alpha: f64,
    pub eta_star: f64,
    pub deterministic_term: f64,
    pub noise_term: f64,
    pub tail_term: f64,
    pub bound: f64,
}

pub fn thm2_bound(
    delta1: f64,
    sigma: f64,
    l: f64,
    beta1: f64,
    t: f64,
    delta: f64,
) -> Result<Thm2Bound> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("{name} = {v} must be positive")))
        }
    };
    positive("delta1", delta1)?;
    positive("L", l)?;
    positive("T", t)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma = {sigma} must be nonnegative"
        )));
    }
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::invalid(format!(
            "beta1 = {beta1} must lie in [0, 1)"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    let alpha = (3.0 - beta1) * l / (2.0 * (1.0 - beta1));
    let eta_cap = 1.0 / (2.0 * alpha);
    let eta_star = if sigma == 0.0 {
        eta_cap
    } else {
        eta_cap.min((delta1 / (sigma * sigma * alpha * t)).sqrt())
    };
    let deterministic_term = 8.0 * delta1 * alpha / t;
    let noise_term = 7.0 * sigma * (alpha * delta1).sqrt() / t.sqrt();
    let tail_term = 48.0 * sigma * sigma * (1.0 / delta).ln() / t;
    Ok(Thm2Bound {
        alpha,
        eta_star,
        deterministic_term,
        noise_term,
        tail_term,
        bound: deterministic_term + noise_term + tail_term,
    })
}

/// Inputs of the full Subset-Norm bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub delta1: f64,
    pub l: f64,
    /// `‖σ_{Ψ_i}‖₂` per subset; its length is `c`.
    pub subset_sigma: Vec<f64>,
    pub sigma_max: f64,
    /// `b_{0,i}` per subset.
    pub b0: Vec<f64>,
    pub eta: f64,
    pub t: f64,
    pub delta: f64,
}

impl BoundInputs {
    pub fn c(&self) -> usize {
        self.subset_sigma.len()
    }

    fn validate(&self) -> Result<()> {
        let c = self.c();
        if c == 0 {
            return Err(Error::invalid("at least one subset is required"));
        }
        if self.b0.len() != c {
            return Err(Error::shape("bound b0", c, self.b0.len()));
        }
        if let Some(b) = self.b0.iter().find(|&&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::invalid(format!(
                "b0 entries must be positive, got {b}"
            )));
        }
        if let Some(s) = self
            .subset_sigma
            .iter()
            .find(|&&s| !(s >= 0.0 && s.is_finite()))
        {
            return Err(Error::invalid(format!(
                "subset noise norms must be nonnegative, got {s}"
            )));
        }
        for (name, v) in [("delta1", self.delta1), ("eta", self.eta), ("T", self.t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.l >= 0.0 && self.l.is_finite())
            || !(self.sigma_max >= 0.0 && self.sigma_max.is_finite())
        {
            return Err(Error::invalid("L and sigma_max must be nonnegative"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta = {} must lie in (0, 1)",
                self.delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm3Bound {
    /// `σ_max · sqrt(c · log(1/δ))`.
    pub alpha: f64,
    pub g: f64,
    pub i: f64,
    pub h: f64,
    pub noise_term: f64,
    pub deterministic_term: f64,
    /// `G · (noise_term + deterministic_term)`.
    pub rhs: f64,
}

/// Full Subset-Norm bound with every polylog factor kept.
pub fn thm3_bound(inp: &BoundInputs) -> Result<Thm3Bound> {
    inp.validate()?;
    let c = inp.c() as f64;
    let log_inv = (1.0 / inp.delta).ln();
    let ln_t_delta = (inp.t / inp.delta).ln();
    let b0_min = inp.b0.iter().copied().fold(f64::INFINITY, f64::min);
    let b0_l1: f64 = inp.b0.iter().sum();
    let sigma_sum: f64 = inp.subset_sigma.iter().sum();
    let sigma_sq: f64 = inp.subset_sigma.iter().map(|s| s * s).sum();
    let (eta, l) = (inp.eta, inp.l);
    let alpha = inp.sigma_max * (c * log_inv).sqrt();

    let smooth_log = if l > 0.0 {
        8.0 * eta * l * c * (4.0 * eta * l / b0_min).ln()
    } else {
        0.0
    };
    let i = b0_l1
        + 2.0 * inp.delta1 / eta
        + 8.0 * log_inv / b0_min * sigma_sq
        + log_inv.sqrt() * sigma_sum
        + smooth_log;

    let h: f64 = inp
        .subset_sigma
        .iter()
        .zip(&inp.b0)
        .map(|(&s, &b)| {
            let s2 = s * s;
            (ln_t_delta * s2 + 2.0 * alpha)
                * (8.0 * s2 * log_inv / (b * b) + 2.0 * (1.0 + s2 * inp.t + s2 * log_inv).ln())
        })
        .sum();

    let g = inp.delta1 / eta
        + h
        + (ln_t_delta * sigma_sq
            + c * eta * l
            + 4.0 * c.powf(1.5) * inp.sigma_max * log_inv.sqrt())
            * ((4.0 * inp.t.sqrt() * sigma_sum + i) / b0_min).ln();

    let noise_term = 4.0 * sigma_sum / inp.t.sqrt();
    let deterministic_term = i / inp.t;
    Ok(Thm3Bound {
        alpha,
        g,
        i,
        h,
        noise_term,
        deterministic_term,
        rhs: g * (noise_term + deterministic_term),
    })
}

/// The two displayed factors of the simplified Subset-Norm bound with
/// polylog terms dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedTerms {
    /// `Σ‖σ_Ψi‖⁴ + ‖σ‖∞(‖σ‖² + c^{3/2}) + cL`
    pub g: f64,
    /// `‖σ‖² + Σ‖σ_Ψi‖ + Lc`
    pub n: f64,
}

pub fn thm3_simplified_terms(subset_sigma: &[f64], sigma_max: f64, l: f64) -> SimplifiedTerms {
    let c = subset_sigma.len() as f64;
    let sigma_sq: f64 = subset_sigma.iter().map(|s| s * s).sum();
    let sigma_sum: f64 = subset_sigma.iter().sum();
    let fourth: f64 = subset_sigma.iter().map(|s| s.powi(4)).sum();
    SimplifiedTerms {
        g: fourth + sigma_max * (sigma_sq + c.powf(1.5)) + c * l,
        n: sigma_sq + sigma_sum + l * c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn estimator_hand_values() {
        let est = estimate_noise(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(est.variances, vec![2.0]);
        let same = estimate_noise(&vec![vec![1.5, -3.0]; 5]).unwrap();
        assert_eq!(same.variances, vec![0.0, 0.0]);
        assert!(estimate_noise(&[vec![1.0]]).is_err());
        assert!(estimate_noise(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn density_report_counts() {
        let est = NoiseEstimate {
            variances: vec![1.0, 0.0, 0.9, 0.1],
            samples: 10,
        };
        let r = est.density_report(0.5);
        assert_eq!(r.noisy_count, 2);
        assert!((r.beta_estimate.unwrap() - 0.5).abs() < 1e-15);
        assert!((r.mean_noisy_variance.unwrap() - 0.95).abs() < 1e-15);
        assert_eq!(est.density_report(2.0).beta_estimate, None);
    }

    #[test]
    fn rate_table_rows() {
        let r = rate_exponents(0.5).unwrap();
        assert_eq!((r.subset_norm.slow, r.subset_norm.fast), (1.2, 1.5));
        assert_eq!((r.norm.slow, r.norm.fast), (1.25, 1.5));
        assert_eq!((r.coordinate.slow, r.coordinate.fast), (2.0, 2.5));
        let r = rate_exponents(1.0).unwrap();
        assert_eq!((r.subset_norm.slow, r.subset_norm.fast), (2.1, 2.2));
        assert_eq!(r.optimal_k_exponent, 0.8);
        assert_eq!(rate_exponents(0.2).unwrap().optimal_k_exponent, 0.0);
        assert!(rate_exponents(1.1).is_err());
        assert!(rate_exponents(-0.1).is_err());
    }

    #[test]
    fn sn_fast_branch_is_continuous() {
        let b: f64 = 2.0 / 3.0;
        assert!(((b + 1.0) - (1.6 * b + 0.6)).abs() < 1e-15);
        assert!((rate_exponents(b).unwrap().subset_norm.fast - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn thm2_examples() {
        let b = thm2_bound(1.0, 1.0, 1.0, 0.9, 1e4, 0.1).unwrap();
        assert!((b.alpha - 10.5).abs() < 1e-12);
        assert!((b.bound - 0.2463).abs() < 5e-4);
        let quiet = thm2_bound(1.0, 0.0, 1.0, 0.9, 1e4, 0.1).unwrap();
        assert_eq!(quiet.bound, 8.0 * quiet.alpha / 1e4);
        assert_eq!(quiet.eta_star, 1.0 / (2.0 * quiet.alpha));
        assert!(thm2_bound(1.0, 1.0, 1.0, 1.0, 1e4, 0.1).is_err());
        assert!(thm2_bound(1.0, 1.0, 1.0, 0.9, 1e4, 1.0).is_err());
    }

    fn inputs(sigma: Vec<f64>, t: f64) -> BoundInputs {
        let c = sigma.len();
        BoundInputs {
            delta1: 1.0,
            l: 1.0,
            sigma_max: sigma.iter().copied().fold(0.0, f64::max),
            subset_sigma: sigma,
            b0: vec![1e-2; c],
            eta: 0.5,
            t,
            delta: 0.1,
        }
    }

    #[test]
    fn thm3_noiseless_reduces() {
        let inp = inputs(vec![0.0; 3], 1e4);
        let out = thm3_bound(&inp).unwrap();
        assert_eq!(out.h, 0.0);
        let i = 3.0 * 1e-2 + 2.0 / 0.5 + 8.0 * 0.5 * 3.0 * (4.0 * 0.5 / 1e-2f64).ln();
        assert!((out.i - i).abs() < 1e-12 * i);
        assert!((out.rhs - out.g * out.i / 1e4).abs() < 1e-12 * out.rhs);
    }

    #[test]
    fn thm3_rejects_bad_b0() {
        let mut inp = inputs(vec![1.0], 10.0);
        inp.b0 = vec![0.0];
        assert!(thm3_bound(&inp).is_err());
    }

    #[test]
    fn thm3_eventually_decreasing_in_t() {
        let values: Vec<f64> = (2..=8)
            .map(|e| {
                thm3_bound(&inputs(vec![1.0, 0.5], 10f64.powi(e)))
                    .unwrap()
                    .rhs
            })
            .collect();
        let tail = &values[2..];
        assert!(tail.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    proptest! {
        #[test]
        fn estimator_is_shift_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 2..20),
            shift in proptest::collection::vec(-100.0f64..100.0, 4),
        ) {
            let a = estimate_noise(&rows).unwrap();
            let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&shift).map(|(v, s)| v + s).collect()).collect();
            let b = estimate_noise(&shifted).unwrap();
            for (x, y) in a.variances.iter().zip(&b.variances) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn estimator_is_permutation_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 2..20),
        ) {
            let a = estimate_noise(&rows).unwrap();
            let mut rev = rows.clone();
            rev.reverse();
            let b = estimate_noise(&rev).unwrap();
            for (x, y) in a.variances.iter().zip(&b.variances) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn thm2_monotonicity(
            delta1 in 0.1f64..10.0, sigma in 0.0f64..5.0, l in 0.1f64..10.0,
            beta1 in 0.0f64..0.99, t in 10.0f64..1e6, delta in 0.01f64..0.5,
        ) {
            let base = thm2_bound(delta1, sigma, l, beta1, t, delta).unwrap().bound;
            let tol = 1e-12 * base;
            prop_assert!(thm2_bound(delta1, sigma, l, beta1, t * 2.0, delta).unwrap().bound <= base + tol);
            prop_assert!(thm2_bound(delta1, sigma * 1.5 + 0.1, l, beta1, t, delta).unwrap().bound >= base - tol);
            prop_assert!(thm2_bound(delta1, sigma, l * 1.5, beta1, t, delta).unwrap().bound >= base - tol);
            prop_assert!(thm2_bound(delta1 * 1.5, sigma, l, beta1, t, delta).unwrap().bound >= base - tol);
            prop_assert!(thm2_bound(delta1, sigma, l, (beta1 + 0.005).min(0.995), t, delta).unwrap().bound >= base - tol);
        }
    }
}
