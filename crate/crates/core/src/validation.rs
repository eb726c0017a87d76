//! Cross-validated prediction error and its bootstrap statistics.
//!
//! PrErr for a mask is `(1/M) Σ_k Σ_{j ∈ fold k} (n_j/N - p_j)² / p_j`,
//! where `p_j` comes from the estimator trained on the other folds. The
//! prediction is normalized over all `M` restricted outcomes (see
//! [`predicted_probabilities`]), and `n_j/N` uses the global event count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{sample_multinomial, split_folds, CountData, FoldSplit, POMSet, RngStreams, StreamPurpose};
use crate::ml::{ml_estimate, normalized_probabilities, restrict_pom, MLConfig, ReducedPom};
use crate::quantum::{DensityMatrix, SubspaceMask};

/// Box statistics and percentile interval of a PrErr bootstrap sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStats {
    pub sample_size: usize,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub mean: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
}

/// Predictions of `estimator` for every outcome of `reduced`, normalized
/// over all of them. This is the one place the normalization of held-out
/// predictions is decided.
pub fn predicted_probabilities(estimator: &DensityMatrix, reduced: &ReducedPom) -> Result<Vec<f64>> {
    normalized_probabilities(estimator, reduced)
}

/// `(1/M) Σ_{j ∈ fold} (f_j - p_j)² / p_j` summed over the given outcomes.
/// A zero prediction on an observed outcome gives `+∞`.
pub fn chi_square_terms(frequencies: &[f64], predicted: &[f64], outcomes: &[usize]) -> f64 {
    let mut acc = 0.0;
    for &j in outcomes {
        let (f, p) = (frequencies[j], predicted[j]);
        if p <= 0.0 {
            if f > 0.0 {
                return f64::INFINITY;
            }
            continue;
        }
        acc += (f - p) * (f - p) / p;
    }
    acc
}

/// K-fold prediction error of the ML estimator on `mask`.
pub fn cross_validate(
    pom: &POMSet,
    counts: &CountData,
    mask: &SubspaceMask,
    split: &FoldSplit,
    ml_config: &MLConfig,
) -> Result<f64> {
    let reduced = restrict_pom(pom, mask)?;
    cross_validate_reduced(&reduced, counts, split, ml_config)
}

/// [`cross_validate`] with the outcomes already restricted.
pub fn cross_validate_reduced(
    reduced: &ReducedPom,
    counts: &CountData,
    split: &FoldSplit,
    ml_config: &MLConfig,
) -> Result<f64> {
    let m = reduced.len();
    if counts.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: counts.len() });
    }
    if split.outcome_count() != m {
        return Err(Error::DimensionMismatch { expected: m, found: split.outcome_count() });
    }
    let frequencies = counts.frequencies();
    let mut total = 0.0;
    for (k, fold) in split.folds().iter().enumerate() {
        let train = split.training_indices(k);
        let train_counts = counts.subset(&train).map_err(|_| Error::EmptyTrainingFold { fold: k })?;
        let fit = ml_estimate(&reduced.subset(&train)?, &train_counts, ml_config)?;
        let predicted = predicted_probabilities(&fit.estimator, reduced)?;
        total += chi_square_terms(&frequencies, &predicted, fold);
        if total == f64::INFINITY {
            break;
        }
    }
    Ok(total / m as f64)
}

/// Where bootstrap replicates draw their counts from.
#[derive(Clone, Copy, Debug)]
pub enum BootstrapSource<'a> {
    /// Multinomial counts from a model state on the full space (usual case).
    Parametric(&'a DensityMatrix),
    /// Multinomial counts from the observed frequencies. Not validated when
    /// the positivity constraint is active.
    NonParametric(&'a CountData),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub folds: usize,
    pub ml_config: MLConfig,
    /// Fraction of replicates that must produce a finite PrErr.
    pub min_valid_fraction: f64,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, folds: usize) -> Self {
        BootstrapConfig { replicates, folds, ml_config: MLConfig::default(), min_valid_fraction: 0.95 }
    }
}

/// PrErr of `B` synthetic data sets at a fixed `mask`. Replicate `b` draws
/// its counts and fold split from bootstrap stream `b`, so the same
/// replicates are reused across masks. Failed or infinite replicates are
/// dropped; the valid values come back in replicate order.
pub fn bootstrap_prerr(
    source: BootstrapSource<'_>,
    mask: &SubspaceMask,
    pom: &POMSet,
    total: u64,
    config: &BootstrapConfig,
    streams: &RngStreams,
) -> Result<Vec<f64>> {
    if config.replicates == 0 {
        return Err(Error::config("bootstrap needs at least one replicate"));
    }
    let probabilities = match source {
        BootstrapSource::Parametric(model) => {
            if model.dim() != pom.dim() {
                return Err(Error::DimensionMismatch { expected: pom.dim(), found: model.dim() });
            }
            pom.normalized_probabilities(model)?
        }
        BootstrapSource::NonParametric(counts) => {
            if counts.len() != pom.len() {
                return Err(Error::DimensionMismatch { expected: pom.len(), found: counts.len() });
            }
            counts.frequencies()
        }
    };
    let reduced = restrict_pom(pom, mask)?;
    let values: Vec<Option<f64>> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = streams.stream(StreamPurpose::Bootstrap, b as u64);
            let counts = sample_multinomial(&probabilities, total, &mut rng).ok()?;
            let split = split_folds(pom.len(), config.folds, &mut rng).ok()?;
            cross_validate_reduced(&reduced, &counts, &split, &config.ml_config).ok().filter(|p| p.is_finite())
        })
        .collect();
    let valid: Vec<f64> = values.into_iter().flatten().collect();
    if (valid.len() as f64) < config.min_valid_fraction * config.replicates as f64 {
        return Err(Error::TooManyFailedReplicates { valid: valid.len(), requested: config.replicates });
    }
    Ok(valid)
}

/// [`bootstrap_prerr`] from a model state given on the mask (it is embedded
/// into the full space first).
pub fn parametric_bootstrap(
    model: &DensityMatrix,
    mask: &SubspaceMask,
    pom: &POMSet,
    total: u64,
    config: &BootstrapConfig,
    streams: &RngStreams,
) -> Result<Vec<f64>> {
    let full = if model.dim() == pom.dim() { model.clone() } else { model.embed(mask)? };
    bootstrap_prerr(BootstrapSource::Parametric(&full), mask, pom, total, config, streams)
}

/// Inclusive linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `[2P - q_{1-α/2}, 2P - q_{α/2}]`
pub fn percentile_ci(sample: &[f64], point: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("significance level {alpha} outside (0, 1)")));
    }
    let s = sorted(sample)?;
    Ok((2.0 * point - quantile_sorted(&s, 1.0 - alpha / 2.0), 2.0 * point - quantile_sorted(&s, alpha / 2.0)))
}

pub fn boxplot_stats(sample: &[f64], point: f64, alpha: f64) -> Result<BootstrapStats> {
    let s = sorted(sample)?;
    let (ci_low, ci_high) = percentile_ci(&s, point, alpha)?;
    let q1 = quantile_sorted(&s, 0.25);
    let q2 = quantile_sorted(&s, 0.5);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = s.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence);
    let whisker_low = inside.clone().fold(f64::INFINITY, f64::min).min(q1);
    let whisker_high = inside.fold(f64::NEG_INFINITY, f64::max).max(q3);
    let outliers = s.iter().copied().filter(|&x| x < lo_fence || x > hi_fence).collect();
    Ok(BootstrapStats {
        sample_size: s.len(),
        q1,
        q2,
        q3,
        mean: s.iter().sum::<f64>() / s.len() as f64,
        whisker_low,
        whisker_high,
        outliers,
        ci_low,
        ci_high,
        alpha,
    })
}
