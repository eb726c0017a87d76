//! Greedy growth of the reconstruction subspace.
//!
//! Each step fits every way of adjoining `d` unused basis indices to the
//! current mask and keeps the one with the largest maximal log-likelihood.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{CountData, POMSet};
use crate::ml::{ml_estimate, restrict_pom, MLConfig, MLResult};
use crate::quantum::SubspaceMask;
use crate::validation::BootstrapStats;

/// Absolute log-likelihood difference below which two candidates tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum TerminationPolicy {
    /// Stop after this many steps.
    FixedSteps(usize),
    /// Stop once PrErr is at or below this value.
    #[serde(rename = "prerr-tolerance")]
    PrErrTolerance(f64),
    /// Stop once `|P_k - P_{k-1}| / P_{k-1}` is at or below this value.
    #[serde(rename = "prerr-relative-change")]
    PrErrRelativeChange(f64),
}

impl TerminationPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TerminationPolicy::FixedSteps(k) => k > 0,
            TerminationPolicy::PrErrTolerance(t) | TerminationPolicy::PrErrRelativeChange(t) => t > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("termination parameter must be positive: {self:?}")))
        }
    }

    pub fn needs_prerr(&self) -> bool {
        !matches!(self, TerminationPolicy::FixedSteps(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NucleationConfig {
    pub seed_dim: usize,
    pub limit_dim: usize,
    pub termination: TerminationPolicy,
    pub ml_config: MLConfig,
    /// Compute PrErr at every step even when termination does not need it.
    pub evaluate_prerr: bool,
}

impl NucleationConfig {
    pub fn new(seed_dim: usize, limit_dim: usize, termination: TerminationPolicy) -> Self {
        NucleationConfig { seed_dim, limit_dim, termination, ml_config: MLConfig::default(), evaluate_prerr: true }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed_dim < 2 {
            return Err(Error::config(format!("seed dimension must be at least 2, got {}", self.seed_dim)));
        }
        if self.limit_dim < 2 * self.seed_dim {
            return Err(Error::config(format!(
                "limit dimension {} leaves no room to grow a {}-dimensional seed",
                self.limit_dim, self.seed_dim
            )));
        }
        self.termination.validate()?;
        self.ml_config.validate()
    }

    fn wants_prerr(&self) -> bool {
        self.evaluate_prerr || self.termination.needs_prerr()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NucleationStep {
    pub step: usize,
    pub recon_dim: usize,
    pub mask: SubspaceMask,
    pub log_likelihood: f64,
    pub ml_result: MLResult,
    pub prerr: Option<f64>,
    pub prerr_stats: Option<BootstrapStats>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NucleationTrace {
    pub steps: Vec<NucleationStep>,
}

impl NucleationTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&NucleationStep> {
        self.steps.last()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.recon_dim).collect()
    }

    /// The step with the smallest finite PrErr, earliest on ties.
    pub fn min_prerr_step(&self) -> Option<&NucleationStep> {
        self.steps
            .iter()
            .filter(|s| s.prerr.is_some_and(f64::is_finite))
            .min_by(|a, b| a.prerr.unwrap().total_cmp(&b.prerr.unwrap()))
    }
}

/// A failed run together with the steps that did complete.
#[derive(Debug, thiserror::Error)]
#[error("nucleation failed after {} completed steps: {source}", trace.len())]
pub struct NucleationFailure {
    pub trace: NucleationTrace,
    #[source]
    pub source: Error,
}

/// Every `d`-subset of the indices not in `current`, in lexicographic order.
pub fn enumerate_candidates(current: &SubspaceMask, d: usize, limit_dim: usize) -> Result<Vec<SubspaceMask>> {
    if current.limit_dim() != limit_dim {
        return Err(Error::DimensionMismatch { expected: limit_dim, found: current.limit_dim() });
    }
    let free = current.complement();
    if d == 0 || free.len() < d {
        return Err(Error::InvalidMask(format!(
            "only {} indices left outside {current}, cannot adjoin {d}",
            free.len()
        )));
    }
    free.into_iter().combinations(d).map(|block| SubspaceMask::new(limit_dim, block)).collect()
}

/// Fits every candidate extension of `current` and returns the winner.
pub fn best_extension(
    current: &SubspaceMask,
    pom: &POMSet,
    counts: &CountData,
    config: &NucleationConfig,
) -> Result<(SubspaceMask, MLResult)> {
    if pom.dim() != config.limit_dim {
        return Err(Error::DimensionMismatch { expected: config.limit_dim, found: pom.dim() });
    }
    if counts.len() != pom.len() {
        return Err(Error::DimensionMismatch { expected: pom.len(), found: counts.len() });
    }
    let candidates = enumerate_candidates(current, config.seed_dim, config.limit_dim)?;
    let fits: Vec<Result<MLResult>> = candidates
        .par_iter()
        .map(|block| {
            let mask = current.union(block)?;
            ml_estimate(&restrict_pom(pom, &mask)?, counts, &config.ml_config)
        })
        .collect();
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
    select_winner(fits).ok_or(Error::IncompatibleData).map(|r| (r.mask.clone(), r))
}

/// Largest log-likelihood; within [`TIE_TOLERANCE`] of it, the
/// lexicographically smallest mask.
fn select_winner(fits: Vec<MLResult>) -> Option<MLResult> {
    let top = fits.iter().map(|r| r.log_likelihood).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return None;
    }
    fits.into_iter()
        .filter(|r| r.log_likelihood >= top - TIE_TOLERANCE)
        .min_by(|a, b| a.mask.indices().cmp(b.mask.indices()))
}

/// Runs nucleation from the empty mask. `validator` computes PrErr for a
/// grown mask and its ML fit; it is only called when the configuration asks
/// for PrErr.
pub fn nucleate(
    pom: &POMSet,
    counts: &CountData,
    config: &NucleationConfig,
    mut validator: impl FnMut(&SubspaceMask, &MLResult) -> Result<f64>,
) -> Result<NucleationTrace, NucleationFailure> {
    let mut trace = NucleationTrace::default();
    if let Err(source) = config.validate() {
        return Err(NucleationFailure { trace, source });
    }
    let mut current = SubspaceMask::empty(config.limit_dim);

    while config.limit_dim - current.len() >= config.seed_dim {
        let (mask, ml_result) = match best_extension(&current, pom, counts, config) {
            Ok(found) => found,
            Err(source) => return Err(NucleationFailure { trace, source }),
        };
        debug_assert!(current.is_subset_of(&mask) && mask.len() == current.len() + config.seed_dim);

        let prerr = if config.wants_prerr() {
            match validator(&mask, &ml_result) {
                Ok(p) => Some(p),
                Err(source) => return Err(NucleationFailure { trace, source }),
            }
        } else {
            None
        };

        let step = trace.len() + 1;
        let previous = trace.last().and_then(|s| s.prerr);
        trace.steps.push(NucleationStep {
            step,
            recon_dim: mask.len(),
            mask: mask.clone(),
            log_likelihood: ml_result.log_likelihood,
            ml_result,
            prerr,
            prerr_stats: None,
        });
        current = mask;

        let done = match config.termination {
            TerminationPolicy::FixedSteps(k) => step >= k,
            TerminationPolicy::PrErrTolerance(tol) => prerr.is_some_and(|p| p <= tol),
            TerminationPolicy::PrErrRelativeChange(tol) => match (previous, prerr) {
                (Some(a), Some(b)) if a.is_finite() && b.is_finite() => {
                    a == b || (a - b).abs() <= tol * a.abs()
                }
                _ => false,
            },
        };
        if done {
            break;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{expected_counts, generate_pom, sample_counts, RngStreams, StreamPurpose};
    use crate::quantum::{coherent_state, fock_state, DensityMatrix};
    use num_complex::Complex64 as C64;

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn candidate_counts_follow_binomials() {
        let mut current = SubspaceMask::empty(16);
        let mut seen = Vec::new();
        for _ in 0..3 {
            let c = enumerate_candidates(&current, 2, 16).unwrap();
            seen.push(c.len());
            current = current.union(&c[0]).unwrap();
        }
        assert_eq!(seen, vec![120, 91, 66]);

        for limit in 4..12 {
            for d in 2..=limit / 2 {
                let mut current = SubspaceMask::empty(limit);
                while limit - current.len() >= d {
                    let c = enumerate_candidates(&current, d, limit).unwrap();
                    assert_eq!(c.len(), binomial(limit - current.len(), d));
                    assert!(c.iter().all(|b| b.len() == d && b.indices().iter().all(|&i| !current.contains(i))));
                    current = current.union(c.last().unwrap()).unwrap();
                }
                assert!(enumerate_candidates(&current, d, limit).is_err());
            }
        }
    }

    #[test]
    fn winner_breaks_ties_lexicographically() {
        let fit = |indices: Vec<usize>, ll: f64| MLResult {
            estimator: DensityMatrix::maximally_mixed(2),
            mask: SubspaceMask::new(6, indices).unwrap(),
            log_likelihood: ll,
            iterations: 0,
            converged: true,
        };
        let w = select_winner(vec![fit(vec![2, 3], -10.0), fit(vec![0, 4], -10.0 + 5e-10), fit(vec![1, 2], -11.0)]);
        assert_eq!(w.unwrap().mask.indices(), &[0, 4]);
        let w = select_winner(vec![fit(vec![0, 1], -10.0), fit(vec![4, 5], -9.0)]);
        assert_eq!(w.unwrap().mask.indices(), &[4, 5]);
        assert!(select_winner(vec![fit(vec![0, 1], f64::NEG_INFINITY)]).is_none());
    }

    #[test]
    fn single_candidate_is_returned() {
        let streams = RngStreams::new(3);
        let pom = generate_pom(30, 4, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let truth = DensityMatrix::pure(&coherent_state(C64::new(0.5, 0.0), 4).unwrap());
        let counts = sample_counts(&truth, &pom, 10_000, &mut streams.stream(StreamPurpose::Counts, 0)).unwrap();
        let config = NucleationConfig::new(2, 4, TerminationPolicy::FixedSteps(2));
        let current = SubspaceMask::new(4, vec![1, 3]).unwrap();
        let (mask, _) = best_extension(&current, &pom, &counts, &config).unwrap();
        assert_eq!(mask, SubspaceMask::full(4));
    }

    #[test]
    fn fixed_steps_trace_is_nested_and_monotone() {
        let streams = RngStreams::new(5);
        let pom = generate_pom(80, 10, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let truth = DensityMatrix::pure(&coherent_state(C64::new(1.2, 0.0), 10).unwrap());
        let counts = sample_counts(&truth, &pom, 100_000, &mut streams.stream(StreamPurpose::Counts, 0)).unwrap();
        let mut config = NucleationConfig::new(2, 10, TerminationPolicy::FixedSteps(4));
        config.evaluate_prerr = false;
        let trace = nucleate(&pom, &counts, &config, |_, _| unreachable!()).unwrap();
        assert_eq!(trace.dims(), vec![2, 4, 6, 8]);
        for w in trace.steps.windows(2) {
            assert!(w[0].mask.is_subset_of(&w[1].mask));
            assert!(w[1].log_likelihood >= w[0].log_likelihood - 1e-9 * w[0].log_likelihood.abs());
        }
        assert!(trace.steps.iter().all(|s| s.prerr.is_none()));
    }

    #[test]
    fn tight_limit_means_seed_plus_at_most_one_growth() {
        let streams = RngStreams::new(6);
        let pom = generate_pom(40, 4, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let truth = DensityMatrix::pure(&fock_state(1, 4).unwrap());
        let counts = expected_counts(&truth, &pom, 100_000).unwrap();
        let config = NucleationConfig::new(2, 4, TerminationPolicy::FixedSteps(10));
        let trace = nucleate(&pom, &counts, &config, |_, _| Ok(1.0)).unwrap();
        assert_eq!(trace.dims(), vec![2, 4]);
    }

    #[test]
    fn prerr_tolerance_stops_early() {
        let streams = RngStreams::new(7);
        let pom = generate_pom(40, 6, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let truth = DensityMatrix::pure(&fock_state(1, 6).unwrap());
        let counts = expected_counts(&truth, &pom, 100_000).unwrap();
        let config = NucleationConfig::new(2, 6, TerminationPolicy::PrErrTolerance(0.5));
        let mut calls = 0;
        let trace = nucleate(&pom, &counts, &config, |_, _| {
            calls += 1;
            Ok(if calls == 1 { 1.0 } else { 0.1 })
        })
        .unwrap();
        assert_eq!(trace.dims(), vec![2, 4]);
        assert!(trace.steps[0].mask.contains(1));
    }

    #[test]
    fn relative_change_policy() {
        let streams = RngStreams::new(8);
        let pom = generate_pom(40, 8, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let truth = DensityMatrix::pure(&coherent_state(C64::new(1.0, 0.0), 8).unwrap());
        let counts = sample_counts(&truth, &pom, 10_000, &mut streams.stream(StreamPurpose::Counts, 0)).unwrap();
        let config = NucleationConfig::new(2, 8, TerminationPolicy::PrErrRelativeChange(0.05));
        let values = [1.0, 0.5, 0.49, 0.1];
        let mut k = 0;
        let trace = nucleate(&pom, &counts, &config, |_, _| {
            k += 1;
            Ok(values[k - 1])
        })
        .unwrap();
        assert_eq!(trace.dims(), vec![2, 4, 6]);
        assert_eq!(trace.min_prerr_step().unwrap().recon_dim, 6);
    }

    #[test]
    fn validator_error_keeps_partial_trace() {
        let streams = RngStreams::new(9);
        let pom = generate_pom(40, 6, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let truth = DensityMatrix::pure(&coherent_state(C64::new(0.7, 0.0), 6).unwrap());
        let counts = sample_counts(&truth, &pom, 10_000, &mut streams.stream(StreamPurpose::Counts, 0)).unwrap();
        let config = NucleationConfig::new(2, 6, TerminationPolicy::FixedSteps(3));
        let mut k = 0;
        let err = nucleate(&pom, &counts, &config, |_, _| {
            k += 1;
            if k < 2 { Ok(0.3) } else { Err(Error::EmptyTrainingFold { fold: 0 }) }
        })
        .unwrap_err();
        assert_eq!(err.trace.dims(), vec![2]);
        assert!(matches!(err.source, Error::EmptyTrainingFold { .. }));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(NucleationConfig::new(1, 8, TerminationPolicy::FixedSteps(1)).validate().is_err());
        assert!(NucleationConfig::new(3, 5, TerminationPolicy::FixedSteps(1)).validate().is_err());
        assert!(NucleationConfig::new(2, 8, TerminationPolicy::FixedSteps(0)).validate().is_err());
        assert!(NucleationConfig::new(2, 8, TerminationPolicy::PrErrTolerance(-1.0)).validate().is_err());
        assert!(NucleationConfig::new(2, 4, TerminationPolicy::PrErrRelativeChange(0.1)).validate().is_ok());
    }
}
