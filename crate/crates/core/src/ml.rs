//! Maximum-likelihood density-matrix estimation on a coordinate subspace.
//!
//! Restricted outcomes do not sum to the identity, so the objective is the
//! normalized log-likelihood `Σ_j n_j log p̃_j` with
//! `p̃_j = tr(ρΠ_j) / tr(ρG)` and `G = Σ_k Π_k`.
//!
//! The maximization runs on the whitened state `σ ∝ G^{1/2} ρ G^{1/2}`,
//! where the whitened outcomes `Π'_j = G^{-1/2} Π_j G^{-1/2}` form a complete
//! measurement and `p̃_j = tr(σ Π'_j)` exactly. The ascent is a projected
//! gradient method: `σ ← P(σ + α R)` with `R = Σ_j f_j Π'_j / p̃_j`, where `P`
//! is the Euclidean projection onto unit-trace positive matrices, `α` is a
//! Barzilai-Borwein step, and backtracking enforces a sufficient increase.
//! Every iterate is therefore a valid state and the likelihood never drops.
//! A multiplicative `RρR`-type update converges sublinearly when the optimum
//! is rank deficient (noiseless data from a pure state); the projection does
//! not have that problem.
//!
//! Concavity gives the certificate `log L* - log L(σ) ≤ N (λ_max(R) - 1)`,
//! which is what the stopping rule compares against the tolerance.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::measurement::{CountData, POMSet};
use crate::quantum::{hermitian_eigen, ComplexMatrix, DensityMatrix, SubspaceMask};

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    MaximallyMixed,
    Provided(DensityMatrix),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MLConfig {
    /// Relative tolerance on the log-likelihood.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_state: InitialState,
}

impl Default for MLConfig {
    fn default() -> Self {
        MLConfig { tolerance: 1e-10, max_iterations: 5000, initial_state: InitialState::MaximallyMixed }
    }
}

impl MLConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::config("ML tolerance must be positive"));
        }
        if self.max_iterations < 1 {
            return Err(Error::config("ML iteration cap must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MLResult {
    pub estimator: DensityMatrix,
    pub mask: SubspaceMask,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Outcomes restricted to `mask`, together with the mask they live on.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedPom {
    mask: SubspaceMask,
    pom: POMSet,
}

impl ReducedPom {
    pub fn mask(&self) -> &SubspaceMask {
        &self.mask
    }

    pub fn pom(&self) -> &POMSet {
        &self.pom
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn len(&self) -> usize {
        self.pom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pom.is_empty()
    }

    /// The outcomes at the given positions, still on the same mask.
    pub fn subset(&self, indices: &[usize]) -> Result<ReducedPom> {
        let pom = self.pom.subset(indices)?;
        Ok(ReducedPom { mask: self.mask.clone(), pom })
    }

    /// Wraps already-reduced outcomes. `pom.dim()` must equal `mask.len()`.
    pub fn from_parts(mask: SubspaceMask, pom: POMSet) -> Result<ReducedPom> {
        if pom.dim() != mask.len() {
            return Err(Error::DimensionMismatch { expected: mask.len(), found: pom.dim() });
        }
        Ok(ReducedPom { mask, pom })
    }
}

/// `S Π_j S` for every outcome, as `|mask| × |mask|` operators.
pub fn restrict_pom(pom: &POMSet, mask: &SubspaceMask) -> Result<ReducedPom> {
    if mask.is_empty() {
        return Err(Error::InvalidMask("cannot restrict to an empty subspace".into()));
    }
    Ok(ReducedPom { mask: mask.clone(), pom: pom.restrict(mask)? })
}

/// Born probabilities normalized over the outcomes of `reduced`.
pub fn normalized_probabilities(rho: &DensityMatrix, reduced: &ReducedPom) -> Result<Vec<f64>> {
    if rho.dim() != reduced.dim() {
        return Err(Error::DimensionMismatch { expected: reduced.dim(), found: rho.dim() });
    }
    let raw = reduced.pom.probabilities(rho)?;
    let total: f64 = raw.iter().sum();
    Ok(if total > 0.0 { raw.iter().map(|p| p / total).collect() } else { vec![0.0; raw.len()] })
}

/// `Σ_j n_j log p̃_j`. Zero counts contribute nothing; a positive count on a
/// zero-probability outcome gives negative infinity.
pub fn log_likelihood(rho: &DensityMatrix, reduced: &ReducedPom, counts: &CountData) -> Result<f64> {
    if counts.len() != reduced.len() {
        return Err(Error::DimensionMismatch { expected: reduced.len(), found: counts.len() });
    }
    let p = normalized_probabilities(rho, reduced)?;
    Ok(weighted_log_sum(counts.counts(), &p))
}

fn weighted_log_sum(counts: &[u64], p: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&n, &pj) in counts.iter().zip(p) {
        if n == 0 {
            continue;
        }
        if pj <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += n as f64 * pj.ln();
    }
    acc
}

/// One accepted iterate of [`ml_estimate_observed`].
#[derive(Debug)]
pub struct Iterate<'a> {
    pub iteration: usize,
    pub rho: &'a DensityMatrix,
    pub log_likelihood: f64,
}

pub fn ml_estimate(reduced: &ReducedPom, counts: &CountData, config: &MLConfig) -> Result<MLResult> {
    estimate(reduced, counts, config, None)
}

/// Like [`ml_estimate`], calling `observer` on the starting point and after
/// every accepted step.
pub fn ml_estimate_observed(
    reduced: &ReducedPom,
    counts: &CountData,
    config: &MLConfig,
    mut observer: impl FnMut(&Iterate<'_>),
) -> Result<MLResult> {
    estimate(reduced, counts, config, Some(&mut observer))
}

fn estimate(
    reduced: &ReducedPom,
    counts: &CountData,
    config: &MLConfig,
    mut observer: Option<&mut dyn FnMut(&Iterate<'_>)>,
) -> Result<MLResult> {
    let mut notify = |iteration: usize, rho: &dyn Fn() -> DensityMatrix, log_likelihood: f64| {
        if let Some(obs) = observer.as_mut() {
            obs(&Iterate { iteration, rho: &rho(), log_likelihood });
        }
    };
    config.validate()?;
    if counts.len() != reduced.len() {
        return Err(Error::DimensionMismatch { expected: reduced.len(), found: counts.len() });
    }
    let dim = reduced.dim();
    let initial = match &config.initial_state {
        InitialState::MaximallyMixed => DensityMatrix::maximally_mixed(dim),
        InitialState::Provided(rho) => {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
            }
            rho.clone()
        }
    };

    let finish = |estimator: DensityMatrix, iterations: usize, converged: bool| -> Result<MLResult> {
        let log_likelihood = log_likelihood(&estimator, reduced, counts)?;
        Ok(MLResult { estimator, mask: reduced.mask.clone(), log_likelihood, iterations, converged })
    };

    if dim == 1 {
        let rho = DensityMatrix::maximally_mixed(1);
        let ll = log_likelihood(&rho, reduced, counts)?;
        notify(0, &|| rho.clone(), ll);
        return finish(rho, 0, ll.is_finite());
    }

    let Some(problem) = WhitenedProblem::new(reduced, counts) else {
        notify(0, &|| initial.clone(), f64::NEG_INFINITY);
        return finish(initial, 0, false);
    };

    let mut sigma = problem.whiten(&initial);
    let mut probs = problem.probabilities(&sigma);
    let mut ll = problem.log_likelihood(&probs);
    if !ll.is_finite() {
        // A provided start can have null directions; mix in a little of the
        // identity so that every supported outcome has positive probability.
        let r = problem.rank;
        sigma = sigma * C64::new(0.5, 0.0) + DMatrix::identity(r, r) * C64::new(0.5 / r as f64, 0.0);
        probs = problem.probabilities(&sigma);
        ll = problem.log_likelihood(&probs);
    }
    notify(0, &|| problem.unwhiten(&sigma), ll);
    if !ll.is_finite() {
        return finish(problem.unwhiten(&sigma), 0, false);
    }

    const ARMIJO: f64 = 1e-4;
    let mut alpha = 0.5_f64;
    let mut iterations = 0;
    let mut converged = false;
    let scale = ll.abs().max(1.0);
    let mut r_op = problem.gradient_operator(&probs);

    while iterations < config.max_iterations {
        let gap = problem.total * (hermitian_eigen(&r_op).0[0] - 1.0).max(0.0);
        if gap <= config.tolerance * scale {
            converged = true;
            break;
        }

        let mut accepted = None;
        loop {
            let candidate = project_to_states(&sigma + &r_op * C64::new(alpha, 0.0));
            let diff = &candidate - &sigma;
            let ascent = real_inner(&r_op, &diff);
            if frobenius_sqr(&diff) < 1e-30 || alpha < 1e-14 {
                break;
            }
            let cand_probs = problem.probabilities(&candidate);
            let cand_ll = problem.log_likelihood(&cand_probs);
            if cand_ll >= ll + ARMIJO * problem.total * ascent.max(0.0) {
                accepted = Some((candidate, diff, cand_probs, cand_ll));
                break;
            }
            alpha *= 0.5;
        }
        let Some((candidate, diff, cand_probs, cand_ll)) = accepted else {
            converged = gap <= 1e-6 * scale;
            break;
        };
        iterations += 1;
        let next_r = problem.gradient_operator(&cand_probs);
        let curvature = -real_inner(&diff, &(&next_r - &r_op));
        alpha = if curvature > 0.0 { frobenius_sqr(&diff) / curvature } else { alpha * 2.0 };
        alpha = alpha.clamp(1e-12, 1e12);
        sigma = candidate;
        ll = cand_ll;
        r_op = next_r;

        notify(iterations, &|| problem.unwhiten(&sigma), ll);
    }

    finish(problem.unwhiten(&sigma), iterations, converged)
}

/// The likelihood problem in whitened coordinates on the support of `G`.
///
/// Hermitian `r × r` matrices are handled as real vectors of length `r²`
/// (diagonal, then `√2 Re` and `√2 Im` of the upper triangle), under which
/// `tr(AB)` is the ordinary dot product. Each observed outcome is one column
/// of `features`, so probabilities and the gradient are both a single
/// matrix-vector product.
struct WhitenedProblem {
    rank: usize,
    total: f64,
    /// `G^{-1/2}` restricted to the support, as a `dim × rank` matrix.
    whitener: DMatrix<C64>,
    /// `G^{1/2}` on the support, as a `rank × dim` matrix.
    colorer: DMatrix<C64>,
    /// Counts and frequencies of the outcomes with a positive count.
    counts: Vec<f64>,
    frequencies: DVector<f64>,
    /// `r² × T`, one whitened outcome per column.
    features: DMatrix<f64>,
}

impl WhitenedProblem {
    /// `None` when some observed outcome has no support at all, which makes
    /// the likelihood zero for every state.
    fn new(reduced: &ReducedPom, counts: &CountData) -> Option<Self> {
        let dim = reduced.dim();
        let factors: Vec<Vec<Vec<C64>>> = reduced.pom.outcomes().iter().map(|o| o.factor()).collect();

        let mut g = DMatrix::<C64>::zeros(dim, dim);
        for cols in &factors {
            for v in cols {
                for c in 0..dim {
                    let vc = v[c].conj();
                    for r in 0..dim {
                        g[(r, c)] += v[r] * vc;
                    }
                }
            }
        }
        let (values, vectors) = hermitian_eigen(&g);
        let top = values.first().copied().unwrap_or(0.0);
        if !(top > 0.0) {
            return None;
        }
        let rank = values.iter().take_while(|&&l| l > top * 1e-12).count();
        let whitener = DMatrix::from_fn(dim, rank, |r, c| vectors[(r, c)] / values[c].sqrt());
        let colorer = DMatrix::from_fn(rank, dim, |r, c| vectors[(c, r)].conj() * values[r].sqrt());

        let total = counts.total() as f64;
        let observed: Vec<usize> = (0..counts.len()).filter(|&j| counts.counts()[j] > 0).collect();
        let mut features = DMatrix::<f64>::zeros(rank * rank, observed.len());
        let mut w = vec![C64::new(0.0, 0.0); rank];
        for (t, &j) in observed.iter().enumerate() {
            let mut op = DMatrix::<C64>::zeros(rank, rank);
            for v in &factors[j] {
                for (a, wa) in w.iter_mut().enumerate() {
                    *wa = (0..dim).map(|r| whitener[(r, a)].conj() * v[r]).sum();
                }
                for b in 0..rank {
                    let wb = w[b].conj();
                    for a in 0..rank {
                        op[(a, b)] += w[a] * wb;
                    }
                }
            }
            if !(op.trace().re > 1e-300) {
                return None;
            }
            features.column_mut(t).copy_from(&to_real(&op));
        }
        let counts_f: Vec<f64> = observed.iter().map(|&j| counts.counts()[j] as f64).collect();
        let frequencies = DVector::from_iterator(observed.len(), counts_f.iter().map(|n| n / total));
        Some(WhitenedProblem { rank, total, whitener, colorer, counts: counts_f, frequencies, features })
    }

    fn whiten(&self, rho: &DensityMatrix) -> DMatrix<C64> {
        let s = &self.colorer * rho.matrix().inner() * self.colorer.adjoint();
        normalize(hermitize(s))
    }

    fn unwhiten(&self, sigma: &DMatrix<C64>) -> DensityMatrix {
        let rho = &self.whitener * sigma * self.whitener.adjoint();
        DensityMatrix::from_positive_unnormalized(ComplexMatrix::from_inner(rho).expect("square"))
    }

    fn probabilities(&self, sigma: &DMatrix<C64>) -> DVector<f64> {
        self.features.tr_mul(&to_real(sigma))
    }

    fn log_likelihood(&self, probs: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (&n, &p) in self.counts.iter().zip(probs.iter()) {
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += n * p.ln();
        }
        acc
    }

    /// `R = Σ_j f_j Π'_j / p̃_j`
    fn gradient_operator(&self, probs: &DVector<f64>) -> DMatrix<C64> {
        let weights = self.frequencies.component_div(probs);
        from_real(&(&self.features * weights), self.rank)
    }
}

fn to_real(m: &DMatrix<C64>) -> DVector<f64> {
    let r = m.nrows();
    let mut out = DVector::<f64>::zeros(r * r);
    let mut k = r;
    for a in 0..r {
        out[a] = m[(a, a)].re;
        for b in a + 1..r {
            let z = m[(a, b)];
            out[k] = SQRT_2 * z.re;
            out[k + 1] = SQRT_2 * z.im;
            k += 2;
        }
    }
    out
}

fn from_real(x: &DVector<f64>, r: usize) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(r, r);
    let mut k = r;
    for a in 0..r {
        m[(a, a)] = C64::new(x[a], 0.0);
        for b in a + 1..r {
            let z = C64::new(x[k], x[k + 1]) / SQRT_2;
            m[(a, b)] = z;
            m[(b, a)] = z.conj();
            k += 2;
        }
    }
    m
}

/// Euclidean projection of a Hermitian matrix onto the unit-trace positive
/// cone: eigenvalues are projected onto the probability simplex.
fn project_to_states(m: DMatrix<C64>) -> DMatrix<C64> {
    let (values, vectors) = hermitian_eigen(&m);
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &l) in values.iter().enumerate() {
        cumulative += l;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if l - candidate > 0.0 {
            shift = candidate;
        }
    }
    let weights: Vec<f64> = values.iter().map(|&l| (l - shift).max(0.0)).collect();
    let n = values.len();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let v = vectors.column(k);
        for c in 0..n {
            let vc = v[c].conj() * w;
            for r in 0..n {
                out[(r, c)] += v[r] * vc;
            }
        }
    }
    normalize(hermitize(out))
}

/// `Re tr(A B)` for Hermitian `A`, `B`.
fn real_inner(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum::<f64>()
}

fn frobenius_sqr(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn normalize(m: DMatrix<C64>) -> DMatrix<C64> {
    let tr = m.trace().re;
    m / C64::new(tr, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{generate_pom, sample_counts, RngStreams, StreamPurpose};
    use crate::quantum::{coherent_state, fock_state, fidelity, POMOutcome};
    use rand::Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn full(dim: usize) -> SubspaceMask {
        SubspaceMask::full(dim)
    }

    #[test]
    fn real_inner_is_trace_of_product() {
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0), C64::new(0.5, 0.3), C64::new(0.5, -0.3), c(-2.0)]);
        let b = DMatrix::from_row_slice(2, 2, &[c(0.2), C64::new(-0.1, 0.7), C64::new(-0.1, -0.7), c(0.4)]);
        let expected = (&a * &b).trace().re;
        assert!((real_inner(&a, &b) - expected).abs() < 1e-15);
    }

    #[test]
    fn dim_one_estimate_is_trivial() {
        let pom = POMSet::new(vec![
            POMOutcome::rank_one(vec![c(0.6), c(0.8)]).unwrap(),
            POMOutcome::rank_one(vec![c(0.8), c(-0.6)]).unwrap(),
        ])
        .unwrap();
        let mask = SubspaceMask::new(2, vec![1]).unwrap();
        let reduced = restrict_pom(&pom, &mask).unwrap();
        let counts = CountData::from_counts(vec![30, 70]).unwrap();
        let res = ml_estimate(&reduced, &counts, &MLConfig::default()).unwrap();
        assert_eq!(res.estimator.get(0, 0), c(1.0));
        // p̃ = (0.64, 0.36) / 1
        let expected = 30.0 * 0.64_f64.ln() + 70.0 * 0.36_f64.ln();
        assert!((res.log_likelihood - expected).abs() < 1e-9);
        assert!(res.converged);
    }

    #[test]
    fn single_outcome_likelihood_is_zero() {
        let pom = POMSet::new(vec![POMOutcome::rank_one(vec![c(0.6), c(0.8)]).unwrap()]).unwrap();
        let reduced = restrict_pom(&pom, &full(2)).unwrap();
        let counts = CountData::from_counts(vec![17]).unwrap();
        let ll = log_likelihood(&DensityMatrix::maximally_mixed(2), &reduced, &counts).unwrap();
        assert!(ll.abs() < 1e-12);
    }

    #[test]
    fn classical_two_outcome_maximum() {
        let pom = POMSet::new(vec![
            POMOutcome::rank_one(vec![c(1.0), c(0.0)]).unwrap(),
            POMOutcome::rank_one(vec![c(0.0), c(1.0)]).unwrap(),
        ])
        .unwrap();
        let reduced = restrict_pom(&pom, &full(2)).unwrap();
        let (n, total) = (300u64, 1000u64);
        let counts = CountData::from_counts(vec![n, total - n]).unwrap();
        let res = ml_estimate(&reduced, &counts, &MLConfig::default()).unwrap();
        let f = n as f64 / total as f64;
        let expected = total as f64 * (f * f.ln() + (1.0 - f) * (1.0 - f).ln());
        assert!((res.log_likelihood - expected).abs() < 1e-6, "{} vs {expected}", res.log_likelihood);
        assert!((res.estimator.get(0, 0).re - f).abs() < 1e-6);
    }

    #[test]
    fn likelihood_respects_entropy_bound() {
        let streams = RngStreams::new(21);
        let mut rng = streams.stream(StreamPurpose::Pom, 0);
        for i in 0..30 {
            let dim = rng.random_range(2..6);
            let pom = generate_pom(rng.random_range(2..20), dim, &mut rng).unwrap();
            let truth = DensityMatrix::pure(&crate::measurement::haar_random_ket(dim, &mut rng).unwrap());
            let counts = sample_counts(&truth, &pom, 5000, &mut streams.stream(StreamPurpose::Counts, i)).unwrap();
            let bound: f64 = counts
                .counts()
                .iter()
                .filter(|&&n| n > 0)
                .map(|&n| n as f64 * (n as f64 / counts.total() as f64).ln())
                .sum();
            let reduced = restrict_pom(&pom, &full(dim)).unwrap();
            let res = ml_estimate(&reduced, &counts, &MLConfig::default()).unwrap();
            assert!(res.log_likelihood <= bound + 1e-9);
        }
    }

    #[test]
    fn zero_probability_on_observed_outcome_is_negative_infinity() {
        let pom = POMSet::new(vec![
            POMOutcome::rank_one(vec![c(1.0), c(0.0)]).unwrap(),
            POMOutcome::rank_one(vec![c(0.0), c(1.0)]).unwrap(),
        ])
        .unwrap();
        let reduced = restrict_pom(&pom, &full(2)).unwrap();
        let counts = CountData::from_counts(vec![5, 5]).unwrap();
        let rho = DensityMatrix::pure(&fock_state(0, 2).unwrap());
        assert_eq!(log_likelihood(&rho, &reduced, &counts).unwrap(), f64::NEG_INFINITY);
        let zero_count = CountData::from_counts(vec![5, 0]).unwrap();
        assert!(log_likelihood(&rho, &reduced, &zero_count).unwrap().abs() < 1e-12);
    }

    #[test]
    fn unsupported_counts_flag_non_convergence() {
        let pom = POMSet::new(vec![
            POMOutcome::rank_one(vec![c(1.0), c(0.0), c(0.0)]).unwrap(),
            POMOutcome::rank_one(vec![c(0.0), c(1.0), c(0.0)]).unwrap(),
            POMOutcome::rank_one(vec![c(0.0), c(0.0), c(1.0)]).unwrap(),
        ])
        .unwrap();
        let mask = SubspaceMask::new(3, vec![0, 1]).unwrap();
        let reduced = restrict_pom(&pom, &mask).unwrap();
        let counts = CountData::from_counts(vec![3, 4, 5]).unwrap();
        let res = ml_estimate(&reduced, &counts, &MLConfig::default()).unwrap();
        assert_eq!(res.log_likelihood, f64::NEG_INFINITY);
        assert!(!res.converged);
    }

    #[test]
    fn exact_recovery_from_noiseless_data() {
        let streams = RngStreams::new(31);
        let pom = generate_pom(60, 6, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let mask = SubspaceMask::new(6, vec![1, 2, 4]).unwrap();
        let ket = crate::quantum::Ket::normalized(vec![c(0.0), c(0.6), C64::new(0.0, 0.48), c(0.0), c(0.64), c(0.0)]).unwrap();
        let truth = DensityMatrix::pure(&ket);
        let counts = crate::measurement::expected_counts(&truth, &pom, 10_000_000).unwrap();
        let reduced = restrict_pom(&pom, &mask).unwrap();
        let res = ml_estimate(&reduced, &counts, &MLConfig::default()).unwrap();
        let embedded = res.estimator.embed(&mask).unwrap();
        let f = fidelity(&embedded, &truth).unwrap();
        assert!(f >= 1.0 - 1e-6, "fidelity {f}");
        assert!(res.converged);
    }

    #[test]
    fn iterates_stay_physical_and_ascend() {
        let streams = RngStreams::new(41);
        let mut rng = streams.stream(StreamPurpose::Pom, 0);
        for i in 0..20 {
            let dim = rng.random_range(2..7);
            let pom = generate_pom(40, 8, &mut rng).unwrap();
            let truth = DensityMatrix::pure(&coherent_state(C64::new(1.0, 0.3), 8).unwrap());
            let counts = sample_counts(&truth, &pom, 100_000, &mut streams.stream(StreamPurpose::Counts, i)).unwrap();
            let mask = SubspaceMask::new(8, (0..dim).collect()).unwrap();
            let reduced = restrict_pom(&pom, &mask).unwrap();
            let mut last = f64::NEG_INFINITY;
            let res = ml_estimate_observed(&reduced, &counts, &MLConfig::default(), |it| {
                assert!(DensityMatrix::new(it.rho.matrix().clone()).is_ok());
                assert!(it.log_likelihood >= last - 1e-9, "{} < {last}", it.log_likelihood);
                let direct = log_likelihood(it.rho, &reduced, &counts).unwrap();
                assert!((direct - it.log_likelihood).abs() <= 1e-9 * direct.abs());
                last = it.log_likelihood;
            })
            .unwrap();
            assert!(res.converged);
        }
    }
}
