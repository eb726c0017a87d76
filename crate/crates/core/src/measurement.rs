//! Simulated measurement schemes, Monte Carlo count data and fold splits.

use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::quantum::{born_probability, ComplexMatrix, DensityMatrix, Ket, POMOutcome, SubspaceMask};

/// What a random stream is used for. Each purpose gets its own independent
/// stream so that changing one stage of a run leaves the others untouched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Pom = 1,
    Counts = 2,
    Folds = 3,
    Bootstrap = 4,
}

/// Counter-based random streams derived from one 64-bit seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream `index` of the given purpose. `index` must stay below 2^48.
    pub fn stream(&self, purpose: StreamPurpose, index: u64) -> ChaCha20Rng {
        debug_assert!(index < 1 << 48);
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(((purpose as u64) << 48) | index);
        rng
    }
}

/// A list of measurement outcomes sharing one dimension. The outcomes need
/// not sum to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct POMSet {
    dim: usize,
    outcomes: Vec<POMOutcome>,
}

impl POMSet {
    pub fn new(outcomes: Vec<POMOutcome>) -> Result<Self> {
        let dim = outcomes
            .first()
            .map(POMOutcome::dim)
            .ok_or_else(|| Error::InvalidDimension("measurement with no outcomes".into()))?;
        if let Some(bad) = outcomes.iter().find(|o| o.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
        }
        Ok(POMSet { dim, outcomes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn outcomes(&self) -> &[POMOutcome] {
        &self.outcomes
    }

    /// `Σ_j Π_j`
    pub fn sum(&self) -> ComplexMatrix {
        let mut acc = nalgebra::DMatrix::<C64>::zeros(self.dim, self.dim);
        for o in &self.outcomes {
            acc += o.matrix().inner();
        }
        ComplexMatrix::from_inner(acc).expect("square")
    }

    /// Outcomes at the given positions, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<POMSet> {
        let outcomes = indices
            .iter()
            .map(|&i| {
                self.outcomes.get(i).cloned().ok_or(Error::DimensionMismatch { expected: self.len(), found: i })
            })
            .collect::<Result<Vec<_>>>()?;
        POMSet::new(outcomes)
    }

    /// Restricts every outcome to the coordinate subspace `mask`.
    pub fn restrict(&self, mask: &SubspaceMask) -> Result<POMSet> {
        let outcomes = self.outcomes.iter().map(|o| o.restrict(mask)).collect::<Result<Vec<_>>>()?;
        Ok(POMSet { dim: mask.len(), outcomes })
    }

    /// `Π_j → U† Π_j U`
    pub fn transform(&self, unitary: &ComplexMatrix) -> Result<POMSet> {
        let outcomes = crate::quantum::transform_pom(&self.outcomes, unitary)?;
        Ok(POMSet { dim: self.dim, outcomes })
    }

    /// Born probabilities `tr(ρ Π_j)`, not normalized.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.outcomes.iter().map(|o| born_probability(rho, o)).collect()
    }

    /// Born probabilities normalized over the whole set.
    pub fn normalized_probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        let mut p = self.probabilities(rho)?;
        let total: f64 = p.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroTotalProbability);
        }
        p.iter_mut().for_each(|x| *x /= total);
        Ok(p)
    }
}

/// Event counts `n_j` per outcome, with `Σ n_j = N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountData {
    counts: Vec<u64>,
    total: u64,
}

impl CountData {
    pub fn new(counts: Vec<u64>, total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::config("count data must record at least one event"));
        }
        let sum: u64 = counts.iter().sum();
        if sum != total {
            return Err(Error::config(format!("counts sum to {sum}, declared total is {total}")));
        }
        Ok(CountData { counts, total })
    }

    /// Total is taken as the sum of `counts`.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total = counts.iter().sum();
        Self::new(counts, total)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Relative frequencies `n_j / N`.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Counts at the given positions; the total becomes their sum.
    pub fn subset(&self, indices: &[usize]) -> Result<CountData> {
        let counts = indices.iter().map(|&i| self.counts[i]).collect();
        CountData::from_counts(counts)
    }
}

/// Partition of outcome indices `0..M` into `K` equal folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    /// Checks that the folds are equal-sized and partition `0..count`.
    pub fn new(count: usize, mut folds: Vec<Vec<usize>>) -> Result<Self> {
        if folds.len() < 2 {
            return Err(Error::config("cross-validation needs at least two folds"));
        }
        let size = folds[0].len();
        if folds.iter().any(|f| f.len() != size) || size * folds.len() != count {
            return Err(Error::UnevenFolds { count, folds: folds.len() });
        }
        let mut seen = vec![false; count];
        for &i in folds.iter().flatten() {
            if i >= count || seen[i] {
                return Err(Error::config(format!("fold index {i} repeated or out of range")));
            }
            seen[i] = true;
        }
        folds.iter_mut().for_each(|f| f.sort_unstable());
        Ok(FoldSplit { folds })
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn num_folds(&self) -> usize {
        self.folds.len()
    }

    pub fn outcome_count(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// Every index outside fold `k`, ascending.
    pub fn training_indices(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> =
            self.folds.iter().enumerate().filter(|&(i, _)| i != k).flat_map(|(_, f)| f.iter().copied()).collect();
        idx.sort_unstable();
        idx
    }
}

/// Haar-random pure state: a normalized vector of i.i.d. standard complex
/// Gaussians.
pub fn haar_random_ket<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Ket> {
    if dim == 0 {
        return Err(Error::InvalidDimension("ket of dimension 0".into()));
    }
    let amps = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re, im)
        })
        .collect();
    Ket::normalized(amps)
}

/// `count` rank-one projectors onto independent Haar-random kets.
pub fn generate_pom<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Result<POMSet> {
    if count == 0 {
        return Err(Error::config("a measurement needs at least one outcome"));
    }
    if dim < 2 {
        return Err(Error::InvalidDimension(format!("measurement dimension {dim} < 2")));
    }
    let outcomes = (0..count)
        .map(|_| haar_random_ket(dim, rng).map(|k| POMOutcome::RankOne(k.into_amplitudes())))
        .collect::<Result<Vec<_>>>()?;
    POMSet::new(outcomes)
}

/// Multinomial sample of `total` events over the normalized probabilities
/// `q_j = tr(ρΠ_j) / Σ_k tr(ρΠ_k)`.
pub fn sample_counts<R: Rng + ?Sized>(
    true_state: &DensityMatrix,
    pom: &POMSet,
    total: u64,
    rng: &mut R,
) -> Result<CountData> {
    if true_state.dim() != pom.dim() {
        return Err(Error::DimensionMismatch { expected: pom.dim(), found: true_state.dim() });
    }
    let q = pom.normalized_probabilities(true_state)?;
    sample_multinomial(&q, total, rng)
}

/// Draws multinomial counts by sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(probabilities: &[f64], total: u64, rng: &mut R) -> Result<CountData> {
    let mut counts = vec![0u64; probabilities.len()];
    let mut remaining = total;
    let mut mass: f64 = probabilities.iter().sum();
    for (j, &p) in probabilities.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if j + 1 == probabilities.len() {
            counts[j] = remaining;
            break;
        }
        let ratio = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, ratio).map_err(|e| Error::config(e.to_string()))?.sample(rng);
        counts[j] = draw;
        remaining -= draw;
        mass -= p;
    }
    CountData::new(counts, total)
}

/// Noiseless data: `N q_j` rounded by largest remainder so the counts still
/// sum to `N`.
pub fn expected_counts(true_state: &DensityMatrix, pom: &POMSet, total: u64) -> Result<CountData> {
    if true_state.dim() != pom.dim() {
        return Err(Error::DimensionMismatch { expected: pom.dim(), found: true_state.dim() });
    }
    let q = pom.normalized_probabilities(true_state)?;
    let exact: Vec<f64> = q.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &j in order.iter().take(total.saturating_sub(assigned) as usize) {
        counts[j] += 1;
    }
    CountData::new(counts, total)
}

/// Uniformly random partition of `0..count` into `folds` equal parts.
pub fn split_folds<R: Rng + ?Sized>(count: usize, folds: usize, rng: &mut R) -> Result<FoldSplit> {
    if folds < 2 {
        return Err(Error::config("cross-validation needs at least two folds"));
    }
    if count == 0 || !count.is_multiple_of(folds) {
        return Err(Error::UnevenFolds { count, folds });
    }
    let mut idx: Vec<usize> = (0..count).collect();
    idx.shuffle(rng);
    let size = count / folds;
    FoldSplit::new(count, idx.chunks(size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{coherent_state, fock_state};

    #[test]
    fn one_dimensional_haar_ket_is_a_phase() {
        let mut rng = RngStreams::new(1).stream(StreamPurpose::Pom, 0);
        let k = haar_random_ket(1, &mut rng).unwrap();
        assert!((k.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn haar_ket_is_seed_deterministic() {
        let s = RngStreams::new(42);
        let a = haar_random_ket(16, &mut s.stream(StreamPurpose::Pom, 0)).unwrap();
        let b = haar_random_ket(16, &mut s.stream(StreamPurpose::Pom, 0)).unwrap();
        assert_eq!(a, b);
        let c = haar_random_ket(16, &mut s.stream(StreamPurpose::Counts, 0)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn haar_second_moment() {
        let mut rng = RngStreams::new(7).stream(StreamPurpose::Pom, 0);
        let draws = 10_000;
        let xs: Vec<f64> = (0..draws).map(|_| haar_random_ket(16, &mut rng).unwrap().amplitudes()[0].norm_sqr()).collect();
        let mean = xs.iter().sum::<f64>() / draws as f64;
        // |c_0|² ~ Beta(1, 15): variance = 15 / (16² · 17)
        let sigma = (15.0 / (256.0 * 17.0) / draws as f64).sqrt();
        assert!((mean - 1.0 / 16.0).abs() < 3.0 * sigma, "mean {mean}");
    }

    /// Two-sample Kolmogorov-Smirnov statistic.
    fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn haar_components_are_exchangeable() {
        let mut rng = RngStreams::new(8).stream(StreamPurpose::Pom, 0);
        let draws = 10_000;
        let mut sample = |k: usize| -> Vec<f64> {
            (0..draws).map(|_| haar_random_ket(8, &mut rng).unwrap().amplitudes()[k].norm_sqr()).collect()
        };
        let mut first = sample(0);
        // critical value at significance 0.01 for equal sample sizes
        let critical = 1.628 * (2.0 / draws as f64).sqrt();
        for k in 1..8 {
            let mut other = sample(k);
            let d = ks_statistic(&mut first, &mut other);
            assert!(d < critical, "component {k}: D = {d}");
        }
    }

    #[test]
    fn generated_outcomes_are_unit_trace_projectors() {
        let mut rng = RngStreams::new(3).stream(StreamPurpose::Pom, 0);
        let pom = generate_pom(1000, 16, &mut rng).unwrap();
        assert_eq!(pom.len(), 1000);
        for o in pom.outcomes().iter().take(50) {
            assert!((o.trace() - 1.0).abs() < 1e-12);
            let m = o.matrix();
            assert!(m.mul(&m).max_abs_diff(&m) < 1e-10);
        }
        let single = generate_pom(1, 4, &mut rng).unwrap();
        assert!((single.sum().trace().re - 1.0).abs() < 1e-12);
        assert!(generate_pom(3, 1, &mut rng).is_err());
    }

    #[test]
    fn haar_average_concentrates() {
        let mut rng = RngStreams::new(4).stream(StreamPurpose::Pom, 0);
        let (m, d) = (3200, 16);
        let pom = generate_pom(m, d, &mut rng).unwrap();
        let scaled = ComplexMatrix::from_inner(pom.sum().into_inner() * C64::new(d as f64 / m as f64, 0.0)).unwrap();
        for l in scaled.eigenvalues() {
            assert!(l > 0.5 && l < 1.5, "eigenvalue {l}");
        }
    }

    #[test]
    fn sampling_preserves_total_and_tracks_probabilities() {
        let streams = RngStreams::new(10);
        let pom = generate_pom(50, 8, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let rho = DensityMatrix::pure(&coherent_state(C64::new(1.0, 0.5), 8).unwrap());

        let big = sample_counts(&rho, &pom, 10_000_000, &mut streams.stream(StreamPurpose::Counts, 0)).unwrap();
        assert_eq!(big.counts().iter().sum::<u64>(), 10_000_000);

        let n = 1_000_000u64;
        let data = sample_counts(&rho, &pom, n, &mut streams.stream(StreamPurpose::Counts, 1)).unwrap();
        let q = pom.normalized_probabilities(&rho).unwrap();
        for (j, &c) in data.counts().iter().enumerate() {
            let sd = (q[j] * (1.0 - q[j]) / n as f64).sqrt();
            assert!((c as f64 / n as f64 - q[j]).abs() < 5.0 * sd + 1e-12, "outcome {j}");
        }

        let again = sample_counts(&rho, &pom, n, &mut streams.stream(StreamPurpose::Counts, 1)).unwrap();
        assert_eq!(data, again);

        let one = generate_pom(1, 8, &mut streams.stream(StreamPurpose::Pom, 1)).unwrap();
        assert_eq!(sample_counts(&rho, &one, 1234, &mut streams.stream(StreamPurpose::Counts, 2)).unwrap().counts(), &[1234]);
    }

    #[test]
    fn zero_overlap_is_an_error() {
        let pom = POMSet::new(vec![POMOutcome::rank_one(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap()]).unwrap();
        let rho = DensityMatrix::pure(&fock_state(1, 2).unwrap());
        let mut rng = RngStreams::new(0).stream(StreamPurpose::Counts, 0);
        assert!(matches!(sample_counts(&rho, &pom, 10, &mut rng), Err(Error::ZeroTotalProbability)));
    }

    #[test]
    fn expected_counts_sum_exactly() {
        let streams = RngStreams::new(12);
        let pom = generate_pom(37, 6, &mut streams.stream(StreamPurpose::Pom, 0)).unwrap();
        let rho = DensityMatrix::pure(&fock_state(1, 6).unwrap());
        let data = expected_counts(&rho, &pom, 10_000_001).unwrap();
        assert_eq!(data.total(), 10_000_001);
        let q = pom.normalized_probabilities(&rho).unwrap();
        for (c, p) in data.counts().iter().zip(&q) {
            assert!((*c as f64 - p * 10_000_001.0).abs() <= 1.0);
        }
    }

    #[test]
    fn counts_invariant_enforced() {
        assert!(CountData::new(vec![1, 2], 4).is_err());
        assert!(CountData::new(vec![0, 0], 0).is_err());
        assert!(CountData::new(vec![1, 3], 4).is_ok());
    }

    #[test]
    fn fold_splits() {
        let streams = RngStreams::new(5);
        let split = split_folds(4, 2, &mut streams.stream(StreamPurpose::Folds, 0)).unwrap();
        assert_eq!(split.num_folds(), 2);
        let mut all: Vec<usize> = split.folds().iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);

        let big = split_folds(1000, 2, &mut streams.stream(StreamPurpose::Folds, 1)).unwrap();
        assert!(big.folds().iter().all(|f| f.len() == 500));
        let again = split_folds(1000, 2, &mut streams.stream(StreamPurpose::Folds, 1)).unwrap();
        assert_eq!(big, again);
        assert_eq!(big.training_indices(0), big.folds()[1]);

        assert!(matches!(split_folds(5, 2, &mut streams.stream(StreamPurpose::Folds, 0)), Err(Error::UnevenFolds { .. })));
        assert!(split_folds(4, 1, &mut streams.stream(StreamPurpose::Folds, 0)).is_err());
    }
}
