//! Finite-dimensional operator algebra on a truncated Fock space.
//!
//! Everything here is a pure function on immutable values. Matrices are
//! dense and complex; the dimensions involved (a few dozen at most) make
//! that the right trade-off.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Numerical tolerances shared by every validity check in the crate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub hermitian: f64,
    pub psd: f64,
    pub trace: f64,
    pub norm: f64,
    pub unitary: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian: 1e-12,
        psd: 1e-10,
        trace: 1e-10,
        norm: 1e-12,
        unitary: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        ComplexMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix(DMatrix::from_fn(dim, dim, f))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        Ok(ComplexMatrix(DMatrix::from_row_slice(dim, dim, entries)))
    }

    /// `|v⟩⟨v|`
    pub fn outer(v: &[C64]) -> Self {
        let n = v.len();
        ComplexMatrix::from_fn(n, |r, c| v[r] * v[c].conj())
    }

    pub fn from_inner(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidDimension(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(ComplexMatrix(m))
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix(self.0.adjoint())
    }

    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &other.0)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Row-major copy of the entries.
    pub fn row_major(&self) -> Vec<C64> {
        let n = self.dim();
        (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| self.0[(r, c)]).collect()
    }

    /// Largest `|A_rc - conj(A_cr)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self.0[(r, c)] - self.0[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// `(A + A†) / 2`
    pub fn hermitian_part(&self) -> ComplexMatrix {
        ComplexMatrix((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, in decreasing order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.0).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    /// Largest deviation of `A†A` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        let prod = self.0.adjoint() * &self.0;
        let id = DMatrix::<C64>::identity(n, n);
        prod.iter().zip(id.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ComplexMatrix({}x{}) {:?}", self.dim(), self.dim(), self.row_major())
    }
}

/// Eigen-decomposition of the Hermitian part of `m`, sorted by decreasing
/// eigenvalue. Columns of the returned matrix are the eigenvectors.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    /// Validates the Hermiticity, positivity and trace invariants.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::DEFAULT)
    }

    pub fn with_tolerances(matrix: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let kind = "density matrix";
        if matrix.dim() == 0 {
            return Err(Error::InvalidDimension("density matrix of dimension 0".into()));
        }
        let herm = matrix.hermiticity_error();
        if herm > tol.hermitian {
            return Err(Error::InvalidOperator { kind, reason: format!("hermiticity error {herm:.3e}") });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol.trace || tr.im.abs() > tol.trace {
            return Err(Error::InvalidOperator { kind, reason: format!("trace {tr}") });
        }
        let min = matrix.min_eigenvalue();
        if min < -tol.psd {
            return Err(Error::InvalidOperator { kind, reason: format!("eigenvalue {min:.3e}") });
        }
        Ok(DensityMatrix(matrix))
    }

    /// Hermitizes and trace-normalizes a matrix assumed to be positive.
    pub(crate) fn from_positive_unnormalized(matrix: ComplexMatrix) -> Self {
        let h = matrix.hermitian_part();
        let tr = h.trace().re;
        DensityMatrix(ComplexMatrix(h.0 / C64::new(tr, 0.0)))
    }

    pub fn pure(ket: &Ket) -> Self {
        DensityMatrix(ComplexMatrix::outer(ket.amplitudes()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(ComplexMatrix(DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0.get(row, col)
    }

    /// Zero-pads a state living on `mask` into the full `mask.limit_dim()` space.
    pub fn embed(&self, mask: &SubspaceMask) -> Result<DensityMatrix> {
        if mask.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: mask.len(), found: self.dim() });
        }
        let n = mask.limit_dim();
        let mut full = DMatrix::<C64>::zeros(n, n);
        for (a, &r) in mask.indices().iter().enumerate() {
            for (b, &c) in mask.indices().iter().enumerate() {
                full[(r, c)] = self.get(a, b);
            }
        }
        Ok(DensityMatrix(ComplexMatrix(full)))
    }

    /// `U ρ U†`
    pub fn transformed(&self, unitary: &ComplexMatrix) -> Result<DensityMatrix> {
        check_dims(self.dim(), unitary.dim())?;
        let m = unitary.mul(&self.0).mul(&unitary.adjoint());
        Ok(DensityMatrix(m.hermitian_part()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.diagonal().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }
}

/// Unit-norm state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket(Vec<C64>);

impl Ket {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension("ket of dimension 0".into()));
        }
        let norm = vector_norm(&amplitudes);
        if (norm - 1.0).abs() > Tolerances::DEFAULT.norm {
            return Err(Error::InvalidOperator { kind: "ket", reason: format!("norm {norm}") });
        }
        Ok(Ket(amplitudes))
    }

    /// Rescales to unit norm.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension("ket of dimension 0".into()));
        }
        let norm = vector_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidOperator { kind: "ket", reason: format!("norm {norm}") });
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Ket(amplitudes))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.0
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.0
    }

    /// `Σ n |c_n|²`
    pub fn mean_photon_number(&self) -> f64 {
        self.0.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum()
    }
}

fn vector_norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_limit_dim(limit_dim: usize) -> Result<()> {
    if limit_dim < 1 {
        return Err(Error::InvalidDimension("limit dimension must be at least 1".into()));
    }
    Ok(())
}

/// Unnormalized coherent amplitudes `α^n / √(n!)`, built by recursion.
fn coherent_amplitudes(alpha: C64, limit_dim: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(limit_dim);
    let mut c = C64::new(1.0, 0.0);
    for n in 0..limit_dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        amps.push(c);
    }
    amps
}

/// Coherent state `|α⟩` truncated to the first `limit_dim` Fock states and
/// renormalized.
pub fn coherent_state(alpha: C64, limit_dim: usize) -> Result<Ket> {
    check_limit_dim(limit_dim)?;
    Ket::normalized(coherent_amplitudes(alpha, limit_dim))
}

/// Even coherent state `N(|α⟩ + |−α⟩)`, truncated and renormalized.
/// Odd Fock amplitudes are exactly zero.
pub fn even_coherent_state(alpha: C64, limit_dim: usize) -> Result<Ket> {
    check_limit_dim(limit_dim)?;
    let mut amps = coherent_amplitudes(alpha, limit_dim);
    for (n, a) in amps.iter_mut().enumerate() {
        if n % 2 == 1 {
            *a = C64::new(0.0, 0.0);
        }
    }
    Ket::normalized(amps)
}

/// Fock state `|n⟩` in a space of dimension `limit_dim`.
pub fn fock_state(n: usize, limit_dim: usize) -> Result<Ket> {
    check_limit_dim(limit_dim)?;
    if n >= limit_dim {
        return Err(Error::InvalidDimension(format!(
            "Fock index {n} outside a space of dimension {limit_dim}"
        )));
    }
    let mut amps = vec![C64::new(0.0, 0.0); limit_dim];
    amps[n] = C64::new(1.0, 0.0);
    Ok(Ket(amps))
}

/// One outcome of a probability operator measurement.
///
/// Rank-one outcomes keep their (not necessarily normalized) vector so that
/// restriction and probability evaluation stay cheap and so that files
/// round-trip exactly.
#[derive(Clone, Debug, PartialEq)]
pub enum POMOutcome {
    /// `|v⟩⟨v|`
    RankOne(Vec<C64>),
    General(ComplexMatrix),
}

impl POMOutcome {
    pub fn rank_one(vector: Vec<C64>) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::InvalidDimension("outcome of dimension 0".into()));
        }
        if vector.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidOperator { kind: "outcome", reason: "non-finite entry".into() });
        }
        Ok(POMOutcome::RankOne(vector))
    }

    /// Validates Hermiticity and positivity.
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        Self::from_matrix_with(matrix, Tolerances::DEFAULT.hermitian, Tolerances::DEFAULT.psd)
    }

    pub fn from_matrix_with(matrix: ComplexMatrix, hermitian_tol: f64, psd_tol: f64) -> Result<Self> {
        let kind = "outcome";
        if matrix.dim() == 0 {
            return Err(Error::InvalidDimension("outcome of dimension 0".into()));
        }
        let herm = matrix.hermiticity_error();
        if herm > hermitian_tol {
            return Err(Error::InvalidOperator { kind, reason: format!("hermiticity error {herm:.3e}") });
        }
        let min = matrix.min_eigenvalue();
        if min < -psd_tol {
            return Err(Error::InvalidOperator { kind, reason: format!("eigenvalue {min:.3e}") });
        }
        Ok(POMOutcome::General(matrix))
    }

    pub fn dim(&self) -> usize {
        match self {
            POMOutcome::RankOne(v) => v.len(),
            POMOutcome::General(m) => m.dim(),
        }
    }

    pub fn matrix(&self) -> ComplexMatrix {
        match self {
            POMOutcome::RankOne(v) => ComplexMatrix::outer(v),
            POMOutcome::General(m) => m.clone(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            POMOutcome::RankOne(v) => v.iter().map(|c| c.norm_sqr()).sum(),
            POMOutcome::General(m) => m.trace().re,
        }
    }

    /// The outcome's principal submatrix on `mask`, in the same representation.
    pub fn restrict(&self, mask: &SubspaceMask) -> Result<POMOutcome> {
        check_dims(mask.limit_dim(), self.dim())?;
        Ok(match self {
            POMOutcome::RankOne(v) => POMOutcome::RankOne(mask.indices().iter().map(|&i| v[i]).collect()),
            POMOutcome::General(m) => POMOutcome::General(project_operator(m, mask)?),
        })
    }

    /// Columns `v_k` with `Π = Σ_k v_k v_k†`.
    pub fn factor(&self) -> Vec<Vec<C64>> {
        match self {
            POMOutcome::RankOne(v) => vec![v.clone()],
            POMOutcome::General(m) => {
                let (values, vectors) = hermitian_eigen(m.inner());
                let scale = values.first().copied().unwrap_or(0.0).max(0.0);
                values
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l > scale * 1e-14 && l > 0.0)
                    .map(|(k, &l)| vectors.column(k).iter().map(|c| c * l.sqrt()).collect())
                    .collect()
            }
        }
    }

    /// `U† Π U`
    pub fn transformed(&self, unitary: &ComplexMatrix) -> Result<POMOutcome> {
        check_dims(unitary.dim(), self.dim())?;
        Ok(match self {
            POMOutcome::RankOne(v) => {
                let v = DVector::from_column_slice(v);
                POMOutcome::RankOne((unitary.inner().adjoint() * v).iter().copied().collect())
            }
            POMOutcome::General(m) => {
                POMOutcome::General(unitary.adjoint().mul(m).mul(unitary).hermitian_part())
            }
        })
    }
}

/// Sorted set of basis indices selecting a coordinate subspace of a
/// `limit_dim`-dimensional space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubspaceMask {
    limit_dim: usize,
    indices: Vec<usize>,
}

impl SubspaceMask {
    /// Accepts indices in any order; rejects duplicates and out-of-range values.
    pub fn new(limit_dim: usize, mut indices: Vec<usize>) -> Result<Self> {
        if limit_dim == 0 {
            return Err(Error::InvalidMask("limit dimension must be positive".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidMask(format!("duplicate index in {indices:?}")));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= limit_dim) {
            return Err(Error::InvalidMask(format!("index {bad} outside dimension {limit_dim}")));
        }
        Ok(SubspaceMask { limit_dim, indices })
    }

    pub fn empty(limit_dim: usize) -> Self {
        SubspaceMask { limit_dim, indices: Vec::new() }
    }

    pub fn full(limit_dim: usize) -> Self {
        SubspaceMask { limit_dim, indices: (0..limit_dim).collect() }
    }

    pub fn limit_dim(&self) -> usize {
        self.limit_dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn is_subset_of(&self, other: &SubspaceMask) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.limit_dim).filter(|&i| !self.contains(i)).collect()
    }

    pub fn union(&self, other: &SubspaceMask) -> Result<SubspaceMask> {
        check_dims(self.limit_dim, other.limit_dim)?;
        let mut indices = self.indices.clone();
        indices.extend(other.indices.iter().filter(|&&i| !self.contains(i)));
        SubspaceMask::new(self.limit_dim, indices)
    }
}

impl fmt::Display for SubspaceMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// `Re tr(ρ Π)`, clamped at zero.
pub fn born_probability(rho: &DensityMatrix, outcome: &POMOutcome) -> Result<f64> {
    check_dims(rho.dim(), outcome.dim())?;
    let p = match outcome {
        POMOutcome::RankOne(v) => quadratic_form(rho.matrix().inner(), v),
        POMOutcome::General(m) => {
            let (a, b) = (rho.matrix().inner(), m.inner());
            let n = a.nrows();
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..n {
                for c in 0..n {
                    acc += a[(r, c)] * b[(c, r)];
                }
            }
            acc.re
        }
    };
    Ok(p.max(0.0))
}

/// `Re ⟨v|A|v⟩`
pub(crate) fn quadratic_form(a: &DMatrix<C64>, v: &[C64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for c in 0..n {
        let col = a.column(c);
        let mut s = C64::new(0.0, 0.0);
        for r in 0..n {
            s += v[r].conj() * col[r];
        }
        acc += (s * v[c]).re;
    }
    acc
}

/// Principal submatrix of `op` on the rows and columns in `mask`.
pub fn project_operator(op: &ComplexMatrix, mask: &SubspaceMask) -> Result<ComplexMatrix> {
    check_dims(mask.limit_dim(), op.dim())?;
    let idx = mask.indices();
    Ok(ComplexMatrix::from_fn(idx.len(), |r, c| op.get(idx[r], idx[c])))
}

/// Unitary whose columns are the eigenvectors of `target`, ordered by
/// decreasing eigenvalue.
///
/// Degenerate eigenspaces are spanned by Gram-Schmidt over the Fock vectors
/// projected into them, in increasing Fock order, and every column has its
/// first non-negligible component made real and positive. The result is
/// therefore independent of the eigen-solver's internal choices.
pub fn eigenbasis_unitary(target: &DensityMatrix) -> ComplexMatrix {
    const CLUSTER_TOL: f64 = 1e-9;
    let n = target.dim();
    let (values, vectors) = hermitian_eigen(target.matrix().inner());
    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(n);

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end - 1] - values[end]).abs() <= CLUSTER_TOL {
            end += 1;
        }
        if end - start == 1 {
            columns.push(vectors.column(start).into_owned());
        } else {
            let block = vectors.columns(start, end - start).into_owned();
            let projector = &block * block.adjoint();
            let mut found: Vec<DVector<C64>> = Vec::new();
            for k in 0..n {
                if found.len() == end - start {
                    break;
                }
                let mut v = projector.column(k).into_owned();
                for _ in 0..2 {
                    for u in &found {
                        let overlap = u.dotc(&v);
                        v -= u * overlap;
                    }
                }
                let norm = v.norm();
                if norm > 1e-6 {
                    found.push(v / C64::new(norm, 0.0));
                }
            }
            columns.extend(found);
        }
        start = end;
    }

    let mut u = DMatrix::<C64>::zeros(n, n);
    for (c, mut col) in columns.into_iter().enumerate() {
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-8).copied() {
            col *= lead.conj() / lead.norm();
        }
        u.set_column(c, &col);
    }
    ComplexMatrix(u)
}

/// Applies `Π_j → U† Π_j U` to every outcome.
pub fn transform_pom(pom: &[POMOutcome], unitary: &ComplexMatrix) -> Result<Vec<POMOutcome>> {
    let deviation = unitary.unitarity_error();
    if deviation > Tolerances::DEFAULT.unitary {
        return Err(Error::NotUnitary { deviation });
    }
    pom.iter().map(|o| o.transformed(unitary)).collect()
}

/// Uhlmann fidelity `(tr √(√a b √a))²`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    // √a b √a shares its nonzero spectrum with X† b X for a = X X†. Dropping
    // round-off eigenvalues of `a` keeps pure states exact.
    let (values, vectors) = hermitian_eigen(a.matrix().inner());
    let top = values.first().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..values.len()).filter(|&k| values[k] > top * 1e-13).collect();
    let x = DMatrix::from_fn(a.dim(), kept.len(), |r, c| vectors[(r, kept[c])] * values[kept[c]].sqrt());
    let m = x.adjoint() * b.matrix().inner() * &x;
    let (inner_values, _) = hermitian_eigen(&m);
    let inner_top = inner_values.first().copied().unwrap_or(0.0).max(0.0);
    let root: f64 = inner_values.iter().filter(|&&l| l > inner_top * 1e-13).map(|&l| l.sqrt()).sum();
    Ok(root * root)
}
