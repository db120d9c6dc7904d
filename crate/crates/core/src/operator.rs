//! Dense complex linear algebra on spin Hilbert spaces.
//!
//! Operators are stored as dense `dim × dim` complex matrices. Sites are
//! numbered from 1; site 1 is the leftmost tensor factor, so the basis index
//! of `n` spins reads `s_1 s_2 … s_n` in binary with `s_i = 0` for spin up.

use log::warn;
use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Default cap on the Hilbert space dimension (`2^13`).
pub const DEFAULT_DIM_CAP: usize = 1 << 13;

/// Entries of an operator flagged Hermitian match their conjugate transpose to
/// this absolute tolerance.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// A single-site (2×2) operator.
pub type LocalOperator = Matrix2<C64>;

/// Pauli matrices and the single-site identity.
pub mod pauli {
    use super::{LocalOperator, C64};

    pub fn identity() -> LocalOperator {
        LocalOperator::identity()
    }

    pub fn x() -> LocalOperator {
        let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
        LocalOperator::new(o, l, l, o)
    }

    pub fn y() -> LocalOperator {
        let o = C64::new(0.0, 0.0);
        LocalOperator::new(o, C64::new(0.0, -1.0), C64::new(0.0, 1.0), o)
    }

    pub fn z() -> LocalOperator {
        let o = C64::new(0.0, 0.0);
        LocalOperator::new(C64::new(1.0, 0.0), o, o, C64::new(-1.0, 0.0))
    }

    /// `(σ¹, σ², σ³)`.
    pub fn all() -> [LocalOperator; 3] {
        [x(), y(), z()]
    }
}

/// Dense square complex matrix with a Hermiticity certificate.
///
/// Operators built through [`HermitianOperator::new`] are symmetrized as
/// `(A + A†)/2`; products of Hermitian operators are kept as general
/// (non-Hermitian) operators with the flag cleared.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    entries: DMatrix<C64>,
    hermitian: bool,
}

impl HermitianOperator {
    /// Symmetrizes `m` and certifies the result as Hermitian.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        check_square(&m)?;
        let adj = m.adjoint();
        let correction = (&m - &adj).camax() / 2.0;
        if correction > HERMITICITY_TOL {
            warn!("symmetrizing operator with anti-Hermitian part of size {correction:e}");
        }
        let entries = (m + adj).scale(0.5);
        Ok(Self {
            entries,
            hermitian: true,
        })
    }

    /// Wraps an arbitrary square matrix; the Hermitian flag is set only if the
    /// matrix already is Hermitian within [`HERMITICITY_TOL`].
    pub fn general(m: DMatrix<C64>) -> Result<Self> {
        check_square(&m)?;
        let hermitian = (&m - m.adjoint()).camax() <= HERMITICITY_TOL;
        Ok(Self {
            entries: m,
            hermitian,
        })
    }

    pub(crate) fn from_parts(entries: DMatrix<C64>, hermitian: bool) -> Self {
        Self { entries, hermitian }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_parts(DMatrix::identity(dim, dim), true)
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_parts(DMatrix::zeros(dim, dim), true)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self::from_parts(m, true)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.camax()
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        for j in 0..n {
            for i in 0..n {
                if i != j && self.entries[(i, j)] != C64::new(0.0, 0.0) {
                    return false;
                }
            }
        }
        true
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_parts(self.entries.scale(s), self.hermitian)
    }

    /// `self − s·I`.
    pub fn shift(&self, s: f64) -> Self {
        let mut m = self.entries.clone();
        for i in 0..self.dim() {
            m[(i, i)] -= s;
        }
        Self::from_parts(m, self.hermitian)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::from_parts(
            &self.entries + &other.entries,
            self.hermitian && other.hermitian,
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::from_parts(
            &self.entries - &other.entries,
            self.hermitian && other.hermitian,
        ))
    }

    /// Operator product `self · other`, returned as a general operator.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Self::general(&self.entries * &other.entries)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_parts(self.entries.adjoint(), self.hermitian)
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<C64> {
        check_dims(self.dim(), other.dim())?;
        Ok(trace_of_product(&self.entries, &other.entries))
    }

    /// Entrywise distance `max |a_ij − b_ij|`.
    pub fn max_distance(&self, other: &Self) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok((&self.entries - &other.entries).camax())
    }
}

fn check_square(m: &DMatrix<C64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter("operator dimension must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(a, b));
    }
    Ok(())
}

pub(crate) fn trace_of_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    // Tr(AB) = Σ_ij A_ij B_ji; iterate B by columns for locality.
    for i in 0..n {
        let row_a = a.row(i);
        let col_b = b.column(i);
        for j in 0..n {
            acc += row_a[j] * col_b[j];
        }
    }
    acc
}

/// Sorted eigenvalues and the unitary of column eigenvectors of a Hermitian
/// operator: the projection-valued measure of the operator.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `i` is the eigenvector of `eigenvalues()[i]`.
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// Largest absolute eigenvalue, the operator norm.
    pub fn spectral_radius(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// `Σ_i w_i v_i v_i†`.
    pub fn compose(&self, weights: &[f64]) -> DMatrix<C64> {
        compose_columns(&self.eigenvectors, weights)
    }

    /// Columns of the eigenvectors whose eigenvalue satisfies `keep`.
    pub fn select_columns(&self, mut keep: impl FnMut(f64) -> bool) -> DMatrix<C64> {
        let idx: Vec<usize> = (0..self.dim())
            .filter(|&i| keep(self.eigenvalues[i]))
            .collect();
        self.eigenvectors.select_columns(idx.iter())
    }

    /// Diagonal of `state` in the eigenbasis: `⟨v_i|state|v_i⟩`, real part.
    ///
    /// `Σ_{i∈B}` of these weights is `Tr(state Q(B))` for the spectral
    /// projection `Q(B)`, whether or not `state` commutes with the operator.
    pub fn diagonal_weights(&self, state: &HermitianOperator) -> Vec<f64> {
        let v = &self.eigenvectors;
        let s = state.matrix();
        let n = self.dim();
        let zero = C64::new(0.0, 0.0);
        let supports: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&a| v[(a, i)] != zero).collect())
            .collect();
        let sparse_cost: usize = supports.iter().map(|s| s.len() * s.len()).sum();
        if sparse_cost > n * n * n / 8 {
            let w = mul_dense(s, v);
            return (0..n).map(|i| v.column(i).dotc(&w.column(i)).re).collect();
        }
        supports
            .iter()
            .enumerate()
            .map(|(i, nz)| {
                let col = v.column(i);
                let mut acc = zero;
                for &b in nz {
                    let mut inner = zero;
                    for &a in nz {
                        inner += col[a].conj() * s[(a, b)];
                    }
                    acc += inner * col[b];
                }
                acc.re
            })
            .collect()
    }

    /// `U diag(f(λ)) U†`; fails if `f` is not finite at some eigenvalue.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<HermitianOperator> {
        let mut w = Vec::with_capacity(self.dim());
        for &l in &self.eigenvalues {
            let v = f(l);
            if !v.is_finite() {
                return Err(Error::FunctionUndefined(l));
            }
            w.push(v);
        }
        Ok(HermitianOperator::from_parts(self.compose(&w), true))
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        HermitianOperator::from_parts(self.compose(&self.eigenvalues), true)
    }
}

/// `a · b`, iterating over the nonzeros of `a` when it is sparse.
pub(crate) fn mul_dense(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let zero = C64::new(0.0, 0.0);
    let mut nonzeros = Vec::new();
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            let v = a[(r, c)];
            if v != zero {
                nonzeros.push((r, c, v));
            }
        }
    }
    if nonzeros.len() * 8 > a.nrows() * a.ncols() {
        return a * b;
    }
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for j in 0..b.ncols() {
        let bj = b.column(j);
        let mut oj = out.column_mut(j);
        for &(r, c, v) in &nonzeros {
            oj[r] += v * bj[c];
        }
    }
    out
}

/// `Σ_i w_i c_i c_i†` over the columns `c_i` of `cols`.
///
/// Columns with few nonzero entries (eigenvectors of diagonal operators) are
/// accumulated sparsely; otherwise a dense product is used.
pub(crate) fn compose_columns(cols: &DMatrix<C64>, weights: &[f64]) -> DMatrix<C64> {
    let n = cols.nrows();
    let zero = C64::new(0.0, 0.0);
    let supports: Vec<Vec<usize>> = (0..cols.ncols())
        .map(|i| {
            if weights[i] == 0.0 {
                Vec::new()
            } else {
                (0..n).filter(|&a| cols[(a, i)] != zero).collect()
            }
        })
        .collect();
    let sparse_cost: usize = supports.iter().map(|s| s.len() * s.len()).sum();
    let active = weights.iter().filter(|&&w| w != 0.0).count();
    if sparse_cost <= n * n * active / 4 {
        let mut out = DMatrix::zeros(n, n);
        for (i, support) in supports.iter().enumerate() {
            let w = weights[i];
            for &b in support {
                let cb = cols[(b, i)].conj() * w;
                for &a in support {
                    out[(a, b)] += cols[(a, i)] * cb;
                }
            }
        }
        out
    } else {
        let idx: Vec<usize> = (0..cols.ncols()).filter(|&i| weights[i] != 0.0).collect();
        let sel = cols.select_columns(idx.iter());
        let mut scaled = sel.clone();
        for (j, &i) in idx.iter().enumerate() {
            scaled.column_mut(j).scale_mut(weights[i]);
        }
        scaled * sel.adjoint()
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// Diagonal inputs are decomposed directly (eigenvectors are standard basis
/// vectors); everything else goes through a dense Hermitian eigensolver.
/// Within a numerically degenerate cluster the eigenvectors are an arbitrary
/// orthonormal basis of the cluster.
pub fn eigh(a: &HermitianOperator) -> Result<SpectralDecomposition> {
    if !a.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let n = a.dim();
    let (values, vectors) = if a.is_diagonal() {
        let values: Vec<f64> = (0..n).map(|i| a.matrix()[(i, i)].re).collect();
        (values, DMatrix::identity(n, n))
    } else {
        let eig = SymmetricEigen::new(a.matrix().clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = vectors.select_columns(order.iter());
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `f(A) = U diag(f(λ)) U†`.
pub fn matrix_function(a: &HermitianOperator, f: impl Fn(f64) -> f64) -> Result<HermitianOperator> {
    eigh(a)?.apply(f)
}

/// Operator norm (largest singular value) of `AB − BA`.
pub fn commutator_norm(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let c = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    if c.camax() == 0.0 {
        return Ok(0.0);
    }
    if a.is_hermitian() && b.is_hermitian() {
        // [A, B] is anti-Hermitian, so i[A, B] is Hermitian with the same norm.
        let h = HermitianOperator::new(c.map(|z| z * C64::i()))?;
        Ok(eigh(&h)?.spectral_radius())
    } else {
        let g = HermitianOperator::new(c.adjoint() * &c)?;
        Ok(eigh(&g)?.max().max(0.0).sqrt())
    }
}

fn check_sites(site: usize, n_sites: usize, cap: usize) -> Result<usize> {
    if n_sites == 0 || site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    if n_sites >= usize::BITS as usize || (1usize << n_sites) > cap {
        return Err(Error::DimensionCap { n_sites, cap });
    }
    Ok(1 << n_sites)
}

/// Adds `coeff · (I ⊗ … ⊗ local ⊗ … ⊗ I)` into `m` without forming the
/// Kronecker product.
fn accumulate_site(m: &mut DMatrix<C64>, local: &LocalOperator, site: usize, n_sites: usize, coeff: f64) {
    let dim = m.nrows();
    let shift = n_sites - site;
    let mask = 1usize << shift;
    for col in 0..dim {
        let b = (col >> shift) & 1;
        let base = col & !mask;
        for b2 in 0..2 {
            let v = local[(b2, b)];
            if v != C64::new(0.0, 0.0) {
                m[(base | (b2 << shift), col)] += v * coeff;
            }
        }
    }
}

fn local_is_hermitian(local: &LocalOperator) -> bool {
    (local - local.adjoint()).camax() <= HERMITICITY_TOL
}

/// `I ⊗ … ⊗ local ⊗ … ⊗ I` with `local` at `site` (1-based), on `2^n_sites`
/// dimensions, subject to [`DEFAULT_DIM_CAP`].
pub fn embed_site_operator(local: &LocalOperator, site: usize, n_sites: usize) -> Result<HermitianOperator> {
    embed_site_operator_capped(local, site, n_sites, DEFAULT_DIM_CAP)
}

pub fn embed_site_operator_capped(
    local: &LocalOperator,
    site: usize,
    n_sites: usize,
    cap: usize,
) -> Result<HermitianOperator> {
    let dim = check_sites(site, n_sites, cap)?;
    let mut m = DMatrix::zeros(dim, dim);
    accumulate_site(&mut m, local, site, n_sites, 1.0);
    Ok(HermitianOperator::from_parts(m, local_is_hermitian(local)))
}

/// Mean-field observable `(1/n) Σ_i local_i`.
pub fn average_observable(local: &LocalOperator, n_sites: usize) -> Result<HermitianOperator> {
    average_observable_capped(local, n_sites, DEFAULT_DIM_CAP)
}

pub fn average_observable_capped(local: &LocalOperator, n_sites: usize, cap: usize) -> Result<HermitianOperator> {
    if !local_is_hermitian(local) {
        return Err(Error::NotHermitian);
    }
    let dim = check_sites(1, n_sites, cap)?;
    let mut m = DMatrix::zeros(dim, dim);
    let w = 1.0 / n_sites as f64;
    for site in 1..=n_sites {
        accumulate_site(&mut m, local, site, n_sites, w);
    }
    Ok(HermitianOperator::from_parts(m, true))
}

/// Positive semidefinite unit-trace operator, stored together with its
/// spectral decomposition.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: HermitianOperator,
    spectrum: SpectralDecomposition,
}

/// Trace and positivity tolerance of [`DensityMatrix`].
pub const DENSITY_TOL: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian);
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let spectrum = eigh(&op)?;
        if spectrum.min() < -DENSITY_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {:e}",
                spectrum.min()
            )));
        }
        Ok(Self { op, spectrum })
    }

    /// Density matrix with prescribed eigenvalues on the eigenvectors of `basis`.
    /// The probabilities must be nonnegative and sum to one.
    pub(crate) fn from_spectrum(basis: &SpectralDecomposition, probabilities: Vec<f64>) -> Self {
        let op = HermitianOperator::from_parts(basis.compose(&probabilities), true);
        let mut order: Vec<usize> = (0..probabilities.len()).collect();
        order.sort_by(|&i, &j| probabilities[i].total_cmp(&probabilities[j]));
        let spectrum = SpectralDecomposition {
            eigenvalues: order.iter().map(|&i| probabilities[i]).collect(),
            eigenvectors: basis.eigenvectors.select_columns(order.iter()),
        };
        Self { op, spectrum }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let p = 1.0 / dim as f64;
        Self {
            op: HermitianOperator::identity(dim).scale(p),
            spectrum: SpectralDecomposition {
                eigenvalues: vec![p; dim],
                eigenvectors: DMatrix::identity(dim, dim),
            },
        }
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ` (normalized here).
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidDensity("zero vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        Self::new(HermitianOperator::new(&v * v.adjoint())?)
    }

    /// The normalized trace state `P / Tr P` on the range of a projection.
    pub fn from_projection(p: &HermitianOperator) -> Result<Self> {
        let tr = p.trace().re;
        if tr <= 0.5 {
            return Err(Error::EmptyProjection);
        }
        Self::new(p.scale(1.0 / tr))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    /// Eigenvalues, ascending.
    pub fn probabilities(&self) -> &[f64] {
        self.spectrum.eigenvalues()
    }

    /// `Tr(σ A)`.
    pub fn expectation(&self, a: &HermitianOperator) -> Result<C64> {
        self.op.trace_product(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(d: &[f64]) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(d)
    }

    #[test]
    fn embed_single_site() {
        let z = embed_site_operator(&pauli::z(), 1, 1).unwrap();
        assert_eq!(z, diag(&[1.0, -1.0]));
    }

    #[test]
    fn embed_second_of_two() {
        let z = embed_site_operator(&pauli::z(), 2, 2).unwrap();
        assert_eq!(z, diag(&[1.0, -1.0, 1.0, -1.0]));
    }

    #[test]
    fn embed_identity_is_identity() {
        for site in 1..=3 {
            let i = embed_site_operator(&pauli::identity(), site, 3).unwrap();
            assert_eq!(i, HermitianOperator::identity(8));
        }
    }

    #[test]
    fn embed_errors() {
        assert!(matches!(
            embed_site_operator(&pauli::z(), 0, 3),
            Err(Error::SiteOutOfRange { .. })
        ));
        assert!(matches!(
            embed_site_operator(&pauli::z(), 4, 3),
            Err(Error::SiteOutOfRange { .. })
        ));
        assert!(matches!(
            embed_site_operator(&pauli::z(), 1, 14),
            Err(Error::DimensionCap { .. })
        ));
        assert!(embed_site_operator_capped(&pauli::z(), 1, 3, 4).is_err());
    }

    #[test]
    fn average_examples() {
        assert_eq!(
            average_observable(&pauli::z(), 2).unwrap(),
            diag(&[1.0, 0.0, 0.0, -1.0])
        );
        assert_eq!(average_observable(&pauli::z(), 1).unwrap(), diag(&[1.0, -1.0]));
        assert_eq!(
            average_observable(&pauli::identity(), 5).unwrap(),
            HermitianOperator::identity(32)
        );
        let raising = LocalOperator::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        assert!(matches!(average_observable(&raising, 2), Err(Error::NotHermitian)));
    }

    #[test]
    fn average_norm_bounded_by_local() {
        for n in 1..=5 {
            let x = average_observable(&pauli::x(), n).unwrap();
            assert!(eigh(&x).unwrap().spectral_radius() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn eigh_examples() {
        let d = eigh(&diag(&[1.0, -1.0])).unwrap();
        assert_eq!(d.eigenvalues(), &[-1.0, 1.0]);

        let x = embed_site_operator(&pauli::x(), 1, 1).unwrap();
        let d = eigh(&x).unwrap();
        assert_abs_diff_eq!(d.eigenvalues()[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eigenvalues()[1], 1.0, epsilon = 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Eigenvectors up to a phase: compare |components| and the relative sign.
        let v = d.eigenvectors();
        let lo = v.column(0);
        assert_abs_diff_eq!(lo[0].norm(), s, epsilon = 1e-12);
        assert_abs_diff_eq!((lo[1] / lo[0]).re, -1.0, epsilon = 1e-12);
        let hi = v.column(1);
        assert_abs_diff_eq!((hi[1] / hi[0]).re, 1.0, epsilon = 1e-12);

        let d = eigh(&HermitianOperator::identity(4)).unwrap();
        assert_eq!(d.eigenvalues(), &[1.0; 4]);
    }

    #[test]
    fn eigh_rejects_general_operator() {
        let x = embed_site_operator(&pauli::x(), 1, 1).unwrap();
        let y = embed_site_operator(&pauli::y(), 1, 1).unwrap();
        let xy = x.mul(&y).unwrap();
        assert!(!xy.is_hermitian());
        assert!(matches!(eigh(&xy), Err(Error::NotHermitian)));
    }

    #[test]
    fn matrix_function_examples() {
        let e = matrix_function(&diag(&[0.0, 1.0]), f64::exp).unwrap();
        assert_abs_diff_eq!(e.max_distance(&diag(&[1.0, std::f64::consts::E])).unwrap(), 0.0, epsilon = 1e-14);

        let x = embed_site_operator(&pauli::x(), 1, 1).unwrap();
        let same = matrix_function(&x, |l| l).unwrap();
        assert!(same.max_distance(&x).unwrap() < 1e-12);
        let sq = matrix_function(&x, |l| l * l).unwrap();
        assert!(sq.max_distance(&HermitianOperator::identity(2)).unwrap() < 1e-12);

        assert!(matches!(
            matrix_function(&diag(&[0.0, 1.0]), f64::ln),
            Err(Error::FunctionUndefined(l)) if l == 0.0
        ));
    }

    #[test]
    fn commutator_examples() {
        let x = average_observable(&pauli::x(), 4).unwrap();
        let z = average_observable(&pauli::z(), 4).unwrap();
        assert_eq!(commutator_norm(&x, &x).unwrap(), 0.0);
        let c = commutator_norm(&x, &z).unwrap();
        // [X1, X3] = −(2i/N) X2 with ‖X2‖ = 1.
        assert_abs_diff_eq!(c, 0.5, epsilon = 1e-10);
        assert!(c <= 2.0 / 4.0 + 1e-10);
        assert_eq!(commutator_norm(&diag(&[1.0, 2.0]), &diag(&[3.0, -1.0])).unwrap(), 0.0);
        assert!(matches!(
            commutator_norm(&diag(&[1.0]), &diag(&[1.0, 2.0])),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn symmetrization_on_construction() {
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let h = HermitianOperator::new(m).unwrap();
        assert!(h.is_hermitian());
        assert_eq!(h.matrix()[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(h.matrix()[(1, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(diag(&[0.5, 0.5])).is_ok());
        assert!(matches!(DensityMatrix::new(diag(&[0.5, 0.6])), Err(Error::InvalidDensity(_))));
        assert!(matches!(DensityMatrix::new(diag(&[1.5, -0.5])), Err(Error::InvalidDensity(_))));
        let mm = DensityMatrix::maximally_mixed(4);
        assert_abs_diff_eq!(mm.op().trace().re, 1.0, epsilon = 1e-15);
    }
}
