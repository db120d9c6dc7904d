//! Microcanonical macrostates: spectral window projections, counting
//! H-functions, microcanonical expectations and concentration diagnostics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::{
    average_observable, check_dims, commutator_norm, compose_columns, eigh, mul_dense, pauli, HermitianOperator, DEFAULT_DIM_CAP,
    SpectralDecomposition, C64,
};

/// Eigenvalues within this distance below a window edge snap onto the edge.
pub const WINDOW_SNAP_TOL: f64 = 1e-9;

/// Pairs of observables with a larger commutator norm are not treated as
/// commuting by [`joint_window_projection`].
pub const COMMUTATION_TOL: f64 = 1e-9;

/// Spectral window `[center − δ, center + δ)`.
///
/// Membership uses a snapping tolerance: an eigenvalue within
/// [`WINDOW_SNAP_TOL`] below the lower edge belongs to the window, one within
/// the same distance below the upper edge does not. Adjacent windows therefore
/// partition the spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSpec {
    center: f64,
    half_width: f64,
}

impl WindowSpec {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !center.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window needs finite center and positive half width, got ({center}, {half_width})"
            )));
        }
        Ok(Self { center, half_width })
    }

    /// Window `[lower, upper)`.
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new((lower + upper) / 2.0, (upper - lower) / 2.0)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn lower(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower() - WINDOW_SNAP_TOL && value < self.upper() - WINDOW_SNAP_TOL
    }
}

/// Window half-width schedule `δ_N = c·N^{−γ}` for sweeps over system size.
///
/// Any `0 < γ < 1/2` makes `N^{1/2} δ_N` diverge while `δ_N → 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaSchedule {
    pub c: f64,
    pub gamma: f64,
}

impl Default for DeltaSchedule {
    fn default() -> Self {
        Self { c: 1.0, gamma: 0.4 }
    }
}

impl DeltaSchedule {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0) || !(gamma > 0.0 && gamma < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "delta schedule needs c > 0 and 0 < gamma < 1/2, got c={c}, gamma={gamma}"
            )));
        }
        Ok(Self { c, gamma })
    }

    pub fn delta(&self, n: usize) -> f64 {
        self.c * (n as f64).powf(-self.gamma)
    }
}

/// Orthogonal projection, kept together with an orthonormal basis of its range.
#[derive(Clone, Debug)]
pub struct Projection {
    op: HermitianOperator,
    basis: DMatrix<C64>,
}

impl Projection {
    /// Projection onto the span of orthonormal columns.
    pub fn from_basis(basis: DMatrix<C64>) -> Self {
        let weights = vec![1.0; basis.ncols()];
        let op = HermitianOperator::from_parts(compose_columns(&basis, &weights), true);
        Self { op, basis }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            op: HermitianOperator::identity(dim),
            basis: DMatrix::identity(dim, dim),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Rank-zero projections arise from empty windows.
    pub fn is_empty(&self) -> bool {
        self.rank() == 0
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    /// Orthonormal basis of the range, one vector per column.
    pub fn basis(&self) -> &DMatrix<C64> {
        &self.basis
    }

    /// `‖P² − P‖_max`.
    pub fn idempotence_defect(&self) -> f64 {
        let p = self.op.matrix();
        (p * p - p).camax()
    }

    /// `Tr(P A P)` computed on the range basis.
    fn compressed_trace(&self, a: &DMatrix<C64>) -> C64 {
        let w = mul_dense(a, &self.basis);
        self.basis.zip_fold(&w, C64::new(0.0, 0.0), |acc, v, av| acc + v.conj() * av)
    }
}

/// Spectral projection of `x` onto the window.
pub fn window_projection(x: &HermitianOperator, w: &WindowSpec) -> Result<Projection> {
    Ok(window_projection_from(&eigh(x)?, w))
}

/// Spectral projection from a precomputed decomposition.
pub fn window_projection_from(spectrum: &SpectralDecomposition, w: &WindowSpec) -> Projection {
    Projection::from_basis(spectrum.select_columns(|l| w.contains(l)))
}

/// Number of eigenvalues of `spectrum` in the window.
pub fn window_rank(spectrum: &SpectralDecomposition, w: &WindowSpec) -> usize {
    spectrum.eigenvalues().iter().filter(|&&l| w.contains(l)).count()
}

/// Product of the window projections of mutually commuting observables.
pub fn joint_window_projection(xs: &[HermitianOperator], ws: &[WindowSpec]) -> Result<Projection> {
    if xs.is_empty() || xs.len() != ws.len() {
        return Err(Error::InvalidParameter(format!(
            "need one window per observable, got {} observables and {} windows",
            xs.len(),
            ws.len()
        )));
    }
    for x in &xs[1..] {
        check_dims(xs[0].dim(), x.dim())?;
    }
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let norm = commutator_norm(&xs[i], &xs[j])?;
            if norm > COMMUTATION_TOL {
                return Err(Error::NonCommuting {
                    first: i,
                    second: j,
                    norm,
                });
            }
        }
    }
    let mut projections = xs
        .iter()
        .zip(ws)
        .map(|(x, w)| window_projection(x, w))
        .collect::<Result<Vec<_>>>()?;
    if projections.len() == 1 {
        return Ok(projections.pop().unwrap());
    }
    let mut product = projections[0].op().matrix().clone();
    for p in &projections[1..] {
        product = product * p.op().matrix();
    }
    let product = HermitianOperator::new(product)?;
    let spectrum = eigh(&product)?;
    Ok(Projection::from_basis(spectrum.select_columns(|l| l > 0.5)))
}

/// `(1/n) log rank P`, `−∞` for the zero projection.
pub fn h_function(p: &Projection, n: usize) -> f64 {
    h_from_rank(p.rank() as f64, n)
}

pub(crate) fn h_from_rank(rank: f64, n: usize) -> f64 {
    if rank <= 0.0 {
        f64::NEG_INFINITY
    } else {
        rank.ln() / n as f64
    }
}

/// Normalized trace `Tr(P A)/Tr(P)` of an arbitrary operator.
pub fn microcanonical_trace(a: &HermitianOperator, p: &Projection) -> Result<C64> {
    check_dims(a.dim(), p.dim())?;
    if p.is_empty() {
        return Err(Error::EmptyProjection);
    }
    Ok(p.compressed_trace(a.matrix()) / p.rank() as f64)
}

/// `tr(A | P) = Tr(P A)/Tr(P)` for Hermitian `A`.
pub fn microcanonical_expectation(a: &HermitianOperator, p: &Projection) -> Result<f64> {
    if !a.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    Ok(microcanonical_trace(a, p)?.re)
}

/// Named macroscopic observables `X_k` sharing one Hilbert space, with radii
/// `r_k > ‖X_k‖`.
#[derive(Clone, Debug)]
pub struct MacroObservableSet {
    names: Vec<String>,
    ops: Vec<HermitianOperator>,
    norms: Vec<f64>,
    radii: Vec<f64>,
}

impl MacroObservableSet {
    /// Radii default to the operator norms plus `1e-9`.
    pub fn new(observables: Vec<(String, HermitianOperator)>) -> Result<Self> {
        let norms = Self::norms_of(&observables)?;
        let radii = norms.iter().map(|n| n + 1e-9).collect();
        Self::assemble(observables, norms, radii)
    }

    pub fn with_radii(observables: Vec<(String, HermitianOperator)>, radii: Vec<f64>) -> Result<Self> {
        let norms = Self::norms_of(&observables)?;
        if radii.len() != norms.len() {
            return Err(Error::InvalidParameter("one radius per observable".into()));
        }
        for (k, (r, n)) in radii.iter().zip(&norms).enumerate() {
            if !(r > n) {
                return Err(Error::InvalidParameter(format!(
                    "radius {r} of observable {k} does not exceed its norm {n}"
                )));
            }
        }
        Self::assemble(observables, norms, radii)
    }

    fn norms_of(observables: &[(String, HermitianOperator)]) -> Result<Vec<f64>> {
        if observables.is_empty() {
            return Err(Error::InvalidParameter("empty observable set".into()));
        }
        let dim = observables[0].1.dim();
        observables
            .iter()
            .map(|(_, op)| {
                check_dims(dim, op.dim())?;
                Ok(eigh(op)?.spectral_radius())
            })
            .collect()
    }

    fn assemble(observables: Vec<(String, HermitianOperator)>, norms: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        let (names, ops) = observables.into_iter().unzip();
        Ok(Self {
            names,
            ops,
            norms,
            radii,
        })
    }

    /// The three magnetizations `X_α = (1/n) Σ_i σ^α_i`, named `m1, m2, m3`,
    /// with radius 1 + 1e-9.
    pub fn magnetization(n_sites: usize) -> Result<Self> {
        let obs = pauli::all()
            .iter()
            .enumerate()
            .map(|(a, s)| Ok((format!("m{}", a + 1), average_observable(s, n_sites)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(obs, vec![1.0; 3], vec![1.0 + 1e-9; 3])
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    pub fn op(&self, k: usize) -> Result<&HermitianOperator> {
        self.ops.get(k).ok_or(Error::UnknownIndex(k))
    }

    pub fn ops(&self) -> &[HermitianOperator] {
        &self.ops
    }

    pub fn name(&self, k: usize) -> &str {
        &self.names[k]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn norm(&self, k: usize) -> f64 {
        self.norms[k]
    }

    pub fn radius(&self, k: usize) -> f64 {
        self.radii[k]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// Macroscopic value `x = (x_k)`, one entry per observable.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroValue(pub Vec<f64>);

impl MacroValue {
    /// Checks `|x_k| ≤ r_k`.
    pub fn validate(&self, xs: &MacroObservableSet) -> Result<()> {
        if self.0.len() != xs.len() {
            return Err(Error::InvalidParameter(format!(
                "macro value has {} entries for {} observables",
                self.0.len(),
                xs.len()
            )));
        }
        for (k, v) in self.0.iter().enumerate() {
            if !(v.abs() <= xs.radius(k)) {
                return Err(Error::InvalidParameter(format!(
                    "|x_{k}| = {} exceeds radius {}",
                    v.abs(),
                    xs.radius(k)
                )));
            }
        }
        Ok(())
    }
}

/// One term `c · X_{k_1} ⋯ X_{k_m}` of a noncommutative polynomial; the empty
/// word is the constant term.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub coeff: C64,
    pub word: Vec<usize>,
}

/// Finite linear combination of ordered words over the observable indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoncommutativePolynomial {
    terms: Vec<Term>,
}

/// Outcome of truncating a series to a maximal word length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub degree: usize,
    /// Bound on `Σ_{dropped} |G(k)| Π r_{k_i}`, when known.
    pub remainder_bound: Option<f64>,
    /// Terms were dropped and no remainder bound is available.
    pub flagged: bool,
}

/// Default maximal word length when truncating series.
pub const DEFAULT_MAX_DEGREE: usize = 6;

impl NoncommutativePolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(c, vec![])
    }

    pub fn letter(k: usize) -> Self {
        Self::monomial(C64::new(1.0, 0.0), vec![k])
    }

    pub fn monomial(coeff: C64, word: Vec<usize>) -> Self {
        Self {
            terms: vec![Term { coeff, word }],
        }
    }

    /// `X_k − x_k`.
    pub fn centered_letter(k: usize, x_k: f64) -> Self {
        Self::letter(k).add(&Self::constant(C64::new(-x_k, 0.0)))
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|t| t.word.len()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(t.coeff, &t.word);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * s,
                    word: t.word.clone(),
                })
                .collect(),
        }
    }

    /// Product with words concatenated in order; terms longer than
    /// `max_degree` are dropped.
    pub fn mul_truncated(&self, other: &Self, max_degree: usize) -> Self {
        let mut out = Self::zero();
        for a in &self.terms {
            for b in &other.terms {
                if a.word.len() + b.word.len() > max_degree {
                    continue;
                }
                let mut word = a.word.clone();
                word.extend_from_slice(&b.word);
                out.push(a.coeff * b.coeff, &word);
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_truncated(other, usize::MAX)
    }

    fn push(&mut self, coeff: C64, word: &[usize]) {
        if let Some(t) = self.terms.iter_mut().find(|t| t.word == word) {
            t.coeff += coeff;
        } else {
            self.terms.push(Term {
                coeff,
                word: word.to_vec(),
            });
        }
    }

    /// `Σ |G(k)| Π r_{k_i}`.
    pub fn weighted_norm(&self, radii: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            let mut w = t.coeff.norm();
            for &k in &t.word {
                w *= *radii.get(k).ok_or(Error::UnknownIndex(k))?;
            }
            total += w;
        }
        Ok(total)
    }

    /// Drops words longer than `max_degree`; the dropped weighted mass is the
    /// remainder bound.
    pub fn truncate(&self, max_degree: usize, radii: &[f64]) -> Result<(Self, Truncation)> {
        let (kept, dropped): (Vec<Term>, Vec<Term>) =
            self.terms.iter().cloned().partition(|t| t.word.len() <= max_degree);
        let dropped = Self { terms: dropped };
        let remainder = dropped.weighted_norm(radii)?;
        Ok((
            Self { terms: kept },
            Truncation {
                degree: max_degree,
                remainder_bound: Some(remainder),
                flagged: false,
            },
        ))
    }

    /// Degree-`max_degree` truncation of `exp(self)`.
    ///
    /// The remainder bound is `e^s − Σ_{j ≤ d} s^j/j!` with `s` the weighted
    /// norm of `self`, valid when `self` has no constant term; otherwise the
    /// truncation is flagged.
    pub fn exp_truncated(&self, max_degree: usize, radii: &[f64]) -> Result<(Self, Truncation)> {
        let mut result = Self::constant(C64::new(1.0, 0.0));
        let mut power = Self::constant(C64::new(1.0, 0.0));
        let mut factorial = 1.0;
        for j in 1..=max_degree {
            power = power.mul_truncated(self, max_degree);
            factorial *= j as f64;
            result = result.add(&power.scale(C64::new(1.0 / factorial, 0.0)));
        }
        let has_constant = self.terms.iter().any(|t| t.word.is_empty() && t.coeff.norm() > 0.0);
        let truncation = if has_constant {
            Truncation {
                degree: max_degree,
                remainder_bound: None,
                flagged: true,
            }
        } else {
            let s = self.weighted_norm(radii)?;
            let mut partial = 0.0;
            let mut term = 1.0;
            for j in 0..=max_degree {
                if j > 0 {
                    term *= s / j as f64;
                }
                partial += term;
            }
            Truncation {
                degree: max_degree,
                remainder_bound: Some((s.exp() - partial).max(0.0)),
                flagged: false,
            }
        };
        Ok((result, truncation))
    }

    /// Classical evaluation `G(x)` with the same coefficients on real arguments.
    pub fn eval_classical(&self, x: &[f64]) -> Result<C64> {
        let mut total = C64::new(0.0, 0.0);
        for t in &self.terms {
            let mut v = t.coeff;
            for &k in &t.word {
                v *= *x.get(k).ok_or(Error::UnknownIndex(k))?;
            }
            total += v;
        }
        Ok(total)
    }
}

/// `G(X) = Σ G(k_1…k_m) X_{k_1} ⋯ X_{k_m}` as a (generally non-Hermitian)
/// operator.
pub fn eval_nc_polynomial(g: &NoncommutativePolynomial, xs: &MacroObservableSet) -> Result<HermitianOperator> {
    let dim = xs.dim();
    let mut total = DMatrix::<C64>::zeros(dim, dim);
    for t in &g.terms {
        let mut prod: Option<DMatrix<C64>> = None;
        for &k in &t.word {
            let op = xs.op(k)?.matrix();
            prod = Some(match prod {
                None => op.clone(),
                Some(p) => p * op,
            });
        }
        match prod {
            None => {
                for i in 0..dim {
                    total[(i, i)] += t.coeff;
                }
            }
            Some(p) => total += p * t.coeff,
        }
    }
    HermitianOperator::general(total)
}

/// Mean and spread of one observable under `tr(· | P)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationReport {
    /// `tr(X_k | P)`.
    pub mean: f64,
    /// `tr((X_k − x_k)² | P)`.
    pub variance: f64,
}

/// Per-observable concentration diagnostics of `P` at `x`. A family `P^N`
/// concentrates at `x` iff every variance tends to zero along the family.
pub fn concentration_diagnostic(
    p: &Projection,
    xs: &MacroObservableSet,
    x: &MacroValue,
) -> Result<Vec<ConcentrationReport>> {
    x.validate(xs)?;
    check_dims(p.dim(), xs.dim())?;
    if p.is_empty() {
        return Err(Error::EmptyProjection);
    }
    let r = p.rank() as f64;
    xs.ops()
        .iter()
        .zip(&x.0)
        .map(|(op, &xk)| {
            let w = mul_dense(op.matrix(), p.basis());
            let mean = p
                .basis()
                .zip_fold(&w, C64::new(0.0, 0.0), |acc, v, av| acc + v.conj() * av)
                .re
                / r;
            // ‖(X − x)V‖_F² = Tr(P (X − x)² P).
            let shifted = w - p.basis() * C64::new(xk, 0.0);
            let variance = shifted.norm_squared() / r;
            Ok(ConcentrationReport { mean, variance })
        })
        .collect()
}

/// Both sides of the finite-size noncommutative concentration statement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NcCheck {
    /// `tr(G(X) | P)`.
    pub lhs: C64,
    /// `G(x)`.
    pub rhs: C64,
    pub gap: f64,
}

/// `tr(X_{k_1} ⋯ X_{k_m} V)` applied right to left on the range basis.
fn word_on_basis(p: &Projection, xs: &MacroObservableSet, word: &[usize]) -> Result<C64> {
    let mut w = p.basis().clone();
    for &k in word.iter().rev() {
        w = mul_dense(xs.op(k)?.matrix(), &w);
    }
    Ok(p.basis().zip_fold(&w, C64::new(0.0, 0.0), |acc, v, av| acc + v.conj() * av))
}

/// Compares `tr(G(X) | P)` with `G(x)`.
pub fn nc_concentration_check(
    p: &Projection,
    g: &NoncommutativePolynomial,
    xs: &MacroObservableSet,
    x: &MacroValue,
) -> Result<NcCheck> {
    x.validate(xs)?;
    check_dims(p.dim(), xs.dim())?;
    if p.is_empty() {
        return Err(Error::EmptyProjection);
    }
    let r = p.rank() as f64;
    let mut lhs = C64::new(0.0, 0.0);
    for t in g.terms() {
        lhs += t.coeff * word_on_basis(p, xs, &t.word)? / r;
    }
    let rhs = g.eval_classical(&x.0)?;
    Ok(NcCheck {
        lhs,
        rhs,
        gap: (lhs - rhs).norm(),
    })
}

/// Second-order product check for a pair of observables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairProductCheck {
    /// `tr(X_j X_k | P)`.
    pub product: C64,
    /// `|tr(X_j X_k | P) − x_j x_k|`.
    pub deviation: f64,
    /// `‖X_j‖ √tr((X_k − x_k)²|P) + |x_k| |tr(X_j|P) − x_j|`.
    pub bound: f64,
    /// `|tr(X_j X_k | P) − tr(X_j|P) tr(X_k|P)|`.
    pub covariance: f64,
    /// `‖X_j‖ √tr((X_k − x_k)²|P) + r_k |tr(X_j|P) − x_j|`.
    pub covariance_bound: f64,
}

/// Cauchy–Schwarz control of `tr(X_j X_k | P)` by the single-observable
/// concentration diagnostics.
pub fn pair_product_check(
    p: &Projection,
    xs: &MacroObservableSet,
    x: &MacroValue,
    j: usize,
    k: usize,
) -> Result<PairProductCheck> {
    if j >= xs.len() {
        return Err(Error::UnknownIndex(j));
    }
    if k >= xs.len() {
        return Err(Error::UnknownIndex(k));
    }
    let reports = concentration_diagnostic(p, xs, x)?;
    let product = word_on_basis(p, xs, &[j, k])? / p.rank() as f64;
    let (xj, xk) = (x.0[j], x.0[k]);
    let (rj, rk) = (reports[j], reports[k]);
    let spread = xs.norm(j) * rk.variance.sqrt();
    Ok(PairProductCheck {
        product,
        deviation: (product - C64::new(xj * xk, 0.0)).norm(),
        bound: spread + xk.abs() * (rj.mean - xj).abs(),
        covariance: (product - C64::new(rj.mean * rk.mean, 0.0)).norm(),
        covariance_bound: spread + xs.radius(k) * (rj.mean - xj).abs(),
    })
}

/// Unit vector along `m`, or `ẑ` when `m = 0`.
pub(crate) fn direction(m: [f64; 3]) -> ([f64; 3], f64) {
    let len = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    if len == 0.0 {
        ([0.0, 0.0, 1.0], 0.0)
    } else {
        ([m[0] / len, m[1] / len, m[2] / len], len)
    }
}

/// `Σ_α e_α X_α` for the unit vector `e` along `m`.
pub fn aligned_magnetization(xs: &MacroObservableSet, m: [f64; 3]) -> Result<HermitianOperator> {
    if xs.len() != 3 {
        return Err(Error::InvalidParameter("expected the three magnetizations".into()));
    }
    let (e, _) = direction(m);
    let mut y = HermitianOperator::zeros(xs.dim());
    for (a, &ea) in e.iter().enumerate() {
        if ea != 0.0 {
            y = y.add(&xs.op(a)?.scale(ea))?;
        }
    }
    Ok(y)
}

/// Magnetization macrostate: the spectral projection of the magnetization
/// along `m/|m|` onto `[|m| − δ, |m| + δ)`.
///
/// The aligned magnetization is a rotated copy of `X_3`, so its eigenvectors
/// are products of the single-spin eigenvectors of `ê·σ⃗`; no dense
/// eigensolve is needed.
pub fn magnetization_window(n_sites: usize, m: [f64; 3], delta: f64) -> Result<Projection> {
    if n_sites == 0 {
        return Err(Error::InvalidParameter("system size must be positive".into()));
    }
    if n_sites >= usize::BITS as usize || (1usize << n_sites) > DEFAULT_DIM_CAP {
        return Err(Error::DimensionCap {
            n_sites,
            cap: DEFAULT_DIM_CAP,
        });
    }
    let (e, len) = direction(m);
    let w = WindowSpec::new(len, delta)?;
    let local = aligned_eigenvectors(e);
    let dim = 1usize << n_sites;
    let zero = C64::new(0.0, 0.0);
    let selected: Vec<usize> = (0..dim)
        .filter(|b| {
            let down = b.count_ones() as f64;
            w.contains((n_sites as f64 - 2.0 * down) / n_sites as f64)
        })
        .collect();
    let mut basis = DMatrix::<C64>::zeros(dim, selected.len());
    for (col, &b) in selected.iter().enumerate() {
        for a in 0..dim {
            let mut amp = C64::new(1.0, 0.0);
            for site in 0..n_sites {
                let shift = n_sites - 1 - site;
                amp *= local[(b >> shift) & 1][(a >> shift) & 1];
                if amp == zero {
                    break;
                }
            }
            basis[(a, col)] = amp;
        }
    }
    Ok(Projection::from_basis(basis))
}

/// Eigenvectors of `ê·σ⃗` for eigenvalues `+1` and `−1`.
pub(crate) fn aligned_eigenvectors(e: [f64; 3]) -> [[C64; 2]; 2] {
    let theta = e[2].clamp(-1.0, 1.0).acos();
    let phase = if e[0] == 0.0 && e[1] == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        C64::from_polar(1.0, e[1].atan2(e[0]))
    };
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    [
        [C64::new(c, 0.0), phase * s],
        [-phase.conj() * s, C64::new(c, 0.0)],
    ]
}

/// A candidate concentrating projection for the microcanonical H-function.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub name: String,
    pub projection: Projection,
}

/// Largest `(1/n) log Tr P` over candidate projections.
///
/// This is a lower bound on the microcanonical H-function: the supremum runs
/// over all concentrating families, of which the candidates are a few.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateBound {
    pub best: Option<String>,
    pub value: f64,
    pub per_candidate: Vec<(String, f64)>,
}

pub fn h_lower_bound(candidates: &[Candidate], n: usize) -> CandidateBound {
    let per_candidate: Vec<(String, f64)> = candidates
        .iter()
        .map(|c| (c.name.clone(), h_function(&c.projection, n)))
        .collect();
    let mut best = None;
    let mut value = f64::NEG_INFINITY;
    for (name, h) in &per_candidate {
        if *h > value {
            value = *h;
            best = Some(name.clone());
        }
    }
    CandidateBound {
        best,
        value,
        per_candidate,
    }
}
