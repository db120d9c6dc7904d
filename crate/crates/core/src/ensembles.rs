//! Canonical macrostates.
//!
//! Gibbs states `σ_λ ∝ exp(N Σ_k λ_k X_k)`, pressures and entropies, the
//! Newton solver for the conjugate parameters of a macroscopic value, and the
//! diagnostics connecting canonical and microcanonical descriptions:
//! exponential concentration rates, asymptotic equipartition, equipartition
//! projections and generating functions. Completely positive maps given by
//! Kraus operators live here too.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::macrostate::{MacroObservableSet, MacroValue, Projection, WindowSpec};
use crate::operator::{
    check_dims, eigh, mul_dense, DensityMatrix, HermitianOperator, SpectralDecomposition, C64,
};
use crate::quadrature::gauss_legendre_unit;

/// Eigenvalues of a density matrix are floored here before taking logarithms.
pub const EIGENVALUE_FLOOR: f64 = 1e-300;

/// Reference eigenvalues below this are outside the support.
pub const SUPPORT_EIGENVALUE_TOL: f64 = 1e-14;

/// Mass of the first state outside the support of the reference that still
/// counts as no violation.
pub const SUPPORT_MASS_TOL: f64 = 1e-12;

/// Gibbs parameters `λ` for a set of macroscopic observables at size `N`.
#[derive(Clone, Debug)]
pub struct GibbsSpec<'a> {
    pub xs: &'a MacroObservableSet,
    pub lambda: Vec<f64>,
    pub n: usize,
}

impl<'a> GibbsSpec<'a> {
    pub fn new(xs: &'a MacroObservableSet, lambda: Vec<f64>, n: usize) -> Result<Self> {
        if lambda.len() != xs.len() {
            return Err(Error::InvalidParameter(format!(
                "{} parameters for {} observables",
                lambda.len(),
                xs.len()
            )));
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Gibbs parameter".into()));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("system size must be positive".into()));
        }
        Ok(Self { xs, lambda, n })
    }

    /// `N Σ_k λ_k X_k`.
    pub fn exponent(&self) -> Result<HermitianOperator> {
        let mut h = HermitianOperator::zeros(self.xs.dim());
        for (k, &l) in self.lambda.iter().enumerate() {
            if l != 0.0 {
                h = h.add(&self.xs.op(k)?.scale(self.n as f64 * l))?;
            }
        }
        Ok(h)
    }
}

/// Gibbs state in the eigenbasis of its exponent, with shift-stable weights.
#[derive(Clone, Debug)]
pub struct GibbsEnsemble {
    spectrum: SpectralDecomposition,
    /// `h_i − max h`.
    shifted: Vec<f64>,
    probabilities: Vec<f64>,
    log_z: f64,
    n: usize,
}

impl GibbsEnsemble {
    pub fn new(spec: &GibbsSpec) -> Result<Self> {
        let spectrum = eigh(&spec.exponent()?)?;
        let top = spectrum.max();
        let shifted: Vec<f64> = spectrum.eigenvalues().iter().map(|h| h - top).collect();
        let weights: Vec<f64> = shifted.iter().map(|h| h.exp()).collect();
        let z: f64 = weights.iter().sum();
        let probabilities = weights.iter().map(|w| w / z).collect();
        Ok(Self {
            spectrum,
            shifted,
            probabilities,
            log_z: top + z.ln(),
            n: spec.n,
        })
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// `(1/N) log Z`.
    pub fn pressure(&self) -> f64 {
        self.log_z / self.n as f64
    }

    pub fn state(&self) -> DensityMatrix {
        DensityMatrix::from_spectrum(&self.spectrum, self.probabilities.clone())
    }

    /// `(1/N) H(σ_λ)`.
    pub fn entropy_per_site(&self) -> f64 {
        entropy_of(&self.probabilities) / self.n as f64
    }

    /// `ω_λ(X_k)` for every observable.
    pub fn means(&self, xs: &MacroObservableSet) -> Result<Vec<f64>> {
        xs.ops()
            .iter()
            .map(|op| {
                check_dims(op.dim(), self.spectrum.dim())?;
                let d = self.spectrum.diagonal_weights(op);
                Ok(d.iter().zip(&self.probabilities).map(|(a, p)| a * p).sum())
            })
            .collect()
    }

    /// `∂ω_λ(X_j)/∂λ_k` from the Duhamel formula
    /// `N[∫_0^1 Tr(e^{sH} X_k e^{(1−s)H} X_j) ds / Z − ω(X_j) ω(X_k)]`,
    /// integrated with 32-point Gauss–Legendre quadrature in the eigenbasis.
    pub fn jacobian(&self, xs: &MacroObservableSet) -> Result<DMatrix<f64>> {
        let k = xs.len();
        let dim = self.spectrum.dim();
        let v = self.spectrum.eigenvectors();
        let rotated: Vec<DMatrix<C64>> = xs
            .ops()
            .iter()
            .map(|op| {
                check_dims(op.dim(), dim)?;
                Ok(mul_dense(&v.adjoint(), &mul_dense(op.matrix(), v)))
            })
            .collect::<Result<_>>()?;
        let means = self.means(xs)?;
        let rule = gauss_legendre_unit(32);
        let z: f64 = self.shifted.iter().map(|h| h.exp()).sum();
        // Only pairs where some rotated observable is nonzero contribute.
        let mut kernel = DMatrix::<f64>::zeros(dim, dim);
        for b in 0..dim {
            for a in 0..dim {
                if rotated.iter().all(|x| x[(a, b)] == C64::new(0.0, 0.0)) {
                    continue;
                }
                let (ha, hb) = (self.shifted[a], self.shifted[b]);
                let mut acc = 0.0;
                for &(s, w) in &rule {
                    acc += w * (s * ha + (1.0 - s) * hb).exp();
                }
                kernel[(a, b)] = acc / z;
            }
        }
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            for l in j..k {
                let mut acc = 0.0;
                for b in 0..dim {
                    for a in 0..dim {
                        let w = kernel[(a, b)];
                        if w != 0.0 {
                            acc += w * (rotated[l][(a, b)] * rotated[j][(a, b)].conj()).re;
                        }
                    }
                }
                let value = self.n as f64 * (acc - means[j] * means[l]);
                jac[(j, l)] = value;
                jac[(l, j)] = value;
            }
        }
        Ok(jac)
    }
}

fn entropy_of(probabilities: &[f64]) -> f64 {
    probabilities.iter().map(|&p| crate::eta(p.clamp(0.0, 1.0))).sum()
}

/// `σ_λ = exp(N Σ λ_k X_k)/Z`, exponentiated after shifting by the largest
/// eigenvalue of the exponent.
pub fn gibbs_state(spec: &GibbsSpec) -> Result<DensityMatrix> {
    Ok(GibbsEnsemble::new(spec)?.state())
}

/// `(1/N) log Tr exp(N Σ λ_k X_k)`.
pub fn pressure(spec: &GibbsSpec) -> Result<f64> {
    Ok(GibbsEnsemble::new(spec)?.pressure())
}

/// `−Tr σ log σ` with `0 log 0 = 0`.
pub fn von_neumann_entropy(sigma: &DensityMatrix) -> f64 {
    entropy_of(sigma.probabilities())
}

/// Mass of `sigma` on eigenvectors of `reference` with eigenvalue below
/// [`SUPPORT_EIGENVALUE_TOL`], when it exceeds [`SUPPORT_MASS_TOL`].
pub fn support_violation(sigma: &DensityMatrix, reference: &DensityMatrix) -> Result<Option<f64>> {
    check_dims(sigma.dim(), reference.dim())?;
    let weights = reference.spectrum().diagonal_weights(sigma.op());
    let outside: f64 = reference
        .probabilities()
        .iter()
        .zip(&weights)
        .filter(|(q, _)| **q < SUPPORT_EIGENVALUE_TOL)
        .map(|(_, w)| w.max(0.0))
        .sum();
    Ok((outside > SUPPORT_MASS_TOL).then_some(outside))
}

/// `Tr σ(log σ − log σ_0)`; `+∞` when `σ` is not supported inside `σ_0`.
pub fn relative_entropy(sigma: &DensityMatrix, reference: &DensityMatrix) -> Result<f64> {
    if let Some(mass) = support_violation(sigma, reference)? {
        log::warn!("relative entropy: mass {mass:e} outside the reference support");
        return Ok(f64::INFINITY);
    }
    let weights = reference.spectrum().diagonal_weights(sigma.op());
    let cross: f64 = reference
        .probabilities()
        .iter()
        .zip(&weights)
        .filter(|(q, _)| **q >= SUPPORT_EIGENVALUE_TOL)
        .map(|(q, w)| w * q.ln())
        .sum();
    Ok(-von_neumann_entropy(sigma) - cross)
}

/// Per-site entropies of a Gibbs state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyReport {
    pub vn_entropy_per_site: f64,
    pub relative_entropy_per_site: Option<f64>,
    pub pressure: f64,
}

pub fn entropy_report(spec: &GibbsSpec, reference: Option<&DensityMatrix>) -> Result<EntropyReport> {
    let ensemble = GibbsEnsemble::new(spec)?;
    let relative = match reference {
        Some(r) => Some(relative_entropy(&ensemble.state(), r)? / spec.n as f64),
        None => None,
    };
    Ok(EntropyReport {
        vn_entropy_per_site: ensemble.entropy_per_site(),
        relative_entropy_per_site: relative,
        pressure: ensemble.pressure(),
    })
}

/// Settings of [`solve_lambda`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// `‖λ‖` beyond which the target is declared unreachable.
    pub divergence_norm: f64,
    /// Step of the symmetric finite-difference Jacobian.
    pub fd_step: f64,
    /// More observables than this use finite differences.
    pub max_duhamel_observables: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 200,
            max_halvings: 40,
            divergence_norm: 1e3,
            fd_step: 1e-5,
            max_duhamel_observables: 4,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(xs: &MacroObservableSet, lambda: &[f64], n: usize, target: &[f64]) -> Result<Vec<f64>> {
    let spec = GibbsSpec::new(xs, lambda.to_vec(), n)?;
    let means = GibbsEnsemble::new(&spec)?.means(xs)?;
    Ok(means.iter().zip(target).map(|(m, x)| m - x).collect())
}

/// Jacobian of `λ ↦ ω_λ(X)` by symmetric finite differences.
pub fn jacobian_finite_difference(
    xs: &MacroObservableSet,
    lambda: &[f64],
    n: usize,
    step: f64,
) -> Result<DMatrix<f64>> {
    let k = xs.len();
    let zero = vec![0.0; k];
    let mut jac = DMatrix::zeros(k, k);
    for l in 0..k {
        let mut plus = lambda.to_vec();
        let mut minus = lambda.to_vec();
        plus[l] += step;
        minus[l] -= step;
        let rp = residual(xs, &plus, n, &zero)?;
        let rm = residual(xs, &minus, n, &zero)?;
        for j in 0..k {
            jac[(j, l)] = (rp[j] - rm[j]) / (2.0 * step);
        }
    }
    Ok((&jac + jac.transpose()) / 2.0)
}

/// Damped Newton solve of `ω_λ(X_k) = x_k`.
pub fn solve_lambda(
    target: &MacroValue,
    xs: &MacroObservableSet,
    n: usize,
    options: &SolveOptions,
) -> Result<Vec<f64>> {
    target.validate(xs)?;
    let k = xs.len();
    let x = &target.0;
    for (j, &xj) in x.iter().enumerate() {
        let spectrum = eigh(xs.op(j)?)?;
        let reach = 1e-12 * spectrum.spectral_radius().max(1.0);
        if xj <= spectrum.min() + reach || xj >= spectrum.max() - reach {
            return Err(Error::Divergence {
                norm: f64::INFINITY,
                best: vec![0.0; k],
            });
        }
    }
    let mut lambda = vec![0.0; k];
    let mut r = residual(xs, &lambda, n, x)?;
    let mut rnorm = norm(&r);
    for _ in 0..options.max_iterations {
        if r.iter().all(|v| v.abs() <= options.tol) {
            return Ok(lambda);
        }
        let spec = GibbsSpec::new(xs, lambda.clone(), n)?;
        let jac = if k <= options.max_duhamel_observables {
            GibbsEnsemble::new(&spec)?.jacobian(xs)?
        } else {
            jacobian_finite_difference(xs, &lambda, n, options.fd_step)?
        };
        let rhs = DVector::from_iterator(k, r.iter().map(|v| -v));
        let step = newton_step(&jac, &rhs);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=options.max_halvings {
            let trial: Vec<f64> = lambda.iter().zip(step.iter()).map(|(l, d)| l + alpha * d).collect();
            if norm(&trial) > options.divergence_norm {
                return Err(Error::Divergence {
                    norm: norm(&trial),
                    best: lambda,
                });
            }
            let rt = residual(xs, &trial, n, x)?;
            let nt = norm(&rt);
            if nt < rnorm {
                lambda = trial;
                r = rt;
                rnorm = nt;
                accepted = true;
                break;
            }
            alpha /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    if r.iter().all(|v| v.abs() <= options.tol) {
        return Ok(lambda);
    }
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
        residual: rnorm,
        best: lambda,
    })
}

/// Solves `J δ = rhs`, regularizing a singular covariance matrix.
fn newton_step(jac: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    if let Some(chol) = jac.clone().cholesky() {
        return chol.solve(rhs);
    }
    let scale = jac.amax().max(1e-300);
    let mut reg = jac.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-10 * scale;
    }
    reg.lu().solve(rhs).unwrap_or_else(|| rhs.clone())
}

/// `H_1^can(x) = (1/N) log Z_λ − Σ_k λ_k x_k` at the solved `λ(x)`.
pub fn h_can1(x: &MacroValue, xs: &MacroObservableSet, n: usize) -> Result<f64> {
    Ok(canonical_solution(x, xs, n, &SolveOptions::default())?.h_can1)
}

/// Solved conjugate parameters with derived canonical quantities.
#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalSolution {
    pub lambda: Vec<f64>,
    pub pressure: f64,
    pub h_can1: f64,
    pub entropy_per_site: f64,
}

pub fn canonical_solution(
    x: &MacroValue,
    xs: &MacroObservableSet,
    n: usize,
    options: &SolveOptions,
) -> Result<CanonicalSolution> {
    let lambda = solve_lambda(x, xs, n, options)?;
    let ensemble = GibbsEnsemble::new(&GibbsSpec::new(xs, lambda.clone(), n)?)?;
    let pressure = ensemble.pressure();
    let h = pressure - lambda.iter().zip(&x.0).map(|(l, v)| l * v).sum::<f64>();
    Ok(CanonicalSolution {
        lambda,
        pressure,
        h_can1: h,
        entropy_per_site: ensemble.entropy_per_site(),
    })
}

/// Discrete measure: atoms `(value, weight)` sorted by value.
///
/// The spectral measure `B ↦ ω(Q(B))` of an observable in a state.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
}

/// Atoms closer than this are merged.
const ATOM_MERGE_TOL: f64 = 1e-12;

impl SpectralMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, w) in atoms {
            match merged.last_mut() {
                Some(last) if (v - last.0).abs() <= ATOM_MERGE_TOL => last.1 += w,
                _ => merged.push((v, w)),
            }
        }
        Self { atoms: merged }
    }

    /// Spectral measure of `x` in the state `sigma`.
    pub fn from_state(sigma: &DensityMatrix, x: &HermitianOperator) -> Result<Self> {
        check_dims(sigma.dim(), x.dim())?;
        let spectrum = eigh(x)?;
        let weights = spectrum.diagonal_weights(sigma.op());
        Ok(Self::new(spectrum.eigenvalues().iter().copied().zip(weights).collect()))
    }

    /// Law of the mean of `n` independent copies.
    pub fn iid_mean(&self, n: usize) -> Self {
        let mut sum = Self::new(vec![(0.0, 1.0)]);
        for _ in 0..n {
            let mut next = Vec::with_capacity(sum.atoms.len() * self.atoms.len());
            for &(a, wa) in &sum.atoms {
                for &(b, wb) in &self.atoms {
                    next.push((a + b, wa * wb));
                }
            }
            sum = Self::new(next);
        }
        Self {
            atoms: sum.atoms.into_iter().map(|(v, w)| (v / n as f64, w)).collect(),
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, w)| v * w).sum()
    }

    /// Mass of the window `[x − δ, x + δ)`.
    pub fn window_mass(&self, w: &WindowSpec) -> f64 {
        self.atoms.iter().filter(|(v, _)| w.contains(*v)).map(|a| a.1).sum()
    }

    /// `(1/N) log ∫ e^{tNz} dμ(z)`, shift-stable.
    pub fn generating_function(&self, t: f64, n: usize) -> f64 {
        let nf = n as f64;
        let top = self
            .atoms
            .iter()
            .filter(|a| a.1 > 0.0)
            .map(|a| t * nf * a.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self
            .atoms
            .iter()
            .filter(|a| a.1 > 0.0)
            .map(|(v, w)| w * (t * nf * v - top).exp())
            .sum();
        (top + s.ln()) / nf
    }
}

/// Tail mass at one system size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailPoint {
    pub n: usize,
    /// `1 − ω(Q([x − δ, x + δ)))`.
    pub tail_mass: f64,
    /// The tail mass vanished and was replaced by the smallest positive float.
    pub floored: bool,
}

/// Fitted exponential decay rate of tail masses.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationRateEstimate {
    pub delta: f64,
    pub points: Vec<TailPoint>,
    /// Least-squares slope of `−log p_N` against `N`, smallest `N` dropped;
    /// `+∞` when every tail mass vanishes.
    pub rate: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least-squares line through `(x_i, y_i)`: `(slope, intercept, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Exponential concentration rate `C(δ)` of a family of spectral measures
/// (one per system size) around `x`.
pub fn concentration_rate(measures: &[(usize, SpectralMeasure)], x: f64, delta: f64) -> Result<ConcentrationRateEstimate> {
    if measures.len() < 3 {
        return Err(Error::InvalidParameter(
            "rate fitting needs at least three system sizes".into(),
        ));
    }
    let w = WindowSpec::new(x, delta)?;
    let mut sorted: Vec<&(usize, SpectralMeasure)> = measures.iter().collect();
    sorted.sort_by_key(|m| m.0);
    let points: Vec<TailPoint> = sorted
        .iter()
        .map(|(n, m)| {
            let tail = (m.total() - m.window_mass(&w)).max(0.0);
            let floored = tail <= 0.0;
            TailPoint {
                n: *n,
                tail_mass: if floored { f64::MIN_POSITIVE } else { tail },
                floored,
            }
        })
        .collect();
    if points.iter().all(|p| p.floored) {
        return Ok(ConcentrationRateEstimate {
            delta,
            points,
            rate: f64::INFINITY,
            residual: 0.0,
        });
    }
    let fit = &points[1..];
    let xs: Vec<f64> = fit.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = fit.iter().map(|p| -p.tail_mass.ln()).collect();
    let (rate, _, residual) = linear_fit(&xs, &ys);
    Ok(ConcentrationRateEstimate {
        delta,
        points,
        rate,
        residual,
    })
}

/// Mass of the state near its entropy per site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquipartitionReport {
    /// `ω(Q̃([−δ, δ)))` for `Q̃` the spectral measure of `(1/N)(log σ − ω(log σ))`.
    pub mass: f64,
    /// `(1/N) log mass`.
    pub log_mass_per_site: f64,
    /// Some eigenvalue of `σ` was raised to [`EIGENVALUE_FLOOR`].
    pub floored: bool,
}

/// Eigenvalues of `(1/N)(log σ − ω(log σ))` and the floor flag.
fn centered_log_spectrum(sigma: &DensityMatrix, n: usize) -> (Vec<f64>, bool) {
    let p = sigma.probabilities();
    let floored = p.iter().any(|&q| q < EIGENVALUE_FLOOR);
    let entropy = entropy_of(p);
    let values = p
        .iter()
        .map(|&q| (q.max(EIGENVALUE_FLOOR).ln() + entropy) / n as f64)
        .collect();
    (values, floored)
}

/// Asymptotic-equipartition window mass.
pub fn aep_check(sigma: &DensityMatrix, n: usize, delta: f64) -> Result<EquipartitionReport> {
    let w = WindowSpec::new(0.0, delta)?;
    let (values, floored) = centered_log_spectrum(sigma, n);
    if floored {
        log::warn!("equipartition: state has eigenvalues below {EIGENVALUE_FLOOR:e}");
    }
    let mass: f64 = values
        .iter()
        .zip(sigma.probabilities())
        .filter(|(a, _)| w.contains(**a))
        .map(|(_, p)| *p)
        .sum();
    Ok(EquipartitionReport {
        mass,
        log_mass_per_site: mass.ln() / n as f64,
        floored,
    })
}

/// Equipartition projection `P = Q̃([−δ, δ))` with its diagnostics.
#[derive(Clone, Debug)]
pub struct EquipartitionProjection {
    pub projection: Projection,
    /// `(1/N) H(ω)`.
    pub entropy_per_site: f64,
    /// `(1/N)(log Tr P − H(ω))`; `−∞` for an empty window.
    pub gap: f64,
    /// `e^{N(h−δ)} P ≤ σ^{-1} P ≤ e^{N(h+δ)} P` holds on the range of `P`.
    pub bounds_hold: bool,
    /// The window is empty at this size.
    pub empty: bool,
    pub floored: bool,
}

pub fn equipartition_projection(sigma: &DensityMatrix, n: usize, delta: f64) -> Result<EquipartitionProjection> {
    let w = WindowSpec::new(0.0, delta)?;
    let (values, floored) = centered_log_spectrum(sigma, n);
    let p = sigma.probabilities();
    let h = entropy_of(p) / n as f64;
    let keep: Vec<usize> = (0..values.len()).filter(|&i| w.contains(values[i])).collect();
    let basis = sigma.spectrum().eigenvectors().select_columns(keep.iter());
    let projection = Projection::from_basis(basis);
    let nf = n as f64;
    let (lo, hi) = (nf * (h - delta), nf * (h + delta));
    let slack = 1e-9 * nf.max(1.0);
    let bounds_hold = keep.iter().all(|&i| {
        let inv = -p[i].max(EIGENVALUE_FLOOR).ln();
        inv >= lo - slack && inv <= hi + slack
    });
    let empty = projection.is_empty();
    if empty {
        log::warn!("equipartition window [-{delta}, {delta}) is empty at N = {n}");
    }
    let gap = if empty {
        f64::NEG_INFINITY
    } else {
        (projection.rank() as f64).ln() / nf - h
    };
    Ok(EquipartitionProjection {
        projection,
        entropy_per_site: h,
        gap,
        bounds_hold,
        empty,
        floored,
    })
}

/// `ψ(t) = (1/N) log ω(e^{tN X})`.
pub fn generating_function(sigma: &DensityMatrix, x: &HermitianOperator, t: f64, n: usize) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite t = {t}")));
    }
    Ok(SpectralMeasure::from_state(sigma, x)?.generating_function(t, n))
}

/// Step of the central difference in [`generating_derivative`].
pub const GENERATING_FD_STEP: f64 = 1e-4;

/// `ψ'(0)` by central difference, the point at which the measures
/// concentrate.
pub fn generating_derivative(sigma: &DensityMatrix, x: &HermitianOperator, n: usize) -> Result<f64> {
    let m = SpectralMeasure::from_state(sigma, x)?;
    let h = GENERATING_FD_STEP;
    Ok((m.generating_function(h, n) - m.generating_function(-h, n)) / (2.0 * h))
}

/// Tolerance on `Σ K†K = I`.
pub const TRACE_PRESERVING_TOL: f64 = 1e-10;

/// Completely positive trace-preserving map `ρ ↦ Σ K ρ K†`.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    ops: Vec<DMatrix<C64>>,
}

impl KrausChannel {
    pub fn new(ops: Vec<DMatrix<C64>>) -> Result<Self> {
        let dim = ops
            .first()
            .ok_or_else(|| Error::InvalidParameter("no Kraus operators".into()))?
            .nrows();
        let mut sum = DMatrix::<C64>::zeros(dim, dim);
        for k in &ops {
            if k.nrows() != dim || k.ncols() != dim {
                return Err(Error::DimensionMismatch(dim, k.nrows()));
            }
            sum += k.adjoint() * k;
        }
        let defect = (sum - DMatrix::identity(dim, dim)).camax();
        if defect > TRACE_PRESERVING_TOL {
            return Err(Error::NotTracePreserving(defect));
        }
        Ok(Self { ops })
    }

    /// Conjugation by a unitary.
    pub fn unitary(u: DMatrix<C64>) -> Result<Self> {
        Self::new(vec![u])
    }

    /// `ρ ↦ (1 − s) ρ + s Σ_i ⟨b_i|ρ|b_i⟩ |b_i⟩⟨b_i|` for the orthonormal
    /// columns `b_i` of `basis`.
    pub fn dephasing(strength: f64, basis: &DMatrix<C64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::InvalidParameter(format!("dephasing strength {strength}")));
        }
        let dim = basis.nrows();
        let mut ops = vec![DMatrix::<C64>::identity(dim, dim) * C64::new((1.0 - strength).sqrt(), 0.0)];
        for i in 0..basis.ncols() {
            let b = basis.column(i);
            ops.push(&b * b.adjoint() * C64::new(strength.sqrt(), 0.0));
        }
        Self::new(ops)
    }

    /// Complete dephasing in the standard basis.
    pub fn full_dephasing(dim: usize) -> Result<Self> {
        Self::dephasing(1.0, &DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        check_dims(self.dim(), rho.dim())?;
        let mut out = DMatrix::<C64>::zeros(self.dim(), self.dim());
        for k in &self.ops {
            out += k * rho.op().matrix() * k.adjoint();
        }
        DensityMatrix::new(HermitianOperator::new(out)?)
    }
}

/// Relative entropies before and after a channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contraction {
    pub before: f64,
    pub after: f64,
}

impl Contraction {
    /// `after ≤ before + 1e-9`.
    pub fn contracts(&self) -> bool {
        self.after <= self.before + 1e-9 || (self.before.is_infinite() && self.before > 0.0)
    }
}

pub fn cp_contraction_check(omega: &DensityMatrix, rho: &DensityMatrix, channel: &KrausChannel) -> Result<Contraction> {
    let before = relative_entropy(omega, rho)?;
    let after = relative_entropy(&channel.apply(omega)?, &channel.apply(rho)?)?;
    Ok(Contraction { before, after })
}
