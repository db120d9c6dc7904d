//! Quantum Kac ring.
//!
//! Each of `n` ring sites carries a qubit `ψ_i` and a classical bit
//! `ξ_i = ±1`. One time step scatters the qubits sitting on `ξ = −1` sites
//! with a fixed unitary `V` and then shifts all qubits one site to the right.
//! Product states stay product states, so the micro dynamics is stored as `n`
//! two-vectors. The macroscopic dynamics acts on the Bloch vector of the
//! one-site reduced state through `Λ_μ(ν) = p VνV† + (1 − p)ν`, `p = (1 − μ)/2`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::ensembles::linear_fit;
use crate::error::{Error, Result};
use crate::macrostate::{direction, magnetization_window, Projection, WindowSpec};
use crate::operator::{average_observable, pauli, HermitianOperator, LocalOperator, C64};
use crate::rng::{stream, StreamRng};
use crate::spin_entropy;

/// Largest ring for the dense `4^n` representation.
pub const DENSE_MAX_SITES: usize = 7;

/// Tolerance on the normalization of single-site qubit states.
pub const QUBIT_NORM_TOL: f64 = 1e-12;

/// How the scatterer configuration `ξ` is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XiSampling {
    /// Each `ξ_i = +1` independently with probability `(1 + μ)/2`.
    Iid,
    /// Exactly `round(n(1 + μ)/2)` sites carry `+1`, uniformly placed.
    ExactCount,
}

/// Scattering unitary `V = exp(−iθ â·σ⃗/2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scatterer {
    axis: [f64; 3],
    theta: f64,
}

impl Scatterer {
    pub fn new(axis: [f64; 3], theta: f64) -> Result<Self> {
        let len = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(len > 0.0) || !len.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scatterer needs a nonzero finite axis and finite angle, got {axis:?}, {theta}"
            )));
        }
        Ok(Self {
            axis: [axis[0] / len, axis[1] / len, axis[2] / len],
            theta,
        })
    }

    pub fn x_rotation(theta: f64) -> Self {
        Self {
            axis: [1.0, 0.0, 0.0],
            theta,
        }
    }

    pub fn z_rotation(theta: f64) -> Self {
        Self {
            axis: [0.0, 0.0, 1.0],
            theta,
        }
    }

    pub fn axis(&self) -> [f64; 3] {
        self.axis
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn unitary(&self) -> LocalOperator {
        let (c, s) = ((self.theta / 2.0).cos(), (self.theta / 2.0).sin());
        let [x, y, z] = pauli::all();
        let generator = x * C64::new(self.axis[0], 0.0) + y * C64::new(self.axis[1], 0.0) + z * C64::new(self.axis[2], 0.0);
        pauli::identity() * C64::new(c, 0.0) - generator * C64::new(0.0, s)
    }

    /// Rotation `R` of Bloch vectors with `V ν(m) V† = ν(R m)`.
    pub fn rotation(&self) -> Matrix3<f64> {
        let a = Vector3::from(self.axis);
        let k = a.cross_matrix();
        Matrix3::identity() + k * self.theta.sin() + k * k * (1.0 - self.theta.cos())
    }
}

/// Initial single-site qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialQubit {
    /// Every site starts in this normalized pure state.
    Pure([C64; 2]),
    /// Sites start in pure `±` eigenstates of `m̂·σ⃗`, drawn with
    /// probabilities `(1 ± |m|)/2`, so the expected Bloch vector is `m`.
    Bloch([f64; 3]),
}

impl InitialQubit {
    pub fn bloch_vector(&self) -> [f64; 3] {
        match self {
            InitialQubit::Pure(psi) => bloch_of(psi),
            InitialQubit::Bloch(m) => *m,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            InitialQubit::Pure(psi) => {
                let norm = psi[0].norm_sqr() + psi[1].norm_sqr();
                if (norm - 1.0).abs() > QUBIT_NORM_TOL {
                    return Err(Error::InvalidParameter(format!("initial qubit has norm² {norm}")));
                }
            }
            InitialQubit::Bloch(m) => {
                let len = norm3(*m);
                if !(len <= 1.0 + 1e-12) {
                    return Err(Error::InvalidParameter(format!("initial Bloch vector has length {len}")));
                }
            }
        }
        Ok(())
    }
}

/// Bloch vector `⟨ψ|σ⃗|ψ⟩` of a normalized qubit.
pub fn bloch_of(psi: &[C64; 2]) -> [f64; 3] {
    let cross = psi[0].conj() * psi[1];
    [
        2.0 * cross.re,
        2.0 * cross.im,
        psi[0].norm_sqr() - psi[1].norm_sqr(),
    ]
}

fn norm3(m: [f64; 3]) -> f64 {
    (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt()
}

/// Parameters of a Kac ring run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KacConfig {
    pub n_sites: usize,
    pub mu: f64,
    pub scatterer: Scatterer,
    pub initial: InitialQubit,
    pub sampling: XiSampling,
    pub seed: u64,
    pub horizon: usize,
}

impl Default for KacConfig {
    fn default() -> Self {
        Self {
            n_sites: 1000,
            mu: 0.0,
            scatterer: Scatterer::x_rotation(0.3),
            initial: InitialQubit::Bloch([0.0, 0.0, 0.9]),
            sampling: XiSampling::ExactCount,
            seed: 0,
            horizon: 20,
        }
    }
}

impl KacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidParameter("n_sites must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidParameter(format!("mu = {} outside [-1, 1]", self.mu)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be positive".into()));
        }
        self.initial.validate()
    }
}

/// A drawn scatterer configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct XiSample {
    pub xi: Vec<i8>,
    /// `n(1 + μ)/2` was not an integer in exact-count mode.
    pub rounded: bool,
}

/// Draws `ξ` from `rng` according to the configured ensemble.
pub fn sample_xi_with(config: &KacConfig, rng: &mut StreamRng) -> Result<XiSample> {
    config.validate()?;
    let n = config.n_sites;
    let p_plus = (1.0 + config.mu) / 2.0;
    match config.sampling {
        XiSampling::Iid => Ok(XiSample {
            xi: (0..n)
                .map(|_| if rng.random::<f64>() < p_plus { 1 } else { -1 })
                .collect(),
            rounded: false,
        }),
        XiSampling::ExactCount => {
            let exact = n as f64 * p_plus;
            let plus = exact.round() as usize;
            let rounded = (exact - plus as f64).abs() > 1e-9;
            if rounded {
                log::warn!("exact-count sampling: n(1+mu)/2 = {exact} rounded to {plus}");
            }
            let mut xi: Vec<i8> = (0..n).map(|i| if i < plus { 1 } else { -1 }).collect();
            xi.shuffle(rng);
            Ok(XiSample { xi, rounded })
        }
    }
}

/// Draws `ξ` from the stream `0` of the configured seed.
pub fn sample_xi(config: &KacConfig) -> Result<XiSample> {
    sample_xi_with(config, &mut stream(config.seed, 0))
}

/// Product micro state `(ψ_1, …, ψ_n; ξ_1, …, ξ_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KacMicroState {
    xi: Vec<i8>,
    psi: Vec<[C64; 2]>,
}

impl KacMicroState {
    pub fn new(xi: Vec<i8>, psi: Vec<[C64; 2]>) -> Result<Self> {
        if xi.len() != psi.len() || xi.is_empty() {
            return Err(Error::DimensionMismatch(xi.len(), psi.len()));
        }
        if let Some(bad) = xi.iter().find(|&&x| x != 1 && x != -1) {
            return Err(Error::InvalidParameter(format!("xi entry {bad} is not ±1")));
        }
        for (i, p) in psi.iter().enumerate() {
            let norm = p[0].norm_sqr() + p[1].norm_sqr();
            if (norm - 1.0).abs() > QUBIT_NORM_TOL {
                return Err(Error::InvalidParameter(format!("qubit {} has norm² {norm}", i + 1)));
            }
        }
        Ok(Self { xi, psi })
    }

    /// Random initial state: `ξ` and then the qubits, both from `rng`.
    pub fn sample(config: &KacConfig, rng: &mut StreamRng) -> Result<Self> {
        let xi = sample_xi_with(config, rng)?.xi;
        let psi = match config.initial {
            InitialQubit::Pure(p) => vec![p; config.n_sites],
            InitialQubit::Bloch(m) => {
                let (e, len) = direction(m);
                let [up, down] = crate::macrostate::aligned_eigenvectors(e);
                let p_up = (1.0 + len.min(1.0)) / 2.0;
                (0..config.n_sites)
                    .map(|_| if rng.random::<f64>() < p_up { up } else { down })
                    .collect()
            }
        };
        Self::new(xi, psi)
    }

    pub fn n_sites(&self) -> usize {
        self.xi.len()
    }

    pub fn xi(&self) -> &[i8] {
        &self.xi
    }

    pub fn qubits(&self) -> &[[C64; 2]] {
        &self.psi
    }

    /// One step `U = S V`: scatter on `ξ = −1` sites, then shift right.
    pub fn step(&self, v: &LocalOperator) -> Self {
        let n = self.n_sites();
        let mut psi = vec![[C64::new(0.0, 0.0); 2]; n];
        for i in 0..n {
            let q = self.psi[i];
            let scattered = if self.xi[i] < 0 {
                [v[(0, 0)] * q[0] + v[(0, 1)] * q[1], v[(1, 0)] * q[0] + v[(1, 1)] * q[1]]
            } else {
                q
            };
            psi[(i + 1) % n] = scattered;
        }
        Self {
            xi: self.xi.clone(),
            psi,
        }
    }

    /// `(μ, m⃗)` with `μ` the mean of `ξ` and `m_α = (1/n) Σ_i ⟨ψ_i|σ^α|ψ_i⟩`.
    pub fn readout(&self) -> (f64, [f64; 3]) {
        let n = self.n_sites() as f64;
        let mu = self.xi.iter().map(|&x| x as f64).sum::<f64>() / n;
        let mut m = [0.0; 3];
        for p in &self.psi {
            let b = bloch_of(p);
            for a in 0..3 {
                m[a] += b[a];
            }
        }
        (mu, m.map(|v| v / n))
    }

    /// State vector in the `4^n` space: qubits ⊗ classical bits, site 1 as
    /// the most significant factor, bit `1` for `ξ = −1`.
    pub fn to_dense(&self) -> Result<DenseKacState> {
        let n = self.n_sites();
        if n > DENSE_MAX_SITES {
            return Err(Error::DimensionCap {
                n_sites: n,
                cap: 1 << (2 * DENSE_MAX_SITES),
            });
        }
        let q = product_vector(&self.psi);
        let bits = xi_index(&self.xi);
        let mut v = DVector::zeros(1 << (2 * n));
        for (a, amp) in q.iter().enumerate() {
            v[(a << n) | bits] = *amp;
        }
        Ok(DenseKacState { n, amplitudes: v })
    }
}

/// `⊗_i ψ_i` with site 1 as the most significant factor.
fn product_vector(psi: &[[C64; 2]]) -> DVector<C64> {
    let n = psi.len();
    DVector::from_fn(1 << n, |a, _| {
        (0..n).fold(C64::new(1.0, 0.0), |acc, i| acc * psi[i][(a >> (n - 1 - i)) & 1])
    })
}

fn xi_index(xi: &[i8]) -> usize {
    let n = xi.len();
    xi.iter()
        .enumerate()
        .filter(|(_, &x)| x < 0)
        .fold(0, |acc, (i, _)| acc | (1 << (n - 1 - i)))
}

/// Applies `V` to site `site` (0-based) of a qubit register vector.
fn apply_site(v: &LocalOperator, amplitudes: &mut [C64], site: usize, n: usize, stride_bits: usize, control: Option<usize>) {
    let bit = 1usize << (n - 1 - site + stride_bits);
    for idx in 0..amplitudes.len() {
        if idx & bit != 0 {
            continue;
        }
        if let Some(mask) = control {
            if idx & mask == 0 {
                continue;
            }
        }
        let (a0, a1) = (amplitudes[idx], amplitudes[idx | bit]);
        amplitudes[idx] = v[(0, 0)] * a0 + v[(0, 1)] * a1;
        amplitudes[idx | bit] = v[(1, 0)] * a0 + v[(1, 1)] * a1;
    }
}

/// Cyclic right shift of the qubit factor: site `i` moves to site `i + 1`.
fn shift_qubits(amplitudes: &[C64], n: usize, stride_bits: usize) -> Vec<C64> {
    let low = (1usize << stride_bits) - 1;
    let mut out = vec![C64::new(0.0, 0.0); amplitudes.len()];
    for (idx, &amp) in amplitudes.iter().enumerate() {
        let q = idx >> stride_bits;
        let rotated = (q >> 1) | ((q & 1) << (n - 1));
        out[(rotated << stride_bits) | (idx & low)] = amp;
    }
    out
}

/// Vector in the full `4^n` Kac space; entangled states are allowed.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseKacState {
    n: usize,
    amplitudes: DVector<C64>,
}

impl DenseKacState {
    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// One step of `U = S V`, with `V` a site-local gate controlled by `ξ_i = −1`.
    pub fn step(&self, v: &LocalOperator) -> Self {
        let n = self.n;
        let mut amps: Vec<C64> = self.amplitudes.iter().copied().collect();
        for site in 0..n {
            let control = 1usize << (n - 1 - site);
            apply_site(v, &mut amps, site, n, n, Some(control));
        }
        let shifted = shift_qubits(&amps, n, n);
        Self {
            n,
            amplitudes: DVector::from_vec(shifted),
        }
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }
}

/// Single-site Bloch vector `m⃗` of `ν = (1 + m⃗·σ⃗)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochState {
    pub m: [f64; 3],
}

impl BlochState {
    pub fn new(m: [f64; 3]) -> Result<Self> {
        let len = norm3(m);
        if !(len <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("Bloch vector has length {len}")));
        }
        Ok(Self { m })
    }

    pub fn length(&self) -> f64 {
        norm3(self.m)
    }

    /// `ν` as a 2×2 matrix.
    pub fn density(&self) -> LocalOperator {
        let [x, y, z] = pauli::all();
        (pauli::identity() + x * C64::new(self.m[0], 0.0) + y * C64::new(self.m[1], 0.0) + z * C64::new(self.m[2], 0.0))
            * C64::new(0.5, 0.0)
    }
}

/// `Λ_μ(ν) = (1−μ)/2 VνV† + (1+μ)/2 ν` on Bloch vectors.
pub fn macro_map(nu: &BlochState, mu: f64, scatterer: &Scatterer) -> BlochState {
    let p = (1.0 - mu) / 2.0;
    let m = Vector3::from(nu.m);
    let next = scatterer.rotation() * m * p + m * (1.0 - p);
    BlochState {
        m: [next[0], next[1], next[2]],
    }
}

/// `Λ_μ^t(ν) = Σ_k C(t,k) p^k (1−p)^{t−k} V^k ν V†^k`, evaluated on 2×2
/// matrices.
pub fn macro_map_binomial(nu: &BlochState, mu: f64, scatterer: &Scatterer, t: usize) -> LocalOperator {
    let p = (1.0 - mu) / 2.0;
    let v = scatterer.unitary();
    let mut vk = pauli::identity();
    let rho = nu.density();
    let mut out = LocalOperator::zeros();
    let mut binom = 1.0f64;
    for k in 0..=t {
        if k > 0 {
            binom *= (t - k + 1) as f64 / k as f64;
            vk = v * vk;
        }
        let w = binom * p.powi(k as i32) * (1.0 - p).powi((t - k) as i32);
        out += vk * rho * vk.adjoint() * C64::new(w, 0.0);
    }
    out
}

/// Where trajectory values came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    MacroMap,
    MicroAverage,
}

/// Macroscopic trajectory `(μ, m⃗_t)` with H values, `t = 0..=T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<usize>,
    pub mu: f64,
    pub states: Vec<BlochState>,
    pub h: Vec<f64>,
    pub provenance: Provenance,
}

impl Trajectory {
    fn from_states(mu: f64, states: Vec<BlochState>, provenance: Provenance) -> Self {
        Self {
            times: (0..states.len()).collect(),
            mu,
            h: states.iter().map(|s| h_kac(mu, s.m)).collect(),
            states,
            provenance,
        }
    }
}

/// Iterates [`macro_map`] for `horizon` steps.
pub fn macro_trajectory(nu0: &BlochState, mu: f64, scatterer: &Scatterer, horizon: usize) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    if !(-1.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!("mu = {mu} outside [-1, 1]")));
    }
    let mut states = vec![*nu0];
    for _ in 0..horizon {
        let next = macro_map(states.last().unwrap(), mu, scatterer);
        states.push(next);
    }
    Ok(Trajectory::from_states(mu, states, Provenance::MacroMap))
}

/// `η((1+m)/2) + η((1−m)/2) + η((1+μ)/2) + η((1−μ)/2)` with `m = |m⃗|`;
/// `−∞` outside the unit ball.
pub fn h_kac(mu: f64, m: [f64; 3]) -> f64 {
    let len = norm3(m);
    if len > 1.0 + 1e-12 || mu.abs() > 1.0 + 1e-12 {
        return f64::NEG_INFINITY;
    }
    spin_entropy(len.min(1.0)) + spin_entropy(mu.clamp(-1.0, 1.0))
}

/// Monotonicity of H along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct HTheoremReport {
    pub monotone: bool,
    pub min_increment: f64,
    pub increments: Vec<f64>,
    /// Steps `t` with `H(t+1) < H(t) − slack`.
    pub violations: Vec<usize>,
}

/// Slack of [`h_theorem_check`].
pub const H_THEOREM_SLACK: f64 = 1e-12;

pub fn h_theorem_check(traj: &Trajectory) -> HTheoremReport {
    monotonicity(&traj.h, H_THEOREM_SLACK)
}

fn monotonicity(h: &[f64], slack: f64) -> HTheoremReport {
    let increments: Vec<f64> = h.windows(2).map(|w| w[1] - w[0]).collect();
    let violations: Vec<usize> = increments
        .iter()
        .enumerate()
        .filter(|(_, d)| **d < -slack)
        .map(|(t, _)| t)
        .collect();
    HTheoremReport {
        monotone: violations.is_empty(),
        min_increment: increments.iter().copied().fold(f64::INFINITY, f64::min),
        increments,
        violations,
    }
}

/// Reduced-variable run keeping only `(μ, m_1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterexampleConfig {
    pub scatterer: Scatterer,
    pub mu: f64,
    pub m0: [f64; 3],
    pub horizon: usize,
    /// Decreases of the reduced H larger than this count as violations.
    pub tolerance: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            scatterer: Scatterer::z_rotation(1.0),
            mu: 0.0,
            m0: [0.9, 0.0, 0.0],
            horizon: 20,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleReport {
    pub trajectory: Trajectory,
    pub m1: Vec<f64>,
    /// `η((1±m_1)/2) + η((1±μ)/2)`.
    pub reduced_h: Vec<f64>,
    pub full: HTheoremReport,
    pub reduced: HTheoremReport,
    pub violation_found: bool,
    pub first_violation: Option<usize>,
}

/// Follows `m_1(t)` along the full macroscopic trajectory and checks the
/// reduced H-function for decreases.
pub fn counterexample_run(config: &CounterexampleConfig) -> Result<CounterexampleReport> {
    let nu0 = BlochState::new(config.m0)?;
    let trajectory = macro_trajectory(&nu0, config.mu, &config.scatterer, config.horizon)?;
    let m1: Vec<f64> = trajectory.states.iter().map(|s| s.m[0]).collect();
    let reduced_h: Vec<f64> = m1.iter().map(|&m| h_kac(config.mu, [m, 0.0, 0.0])).collect();
    let reduced = monotonicity(&reduced_h, config.tolerance);
    let full = h_theorem_check(&trajectory);
    let first_violation = reduced.violations.first().copied();
    if first_violation.is_none() {
        log::info!("no reduced-H decrease within horizon {}", config.horizon);
    }
    Ok(CounterexampleReport {
        trajectory,
        m1,
        reduced_h,
        full,
        violation_found: first_violation.is_some(),
        reduced,
        first_violation,
    })
}

/// Seed-ensemble mean of the micro readout at every `t = 0..=T`.
pub fn micro_ensemble_mean(config: &KacConfig, replicas: usize) -> Result<Vec<[f64; 3]>> {
    config.validate()?;
    if replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let v = config.scatterer.unitary();
    let mut sums = vec![[0.0; 3]; config.horizon + 1];
    for r in 0..replicas {
        let mut rng = stream(config.seed, r as u64);
        let mut state = KacMicroState::sample(config, &mut rng)?;
        for (t, sum) in sums.iter_mut().enumerate() {
            if t > 0 {
                state = state.step(&v);
            }
            let (_, m) = state.readout();
            for a in 0..3 {
                sum[a] += m[a];
            }
        }
    }
    Ok(sums.into_iter().map(|s| s.map(|v| v / replicas as f64)).collect())
}

fn max_deviation(micro: &[[f64; 3]], traj: &Trajectory) -> Vec<f64> {
    micro
        .iter()
        .zip(&traj.states)
        .map(|(a, b)| norm3([a[0] - b.m[0], a[1] - b.m[1], a[2] - b.m[2]]))
        .collect()
}

/// Micro ensemble against the macroscopic map at one ring size.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub n_sites: usize,
    pub replicas: usize,
    pub micro: Vec<[f64; 3]>,
    pub macro_trajectory: Trajectory,
    /// `‖mean micro m⃗(t) − Λ^t m⃗_0‖` per `t`.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// Default number of seeds in micro ensembles.
pub const DEFAULT_REPLICAS: usize = 32;

/// Seed-ensemble mean of the micro dynamics against `Λ_μ^t`; autonomy is
/// only claimed for `T ≤ n`.
pub fn micro_vs_macro_validation(config: &KacConfig, replicas: usize) -> Result<ValidationReport> {
    config.validate()?;
    if config.horizon > config.n_sites {
        return Err(Error::InvalidParameter(format!(
            "horizon {} exceeds ring size {}; use the recurrence probe",
            config.horizon, config.n_sites
        )));
    }
    let micro = micro_ensemble_mean(config, replicas)?;
    let nu0 = BlochState::new(config.initial.bloch_vector())?;
    let macro_trajectory = macro_trajectory(&nu0, config.mu, &config.scatterer, config.horizon)?;
    let deviations = max_deviation(&micro, &macro_trajectory);
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(ValidationReport {
        n_sites: config.n_sites,
        replicas,
        micro,
        macro_trajectory,
        deviations,
        max_deviation,
    })
}

/// Deviation scaling across ring sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSweep {
    pub reports: Vec<ValidationReport>,
    /// Slope of `log max_deviation` against `log n`.
    pub slope: f64,
    /// Least-squares `c` in `max_deviation ≈ c/√n`.
    pub c: f64,
    /// Every size has `max_deviation ≤ 2c/√n`.
    pub within_band: bool,
}

pub fn validation_sweep(config: &KacConfig, sizes: &[usize], replicas: usize) -> Result<ValidationSweep> {
    if sizes.len() < 2 {
        return Err(Error::InvalidParameter("need at least two ring sizes".into()));
    }
    let reports = sizes
        .iter()
        .map(|&n| micro_vs_macro_validation(&KacConfig { n_sites: n, ..*config }, replicas))
        .collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = reports.iter().map(|r| r.max_deviation.max(f64::MIN_POSITIVE).ln()).collect();
    let (slope, _, _) = linear_fit(&lx, &ly);
    let inv: Vec<f64> = sizes.iter().map(|&n| 1.0 / (n as f64).sqrt()).collect();
    let c = inv.iter().zip(&reports).map(|(a, r)| a * r.max_deviation).sum::<f64>()
        / inv.iter().map(|a| a * a).sum::<f64>();
    let within_band = inv.iter().zip(&reports).all(|(a, r)| r.max_deviation <= 2.0 * c * a);
    Ok(ValidationSweep {
        reports,
        slope,
        c,
        within_band,
    })
}

/// Where the micro dynamics leaves the macroscopic prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrenceReport {
    /// `1/√(n R)`.
    pub band: f64,
    pub threshold: f64,
    pub deviations: Vec<f64>,
    /// First `t` with deviation above `10 × band`.
    pub departure: Option<usize>,
}

/// Runs past the autonomy horizon (`T ≥ 2n`) and reports the departure time.
pub fn recurrence_probe(config: &KacConfig, replicas: usize) -> Result<RecurrenceReport> {
    config.validate()?;
    if config.horizon < 2 * config.n_sites {
        return Err(Error::InvalidParameter(format!(
            "recurrence probe needs horizon ≥ 2n, got {} for n = {}",
            config.horizon, config.n_sites
        )));
    }
    let micro = micro_ensemble_mean(config, replicas)?;
    let nu0 = BlochState::new(config.initial.bloch_vector())?;
    let traj = macro_trajectory(&nu0, config.mu, &config.scatterer, config.horizon)?;
    let deviations = max_deviation(&micro, &traj);
    let band = 1.0 / ((config.n_sites * replicas) as f64).sqrt();
    let threshold = 10.0 * band;
    let departure = deviations.iter().position(|&d| d > threshold);
    Ok(RecurrenceReport {
        band,
        threshold,
        deviations,
        departure,
    })
}

/// Joint macrostate `P = Q_0(μ) ⊗ Q(m⃗)`, kept in factorized form.
///
/// `Q_0(μ)` is diagonal in the classical bits, so only its rank is stored;
/// `Q(m⃗)` is the magnetization window on the qubit factor.
#[derive(Clone, Debug)]
pub struct KacMacrostate {
    pub n_sites: usize,
    pub mu: f64,
    pub m: [f64; 3],
    pub delta: f64,
    pub qubit: Projection,
    /// Classical configurations `ξ` with `X_0` in the window.
    pub xi_configurations: Vec<Vec<i8>>,
}

impl KacMacrostate {
    pub fn new(n_sites: usize, mu: f64, m: [f64; 3], delta: f64) -> Result<Self> {
        if n_sites >= 24 {
            return Err(Error::DimensionCap {
                n_sites,
                cap: crate::operator::DEFAULT_DIM_CAP,
            });
        }
        let qubit = magnetization_window(n_sites, m, delta)?;
        let w = WindowSpec::new(mu, delta)?;
        let xi_configurations = (0..1usize << n_sites)
            .map(|bits| {
                (0..n_sites)
                    .map(|i| if bits >> (n_sites - 1 - i) & 1 == 1 { -1 } else { 1 })
                    .collect::<Vec<i8>>()
            })
            .filter(|xi| w.contains(xi.iter().map(|&x| x as f64).sum::<f64>() / n_sites as f64))
            .collect();
        Ok(Self {
            n_sites,
            mu,
            m,
            delta,
            qubit,
            xi_configurations,
        })
    }

    pub fn rank(&self) -> usize {
        self.qubit.rank() * self.xi_configurations.len()
    }

    /// `(1/n) log Tr P`.
    pub fn h(&self) -> f64 {
        crate::macrostate::h_from_rank(self.rank() as f64, self.n_sites)
    }

    /// Dense `4^n` projection, for small rings.
    pub fn to_dense(&self) -> Result<HermitianOperator> {
        let n = self.n_sites;
        if n > DENSE_MAX_SITES.min(6) {
            return Err(Error::DimensionCap {
                n_sites: n,
                cap: 1 << 12,
            });
        }
        let mut xi_diag = vec![0.0; 1 << n];
        for xi in &self.xi_configurations {
            xi_diag[xi_index(xi)] = 1.0;
        }
        let xi_proj = DMatrix::from_diagonal(&DVector::from_vec(xi_diag.into_iter().map(|v| C64::new(v, 0.0)).collect()));
        HermitianOperator::new(self.qubit.op().matrix().kronecker(&xi_proj))
    }

    /// Exact `tr(τ_t(X_α) | P)` for `t = 0..=T` by evolving the range of
    /// `Q(m⃗)` under `(S V_ξ)^t` for every `ξ` in the window.
    pub fn microcanonical_trajectory(&self, scatterer: &Scatterer, horizon: usize) -> Result<Trajectory> {
        let n = self.n_sites;
        if n > DENSE_MAX_SITES {
            return Err(Error::DimensionCap {
                n_sites: n,
                cap: 1 << (2 * DENSE_MAX_SITES),
            });
        }
        if self.rank() == 0 {
            return Err(Error::EmptyProjection);
        }
        let v = scatterer.unitary();
        let xs: Vec<HermitianOperator> = pauli::all()
            .iter()
            .map(|s| average_observable(s, n))
            .collect::<Result<_>>()?;
        let basis = self.qubit.basis();
        let mut sums = vec![[0.0; 3]; horizon + 1];
        for xi in &self.xi_configurations {
            let mut cols: Vec<Vec<C64>> = (0..basis.ncols()).map(|c| basis.column(c).iter().copied().collect()).collect();
            for (t, sum) in sums.iter_mut().enumerate() {
                if t > 0 {
                    for col in cols.iter_mut() {
                        for (site, &x) in xi.iter().enumerate() {
                            if x < 0 {
                                apply_site(&v, col, site, n, 0, None);
                            }
                        }
                        *col = shift_qubits(col, n, 0);
                    }
                }
                for col in &cols {
                    let vec = DVector::from_column_slice(col);
                    for a in 0..3 {
                        sum[a] += vec.dotc(&(xs[a].matrix() * &vec)).re;
                    }
                }
            }
        }
        let rank = self.rank() as f64;
        let mu = self.xi_configurations.iter().map(|xi| xi.iter().map(|&x| x as f64).sum::<f64>()).sum::<f64>()
            / (n as f64 * self.xi_configurations.len() as f64);
        let states = sums
            .into_iter()
            .map(|s| BlochState { m: s.map(|v| v / rank) })
            .collect();
        Ok(Trajectory::from_states(mu, states, Provenance::MicroAverage))
    }
}

/// `X_0, X_1, X_2, X_3` on the dense `4^n` Kac space, named `mu, m1, m2, m3`.
pub fn kac_observables(n_sites: usize) -> Result<crate::macrostate::MacroObservableSet> {
    if n_sites == 0 || n_sites > 6 {
        return Err(Error::DimensionCap {
            n_sites,
            cap: 1 << 12,
        });
    }
    let dim = 1usize << n_sites;
    let id = DMatrix::<C64>::identity(dim, dim);
    let xi_mean = DMatrix::from_diagonal(&DVector::from_fn(dim, |bits, _| {
        C64::new((n_sites as f64 - 2.0 * bits.count_ones() as f64) / n_sites as f64, 0.0)
    }));
    let mut obs = vec![("mu".to_string(), HermitianOperator::new(id.kronecker(&xi_mean))?)];
    for (a, s) in pauli::all().iter().enumerate() {
        let x = average_observable(s, n_sites)?;
        obs.push((format!("m{}", a + 1), HermitianOperator::new(x.matrix().kronecker(&id))?));
    }
    crate::macrostate::MacroObservableSet::with_radii(obs, vec![1.0 + 1e-9; 4])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn up() -> [C64; 2] {
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
    }

    fn cfg(n: usize, mu: f64) -> KacConfig {
        KacConfig {
            n_sites: n,
            mu,
            initial: InitialQubit::Pure(up()),
            ..KacConfig::default()
        }
    }

    #[test]
    fn sample_xi_examples() {
        assert!(sample_xi(&cfg(20, 1.0)).unwrap().xi.iter().all(|&x| x == 1));
        assert!(sample_xi(&cfg(20, -1.0)).unwrap().xi.iter().all(|&x| x == -1));
        let s = sample_xi(&cfg(10, 0.0)).unwrap();
        assert_eq!(s.xi.iter().filter(|&&x| x == 1).count(), 5);
        assert!(!s.rounded);
        assert!(sample_xi(&cfg(5, 0.0)).unwrap().rounded);
        let iid = KacConfig {
            sampling: XiSampling::Iid,
            ..cfg(20, 1.0)
        };
        assert!(sample_xi(&iid).unwrap().xi.iter().all(|&x| x == 1));
        assert_eq!(sample_xi(&cfg(30, 0.2)).unwrap(), sample_xi(&cfg(30, 0.2)).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(cfg(10, 2.0).validate().is_err());
        assert!(cfg(0, 0.0).validate().is_err());
        let bad = KacConfig {
            initial: InitialQubit::Bloch([1.0, 1.0, 0.0]),
            ..cfg(4, 0.0)
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scatterer_rotation_matches_conjugation() {
        let s = Scatterer::new([0.3, -0.5, 0.8], 1.1).unwrap();
        let v = s.unitary();
        assert!((v * v.adjoint() - pauli::identity()).camax() < 1e-14);
        let nu = BlochState::new([0.2, 0.5, -0.4]).unwrap();
        let rotated = v * nu.density() * v.adjoint();
        let rm = s.rotation() * Vector3::from(nu.m);
        let expected = BlochState {
            m: [rm[0], rm[1], rm[2]],
        }
        .density();
        assert!((rotated - expected).camax() < 1e-14);
    }

    #[test]
    fn step_examples() {
        let v = Scatterer::x_rotation(0.7).unitary();
        let psi: Vec<[C64; 2]> = (0..4)
            .map(|i| {
                let a = 0.3 * i as f64;
                [C64::new(a.cos(), 0.0), C64::new(0.0, a.sin())]
            })
            .collect();
        let s = KacMicroState::new(vec![1; 4], psi.clone()).unwrap();
        let next = s.step(&v);
        assert_eq!(next.qubits()[0], psi[3]);
        assert_eq!(next.qubits()[1], psi[0]);
        for (a, b) in next.readout().1.iter().zip(s.readout().1) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }

        let one = KacMicroState::new(vec![-1], vec![up()]).unwrap();
        let stepped = one.step(&v);
        assert_eq!(stepped.qubits()[0][0], v[(0, 0)]);
        assert_eq!(stepped.qubits()[0][1], v[(1, 0)]);
    }

    #[test]
    fn readout_examples() {
        let s = KacMicroState::new(vec![1, -1, 1], vec![up(); 3]).unwrap();
        let (mu, m) = s.readout();
        assert_abs_diff_eq!(mu, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(m, [0.0, 0.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = [C64::new(h, 0.0), C64::new(h, 0.0)];
        let (_, m) = KacMicroState::new(vec![1; 2], vec![plus; 2]).unwrap().readout();
        assert_abs_diff_eq!(m[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[2], 0.0, epsilon = 1e-15);
    }

    /// Full `4^n` unitary of one step, assembled column by column from basis
    /// states.
    fn dense_step_matrix(n: usize, v: &LocalOperator) -> DMatrix<C64> {
        let dim = 1 << (2 * n);
        let mut u = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let q = col >> n;
            let bits = col & ((1 << n) - 1);
            // Scatter: amplitudes of the qubit register after site-local gates.
            let mut amps = vec![(q, C64::new(1.0, 0.0))];
            for site in 0..n {
                if bits >> (n - 1 - site) & 1 == 0 {
                    continue;
                }
                let shift = n - 1 - site;
                let mut next = Vec::new();
                for (idx, a) in amps {
                    let b = (idx >> shift) & 1;
                    for out in 0..2 {
                        next.push(((idx & !(1 << shift)) | (out << shift), a * v[(out, b)]));
                    }
                }
                amps = next;
            }
            for (idx, a) in amps {
                let rotated = (idx >> 1) | ((idx & 1) << (n - 1));
                u[((rotated << n) | bits, col)] += a;
            }
        }
        u
    }

    #[test]
    fn dense_path_matches_unitary_matrix() {
        let n = 3;
        let v = Scatterer::new([0.2, 0.9, -0.1], 0.8).unwrap().unitary();
        let psi: Vec<[C64; 2]> = (0..n)
            .map(|i| {
                let a = 0.4 + 0.5 * i as f64;
                [C64::new(a.cos(), 0.0), C64::from_polar(a.sin(), 0.3 * i as f64)]
            })
            .collect();
        let s = KacMicroState::new(vec![-1, 1, -1], psi).unwrap();
        let u = dense_step_matrix(n, &v);
        assert!((u.adjoint() * &u - DMatrix::identity(64, 64)).camax() < 1e-12);
        let mut dense = s.to_dense().unwrap();
        let mut vec = dense.amplitudes().clone();
        for _ in 0..5 {
            dense = dense.step(&v);
            vec = &u * vec;
            assert!((dense.amplitudes() - &vec).camax() < 1e-12);
        }
    }

    #[test]
    fn product_path_matches_dense_path() {
        let v = Scatterer::x_rotation(0.9).unitary();
        for n in 1..=5 {
            let config = KacConfig {
                initial: InitialQubit::Bloch([0.3, 0.2, 0.6]),
                sampling: XiSampling::Iid,
                ..cfg(n, 0.0)
            };
            let mut s = KacMicroState::sample(&config, &mut stream(3, n as u64)).unwrap();
            let mut d = s.to_dense().unwrap();
            for _ in 0..10 {
                s = s.step(&v);
                d = d.step(&v);
                assert!(s.to_dense().unwrap().fidelity(&d) > 1.0 - 1e-10);
                assert_abs_diff_eq!(d.norm(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn macro_map_examples() {
        let s = Scatterer::new([0.3, 0.1, 0.9], 0.8).unwrap();
        let nu = BlochState::new([0.1, 0.2, 0.3]).unwrap();
        assert_eq!(macro_map(&nu, 1.0, &s), nu);
        let rotated = macro_map(&nu, -1.0, &s);
        assert_abs_diff_eq!(rotated.length(), nu.length(), epsilon = 1e-15);
        let flip = Scatterer::x_rotation(std::f64::consts::PI);
        let out = macro_map(&BlochState::new([0.0, 0.0, 1.0]).unwrap(), 0.0, &flip);
        for c in out.m {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn binomial_identity() {
        let s = Scatterer::new([0.5, -0.2, 0.7], 0.6).unwrap();
        let nu = BlochState::new([0.4, -0.3, 0.5]).unwrap();
        for mu in [-0.6, 0.0, 0.3] {
            let traj = macro_trajectory(&nu, mu, &s, 12).unwrap();
            for t in [0, 1, 5, 12] {
                let binom = macro_map_binomial(&nu, mu, &s, t);
                assert!((binom - traj.states[t].density()).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn h_kac_examples() {
        assert_abs_diff_eq!(h_kac(0.0, [0.0; 3]), 2.0 * 2f64.ln(), epsilon = 1e-15);
        assert_eq!(h_kac(1.0, [0.0, 0.0, 1.0]), 0.0);
        assert_abs_diff_eq!(h_kac(0.0, [0.0, 0.5, 0.0]), 1.255482, epsilon = 1e-6);
        assert_eq!(h_kac(0.0, [1.0, 1.0, 0.0]), f64::NEG_INFINITY);
        assert_eq!(h_kac(1.5, [0.0; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn h_theorem_examples() {
        let nu = BlochState::new([0.0, 0.0, 0.9]).unwrap();
        let traj = macro_trajectory(&nu, 0.0, &Scatterer::x_rotation(0.3), 50).unwrap();
        assert!(h_theorem_check(&traj).monotone);
        let still = macro_trajectory(&nu, 1.0, &Scatterer::x_rotation(0.3), 10).unwrap();
        let rep = h_theorem_check(&still);
        assert!(rep.monotone);
        assert!(rep.increments.iter().all(|&d| d == 0.0));
        let spin = macro_trajectory(&nu, -1.0, &Scatterer::x_rotation(0.3), 10).unwrap();
        assert!(h_theorem_check(&spin).increments.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn counterexample_examples() {
        let rep = counterexample_run(&CounterexampleConfig::default()).unwrap();
        assert!(rep.violation_found);
        assert!(rep.first_violation.unwrap() < 20);
        assert!(rep.full.monotone);
        let along_x = CounterexampleConfig {
            scatterer: Scatterer::x_rotation(1.0),
            ..CounterexampleConfig::default()
        };
        assert!(!counterexample_run(&along_x).unwrap().violation_found);
        let zero = CounterexampleConfig {
            m0: [0.0; 3],
            ..CounterexampleConfig::default()
        };
        assert!(!counterexample_run(&zero).unwrap().violation_found);
    }

    #[test]
    fn validation_without_scattering_is_exact() {
        let rep = micro_vs_macro_validation(&KacConfig { horizon: 10, ..cfg(50, 1.0) }, 4).unwrap();
        assert_eq!(rep.max_deviation, 0.0);
        let long = KacConfig { horizon: 60, ..cfg(50, 0.0) };
        assert!(micro_vs_macro_validation(&long, 4).is_err());
    }

    #[test]
    fn recurrence_examples() {
        let still = KacConfig { horizon: 40, ..cfg(16, 1.0) };
        assert_eq!(recurrence_probe(&still, 4).unwrap().departure, None);
        assert!(recurrence_probe(&KacConfig { horizon: 10, ..cfg(16, 0.0) }, 4).is_err());

        let k = 5;
        let s = Scatterer::x_rotation(2.0 * std::f64::consts::PI / k as f64);
        let nu = BlochState::new([0.1, 0.5, 0.6]).unwrap();
        let traj = macro_trajectory(&nu, -1.0, &s, 3 * k).unwrap();
        for t in 0..2 * k {
            for a in 0..3 {
                assert_abs_diff_eq!(traj.states[t].m[a], traj.states[t + k].m[a], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn joint_macrostate_matches_dense_construction() {
        let n = 3;
        let delta = 0.4;
        let m = [0.0, 0.0, 1.0 / 3.0];
        let joint = KacMacrostate::new(n, 1.0 / 3.0, m, delta).unwrap();
        let xs = kac_observables(n).unwrap();
        let dense = crate::macrostate::joint_window_projection(
            &[xs.op(0).unwrap().clone(), xs.op(3).unwrap().clone()],
            &[WindowSpec::new(1.0 / 3.0, delta).unwrap(), WindowSpec::new(1.0 / 3.0, delta).unwrap()],
        )
        .unwrap();
        assert_eq!(joint.rank(), dense.rank());
        assert!(joint.to_dense().unwrap().max_distance(dense.op()).unwrap() < 1e-10);
        // Three ξ patterns with one −1, three qubit patterns with one down spin.
        assert_eq!(joint.rank(), 9);
    }

    #[test]
    fn microcanonical_trajectory_starts_at_macrostate_means() {
        let joint = KacMacrostate::new(4, 0.0, [0.0, 0.0, 0.5], 0.3).unwrap();
        let traj = joint.microcanonical_trajectory(&Scatterer::x_rotation(0.3), 3).unwrap();
        assert_abs_diff_eq!(traj.states[0].m[2], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(traj.mu, 0.0, epsilon = 1e-15);
    }
}
