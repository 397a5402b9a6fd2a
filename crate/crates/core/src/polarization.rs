//! Two-photon polarization algebra.
//!
//! Everything lives in one shared transverse plane: a polarizer or source
//! axis is an angle measured from the common `ε1` reference direction, and
//! `ε2` is `ε1` rotated by +90°. Two-photon amplitudes are stored on the
//! ordered basis `(ε1ε1, ε1ε2, ε2ε1, ε2ε2)`; the first slot is the photon
//! registered at detector A.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for exact-algebra invariants (normalization, trace, hermiticity).
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Tsirelson bound `2√2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Local hidden-variable bound on `|⟨C⟩|`.
pub const CLASSICAL_BOUND: f64 = 2.0;

/// A polarizer (or source polarization) axis.
///
/// An axis is a line, not a ray, so the angle is kept in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "f64", from = "f64")]
pub struct PolarizerAxis(f64);

impl PolarizerAxis {
    pub fn new(radians: f64) -> Self {
        let mut angle = radians.rem_euclid(PI);
        // rem_euclid can round up to exactly π for tiny negative inputs
        if angle >= PI {
            angle = 0.0;
        }
        PolarizerAxis(angle)
    }

    pub fn from_degrees(degrees: f64) -> Self {
        Self::new(degrees.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// The axis rotated by +90°, i.e. `n⊥`.
    pub fn perpendicular(self) -> Self {
        Self::new(self.0 + FRAC_PI_2)
    }

    pub fn rotated(self, radians: f64) -> Self {
        Self::new(self.0 + radians)
    }

    /// `cos 2(θ_self − θ_other)`; insensitive to the mod-π representative.
    pub fn cos2_to(self, other: PolarizerAxis) -> f64 {
        (2.0 * (self.0 - other.0)).cos()
    }

    /// Unit vector `|n⟩` along the axis.
    pub fn unit(self) -> Vector2<f64> {
        Vector2::new(self.0.cos(), self.0.sin())
    }
}

impl From<PolarizerAxis> for f64 {
    fn from(axis: PolarizerAxis) -> f64 {
        axis.0
    }
}

impl From<f64> for PolarizerAxis {
    fn from(radians: f64) -> Self {
        PolarizerAxis::new(radians)
    }
}

/// One of the two registers a polarizer reports for a detected photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// Photon found along the axis (`+1`).
    Plus,
    /// Photon found along the perpendicular axis (`−1`).
    Minus,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }
}

/// The ±1-valued polarizer observable `Π = |n⟩⟨n| − |n⊥⟩⟨n⊥|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projector {
    m: Matrix2<f64>,
    axis: PolarizerAxis,
}

impl Projector {
    pub fn from_axis(axis: PolarizerAxis) -> Self {
        let (s, c) = (2.0 * axis.radians()).sin_cos();
        Projector { m: Matrix2::new(c, s, s, -c), axis }
    }

    pub fn axis(&self) -> PolarizerAxis {
        self.axis
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.m
    }

    pub fn complex(&self) -> Matrix2<C64> {
        self.m.map(|x| C64::new(x, 0.0))
    }

    /// Rank-one projector for a single outcome: `(I ± Π)/2`.
    pub fn outcome_projector(&self, outcome: Outcome) -> Matrix2<f64> {
        (Matrix2::identity() + self.m * outcome.sign()) * 0.5
    }
}

pub fn projector_from_axis(axis: PolarizerAxis) -> Projector {
    Projector::from_axis(axis)
}

/// Rank-one outcome projector `|n⟩⟨n|` (Plus) or `|n⊥⟩⟨n⊥|` (Minus).
pub fn outcome_projector(axis: PolarizerAxis, outcome: Outcome) -> Matrix2<f64> {
    Projector::from_axis(axis).outcome_projector(outcome)
}

/// Which of the two entangled linear-polarization Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BellKind {
    /// `(ε1ε1 + ε2ε2)/√2`
    Psi1,
    /// `(ε1ε2 − ε2ε1)/√2`
    Psi2,
}

impl BellKind {
    /// `(−1)^{i+1}`: the sign of the `cos 2θ_AB` correlation law.
    pub fn correlation_sign(self) -> f64 {
        match self {
            BellKind::Psi1 => 1.0,
            BellKind::Psi2 => -1.0,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            BellKind::Psi1 => 1,
            BellKind::Psi2 => 2,
        }
    }
}

impl TryFrom<u8> for BellKind {
    type Error = Error;

    fn try_from(kind: u8) -> Result<Self> {
        match kind {
            1 => Ok(BellKind::Psi1),
            2 => Ok(BellKind::Psi2),
            other => Err(Error::domain(format!("Bell state kind must be 1 or 2, got {other}"))),
        }
    }
}

impl From<BellKind> for u8 {
    fn from(kind: BellKind) -> u8 {
        kind.index()
    }
}

/// Photon helicity `±1`; `|ε±⟩ = (|ε1⟩ ± i|ε2⟩)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Helicity {
    Plus,
    Minus,
}

impl Helicity {
    pub fn ket(self) -> Vector2<C64> {
        let sign = match self {
            Helicity::Plus => 1.0,
            Helicity::Minus => -1.0,
        };
        Vector2::new(C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, sign * FRAC_1_SQRT_2))
    }
}

/// Normalized two-photon polarization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonPureState {
    amp: Vector4<C64>,
}

impl TwoPhotonPureState {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(amp: Vector4<C64>) -> Result<Self> {
        let norm_sq = amp.norm_squared();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > ALGEBRA_TOL {
            return Err(Error::domain(format!("two-photon state is not normalized: Σ|amp|² = {norm_sq}")));
        }
        Ok(TwoPhotonPureState { amp })
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(amp: Vector4<C64>) -> Result<Self> {
        let norm = amp.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::domain("cannot normalize a zero or non-finite state"));
        }
        Ok(TwoPhotonPureState { amp: amp / C64::new(norm, 0.0) })
    }

    /// Tensor product `|u⟩ ⊗ |v⟩` of two single-photon kets.
    pub fn product(u: &Vector2<C64>, v: &Vector2<C64>) -> Result<Self> {
        Self::normalized(tensor(u, v))
    }

    pub fn amplitudes(&self) -> &Vector4<C64> {
        &self.amp
    }

    pub fn inner(&self, other: &TwoPhotonPureState) -> C64 {
        self.amp.dotc(&other.amp)
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, op: &Matrix4<C64>) -> C64 {
        self.amp.dotc(&(op * self.amp))
    }

    pub fn density(&self) -> Matrix4<C64> {
        self.amp * self.amp.adjoint()
    }
}

/// `|u⟩ ⊗ |v⟩` on the ordered basis `(ε1ε1, ε1ε2, ε2ε1, ε2ε2)`.
pub fn tensor(u: &Vector2<C64>, v: &Vector2<C64>) -> Vector4<C64> {
    Vector4::new(u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1])
}

pub fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

pub fn bell_state(kind: BellKind) -> TwoPhotonPureState {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let z = C64::new(0.0, 0.0);
    let amp = match kind {
        BellKind::Psi1 => Vector4::new(h, z, z, h),
        BellKind::Psi2 => Vector4::new(z, h, -h, z),
    };
    TwoPhotonPureState { amp }
}

pub fn product_helicity_state(h1: Helicity, h2: Helicity) -> TwoPhotonPureState {
    // the product of two unit kets is already a unit vector
    TwoPhotonPureState { amp: tensor(&h1.ket(), &h2.ket()) }
}

/// `Π_a ⊗ Π_b` as a 4×4 complex operator.
pub fn joint_observable(a: PolarizerAxis, b: PolarizerAxis) -> Matrix4<C64> {
    kron(&Projector::from_axis(a).complex(), &Projector::from_axis(b).complex())
}

/// `⟨ψ|Π_a ⊗ Π_b|ψ⟩`.
pub fn correlator(state: &TwoPhotonPureState, a: PolarizerAxis, b: PolarizerAxis) -> f64 {
    state.expectation(&joint_observable(a, b)).re
}

/// The four polarizer settings of a CHSH test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshConfiguration {
    pub a: PolarizerAxis,
    pub a_prime: PolarizerAxis,
    pub b: PolarizerAxis,
    pub b_prime: PolarizerAxis,
}

impl ChshConfiguration {
    /// Sign of each term of `C = Π_AΠ_B + Π_A'Π_B + Π_AΠ_B' − Π_A'Π_B'`.
    pub const SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

    pub fn new(a: PolarizerAxis, a_prime: PolarizerAxis, b: PolarizerAxis, b_prime: PolarizerAxis) -> Self {
        ChshConfiguration { a, a_prime, b, b_prime }
    }

    /// Settings saturating `2√2` for `ψ1`: `θ_AB = θ_AB' = θ_A'B = π/8`,
    /// `θ_A'B' = 3π/8`.
    pub fn bell_optimal() -> Self {
        let eighth = FRAC_PI_4 / 2.0;
        ChshConfiguration {
            a: PolarizerAxis::new(0.0),
            a_prime: PolarizerAxis::new(FRAC_PI_4),
            b: PolarizerAxis::new(eighth),
            b_prime: PolarizerAxis::new(-eighth),
        }
    }

    /// `(A,B), (A',B), (A,B'), (A',B')`, matching [`Self::SIGNS`].
    pub fn settings(&self) -> [(PolarizerAxis, PolarizerAxis); 4] {
        [(self.a, self.b), (self.a_prime, self.b), (self.a, self.b_prime), (self.a_prime, self.b_prime)]
    }

    pub fn rotated(&self, radians: f64) -> Self {
        ChshConfiguration {
            a: self.a.rotated(radians),
            a_prime: self.a_prime.rotated(radians),
            b: self.b.rotated(radians),
            b_prime: self.b_prime.rotated(radians),
        }
    }
}

impl Default for ChshConfiguration {
    fn default() -> Self {
        Self::bell_optimal()
    }
}

/// Combines the four setting correlators with the CHSH signs.
pub fn chsh_combination(correlators: [f64; 4]) -> f64 {
    correlators.iter().zip(ChshConfiguration::SIGNS).map(|(e, s)| e * s).sum()
}

pub fn chsh_operator(cfg: &ChshConfiguration) -> Matrix4<C64> {
    cfg.settings()
        .iter()
        .zip(ChshConfiguration::SIGNS)
        .fold(Matrix4::zeros(), |acc, (&(x, y), s)| acc + joint_observable(x, y) * C64::new(s, 0.0))
}

pub fn chsh_expectation(state: &TwoPhotonPureState, cfg: &ChshConfiguration) -> f64 {
    chsh_combination(cfg.settings().map(|(x, y)| correlator(state, x, y)))
}

/// `C²`, built from the tensor-product operators and squared explicitly.
///
/// It equals `4·I − [Π_A,Π_A'] ⊗ [Π_B,Π_B']`; see [`chsh_square_bell_value`]
/// for the scalar it takes on the span of the two Bell states.
pub fn chsh_operator_square(cfg: &ChshConfiguration) -> Matrix4<C64> {
    let c = chsh_operator(cfg);
    c * c
}

/// `4·I − [Π_A,Π_A'] ⊗ [Π_B,Π_B']`.
pub fn chsh_square_commutator_form(cfg: &ChshConfiguration) -> Matrix4<C64> {
    let comm = |x: PolarizerAxis, y: PolarizerAxis| {
        let (px, py) = (Projector::from_axis(x).complex(), Projector::from_axis(y).complex());
        px * py - py * px
    };
    Matrix4::identity() * C64::new(4.0, 0.0) - kron(&comm(cfg.a, cfg.a_prime), &comm(cfg.b, cfg.b_prime))
}

/// `4(1 + sin 2θ_AA' sin 2θ_BB')` with `θ_AA' = θ_A − θ_A'` and
/// `θ_BB' = θ_B' − θ_B`: the eigenvalue of `C²` on span{ψ1, ψ2}.
///
/// On the orthogonal complement the eigenvalue is `4(1 − sin 2θ_AA' sin 2θ_BB')`,
/// so `C²` is a multiple of the identity only when the product of sines vanishes.
pub fn chsh_square_bell_value(cfg: &ChshConfiguration) -> f64 {
    let s_a = (2.0 * (cfg.a.radians() - cfg.a_prime.radians())).sin();
    let s_b = (2.0 * (cfg.b_prime.radians() - cfg.b.radians())).sin();
    4.0 * (1.0 + s_a * s_b)
}

/// Single-photon density matrix of a partially polarized source,
/// `[(1+2α)|n⟩⟨n| + |n⊥⟩⟨n⊥|] / (2+2α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceDensityMatrix {
    rho: Matrix2<C64>,
    axis: PolarizerAxis,
    alpha: f64,
}

impl SourceDensityMatrix {
    pub fn new(axis: PolarizerAxis, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::domain(format!("net polarization alpha must be finite and ≥ 0, got {alpha}")));
        }
        let n = axis.unit();
        let n_perp = axis.perpendicular().unit();
        let rho = (n * n.transpose() * (1.0 + 2.0 * alpha) + n_perp * n_perp.transpose()) / (2.0 + 2.0 * alpha);
        Ok(SourceDensityMatrix { rho: rho.map(|x| C64::new(x, 0.0)), axis, alpha })
    }

    pub fn unpolarized() -> Self {
        Self::new(PolarizerAxis::new(0.0), 0.0).expect("alpha = 0 is valid")
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.rho
    }

    pub fn axis(&self) -> PolarizerAxis {
        self.axis
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Conventional degree of polarization, `α/(1+α)`.
    pub fn degree_of_polarization(&self) -> f64 {
        self.alpha / (1.0 + self.alpha)
    }

    /// `(λ_along, λ_perp) = ((1+2α)/(2+2α), 1/(2+2α))`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let d = 2.0 + 2.0 * self.alpha;
        ((1.0 + 2.0 * self.alpha) / d, 1.0 / d)
    }
}

pub fn source_density(axis: PolarizerAxis, alpha: f64) -> Result<SourceDensityMatrix> {
    SourceDensityMatrix::new(axis, alpha)
}

/// Validated two-photon density matrix (Hermitian, PSD, unit trace).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPhotonDensity {
    rho: Matrix4<C64>,
}

impl TwoPhotonDensity {
    pub fn new(rho: Matrix4<C64>) -> Result<Self> {
        let herm_err = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !herm_err.is_finite() || herm_err > ALGEBRA_TOL {
            return Err(Error::domain(format!("density matrix is not Hermitian (max |ρ − ρ†| = {herm_err:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > ALGEBRA_TOL || tr.im.abs() > ALGEBRA_TOL {
            return Err(Error::domain(format!("density matrix trace is {tr}, expected 1")));
        }
        let min_eig = rho.symmetric_eigenvalues().min();
        if min_eig < -ALGEBRA_TOL {
            return Err(Error::domain(format!("density matrix is not positive semidefinite (eigenvalue {min_eig:e})")));
        }
        Ok(TwoPhotonDensity { rho })
    }

    pub fn from_pure(state: &TwoPhotonPureState) -> Self {
        TwoPhotonDensity { rho: state.density() }
    }

    /// `ρ_A ⊗ ρ_B` for two independent photons.
    pub fn product(first: &SourceDensityMatrix, second: &SourceDensityMatrix) -> Self {
        TwoPhotonDensity { rho: kron(first.matrix(), second.matrix()) }
    }

    pub fn maximally_mixed() -> Self {
        TwoPhotonDensity { rho: Matrix4::identity() * C64::new(0.25, 0.0) }
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.rho
    }

    /// Partial trace over the second (detector B) photon.
    pub fn reduced_first(&self) -> Matrix2<C64> {
        Matrix2::from_fn(|r, c| self.rho[(2 * r, 2 * c)] + self.rho[(2 * r + 1, 2 * c + 1)])
    }
}

/// Born-rule probability of registering `(oa, ob)` with polarizers at `a`, `b`.
pub fn joint_outcome_probability(
    rho: &TwoPhotonDensity,
    a: PolarizerAxis,
    b: PolarizerAxis,
    oa: Outcome,
    ob: Outcome,
) -> f64 {
    let pa = outcome_projector(a, oa).map(|x| C64::new(x, 0.0));
    let pb = outcome_projector(b, ob).map(|x| C64::new(x, 0.0));
    (rho.matrix() * kron(&pa, &pb)).trace().re
}
