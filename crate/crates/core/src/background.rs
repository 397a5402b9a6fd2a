//! Coincidences from unentangled photon pairs.
//!
//! Each background pair is two independent photons with density matrices
//! `π_i`, `π_j`. For a source pairing `(i, j)` the two-detector rate is
//!
//! ```text
//!   Tr(O_A π_i) Tr(O_B π_j) |D_iA|²|D_jB|²
//! + Tr(O_A π_j) Tr(O_B π_i) |D_jA|²|D_iB|²
//! + Tr(O_A π_i O_B π_j) D_iA D_jB D_jA* D_iB*
//! + Tr(O_A π_j O_B π_i) D_iA* D_jB* D_jA D_iB
//! ```
//!
//! where `O_A`, `O_B` are the detector operators. With rank-one outcome
//! projectors this is the rate of one `(±1, ±1)` register; with the `±1`
//! observables `Π_A`, `Π_B` it is the signed (correlation-weighted) rate.
//! Same-source pairings `(1,1)`, `(2,2)` substitute both indices.

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::polarization::{Outcome, PolarizerAxis, Projector, SourceDensityMatrix, C64};
use crate::propagation::PathAmplitudeSet;

/// Relative rates of the four source pairings, normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingWeights {
    pub w12: f64,
    pub w21: f64,
    pub w11: f64,
    pub w22: f64,
}

impl PairingWeights {
    pub fn new(w12: f64, w21: f64, w11: f64, w22: f64) -> Result<Self> {
        let raw = [w12, w21, w11, w22];
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::domain(format!("pairing weights must be finite and ≥ 0, got {raw:?}")));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::domain("pairing weights sum to zero"));
        }
        Ok(PairingWeights { w12: w12 / sum, w21: w21 / sum, w11: w11 / sum, w22: w22 / sum })
    }

    fn entries(&self) -> [(Source, Source, f64); 4] {
        use Source::{One, Two};
        [(One, Two, self.w12), (Two, One, self.w21), (One, One, self.w11), (Two, Two, self.w22)]
    }
}

impl Default for PairingWeights {
    /// Cross-source pairs only.
    fn default() -> Self {
        PairingWeights { w12: 0.5, w21: 0.5, w11: 0.0, w22: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundSpec {
    pub source1: SourceDensityMatrix,
    pub source2: SourceDensityMatrix,
    pub weights: PairingWeights,
}

impl BackgroundSpec {
    pub fn new(
        axis1: PolarizerAxis,
        alpha1: f64,
        axis2: PolarizerAxis,
        alpha2: f64,
        weights: PairingWeights,
    ) -> Result<Self> {
        Ok(BackgroundSpec {
            source1: SourceDensityMatrix::new(axis1, alpha1)?,
            source2: SourceDensityMatrix::new(axis2, alpha2)?,
            weights,
        })
    }

    pub fn unpolarized() -> Self {
        BackgroundSpec {
            source1: SourceDensityMatrix::unpolarized(),
            source2: SourceDensityMatrix::unpolarized(),
            weights: PairingWeights::default(),
        }
    }

    pub fn axis1(&self) -> PolarizerAxis {
        self.source1.axis()
    }

    pub fn axis2(&self) -> PolarizerAxis {
        self.source2.axis()
    }

    /// Same spec with both source axes rotated by `radians`.
    pub fn rotated(&self, radians: f64) -> Result<Self> {
        BackgroundSpec::new(
            self.axis1().rotated(radians),
            self.source1.alpha(),
            self.axis2().rotated(radians),
            self.source2.alpha(),
            self.weights,
        )
    }

    fn density(&self, s: Source) -> &SourceDensityMatrix {
        match s {
            Source::One => &self.source1,
            Source::Two => &self.source2,
        }
    }
}

fn amp(amps: &PathAmplitudeSet, s: Source, at_a: bool) -> C64 {
    match (s, at_a) {
        (Source::One, true) => amps.d1a,
        (Source::Two, true) => amps.d2a,
        (Source::One, false) => amps.d1b,
        (Source::Two, false) => amps.d2b,
    }
}

/// `Tr(Π ρ) = α cos 2θ / (1+α)`, θ the angle between polarizer and source axes.
pub fn polarizer_trace(p: &Projector, rho: &SourceDensityMatrix) -> f64 {
    rho.degree_of_polarization() * p.axis().cos2_to(rho.axis())
}

/// `Tr(Π_A ρ_1 Π_B ρ_2)`.
pub fn interference_trace(
    pa: &Projector,
    rho1: &SourceDensityMatrix,
    pb: &Projector,
    rho2: &SourceDensityMatrix,
) -> C64 {
    (pa.complex() * rho1.matrix() * pb.complex() * rho2.matrix()).trace()
}

/// The four (complex) terms of the pairing-`(i,j)` rate for detector
/// operators `op_a`, `op_b`.
fn pairing_terms(
    op_a: &Matrix2<C64>,
    op_b: &Matrix2<C64>,
    rho_i: &Matrix2<C64>,
    rho_j: &Matrix2<C64>,
    amps: &PathAmplitudeSet,
    i: Source,
    j: Source,
) -> [C64; 4] {
    let (dia, dja) = (amp(amps, i, true), amp(amps, j, true));
    let (dib, djb) = (amp(amps, i, false), amp(amps, j, false));
    let tr = |m: Matrix2<C64>| m.trace();
    [
        tr(op_a * rho_i) * tr(op_b * rho_j) * dia.norm_sqr() * djb.norm_sqr(),
        tr(op_a * rho_j) * tr(op_b * rho_i) * dja.norm_sqr() * dib.norm_sqr(),
        tr(op_a * rho_i * op_b * rho_j) * dia * djb * dja.conj() * dib.conj(),
        tr(op_a * rho_j * op_b * rho_i) * dia.conj() * djb.conj() * dja * dib,
    ]
}

/// Per-pairing terms of the rate with detector operators `op_a`, `op_b`,
/// before weighting; ordered `(1,2), (2,1), (1,1), (2,2)`.
pub fn rate_terms(
    spec: &BackgroundSpec,
    amps: &PathAmplitudeSet,
    op_a: &Matrix2<C64>,
    op_b: &Matrix2<C64>,
) -> [[C64; 4]; 4] {
    spec.weights
        .entries()
        .map(|(i, j, _)| pairing_terms(op_a, op_b, spec.density(i).matrix(), spec.density(j).matrix(), amps, i, j))
}

fn weighted_rate(spec: &BackgroundSpec, amps: &PathAmplitudeSet, op_a: &Matrix2<C64>, op_b: &Matrix2<C64>) -> f64 {
    rate_terms(spec, amps, op_a, op_b)
        .iter()
        .zip(spec.weights.entries())
        .map(|(terms, (_, _, w))| w * terms.iter().sum::<C64>().re)
        .sum()
}

/// The four-term background expression evaluated with the `±1` polarizer
/// observables `Π_A`, `Π_B`, weighted over pairings.
///
/// This is the signed rate `R(+,+) + R(−,−) − R(+,−) − R(−,+)`, so it may be
/// negative; it is not normalized by the total rate.
pub fn background_probability(
    spec: &BackgroundSpec,
    amps: &PathAmplitudeSet,
    a: PolarizerAxis,
    b: PolarizerAxis,
) -> f64 {
    weighted_rate(spec, amps, &Projector::from_axis(a).complex(), &Projector::from_axis(b).complex())
}

/// Rate of the `(oa, ob)` register pair.
pub fn background_outcome_rate(
    spec: &BackgroundSpec,
    amps: &PathAmplitudeSet,
    a: PolarizerAxis,
    b: PolarizerAxis,
    oa: Outcome,
    ob: Outcome,
) -> Result<f64> {
    let pa = Projector::from_axis(a).outcome_projector(oa).map(|x| C64::new(x, 0.0));
    let pb = Projector::from_axis(b).outcome_projector(ob).map(|x| C64::new(x, 0.0));
    let rate = weighted_rate(spec, amps, &pa, &pb);
    if rate < -1e-12 {
        return Err(Error::Consistency(format!("negative background rate {rate:e} for outcomes ({oa:?}, {ob:?})")));
    }
    Ok(rate.max(0.0))
}

/// Total rate summed over all four registers (independent of the
/// polarizer angles).
pub fn background_total_rate(spec: &BackgroundSpec, amps: &PathAmplitudeSet) -> f64 {
    let id = Matrix2::identity();
    weighted_rate(spec, amps, &id, &id)
}

/// Outcome rates in the order `(+,+), (+,−), (−,+), (−,−)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeRates(pub [f64; 4]);

impl OutcomeRates {
    pub const ORDER: [(Outcome, Outcome); 4] = [
        (Outcome::Plus, Outcome::Plus),
        (Outcome::Plus, Outcome::Minus),
        (Outcome::Minus, Outcome::Plus),
        (Outcome::Minus, Outcome::Minus),
    ];

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `[R(++) + R(−−) − R(+−) − R(−+)] / ΣR`.
    pub fn correlator(&self) -> Result<f64> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::domain(format!("total coincidence rate is {total}, cannot normalize")));
        }
        let [pp, pm, mp, mm] = self.0;
        Ok((pp + mm - pm - mp) / total)
    }

    pub fn probabilities(&self) -> Result<[f64; 4]> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::domain(format!("total coincidence rate is {total}, cannot normalize")));
        }
        Ok(self.0.map(|r| r / total))
    }
}

pub fn background_outcome_rates(
    spec: &BackgroundSpec,
    amps: &PathAmplitudeSet,
    a: PolarizerAxis,
    b: PolarizerAxis,
) -> Result<OutcomeRates> {
    let mut rates = [0.0; 4];
    for (slot, (oa, ob)) in rates.iter_mut().zip(OutcomeRates::ORDER) {
        *slot = background_outcome_rate(spec, amps, a, b, oa, ob)?;
    }
    Ok(OutcomeRates(rates))
}

/// `±1` correlator of the background population.
pub fn background_correlator(
    spec: &BackgroundSpec,
    amps: &PathAmplitudeSet,
    a: PolarizerAxis,
    b: PolarizerAxis,
) -> Result<f64> {
    background_outcome_rates(spec, amps, a, b)?.correlator()
}
