//! Signal + background coincidence model for the two sky configurations.
//!
//! Entangled pairs and unentangled background pairs are mixed by rate: with
//! entangled fraction `f`, pair weights `w_sig = |D_1A D_2B + D_2A D_1B|²` and
//! `w_bg` (the total background rate), the observed correlator is
//!
//! ```text
//! E = [f·w_sig·E_sig + (1−f)·w_bg·E_bg] / [f·w_sig + (1−f)·w_bg]
//! ```
//!
//! In the large-angle configuration ([`Scenario::II`]) the cross paths
//! `D_2A`, `D_1B` are masked out, so there is no interference and the
//! background correlator separates into `f(θ_A)·g(θ_B)`.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::{background_outcome_rates, background_total_rate, BackgroundSpec, OutcomeRates};
use crate::error::{Error, Result};
use crate::polarization::{
    bell_state, chsh_combination, correlator, BellKind, ChshConfiguration, PolarizerAxis, ALGEBRA_TOL, CLASSICAL_BOUND,
};
use crate::propagation::{
    entangled_pair_weight, path_amplitudes, scenario2_mask, Geometry, Normalization, PathAmplitudeSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Small angular separation: both sources in both fields of view.
    I,
    /// Large angular separation: source 1 seen by A only, source 2 by B only.
    II,
}

impl Scenario {
    pub fn has_interference(self) -> bool {
        matches!(self, Scenario::I)
    }
}

/// How source emission phases are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum PhaseMode {
    /// Fresh uniform `φ1, φ2` for every sampled pair.
    #[default]
    PerPair,
    /// Fixed emission phases (radians).
    Fixed { phi1: f64, phi2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub bell_kind: BellKind,
    pub entangled_fraction: f64,
    pub background: BackgroundSpec,
    pub geometry: Geometry,
    pub normalization: Normalization,
    pub phase_mode: PhaseMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let f = self.entangled_fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::domain(format!("entangled fraction must lie in [0, 1], got {f}")));
        }
        self.geometry.validate()
    }

    /// Path amplitudes with the given emission phases, masked in Scenario II.
    pub fn amplitudes_with_phases(&self, phi1: f64, phi2: f64) -> Result<PathAmplitudeSet> {
        let amps = path_amplitudes(&self.geometry, phi1, phi2, self.normalization)?;
        Ok(match self.scenario {
            Scenario::I => amps,
            Scenario::II => scenario2_mask(&amps),
        })
    }

    /// Amplitudes used by the analytic model (fixed phases, or zero phases
    /// in per-pair mode; every rate is independent of the emission phases).
    pub fn amplitudes(&self) -> Result<PathAmplitudeSet> {
        let (phi1, phi2) = match self.phase_mode {
            PhaseMode::Fixed { phi1, phi2 } => (phi1, phi2),
            PhaseMode::PerPair => (0.0, 0.0),
        };
        self.amplitudes_with_phases(phi1, phi2)
    }

    /// Same experiment with every polarizer-independent axis (the source
    /// polarization axes) rotated by `radians`.
    pub fn rotated(&self, radians: f64) -> Result<Self> {
        Ok(ExperimentConfig { background: self.background.rotated(radians)?, ..*self })
    }
}

/// Diagnostic decomposition of a coincidence correlator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorParts {
    pub e_signal: f64,
    pub e_background: f64,
    pub w_signal: f64,
    pub w_background: f64,
    /// `f·w_sig / (f·w_sig + (1−f)·w_bg)`: probability a pair is entangled.
    pub signal_share: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub e: f64,
    pub parts: CorrelatorParts,
    /// Background register rates; `None` when the background rate vanishes.
    pub background_rates: Option<OutcomeRates>,
}

/// Mixture weights for a given amplitude set.
pub(crate) fn signal_share(f: f64, w_signal: f64, w_background: f64) -> Result<f64> {
    let denom = f * w_signal + (1.0 - f) * w_background;
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::domain(format!(
            "zero total coincidence weight (f = {f}, w_signal = {w_signal}, w_background = {w_background})"
        )));
    }
    Ok(f * w_signal / denom)
}

pub(crate) fn correlation_for_amplitudes(
    cfg: &ExperimentConfig,
    amps: &PathAmplitudeSet,
    a: PolarizerAxis,
    b: PolarizerAxis,
) -> Result<Correlation> {
    let e_signal = correlator(&bell_state(cfg.bell_kind), a, b);
    let w_signal = entangled_pair_weight(amps);
    let w_background = background_total_rate(&cfg.background, amps);
    let (e_background, background_rates) = if w_background > 0.0 {
        let rates = background_outcome_rates(&cfg.background, amps, a, b)?;
        (rates.correlator()?, Some(rates))
    } else {
        (0.0, None)
    };
    let share = signal_share(cfg.entangled_fraction, w_signal, w_background)?;
    Ok(Correlation {
        e: share * e_signal + (1.0 - share) * e_background,
        parts: CorrelatorParts { e_signal, e_background, w_signal, w_background, signal_share: share },
        background_rates,
    })
}

pub fn coincidence_correlator(cfg: &ExperimentConfig, a: PolarizerAxis, b: PolarizerAxis) -> Result<Correlation> {
    cfg.validate()?;
    correlation_for_amplitudes(cfg, &cfg.amplitudes()?, a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub theta_a: f64,
    pub theta_b: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E_signal")]
    pub e_signal: f64,
    #[serde(rename = "E_background")]
    pub e_background: f64,
    pub w_signal: f64,
    pub w_background: f64,
    /// Standard error of `E` for Monte Carlo rows.
    #[serde(rename = "E_stderr", default, skip_serializing_if = "Option::is_none")]
    pub e_stderr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub scenario: Scenario,
    /// Row-major over `(grid_a, grid_b)`.
    pub rows: Vec<ScanRow>,
}

impl ScanResult {
    /// `E` values as a `len_a × len_b` matrix (row-major scans only).
    pub fn e_matrix(&self, len_a: usize, len_b: usize) -> Option<nalgebra::DMatrix<f64>> {
        (self.rows.len() == len_a * len_b)
            .then(|| nalgebra::DMatrix::from_row_iterator(len_a, len_b, self.rows.iter().map(|r| r.e)))
    }
}

pub(crate) fn grid_pairs(grid_a: &[f64], grid_b: &[f64]) -> Result<Vec<(PolarizerAxis, PolarizerAxis)>> {
    if grid_a.is_empty() || grid_b.is_empty() {
        return Err(Error::domain("angular scan grids must be non-empty"));
    }
    if grid_a.iter().chain(grid_b).any(|t| !t.is_finite()) {
        return Err(Error::domain("angular scan grids must be finite"));
    }
    Ok(grid_a
        .iter()
        .flat_map(|&ta| grid_b.iter().map(move |&tb| (PolarizerAxis::new(ta), PolarizerAxis::new(tb))))
        .collect())
}

pub(crate) fn analytic_row(c: &Correlation, a: PolarizerAxis, b: PolarizerAxis) -> ScanRow {
    ScanRow {
        theta_a: a.radians(),
        theta_b: b.radians(),
        e: c.e,
        e_signal: c.parts.e_signal,
        e_background: c.parts.e_background,
        w_signal: c.parts.w_signal,
        w_background: c.parts.w_background,
        e_stderr: None,
        n: None,
    }
}

/// Noiseless correlator on the grid `grid_a × grid_b` (radians).
pub fn angular_scan(cfg: &ExperimentConfig, grid_a: &[f64], grid_b: &[f64]) -> Result<ScanResult> {
    cfg.validate()?;
    let pairs = grid_pairs(grid_a, grid_b)?;
    let amps = cfg.amplitudes()?;
    let rows = pairs
        .par_iter()
        .map(|&(a, b)| correlation_for_amplitudes(cfg, &amps, a, b).map(|c| analytic_row(&c, a, b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult { scenario: cfg.scenario, rows })
}

/// Polarizer axes at 45° to the source axes, where the product background
/// term `cos 2θ_{A n_1} cos 2θ_{B n_2}` vanishes.
pub fn null_background_axes(spec: &BackgroundSpec) -> (PolarizerAxis, PolarizerAxis) {
    (spec.axis1().rotated(FRAC_PI_4), spec.axis2().rotated(FRAC_PI_4))
}

/// CHSH combination of the mixture correlators.
pub fn chsh_with_background(cfg: &ExperimentConfig, chsh_cfg: &ChshConfiguration) -> Result<f64> {
    cfg.validate()?;
    let amps = cfg.amplitudes()?;
    let mut e = [0.0; 4];
    for (slot, (a, b)) in e.iter_mut().zip(chsh_cfg.settings()) {
        *slot = correlation_for_amplitudes(cfg, &amps, a, b)?.e;
    }
    Ok(chsh_combination(e))
}

/// Smallest entangled fraction for which the mixture still exceeds the
/// classical bound at `chsh_cfg`; `None` if even `f = 1` does not.
///
/// Both pair weights are independent of the polarizer angles, so `S(f)` is a
/// single linear-fractional function of `f` and the crossing is closed-form.
pub fn violation_threshold(cfg: &ExperimentConfig, chsh_cfg: &ChshConfiguration) -> Result<Option<f64>> {
    cfg.validate()?;
    let amps = cfg.amplitudes()?;
    let mut sig = [0.0; 4];
    let mut bg = [0.0; 4];
    let mut w = (0.0, 0.0);
    for ((s, g), (a, b)) in sig.iter_mut().zip(bg.iter_mut()).zip(chsh_cfg.settings()) {
        let c = correlation_for_amplitudes(&ExperimentConfig { entangled_fraction: 1.0, ..*cfg }, &amps, a, b)?;
        *s = c.parts.e_signal;
        *g = c.parts.e_background;
        w = (c.parts.w_signal, c.parts.w_background);
    }
    let (w_sig, w_bg) = w;
    let s_sig = chsh_combination(sig);
    let s_bg = chsh_combination(bg);
    let sign = s_sig.signum();
    if sign * s_sig - CLASSICAL_BOUND <= ALGEBRA_TOL || w_sig <= 0.0 {
        return Ok(None);
    }
    let excess = w_sig * (sign * s_sig - CLASSICAL_BOUND);
    let deficit = w_bg * (CLASSICAL_BOUND - sign * s_bg);
    if deficit <= 0.0 {
        // the background alone already violates (or saturates) the bound
        return Ok(Some(0.0));
    }
    Ok(Some(deficit / (excess + deficit)))
}

/// Exact coefficients of the Scenario II forward model
/// `E = S·cos 2(θ_A−θ_B) + B·cos 2(θ_A−n_1)·cos 2(θ_B−n_2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardCoefficients {
    pub signal: f64,
    pub background: f64,
}

pub fn forward_coefficients(cfg: &ExperimentConfig) -> Result<ForwardCoefficients> {
    if cfg.scenario != Scenario::II {
        return Err(Error::domain("forward coefficients are only separable in the large-angle scenario"));
    }
    cfg.validate()?;
    let amps = cfg.amplitudes()?;
    let w_sig = entangled_pair_weight(&amps);
    let w_bg = background_total_rate(&cfg.background, &amps);
    let share = signal_share(cfg.entangled_fraction, w_sig, w_bg)?;
    let p1 = cfg.background.source1.degree_of_polarization();
    let p2 = cfg.background.source2.degree_of_polarization();
    let background = if w_bg > 0.0 { (1.0 - share) * p1 * p2 } else { 0.0 };
    Ok(ForwardCoefficients { signal: share * cfg.bell_kind.correlation_sign(), background })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{polarizer_trace, PairingWeights};
    use crate::polarization::{Projector, TSIRELSON_BOUND};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    pub(crate) fn far_geometry() -> Geometry {
        Geometry {
            source1: [-400.0, 1000.0, 0.0],
            source2: [400.0, 1000.0, 0.0],
            detector_a: [-0.5, 0.0, 0.0],
            detector_b: [0.5, 0.0, 0.0],
            wavenumber: 1.0,
        }
    }

    fn config(scenario: Scenario, f: f64, alpha: f64) -> ExperimentConfig {
        ExperimentConfig {
            scenario,
            bell_kind: BellKind::Psi1,
            entangled_fraction: f,
            background: BackgroundSpec::new(
                PolarizerAxis::new(0.3),
                alpha,
                PolarizerAxis::new(1.2),
                alpha,
                PairingWeights::default(),
            )
            .unwrap(),
            geometry: far_geometry(),
            normalization: Normalization::PhaseOnly,
            phase_mode: PhaseMode::PerPair,
        }
    }

    fn ax(r: f64) -> PolarizerAxis {
        PolarizerAxis::new(r)
    }

    #[test]
    fn pure_signal_follows_cos_law() {
        let cfg = config(Scenario::II, 1.0, 1.0);
        for (a, b) in [(0.0, 0.0), (0.1, 0.9), (2.0, 0.5)] {
            let c = coincidence_correlator(&cfg, ax(a), ax(b)).unwrap();
            assert!((c.e - (2.0 * (a - b)).cos()).abs() < 1e-12);
        }
        let psi2 = ExperimentConfig { bell_kind: BellKind::Psi2, ..cfg };
        let c = coincidence_correlator(&psi2, ax(0.2), ax(0.7)).unwrap();
        assert!((c.e + (2.0 * (0.2f64 - 0.7)).cos()).abs() < 1e-12);
    }

    #[test]
    fn pure_background_is_trace_product() {
        let cfg = config(Scenario::II, 0.0, 1.0);
        for (a, b) in [(0.0, 0.0), (0.1, 0.9), (2.0, 0.5)] {
            let c = coincidence_correlator(&cfg, ax(a), ax(b)).unwrap();
            let expected = polarizer_trace(&Projector::from_axis(ax(a)), &cfg.background.source1)
                * polarizer_trace(&Projector::from_axis(ax(b)), &cfg.background.source2);
            assert!((c.e - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn nulled_background_leaves_weighted_signal() {
        // equal unit rates: E = 0.5·cos 2θ_AB at the null axis
        let cfg = config(Scenario::II, 0.5, 1.0);
        let (null_a, _) = null_background_axes(&cfg.background);
        for b in [0.0, 0.4, 1.7] {
            let c = coincidence_correlator(&cfg, null_a, ax(b)).unwrap();
            assert!(c.parts.e_background.abs() < 1e-12);
            assert!((c.parts.w_signal - 1.0).abs() < 1e-12 && (c.parts.w_background - 1.0).abs() < 1e-12);
            assert!((c.e - 0.5 * null_a.cos2_to(ax(b))).abs() < 1e-12);
        }
    }

    #[test]
    fn null_axes_examples() {
        let spec = |axis1: f64| BackgroundSpec::new(ax(axis1), 1.0, ax(0.0), 1.0, PairingWeights::default()).unwrap();
        assert!((null_background_axes(&spec(0.0)).0.radians() - FRAC_PI_4).abs() < 1e-15);
        assert!((null_background_axes(&spec(FRAC_PI_4)).0.radians() - PI / 2.0).abs() < 1e-15);
        // wraps mod π
        assert!((null_background_axes(&spec(0.9 * PI)).0.radians() - (0.15 * PI)).abs() < 1e-12);
    }

    #[test]
    fn zero_total_weight_is_domain_error() {
        let mut cfg = config(Scenario::II, 0.0, 0.0);
        cfg.background.weights = PairingWeights::new(0.0, 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(coincidence_correlator(&cfg, ax(0.0), ax(0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_fraction_rejected() {
        assert!(coincidence_correlator(&config(Scenario::II, 1.5, 0.0), ax(0.0), ax(0.0)).is_err());
    }

    #[test]
    fn scan_examples() {
        let cfg = config(Scenario::II, 0.4, 1.0);
        let one = angular_scan(&cfg, &[0.3], &[1.1]).unwrap();
        assert_eq!(one.rows.len(), 1);
        let direct = coincidence_correlator(&cfg, ax(0.3), ax(1.1)).unwrap();
        assert_eq!(one.rows[0].e, direct.e);

        let pure = config(Scenario::II, 1.0, 1.0);
        let grid_b: Vec<f64> = (0..12).map(|i| i as f64 * PI / 12.0).collect();
        let scan = angular_scan(&pure, &[0.25], &grid_b).unwrap();
        for (row, tb) in scan.rows.iter().zip(&grid_b) {
            assert!((row.e - (2.0 * (0.25 - tb)).cos()).abs() < 1e-12);
        }
        assert!(angular_scan(&cfg, &[], &[0.0]).is_err());
    }

    #[test]
    fn scan_is_row_major() {
        let cfg = config(Scenario::I, 0.4, 1.0);
        let ga = [0.1, 0.2, 0.3];
        let gb = [1.0, 2.0];
        let scan = angular_scan(&cfg, &ga, &gb).unwrap();
        let mut k = 0;
        for a in ga {
            for b in gb {
                assert!((scan.rows[k].theta_a - a).abs() < 1e-15 && (scan.rows[k].theta_b - b).abs() < 1e-15);
                k += 1;
            }
        }
    }

    #[test]
    fn chsh_mixture_examples() {
        let bell = ChshConfiguration::bell_optimal();
        let s = chsh_with_background(&config(Scenario::II, 1.0, 1.0), &bell).unwrap();
        assert!((s - TSIRELSON_BOUND).abs() < 1e-12);
        let s0 = chsh_with_background(&config(Scenario::II, 0.0, 0.0), &bell).unwrap();
        assert!(s0.abs() < 1e-15);
        let s8 = chsh_with_background(&config(Scenario::II, 0.8, 0.0), &bell).unwrap();
        assert!((s8 - 0.8 * TSIRELSON_BOUND).abs() < 1e-12);
    }

    #[test]
    fn threshold_with_unpolarized_background() {
        let cfg = config(Scenario::II, 0.5, 0.0);
        let f_star = violation_threshold(&cfg, &ChshConfiguration::bell_optimal()).unwrap().unwrap();
        assert!((f_star - FRAC_1_SQRT_2).abs() < 1e-12);
        let at = chsh_with_background(
            &ExperimentConfig { entangled_fraction: f_star, ..cfg },
            &ChshConfiguration::bell_optimal(),
        )
        .unwrap();
        assert!((at - 2.0).abs() < 1e-12);
        // settings without quantum advantage never violate
        let flat = ChshConfiguration::new(ax(0.0), ax(0.0), ax(0.0), ax(0.0));
        assert_eq!(violation_threshold(&cfg, &flat).unwrap(), None);
    }

    #[test]
    fn forward_coefficients_match_scan() {
        let cfg = config(Scenario::II, 0.3, 1.0);
        let coef = forward_coefficients(&cfg).unwrap();
        assert!((coef.signal - 0.3).abs() < 1e-12);
        assert!((coef.background - 0.7 * 0.25).abs() < 1e-12);
        let (n1, n2) = (cfg.background.axis1(), cfg.background.axis2());
        for (a, b) in [(0.0, 0.0), (0.1, 0.9), (2.0, 0.5)] {
            let e = coincidence_correlator(&cfg, ax(a), ax(b)).unwrap().e;
            let model = coef.signal * ax(a).cos2_to(ax(b)) + coef.background * ax(a).cos2_to(n1) * ax(b).cos2_to(n2);
            assert!((e - model).abs() < 1e-12);
        }
        assert!(forward_coefficients(&config(Scenario::I, 0.3, 1.0)).is_err());
    }

    #[test]
    fn scenario1_with_masked_amplitudes_matches_scenario2() {
        let s1 = config(Scenario::I, 0.35, 0.8);
        let s2 = ExperimentConfig { scenario: Scenario::II, ..s1 };
        let masked = scenario2_mask(&s1.amplitudes().unwrap());
        for (a, b) in [(0.0, 0.0), (0.1, 0.9), (2.0, 0.5)] {
            let via_i = correlation_for_amplitudes(&s1, &masked, ax(a), ax(b)).unwrap().e;
            let via_ii = coincidence_correlator(&s2, ax(a), ax(b)).unwrap().e;
            assert!((via_i - via_ii).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_model_ignores_emission_phases() {
        let base = config(Scenario::I, 0.35, 0.8);
        let shifted = ExperimentConfig { phase_mode: PhaseMode::Fixed { phi1: 1.3, phi2: -2.9 }, ..base };
        for (a, b) in [(0.0, 0.0), (0.1, 0.9), (2.0, 0.5)] {
            let e0 = coincidence_correlator(&base, ax(a), ax(b)).unwrap().e;
            let e1 = coincidence_correlator(&shifted, ax(a), ax(b)).unwrap().e;
            assert!((e0 - e1).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn common_rotation_leaves_correlator_unchanged(
            a in 0.0..PI, b in 0.0..PI, t in -PI..PI, f in 0.0..=1.0f64, alpha in 0.0..4.0f64, small in proptest::bool::ANY,
        ) {
            let scenario = if small { Scenario::I } else { Scenario::II };
            let cfg = config(scenario, f, alpha);
            let e = coincidence_correlator(&cfg, ax(a), ax(b)).unwrap().e;
            let turned = coincidence_correlator(&cfg.rotated(t).unwrap(), ax(a).rotated(t), ax(b).rotated(t)).unwrap().e;
            proptest::prop_assert!((e - turned).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_is_scale_free() {
        let mut cfg = config(Scenario::I, 0.5, 0.0);
        cfg.normalization = Normalization::Spherical;
        let bell = ChshConfiguration::bell_optimal();
        let f_star = violation_threshold(&cfg, &bell).unwrap().expect("pure signal violates");
        let at = chsh_with_background(&ExperimentConfig { entangled_fraction: f_star, ..cfg }, &bell).unwrap();
        assert!((at.abs() - 2.0).abs() < 1e-9);
    }
}
