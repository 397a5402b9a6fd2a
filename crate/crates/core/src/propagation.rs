//! Source/detector geometry, scalar path amplitudes and HBT intensities.
//!
//! Propagation is spin-independent: an amplitude `D_iX` carries the geometric
//! phase `k·r_iX`, the emission phase `φ_i` of source `i`, and optionally the
//! spherical `1/r_iX` fall-off. Polarization is transported unchanged.

use nalgebra::{Vector3, Vector4};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{chsh_operator, ChshConfiguration, TwoPhotonPureState, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub source1: [f64; 3],
    pub source2: [f64; 3],
    pub detector_a: [f64; 3],
    pub detector_b: [f64; 3],
    /// Wavenumber in inverse length units.
    pub wavenumber: f64,
}

/// The four source-to-detector distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLengths {
    pub r1a: f64,
    pub r2a: f64,
    pub r1b: f64,
    pub r2b: f64,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavenumber.is_finite() && self.wavenumber > 0.0) {
            return Err(Error::domain(format!("wavenumber must be finite and > 0, got {}", self.wavenumber)));
        }
        let all = [self.source1, self.source2, self.detector_a, self.detector_b];
        if all.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::domain("geometry coordinates must be finite"));
        }
        let r = self.raw_lengths();
        for (name, d) in [("1A", r.r1a), ("2A", r.r2a), ("1B", r.r1b), ("2B", r.r2b)] {
            if d <= 0.0 {
                return Err(Error::domain(format!("source/detector pair {name} coincides (distance {d})")));
            }
        }
        Ok(())
    }

    fn raw_lengths(&self) -> PathLengths {
        let dist = |p: [f64; 3], q: [f64; 3]| (Vector3::from(p) - Vector3::from(q)).norm();
        PathLengths {
            r1a: dist(self.source1, self.detector_a),
            r2a: dist(self.source2, self.detector_a),
            r1b: dist(self.source1, self.detector_b),
            r2b: dist(self.source2, self.detector_b),
        }
    }

    pub fn path_lengths(&self) -> Result<PathLengths> {
        self.validate()?;
        Ok(self.raw_lengths())
    }

    /// Detector separation `|d_B − d_A|`.
    pub fn baseline(&self) -> f64 {
        (Vector3::from(self.detector_b) - Vector3::from(self.detector_a)).norm()
    }

    /// Same geometry with the detectors moved symmetrically about their
    /// midpoint, along their current separation direction, to `length` apart.
    pub fn with_baseline(&self, length: f64) -> Result<Geometry> {
        let a = Vector3::from(self.detector_a);
        let b = Vector3::from(self.detector_b);
        let sep = b - a;
        let norm = sep.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::domain("detectors coincide; baseline direction is undefined"));
        }
        if !(length.is_finite() && length >= 0.0) {
            return Err(Error::domain(format!("baseline length must be ≥ 0, got {length}")));
        }
        let mid = (a + b) * 0.5;
        let half = sep * (0.5 * length / norm);
        let moved = Geometry { detector_a: (mid - half).into(), detector_b: (mid + half).into(), ..*self };
        moved.validate()?;
        Ok(moved)
    }

    /// Closed-loop geometric phase `k(r_1A + r_2B − r_2A − r_1B)` carried by
    /// the HBT interference term.
    pub fn loop_phase(&self) -> Result<f64> {
        let r = self.path_lengths()?;
        Ok(self.wavenumber * (r.r1a + r.r2b - r.r2a - r.r1b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Normalization {
    /// `e^{i(k r + φ)} / r`
    #[serde(rename = "spherical")]
    Spherical,
    /// `e^{i(k r + φ)}`
    #[default]
    #[serde(rename = "phase-only")]
    PhaseOnly,
}

/// Propagators from each source to each detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathAmplitudeSet {
    pub d1a: C64,
    pub d2a: C64,
    pub d1b: C64,
    pub d2b: C64,
}

impl PathAmplitudeSet {
    pub fn uniform(value: C64) -> Self {
        PathAmplitudeSet { d1a: value, d2a: value, d1b: value, d2b: value }
    }

    /// `D_1A D_2B D_2A* D_1B*`; its phase is the closed-loop phase.
    pub fn loop_product(&self) -> C64 {
        self.d1a * self.d2b * self.d2a.conj() * self.d1b.conj()
    }
}

pub fn path_amplitudes(
    geom: &Geometry,
    phi1: f64,
    phi2: f64,
    normalization: Normalization,
) -> Result<PathAmplitudeSet> {
    let r = geom.path_lengths()?;
    let k = geom.wavenumber;
    let amp = |dist: f64, phi: f64| {
        let phase = C64::from_polar(1.0, k * dist + phi);
        match normalization {
            Normalization::Spherical => phase / dist,
            Normalization::PhaseOnly => phase,
        }
    };
    Ok(PathAmplitudeSet { d1a: amp(r.r1a, phi1), d2a: amp(r.r2a, phi2), d1b: amp(r.r1b, phi1), d2b: amp(r.r2b, phi2) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbtIntensity {
    /// `|D_1A|²|D_2B|² + |D_2A|²|D_1B|² + 2 Re D_1A D_2B D_2A* D_1B*`
    pub total: f64,
    /// `2 Re D_1A D_2B D_2A* D_1B*`
    pub interference: f64,
}

pub fn hbt_intensity(amps: &PathAmplitudeSet) -> HbtIntensity {
    let direct = amps.d1a.norm_sqr() * amps.d2b.norm_sqr() + amps.d2a.norm_sqr() * amps.d1b.norm_sqr();
    let interference = 2.0 * amps.loop_product().re;
    HbtIntensity { total: direct + interference, interference }
}

/// One point of a detector-separation scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbtRow {
    pub baseline_length: f64,
    pub total_intensity: f64,
    pub interference_term: f64,
}

/// HBT intensities as the detectors are moved apart symmetrically.
///
/// With `seed`, every row draws its own uniform emission phases; otherwise
/// both phases are zero. The intensities do not depend on the phases.
pub fn hbt_baseline_scan(
    geom: &Geometry,
    lengths: &[f64],
    normalization: Normalization,
    seed: Option<u64>,
) -> Result<Vec<HbtRow>> {
    geom.validate()?;
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    lengths
        .iter()
        .map(|&length| {
            let (phi1, phi2) = match rng.as_mut() {
                Some(r) => (std::f64::consts::TAU * r.random::<f64>(), std::f64::consts::TAU * r.random::<f64>()),
                None => (0.0, 0.0),
            };
            let h = hbt_intensity(&path_amplitudes(&geom.with_baseline(length)?, phi1, phi2, normalization)?);
            Ok(HbtRow { baseline_length: length, total_intensity: h.total, interference_term: h.interference })
        })
        .collect()
}

/// `|D_1A D_2B + D_2A D_1B|²`, the rate factor multiplying every
/// spin expectation of a propagated entangled pair.
pub fn entangled_pair_weight(amps: &PathAmplitudeSet) -> f64 {
    (amps.d1a * amps.d2b + amps.d2a * amps.d1b).norm_sqr()
}

/// Large-angle configuration: source 1 seen only by A, source 2 only by B.
pub fn scenario2_mask(amps: &PathAmplitudeSet) -> PathAmplitudeSet {
    PathAmplitudeSet { d2a: C64::new(0.0, 0.0), d1b: C64::new(0.0, 0.0), ..*amps }
}

/// Unnormalized two-photon state at the detectors, built path by path: each
/// basis component `c_jk ε_j⊗ε_k` of the emitted pair reaches (A, B) either
/// via `D_1A D_2B` or via `D_2A D_1B`, with the spin part untouched.
pub fn propagate_pair(state: &TwoPhotonPureState, amps: &PathAmplitudeSet) -> Vector4<C64> {
    let paths = [amps.d1a * amps.d2b, amps.d2a * amps.d1b];
    let mut out = Vector4::zeros();
    for (idx, c) in state.amplitudes().iter().enumerate() {
        for path in paths {
            out[idx] += path * c;
        }
    }
    out
}

/// `⟨Ψ|C|Ψ⟩` on the propagated (unnormalized) state.
pub fn propagated_chsh(state: &TwoPhotonPureState, amps: &PathAmplitudeSet, cfg: &ChshConfiguration) -> f64 {
    let psi = propagate_pair(state, amps);
    psi.dotc(&(chsh_operator(cfg) * psi)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::{bell_state, chsh_expectation, BellKind};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn symmetric_geometry() -> Geometry {
        // sources and detectors on a square: all four paths have length √2
        Geometry {
            source1: [-1.0, 1.0, 0.0],
            source2: [1.0, 1.0, 0.0],
            detector_a: [-1.0, -1.0, 0.0],
            detector_b: [1.0, -1.0, 0.0],
            wavenumber: 3.0,
        }
    }

    fn symmetric_center() -> Geometry {
        Geometry {
            source1: [0.0, 0.0, 1.0],
            source2: [0.0, 0.0, -1.0],
            detector_a: [1.0, 0.0, 0.0],
            detector_b: [-1.0, 0.0, 0.0],
            wavenumber: 2.5,
        }
    }

    #[test]
    fn equal_paths_give_equal_amplitudes() {
        let amps = path_amplitudes(&symmetric_center(), 0.0, 0.0, Normalization::PhaseOnly).unwrap();
        for d in [amps.d2a, amps.d1b, amps.d2b] {
            assert!((d - amps.d1a).norm() < 1e-15);
        }
        let hbt = hbt_intensity(&amps);
        assert!((hbt.total - 4.0).abs() < 1e-12);
        assert!((hbt.interference - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spherical_amplitude_falls_as_inverse_distance() {
        let g1 = Geometry { detector_a: [0.0, 0.0, 1.0], source1: [0.0, 0.0, 0.0], ..symmetric_geometry() };
        let g2 = Geometry { detector_a: [0.0, 0.0, 2.0], ..g1 };
        let a1 = path_amplitudes(&g1, 0.0, 0.0, Normalization::Spherical).unwrap();
        let a2 = path_amplitudes(&g2, 0.0, 0.0, Normalization::Spherical).unwrap();
        assert!((a2.d1a.norm() - 0.5 * a1.d1a.norm()).abs() < 1e-15);
    }

    #[test]
    fn half_wave_path_difference_flips_sign() {
        // r_1A = 1, r_2A = 2 with k = π: phase difference π
        let g = Geometry {
            source1: [0.0, 0.0, 1.0],
            source2: [0.0, 0.0, 2.0],
            detector_a: [0.0, 0.0, 0.0],
            detector_b: [5.0, 0.0, 0.0],
            wavenumber: PI,
        };
        let amps = path_amplitudes(&g, 0.3, 0.3, Normalization::PhaseOnly).unwrap();
        assert!((amps.d1a + amps.d2a).norm() < 1e-14);
    }

    #[test]
    fn coincident_points_rejected() {
        let g = Geometry { detector_a: [-1.0, 1.0, 0.0], ..symmetric_geometry() };
        assert!(matches!(path_amplitudes(&g, 0.0, 0.0, Normalization::PhaseOnly), Err(Error::Domain(_))));
        let bad_k = Geometry { wavenumber: 0.0, ..symmetric_geometry() };
        assert!(bad_k.validate().is_err());
    }

    #[test]
    fn quarter_loop_phase_kills_interference() {
        let one = C64::new(1.0, 0.0);
        let amps = PathAmplitudeSet { d1a: C64::from_polar(1.0, FRAC_PI_2), d2a: one, d1b: one, d2b: one };
        assert!(hbt_intensity(&amps).interference.abs() < 1e-15);
    }

    #[test]
    fn pair_weight_examples() {
        let one = C64::new(1.0, 0.0);
        assert!((entangled_pair_weight(&PathAmplitudeSet::uniform(one)) - 4.0).abs() < 1e-15);

        let amps = PathAmplitudeSet {
            d1a: C64::new(0.3, 0.4),
            d2a: C64::new(0.0, 0.0),
            d1b: C64::new(0.0, 0.0),
            d2b: C64::new(-1.2, 0.5),
        };
        let expected = (amps.d1a * amps.d2b).norm_sqr();
        assert!((entangled_pair_weight(&amps) - expected).abs() < 1e-15);

        let opposed = PathAmplitudeSet { d1a: C64::from_polar(1.0, PI), d2a: one, d1b: one, d2b: one };
        assert!(entangled_pair_weight(&opposed) < 1e-15);
    }

    #[test]
    fn mask_removes_cross_paths() {
        let amps = PathAmplitudeSet {
            d1a: C64::new(0.3, 0.4),
            d2a: C64::new(0.7, -0.1),
            d1b: C64::new(-0.2, 0.9),
            d2b: C64::new(1.1, 0.2),
        };
        let m = scenario2_mask(&amps);
        assert_eq!(m.d2a, C64::new(0.0, 0.0));
        assert_eq!(m.d1b, C64::new(0.0, 0.0));
        assert_eq!(hbt_intensity(&m).interference, 0.0);
        assert!((entangled_pair_weight(&m) - (amps.d1a * amps.d2b).norm_sqr()).abs() < 1e-15);
    }

    #[test]
    fn baseline_rescaling_keeps_midpoint() {
        let g = symmetric_geometry();
        let moved = g.with_baseline(5.0).unwrap();
        assert!((moved.baseline() - 5.0).abs() < 1e-12);
        let mid = |g: &Geometry| (Vector3::from(g.detector_a) + Vector3::from(g.detector_b)) * 0.5;
        assert!((mid(&moved) - mid(&g)).norm() < 1e-12);
    }

    #[test]
    fn loop_phase_advances_monotonically_with_baseline() {
        // distant sources on one side, small angular separation
        let g = Geometry {
            source1: [-5.0, 1000.0, 0.0],
            source2: [5.0, 1000.0, 0.0],
            detector_a: [-0.5, 0.0, 0.0],
            detector_b: [0.5, 0.0, 0.0],
            wavenumber: 10.0,
        };
        let phases: Vec<f64> =
            (1..200).map(|i| g.with_baseline(i as f64 * 0.5).unwrap().loop_phase().unwrap()).collect();
        assert!(phases.windows(2).all(|w| w[1].abs() > w[0].abs()));
        // fringe period in baseline ≈ 2π / (k · Δθ) with Δθ ≈ 10/1000
        let slope = (phases[100] - phases[0]) / (100.0 * 0.5);
        assert!((slope.abs() - 10.0 * 0.01).abs() < 1e-3);
    }

    #[test]
    fn propagated_state_factorizes_for_both_kinds() {
        let amps =
            path_amplitudes(&symmetric_geometry().with_baseline(1.7).unwrap(), 0.4, 2.2, Normalization::Spherical)
                .unwrap();
        let cfg = ChshConfiguration::bell_optimal();
        for kind in [BellKind::Psi1, BellKind::Psi2] {
            let psi = bell_state(kind);
            let direct = propagated_chsh(&psi, &amps, &cfg);
            let factored = chsh_expectation(&psi, &cfg) * entangled_pair_weight(&amps);
            assert!((direct - factored).abs() < 1e-12);
        }
    }

    #[test]
    fn baseline_scan_is_phase_blind() {
        let geom = symmetric_geometry();
        let lengths = [0.0, 0.3, 1.7, 4.0];
        let plain = hbt_baseline_scan(&geom, &lengths, Normalization::Spherical, None).unwrap();
        let seeded = hbt_baseline_scan(&geom, &lengths, Normalization::Spherical, Some(17)).unwrap();
        for (p, q) in plain.iter().zip(&seeded) {
            assert_eq!(p.baseline_length, q.baseline_length);
            assert!((p.interference_term - q.interference_term).abs() < 1e-12);
            assert!((p.total_intensity - q.total_intensity).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_and_half_fringe_baselines() {
        // far sources at ±s, distance D: loop phase ≈ 2ksL/D
        let (s, d, k) = (50.0, 1.0e5, 2.0);
        let geom = Geometry {
            source1: [-s, d, 0.0],
            source2: [s, d, 0.0],
            detector_a: [-1.0, 0.0, 0.0],
            detector_b: [1.0, 0.0, 0.0],
            wavenumber: k,
        };
        let node = PI * d / (4.0 * k * s);
        let rows = hbt_baseline_scan(&geom, &[0.0, node, 2.0 * node], Normalization::PhaseOnly, None).unwrap();
        assert!((rows[0].interference_term - 2.0).abs() < 1e-12);
        assert!((rows[0].total_intensity - 4.0).abs() < 1e-12);
        assert!(rows[1].interference_term.abs() < 1e-3);
        assert!((rows[2].interference_term + 2.0).abs() < 1e-6);
    }
}
