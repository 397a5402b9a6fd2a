//! Finite-statistics coincidence sampling.
//!
//! Trials are split into fixed-size batches. Batch `j` of stream
//! `(seed, setting)` draws from a ChaCha8 generator keyed by `seed`, on
//! stream `setting`, starting at word position `j·2⁴⁰`, so every batch owns
//! a disjoint slice of a counter-based keystream. Batches run on the rayon
//! pool and their integer counts are summed, which makes the result
//! independent of worker count and scheduling.

use std::f64::consts::TAU;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::OutcomeRates;
use crate::error::{Error, Result};
use crate::polarization::{
    bell_state, chsh_combination, joint_outcome_probability, ChshConfiguration, PolarizerAxis, TwoPhotonDensity,
};
use crate::scenarios::{
    analytic_row, correlation_for_amplitudes, grid_pairs, Correlation, ExperimentConfig, PhaseMode, ScanResult, ScanRow,
};

/// Trials per batch.
pub const BATCH_SIZE: u64 = 1 << 16;

const BATCH_WORD_STRIDE: u128 = 1 << 40;

/// Identifies an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub seed: u64,
    /// Setting index (CHSH term, scan row, ...).
    pub setting: u64,
}

impl StreamId {
    pub fn new(seed: u64, setting: u64) -> Self {
        StreamId { seed, setting }
    }

    fn batch_rng(&self, batch: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.setting);
        rng.set_word_pos(batch as u128 * BATCH_WORD_STRIDE);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
    pub settings: (PolarizerAxis, PolarizerAxis),
    pub stream: StreamId,
}

impl SampleBatch {
    pub fn n_total(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }

    /// Counts in `(+,+), (+,−), (−,+), (−,−)` order.
    pub fn counts(&self) -> [u64; 4] {
        [self.n_pp, self.n_pm, self.n_mp, self.n_mm]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedCorrelator {
    pub e_hat: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Per-trial outcome distribution of the mixture.
#[derive(Debug, Clone, Copy)]
struct TrialModel {
    signal_share: f64,
    signal_cdf: [f64; 3],
    background_cdf: [f64; 3],
}

fn cdf(p: [f64; 4]) -> [f64; 3] {
    [p[0], p[0] + p[1], p[0] + p[1] + p[2]]
}

fn pick(cdf: &[f64; 3], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(3)
}

impl TrialModel {
    fn new(signal: [f64; 4], c: &Correlation) -> Result<Self> {
        let background = match c.background_rates {
            Some(rates) => rates.probabilities()?,
            None => [0.25; 4],
        };
        Ok(TrialModel { signal_share: c.parts.signal_share, signal_cdf: cdf(signal), background_cdf: cdf(background) })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let is_signal = rng.random::<f64>() < self.signal_share;
        let u = rng.random::<f64>();
        if is_signal {
            pick(&self.signal_cdf, u)
        } else {
            pick(&self.background_cdf, u)
        }
    }
}

/// Born-rule register probabilities of the entangled pair.
fn signal_probabilities(cfg: &ExperimentConfig, a: PolarizerAxis, b: PolarizerAxis) -> [f64; 4] {
    let rho = TwoPhotonDensity::from_pure(&bell_state(cfg.bell_kind));
    OutcomeRates::ORDER.map(|(oa, ob)| joint_outcome_probability(&rho, a, b, oa, ob))
}

fn run_batch(
    cfg: &ExperimentConfig,
    signal: &[f64; 4],
    fixed: Option<&TrialModel>,
    (a, b): (PolarizerAxis, PolarizerAxis),
    stream: StreamId,
    batch: u64,
    trials: u64,
) -> Result<[u64; 4]> {
    let mut rng = stream.batch_rng(batch);
    let mut counts = [0u64; 4];
    for _ in 0..trials {
        let slot = match fixed {
            Some(model) => model.draw(&mut rng),
            None => {
                let phi1 = rng.random::<f64>() * TAU;
                let phi2 = rng.random::<f64>() * TAU;
                let amps = cfg.amplitudes_with_phases(phi1, phi2)?;
                let model = TrialModel::new(*signal, &correlation_for_amplitudes(cfg, &amps, a, b)?)?;
                model.draw(&mut rng)
            }
        };
        counts[slot] += 1;
    }
    Ok(counts)
}

/// Draws `n` coincidence registers at settings `(a, b)`.
///
/// Each trial first picks the entangled or the background population by
/// rate, then draws `(±1, ±1)` from that population's Born-rule
/// distribution. In [`PhaseMode::PerPair`] with interference present, the
/// emission phases are redrawn for every pair.
pub fn sample_coincidences(
    cfg: &ExperimentConfig,
    a: PolarizerAxis,
    b: PolarizerAxis,
    n: u64,
    stream: StreamId,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::domain("sample size must be > 0"));
    }
    cfg.validate()?;
    let analytic = correlation_for_amplitudes(cfg, &cfg.amplitudes()?, a, b)?;
    let per_pair = cfg.phase_mode == PhaseMode::PerPair && cfg.scenario.has_interference();
    let signal = signal_probabilities(cfg, a, b);
    let fixed = if per_pair { None } else { Some(TrialModel::new(signal, &analytic)?) };

    let batches = n.div_ceil(BATCH_SIZE);
    let counts = (0..batches)
        .into_par_iter()
        .map(|j| {
            let trials = BATCH_SIZE.min(n - j * BATCH_SIZE);
            run_batch(cfg, &signal, fixed.as_ref(), (a, b), stream, j, trials)
        })
        .try_reduce(|| [0u64; 4], |x, y| Ok([x[0] + y[0], x[1] + y[1], x[2] + y[2], x[3] + y[3]]))?;
    Ok(SampleBatch { n_pp: counts[0], n_pm: counts[1], n_mp: counts[2], n_mm: counts[3], settings: (a, b), stream })
}

/// `e = (n_pp + n_mm − n_pm − n_mp)/n`, `stderr = sqrt((1 − e²)/n)`.
pub fn estimate_correlator(batch: &SampleBatch) -> Result<EstimatedCorrelator> {
    let n = batch.n_total();
    if n == 0 {
        return Err(Error::domain("cannot estimate a correlator from an empty batch"));
    }
    let nf = n as f64;
    let e_hat = (batch.n_pp as f64 + batch.n_mm as f64 - batch.n_pm as f64 - batch.n_mp as f64) / nf;
    let stderr = ((1.0 - e_hat * e_hat).max(0.0) / nf).sqrt();
    Ok(EstimatedCorrelator { e_hat, stderr, n })
}

/// Empirical register frequencies in `(+,+), (+,−), (−,+), (−,−)` order.
pub fn outcome_frequencies(batch: &SampleBatch) -> [f64; 4] {
    let n = batch.n_total() as f64;
    batch.counts().map(|c| c as f64 / n)
}

/// Analytic register probabilities of the mixture at `(a, b)`.
pub fn outcome_probabilities(cfg: &ExperimentConfig, a: PolarizerAxis, b: PolarizerAxis) -> Result<[f64; 4]> {
    cfg.validate()?;
    let c = correlation_for_amplitudes(cfg, &cfg.amplitudes()?, a, b)?;
    let model = TrialModel::new(signal_probabilities(cfg, a, b), &c)?;
    let unpack = |cdf: [f64; 3]| [cdf[0], cdf[1] - cdf[0], cdf[2] - cdf[1], 1.0 - cdf[2]];
    let (s, g) = (unpack(model.signal_cdf), unpack(model.background_cdf));
    let share = model.signal_share;
    Ok([0, 1, 2, 3].map(|k| share * s[k] + (1.0 - share) * g[k]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub s_hat: f64,
    pub stderr: f64,
    pub correlators: [EstimatedCorrelator; 4],
}

/// CHSH estimate from four independent setting streams `0..4` of `seed`.
pub fn estimate_chsh(
    cfg: &ExperimentConfig,
    chsh_cfg: &ChshConfiguration,
    n_per_setting: u64,
    seed: u64,
) -> Result<ChshEstimate> {
    let mut correlators = [EstimatedCorrelator { e_hat: 0.0, stderr: 0.0, n: 0 }; 4];
    for (k, (slot, (a, b))) in correlators.iter_mut().zip(chsh_cfg.settings()).enumerate() {
        let batch = sample_coincidences(cfg, a, b, n_per_setting, StreamId::new(seed, k as u64))?;
        *slot = estimate_correlator(&batch)?;
    }
    let s_hat = chsh_combination(correlators.map(|c| c.e_hat));
    let stderr = correlators.iter().map(|c| c.stderr * c.stderr).sum::<f64>().sqrt();
    Ok(ChshEstimate { s_hat, stderr, correlators })
}

/// Angular scan whose `E` column is a Monte Carlo estimate with `n` trials
/// per setting; row `k` uses stream `(seed, k)`. The signal/background
/// columns stay analytic.
pub fn monte_carlo_scan(
    cfg: &ExperimentConfig,
    grid_a: &[f64],
    grid_b: &[f64],
    n: u64,
    seed: u64,
) -> Result<ScanResult> {
    cfg.validate()?;
    let pairs = grid_pairs(grid_a, grid_b)?;
    let amps = cfg.amplitudes()?;
    let rows = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(a, b))| -> Result<ScanRow> {
            let analytic = correlation_for_amplitudes(cfg, &amps, a, b)?;
            let est = estimate_correlator(&sample_coincidences(cfg, a, b, n, StreamId::new(seed, k as u64))?)?;
            Ok(ScanRow { e: est.e_hat, e_stderr: Some(est.stderr), n: Some(est.n), ..analytic_row(&analytic, a, b) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult { scenario: cfg.scenario, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{BackgroundSpec, PairingWeights};
    use crate::polarization::{BellKind, TSIRELSON_BOUND};
    use crate::propagation::{Geometry, Normalization};
    use crate::scenarios::Scenario;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_8};

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
            geometry: Geometry {
                source1: [-3.0, 40.0, 0.0],
                source2: [3.0, 40.0, 0.0],
                detector_a: [-0.5, 0.0, 0.0],
                detector_b: [0.5, 0.0, 0.0],
                wavenumber: 2.0,
            },
            normalization: Normalization::PhaseOnly,
            phase_mode: PhaseMode::PerPair,
        }
    }

    fn ax(r: f64) -> PolarizerAxis {
        PolarizerAxis::new(r)
    }

    #[test]
    fn aligned_pure_signal_never_anticorrelates() {
        let b = sample_coincidences(&config(Scenario::II, 1.0, 0.0), ax(0.4), ax(0.4), 200_000, StreamId::new(7, 0))
            .unwrap();
        assert_eq!(b.n_pm, 0);
        assert_eq!(b.n_mp, 0);
        assert_eq!(b.n_total(), 200_000);
    }

    #[test]
    fn same_stream_same_batch() {
        let cfg = config(Scenario::II, 0.6, 1.0);
        let s = StreamId::new(99, 3);
        let x = sample_coincidences(&cfg, ax(0.1), ax(0.9), 300_001, s).unwrap();
        let y = sample_coincidences(&cfg, ax(0.1), ax(0.9), 300_001, s).unwrap();
        assert_eq!(x, y);
        let z = sample_coincidences(&cfg, ax(0.1), ax(0.9), 300_001, StreamId::new(99, 4)).unwrap();
        assert_ne!(x.counts(), z.counts());
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let cfg = config(Scenario::I, 0.6, 1.0);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                sample_coincidences(&cfg, ax(0.1), ax(0.9), 5 * BATCH_SIZE + 17, StreamId::new(5, 1)).unwrap()
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn bell_angle_estimate_is_unbiased() {
        let batch = sample_coincidences(
            &config(Scenario::II, 1.0, 0.0),
            ax(FRAC_PI_8),
            ax(0.0),
            1_000_000,
            StreamId::new(1, 0),
        )
        .unwrap();
        let est = estimate_correlator(&batch).unwrap();
        assert!((est.e_hat - FRAC_1_SQRT_2).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn estimator_examples() {
        let batch = |c: [u64; 4]| SampleBatch {
            n_pp: c[0],
            n_pm: c[1],
            n_mp: c[2],
            n_mm: c[3],
            settings: (ax(0.0), ax(0.0)),
            stream: StreamId::new(0, 0),
        };
        let perfect = estimate_correlator(&batch([250_000, 0, 0, 250_000])).unwrap();
        assert_eq!((perfect.e_hat, perfect.stderr), (1.0, 0.0));
        let flat = estimate_correlator(&batch([125_000; 4])).unwrap();
        assert_eq!(flat.e_hat, 0.0);
        assert!((flat.stderr - (1.0f64 / 500_000.0).sqrt()).abs() < 1e-18);
        assert!(matches!(estimate_correlator(&batch([0; 4])), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(sample_coincidences(&config(Scenario::II, 1.0, 0.0), ax(0.0), ax(0.0), 0, StreamId::new(0, 0)).is_err());
    }

    #[test]
    fn chsh_estimates() {
        let bell = ChshConfiguration::bell_optimal();
        let full = estimate_chsh(&config(Scenario::II, 1.0, 0.0), &bell, 1_000_000, 11).unwrap();
        assert!((full.s_hat - TSIRELSON_BOUND).abs() < 4.0 * full.stderr);
        let none = estimate_chsh(&config(Scenario::II, 0.0, 0.0), &bell, 200_000, 12).unwrap();
        assert!(none.s_hat.abs() < 4.0 * none.stderr);
        let mixed = estimate_chsh(&config(Scenario::II, 0.9, 0.0), &bell, 1_000_000, 13).unwrap();
        assert!((mixed.s_hat - 0.9 * TSIRELSON_BOUND).abs() < 4.0 * mixed.stderr);
    }

    #[test]
    fn per_pair_phases_match_analytic_mean() {
        let cfg = config(Scenario::I, 0.5, 1.0);
        let (a, b) = (ax(0.2), ax(1.0));
        let probs = outcome_probabilities(&cfg, a, b).unwrap();
        let batch = sample_coincidences(&cfg, a, b, 200_000, StreamId::new(3, 0)).unwrap();
        let freq = outcome_frequencies(&batch);
        for (p, q) in probs.iter().zip(freq) {
            let sigma = (p * (1.0 - p) / 200_000.0).sqrt();
            assert!((p - q).abs() < 5.0 * sigma, "{p} vs {q}");
        }
    }

    #[test]
    fn outcome_probabilities_sum_to_one() {
        let cfg = config(Scenario::I, 0.3, 2.0);
        let p = outcome_probabilities(&cfg, ax(0.7), ax(2.2)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let e = p[0] + p[3] - p[1] - p[2];
        let analytic = crate::scenarios::coincidence_correlator(&cfg, ax(0.7), ax(2.2)).unwrap().e;
        assert!((e - analytic).abs() < 1e-12);
    }
}
