//! Linear least-squares separation of the entangled signal from background
//! in an angular scan.
//!
//! The signal has the shape `cos 2(θ_A − θ_B)`; the uncorrelated product
//! background has the shape `cos 2(θ_A − β1)·cos 2(θ_B − β2)`, with `β1`,
//! `β2` the source polarization axes. When both sources are visible to both
//! detectors the background also has an interference part with the signal's
//! own `cos 2(θ_A − θ_B)` shape, so the fit basis becomes degenerate and the
//! fit is refused.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{PolarizerAxis, CLASSICAL_BOUND, TSIRELSON_BOUND};
use crate::scenarios::ScanResult;

/// Singular-value floor (on unit-norm columns) below which the design is
/// rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFunction {
    Signal,
    InterferenceBackground,
    ProductBackground,
}

impl BasisFunction {
    pub fn describe(self) -> &'static str {
        match self {
            BasisFunction::Signal => "signal cos2(θA−θB)",
            BasisFunction::InterferenceBackground => "interference background cos2(θA−θB)",
            BasisFunction::ProductBackground => "product background cos2(θA−β1)·cos2(θB−β2)",
        }
    }

    fn eval(self, a: PolarizerAxis, b: PolarizerAxis, beta1: PolarizerAxis, beta2: PolarizerAxis) -> f64 {
        match self {
            BasisFunction::Signal | BasisFunction::InterferenceBackground => a.cos2_to(b),
            BasisFunction::ProductBackground => a.cos2_to(beta1) * b.cos2_to(beta2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(rename = "S_hat")]
    pub s_hat: f64,
    #[serde(rename = "B_hat")]
    pub b_hat: f64,
    pub residual_rms: f64,
    #[serde(rename = "bell_S")]
    pub bell_s: f64,
    pub violates_bell: bool,
    /// Standard errors propagated from per-row `E` errors, when present.
    #[serde(rename = "S_stderr", default, skip_serializing_if = "Option::is_none")]
    pub s_stderr: Option<f64>,
    #[serde(rename = "B_stderr", default, skip_serializing_if = "Option::is_none")]
    pub b_stderr: Option<f64>,
    pub rows: usize,
    /// Singular values of the column-normalized design matrix, descending.
    pub singular_values: Vec<f64>,
}

/// Basis columns used for a scan of the given configuration.
pub fn fit_basis(scan: &ScanResult) -> Vec<BasisFunction> {
    if scan.scenario.has_interference() {
        vec![BasisFunction::Signal, BasisFunction::InterferenceBackground, BasisFunction::ProductBackground]
    } else {
        vec![BasisFunction::Signal, BasisFunction::ProductBackground]
    }
}

fn describe_null_direction(basis: &[BasisFunction], v: &[f64]) -> String {
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let parts: Vec<String> = basis
        .iter()
        .zip(v)
        .filter(|(_, c)| c.abs() > 1e-3 * vmax)
        .map(|(f, c)| format!("{c:+.4}·[{}]", f.describe()))
        .collect();
    format!("{} ≈ 0 on the scanned angles", parts.join(" "))
}

/// Fits `E(θ_A, θ_B)` onto the signal and background shapes.
pub fn extract_signal(scan: &ScanResult, beta1: PolarizerAxis, beta2: PolarizerAxis) -> Result<FitReport> {
    let mut distinct: Vec<(f64, f64)> = scan.rows.iter().map(|r| (r.theta_a, r.theta_b)).collect();
    distinct.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::domain(format!(
            "signal extraction needs at least 4 distinct (θA, θB) settings, got {}",
            distinct.len()
        )));
    }
    if scan.rows.iter().any(|r| !r.e.is_finite()) {
        return Err(Error::domain("scan contains non-finite E values"));
    }

    let basis = fit_basis(scan);
    let n = scan.rows.len();
    let k = basis.len();
    let design = DMatrix::from_fn(n, k, |r, c| {
        let row = &scan.rows[r];
        basis[c].eval(PolarizerAxis::new(row.theta_a), PolarizerAxis::new(row.theta_b), beta1, beta2)
    });
    let y = DVector::from_iterator(n, scan.rows.iter().map(|r| r.e));

    // rank check on unit-norm columns so the threshold is scale free
    let norms: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    if let Some(c) = norms.iter().position(|&nrm| nrm <= RANK_TOL * (n as f64).sqrt()) {
        return Err(Error::DegenerateBasis {
            direction: format!("[{}] vanishes on every scanned setting", basis[c].describe()),
            smallest_singular_value: 0.0,
            singular_values: vec![],
        });
    }
    let mut scaled = design.clone();
    for (mut col, nrm) in scaled.column_iter_mut().zip(&norms) {
        col /= *nrm;
    }
    let svd = scaled.svd(true, true);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let smallest = *singular_values.last().expect("non-empty basis");
    if smallest < RANK_TOL {
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        let null_row = order[k - 1];
        let v: Vec<f64> = (0..k).map(|c| v_t[(null_row, c)] / norms[c]).collect();
        return Err(Error::DegenerateBasis {
            direction: describe_null_direction(&basis, &v),
            smallest_singular_value: smallest,
            singular_values,
        });
    }

    let scaled_coef = svd.solve(&y, 0.0).map_err(|e| Error::domain(format!("least-squares solve failed: {e}")))?;
    let coef: Vec<f64> = (0..k).map(|c| scaled_coef[c] / norms[c]).collect();
    let residual = &y - &design * DVector::from_column_slice(&coef);
    let residual_rms = (residual.norm_squared() / n as f64).sqrt();

    // sandwich covariance (XᵀX)⁻¹ Xᵀ Σ X (XᵀX)⁻¹ for per-row errors
    let stderr: Option<Vec<f64>> = match scan.rows.iter().map(|r| r.e_stderr).collect::<Option<Vec<f64>>>() {
        Some(row_err) => {
            let xtx_inv = (design.transpose() * &design)
                .try_inverse()
                .ok_or_else(|| Error::domain("normal matrix is singular"))?;
            let weighted = DMatrix::from_fn(n, k, |r, c| design[(r, c)] * row_err[r] * row_err[r]);
            let cov = &xtx_inv * (design.transpose() * weighted) * &xtx_inv;
            Some((0..k).map(|c| cov[(c, c)].max(0.0).sqrt()).collect())
        }
        None => None,
    };

    let pos = |f: BasisFunction| basis.iter().position(|&b| b == f).expect("basis member");
    let (si, bi) = (pos(BasisFunction::Signal), pos(BasisFunction::ProductBackground));
    let s_hat = coef[si];
    let bell_s = TSIRELSON_BOUND * s_hat;
    Ok(FitReport {
        s_hat,
        b_hat: coef[bi],
        residual_rms,
        bell_s,
        violates_bell: bell_s.abs() > CLASSICAL_BOUND,
        s_stderr: stderr.as_ref().map(|s| s[si]),
        b_stderr: stderr.as_ref().map(|s| s[bi]),
        rows: n,
        singular_values,
    })
}
