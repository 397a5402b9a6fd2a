//! `start:stop:steps` grid specs.

use crate::error::{CliError, CliResult};

fn parts(spec: &str) -> CliResult<(f64, f64, usize)> {
    let bad = |why: &str| CliError::config(format!("grid spec `{spec}`: {why} (expected start:stop:steps)"));
    let fields: Vec<&str> = spec.split(':').collect();
    let [start, stop, steps] = fields[..] else {
        return Err(bad("need three fields"));
    };
    let start: f64 = start.trim().parse().map_err(|_| bad("start is not a number"))?;
    let stop: f64 = stop.trim().parse().map_err(|_| bad("stop is not a number"))?;
    let steps: usize = steps.trim().parse().map_err(|_| bad("steps is not a positive integer"))?;
    if steps == 0 {
        return Err(bad("steps must be ≥ 1"));
    }
    if !(start.is_finite() && stop.is_finite()) {
        return Err(bad("bounds must be finite"));
    }
    Ok((start, stop, steps))
}

/// Polarizer angles in degrees: `steps` points from `start`, stop excluded
/// (axes are periodic, so `0:180:n` covers every axis once).
pub fn angle_grid_degrees(spec: &str) -> CliResult<Vec<f64>> {
    let (start, stop, steps) = parts(spec)?;
    let dx = (stop - start) / steps as f64;
    Ok((0..steps).map(|k| start + k as f64 * dx).collect())
}

/// Evenly spaced values with both ends included; one step gives `[start]`.
pub fn linear_grid(spec: &str) -> CliResult<Vec<f64>> {
    let (start, stop, steps) = parts(spec)?;
    if steps == 1 {
        return Ok(vec![start]);
    }
    let dx = (stop - start) / (steps - 1) as f64;
    Ok((0..steps).map(|k| start + k as f64 * dx).collect())
}
