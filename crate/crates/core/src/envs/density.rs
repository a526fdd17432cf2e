//! Windowed occupancy histograms over a scalar position trace.

use super::EnvError;

/// Normalised histograms of `positions` over `bins` equal bins on `[lo, hi]`,
/// one row per consecutive block of `window` samples. A trailing partial
/// block gets its own row. Values outside the range land in the edge bins.
pub fn xpos_density(
    positions: &[f64],
    bins: usize,
    window: usize,
    lo: f64,
    hi: f64,
) -> Result<Vec<Vec<f64>>, EnvError> {
    if bins == 0 || !(hi > lo) {
        return Err(EnvError::Config(format!(
            "need bins > 0 and lo < hi, got {bins} bins on [{lo}, {hi}]"
        )));
    }
    if window == 0 || positions.is_empty() {
        return Err(EnvError::EmptyWindow);
    }
    let width = (hi - lo) / bins as f64;
    Ok(positions
        .chunks(window)
        .map(|chunk| {
            let mut row = vec![0.0; bins];
            for &p in chunk {
                let b = ((p - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
                row[b] += 1.0;
            }
            let total = chunk.len() as f64;
            row.iter_mut().for_each(|v| *v /= total);
            row
        })
        .collect())
}

pub fn occupied_bins(row: &[f64]) -> usize {
    row.iter().filter(|&&v| v > 0.0).count()
}

/// Fraction of samples at or above `threshold` in each window.
pub fn fraction_at_least(
    positions: &[f64],
    window: usize,
    threshold: f64,
) -> Result<Vec<f64>, EnvError> {
    if window == 0 || positions.is_empty() {
        return Err(EnvError::EmptyWindow);
    }
    Ok(positions
        .chunks(window)
        .map(|c| c.iter().filter(|&&p| p >= threshold).count() as f64 / c.len() as f64)
        .collect())
}
