//! Log-log slope fits with a seeded pairs bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FitError {
    #[error("need at least 3 points above the floor, got {0}")]
    TooFewPoints(usize),
    #[error("non-positive value at point {index}: ({x}, {y})")]
    NonPositive { index: usize, x: f64, y: f64 },
    #[error("all abscissae coincide")]
    Degenerate,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% bootstrap interval for the slope.
    pub ci: [f64; 2],
    /// Points that entered the fit.
    pub used: usize,
    /// Indices of points at or below the floor, reported but not fitted.
    pub floor_limited: Vec<usize>,
}

impl SlopeFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }

    /// Half-width of the confidence interval.
    pub fn ci_halfwidth(&self) -> f64 {
        0.5 * (self.ci[1] - self.ci[0])
    }
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= f64::EPSILON * n * mx.abs().max(1.0) {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Fits `y ~ C x^p` on the points with `y > floor`.
///
/// Non-positive `x`, or non-positive `y` while `floor` is zero, is an error.
/// The interval comes from `resamples` pairs-bootstrap draws seeded by `seed`;
/// draws with all abscissae equal are skipped.
pub fn fit_slope(points: &[(f64, f64)], floor: f64, resamples: usize, seed: u64) -> Result<SlopeFit, FitError> {
    let mut logs = Vec::with_capacity(points.len());
    let mut floor_limited = Vec::new();
    for (index, &(x, y)) in points.iter().enumerate() {
        if !(x > 0.0) || (floor <= 0.0 && !(y > 0.0)) || y.is_nan() {
            return Err(FitError::NonPositive { index, x, y });
        }
        if y <= floor {
            floor_limited.push(index);
            continue;
        }
        logs.push((x.ln(), y.ln()));
    }
    if logs.len() < 3 {
        return Err(FitError::TooFewPoints(logs.len()));
    }
    let (slope, intercept) = least_squares(&logs).ok_or(FitError::Degenerate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    let mut sample = Vec::with_capacity(logs.len());
    for _ in 0..resamples {
        sample.clear();
        sample.extend((0..logs.len()).map(|_| logs[rng.random_range(0..logs.len())]));
        if let Some((s, _)) = least_squares(&sample) {
            draws.push(s);
        }
    }
    let ci = if draws.is_empty() {
        [slope, slope]
    } else {
        draws.sort_by(f64::total_cmp);
        [quantile(&draws, 0.025), quantile(&draws, 0.975)]
    };
    Ok(SlopeFit { slope, intercept, ci, used: logs.len(), floor_limited })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Parses `x,y` rows. A first line that does not parse as numbers is a header;
/// blank lines and lines starting with `#` are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let parsed = match (cols.next(), cols.next()) {
            (Some(x), Some(y)) => x.parse::<f64>().ok().zip(y.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => out.push(p),
            None if out.is_empty() && k == 0 => continue,
            None => return Err(format!("line {}: expected two numeric columns", k + 1)),
        }
    }
    Ok(out)
}
