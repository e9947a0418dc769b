//! Least-squares slopes on log-log axes.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Number of points that entered the fit.
    pub used: usize,
    /// Indices of points at or below their noise floor.
    pub excluded: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SlopeError {
    TooFewPoints { usable: usize },
    NonPositiveAbscissa(usize),
}

impl fmt::Display for SlopeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlopeError::TooFewPoints { usable } => {
                write!(
                    f,
                    "need at least 3 points above the noise floor, have {usable}"
                )
            }
            SlopeError::NonPositiveAbscissa(i) => write!(f, "point {i} has x <= 0"),
        }
    }
}

impl std::error::Error for SlopeError {}

/// Fits ln|y| = slope·ln x + intercept, skipping points with |y| ≤ `floor`.
pub fn fit_slope(points: &[(f64, f64)], floor: f64) -> Result<SlopeFit, SlopeError> {
    let with_floor: Vec<_> = points.iter().map(|&(x, y)| (x, y, floor)).collect();
    fit_slope_with_floors(&with_floor)
}

/// As [`fit_slope`] with a separate floor per point `(x, y, floor)`.
pub fn fit_slope_with_floors(points: &[(f64, f64, f64)]) -> Result<SlopeFit, SlopeError> {
    if let Some(i) = points.iter().position(|p| p.0.is_nan() || p.0 <= 0.0) {
        return Err(SlopeError::NonPositiveAbscissa(i));
    }
    let mut excluded = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &(x, y, floor)) in points.iter().enumerate() {
        if y.is_finite() && y.abs() > floor {
            xs.push(x.ln());
            ys.push(y.abs().ln());
        } else {
            excluded.push(i);
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(SlopeError::TooFewPoints { usable: n });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        used: n,
        excluded,
    })
}
