//! Least-squares line fits.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: Option<f64>,
    /// Two-sided 95% confidence interval of the slope.
    pub ci95: Option<[f64; 2]>,
}

/// Ordinary least squares through `(x, y)` points; `None` with fewer than
/// two distinct `x` values.
pub fn fit_loglog(points: &[(f64, f64)]) -> Option<LineFit> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_stderr, ci95) = if points.len() > 2 {
        let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        let dof = n - 2.0;
        let se = (sse / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof).ok()?.inverse_cdf(0.975);
        (Some(se), Some([slope - t * se, slope + t * se]))
    } else {
        (None, None)
    };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        ci95,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let f = fit_loglog(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        let ci = f.ci95.unwrap();
        assert!((ci[1] - ci[0]).abs() < 1e-9);
        assert!(fit_loglog(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
    }

    #[test]
    fn textbook_interval() {
        // y = x + noise; slope 1.0 with t(3) = 3.182.
        let pts = [(1.0, 1.1), (2.0, 1.9), (3.0, 3.05), (4.0, 4.0), (5.0, 4.95)];
        let f = fit_loglog(&pts).unwrap();
        let se = f.slope_stderr.unwrap();
        let ci = f.ci95.unwrap();
        assert!(((ci[1] - f.slope) / se - 3.182).abs() < 1e-3);
    }
}
