//! Central finite-difference gradient checking.
//!
//! A check is expressed over a flat coordinate vector `x`: the closure
//! unpacks `x` into whatever parameters and inputs it covers, runs forward
//! and backward, and returns the scalar loss with the analytic gradient laid
//! out like `x`.

use serde::Serialize;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub step: f64,
    pub rel_tol: f64,
    /// Denominator floor for the relative error, so coordinates whose true
    /// gradient is essentially zero are judged by absolute error instead.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            rel_tol: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub name: String,
    pub coords: usize,
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub passed: bool,
    pub failure: Option<String>,
}

pub fn grad_check<F>(name: &str, x0: &[f64], mut f: F, cfg: GradCheckConfig) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(x0);
    let mut report = GradCheckReport {
        name: name.to_string(),
        coords: x0.len(),
        max_rel_error: 0.0,
        worst_coord: 0,
        passed: true,
        failure: None,
    };
    if analytic.len() != x0.len() {
        report.passed = false;
        report.failure = Some(format!(
            "analytic gradient has {} entries for {} coordinates",
            analytic.len(),
            x0.len()
        ));
        return report;
    }
    if let Some(i) = analytic.iter().position(|g| !g.is_finite()) {
        report.passed = false;
        report.worst_coord = i;
        report.max_rel_error = f64::INFINITY;
        report.failure = Some(format!("non-finite analytic gradient at coordinate {i}"));
        return report;
    }
    let mut x = x0.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + cfg.step;
        let (lp, _) = f(&x);
        x[i] = orig - cfg.step;
        let (lm, _) = f(&x);
        x[i] = orig;
        let numeric = (lp - lm) / (2.0 * cfg.step);
        if !numeric.is_finite() {
            report.passed = false;
            report.worst_coord = i;
            report.max_rel_error = f64::INFINITY;
            report.failure = Some(format!("non-finite loss around coordinate {i}"));
            return report;
        }
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_coord = i;
        }
    }
    report.passed = report.max_rel_error <= cfg.rel_tol;
    if !report.passed {
        report.failure = Some(format!(
            "relative error {:.3e} at coordinate {} exceeds {:.1e}",
            report.max_rel_error, report.worst_coord, cfg.rel_tol
        ));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_gradient_passes() {
        let r = grad_check(
            "cubic",
            &[0.3, -0.8, 1.1],
            |x| (x.iter().map(|v| v * v * v).sum(), x.iter().map(|v| 3.0 * v * v).collect()),
            GradCheckConfig::default(),
        );
        assert!(r.passed, "{r:?}");
        assert!(r.max_rel_error < 1e-8);
    }

    #[test]
    fn scaled_gradient_fails() {
        let r = grad_check(
            "cubic-corrupt",
            &[0.3, -0.8, 1.1],
            |x| (x.iter().map(|v| v * v * v).sum(), x.iter().map(|v| 3.03 * v * v).collect()),
            GradCheckConfig::default(),
        );
        assert!(!r.passed);
        assert!(r.failure.is_some());
    }

    #[test]
    fn non_finite_gradient_reports_location() {
        let r = grad_check(
            "nan",
            &[1.0, 2.0],
            |x| (x[0] + x[1], vec![1.0, f64::NAN]),
            GradCheckConfig::default(),
        );
        assert!(!r.passed);
        assert_eq!(r.worst_coord, 1);
        assert!(r.failure.unwrap().contains("coordinate 1"));
    }
}
