//! Learning-curve fitting and convergence projection.
//!
//! Each family is fitted by ordinary least squares after a transform that
//! makes it linear in its parameters:
//!
//! | family       | form            | linearised as            |
//! |--------------|-----------------|--------------------------|
//! | logarithmic  | a + b ln n      | s = a + b ln n           |
//! | weiss_tian   | a n / (b + n)   | 1/s = 1/a + (b/a)(1/n)   |
//! | power_law    | a n^b           | ln s = ln a + b ln n     |
//! | exponential  | a e^(b n)       | ln s = ln a + b n        |
//!
//! Residuals are always reported in the original score space.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveFamily {
    Logarithmic,
    WeissTian,
    PowerLaw,
    Exponential,
}

impl CurveFamily {
    /// All families in selection-priority order.
    pub const ALL: [CurveFamily; 4] = [
        CurveFamily::Logarithmic,
        CurveFamily::WeissTian,
        CurveFamily::PowerLaw,
        CurveFamily::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurveFamily::Logarithmic => "logarithmic",
            CurveFamily::WeissTian => "weiss_tian",
            CurveFamily::PowerLaw => "power_law",
            CurveFamily::Exponential => "exponential",
        }
    }

    /// Evaluates the family's curve at training size `n`.
    pub fn eval(self, a: f64, b: f64, n: f64) -> f64 {
        match self {
            CurveFamily::Logarithmic => a + b * n.ln(),
            CurveFamily::WeissTian => a * n / (b + n),
            CurveFamily::PowerLaw => a * n.powf(b),
            CurveFamily::Exponential => a * (b * n).exp(),
        }
    }
}

impl fmt::Display for CurveFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One observation on a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub score: f64,
}

impl CurvePoint {
    pub fn new(n: usize, score: f64) -> Self {
        CurvePoint { n, score }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyFit {
    pub family: CurveFamily,
    pub a: f64,
    pub b: f64,
    pub rss: f64,
}

impl FamilyFit {
    pub fn eval(&self, n: f64) -> f64 {
        self.family.eval(self.a, self.b, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveFit {
    pub family: CurveFamily,
    pub params: (f64, f64),
    pub rss: f64,
    pub projected_convergence: usize,
}

/// When the fitted curve is considered flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRule {
    /// Largest per-sample gain still considered flat, in score units.
    pub epsilon: f64,
    /// Upper bound on the projected training size.
    pub cap: usize,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        ConvergenceRule {
            epsilon: 0.1,
            cap: 100_000,
        }
    }
}

fn check_points(points: &[CurvePoint]) -> Result<()> {
    let mut ns: Vec<usize> = points.iter().map(|p| p.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() != points.len() {
        return Err(Error::arg("learning-curve points must have distinct training sizes"));
    }
    if points.len() < 3 {
        return Err(Error::arg(format!(
            "need at least 3 learning-curve points, have {}",
            points.len()
        )));
    }
    if points.iter().any(|p| p.n == 0) {
        return Err(Error::arg("training sizes must be at least 1"));
    }
    if points.iter().any(|p| !p.score.is_finite()) {
        return Err(Error::arg("learning-curve scores must be finite"));
    }
    Ok(())
}

/// Least-squares line `y = intercept + slope * x`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Fits one family to the observations.
pub fn fit_family(points: &[CurvePoint], family: CurveFamily) -> Result<FamilyFit> {
    check_points(points)?;
    let domain = |reason: &str| Error::CurveDomain {
        family: family.name().to_string(),
        reason: reason.to_string(),
    };
    let needs_positive = !matches!(family, CurveFamily::Logarithmic);
    if needs_positive && points.iter().any(|p| p.score <= 0.0) {
        return Err(domain("scores must be strictly positive"));
    }
    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ss: Vec<f64> = points.iter().map(|p| p.score).collect();

    let (xs, ys): (Vec<f64>, Vec<f64>) = match family {
        CurveFamily::Logarithmic => (ns.iter().map(|n| n.ln()).collect(), ss.clone()),
        CurveFamily::WeissTian => (
            ns.iter().map(|n| 1.0 / n).collect(),
            ss.iter().map(|s| 1.0 / s).collect(),
        ),
        CurveFamily::PowerLaw => (ns.iter().map(|n| n.ln()).collect(), ss.iter().map(|s| s.ln()).collect()),
        CurveFamily::Exponential => (ns.clone(), ss.iter().map(|s| s.ln()).collect()),
    };
    let (c0, c1) = linear_fit(&xs, &ys).ok_or_else(|| domain("degenerate training sizes"))?;
    let (a, b) = match family {
        CurveFamily::Logarithmic => (c0, c1),
        CurveFamily::WeissTian => {
            if c0 == 0.0 {
                return Err(domain("asymptote is unbounded"));
            }
            let a = 1.0 / c0;
            (a, c1 * a)
        }
        CurveFamily::PowerLaw | CurveFamily::Exponential => (c0.exp(), c1),
    };
    let rss: f64 = ns
        .iter()
        .zip(&ss)
        .map(|(n, s)| {
            let r = family.eval(a, b, *n) - s;
            r * r
        })
        .sum();
    if !a.is_finite() || !b.is_finite() || !rss.is_finite() {
        return Err(domain("fit produced non-finite values"));
    }
    Ok(FamilyFit { family, a, b, rss })
}

/// Smallest `n >= start` where the curve's one-sample gain drops below
/// `rule.epsilon`, capped at `rule.cap`.
pub fn convergence_point(fit: &FamilyFit, start: usize, rule: ConvergenceRule) -> usize {
    let start = start.max(1);
    if start >= rule.cap {
        return start.min(rule.cap.max(1));
    }
    let mut current = fit.eval(start as f64);
    for n in start..rule.cap {
        let next = fit.eval((n + 1) as f64);
        // a non-finite gain is never flat
        if next - current < rule.epsilon {
            return n;
        }
        current = next;
    }
    rule.cap
}

/// Fits every family and keeps the one with the smallest residual sum of
/// squares; near-ties go to the earlier family in [`CurveFamily::ALL`].
pub fn best_fit(points: &[CurvePoint], rule: ConvergenceRule) -> Result<LearningCurveFit> {
    check_points(points)?;
    let mut best: Option<FamilyFit> = None;
    for family in CurveFamily::ALL {
        let Ok(fit) = fit_family(points, family) else {
            continue;
        };
        let replace = match &best {
            None => true,
            Some(b) => fit.rss < b.rss - 1e-12 * (1.0 + b.rss),
        };
        if replace {
            best = Some(fit);
        }
    }
    let fit = best.ok_or(Error::NoFit)?;
    let last_n = points.iter().map(|p| p.n).max().unwrap_or(1);
    Ok(LearningCurveFit {
        family: fit.family,
        params: (fit.a, fit.b),
        rss: fit.rss,
        projected_convergence: convergence_point(&fit, last_n, rule),
    })
}
