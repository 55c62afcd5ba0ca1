//! Strong-Wolfe line search (bracketing + zoom with safeguarded cubic interpolation).

use crate::error::Result;

/// Outcome of a line search along a descent direction.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub alpha: f64,
    pub value: f64,
    pub slope: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchFailure {
    /// The bracket shrank to nothing without meeting the curvature condition.
    Exhausted,
    /// The starting slope was not negative.
    NotDescent,
}

/// Parameters of the search.
#[derive(Debug, Clone, Copy)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub max_evaluations: usize,
}

/// Minimizer of the cubic through `(a, fa, ga)` and `(b, fb, gb)`, if it exists.
fn cubic_min(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> Option<f64> {
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let x = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    x.is_finite().then_some(x)
}

/// Energy changes below this fraction of `|φ(0)|` are treated as roundoff.
pub const FLAT_TOLERANCE: f64 = 1e-12;

/// Searches `φ(α) = f(x + α d)` for a step satisfying
/// `φ(α) ≤ φ(0) + c1 α φ'(0)` and `|φ'(α)| ≤ c2 |φ'(0)|`.
///
/// Near a minimum the decrease condition stops being decidable in floating
/// point. When `|φ(α) − φ(0)|` is within [`FLAT_TOLERANCE`] of `|φ(0)|` the
/// search falls back to the approximate Wolfe test of Hager and Zhang: the
/// curvature condition alone accepts the step, and the sign of `φ'` decides
/// which side of the bracket to keep.
///
/// `phi` returns `Ok(None)` when the trial point is outside the domain
/// (e.g. a collapsed boundary edge); such steps are treated as infinitely bad.
pub fn strong_wolfe<F>(
    mut phi: F,
    f0: f64,
    g0: f64,
    initial: f64,
    params: WolfeParams,
) -> Result<std::result::Result<Step, SearchFailure>>
where
    F: FnMut(f64) -> Result<Option<(f64, f64)>>,
{
    if !(g0 < 0.0) {
        return Ok(Err(SearchFailure::NotDescent));
    }
    let WolfeParams {
        c1,
        c2,
        max_evaluations,
    } = params;
    let mut evaluations = 0;
    let flat = |f: f64| (f - f0).abs() <= FLAT_TOLERANCE * f0.abs();
    let mut eval = |a: f64, evaluations: &mut usize| -> Result<(f64, f64)> {
        *evaluations += 1;
        Ok(phi(a)?.unwrap_or((f64::INFINITY, f64::NAN)))
    };

    let (mut a_prev, mut f_prev, mut g_prev) = (0.0, f0, g0);
    let mut a = initial;
    let zoom_bounds;
    loop {
        let (f, g) = eval(a, &mut evaluations)?;
        if flat(f) && g.is_finite() {
            if g.abs() <= -c2 * g0 {
                return Ok(Ok(Step {
                    alpha: a,
                    value: f,
                    slope: g,
                    evaluations,
                }));
            }
            if g > 0.0 {
                zoom_bounds = ((a_prev, f_prev, g_prev), (a, f, g));
                break;
            }
        } else if f > f0 + c1 * a * g0 || (evaluations > 1 && f >= f_prev) {
            zoom_bounds = ((a_prev, f_prev, g_prev), (a, f, g));
            break;
        }
        if g.abs() <= -c2 * g0 {
            return Ok(Ok(Step {
                alpha: a,
                value: f,
                slope: g,
                evaluations,
            }));
        }
        if g >= 0.0 {
            zoom_bounds = ((a, f, g), (a_prev, f_prev, g_prev));
            break;
        }
        if evaluations >= max_evaluations {
            return Ok(Err(SearchFailure::Exhausted));
        }
        (a_prev, f_prev, g_prev) = (a, f, g);
        a *= 2.5;
    }

    let ((mut lo, mut f_lo, mut g_lo), (mut hi, mut f_hi, mut g_hi)) = zoom_bounds;
    while evaluations < max_evaluations {
        let width = (hi - lo).abs();
        if width <= 1e-14 * lo.abs().max(hi.abs()) {
            break;
        }
        let (left, right) = (lo.min(hi), lo.max(hi));
        let guard = 0.1 * width;
        let trial = if f_hi.is_finite() && g_hi.is_finite() {
            cubic_min(lo, f_lo, g_lo, hi, f_hi, g_hi)
        } else {
            None
        }
        .filter(|&t| t > left + guard && t < right - guard)
        .unwrap_or(0.5 * (lo + hi));

        let (f, g) = eval(trial, &mut evaluations)?;
        if flat(f) && g.is_finite() {
            if g.abs() <= -c2 * g0 {
                return Ok(Ok(Step {
                    alpha: trial,
                    value: f,
                    slope: g,
                    evaluations,
                }));
            }
            // the minimum lies on the side where the slope changes sign
            if g * (hi - lo) > 0.0 {
                (hi, f_hi, g_hi) = (trial, f, g);
            } else {
                (lo, f_lo, g_lo) = (trial, f, g);
            }
        } else if f > f0 + c1 * trial * g0 || f >= f_lo {
            (hi, f_hi, g_hi) = (trial, f, g);
        } else {
            if g.abs() <= -c2 * g0 {
                return Ok(Ok(Step {
                    alpha: trial,
                    value: f,
                    slope: g,
                    evaluations,
                }));
            }
            if g * (hi - lo) >= 0.0 {
                (hi, f_hi, g_hi) = (lo, f_lo, g_lo);
            }
            (lo, f_lo, g_lo) = (trial, f, g);
        }
    }
    Ok(Err(SearchFailure::Exhausted))
}
