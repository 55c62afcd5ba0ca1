//! Nonlinear conjugate gradient family (and steepest descent as its β = 0 member).
//!
//! The preconditioned variant runs the same recurrences on `z = M⁻¹g` from
//! [`Objective::precondition`]. The stopping rule always tests the raw gradient.

use super::line_search::{strong_wolfe, SearchFailure, WolfeParams, FLAT_TOLERANCE};
use super::{Minimizer, Objective, RawOutcome, Status, Termination};
use crate::error::{Error, Result};
use crate::registry::Named;

/// Conjugacy coefficient used to mix the previous direction into the new one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beta {
    /// `max(0, gₖ₊₁·(gₖ₊₁ − gₖ) / gₖ·gₖ)`
    PolakRibierePlus,
    /// `gₖ₊₁·gₖ₊₁ / gₖ·gₖ`
    FletcherReeves,
    SteepestDescent,
}

pub struct ConjugateGradient {
    pub beta: Beta,
    pub preconditioned: bool,
}

impl Named for ConjugateGradient {
    fn name(&self) -> &'static str {
        match (self.beta, self.preconditioned) {
            (Beta::PolakRibierePlus, false) => "cg-pr+",
            (Beta::PolakRibierePlus, true) => "pcg-pr+",
            (Beta::FletcherReeves, false) => "cg-fr",
            (Beta::FletcherReeves, true) => "pcg-fr",
            (Beta::SteepestDescent, false) => "steepest-descent",
            (Beta::SteepestDescent, true) => "preconditioned-descent",
        }
    }
}

/// Energy rise an approximate-Wolfe step may carry.
fn roundoff(f: f64) -> f64 {
    FLAT_TOLERANCE * f.abs()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl ConjugateGradient {
    /// `z` are the preconditioned gradients (equal to `g` without preconditioning).
    fn beta(&self, g_new: &[f64], z_new: &[f64], g_old: &[f64], z_old: &[f64]) -> f64 {
        let denom = dot(z_old, g_old);
        match self.beta {
            Beta::PolakRibierePlus => {
                let num: f64 = z_new
                    .iter()
                    .zip(g_new.iter().zip(g_old))
                    .map(|(z, (n, o))| z * (n - o))
                    .sum();
                (num / denom).max(0.0)
            }
            Beta::FletcherReeves => dot(z_new, g_new) / denom,
            Beta::SteepestDescent => 0.0,
        }
    }

    fn direction(&self, objective: &dyn Objective, g: &[f64], z: &mut [f64]) {
        if self.preconditioned {
            objective.precondition(g, z);
        } else {
            z.copy_from_slice(g);
        }
    }

    /// Rebuilds the preconditioner at `x` and recomputes `z`. The matrix is
    /// held fixed between restarts so consecutive directions stay conjugate.
    fn refresh(&self, objective: &dyn Objective, x: &[f64], g: &[f64], z: &mut [f64]) -> Result<()> {
        if self.preconditioned {
            objective.update_preconditioner(x)?;
        }
        self.direction(objective, g, z);
        Ok(())
    }
}

impl Minimizer for ConjugateGradient {
    fn run(&self, objective: &dyn Objective, x0: Vec<f64>, t: &Termination) -> Result<RawOutcome> {
        let n = x0.len();
        let mut x = x0;
        let mut g = vec![0.0; n];
        let mut f = objective
            .evaluate(&x, &mut g)?
            .ok_or_else(|| Error::InvalidParameter("initial configuration is outside the energy's domain".into()))?;

        let mut out = RawOutcome {
            x: Vec::new(),
            value: f,
            iterations: 0,
            status: Status::MaxIterations,
            gradient_norm_history: vec![inf_norm(&g)],
            energy_history: vec![f],
            monitor_history: vec![objective.monitor(&x)],
        };

        let wolfe = WolfeParams {
            c1: t.wolfe_c1,
            c2: t.wolfe_c2,
            max_evaluations: t.max_line_evaluations,
        };
        let mut z = vec![0.0; n];
        self.refresh(objective, &x, &g, &mut z)?;
        let mut z_new = vec![0.0; n];
        let mut d: Vec<f64> = z.iter().map(|v| -v).collect();
        let mut since_restart = 0usize;
        let mut last_step: Option<(f64, f64)> = None; // (alpha, slope) of the previous accepted step
        let mut x_trial = vec![0.0; n];
        let mut g_trial = vec![0.0; n];
        let mut g_keep = vec![0.0; n];

        for iter in 0..t.max_iterations {
            if inf_norm(&g) <= t.gradient_tolerance {
                out.status = Status::Converged;
                break;
            }
            let mut slope = dot(&g, &d);
            let mut is_steepest = since_restart == 0;
            if !(slope < 0.0) {
                d.iter_mut().zip(&z).for_each(|(di, zi)| *di = -zi);
                slope = -dot(&g, &z);
                is_steepest = true;
                since_restart = 0;
            }

            let accepted = loop {
                let d_inf = inf_norm(&d);
                let unit = t.initial_step / d_inf;
                let initial = match last_step {
                    Some((a, s)) => (a * s / slope).clamp(1e-7 * unit, 1e2 * unit),
                    None => unit,
                };
                // cache of the most recent trial evaluation so the accepted one is not recomputed
                let mut cached = f64::NAN;
                let search = strong_wolfe(
                    |a| {
                        x_trial
                            .iter_mut()
                            .zip(x.iter().zip(&d))
                            .for_each(|(xt, (xi, di))| *xt = xi + a * di);
                        match objective.evaluate(&x_trial, &mut g_trial)? {
                            Some(v) => {
                                cached = a;
                                g_keep.copy_from_slice(&g_trial);
                                Ok(Some((v, dot(&g_trial, &d))))
                            }
                            None => Ok(None),
                        }
                    },
                    f,
                    slope,
                    initial,
                    wolfe,
                )?;
                match search {
                    Ok(step) => {
                        debug_assert!(step.value <= (f + t.wolfe_c1 * step.alpha * slope).max(f + roundoff(f)));
                        debug_assert!(step.slope.abs() <= -t.wolfe_c2 * slope * (1.0 + 1e-12));
                        if cached != step.alpha {
                            x_trial
                                .iter_mut()
                                .zip(x.iter().zip(&d))
                                .for_each(|(xt, (xi, di))| *xt = xi + step.alpha * di);
                            objective
                                .evaluate(&x_trial, &mut g_keep)?
                                .ok_or(Error::NonFinite("accepted line-search step"))?;
                        } else {
                            x_trial
                                .iter_mut()
                                .zip(x.iter().zip(&d))
                                .for_each(|(xt, (xi, di))| *xt = xi + step.alpha * di);
                        }
                        break Some(step);
                    }
                    Err(SearchFailure::NotDescent | SearchFailure::Exhausted) if !is_steepest => {
                        d.iter_mut().zip(&z).for_each(|(di, zi)| *di = -zi);
                        slope = -dot(&g, &z);
                        is_steepest = true;
                        since_restart = 0;
                    }
                    Err(_) => break None,
                }
            };

            let Some(step) = accepted else {
                out.status = Status::LineSearchFailed;
                break;
            };

            assert!(
                step.value <= f + roundoff(f),
                "energy increased across an accepted step"
            );
            self.direction(objective, &g_keep, &mut z_new);
            let beta = self.beta(&g_keep, &z_new, &g, &z);
            std::mem::swap(&mut x, &mut x_trial);
            std::mem::swap(&mut g, &mut g_keep);
            std::mem::swap(&mut z, &mut z_new);
            f = step.value;
            last_step = Some((step.alpha, slope));
            out.iterations = iter + 1;
            out.gradient_norm_history.push(inf_norm(&g));
            out.energy_history.push(f);
            out.monitor_history.push(objective.monitor(&x));

            since_restart += 1;
            let periodic = t.restart_interval > 0 && since_restart >= t.restart_interval;
            if periodic {
                self.refresh(objective, &x, &g, &mut z)?;
            }
            if beta == 0.0 || periodic {
                since_restart = 0;
                d.iter_mut().zip(&z).for_each(|(di, zi)| *di = -zi);
            } else {
                d.iter_mut().zip(&z).for_each(|(di, zi)| *di = -zi + beta * *di);
            }
        }
        if out.status == Status::MaxIterations && inf_norm(&g) <= t.gradient_tolerance {
            out.status = Status::Converged;
        }
        out.value = f;
        out.x = x;
        Ok(out)
    }
}
