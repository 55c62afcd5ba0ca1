//! Energy minimization: nonlinear conjugate gradient with a strong-Wolfe line
//! search, plus the boundary-length penalty escalation used for relaxation runs.
//!
//! Minimizers are interchangeable behind the [`Minimizer`] trait and looked up
//! by name in [`MINIMIZERS`]. The default, `pcg-pr+`, is Polak-Ribière+ on
//! gradients preconditioned by the per-vertex blocks of [`hessian_blocks`].

pub mod cg;
pub mod line_search;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use nalgebra::Matrix3;
use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{evaluate, hessian_blocks, EnergyBreakdown, EnergyParams};
use crate::error::{Error, Result};
use crate::mesh::{Configuration, TriMesh, Vec3};
use crate::registry::{Named, Registry};

pub use cg::{Beta, ConjugateGradient};

/// A smooth function of a flat coordinate vector.
pub trait Objective {
    /// Value at `x`, with the gradient written into `grad`. `Ok(None)` marks a
    /// point outside the domain; the line search backs away from it.
    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Result<Option<f64>>;

    /// Extra per-iterate diagnostic recorded alongside the energy history.
    fn monitor(&self, _x: &[f64]) -> f64 {
        f64::NAN
    }

    /// Rebuilds the preconditioner `M ≈ ∇²f(x)` (symmetric positive definite).
    fn update_preconditioner(&self, _x: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Writes `M⁻¹ g` into `z` for the last [`Objective::update_preconditioner`].
    /// The default is no preconditioning.
    fn precondition(&self, g: &[f64], z: &mut [f64]) {
        z.copy_from_slice(g);
    }
}

/// Stopping rule and line-search constants, in absolute units.
#[derive(Debug, Clone)]
pub struct Termination {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub restart_interval: usize,
    pub max_line_evaluations: usize,
    /// Largest coordinate change tried on the very first step.
    pub initial_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct RawOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub status: Status,
    pub gradient_norm_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub monitor_history: Vec<f64>,
}

pub trait Minimizer: Named + Send + Sync {
    fn run(&self, objective: &dyn Objective, x0: Vec<f64>, termination: &Termination) -> Result<RawOutcome>;
}

pub static MINIMIZERS: Lazy<Registry<dyn Minimizer>> = Lazy::new(|| {
    let mut reg: Registry<dyn Minimizer> = Registry::new("minimizer");
    for beta in [Beta::PolakRibierePlus, Beta::FletcherReeves, Beta::SteepestDescent] {
        reg.register(Arc::new(ConjugateGradient {
            beta,
            preconditioned: false,
        }));
    }
    reg.register(Arc::new(ConjugateGradient {
        beta: Beta::PolakRibierePlus,
        preconditioned: true,
    }));
    reg
});

/// Minimizer used unless the options name another.
pub const DEFAULT_METHOD: &str = "pcg-pr+";

/// Options for [`minimize`] and [`relax`]. Missing fields deserialize to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Relative: stop when `‖g‖∞ ≤ gradient_tolerance · (kL + α/L²)`.
    pub gradient_tolerance: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub restart_interval: usize,
    pub rng_seed: u64,
    /// Half-width of the uniform out-of-plane noise added before minimizing.
    pub perturbation_amplitude: f64,
    pub method: String,
    /// Relative boundary-length error accepted by [`relax`].
    pub length_tolerance: f64,
    /// Maximum number of ×10 penalty escalations in [`relax`].
    pub max_penalty_rounds: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            gradient_tolerance: 1e-7,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.1,
            restart_interval: 2000,
            rng_seed: 0,
            perturbation_amplitude: 1e-3 / (2.0 * PI),
            method: DEFAULT_METHOD.into(),
            length_tolerance: 1e-3,
            max_penalty_rounds: 5,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if !(self.gradient_tolerance > 0.0) || !(self.length_tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.perturbation_amplitude >= 0.0) {
            return Err(Error::InvalidParameter(
                "perturbation amplitude must be non-negative".into(),
            ));
        }
        MINIMIZERS.get(&self.method)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub final_configuration: Configuration,
    pub final_energy: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub status: Status,
    pub gradient_norm_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    /// Relative boundary-length error `(Σ|e| − L)/L` per iterate.
    pub length_error_history: Vec<f64>,
}

struct MeshObjective<'a> {
    mesh: &'a TriMesh,
    params: &'a EnergyParams,
    scratch: std::cell::RefCell<(Vec<Vec3>, Vec<Vec3>)>,
    /// Inverted diagonal blocks of the preconditioner.
    blocks: std::cell::RefCell<Vec<Matrix3<f64>>>,
}

impl Objective for MeshObjective<'_> {
    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Result<Option<f64>> {
        let mut scratch = self.scratch.borrow_mut();
        let (pos, g) = &mut *scratch;
        for (p, c) in pos.iter_mut().zip(x.chunks_exact(3)) {
            *p = Vec3::new(c[0], c[1], c[2]);
        }
        match evaluate(self.mesh, pos, self.params, Some(g)) {
            Ok(e) => {
                for (out, v) in grad.chunks_exact_mut(3).zip(g.iter()) {
                    out.copy_from_slice(v.as_slice());
                }
                if grad.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("gradient"));
                }
                Ok(Some(e.total))
            }
            Err(Error::DegenerateBoundary { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn update_preconditioner(&self, x: &[f64]) -> Result<()> {
        let mut scratch = self.scratch.borrow_mut();
        let pos = &mut scratch.0;
        for (p, c) in pos.iter_mut().zip(x.chunks_exact(3)) {
            *p = Vec3::new(c[0], c[1], c[2]);
        }
        let mut blocks = self.blocks.borrow_mut();
        hessian_blocks(self.mesh, pos, self.params, &mut blocks)?;
        // floor for vertices with no stiffness of their own (e.g. k = 0 interiors)
        let floor = 1e-12 * blocks.iter().map(|b| b.trace()).fold(0.0, f64::max);
        for b in blocks.iter_mut() {
            let m = *b + Matrix3::identity() * floor.max(f64::MIN_POSITIVE);
            *b = m.try_inverse().ok_or(Error::NonFinite("preconditioner"))?;
        }
        Ok(())
    }

    fn precondition(&self, g: &[f64], z: &mut [f64]) {
        let inverses = self.blocks.borrow();
        for ((m, gv), zv) in inverses.iter().zip(g.chunks_exact(3)).zip(z.chunks_exact_mut(3)) {
            let s = m * Vec3::new(gv[0], gv[1], gv[2]);
            zv.copy_from_slice(s.as_slice());
        }
    }

    fn monitor(&self, x: &[f64]) -> f64 {
        let c = Configuration::from_flat(x);
        (c.boundary_length(self.mesh) - self.params.target_length) / self.params.target_length
    }
}

/// Adds uniform noise in `[−amplitude, amplitude]` to every z coordinate.
pub fn perturb(x: &Configuration, amplitude: f64, seed: u64) -> Configuration {
    if amplitude == 0.0 {
        return x.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Configuration::new(
        x.positions
            .iter()
            .map(|p| p + Vec3::new(0.0, 0.0, rng.gen_range(-amplitude..=amplitude)))
            .collect(),
    )
}

/// Perturbs `x0` (if the options ask for it) and minimizes the energy.
///
/// Line-search breakdown is not an error: the best configuration found so far
/// is returned with `converged = false` and [`Status::LineSearchFailed`].
pub fn minimize(
    mesh: &TriMesh,
    x0: &Configuration,
    p: &EnergyParams,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    p.validate()?;
    opts.validate()?;
    x0.check(mesh)?;
    let start = perturb(x0, opts.perturbation_amplitude, opts.rng_seed);
    let minimizer = MINIMIZERS.get(&opts.method)?;
    let objective = MeshObjective {
        mesh,
        params: p,
        scratch: std::cell::RefCell::new((
            vec![Vec3::zeros(); mesh.vertex_count],
            vec![Vec3::zeros(); mesh.vertex_count],
        )),
        blocks: std::cell::RefCell::new(vec![Matrix3::zeros(); mesh.vertex_count]),
    };
    let termination = Termination {
        gradient_tolerance: opts.gradient_tolerance * p.force_scale(),
        max_iterations: opts.max_iterations,
        wolfe_c1: opts.wolfe_c1,
        wolfe_c2: opts.wolfe_c2,
        restart_interval: opts.restart_interval,
        max_line_evaluations: 60,
        initial_step: 1e-3 * p.target_length,
    };
    let raw = minimizer.run(&objective, start.to_flat(), &termination)?;
    let final_configuration = Configuration::from_flat(&raw.x);
    let final_energy = crate::energy::energy(mesh, &final_configuration, p)?;
    Ok(MinimizeResult {
        final_configuration,
        final_energy,
        iterations: raw.iterations,
        converged: raw.status == Status::Converged,
        status: raw.status,
        gradient_norm_history: raw.gradient_norm_history,
        energy_history: raw.energy_history,
        length_error_history: raw.monitor_history,
    })
}

/// A [`minimize`] run wrapped in boundary-length penalty escalation.
#[derive(Debug, Clone)]
pub struct RelaxResult {
    pub result: MinimizeResult,
    /// Parameters of the final round, including the escalated penalty.
    pub params: EnergyParams,
    pub penalty_rounds: usize,
    pub total_iterations: usize,
    pub length_error: f64,
}

impl RelaxResult {
    pub fn converged(&self, opts: &MinimizeOptions) -> bool {
        self.result.converged && self.length_error.abs() < opts.length_tolerance
    }
}

/// Minimizes, then re-minimizes with a ten times stiffer length penalty until
/// the relative boundary-length error is below `opts.length_tolerance` or
/// `opts.max_penalty_rounds` escalations have been spent.
pub fn relax(mesh: &TriMesh, x0: &Configuration, p: &EnergyParams, opts: &MinimizeOptions) -> Result<RelaxResult> {
    let mut params = p.clone();
    let mut result = minimize(mesh, x0, &params, opts)?;
    let mut total_iterations = result.iterations;
    let mut rounds = 0;
    let length_error = |r: &MinimizeResult| (r.final_energy.boundary_length - p.target_length) / p.target_length;
    let quiet = MinimizeOptions {
        perturbation_amplitude: 0.0,
        ..opts.clone()
    };
    while length_error(&result).abs() >= opts.length_tolerance && rounds < opts.max_penalty_rounds {
        rounds += 1;
        params.length_penalty_k *= 10.0;
        result = minimize(mesh, &result.final_configuration, &params, &quiet)?;
        total_iterations += result.iterations;
    }
    let length_error = length_error(&result);
    Ok(RelaxResult {
        result,
        params,
        penalty_rounds: rounds,
        total_iterations,
        length_error,
    })
}

/// Iteration log as CSV: `iteration,total_energy,gradient_norm,boundary_length_error`.
pub fn write_iteration_log(result: &MinimizeResult, mut w: impl Write) -> Result<()> {
    writeln!(w, "iteration,total_energy,gradient_norm,boundary_length_error")?;
    for (i, ((e, g), l)) in result
        .energy_history
        .iter()
        .zip(&result.gradient_norm_history)
        .zip(&result.length_error_history)
        .enumerate()
    {
        writeln!(w, "{i},{e:.17e},{g:.17e},{l:.17e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;
    impl Objective for Rosenbrock {
        fn evaluate(&self, x: &[f64], g: &mut [f64]) -> Result<Option<f64>> {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            Ok(Some((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)))
        }
    }

    fn termination() -> Termination {
        Termination {
            gradient_tolerance: 1e-8,
            max_iterations: 20_000,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.1,
            restart_interval: 50,
            max_line_evaluations: 60,
            initial_step: 0.1,
        }
    }

    #[test]
    fn every_registered_minimizer_solves_rosenbrock() {
        for name in MINIMIZERS.names() {
            let out = MINIMIZERS
                .get(name)
                .unwrap()
                .run(&Rosenbrock, vec![-1.2, 1.0], &termination())
                .unwrap();
            assert_eq!(out.status, Status::Converged, "{name}");
            assert!(
                (out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6,
                "{name}: {:?}",
                out.x
            );
            assert!(out.energy_history.windows(2).all(|w| w[1] <= w[0]), "{name}");
        }
    }

    #[test]
    fn perturbation_is_deterministic_and_bounded() {
        let (_, x) = crate::mesh::generate_disk_mesh(12, 1.0).unwrap();
        assert_eq!(perturb(&x, 0.0, 7), x);
        let amp = 1e-3 / (2.0 * PI);
        let a = perturb(&x, amp, 42);
        assert_eq!(a, perturb(&x, amp, 42));
        assert_ne!(a, perturb(&x, amp, 43));
        let dz: Vec<f64> = a.positions.iter().map(|p| p.z.abs()).collect();
        let max = dz.iter().cloned().fold(0.0, f64::max);
        let mean = dz.iter().sum::<f64>() / dz.len() as f64;
        assert!(max <= amp);
        // mean of |U(-a, a)| is a/2; 469 samples give a standard error of about 0.013 a
        assert!((mean / amp - 0.5).abs() < 0.05, "{}", mean / amp);
        assert!(a
            .positions
            .iter()
            .zip(&x.positions)
            .all(|(p, q)| p.x == q.x && p.y == q.y));
    }

    #[test]
    fn preconditioning_reaches_the_same_minimum() {
        let (mesh, x) = crate::mesh::initial_disk(6, 1.2, 1.0).unwrap();
        let p = EnergyParams::dimensionless(200.0);
        let run = |method: &str| {
            let opts = MinimizeOptions {
                method: method.into(),
                rng_seed: 3,
                ..Default::default()
            };
            minimize(&mesh, &x, &p, &opts).unwrap()
        };
        let (plain, pre) = (run("cg-pr+"), run("pcg-pr+"));
        assert!(plain.converged && pre.converged);
        assert!(
            pre.iterations < plain.iterations,
            "{} vs {}",
            pre.iterations,
            plain.iterations
        );
        let e = (plain.final_energy.total, pre.final_energy.total);
        assert!((e.0 - e.1).abs() < 1e-9 * e.0, "{e:?}");
    }

    #[test]
    fn options_validation() {
        let mut o = MinimizeOptions::default();
        assert!(o.validate().is_ok());
        o.wolfe_c2 = 1e-5;
        assert!(o.validate().is_err());
        let o = MinimizeOptions {
            method: "newton".into(),
            ..Default::default()
        };
        assert!(o.validate().is_err());
    }
}
