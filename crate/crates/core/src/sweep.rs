//! Continuation in kL³/α: warm-started relaxations, transition detection and
//! scaling-law fits.
//!
//! A sweep relaxes the film at each value of a schedule, starting from the
//! previous result (or from the perturbed flat disk), and records one row of
//! observables per value. The rows are the bifurcation diagram.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffgeo::{observe, Observables, MODE_THRESHOLD};
use crate::energy::{energy, EnergyParams, DEFAULT_LENGTH_CONSTRAINT};
use crate::error::{Error, Result};
use crate::mesh::{initial_disk, Configuration, TriMesh};
use crate::optimizer::{perturb, relax, MinimizeOptions, RelaxResult};

/// Planarity separating perturbation noise from a buckled film.
pub const PLANARITY_THRESHOLD: f64 = 1e-3;

/// Upper edge of the fit window as a multiple of γ_c.
pub const FIT_WINDOW: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub rings: usize,
    pub elongation: f64,
}

fn default_constraint() -> String {
    DEFAULT_LENGTH_CONSTRAINT.into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    /// Values of kL³/α, strictly increasing.
    pub values: Vec<f64>,
    pub mesh: MeshSpec,
    /// One seed per value, or a single base seed from which point i uses `seed + i`.
    pub seeds: Vec<u64>,
    pub options: MinimizeOptions,
    #[serde(default = "default_true")]
    pub warm_start: bool,
    /// Visit the values from the largest down (hysteresis probe).
    #[serde(default)]
    pub descending: bool,
    #[serde(default = "default_constraint")]
    pub length_constraint: String,
}

impl SweepSchedule {
    pub fn new(values: Vec<f64>, mesh: MeshSpec, seed: u64, options: MinimizeOptions) -> Self {
        Self {
            values,
            mesh,
            seeds: vec![seed],
            options,
            warm_start: true,
            descending: false,
            length_constraint: default_constraint(),
        }
    }

    /// `n` evenly spaced values from `start` to `end` inclusive.
    pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![start];
        }
        (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParameter("sweep schedule is empty".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "sweep values must be finite and non-negative".into(),
            ));
        }
        if self.seeds.is_empty() || (self.seeds.len() != 1 && self.seeds.len() != self.values.len()) {
            return Err(Error::InvalidParameter(format!(
                "need 1 or {} seeds, got {}",
                self.values.len(),
                self.seeds.len()
            )));
        }
        self.options.validate()?;
        self.params(self.values[0]).validate()
    }

    fn seed(&self, i: usize) -> u64 {
        if self.seeds.len() == 1 {
            self.seeds[0].wrapping_add(i as u64)
        } else {
            self.seeds[i]
        }
    }

    pub fn params(&self, k_l3_over_alpha: f64) -> EnergyParams {
        EnergyParams {
            length_constraint: self.length_constraint.clone(),
            ..EnergyParams::dimensionless(k_l3_over_alpha)
        }
    }

    /// Indices into `values` in visiting order.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        if self.descending {
            idx.reverse();
        }
        idx
    }
}

/// One row of the bifurcation diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k_l3_over_alpha: f64,
    pub gamma: f64,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub penalty_rounds: usize,
    /// Energy of the warm-start configuration under this point's parameters, before perturbation.
    pub start_energy: f64,
    pub total_energy: f64,
    pub bending_energy: f64,
    pub spring_energy: f64,
    pub length_error: f64,
    pub mean_abs_kappa_n: f64,
    pub integrated_abs_kappa_n: f64,
    pub integrated_kappa_n: f64,
    pub integrated_gaussian_curvature: f64,
    pub mean_gaussian_curvature: f64,
    pub planarity: f64,
    pub dominant_mode: usize,
    pub mode_amplitude: f64,
    pub mean_radius: f64,
    pub gauss_bonnet_defect: f64,
    pub self_intersections: usize,
}

impl SweepPoint {
    /// Row for one relaxation, with `params` the parameters it was started with.
    pub fn from_relaxation(
        params: &EnergyParams,
        seed: u64,
        start_energy: f64,
        opts: &MinimizeOptions,
        r: &RelaxResult,
        obs: &Observables,
    ) -> Self {
        let e = &r.result.final_energy;
        Self {
            k_l3_over_alpha: params.k_l3_over_alpha(),
            gamma: params.gamma(),
            seed,
            converged: r.converged(opts),
            iterations: r.total_iterations,
            penalty_rounds: r.penalty_rounds,
            start_energy,
            total_energy: e.total,
            bending_energy: e.bending,
            spring_energy: e.springs,
            length_error: r.length_error,
            mean_abs_kappa_n: obs.mean_abs_normal_curvature,
            integrated_abs_kappa_n: obs.integrated_abs_normal_curvature,
            integrated_kappa_n: obs.integrated_normal_curvature,
            integrated_gaussian_curvature: obs.integrated_gaussian_curvature,
            mean_gaussian_curvature: obs.mean_gaussian_curvature,
            planarity: obs.planarity,
            dominant_mode: obs.dominant_mode,
            mode_amplitude: obs.mode_amplitude,
            mean_radius: obs.mean_radius,
            gauss_bonnet_defect: obs.gauss_bonnet_defect,
            self_intersections: obs.self_intersections,
        }
    }

    fn failed(k_l3_over_alpha: f64, gamma: f64, seed: u64, start_energy: f64) -> Self {
        Self {
            k_l3_over_alpha,
            gamma,
            seed,
            converged: false,
            iterations: 0,
            penalty_rounds: 0,
            start_energy,
            total_energy: f64::NAN,
            bending_energy: f64::NAN,
            spring_energy: f64::NAN,
            length_error: f64::NAN,
            mean_abs_kappa_n: f64::NAN,
            integrated_abs_kappa_n: f64::NAN,
            integrated_kappa_n: f64::NAN,
            integrated_gaussian_curvature: f64::NAN,
            mean_gaussian_curvature: f64::NAN,
            planarity: f64::NAN,
            dominant_mode: 0,
            mode_amplitude: f64::NAN,
            mean_radius: f64::NAN,
            gauss_bonnet_defect: f64::NAN,
            self_intersections: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BifurcationDiagram {
    pub points: Vec<SweepPoint>,
}

impl BifurcationDiagram {
    pub fn converged(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.converged)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for p in &self.points {
            out.serialize(p).map_err(csv_error)?;
        }
        if self.points.is_empty() {
            out.write_record(CSV_COLUMNS).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let points = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<SweepPoint>, _>>()
            .map_err(csv_error)?;
        Ok(Self { points })
    }
}

/// Diagram CSV header, in column order.
pub const CSV_COLUMNS: &[&str] = &[
    "k_l3_over_alpha",
    "gamma",
    "seed",
    "converged",
    "iterations",
    "penalty_rounds",
    "start_energy",
    "total_energy",
    "bending_energy",
    "spring_energy",
    "length_error",
    "mean_abs_kappa_n",
    "integrated_abs_kappa_n",
    "integrated_kappa_n",
    "integrated_gaussian_curvature",
    "mean_gaussian_curvature",
    "planarity",
    "dominant_mode",
    "mode_amplitude",
    "mean_radius",
    "gauss_bonnet_defect",
    "self_intersections",
];

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn record(
    mesh: &TriMesh,
    params: &EnergyParams,
    seed: u64,
    start_energy: f64,
    opts: &MinimizeOptions,
    start: &Configuration,
) -> Result<(SweepPoint, Configuration)> {
    let r = relax(mesh, start, params, opts)?;
    let x = r.result.final_configuration.clone();
    let obs = observe(mesh, &x)?;
    Ok((
        SweepPoint::from_relaxation(params, seed, start_energy, opts, &r, &obs),
        x,
    ))
}

/// Relaxes one schedule point from `start`; numerical failures become a
/// non-converged row and leave the configuration unchanged.
fn run_point(
    schedule: &SweepSchedule,
    mesh: &TriMesh,
    i: usize,
    start: &Configuration,
) -> (SweepPoint, Option<Configuration>) {
    let params = schedule.params(schedule.values[i]);
    let seed = schedule.seed(i);
    let start_energy = energy(mesh, start, &params).map_or(f64::NAN, |e| e.total);
    let opts = MinimizeOptions {
        rng_seed: seed,
        ..schedule.options.clone()
    };
    match record(mesh, &params, seed, start_energy, &opts, start) {
        Ok((p, x)) => (p, Some(x)),
        Err(e) => {
            log::warn!("kL³/α = {}: {e}", schedule.values[i]);
            (
                SweepPoint::failed(params.k_l3_over_alpha(), params.gamma(), seed, start_energy),
                None,
            )
        }
    }
}

/// Runs the schedule; see [`run_sweep_detailed`].
pub fn run_sweep(schedule: &SweepSchedule) -> Result<BifurcationDiagram> {
    Ok(run_sweep_detailed(schedule, 1)?.0)
}

/// Runs the schedule and also returns the relaxed configuration of every
/// point (the start configuration for points that failed).
///
/// With `warm_start` off the points are independent and run on up to `jobs`
/// threads; results do not depend on `jobs`.
pub fn run_sweep_detailed(
    schedule: &SweepSchedule,
    jobs: usize,
) -> Result<(BifurcationDiagram, Vec<Configuration>, TriMesh)> {
    schedule.validate()?;
    let (mesh, disk) = initial_disk(schedule.mesh.rings, schedule.mesh.elongation, 1.0)?;
    let order = schedule.order();
    let mut rows: Vec<(SweepPoint, Configuration)> = Vec::with_capacity(order.len());
    if schedule.warm_start {
        let mut current = disk;
        for &i in &order {
            let (p, x) = run_point(schedule, &mesh, i, &current);
            if let Some(x) = x {
                current = x;
            }
            rows.push((p, current.clone()));
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        rows = pool.install(|| {
            order
                .par_iter()
                .map(|&i| {
                    let (p, x) = run_point(schedule, &mesh, i, &disk);
                    (p, x.unwrap_or_else(|| disk.clone()))
                })
                .collect()
        });
    }
    let (points, configs) = rows.into_iter().unzip();
    Ok((BifurcationDiagram { points }, configs, mesh))
}

/// Check of the warm-start bookkeeping: `start_energy` of each point equals the
/// previous point's configuration evaluated under this point's parameters.
pub fn start_energy(schedule: &SweepSchedule, mesh: &TriMesh, previous: &Configuration, value: f64) -> Result<f64> {
    Ok(energy(mesh, previous, &schedule.params(value))?.total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionKind {
    CircleToEllipse,
    PlanarToTwisted,
    TwistedToFlatEight,
}

impl std::fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::CircleToEllipse => "CIRCLE->ELLIPSE",
            Self::PlanarToTwisted => "PLANAR->TWISTED",
            Self::TwistedToFlatEight => "TWISTED->FLAT-EIGHT",
        })
    }
}

/// A transition between two consecutive converged points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub kind: TransitionKind,
    /// kL³/α of the last point before the transition.
    pub from: f64,
    /// kL³/α of the first point after it.
    pub to: f64,
}

impl Transition {
    pub fn brackets(&self, value: f64) -> bool {
        self.from.min(self.to) <= value && value <= self.from.max(self.to)
    }
}

fn is_ellipse(p: &SweepPoint) -> bool {
    p.dominant_mode == 2 && p.mode_amplitude > MODE_THRESHOLD
}

/// Scans consecutive converged points (in diagram order) for the three
/// transition types.
pub fn detect_transitions(diagram: &BifurcationDiagram) -> Vec<Transition> {
    let pts: Vec<&SweepPoint> = diagram.converged().collect();
    let mut out = Vec::new();
    let mut twisted_seen = false;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let planar_a = a.planarity < PLANARITY_THRESHOLD;
        let planar_b = b.planarity < PLANARITY_THRESHOLD;
        let push = |kind| Transition {
            kind,
            from: a.k_l3_over_alpha,
            to: b.k_l3_over_alpha,
        };
        if !is_ellipse(a) && is_ellipse(b) && planar_b {
            out.push(push(TransitionKind::CircleToEllipse));
        }
        if planar_a && !planar_b {
            twisted_seen = true;
            out.push(push(TransitionKind::PlanarToTwisted));
        }
        if twisted_seen && !planar_a && planar_b && is_ellipse(b) {
            out.push(push(TransitionKind::TwistedToFlatEight));
        }
    }
    out
}

/// Result of fitting `y = A (γ − γ_c)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub gamma_c: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

fn r_squared(y: &[f64], predicted: impl Iterator<Item = f64>) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(predicted).map(|(v, p)| (v - p).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Least-squares fit of `y = A (x − x_c)^p` by Levenberg-Marquardt, starting
/// from `x_c = x_c0`, `p = 1/2`. `x_c` is kept below the smallest `x`.
pub fn fit_power_law(x: &[f64], y: &[f64], x_c0: f64) -> Result<ExponentFit> {
    let n = x.len();
    if n < 4 {
        return Err(Error::Fit(format!("need at least 4 points, got {n}")));
    }
    let x_min = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x_min;
    let scale = x_span.max(x_min.abs() * 1e-6).max(1e-300);
    let mut xc = x_c0.min(x_min - 1e-3 * scale);
    let mut p = 0.5;
    // amplitude by linear least squares at the initial (x_c, p)
    let basis: Vec<f64> = x.iter().map(|v| (v - xc).powf(p)).collect();
    let mut a = basis.iter().zip(y).map(|(b, v)| b * v).sum::<f64>() / basis.iter().map(|b| b * b).sum::<f64>();

    let ssr = |a: f64, xc: f64, p: f64| -> f64 {
        x.iter()
            .zip(y)
            .map(|(xi, yi)| (a * (xi - xc).powf(p) - yi).powi(2))
            .sum()
    };
    let jacobian = |a: f64, xc: f64, p: f64| {
        let mut j = DMatrix::zeros(n, 3);
        let mut r = DVector::zeros(n);
        for i in 0..n {
            let d = x[i] - xc;
            let dp = d.powf(p);
            r[i] = a * dp - y[i];
            j[(i, 0)] = dp;
            j[(i, 1)] = -a * p * dp / d;
            j[(i, 2)] = a * dp * d.ln();
        }
        (j, r)
    };

    let mut lambda = 1e-3;
    let mut cost = ssr(a, xc, p);
    let mut converged = false;
    for _ in 0..500 {
        let (j, r) = jacobian(a, xc, p);
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let mut improved = false;
        for _ in 0..40 {
            let mut m = jtj.clone();
            for k in 0..3 {
                m[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = m.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let (na, nxc, np) = (a + step[0], xc + step[1], p + step[2]);
            let new_cost = if nxc < x_min && np.is_finite() {
                ssr(na, nxc, np)
            } else {
                f64::INFINITY
            };
            if new_cost.is_finite() && new_cost <= cost {
                let rel = (cost - new_cost) / cost.max(1e-300);
                (a, xc, p, cost) = (na, nxc, np, new_cost);
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-14 || step.norm() < 1e-13 * (1.0 + xc.abs()) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved || converged || cost == 0.0 {
            converged = true;
            break;
        }
    }
    if !converged || !(p.is_finite() && a.is_finite()) {
        return Err(Error::Fit(format!(
            "Levenberg-Marquardt did not converge (residual {cost:e})"
        )));
    }

    let (j, _) = jacobian(a, xc, p);
    let dof = (n as f64 - 3.0).max(1.0);
    let stderr = (j.transpose() * &j)
        .try_inverse()
        .map_or(f64::NAN, |cov| (cov[(2, 2)] * cost / dof).max(0.0).sqrt());
    Ok(ExponentFit {
        exponent: p,
        stderr,
        gamma_c: xc,
        amplitude: a,
        r_squared: r_squared(y, x.iter().map(|xi| a * (xi - xc).powf(p))),
        points: n,
    })
}

/// Noise floor of ⟨|κ_n|⟩ for a unit-length boundary: `10⁻⁴/R`, `R = 1/2π`.
pub const KAPPA_N_FLOOR: f64 = 1e-4 * 2.0 * PI;

fn window(diagram: &BifurcationDiagram, gamma_c: f64) -> impl Iterator<Item = &SweepPoint> {
    diagram
        .converged()
        .filter(move |p| p.gamma > gamma_c && p.gamma <= FIT_WINDOW * gamma_c)
}

/// Fits `⟨|κ_n|⟩ = A (γ − γ_c)^p` over `(γ_c, 1.25 γ_c]`, re-centring the
/// window on the fitted γ_c until it stops changing.
pub fn fit_exponent(diagram: &BifurcationDiagram, gamma_c_estimate: f64) -> Result<ExponentFit> {
    let mut gamma_c = gamma_c_estimate;
    let mut last: Option<(Vec<f64>, ExponentFit)> = None;
    for _ in 0..20 {
        let (x, y): (Vec<f64>, Vec<f64>) = window(diagram, gamma_c)
            .filter(|p| p.mean_abs_kappa_n > KAPPA_N_FLOOR)
            .map(|p| (p.gamma, p.mean_abs_kappa_n))
            .unzip();
        if x.len() < 6 {
            return Err(Error::Fit(format!(
                "only {} usable points in (γ_c, {FIT_WINDOW}·γ_c] with γ_c = {gamma_c:.2}; need 6",
                x.len()
            )));
        }
        if let Some((prev_x, fit)) = &last {
            if *prev_x == x {
                return Ok(*fit);
            }
        }
        let fit = fit_power_law(&x, &y, gamma_c)?;
        gamma_c = fit.gamma_c;
        last = Some((x, fit));
    }
    Ok(last.expect("at least one fit").1)
}

/// OLS of `∫K dA` against γ over `(γ_c, 1.25 γ_c]`.
pub fn fit_linear_k(diagram: &BifurcationDiagram, gamma_c: f64) -> Result<LinearFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = window(diagram, gamma_c)
        .map(|p| (p.gamma, p.integrated_gaussian_curvature))
        .unzip();
    fit_line(&x, &y)
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x values coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(LinearFit {
        slope,
        intercept,
        r_squared: r_squared(y, x.iter().map(|v| intercept + slope * v)),
        points: n,
    })
}

/// Initial configuration of a sweep: the perturbed disk for the first point.
pub fn first_start(schedule: &SweepSchedule) -> Result<(TriMesh, Configuration)> {
    let (mesh, disk) = initial_disk(schedule.mesh.rings, schedule.mesh.elongation, 1.0)?;
    let x = perturb(&disk, schedule.options.perturbation_amplitude, schedule.seed(0));
    Ok((mesh, x))
}
