//! Subcommand bodies. Each resolves the config, runs, writes its files and a
//! `manifest.json` into the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use plateau_core::asymptotic::{asymptotic_row, family_mesh, write_table, SaddleFamily};
use plateau_core::diffgeo::{observe, write_vertex_csv};
use plateau_core::energy::energy;
use plateau_core::io::{write_obj, write_ply};
use plateau_core::mesh::{generate_disk_mesh, initial_disk, validate_mesh, Configuration, TriMesh};
use plateau_core::optimizer::{relax, write_iteration_log};
use plateau_core::stability::thresholds;
use plateau_core::sweep::{
    detect_transitions, fit_exponent, fit_linear_k, run_sweep_detailed, BifurcationDiagram, SweepPoint, TransitionKind,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Cli, Command, MeshFormat, MeshOpts, MinimizeOpts};

/// A run finished but its result is not usable (e.g. the minimizer did not
/// converge). Maps to exit status 2.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    argv: Vec<String>,
    subcommand: &'static str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    schedule: Option<Vec<f64>>,
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    if let Some(out) = &g.out {
        config.out = out.clone();
    }
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    if let Some(jobs) = g.jobs {
        config.jobs = jobs;
    }
    let name = match &cli.command {
        Command::Mesh(a) => {
            apply_mesh(&mut config, &a.mesh);
            "mesh"
        }
        Command::Relax(a) => {
            apply_mesh(&mut config, &a.mesh);
            apply_minimize(&mut config, &a.minimize);
            set(&mut config.energy.k_l3_over_alpha, a.k_l3);
            "relax"
        }
        Command::Sweep(a) => {
            apply_mesh(&mut config, &a.mesh);
            apply_minimize(&mut config, &a.minimize);
            let s = &mut config.sweep;
            if a.from.is_some() || a.to.is_some() || a.steps.is_some() {
                s.values = None;
            }
            set(&mut s.start, a.from);
            set(&mut s.end, a.to);
            set(&mut s.steps, a.steps);
            s.warm_start &= !a.no_warm_start;
            s.descending |= a.descending;
            s.meshes &= !a.no_meshes;
            "sweep"
        }
        Command::Stability(a) => {
            set(&mut config.stability.max_mode, a.max_mode);
            "stability"
        }
        Command::Asymptotic(a) => {
            let s = &mut config.asymptotic;
            set(&mut s.gamma_min, a.gamma_min);
            set(&mut s.gamma_max, a.gamma_max);
            set(&mut s.steps, a.steps);
            set(&mut s.mesh_rings, a.mesh_rings);
            "asymptotic"
        }
        Command::Fit(a) => {
            if a.diagram.is_some() {
                config.fit.diagram = a.diagram.clone();
            }
            if a.gamma_c.is_some() {
                config.fit.gamma_c = a.gamma_c;
            }
            "fit"
        }
    };

    fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    let schedule = (name == "sweep").then(|| config.schedule().values);
    write_json(
        &config.out.join("manifest.json"),
        &Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            argv: std::env::args().collect(),
            subcommand: name,
            config: &config,
            schedule,
        },
    )?;
    match &cli.command {
        Command::Mesh(a) => mesh(&config, a.format),
        Command::Relax(_) => relax_one(&config),
        Command::Sweep(_) => sweep(&config),
        Command::Stability(_) => stability(&config),
        Command::Asymptotic(_) => asymptotic(&config),
        Command::Fit(_) => fit(&config),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_mesh(config: &mut RunConfig, m: &MeshOpts) {
    set(&mut config.mesh.rings, m.rings);
    set(&mut config.mesh.elongation, m.elongation);
}

fn apply_minimize(config: &mut RunConfig, m: &MinimizeOpts) {
    set(&mut config.energy.length_constraint, m.constraint.clone());
    set(&mut config.minimize.gradient_tolerance, m.tolerance);
    set(&mut config.minimize.max_iterations, m.max_iterations);
    set(&mut config.minimize.method, m.method.clone());
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_mesh(path: &Path, mesh: &TriMesh, x: &Configuration, format: MeshFormat) -> Result<()> {
    let mut w = create(path)?;
    match format {
        MeshFormat::Obj => write_obj(mesh, x, &mut w)?,
        MeshFormat::Ply => write_ply(mesh, x, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn mesh(config: &RunConfig, format: MeshFormat) -> Result<()> {
    let (mesh, x) = generate_disk_mesh(config.mesh.rings, config.mesh.elongation)?;
    let file = match format {
        MeshFormat::Obj => "mesh.obj",
        MeshFormat::Ply => "mesh.ply",
    };
    write_mesh(&config.out.join(file), &mesh, &x, format)?;
    let report = validate_mesh(&mesh);
    write_json(&config.out.join("validation.json"), &report)?;
    println!(
        "{} vertices, {} edges, {} faces, χ = {}, {}",
        report.vertex_count,
        report.edge_count,
        report.face_count,
        report.euler_characteristic,
        if report.passes { "valid" } else { "INVALID" }
    );
    if !report.passes {
        bail!(NumericalFailure("generated mesh failed validation".into()));
    }
    Ok(())
}

fn relax_one(config: &RunConfig) -> Result<()> {
    let params = config.energy_params(config.energy.k_l3_over_alpha);
    let opts = config.minimize_options();
    let (mesh, disk) = initial_disk(config.mesh.rings, config.mesh.elongation, params.target_length)?;
    let start_energy = energy(&mesh, &disk, &params)?.total;
    let r = relax(&mesh, &disk, &params, &opts)?;
    let x = &r.result.final_configuration;
    let obs = observe(&mesh, x)?;
    let point = SweepPoint::from_relaxation(&params, opts.rng_seed, start_energy, &opts, &r, &obs);

    let out = &config.out;
    write_mesh(&out.join("relaxed.obj"), &mesh, x, MeshFormat::Obj)?;
    BifurcationDiagram {
        points: vec![point.clone()],
    }
    .write_csv(create(&out.join("observables.csv"))?)?;
    write_vertex_csv(&mesh, x, create(&out.join("vertices.csv"))?)?;
    write_iteration_log(&r.result, create(&out.join("iterations.csv"))?)?;

    println!(
        "kL³/α = {:.4}  γ = {:.4}  E = {:.10}  planarity = {:.3e}  ⟨|κ_n|⟩ = {:.4e}  iterations = {}",
        point.k_l3_over_alpha,
        point.gamma,
        point.total_energy,
        point.planarity,
        point.mean_abs_kappa_n,
        point.iterations
    );
    if !point.converged {
        bail!(NumericalFailure(format!(
            "relaxation did not converge ({:?}, length error {:.2e})",
            r.result.status, r.length_error
        )));
    }
    Ok(())
}

fn sweep(config: &RunConfig) -> Result<()> {
    let schedule = config.schedule();
    let (diagram, configs, mesh) = run_sweep_detailed(&schedule, config.jobs)?;
    let out = &config.out;
    diagram.write_csv(create(&out.join("diagram.csv"))?)?;

    let transitions = detect_transitions(&diagram);
    let mut w = create(&out.join("transitions.csv"))?;
    writeln!(w, "kind,from_k_l3_over_alpha,to_k_l3_over_alpha")?;
    for t in &transitions {
        writeln!(w, "{},{},{}", t.kind, t.from, t.to)?;
        println!("{:<20} between kL³/α = {} and {}", t.kind.to_string(), t.from, t.to);
    }
    w.flush()?;

    if config.sweep.meshes {
        let dir = out.join("meshes");
        fs::create_dir_all(&dir)?;
        for (p, x) in diagram.points.iter().zip(&configs) {
            let path = dir.join(format!("k{:011.4}.obj", p.k_l3_over_alpha));
            write_mesh(&path, &mesh, x, MeshFormat::Obj)?;
        }
    }
    let failed = diagram.points.iter().filter(|p| !p.converged).count();
    info!("{} points, {} not converged", diagram.points.len(), failed);
    if failed > 0 {
        bail!(NumericalFailure(format!(
            "{failed} of {} sweep points did not converge (see diagram.csv)",
            diagram.points.len()
        )));
    }
    Ok(())
}

fn stability(config: &RunConfig) -> Result<()> {
    let rows = thresholds(config.stability.max_mode);
    let mut w = create(&config.out.join("thresholds.csv"))?;
    writeln!(w, "mode,gamma,k_l3_over_alpha")?;
    println!("{:>4}  {:>14}  {:>14}", "k", "γ_k", "kL³/α");
    for t in &rows {
        writeln!(w, "{},{},{}", t.mode, t.gamma, t.k_l3_over_alpha)?;
        println!("{:>4}  {:>14.2}  {:>14.2}", t.mode, t.gamma, t.k_l3_over_alpha);
    }
    w.flush()?;
    Ok(())
}

fn asymptotic(config: &RunConfig) -> Result<()> {
    let a = &config.asymptotic;
    if a.steps == 0 {
        bail!(plateau_core::error::Error::InvalidParameter(
            "asymptotic grid needs at least one step".into()
        ));
    }
    let gammas: Vec<f64> = if a.steps == 1 {
        vec![a.gamma_min]
    } else {
        (0..a.steps)
            .map(|i| a.gamma_min + (a.gamma_max - a.gamma_min) * i as f64 / (a.steps - 1) as f64)
            .collect()
    };
    let rows = gammas
        .iter()
        .map(|&g| asymptotic_row(g, &a.quadrature))
        .collect::<plateau_core::error::Result<Vec<_>>>()?;
    write_table(&rows, create(&config.out.join("asymptotic.csv"))?)?;

    let dir = config.out.join("family");
    fs::create_dir_all(&dir)?;
    for row in &rows {
        let fam = SaddleFamily::new(row.radius, row.t)?;
        let (mesh, x) = family_mesh(&fam, a.mesh_rings)?;
        write_mesh(
            &dir.join(format!("gamma{:010.3}.obj", row.gamma)),
            &mesh,
            &x,
            MeshFormat::Obj,
        )?;
        println!(
            "γ = {:.3}  t = {:.6}  E = {:.10}",
            row.gamma, row.t, row.quadrature_energy
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    diagram: PathBuf,
    gamma_c_estimate: f64,
    exponent: plateau_core::sweep::ExponentFit,
    gaussian_curvature: Option<plateau_core::sweep::LinearFit>,
}

fn fit(config: &RunConfig) -> Result<()> {
    let Some(path) = config.fit.diagram.clone() else {
        bail!("fit needs --diagram or fit.diagram in the config");
    };
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let diagram = BifurcationDiagram::read_csv(std::io::BufReader::new(file))?;
    let estimate = match config.fit.gamma_c {
        Some(g) => g,
        None => {
            let t = detect_transitions(&diagram)
                .into_iter()
                .find(|t| t.kind == TransitionKind::PlanarToTwisted)
                .ok_or_else(|| NumericalFailure("no planar-to-twisted transition to estimate γ_c from".into()))?;
            let gamma_of = |k: f64| {
                diagram
                    .points
                    .iter()
                    .find(|p| p.k_l3_over_alpha == k)
                    .map(|p| p.gamma)
                    .expect("transition endpoints are diagram points")
            };
            gamma_of(t.from)
        }
    };
    let exponent = fit_exponent(&diagram, estimate)?;
    // K is only a secondary output; its failure does not fail the command
    let gaussian_curvature = fit_linear_k(&diagram, exponent.gamma_c).ok();
    println!(
        "p = {:.4} ± {:.4}  γ_c = {:.3}  A = {:.4e}  R² = {:.5}  ({} points)",
        exponent.exponent, exponent.stderr, exponent.gamma_c, exponent.amplitude, exponent.r_squared, exponent.points
    );
    write_json(
        &config.out.join("fit.json"),
        &FitReport {
            diagram: path,
            gamma_c_estimate: estimate,
            exponent,
            gaussian_curvature,
        },
    )
}
