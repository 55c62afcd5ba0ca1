use std::f64::consts::PI;

use nalgebra::DMatrix;
use plateau_core::asymptotic::{self as asy, Quadrature, SaddleFamily};
use plateau_core::diffgeo::boundary_geometry;
use plateau_core::energy::{energy, gradient, EnergyParams};
use plateau_core::error::Result;
use plateau_core::mesh::{round_disk, Configuration, TriMesh, Vec3};
use plateau_core::optimizer::{Objective, Termination, MINIMIZERS};
use plateau_core::sweep::{run_sweep_detailed, start_energy, MeshSpec, SweepSchedule};

/// Energy as a function of the interior vertices only, boundary held fixed.
/// Bending and the length penalty then drop out of the gradient.
struct PinnedBoundary<'a> {
    mesh: &'a TriMesh,
    fixed: Configuration,
    interior: Vec<usize>,
    params: EnergyParams,
}

impl PinnedBoundary<'_> {
    fn assemble(&self, x: &[f64]) -> Configuration {
        let mut c = self.fixed.clone();
        for (j, &v) in self.interior.iter().enumerate() {
            c.positions[v] = Vec3::new(x[3 * j], x[3 * j + 1], x[3 * j + 2]);
        }
        c
    }
}

impl Objective for PinnedBoundary<'_> {
    fn evaluate(&self, x: &[f64], grad: &mut [f64]) -> Result<Option<f64>> {
        let c = self.assemble(x);
        let g = gradient(self.mesh, &c, &self.params)?;
        for (j, &v) in self.interior.iter().enumerate() {
            grad[3 * j..3 * j + 3].copy_from_slice(g[v].as_slice());
        }
        Ok(Some(energy(self.mesh, &c, &self.params)?.total))
    }
}

#[test]
fn pinned_springs_relax_to_the_discrete_harmonic_map() {
    let (mesh, mut x) = round_disk(5, 1.0 / (2.0 * PI)).unwrap();
    let mask = mesh.boundary_mask();
    for (v, p) in x.positions.iter_mut().enumerate() {
        if mask[v] {
            let phi = p.y.atan2(p.x);
            p.z = 0.05 * (2.0 * phi).cos() + 0.02 * (3.0 * phi).sin();
        }
    }
    let interior: Vec<usize> = (0..x.len()).filter(|&v| !mask[v]).collect();

    // oracle: graph Laplacian solve, L_II x_I = -L_IB x_B
    let slot = |v: usize| interior.iter().position(|&u| u == v);
    let n = interior.len();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DMatrix::<f64>::zeros(n, 3);
    for &[a, b] in &mesh.interior_edges {
        for (p, q) in [(a, b), (b, a)] {
            let Some(i) = slot(p) else { continue };
            lap[(i, i)] += 1.0;
            match slot(q) {
                Some(j) => lap[(i, j)] -= 1.0,
                None => {
                    for c in 0..3 {
                        rhs[(i, c)] += x.positions[q][c];
                    }
                }
            }
        }
    }
    let exact = lap.lu().solve(&rhs).unwrap();

    let objective = PinnedBoundary {
        mesh: &mesh,
        fixed: x.clone(),
        interior: interior.clone(),
        params: EnergyParams::dimensionless(50.0),
    };
    let x0: Vec<f64> = interior
        .iter()
        .flat_map(|&v| x.positions[v].iter().copied().collect::<Vec<_>>())
        .collect();
    let termination = Termination {
        gradient_tolerance: 1e-10,
        max_iterations: 20_000,
        wolfe_c1: 1e-4,
        wolfe_c2: 0.1,
        restart_interval: 500,
        max_line_evaluations: 60,
        initial_step: 1e-3,
    };
    for name in ["cg-pr+", "pcg-pr+"] {
        let out = MINIMIZERS
            .get(name)
            .unwrap()
            .run(&objective, x0.clone(), &termination)
            .unwrap();
        let worst = (0..n)
            .flat_map(|i| (0..3).map(move |c| (i, c)))
            .map(|(i, c)| (out.x[3 * i + c] - exact[(i, c)]).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-6, "{name}: {worst:.2e}");
    }
}

#[test]
fn warm_starts_carry_the_previous_configuration() {
    let mut schedule = SweepSchedule::new(
        vec![40.0, 80.0, 120.0],
        MeshSpec {
            rings: 4,
            elongation: 1.1,
        },
        3,
        Default::default(),
    );
    schedule.options.max_iterations = 4000;
    let (diagram, configs, mesh) = run_sweep_detailed(&schedule, 1).unwrap();
    for i in 1..3 {
        let value = diagram.points[i].k_l3_over_alpha;
        let expected = start_energy(&schedule, &mesh, &configs[i - 1], value).unwrap();
        assert_eq!(diagram.points[i].start_energy, expected, "point {i}");
        assert_eq!(diagram.points[i].seed, 3 + i as u64);
    }
}

#[test]
fn descending_schedules_run_from_the_top() {
    let mut schedule = SweepSchedule::new(
        vec![40.0, 80.0],
        MeshSpec {
            rings: 3,
            elongation: 1.0,
        },
        0,
        Default::default(),
    );
    schedule.descending = true;
    schedule.options.max_iterations = 2000;
    let (diagram, _, _) = run_sweep_detailed(&schedule, 1).unwrap();
    let ks: Vec<f64> = diagram.points.iter().map(|p| p.k_l3_over_alpha).collect();
    assert_eq!(ks, [80.0, 40.0]);
}

#[test]
fn discrete_normal_curvature_converges_under_refinement() {
    let fam = SaddleFamily::new(1.0 / (2.0 * PI), 0.2).unwrap();
    let exact = asy::integrated_abs_normal_curvature(&fam, &Quadrature::default()).unwrap();
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&rings| {
            let (mesh, x) = asy::family_mesh(&fam, rings).unwrap();
            let b = boundary_geometry(&mesh, &x).unwrap();
            (b.integrated_abs_normal_curvature() - exact).abs() / exact
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
    assert!(errors[2] < 0.05, "{errors:?}");
}
