use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_plateau");

fn plateau(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_owned()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].to_owned()).collect()
}

const DIAGRAM_HEADER: &str = "k_l3_over_alpha,gamma,seed,converged,iterations,penalty_rounds,start_energy,\
total_energy,bending_energy,spring_energy,length_error,mean_abs_kappa_n,integrated_abs_kappa_n,\
integrated_kappa_n,integrated_gaussian_curvature,mean_gaussian_curvature,planarity,dominant_mode,\
mode_amplitude,mean_radius,gauss_bonnet_defect,self_intersections";

#[test]
fn stability_table_lists_the_first_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = plateau(dir.path(), &["stability"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout
            .lines()
            .any(|l| l.contains("1488.30") && l.trim_start().starts_with('2')),
        "{stdout}"
    );
    assert_eq!(header(&dir.path().join("thresholds.csv")), "mode,gamma,k_l3_over_alpha");
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn relax_below_threshold_stays_planar() {
    let dir = tempfile::tempdir().unwrap();
    let out = plateau(
        dir.path(),
        &["relax", "--k-l3", "100", "--rings", "8", "--constraint", "per-edge"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = dir.path().join("observables.csv");
    assert_eq!(header(&csv), DIAGRAM_HEADER);
    let planarity: f64 = column(&csv, "planarity")[0].parse().unwrap();
    assert!(planarity < 1e-4, "{planarity}");
    assert_eq!(column(&csv, "converged")[0], "true");
    assert!(std::fs::read_to_string(dir.path().join("relaxed.obj"))
        .unwrap()
        .contains("\nf "));
    assert_eq!(
        header(&dir.path().join("iterations.csv")),
        "iteration,total_energy,gradient_norm,boundary_length_error"
    );
    assert_eq!(
        header(&dir.path().join("vertices.csv")),
        "index,on_boundary,s,kappa,kappa_n,kappa_g,defect"
    );
}

#[test]
fn relax_with_default_constraint_stays_planar() {
    let dir = tempfile::tempdir().unwrap();
    let out = plateau(dir.path(), &["relax", "--k-l3", "100", "--rings", "8"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let planarity: f64 = column(&dir.path().join("observables.csv"), "planarity")[0]
        .parse()
        .unwrap();
    assert!(planarity < 1e-4, "{planarity}");
}

#[test]
fn manifest_replays_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "relax",
        "--k-l3",
        "50",
        "--rings",
        "4",
        "--constraint",
        "per-edge",
        "--seed",
        "7",
    ];
    assert!(plateau(a.path(), &args).status.success());
    let manifest = a.path().join("manifest.json");
    let replay = Command::new(BIN)
        .args(["relax", "--config"])
        .arg(&manifest)
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    assert!(replay.status.success());
    for file in ["observables.csv", "relaxed.obj"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn mesh_writes_obj_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let out = plateau(dir.path(), &["mesh", "--rings", "3", "--format", "ply"]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(dir.path().join("mesh.ply"))
        .unwrap()
        .starts_with("ply"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["passes"], true);
    assert_eq!(report["euler_characteristic"], 1);
    assert_eq!(report["vertex_count"], 37);
}

#[test]
fn sweep_writes_diagram_transitions_and_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let out = plateau(
        dir.path(),
        &[
            "sweep",
            "--rings",
            "4",
            "--from",
            "50",
            "--to",
            "150",
            "--steps",
            "3",
            "--constraint",
            "per-edge",
            "--no-warm-start",
            "--jobs",
            "2",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let diagram = dir.path().join("diagram.csv");
    assert_eq!(header(&diagram), DIAGRAM_HEADER);
    assert_eq!(column(&diagram, "k_l3_over_alpha"), ["50.0", "100.0", "150.0"]);
    assert_eq!(
        header(&dir.path().join("transitions.csv")),
        "kind,from_k_l3_over_alpha,to_k_l3_over_alpha"
    );
    assert_eq!(std::fs::read_dir(dir.path().join("meshes")).unwrap().count(), 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schedule"].as_array().unwrap().len(), 3);
    assert_eq!(manifest["config"]["jobs"], 2);
}

#[test]
fn asymptotic_table_and_family_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let out = plateau(dir.path(), &["asymptotic", "--steps", "3", "--mesh-rings", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        header(&dir.path().join("asymptotic.csv")),
        "gamma,t,radius,series_energy,quadrature_energy,mean_abs_kappa_n,integrated_abs_kappa_n,\
integrated_gaussian_curvature"
    );
    let t = column(&dir.path().join("asymptotic.csv"), "t");
    assert_eq!(t[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(std::fs::read_dir(dir.path().join("family")).unwrap().count(), 3);
}

#[test]
fn fit_recovers_a_square_root_law() {
    let dir = tempfile::tempdir().unwrap();
    let gamma_c = 1500.0;
    let mut text = String::from(DIAGRAM_HEADER);
    text.push('\n');
    for i in 1..=20 {
        let gamma = gamma_c * (1.0 + 0.0125 * f64::from(i));
        let kn = 0.03 * (gamma - gamma_c).sqrt();
        let k = gamma * 3f64.sqrt() / 4.0;
        text.push_str(&format!(
            "{k},{gamma},0,true,1,0,0,0,0,0,0,{kn},{kn},0,{},0,0.1,2,0.1,0.16,0,0\n",
            -0.001 * (gamma - gamma_c)
        ));
    }
    let csv = dir.path().join("diagram.csv");
    std::fs::write(&csv, text).unwrap();
    let out = Command::new(BIN)
        .args(["fit", "--gamma-c", "1490", "--diagram"])
        .arg(&csv)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    let p = fit["exponent"]["exponent"].as_f64().unwrap();
    assert!((p - 0.5).abs() < 1e-3, "{p}");
}

#[test]
fn fit_without_usable_points_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("diagram.csv");
    std::fs::write(&csv, format!("{DIAGRAM_HEADER}\n")).unwrap();
    let out = Command::new(BIN)
        .args(["fit", "--gamma-c", "1490", "--diagram"])
        .arg(&csv)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["relax", "--no-such-flag"][..],
        &["frobnicate"][..],
        &["relax", "--rings", "many"][..],
        &["fit"][..],
    ] {
        let out = plateau(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"mesh": {"ringz": 3}}"#).unwrap();
    let out = Command::new(BIN)
        .args(["stability", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = plateau(dir.path(), &["relax", "--rings", "4", "--k-l3", "-5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_version_exit_cleanly() {
    for flag in ["--help", "--version"] {
        assert!(Command::new(BIN).arg(flag).output().unwrap().status.success());
    }
}
