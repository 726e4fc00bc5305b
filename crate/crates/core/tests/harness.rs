use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use elastic_pinn::harness::{self, read_fields, read_report, RunConfig, FIELDS_FILE, MODEL_FILE, REPORT_FILE};
use elastic_pinn::loss::LossKind;
use elastic_pinn::network::deserialize_model;
use elastic_pinn::problems::ProblemName;

fn config(problem: ProblemName, loss: LossKind, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(problem, loss);
    cfg.seed = seed;
    cfg.optimizer.log_every = 0;
    cfg
}

#[test]
fn rod_strain_and_stress_errors_match() {
    for loss in [LossKind::Collocation, LossKind::Energy] {
        let r = harness::run(&config(ProblemName::Rod1d, loss, 0)).unwrap().report;
        let (e, s) = (r.rms["eps_x"], r.rms["sigma_x"]);
        // Root errors are in units of the field scale; agree to rounding.
        assert!((e.sqrt() - s.sqrt()).abs() <= 1e-13, "{loss}: {e} vs {s}");
    }
}

#[test]
fn rod_collocation_beats_energy_on_displacement() {
    for seed in 0..5 {
        let c = harness::run(&config(ProblemName::Rod1d, LossKind::Collocation, seed)).unwrap();
        let e = harness::run(&config(ProblemName::Rod1d, LossKind::Energy, seed)).unwrap();
        assert!(c.report.rms["U"] < e.report.rms["U"], "seed {seed}");
    }
}

#[test]
fn reports_repeat_exactly() {
    let mut cfg = config(ProblemName::Plate2d, LossKind::Collocation, 4);
    cfg.points_per_axis = Some(9);
    cfg.optimizer.max_iterations = 40;
    let a = harness::run(&cfg).unwrap().report;
    let b = harness::run(&cfg).unwrap().report;
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.final_loss.to_bits(), b.final_loss.to_bits());
    assert_eq!(a.loss_history, b.loss_history);
}

#[test]
fn thread_count_does_not_change_results() {
    let mut cfg = config(ProblemName::Cube3dPatch, LossKind::Energy, 2);
    cfg.points_per_axis = Some(6);
    cfg.optimizer.max_iterations = 15;
    let one = harness::run(&cfg).unwrap();
    cfg.threads = 3;
    let three = harness::run(&cfg).unwrap();
    assert_eq!(one.snapshot, three.snapshot);
    assert_eq!(one.report.loss_history, three.report.loss_history);
}

#[test]
fn plate_outputs_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ProblemName::Plate2dPatch, LossKind::Collocation, 1);
    cfg.optimizer.max_iterations = 3;
    cfg.output_dir = Some(dir.path().to_path_buf());
    let out = harness::run(&cfg).unwrap();

    let text = std::fs::read_to_string(dir.path().join(FIELDS_FILE)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2601 + 1);
    assert_eq!(lines[0], "x,y,U,V,eps_x,eps_y,gamma_xy,sigma_x,sigma_y,tau_xy");
    assert_eq!(read_fields(&dir.path().join(FIELDS_FILE)).unwrap(), out.snapshot);

    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join(REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(json["seed"], 1);
    assert_eq!(json["loss"], "collocation");
    assert_eq!(json["iterations"], 3);
    assert_eq!(read_report(&dir.path().join(REPORT_FILE)).unwrap(), out.report);

    // The checkpoint reproduces the trained model's outputs exactly.
    let model = deserialize_model(&std::fs::read(dir.path().join(MODEL_FILE)).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        assert_eq!(model.forward(&x).unwrap(), out.model.forward(&x).unwrap());
    }
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut cfg = config(ProblemName::Rod1d, LossKind::Energy, 0);
    cfg.optimizer.max_iterations = 2;
    cfg.output_dir = Some(blocker.join("sub"));
    assert!(harness::run(&cfg).is_err());
}

#[test]
fn unknown_names_are_rejected() {
    assert!("lsq".parse::<LossKind>().is_err());
    assert!("plate3d".parse::<ProblemName>().is_err());
}
