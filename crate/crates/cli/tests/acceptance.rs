//! Release gate for the whole toolkit. Ten checks cover the simulator against
//! dense linear-algebra oracles, every gradient path against finite
//! differences, scaled-down training targets, the augmentation arithmetic,
//! dataset round-trips, and artifact determinism. Each check prints exactly
//! one `acceptance NN <name>: PASS/FAIL` line (run with `--nocapture` to see
//! them); tolerances and wall-clock budgets are pinned here in code.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use qaug::augment::{
    allocate_counts, class_thresholds, compute_error_profile, AugmentConfig, Classifier,
};
use qaug::data::{load_idx, to_bytes, write_idx_images, write_idx_labels, LabeledDataset};
use qaug::hqcnn::{HqcnnModel, HqcnnSpec};
use qaug::nn::{flat_grad_slices, Tensor};
use qaug::qgan::{born_probabilities, train_born_qgan, tv_distance, BornConfig};
use qaug::quantum::{Complex64, GateOp, StateVector};
use qaug::seeding::{derive_seed, rng_from_seed};
use qaug::vqc::{build_ansatz, param_shift_grad, vqc_forward, AnsatzSpec, Entangler};
use qaug::Error;
use qaug_cli::hashing::determinism_hash;
use qaug_cli::jobs::run_parallel;
use qaug_cli::runs::{compare_run, prepare_pools, train_split, build_augmented};
use qaug_cli::{ExperimentConfig, Strategy};
use rand::Rng;

/// Multi-minute checks take this lock so their wall-clock budgets are not
/// distorted by each other's CPU load; the cheap checks run concurrently.
static HEAVY: Mutex<()> = Mutex::new(());

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qaug-acc-{name}-{}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Run one criterion, print its verdict line, and fail the test on any
/// violated bound (including the runtime budget).
fn criterion(number: u32, name: &str, budget: Duration, body: impl FnOnce() -> Result<(), String>) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let failure = match outcome {
        Ok(Ok(())) if elapsed <= budget => None,
        Ok(Ok(())) => Some(format!(
            "finished correct but over budget: {:.1}s > {:.0}s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        )),
        Ok(Err(msg)) => Some(msg),
        Err(panic) => Some(match panic.downcast_ref::<String>() {
            Some(s) => s.clone(),
            None => panic
                .downcast_ref::<&str>()
                .map_or_else(|| "panicked".to_string(), |s| (*s).to_string()),
        }),
    };
    match &failure {
        None => println!(
            "acceptance {number:02} {name}: PASS in {:.1}s (budget {:.0}s)",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
        Some(msg) => println!(
            "acceptance {number:02} {name}: FAIL in {:.1}s (budget {:.0}s) — {msg}",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
    }
    if let Some(msg) = failure {
        panic!("acceptance {number:02} {name} failed: {msg}");
    }
}

// --- 01: gate application vs dense matrix oracle -----------------------------

type Matrix = Vec<Vec<Complex64>>;

fn identity(dim: usize) -> Matrix {
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = Complex64::new(1.0, 0.0);
    }
    m
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut m = vec![vec![Complex64::new(0.0, 0.0); ca * cb]; ra * rb];
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    m[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    m
}

fn mat_add(a: &Matrix, b: &Matrix) -> Matrix {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

/// Full 2^n x 2^n unitary for one gate, qubit 0 as the most significant bit:
/// single-qubit kinds by Kronecker placement, CNOT via the projector split
/// |0><0|_c (x) I + |1><1|_c (x) X_t.
fn dense_unitary(op: &GateOp, n_qubits: usize) -> Matrix {
    let single = |pos: usize, m2: &Matrix| -> Matrix {
        let mut full = identity(1);
        for q in 0..n_qubits {
            let factor = if q == pos { m2.clone() } else { identity(2) };
            full = kron(&full, &factor);
        }
        full
    };
    match op.matrix2() {
        Some(m) => {
            let m2: Matrix = m.iter().map(|row| row.to_vec()).collect();
            single(op.target, &m2)
        }
        None => {
            let zero = Complex64::new(0.0, 0.0);
            let one = Complex64::new(1.0, 0.0);
            let p0: Matrix = vec![vec![one, zero], vec![zero, zero]];
            let p1: Matrix = vec![vec![zero, zero], vec![zero, one]];
            let x: Matrix = vec![vec![zero, one], vec![one, zero]];
            let control = op.control.expect("controlled gate");
            let mut keep = identity(1);
            let mut flip = identity(1);
            for q in 0..n_qubits {
                let keep_f = if q == control { p0.clone() } else { identity(2) };
                let flip_f = if q == control {
                    p1.clone()
                } else if q == op.target {
                    x.clone()
                } else {
                    identity(2)
                };
                keep = kron(&keep, &keep_f);
                flip = kron(&flip, &flip_f);
            }
            mat_add(&keep, &flip)
        }
    }
}

fn basis_state(n_qubits: usize, index: usize) -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
    amps[index] = Complex64::new(1.0, 0.0);
    StateVector::from_amplitudes(amps).unwrap()
}

#[test]
fn a01_gate_application_matches_dense_matrices() {
    const TOL: f64 = 1e-12;
    criterion(1, "gate-vs-dense-matrix", Duration::from_secs(1), || {
        let angles = [0.37, -1.2, 2.5];
        let mut checked = 0usize;
        for n in 1..=4usize {
            let mut ops: Vec<GateOp> = Vec::new();
            for t in 0..n {
                ops.extend([GateOp::i(t), GateOp::x(t), GateOp::y(t), GateOp::z(t), GateOp::h(t)]);
                for a in angles {
                    ops.extend([
                        GateOp::rx(t, a),
                        GateOp::ry(t, a),
                        GateOp::rz(t, a),
                        GateOp::phase(t, a),
                    ]);
                }
                for c in 0..n {
                    if c != t {
                        ops.push(GateOp::cnot(c, t));
                    }
                }
            }
            for op in &ops {
                let oracle = dense_unitary(op, n);
                for b in 0..1usize << n {
                    let input = basis_state(n, b);
                    let fast = input.apply_gate(op).map_err(|e| e.to_string())?;
                    let slow = mat_vec(&oracle, input.amplitudes());
                    for (i, (f, s)) in fast.amplitudes().iter().zip(&slow).enumerate() {
                        let diff = (f - s).norm();
                        if diff > TOL {
                            return Err(format!(
                                "{op:?} on |{b:0n$b}> amplitude {i}: simulator {f} vs oracle {s} (diff {diff:.2e})"
                            ));
                        }
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000, "oracle coverage unexpectedly small: {checked}");
        Ok(())
    });
}

// --- 02: shift-rule gradients vs central finite differences ------------------

#[test]
fn a02_shift_rule_matches_finite_differences() {
    const FD_H: f64 = 1e-5;
    const TOL: f64 = 1e-5;
    const CASES: usize = 100;
    criterion(2, "shift-rule-vs-fd", Duration::from_secs(30), || {
        let mut rng = rng_from_seed(0x5c2e);
        for case in 0..CASES {
            let spec = AnsatzSpec {
                n_qubits: rng.gen_range(1..=5),
                depth: rng.gen_range(1..=3),
                entangler: if rng.gen_bool(0.5) { Entangler::Ring } else { Entangler::Linear },
            };
            let pc = build_ansatz(&spec).map_err(|e| e.to_string())?;
            let params: Vec<f64> =
                (0..pc.n_params()).map(|_| rng.gen_range(-3.14..3.14)).collect();
            let features: Vec<f64> =
                (0..spec.n_qubits).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let input = angle_encoded(&features)?;
            let measured: Vec<usize> = (0..spec.n_qubits).collect();
            let upstream: Vec<f64> =
                (0..spec.n_qubits).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let grad = param_shift_grad(&pc, &params, &input, &measured, &upstream)
                .map_err(|e| e.to_string())?;
            let j = rng.gen_range(0..pc.n_params());
            let mut shifted = params.clone();
            let energy = |p: &[f64]| -> Result<f64, String> {
                let e = vqc_forward(&pc, p, &input, &measured).map_err(|e| e.to_string())?;
                Ok(e.iter().zip(&upstream).map(|(v, u)| v * u).sum())
            };
            shifted[j] = params[j] + FD_H;
            let up = energy(&shifted)?;
            shifted[j] = params[j] - FD_H;
            let down = energy(&shifted)?;
            let numeric = (up - down) / (2.0 * FD_H);
            let diff = (grad[j] - numeric).abs();
            if diff > TOL {
                return Err(format!(
                    "case {case} ({spec:?}) parameter {j}: shift {0} vs fd {numeric} (diff {diff:.2e})",
                    grad[j]
                ));
            }
        }
        Ok(())
    });
}

fn angle_encoded(features: &[f64]) -> Result<StateVector, String> {
    qaug::quantum::angle_encode(features).map_err(|e| e.to_string())
}

// --- 03: full hybrid gradient vs finite differences --------------------------

#[test]
fn a03_hybrid_gradient_matches_finite_differences() {
    const FD_H: f64 = 1e-5;
    const REL_TOL: f64 = 1e-3;
    const ABS_FLOOR: f64 = 1e-6;
    criterion(3, "hybrid-gradient-vs-fd", Duration::from_secs(120), || {
        let spec = HqcnnSpec {
            image_side: 8,
            conv_channels: 4,
            n_qubits: 4,
            vqc_depth: 2,
            entangler: Entangler::Ring,
            n_classes: 3,
        };
        let mut model = HqcnnModel::new(spec, 0xac3).map_err(|e| e.to_string())?;
        let mut rng = rng_from_seed(0xac3f);
        let images: Vec<Tensor> = (0..2)
            .map(|_| {
                Tensor::new(vec![1, 8, 8], (0..64).map(|_| rng.gen_range(0.0..1.0)).collect())
                    .unwrap()
            })
            .collect();
        let image_refs: Vec<&Tensor> = images.iter().collect();
        let labels = [rng.gen_range(0..3), rng.gen_range(0..3)];
        let (_, grads) = model.loss_grad(&image_refs, &labels).map_err(|e| e.to_string())?;
        let mut analytic: Vec<Vec<f64>> =
            flat_grad_slices(&grads.cnn).iter().map(|s| s.to_vec()).collect();
        analytic.push(grads.vqc.clone());
        analytic.extend(flat_grad_slices(&grads.readout).iter().map(|s| s.to_vec()));
        let mut worst = 0.0f64;
        let mut n_params = 0usize;
        for s in 0..analytic.len() {
            for i in 0..analytic[s].len() {
                n_params += 1;
                let orig = model.param_slices_mut()[s][i];
                model.param_slices_mut()[s][i] = orig + FD_H;
                let (up, _) = model.loss_grad(&image_refs, &labels).map_err(|e| e.to_string())?;
                model.param_slices_mut()[s][i] = orig - FD_H;
                let (down, _) =
                    model.loss_grad(&image_refs, &labels).map_err(|e| e.to_string())?;
                model.param_slices_mut()[s][i] = orig;
                let numeric = (up - down) / (2.0 * FD_H);
                let a = analytic[s][i];
                let rel = (a - numeric).abs() / f64::max(a.abs().max(numeric.abs()), ABS_FLOOR);
                worst = worst.max(rel);
                if rel > REL_TOL {
                    return Err(format!(
                        "slice {s} index {i}: analytic {a} vs fd {numeric} (relative {rel:.2e})"
                    ));
                }
            }
        }
        assert_eq!(n_params, model.n_params());
        assert!(n_params > 200, "expected a full-size model, got {n_params} parameters");
        println!("  hybrid check: {n_params} parameters, worst relative deviation {worst:.2e}");
        Ok(())
    });
}

// --- 04: desk-scale classifier training targets -------------------------------

/// The shared desk-scale experiment: synthetic three-class digits, 8x8.
fn desk_config(out: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.out_dir = out.to_path_buf();
    config.dataset.per_class = 100;
    config.dataset.test_per_class = 50;
    config.train.epochs = 30;
    config
}

#[test]
fn a04_desk_classifier_reaches_training_targets() {
    const TRAIN_TARGET: f64 = 0.95;
    const TEST_TARGET: f64 = 0.80;
    const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
    const REQUIRED: usize = 4;
    let _lock = HEAVY.lock().unwrap();
    criterion(4, "desk-classifier-training", Duration::from_secs(600), || {
        let dir = temp_dir("desk");
        let config = desk_config(&dir);
        config.validate().map_err(|e| e.to_string())?;
        let pools = prepare_pools(&config).map_err(|e| e.to_string())?;
        let runs = run_parallel(&SEEDS, |&seed| {
            compare_run(&config, &pools, Strategy::None, seed).map(|(run, _)| run)
        })
        .map_err(|e| e.to_string())?;
        let mut hits = 0usize;
        for run in &runs {
            let train = run.final_train_accuracy;
            let test = run.final_test.average_accuracy;
            let ok = train >= TRAIN_TARGET && test >= TEST_TARGET;
            hits += usize::from(ok);
            println!(
                "  seed {}: train {:.3} test {:.3} -> {}",
                run.seed,
                train,
                test,
                if ok { "target met" } else { "below target" }
            );
        }
        std::fs::remove_dir_all(&dir).ok();
        if hits < REQUIRED {
            return Err(format!("targets met on {hits} of {} seeds, need {REQUIRED}", SEEDS.len()));
        }
        Ok(())
    });
}

// --- 05: toy quantum generator convergence ------------------------------------

#[test]
fn a05_toy_quantum_generator_matches_target_distribution() {
    const TV_TARGET: f64 = 0.1;
    const MAX_STEPS: usize = 2000;
    const REQUIRED: usize = 3;
    criterion(5, "toy-generator-convergence", Duration::from_secs(300), || {
        let target = [0.5, 0.2, 0.2, 0.1];
        let mut hits = 0usize;
        for seed in 0..5u64 {
            let config = BornConfig { steps: MAX_STEPS, seed, ..BornConfig::default() };
            let (pc, params, outcome) =
                train_born_qgan(&target, &config).map_err(|e| e.to_string())?;
            // Recompute the distance from the returned parameters; do not
            // trust the reported history.
            let probs = born_probabilities(&pc, &params).map_err(|e| e.to_string())?;
            let tv = tv_distance(&probs, &target);
            let steps_run = outcome.history.steps.len();
            let ok = tv < TV_TARGET && steps_run <= MAX_STEPS;
            hits += usize::from(ok);
            println!(
                "  seed {seed}: TV {tv:.4} after {steps_run} steps -> {}",
                if ok { "converged" } else { "not converged" }
            );
        }
        if hits < REQUIRED {
            return Err(format!("{hits} of 5 seeds converged, need {REQUIRED}"));
        }
        Ok(())
    });
}

// --- 06: error-profile arithmetic ---------------------------------------------

/// Classifier stand-in that decodes its verdict from the two-value "image":
/// data[0] is the true class, data[1] >= 0.5 forces a wrong prediction.
struct ScriptedClassifier;

impl Classifier for ScriptedClassifier {
    fn n_classes(&self) -> usize {
        3
    }

    fn predict_class(&self, image: &Tensor) -> qaug::Result<(usize, f64)> {
        let true_class = image.data()[0] as usize;
        let wrong = image.data()[1] >= 0.5;
        let predicted = if wrong { (true_class + 1) % 3 } else { true_class };
        Ok((predicted, 0.9))
    }
}

#[test]
fn a06_error_profile_allocation_and_thresholds_arithmetic() {
    criterion(6, "profile-allocation-thresholds", Duration::from_secs(1), || {
        // A 100-per-class evaluation with per-class accuracies 84%, 96%, 24%.
        let errors = [16usize, 4, 76];
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (class, &wrong_count) in errors.iter().enumerate() {
            for k in 0..100usize {
                let flag = if k < wrong_count { 1.0 } else { 0.0 };
                images.push(Tensor::new(vec![1, 1, 2], vec![class as f64, flag]).unwrap());
                labels.push(class);
            }
        }
        let names = vec!["0".into(), "1".into(), "2".into()];
        let test_set = LabeledDataset::new(images, labels, names).unwrap();
        let profile =
            compute_error_profile(&ScriptedClassifier, &test_set).map_err(|e| e.to_string())?;
        if profile.e != vec![16, 4, 76] || profile.e_total != 96 {
            return Err(format!("profile counts {:?} total {}", profile.e, profile.e_total));
        }
        let expected_r = [1.0 / 6.0, 1.0 / 24.0, 19.0 / 24.0];
        if profile.r != expected_r {
            return Err(format!("shares {:?}, expected exactly {expected_r:?}", profile.r));
        }
        let counts = allocate_counts(300, &profile.r).map_err(|e| e.to_string())?;
        if counts != vec![50, 13, 237] {
            return Err(format!("allocation {counts:?}, expected [50, 13, 237]"));
        }
        let thresholds = class_thresholds(&AugmentConfig::default(), &profile);
        let (t0, t1, t2) = (thresholds[0], thresholds[1], thresholds[2]);
        // The error-heavy class is easiest to enter; the clean classes sit
        // close together above it.
        if !(t2 < t1 && t1 <= t0 && (t0 - t1) < (t1 - t2)) {
            return Err(format!("threshold ordering violated: {thresholds:?}"));
        }
        Ok(())
    });
}

// --- 07: confidence-filter soundness ------------------------------------------

#[test]
fn a07_confidence_filter_accepts_only_sound_samples() {
    const N_GEN: usize = 1000;
    criterion(7, "filter-soundness", Duration::from_secs(60), || {
        let dir = temp_dir("filter");
        let mut config = desk_config(&dir);
        config.dataset.per_class = 30;
        config.dataset.test_per_class = 20;
        config.train.epochs = 6;
        config.gan_train.epochs = 10;
        config.augment.n_gen = N_GEN;
        config.augment.max_attempts = 2;
        config.validate().map_err(|e| e.to_string())?;
        let pools = prepare_pools(&config).map_err(|e| e.to_string())?;
        let seed = 0u64;
        let split = train_split(&config, &pools, seed).map_err(|e| e.to_string())?;
        let aug = build_augmented(&config, &pools, &split, Strategy::Custom, seed)
            .map_err(|e| e.to_string())?;
        // Rebuild the profiling classifier the augmentation used (same seeds)
        // and re-judge every accepted sample independently.
        let mut classifier = HqcnnModel::new(config.hqcnn_spec(), derive_seed(seed, 0x22))
            .map_err(|e| e.to_string())?;
        classifier
            .train(&split, &config.train_config(derive_seed(seed, 0x23)))
            .map_err(|e| e.to_string())?;
        let thresholds = aug.thresholds.as_ref().ok_or("custom run must report thresholds")?;
        if aug.generated.is_empty() {
            return Err("no samples accepted; soundness check would be vacuous".into());
        }
        let mut violations = 0usize;
        for g in &aug.generated {
            let p = classifier.predict(&g.image).map_err(|e| e.to_string())?;
            if p.class != g.class || p.confidence < thresholds[g.class] {
                violations += 1;
            }
        }
        let accepted = aug.generated.len();
        println!(
            "  accepted {accepted} of {N_GEN} requested across classes; {violations} violations"
        );
        std::fs::remove_dir_all(&dir).ok();
        if violations != 0 {
            return Err(format!("{violations} accepted samples violate their threshold"));
        }
        Ok(())
    });
}

// --- 08: customized augmentation lifts a weakened class ------------------------

#[test]
fn a08_custom_augmentation_lifts_weakened_class() {
    const WEAK_CLASS: usize = 2;
    const REQUIRED_WINS: usize = 3;
    const MAX_AVG_DROP: f64 = 0.02;
    const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
    let _lock = HEAVY.lock().unwrap();
    criterion(8, "weak-class-augmentation", Duration::from_secs(1800), || {
        let dir = temp_dir("weak");
        let mut config = desk_config(&dir);
        config.dataset.class_caps = Some(vec![100, 100, 30]);
        config.gan_train.epochs = 20;
        config.validate().map_err(|e| e.to_string())?;
        let pools = prepare_pools(&config).map_err(|e| e.to_string())?;
        let cells: Vec<(Strategy, u64)> = SEEDS
            .iter()
            .flat_map(|&s| [(Strategy::None, s), (Strategy::Custom, s)])
            .collect();
        let runs = run_parallel(&cells, |&(strategy, seed)| {
            compare_run(&config, &pools, strategy, seed).map(|(run, _)| run)
        })
        .map_err(|e| e.to_string())?;
        let mut wins = 0usize;
        let mut base_avgs = Vec::new();
        let mut custom_avgs = Vec::new();
        for pair in runs.chunks(2) {
            let (base, custom) = (&pair[0], &pair[1]);
            let base_weak = base.final_test.per_class_accuracy[WEAK_CLASS]
                .ok_or("weak class missing from test set")?;
            let custom_weak = custom.final_test.per_class_accuracy[WEAK_CLASS]
                .ok_or("weak class missing from test set")?;
            let win = custom_weak > base_weak;
            wins += usize::from(win);
            base_avgs.push(base.final_test.average_accuracy);
            custom_avgs.push(custom.final_test.average_accuracy);
            println!(
                "  seed {}: class-{WEAK_CLASS} accuracy {:.3} -> {:.3} ({}), average {:.3} -> {:.3}",
                base.seed,
                base_weak,
                custom_weak,
                if win { "improved" } else { "no gain" },
                base.final_test.average_accuracy,
                custom.final_test.average_accuracy,
            );
        }
        let base_mean = base_avgs.iter().sum::<f64>() / base_avgs.len() as f64;
        let custom_mean = custom_avgs.iter().sum::<f64>() / custom_avgs.len() as f64;
        println!(
            "  wins {wins}/{}; mean average accuracy {base_mean:.4} -> {custom_mean:.4}",
            SEEDS.len()
        );
        std::fs::remove_dir_all(&dir).ok();
        if wins < REQUIRED_WINS {
            return Err(format!("weak class improved on {wins} of 5 seeds, need {REQUIRED_WINS}"));
        }
        if custom_mean < base_mean - MAX_AVG_DROP {
            return Err(format!(
                "average accuracy dropped {:.4} (limit {MAX_AVG_DROP})",
                base_mean - custom_mean
            ));
        }
        Ok(())
    });
}

// --- 09: IDX round-trip and corruption rejection --------------------------------

#[test]
fn a09_idx_round_trip_and_magic_rejection() {
    criterion(9, "idx-round-trip", Duration::from_secs(1), || {
        let dir = temp_dir("idx");
        let mut rng = rng_from_seed(0x1d9);
        let images: Vec<Vec<u8>> =
            (0..7).map(|_| (0..15).map(|_| rng.gen()).collect()).collect();
        let labels: Vec<u8> = (0..7).map(|i| (i % 3) as u8).collect();
        let ip = dir.join("images-idx3-ubyte");
        let lp = dir.join("labels-idx1-ubyte");
        write_idx_images(&ip, &images, 5, 3).map_err(|e| e.to_string())?;
        write_idx_labels(&lp, &labels).map_err(|e| e.to_string())?;
        let ds = load_idx(&ip, &lp).map_err(|e| e.to_string())?;
        let (back_images, back_labels) = to_bytes(&ds);
        if back_images != images || back_labels != labels {
            return Err("decoded pixels or labels differ from what was written".into());
        }
        // Writing the decoded data again must reproduce the files bit for bit.
        let ip2 = dir.join("images2-idx3-ubyte");
        let lp2 = dir.join("labels2-idx1-ubyte");
        write_idx_images(&ip2, &back_images, 5, 3).map_err(|e| e.to_string())?;
        write_idx_labels(&lp2, &back_labels).map_err(|e| e.to_string())?;
        if std::fs::read(&ip).unwrap() != std::fs::read(&ip2).unwrap()
            || std::fs::read(&lp).unwrap() != std::fs::read(&lp2).unwrap()
        {
            return Err("re-encoded files are not byte-identical".into());
        }
        // Corrupt the image magic number: must be rejected as a format error.
        let mut bytes = std::fs::read(&ip).unwrap();
        bytes[3] ^= 0x01;
        let bad = dir.join("corrupt-idx3-ubyte");
        std::fs::write(&bad, bytes).unwrap();
        match load_idx(&bad, &lp) {
            Err(Error::Format(_)) => {}
            other => {
                return Err(format!("corrupted magic produced {other:?}, expected a format error"))
            }
        }
        std::fs::remove_dir_all(&dir).ok();
        Ok(())
    });
}

// --- 10: comparison artifacts are deterministic ---------------------------------

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(&path, out);
        } else {
            out.push(path);
        }
    }
}

/// Stable digest of every artifact under `dir`: JSON hashed with timestamps
/// stripped, everything else hashed raw.
fn artifact_digests(dir: &Path) -> Vec<(String, String)> {
    let mut files = Vec::new();
    collect_files(dir, &mut files);
    files.sort();
    files
        .iter()
        .map(|path| {
            let rel = path.strip_prefix(dir).unwrap().display().to_string();
            let digest = if path.extension().is_some_and(|e| e == "json") {
                let value: serde_json::Value =
                    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
                determinism_hash(&value)
            } else {
                format!("{:x}", fnv1a(&std::fs::read(path).unwrap()))
            };
            (rel, digest)
        })
        .collect()
}

/// Cheap digest for raw byte comparison (FNV-1a, 64-bit).
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[test]
fn a10_compare_reruns_are_byte_identical() {
    let _lock = HEAVY.lock().unwrap();
    criterion(10, "compare-determinism", Duration::from_secs(1800), || {
        let dir = temp_dir("determinism");
        let out = dir.join("out");
        let body = format!(
            "seeds = [0, 1]\nout_dir = {:?}\n[dataset]\nper_class = 40\ntest_per_class = 20\npool_per_class = 80\n[train]\nepochs = 8\n[gan_train]\nepochs = 2\n[augment]\nn_gen = 45\n",
            out.display()
        );
        let config_path = dir.join("config.toml");
        std::fs::write(&config_path, body).unwrap();
        let args =
            ["compare", "--strategies", "classic,custom", "--config", config_path.to_str().unwrap()];
        let run = |label: &str| -> Result<Vec<(String, String)>, String> {
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_qaug"))
                .args(args)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!(
                    "{label} run failed: {}",
                    String::from_utf8_lossy(&status.stderr)
                ));
            }
            Ok(artifact_digests(&out))
        };
        let first = run("first")?;
        let second = run("second")?;
        if first != second {
            let mismatches: Vec<&str> = first
                .iter()
                .zip(&second)
                .filter(|(a, b)| a != b)
                .map(|(a, _)| a.0.as_str())
                .collect();
            return Err(format!("artifacts differ between reruns: {mismatches:?}"));
        }
        println!("  {} artifacts identical across reruns", first.len());
        std::fs::remove_dir_all(&dir).ok();
        Ok(())
    });
}
