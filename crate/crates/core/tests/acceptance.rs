//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use commsense::detector::{calibrate, sweep_threshold, threshold_grid};
use commsense::estimator::{accuracy, ConfusionMatrix, KnnModel, Split};
use commsense::features::fit_pca_matrix;
use commsense::harness::{run_experiment, ExperimentConfig};
use commsense::lte_phy::{detect_pss, extract_csi, CellConfig};
use commsense::scenario_sim::{synth_iq, Motion, ScenarioConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let detail = f()?;
    let took = t.elapsed();
    if let Some(limit) = limit {
        check(took < limit, format!("{detail}; took {took:.2?}, limit {limit:?}"))?;
    }
    Ok(format!("{detail} ({took:.2?})"))
}

/// Sample covariance (divisor n - 1) built directly, then decomposed by
/// nalgebra; eigenvalues sorted descending with matching vectors.
fn oracle_eigen(data: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = data.nrows();
    let mean = data.row_mean();
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(data.ncols(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn pca_oracle() -> Outcome {
    let (rows, d, k) = (50, 20, 3);
    let mut worst_val: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        // Column scales spread the spectrum so the retained subspace is well defined.
        let values: Vec<f64> = (0..rows * d).map(|i| normal.sample(&mut rng) * (1.0 + (i % d) as f64 * 0.3)).collect();
        let data = DMatrix::from_row_slice(rows, d, &values);
        let (ev, evec) = oracle_eigen(&data);

        let full = fit_pca_matrix(&values, d, d).map_err(|e| e.to_string())?;
        for (a, b) in full.eigenvalues.iter().zip(&ev) {
            worst_val = worst_val.max((a - b).abs() / b.abs());
        }

        let model = fit_pca_matrix(&values, d, k).map_err(|e| e.to_string())?;
        let q1 = DMatrix::from_fn(d, k, |r, c| model.component(c)[r]);
        let q2 = evec.columns(0, k).into_owned();
        // Largest principal angle: sin(theta_max) = ||(I - Q2 Q2^T) Q1||_2.
        let resid = &q1 - &q2 * (q2.transpose() * &q1);
        let sin_max = resid.singular_values().max();
        worst_angle = worst_angle.max(sin_max.min(1.0).asin());
    }
    check(worst_val <= 1e-8, format!("eigenvalue relative error {worst_val:e}"))?;
    check(worst_angle < 1e-6, format!("principal angle {worst_angle:e} rad"))?;
    Ok(format!("20 datasets, max eigenvalue rel. error {worst_val:.1e}, max principal angle {worst_angle:.1e} rad"))
}

/// Exhaustive scan written independently of the library.
fn scan_oracle(ex: &[[f64; 3]], labels: &[u8], q: [f64; 3]) -> u8 {
    let mut best: Option<(f64, u8, usize)> = None;
    for (i, e) in ex.iter().enumerate() {
        let dx = e[0] - q[0];
        let dy = e[1] - q[1];
        let dz = e[2] - q[2];
        let dist = dx * dx + dy * dy + dz * dz;
        let better = match best {
            None => true,
            Some((bd, bl, bi)) => dist < bd || (dist == bd && (labels[i], i) < (bl, bi)),
        };
        if better {
            best = Some((dist, labels[i], i));
        }
    }
    best.unwrap().1
}

fn knn_oracle() -> Outcome {
    let mut queries_total = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let n = rng.random_range(1..=1000);
        let m = rng.random_range(1..=200);
        // Every other instance lives on a coarse integer lattice to force ties.
        let lattice = seed % 2 == 0;
        let point = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            if lattice {
                [0; 3].map(|_| rng.random_range(-3..=3) as f64)
            } else {
                [0; 3].map(|_| rng.random::<f64>() * 10.0 - 5.0)
            }
        };
        let ex: Vec<[f64; 3]> = (0..n).map(|_| point(&mut rng)).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(1..=8)).collect();
        let model = KnnModel::new(3, ex.concat(), labels.clone()).map_err(|e| e.to_string())?;
        for _ in 0..m {
            let q = point(&mut rng);
            let got = model.classify(&q).map_err(|e| e.to_string())?;
            let want = scan_oracle(&ex, &labels, q);
            check(got == want, format!("seed {seed}: query {q:?} gave {got}, oracle {want}"))?;
            queries_total += 1;
        }
    }
    Ok(format!("50 instances, {queries_total} queries, all identical"))
}

fn table3() -> Outcome {
    let static_m = [
        [697, 3, 0, 0, 0, 0, 0, 0],
        [1, 698, 1, 0, 0, 0, 0, 0],
        [0, 1, 699, 0, 0, 0, 0, 0],
        [0, 0, 0, 682, 7, 0, 11, 0],
        [0, 0, 0, 7, 671, 15, 5, 2],
        [0, 0, 0, 0, 29, 644, 1, 26],
        [0, 0, 0, 8, 7, 0, 685, 0],
        [0, 0, 0, 1, 2, 26, 1, 670],
    ];
    let dynamic_m = [
        [697, 3, 0, 0, 0, 0, 0, 0],
        [1, 685, 14, 0, 0, 0, 0, 0],
        [0, 10, 688, 2, 0, 0, 0, 0],
        [0, 0, 3, 659, 22, 1, 14, 1],
        [0, 0, 5, 12, 639, 28, 14, 2],
        [0, 0, 0, 0, 24, 623, 5, 48],
        [0, 0, 0, 11, 11, 10, 658, 10],
        [0, 0, 0, 0, 1, 44, 5, 650],
    ];
    let s = accuracy(&ConfusionMatrix::from_counts(static_m)).map_err(|e| e.to_string())?;
    let d = accuracy(&ConfusionMatrix::from_counts(dynamic_m)).map_err(|e| e.to_string())?;
    check(s == 5446.0 / 5600.0, format!("static {s}"))?;
    check(d == 5299.0 / 5600.0, format!("dynamic {d}"))?;
    Ok(format!("static 5446/5600 = {s:.4}, dynamic 5299/5600 = {d:.4}"))
}

fn phy_round_trip() -> Outcome {
    let cell = CellConfig::with_cell_id(11);
    let clean = ScenarioConfig { snr_db: f64::INFINITY, ..Default::default() };
    let mut worst: f64 = 0.0;
    let mut positions = 0;
    for category in 0..8 {
        for snapshot in 0..4 {
            let (cap, truth) = synth_iq(&clean, &cell, category, snapshot).map_err(|e| e.to_string())?;
            let csi = extract_csi(&cap, &cell).map_err(|e| e.to_string())?;
            check(csi.len() == 100, format!("{} CRS positions", csi.len()))?;
            positions = csi.len();
            for (e, h) in csi.values.iter().zip(&truth.crs_response) {
                worst = worst.max((e - h.norm()).abs() / h.norm());
            }
        }
    }
    check(worst <= 1e-6, format!("noiseless relative error {worst:e}"))?;

    let noisy = ScenarioConfig { snr_db: 30.0, ..Default::default() };
    let mut mse = 0.0;
    for snapshot in 0..100 {
        let (cap, truth) = synth_iq(&noisy, &cell, snapshot % 8, snapshot).map_err(|e| e.to_string())?;
        let csi = extract_csi(&cap, &cell).map_err(|e| e.to_string())?;
        let err: f64 = csi.values.iter().zip(&truth.crs_response).map(|(e, h)| (e - h.norm()).powi(2)).sum();
        let power: f64 = truth.crs_response.iter().map(Complex64::norm_sqr).sum();
        mse += err / power;
    }
    let db = 10.0 * (mse / 100.0).log10();
    check(db <= -20.0, format!("30 dB relative RMS error {db:.2} dB"))?;
    Ok(format!("noiseless max rel. error {worst:.1e} over {positions} positions, 30 dB error {db:.1} dB"))
}

fn synchronization() -> Outcome {
    let clean = ScenarioConfig { snr_db: f64::INFINITY, ..Default::default() };
    let mut trials = 0;
    for cell_id in [0u16, 1, 2, 100, 251, 503] {
        let cell = CellConfig::with_cell_id(cell_id);
        for snapshot in 0..10 {
            let (cap, _) = synth_iq(&clean, &cell, 0, snapshot).map_err(|e| e.to_string())?;
            let r = detect_pss(&cap, &cell).map_err(|e| e.to_string())?;
            check(
                r.frame_offset == 4096 && r.nid2 == cell.nid2(),
                format!("cell {cell_id} snapshot {snapshot}: offset {} nid2 {}", r.frame_offset, r.nid2),
            )?;
            trials += 1;
        }
    }
    let noisy = ScenarioConfig { snr_db: 10.0, ..Default::default() };
    let cell = CellConfig::with_cell_id(1);
    let mut hits = 0;
    for snapshot in 0..100 {
        let (cap, _) = synth_iq(&noisy, &cell, 0, snapshot).map_err(|e| e.to_string())?;
        if let Ok(r) = detect_pss(&cap, &cell) {
            if r.frame_offset.abs_diff(4096) <= 1 && r.nid2 == 1 {
                hits += 1;
            }
        }
    }
    check(hits >= 99, format!("10 dB: {hits}/100 within one sample"))?;
    Ok(format!("{trials}/{trials} noiseless exact, 10 dB {hits}/100 within one sample"))
}

fn two_gaussians() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let empty = Normal::new(0.3, 0.1).unwrap();
    let occ = Normal::new(0.7, 0.1).unwrap();
    let mut scores = Vec::with_capacity(10_000);
    let mut labels = Vec::with_capacity(10_000);
    for i in 0..10_000 {
        let occupied = i % 2 == 1;
        let s = if occupied { occ.sample(&mut rng) } else { empty.sample(&mut rng) };
        scores.push(f64::clamp(s, 0.0, 1.0));
        labels.push(occupied);
    }
    let sweep = sweep_threshold(&scores, &labels, &threshold_grid(0.01).unwrap()).map_err(|e| e.to_string())?;
    let cal = calibrate(&sweep, None);
    // Equal priors, decision point at the midpoint 0.5: error = Phi(-0.2 / 0.1).
    let bayes = 100.0 * StatNormal::new(0.0, 1.0).unwrap().cdf(-2.0);
    let gap = (cal.min_error_percent - bayes).abs();
    check(gap <= 0.5, format!("min error {}% vs Bayes {bayes:.3}%", cal.min_error_percent))?;
    Ok(format!("min error {}% at {} vs Bayes {bayes:.3}%", cal.min_error_percent, cal.threshold))
}

fn experiment(dir: &Path, days: Vec<u32>, splits: Vec<Split>) -> ExperimentConfig {
    ExperimentConfig {
        motions: Some(vec![Motion::Static, Motion::Dynamic]),
        day_ids: Some(days),
        splits,
        output_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = experiment(dir.path(), vec![1], vec![Split { train: 500, test: 700 }]);
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    for r in &report.runs {
        let err = r.calibration.min_error_percent;
        let acc = r.splits[0].accuracy;
        check(err <= 2.0, format!("{}: detection error {err}%", r.tag))?;
        check(acc >= 0.80, format!("{}: 500/700 accuracy {acc}", r.tag))?;
        check(r.detector_rows == 8000, format!("{}: {} detector rows", r.tag, r.detector_rows))?;
        parts.push(format!("{} error {err}% accuracy {acc:.4}", r.tag));
    }
    Ok(parts.join(", "))
}

fn day_consistency() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_commsense"))
        .args(["compare-days", "--json", "--out"])
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!("compare-days exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)),
    )?;

    let cfg = experiment(&dir.path().join("both"), vec![1, 2], vec![Split { train: 500, test: 700 }]);
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    check(report.consistency.len() == 2, "expected one comparison per motion mode")?;
    let mut parts = Vec::new();
    for c in &report.consistency {
        let delta = c.report.delta_min_error_pp;
        check(delta <= 1.0 && c.report.consistent, format!("{:?}: delta {delta} pp", c.motion))?;
        parts.push(format!("{} delta {delta:.3} pp", c.motion.map_or("dataset", |m| m.as_str())));
    }
    Ok(format!("{}, compare-days exit 0", parts.join(", ")))
}

fn read_tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let name = entry.file_name().to_string_lossy().into_owned();
        files.insert(name, fs::read(entry.path()).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg =
        experiment(dir.path(), vec![1, 2], vec![Split { train: 200, test: 250 }, Split { train: 500, test: 700 }]);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    serial.install(|| run_experiment(&cfg)).map_err(|e| e.to_string())?;
    let first = read_tree(dir.path())?;
    // Oversubscribe on purpose so work is split even on a single core.
    let parallel = rayon::ThreadPoolBuilder::new().num_threads(8).build().map_err(|e| e.to_string())?;
    parallel.install(|| run_experiment(&cfg)).map_err(|e| e.to_string())?;
    let second = read_tree(dir.path())?;
    check(first.keys().eq(second.keys()), "different file sets")?;
    for (name, bytes) in &first {
        check(second[name] == *bytes, format!("{name} differs"))?;
    }
    Ok(format!("{} artifacts byte-identical (1 thread vs 8 threads)", first.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("PCA oracle equivalence", Some(1), pca_oracle),
        ("1-NN oracle equivalence", Some(1), knn_oracle),
        ("Confusion-matrix accuracy arithmetic", None, table3),
        ("PHY round trip", Some(10), phy_round_trip),
        ("Synchronization", None, synchronization),
        ("Threshold sweep vs Bayes error", Some(1), two_gaussians),
        ("End-to-end static and dynamic", Some(60), end_to_end),
        ("Day consistency", None, day_consistency),
        ("Determinism", None, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let limit = limit.map(Duration::from_secs);
        let outcome = catch_unwind(AssertUnwindSafe(|| timed(limit, f)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
