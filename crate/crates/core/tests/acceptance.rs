// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use layergeo::dynamics::mc_cos2_expectation;
use layergeo::report::OracleRow;
use layergeo::{
    calibrate, correlator, correlator_series, estimate_dimensions, generate_synthetic_trace,
    gram_spectrum, run_campaign, CascadeConfig, EstimateOptions, LayerGenerator, NormalMode,
    SyntheticSpec,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    check(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))?;
    Ok(elapsed)
}

fn correlator_exactness() -> Outcome {
    let start = Instant::now();
    let v = DMatrix::from_row_slice(3, 4, &[1.0, -2.0, 0.5, 3.0].repeat(3));
    let e = correlator(&v, &[]).map_err(|e| e.to_string())?;
    check((e - 1.0).abs() <= 1e-12, format!("identical rows gave {e}"))?;
    let e = correlator(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]), &[]).unwrap();
    check(e.abs() <= 1e-12, format!("orthogonal pair gave {e}"))?;
    let e = correlator(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]), &[]).unwrap();
    check((e - 2.0 / 3.0).abs() <= 1e-12, format!("(1,0),(1,1) gave {e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=8);
        let d = rng.random_range(1..=8);
        let m = common::gaussian(n, d, &mut rng);
        let gap = (correlator(&m, &[]).unwrap() - common::brute_correlator(&m)).abs();
        worst = worst.max(gap);
    }
    check(worst <= 1e-12, format!("closed form vs double loop gap {worst:e}"))?;
    let t = within_time(start, Duration::from_secs(1))?;
    Ok(format!("1000 trials, worst gap {worst:.1e}, {t:.2?}"))
}

fn invariance() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut scale_gap, mut rot_gap): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.random_range(2..=16);
        let d = rng.random_range(2..=32);
        let m = common::gaussian(n, d, &mut rng);
        let c: f64 = 10f64.powf(rng.random_range(-3.0..3.0));
        let q = common::random_rotation(d, &mut rng);

        let e = correlator(&m, &[]).unwrap();
        let base = gram_spectrum(&m, 1e-300).unwrap().raw_eigenvalues;
        let top = base[0];

        let e_scaled = correlator(&(&m * c), &[]).unwrap();
        let scaled = gram_spectrum(&(&m * c), 1e-300).unwrap().raw_eigenvalues;
        scale_gap = scale_gap.max((e_scaled - e).abs());
        for (a, b) in base.iter().zip(&scaled) {
            scale_gap = scale_gap.max((b / (c * c) - a).abs() / top);
        }

        let rotated = &m * &q;
        let e_rot = correlator(&rotated, &[]).unwrap();
        let rot = gram_spectrum(&rotated, 1e-300).unwrap().raw_eigenvalues;
        rot_gap = rot_gap.max((e_rot - e).abs());
        for (a, b) in base.iter().zip(&rot) {
            rot_gap = rot_gap.max((b - a).abs() / top);
        }
    }
    check(scale_gap <= 1e-12, format!("scale gap {scale_gap:e}"))?;
    check(rot_gap <= 1e-9, format!("rotation gap {rot_gap:e}"))?;
    let t = within_time(start, Duration::from_secs(10))?;
    Ok(format!("scale gap {scale_gap:.1e}, rotation gap {rot_gap:.1e}, {t:.2?}"))
}

fn hypersphere_oracle() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    for (i, d) in [2usize, 10, 100, 1000].into_iter().enumerate() {
        let row = OracleRow::from(mc_cos2_expectation(d, 1_000_000, 100 + i as u64).unwrap());
        check(row.z_score.abs() < 4.0, format!("d={d}: z = {:.2}", row.z_score))?;
        match d {
            100 => check(row.approx_rel_gap <= 0.011, format!("d=100 gap {}", row.approx_rel_gap))?,
            1000 => check(row.approx_rel_gap <= 0.0011, format!("d=1000 gap {}", row.approx_rel_gap))?,
            _ => {}
        }
        parts.push(format!("d={d} z={:+.2}", row.z_score));
    }
    let t = within_time(start, Duration::from_secs(30))?;
    Ok(format!("{}, {t:.2?}", parts.join(" ")))
}

fn projection_dynamics() -> Outcome {
    use common::cascade::*;
    let start = Instant::now();
    let config = CascadeConfig {
        embed_dim: EMBED_DIM,
        token_count: TOKENS,
        target_correlator: INITIAL_CORRELATOR,
        schedule: SCHEDULE.to_vec(),
        seeds: SEEDS,
        mode: NormalMode::Complement,
    };
    let runs = run_campaign(&config, &config.seed_list(0)).map_err(|e| e.to_string())?;
    check(runs.len() == SEEDS, "wrong run count")?;
    check(runs[0].dims == [512, 448, 384, 320], format!("dims {:?}", runs[0].dims))?;
    let max = |v: Vec<f64>| v.into_iter().fold(0.0, f64::max);
    let ratio = max(runs.iter().map(|r| max(r.ratio_errors())).collect());
    let drift = max(runs.iter().map(|r| r.conservation_drift()).collect());
    let numerator = max(runs.iter().map(|r| max(r.numerator_changes())).collect());
    check(ratio <= RATIO_TOL, format!("ratio error {ratio:.4}"))?;
    check(drift <= DRIFT_TOL, format!("conservation drift {drift:.4}"))?;
    check(numerator <= NUMERATOR_TOL, format!("numerator change {numerator:.4}"))?;
    let t = within_time(start, Duration::from_secs(120))?;
    Ok(format!(
        "{SEEDS} seeds, worst ratio {ratio:.3}, drift {drift:.3}, numerator {numerator:.4}, {t:.2?}"
    ))
}

fn dimension_round_trip() -> Outcome {
    use common::round_trip::*;
    let (baseline, model) = common::round_trip_specs();
    let (mut worst_machine, mut worst_model): (f64, f64) = (0.0, 0.0);
    let mut sum = 0.0;
    for seed in 0..SEEDS {
        let b = correlator_series(&generate_synthetic_trace(&baseline, seed).unwrap()).unwrap();
        let m = correlator_series(&generate_synthetic_trace(&model, seed).unwrap()).unwrap();
        let cal = calibrate(&b, EMBED_DIM).map_err(|e| e.to_string())?;
        let est = estimate_dimensions(&m, &cal, EstimateOptions::default()).map_err(|e| e.to_string())?;
        check(est.working_layer == 1, format!("seed {seed}: working layer {}", est.working_layer))?;
        worst_machine = worst_machine.max((est.d_machine / TARGET_DIM as f64 - 1.0).abs());
        worst_model = worst_model.max((est.d_model / (2 * TARGET_DIM) as f64 - 1.0).abs());
        sum += est.d_machine;

        if seed == 0 {
            let same = estimate_dimensions(&b, &cal, EstimateOptions::default()).unwrap();
            check(
                same.d_model == EMBED_DIM as f64,
                format!("identity gave d_model {}", same.d_model),
            )?;
        }
    }
    check(worst_machine <= TOL, format!("k={TARGET_DIM}: worst relative error {worst_machine:.3}"))?;
    check(worst_model <= TOL, format!("k={}: worst relative error {worst_model:.3}", 2 * TARGET_DIM))?;
    Ok(format!(
        "k={TARGET_DIM}, {SEEDS} seeds, mean {:.2}, worst error {worst_machine:.3} (working layer k={}: {worst_model:.3}), identity exact",
        sum / SEEDS as f64,
        2 * TARGET_DIM
    ))
}

fn spectrum_clipping() -> Outcome {
    let spec = SyntheticSpec::new(
        32,
        64,
        vec![LayerGenerator::ConfinedSubspace { k: 3 }, LayerGenerator::ConfinedSubspace { k: 3 }],
    );
    let trace = generate_synthetic_trace(&spec, 3).unwrap();
    let m = &trace.layers[0].matrix;
    let rank = common::svd_rank(m);
    check(rank == 3, format!("oracle rank {rank}"))?;
    let s = gram_spectrum(m, 1e-8).map_err(|e| e.to_string())?;
    check(s.num_clipped == 32 - rank, format!("clipped {}", s.num_clipped))?;
    check(s.num_clipped == 29, format!("clipped {}", s.num_clipped))?;
    let kappa = s.eigenvalues[0] / 1e-8;
    check(
        s.condition_number == kappa,
        format!("kappa {} vs clipped {kappa}", s.condition_number),
    )?;
    let norms: f64 = m.row_iter().map(|r| r.norm_squared()).sum();
    let raw: f64 = s.raw_eigenvalues.iter().sum();
    let rel = (raw - norms).abs() / norms;
    check(rel <= 1e-9, format!("trace gap {rel:e}"))?;
    Ok(format!("29 clipped, kappa {kappa:.3e}, trace gap {rel:.1e}"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_layergeo"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    check(
        out.status.success(),
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)),
    )
}

fn dir_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_owned();

    let mut spec = SyntheticSpec::new(
        16,
        32,
        vec![
            LayerGenerator::SharedMeanPlusNoise { mean_norm: 8.0, sigma: 1.0 },
            LayerGenerator::IsotropicGaussian { sigma: 1.0 },
            LayerGenerator::SharedMeanPlusNoise { mean_norm: 3.0, sigma: 1.0 },
        ],
    );
    let model_spec = root.join("model.json");
    fs::write(&model_spec, serde_json::to_string(&spec).unwrap()).unwrap();
    spec.random_init = true;
    spec.layers = vec![LayerGenerator::SharedMeanPlusNoise { mean_norm: 2.0, sigma: 1.0 }; 4];
    let base_spec = root.join("baseline.json");
    fs::write(&base_spec, serde_json::to_string(&spec).unwrap()).unwrap();
    let cascade_spec = root.join("cascade.json");
    let config = CascadeConfig {
        embed_dim: 64,
        token_count: 8,
        target_correlator: 0.05,
        schedule: vec![8, 8],
        seeds: 3,
        mode: NormalMode::Complement,
    };
    fs::write(&cascade_spec, serde_json::to_string(&config).unwrap()).unwrap();
    let (model, base) = (root.join("model"), root.join("baseline"));

    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = root.join(format!("run{run}"));
        let synth_model = out.join("model");
        run_cli(&["synth", &s(&model_spec), "--seed", "5", "--out", &s(&synth_model)])?;
        let analyze = out.join("analyze");
        let dims = out.join("dims");
        let simulate = out.join("simulate");
        let oracle = out.join("oracle");
        if run == 0 {
            run_cli(&["synth", &s(&model_spec), "--seed", "5", "--out", &s(&model)])?;
            run_cli(&["synth", &s(&base_spec), "--seed", "6", "--out", &s(&base)])?;
        }
        run_cli(&["analyze", &s(&model), "--spectra", "--out", &s(&analyze)])?;
        run_cli(&["dims", &s(&model), &s(&base), "--out", &s(&dims)])?;
        run_cli(&["simulate", &s(&cascade_spec), "--seed", "9", "--out", &s(&simulate)])?;
        run_cli(&["oracle", "--dims", "2,10", "--samples", "20000", "--seed", "4", "--out", &s(&oracle)])?;
        outputs.push(
            [synth_model, analyze, dims, simulate, oracle]
                .iter()
                .map(|d| dir_files(d))
                .collect::<Vec<_>>(),
        );
    }
    let files: usize = outputs[0].iter().map(Vec::len).sum();
    check(files >= 10, format!("only {files} output files"))?;
    check(outputs[0] == outputs[1], "outputs differ between runs")?;
    Ok(format!("synth, analyze, dims, simulate, oracle: {files} files byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("correlator exactness", correlator_exactness),
        ("invariance suite", invariance),
        ("hypersphere oracle", hypersphere_oracle),
        ("projection dynamics", projection_dynamics),
        ("dimension round trip", dimension_round_trip),
        ("spectrum clipping", spectrum_clipping),
        ("CLI determinism", determinism),
    ];
    let mut failed = 0;
    for (name, criterion) in criteria {
        match criterion() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
