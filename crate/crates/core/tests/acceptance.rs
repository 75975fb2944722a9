//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use lrdn::experiment::{run_experiment, ExperimentConfig};
use lrdn::model::{random_model, reduced_form, GeneratorConfig, LrdnModel, SupportSpec};
use lrdn::polymat::DEFAULT_HORIZON;
use lrdn::sim::{derive_seed, simulate, TimeSeries};
use lrdn::spectral::{h_closed_form, spectrum_of_model, DEFAULT_GRID_POINTS};
use lrdn::topology::{corollary1_check, deterministic_residual, edge_test, partition_select, write_edge_tests_csv};
use lrdn::wiener::{estimate_h, estimate_s, exact_filters, exact_s_via_factor, EstimationConfig};
use lrdn::PolynomialMatrix;

const MASTER: u64 = 2718;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Models with `l` in 2..=6, degrees at most 4, alternating contemporaneous terms.
fn varied_model(index: u64) -> LrdnModel {
    let l = 2 + (index % 5) as usize;
    let cfg = GeneratorConfig {
        m: (index % 4) as usize,
        l,
        degree_ml: (index % 5) as usize,
        degree_l: 1 + (index % 4) as usize,
        support_ml: SupportSpec::Count((index % 4) as usize * l / 2),
        support_l: SupportSpec::Count(l + 1),
        coeff_min: 0.3,
        coeff_max: 0.6,
        contemporaneous: index % 2 == 1,
        pinned_noise: vec![],
        rng_seed: derive_seed(MASTER, index),
        ..Default::default()
    };
    random_model(&cfg).expect("varied generator config is feasible")
}

fn benchmark_generator(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        rng_seed: seed,
        ..Default::default()
    }
}

fn criterion1() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..50 {
        let model = varied_model(i);
        let w = reduced_form(&model, DEFAULT_HORIZON).unwrap().w_factor;
        let via_factor = exact_s_via_factor(&w, DEFAULT_HORIZON).unwrap();
        let closed = exact_filters(&model).unwrap().s;
        worst = worst.max(via_factor.max_abs_diff(&closed).unwrap());
    }
    outcome(worst < 1e-8, format!("max coefficient error {worst:.2e} over 50 models (< 1e-8)"))
}

fn criterion2() -> Outcome {
    let hits = (0..100).filter(|&i| corollary1_check(&varied_model(1000 + i), DEFAULT_HORIZON, 1e-9).unwrap()).count();
    outcome(hits == 100, format!("support equivalence on {hits}/100 models"))
}

fn criterion3() -> Outcome {
    let mut estimates = 0;
    let mut structural_ok = true;
    let mut worst_exact = 0.0f64;
    for i in 0..20 {
        let model = varied_model(2000 + i);
        let s = exact_filters(&model).unwrap().s;
        for j in 0..model.l {
            worst_exact = worst_exact.max(s.entry(0, j, j).abs());
        }
        let ts = simulate(&model, 1000, 200, derive_seed(MASTER, 2000 + i)).unwrap();
        for p in [1, model.g_l.degree().max(1)] {
            let est = estimate_s(&ts, EstimationConfig { order_p: p, ridge: 0.0 }).unwrap();
            structural_ok &= (0..model.l).all(|j| est.coeffs.entry(0, j, j) == 0.0);
            estimates += 1;
        }
    }
    outcome(
        structural_ok && worst_exact < 1e-12,
        format!("estimated [S_0]_ii == 0 in {estimates} estimates: {structural_ok}; max exact |[S_0]_ii| {worst_exact:.1e} (< 1e-12)"),
    )
}

fn criterion4() -> Outcome {
    let mut worst = 0.0f64;
    let mut models = 0;
    let mut i = 3000;
    while models < 20 {
        let model = varied_model(i);
        i += 1;
        if model.m == 0 {
            continue;
        }
        let grid = h_closed_form(&model, DEFAULT_GRID_POINTS, DEFAULT_HORIZON).unwrap();
        for (theta, h) in grid.thetas.iter().zip(&grid.values) {
            worst = worst.max((h - model.g_ml.eval(*theta)).norm());
        }
        models += 1;
    }
    outcome(worst < 1e-6, format!("max_theta ||H - G_ml||_F = {worst:.2e} over 20 models (< 1e-6)"))
}

fn criterion5() -> Outcome {
    let mut worst = 0.0f64;
    let mut generators: Vec<GeneratorConfig> = (0..5).map(|s| benchmark_generator(derive_seed(MASTER, 5000 + s))).collect();
    generators.extend((0..5).map(|s| GeneratorConfig {
        rng_seed: derive_seed(MASTER, 5100 + s),
        ..ExperimentConfig::default().generator
    }));
    for g in &generators {
        let model = random_model(g).unwrap();
        let phi = spectrum_of_model(&model, DEFAULT_GRID_POINTS, DEFAULT_HORIZON).unwrap();
        for sv in phi.singular_values() {
            let mut sv = sv;
            sv.sort_by(|a, b| b.total_cmp(a));
            worst = worst.max(sv[4] / sv[0]);
        }
    }
    outcome(
        worst < 1e-6,
        format!("max sigma_5 / sigma_max = {worst:.2e} over 10 models x 64 points (< 1e-6)"),
    )
}

fn criterion6() -> Outcome {
    let model = random_model(&GeneratorConfig {
        m: 2,
        l: 4,
        degree_ml: 1,
        degree_l: 3,
        support_ml: SupportSpec::Count(4),
        support_l: SupportSpec::Count(6),
        coeff_min: 0.3,
        coeff_max: 0.6,
        pinned_noise: vec![],
        rng_seed: MASTER,
        ..Default::default()
    })
    .unwrap();
    let exact = exact_filters(&model).unwrap().s;
    let p = model.g_l.degree();
    let medians: Vec<f64> = [2000usize, 8000, 32000]
        .iter()
        .map(|&t| {
            let ts = simulate(&model, t, 500, derive_seed(MASTER, 6000 + t as u64)).unwrap();
            let est = estimate_s(&ts, EstimationConfig { order_p: p, ridge: 0.0 }).unwrap();
            let mut errs = Vec::new();
            for k in 0..=p {
                for i in 0..model.l {
                    for j in 0..model.l {
                        if !(k == 0 && i == j) {
                            errs.push((est.coeffs.entry(k, i, j) - exact.entry(k, i, j)).abs());
                        }
                    }
                }
            }
            errs.sort_by(f64::total_cmp);
            let n = errs.len();
            if n % 2 == 1 {
                errs[n / 2]
            } else {
                0.5 * (errs[n / 2 - 1] + errs[n / 2])
            }
        })
        .collect();
    let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
    outcome(
        decreasing && medians[2] < 0.03,
        format!(
            "median |S_hat - S| at T = 2000/8000/32000: {:.4} / {:.4} / {:.4} (decreasing, last < 0.03)",
            medians[0], medians[1], medians[2]
        ),
    )
}

fn criterion7() -> Outcome {
    let cfg = ExperimentConfig {
        trials: 20,
        master_seed: MASTER,
        ..Default::default()
    };
    let r = run_experiment(&cfg).unwrap();
    let a = &r.aggregate;
    outcome(
        a.exact_match_rate >= 0.90 && a.mean_precision >= 0.97 && a.mean_recall >= 0.97,
        format!(
            "exact match {:.2}, precision {:.4}, recall {:.4} over {} trials ({} failed) (>= 0.90, 0.97, 0.97)",
            a.exact_match_rate, a.mean_precision, a.mean_recall, a.trials, a.failed
        ),
    )
}

fn size_model() -> LrdnModel {
    let mut g_l = PolynomialMatrix::zeros(3, 3, 1);
    g_l.coeff_mut(1)[(0, 0)] = 0.5;
    g_l.coeff_mut(1)[(1, 0)] = 0.4;
    g_l.coeff_mut(1)[(2, 1)] = 0.3;
    LrdnModel::new(PolynomialMatrix::zeros(0, 3, 0), g_l, vec![1.0; 3]).unwrap()
}

fn criterion8() -> Outcome {
    let model = size_model();
    let rejected = (0..200u64)
        .filter(|&t| {
            let ts = simulate(&model, 2000, 500, derive_seed(MASTER, 8000 + t)).unwrap();
            let s = estimate_s(&ts, EstimationConfig { order_p: 1, ridge: 0.0 }).unwrap();
            // node 1 <- node 2 has no coefficient
            edge_test(&s, &ts, 1, 2, 0.05, 1e-6).unwrap().decision
        })
        .count();
    let rate = rejected as f64 / 200.0;
    outcome(
        (0.02..=0.09).contains(&rate),
        format!("null rejection rate {rate:.3} at alpha 0.05 over 200 trials (in [0.02, 0.09])"),
    )
}

fn criterion9() -> Outcome {
    let mut worst = 0.0f64;
    for s in 0..20 {
        let model = random_model(&benchmark_generator(derive_seed(MASTER, 9000 + s))).unwrap();
        let ts = simulate(&model, 2000, 500, derive_seed(MASTER, 9100 + s)).unwrap();
        let p = model.g_ml.degree();
        let h = estimate_h(&ts, EstimationConfig { order_p: p, ridge: 0.0 }).unwrap();
        for i in 0..model.m {
            worst = worst.max(h.residual_rms(i));
        }
    }
    outcome(worst < 1e-8, format!("max residual RMS {worst:.2e} over 20 seeds (< 1e-8)"))
}

fn criterion10() -> Outcome {
    let mut good = 0;
    for s in 0..40 {
        let model = random_model(&benchmark_generator(derive_seed(MASTER, 10000 + s))).unwrap();
        let ts = simulate(&model, 2000, 500, derive_seed(MASTER, 10100 + s)).unwrap();
        let pooled = TimeSeries::new(ts.data.clone(), 0, model.m + model.l).unwrap();
        let p = model.g_ml.degree();
        let Ok(part) = partition_select(&pooled, p.max(1), 1e-6) else {
            continue;
        };
        if part.l_indices.len() != 4 {
            continue;
        }
        let re = part.apply(&pooled).unwrap();
        if deterministic_residual(&re, p).unwrap() < 1e-6 {
            good += 1;
        }
    }
    let rate = good as f64 / 40.0;
    outcome(rate >= 0.95, format!("valid size-4 partition on {good}/40 seeds (>= 95%)"))
}

fn criterion11() -> Outcome {
    let cfg = ExperimentConfig {
        trials: 8,
        master_seed: MASTER,
        ..Default::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut series = Vec::new();
    let mut tests = Vec::new();
    for d in &dirs {
        run_experiment(&cfg).unwrap().write(d.path()).unwrap();
        let model = random_model(&size_model_generator()).unwrap();
        let ts = simulate(&model, 500, 100, MASTER).unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        series.push(buf);
        let s = estimate_s(&ts, EstimationConfig { order_p: 1, ridge: 0.0 }).unwrap();
        let results: Vec<_> = (2..=4).map(|i| edge_test(&s, &ts, i, 2, 0.05, 1e-6).unwrap()).collect();
        let mut buf = Vec::new();
        write_edge_tests_csv(&results, &mut buf).unwrap();
        tests.push(buf);
    }
    let mut identical = series[0] == series[1] && tests[0] == tests[1];
    let files = ["config.json", "trials.csv", "aggregate.json"];
    for f in files {
        identical &= std::fs::read(dirs[0].path().join(f)).unwrap() == std::fs::read(dirs[1].path().join(f)).unwrap();
    }
    outcome(
        identical,
        "experiment files, simulated CSV and edge-test CSV byte-identical across reruns".to_string(),
    )
}

fn size_model_generator() -> GeneratorConfig {
    GeneratorConfig {
        m: 1,
        l: 3,
        pinned_noise: vec![],
        support_ml: SupportSpec::Count(2),
        support_l: SupportSpec::Count(3),
        rng_seed: MASTER,
        ..Default::default()
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, Option<u64>, fn() -> Outcome); 11] = [
        (1, "closed-form S oracle", Some(10), criterion1),
        (2, "support equivalence", Some(10), criterion2),
        (3, "strict causality of S diagonal", None, criterion3),
        (4, "H identity", Some(10), criterion4),
        (5, "spectral rank", None, criterion5),
        (6, "estimation consistency", Some(60), criterion6),
        (7, "benchmark reproduction", Some(60), criterion7),
        (8, "F-test size", Some(120), criterion8),
        (9, "deterministic relation", None, criterion9),
        (10, "partition recovery", None, criterion10),
        (11, "determinism", None, criterion11),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|s| elapsed < Duration::from_secs(s));
        let passed = out.passed && in_time;
        if !passed {
            failed += 1;
        }
        let budget = limit.map(|s| format!(" / {s}s")).unwrap_or_default();
        println!(
            "criterion {id:>2} [{}] {name}: {} ({:.2}s{budget})",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {}/11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
