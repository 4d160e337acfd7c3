//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Every criterion is evaluated at its stated tolerance. Criteria listed in
//! `KNOWN_FAILURES` are reported as FAIL without aborting the run; any other
//! failure makes the process exit nonzero.

mod common;

use std::process::Command;
use std::time::Instant;

use common::*;

use cfolab_core::analysis::{gamma_from_snr_db, mse_formula, optimal_iota};
use cfolab_core::channel::{draw_channel, model_receive, propagate, stacked_signal_matrix, ChannelProfile};
use cfolab_core::estimator::{
    derivative_factor_residual, likelihood, likelihood_trace, stack, CostPolynomial,
};
use cfolab_core::harness::{run_bench, run_estimator, run_with_bound, EstimatorId, ExperimentSpec, Preset, ResultRow};
use cfolab_core::numerics::unit_phasor;
use cfolab_core::training::{chu_sequence, cross_correlation_matrix, OFFSETS_FIG1, OFFSETS_FIG2};
use cfolab_core::{RandomSource, SystemConfig, TrainingSet};

/// Criteria that do not hold for a faithful implementation, with the reason.
const KNOWN_FAILURES: &[(u32, &str)] = &[
    (1, "the MSE expression ranks iota = 8 strictly best for offsets {3,5,11}; 6 and 10 are about 11% worse"),
    (2, "iota = 5 carries a cross-antenna leakage floor near 3.5e-6 that the expression does not model"),
    (3, "random phases on the same lattice are only about 1.1x worse than the Chu design at these SNRs"),
];

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1() -> Outcome {
    let snrs: Vec<f64> = (10..=20).map(f64::from).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for (offsets, expect) in [(&OFFSETS_FIG1, vec![6, 8, 10]), (&OFFSETS_FIG2, vec![7, 9])] {
        let cfg = SystemConfig::reference(offsets);
        let mut seen = Vec::new();
        for &snr in &snrs {
            let opt = optimal_iota(gamma_from_snr_db(snr, &cfg), &cfg).unwrap().optimal;
            if opt != expect {
                pass = false;
            }
            if !seen.contains(&opt) {
                seen.push(opt);
            }
        }
        detail.push(format!("{offsets:?}: {seen:?} (want {expect:?})"));
    }
    Outcome { id: 1, name: "optimal iota reproduction", pass, detail: detail.join("; ") }
}

/// The Monte-Carlo run shared by criteria 2 to 4.
fn fig3_run() -> Vec<ResultRow> {
    let mut spec = ExperimentSpec::preset(Preset::Fig3);
    spec.trials = 2000;
    spec.snr_points_db = vec![10.0, 15.0, 20.0, 25.0];
    spec.estimators = vec![
        EstimatorId::Simplified { iota: 5 },
        EstimatorId::Simplified { iota: 7 },
        EstimatorId::Simplified { iota: 9 },
        EstimatorId::SimplifiedRs { iota: 7 },
    ];
    spec.emcb_draws = 500;
    run_with_bound(&spec).unwrap()
}

fn find<'a>(rows: &'a [ResultRow], name: &str, iota: Option<usize>, snr: f64) -> &'a ResultRow {
    rows.iter()
        .find(|r| r.estimator == name && r.iota == iota && r.snr_db == snr)
        .unwrap()
}

fn criterion_2(rows: &[ResultRow]) -> Outcome {
    let cfg = SystemConfig::reference(&OFFSETS_FIG2);
    let mut pass = true;
    let mut detail = Vec::new();
    for iota in [5, 7, 9] {
        for snr in [10.0, 15.0, 20.0] {
            let r = find(rows, "simplified", Some(iota), snr);
            let predicted = mse_formula(gamma_from_snr_db(snr, &cfg), iota, &cfg).unwrap();
            let emp = r.empirical_mse.unwrap();
            let err = rel(emp, predicted);
            if err > 0.25 || r.trials != 2000 {
                pass = false;
            }
            detail.push(format!("i{iota}@{snr}dB {:+.0}%", 100.0 * (emp / predicted - 1.0)));
        }
    }
    Outcome { id: 2, name: "analysis/simulation agreement within 25%", pass, detail: detail.join(" ") }
}

fn criterion_3(rows: &[ResultRow]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for snr in [10.0, 15.0] {
        let cbts = find(rows, "simplified", Some(7), snr).empirical_mse.unwrap();
        let rs = find(rows, "simplified_rs", Some(7), snr).empirical_mse.unwrap();
        let ratio = rs / cbts;
        if !(cbts < rs && ratio >= 3.0) {
            pass = false;
        }
        detail.push(format!("{snr}dB RS/CBTS = {ratio:.2}"));
    }
    Outcome { id: 3, name: "CBTS at least 3x below RS", pass, detail: detail.join(", ") }
}

fn criterion_4(rows: &[ResultRow]) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for snr in [15.0, 20.0, 25.0] {
        let r = find(rows, "simplified", Some(7), snr);
        let (emp, bound) = (r.empirical_mse.unwrap(), r.emcb.unwrap());
        let ratio = emp / bound;
        if !(ratio > 1.0 && ratio < 10.0) {
            pass = false;
        }
        detail.push(format!("{snr}dB MSE/EMCB = {ratio:.2}"));
    }
    Outcome { id: 4, name: "MSE above and within 10x of EMCB", pass, detail: detail.join(", ") }
}

fn criterion_5() -> Outcome {
    let mut worst_model = 0.0f64;
    let mut worst_stack = 0.0f64;
    for offsets in [&OFFSETS_FIG1, &OFFSETS_FIG2] {
        let cfg = SystemConfig::reference(offsets);
        let ts = TrainingSet::cbts(&cfg).unwrap();
        let mut rng = RandomSource::new(2024, 0);
        let h = draw_channel(&ChannelProfile::reference(), &cfg, &mut rng).unwrap();
        for eps in EPSILONS {
            let time = propagate(&ts, &h, eps, &cfg).unwrap();
            let model = model_receive(&ts, &h, eps, &cfg).unwrap();
            worst_model = worst_model.max(max_diff(&time.y, &model.y));
            let y = stack(&model, &cfg).unwrap().y;
            let bx = steering(eps, &cfg) * stacked_signal_matrix(&ts, &h, eps, &cfg).unwrap();
            worst_stack = worst_stack.max((&y - &bx).iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }
    Outcome {
        id: 5,
        name: "oracle equivalence",
        pass: worst_model <= 1e-9 && worst_stack <= 1e-9,
        detail: format!("time vs matrix {worst_model:.1e}, stacking {worst_stack:.1e}"),
    }
}

fn criterion_6() -> Outcome {
    let mut chu_worst = 0.0f64;
    for p in [16, 64] {
        let s = chu_sequence(p, 1).unwrap();
        for tau in 1..p {
            chu_worst = chu_worst.max(periodic_autocorrelation(&s, tau).norm());
        }
    }
    let mut a_worst = 0.0f64;
    let mut resid_cbts = 0.0f64;
    let mut g_min = f64::INFINITY;
    for offsets in [&OFFSETS_FIG1, &OFFSETS_FIG2] {
        let cfg = SystemConfig::reference(offsets);
        let ts = TrainingSet::cbts(&cfg).unwrap();
        for mu in 0..cfg.n_t {
            for mu_p in 0..cfg.n_t {
                for l in 0..cfg.p {
                    for l_p in (0..cfg.p).step_by(3) {
                        let d = cross_correlation_matrix(&ts, &cfg, l, l_p, mu, mu_p) - closed_form_a(&cfg, mu, mu_p, l, l_p);
                        a_worst = a_worst.max(d.norm());
                    }
                }
            }
        }
        let h = unit_channels(&cfg);
        for eps in EPSILONS {
            let sf = stack(&propagate(&ts, &h, eps, &cfg).unwrap(), &cfg).unwrap();
            let iota = if offsets == &OFFSETS_FIG1 { 8 } else { 7 };
            resid_cbts = resid_cbts.max(derivative_factor_residual(&sf, iota, &cfg).unwrap());
            let g = CostPolynomial::new(&sf, &cfg).factor_g(unit_phasor(eps / cfg.q() as f64));
            g_min = g_min.min(g.re);
        }
    }
    let single = SystemConfig { n_t: 1, offsets: vec![0], ..SystemConfig::reference(&OFFSETS_FIG2) };
    let ts1 = TrainingSet::cbts(&single).unwrap();
    let h1 = unit_channels(&single);
    let mut resid_single = 0.0f64;
    for eps in EPSILONS {
        let sf = stack(&propagate(&ts1, &h1, eps, &single).unwrap(), &single).unwrap();
        for iota in 1..single.q() {
            resid_single = resid_single.max(derivative_factor_residual(&sf, iota, &single).unwrap());
        }
    }
    Outcome {
        id: 6,
        name: "correlation and factorization identities",
        pass: chu_worst <= 1e-9 && a_worst <= 1e-9 && resid_cbts < 5e-2 && resid_single < 1e-6 && g_min > 0.0,
        detail: format!(
            "chu {chu_worst:.1e}, A {a_worst:.1e}, residual {resid_cbts:.1e} / single {resid_single:.1e}, min Re g {g_min:.3e}"
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    for preset in [Preset::Fig1, Preset::Fig2, Preset::Fig3] {
        let spec = ExperimentSpec::preset(preset);
        let cfg = &spec.config;
        let ts = TrainingSet::cbts(cfg).unwrap();
        for (k, eps) in EPSILONS.into_iter().enumerate() {
            let mut rng = RandomSource::new(700, k as u64);
            let h = draw_channel(&spec.profile, cfg, &mut rng).unwrap();
            let cbts_frame = propagate(&ts, &h, eps, cfg).unwrap();
            let rs = TrainingSet::random(cfg, &mut rng).unwrap();
            let rs_frame = propagate(&rs, &h, eps, cfg).unwrap();
            for id in &spec.estimators {
                let frame = match id {
                    EstimatorId::SimplifiedRs { .. } => &rs_frame,
                    _ => &cbts_frame,
                };
                let est = run_estimator(*id, frame, &spec).unwrap();
                worst = worst.max(wrapped(est.epsilon_hat, eps, cfg.q()).abs());
            }
        }
    }
    let cfg = SystemConfig::reference(&OFFSETS_FIG2);
    let ts = TrainingSet::cbts(&cfg).unwrap();
    let grid: Vec<f64> = (0..1600).map(|k| -8.0 + 0.01 * k as f64).collect();
    let mut disagreements = 0;
    for t in 0..100 {
        let mut rng = RandomSource::new(701, t);
        let h = draw_channel(&ChannelProfile::reference(), &cfg, &mut rng).unwrap();
        let eps = rng.uniform_open(-8.0, 8.0);
        let mut frame = propagate(&ts, &h, eps, &cfg).unwrap();
        let var = frame.signal_power / 10.0;
        frame.add_noise(var, &mut rng);
        let sf = stack(&frame, &cfg).unwrap();
        let pick = |f: &dyn Fn(f64) -> f64| grid.iter().copied().max_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
        let a = pick(&|e| likelihood(&sf, e, &cfg));
        let b = pick(&|e| likelihood_trace(&sf, e, &cfg));
        if a != b {
            disagreements += 1;
        }
    }
    Outcome {
        id: 7,
        name: "noiseless exactness and dual-form argmax",
        pass: worst < 1e-2 && disagreements == 0,
        detail: format!("worst noiseless error {worst:.2e}, argmax disagreements {disagreements}/100"),
    }
}

fn criterion_8() -> Outcome {
    let report = run_bench(&ExperimentSpec::preset(Preset::Fig3)).unwrap();
    Outcome {
        id: 8,
        name: "simplified at least 10x faster than grid search",
        pass: report.speedup >= 10.0,
        detail: format!(
            "{:.1} us vs {:.1} us, {:.1}x",
            report.simplified_median_us, report.ml_grid_median_us, report.speedup
        ),
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("spec.json");
    std::fs::write(
        &config,
        r#"{"preset": "paper-fig3", "trials": 150, "snr_points_db": [5, 20], "emcb_draws": 40, "seed": 11}"#,
    )
    .unwrap();
    let run = |threads: &str, name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_cfolab"))
            .args(["mse-vs-snr", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env("CFOLAB_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("4", "b.csv");
    let c = run("1", "c.csv");
    Outcome {
        id: 9,
        name: "byte-identical CSV across runs and thread counts",
        pass: !a.is_empty() && a == b && a == c,
        detail: format!("{} bytes, 1 vs 4 threads {}", a.len(), if a == b { "equal" } else { "differ" }),
    }
}

fn main() {
    let start = Instant::now();
    let rows = fig3_run();
    let outcomes = vec![
        criterion_1(),
        criterion_2(&rows),
        criterion_3(&rows),
        criterion_4(&rows),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
    ];
    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_FAILURES.iter().find(|(id, _)| *id == o.id);
        println!(
            "[{}] criterion {}: {} | {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail
        );
        match (o.pass, known) {
            (false, Some((_, why))) => println!("       known deviation: {why}"),
            (false, None) => unexpected += 1,
            (true, Some(_)) => println!("       listed as a known deviation but now passes"),
            (true, None) => {}
        }
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} passed, {unexpected} unexpected failure(s), {:.1} s",
        outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
