//! Properties of the classical baseline on generated tasks.

use rvbench_core::evaluator::{evaluate, planet_cap, MatchConfig};
use rvbench_core::solver::{fit_keplerian, greedy_solve, FitConfig, GreedyConfig};
use rvbench_core::task::{generate_task, generate_task_with, GeneratorConfig, Tier};

#[test]
fn gate_soundness_and_bounded_output() {
    let gate = GreedyConfig::default().bic_gate;
    for seed in 300..315 {
        let b = generate_task(seed).unwrap();
        let out = greedy_solve(&b.dataset);
        assert_eq!(out, greedy_solve(&b.dataset), "seed {seed} not deterministic");

        let n = out.submission.planets.len();
        assert!(n <= 4);
        out.submission.validate(planet_cap(Tier::Hard)).unwrap();
        for step in out.steps.iter().filter(|s| s.accepted) {
            assert!(step.bic_before - step.bic_after > gate, "seed {seed}: {step:?}");
        }
        assert!((out.fit.bic - out.steps.iter().filter(|s| s.accepted).last().map_or(out.fit.bic, |s| s.bic_after)).abs() < 1e-9);

        if n > 0 {
            let reduced = fit_keplerian(&b.dataset, &out.fit.signals[..n - 1], None, &FitConfig::default()).unwrap();
            assert!(reduced.bic - out.fit.bic > gate, "seed {seed}: dropping the last planet only costs {}", reduced.bic - out.fit.bic);
        }

        let report = evaluate(&out.submission, &b, &MatchConfig::default());
        let report = report.unwrap_or_else(|e| panic!("seed {seed}: baseline submission rejected: {e}"));
        assert_eq!(report.passed, report.criteria().iter().all(|&c| c));
    }
}

#[test]
fn residuals_whiten_on_single_planet_easy_tasks() {
    let mut cfg = GeneratorConfig::default();
    cfg.priors.n_planets = Some(1);
    cfg.gp_probability = 0.0;
    let mut ratios = Vec::new();
    let mut seed = 0;
    while ratios.len() < 30 {
        seed += 1;
        let b = generate_task_with(seed, &cfg).unwrap();
        if b.tier != Tier::Easy {
            continue;
        }
        let out = greedy_solve(&b.dataset);
        ratios.push(out.fit.rms_ms / b.noise.sigma_w_ms);
    }
    let good = ratios.iter().filter(|&&r| r <= 1.2).count();
    assert!(good * 10 >= ratios.len() * 9, "{good}/{} whitened: {ratios:?}", ratios.len());
}
