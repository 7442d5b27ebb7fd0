//! Acceptance run: one PASS/FAIL line per criterion. The process exits 0
//! unless a criterion panics; the lines are the verdict.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::PathBuf;
use std::time::Instant;

use ndarray::{Array2, Array3};
use qdml::dataset::{slice_windows, split_groups, FeatureMode, FeatureSeries, SampleSet};
use qdml::ensemble::{bootstrap_resample, EnsembleSpec};
use qdml::hyperopt::{
    expected_improvement, good_set_size, paper_neuron_grid, random_search, sa_accept, sa_search, tpe_search,
    tpe_split, CampaignConfig, HyperPoint, Method, Parzen, SaConfig, SearchSpace, SyntheticObjective, TaskResult,
    TpeConfig,
};
use qdml::lstm::{Architecture, LstmNetwork, TrainConfig};
use qdml::physmodel::{ModelId, SiteExcitonModel};
use qdml::seed;
use qdml::tdvp::{propagate_setup, PropagationConfig, Scheme, SystemSetup, Trajectory};
use qdml::tensornet::SiteOrdering;
use qdml::units::HBAR_EV_FS;
use qdml_cli::config::RunConfig;
use qdml_cli::pipeline::{self, ForecastRun};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn report(n: usize, name: &str, start: Instant, v: &Verdict) {
    println!(
        "criterion {n:>2} {}  {name}: {} [{:.1} s]",
        if v.pass { "PASS" } else { "FAIL" },
        v.detail,
        start.elapsed().as_secs_f64()
    );
}

fn out_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

// 1

fn tdvp_vs_dense() -> Verdict {
    let levels = 4;
    let model = SiteExcitonModel::preset(ModelId::I).with_modes_per_state(2);
    let setup = SystemSetup::new(&model, levels, &SiteOrdering::default()).unwrap();
    let cfg = PropagationConfig {
        dt: 0.5,
        t_end: 200.0,
        scheme: Scheme::TwoSite,
        n_boson_levels: levels,
        max_bond: 64,
        ..Default::default()
    };
    let run = propagate_setup(&setup, &cfg, false).unwrap();
    let h = common::dense_hamiltonian(&setup.model, &setup.bath, levels, &setup.layout);
    let prop = common::DensePropagator::new(&h);
    let psi0 = common::dense_initial(&setup.layout, levels, 1);
    let dims = setup.layout.local_dims(levels);
    let mut worst: f64 = 0.0;
    for (t, row) in run.trajectory.times.iter().zip(&run.trajectory.rows) {
        let rho = common::dense_rho(&prop.evolve(&psi0, *t), &dims, setup.layout.electronic_site());
        worst = worst
            .max((row.rho11 - rho[[0, 0]].re).abs())
            .max((row.rho22 - rho[[1, 1]].re).abs())
            .max((row.re_rho12 - rho[[0, 1]].re).abs())
            .max((row.im_rho12 - rho[[0, 1]].im).abs());
    }
    verdict(
        worst < 1e-5 && h.nrows() == 512,
        format!("dense dim {}, max |rho_tdvp - rho_dense| = {worst:.2e} over 200 fs (< 1e-5)", h.nrows()),
    )
}

// 2

fn conservation(cfg: &RunConfig) -> (Verdict, Trajectory) {
    let model = cfg.model().unwrap();
    let prop = cfg.propagation();
    let setup = SystemSetup::new(&model, prop.n_boson_levels, &SiteOrdering::default()).unwrap();
    let run = propagate_setup(&setup, &prop, true).unwrap();
    let e0 = run.diagnostics[0].energy;
    let trace = run.trajectory.rows.iter().map(|r| (r.trace() - 1.0).abs()).fold(0.0, f64::max);
    let herm = run.diagnostics.iter().map(|d| d.hermiticity).fold(0.0, f64::max);
    let norm = run.diagnostics.iter().map(|d| (d.norm - 1.0).abs()).fold(0.0, f64::max);
    let drift = run.diagnostics.iter().map(|d| (d.energy - e0).abs()).fold(0.0, f64::max);
    let norm_tol = match prop.scheme {
        Scheme::OneSite => 1e-8,
        Scheme::TwoSite => 1e-6,
    };
    let pass = trace <= 1e-6 && herm <= 1e-12 && norm <= norm_tol && drift < 1e-6 && run.trajectory.len() == 2001;
    let v = verdict(
        pass,
        format!(
            "{} modes/state, {} levels, {:?} D={}: trace {trace:.1e}, hermiticity {herm:.1e}, norm {norm:.1e} (< {norm_tol:.0e}), energy drift {drift:.1e} eV",
            setup.bath.modes_per_state(),
            prop.n_boson_levels,
            prop.scheme,
            prop.max_bond
        ),
    );
    (v, run.trajectory)
}

// 3

fn rabi() -> Verdict {
    let v12 = 0.0124;
    let mut model = SiteExcitonModel::preset(ModelId::I).with_modes_per_state(2).decoupled();
    model.site_energy_gap = 0.0;
    model.electronic_coupling = v12;
    let setup = SystemSetup::new(&model, 3, &SiteOrdering::default()).unwrap();
    let cfg = PropagationConfig {
        dt: 0.5,
        t_end: 200.0,
        n_boson_levels: 3,
        max_bond: 16,
        ..Default::default()
    };
    let traj = propagate_setup(&setup, &cfg, false).unwrap().trajectory;
    let p: Vec<f64> = traj.rows.iter().map(|r| r.rho11).collect();
    let err = traj
        .times
        .iter()
        .zip(&p)
        .map(|(t, p)| (p - (v12 * t / HBAR_EV_FS).cos().powi(2)).abs())
        .fold(0.0, f64::max);
    let k = (1..p.len() - 1).find(|&k| p[k] <= p[k - 1] && p[k] <= p[k + 1]).unwrap();
    // vertex of the parabola through the three samples around the minimum
    let (a, b, c) = (p[k - 1], p[k], p[k + 1]);
    let t_min = traj.times[k] + 0.5 * cfg.dt * (a - c) / (a - 2.0 * b + c);
    let expected = std::f64::consts::PI * HBAR_EV_FS / (2.0 * v12);
    verdict(
        err < 1e-6 && (t_min - expected).abs() < 1.0,
        format!("max |rho11 - cos^2(Vt/hbar)| = {err:.1e}; first minimum {t_min:.2} fs vs {expected:.2} fs"),
    )
}

// 4

fn gradients() -> Verdict {
    let mut rng = seed::rng(404);
    let arch = Architecture {
        input_dim: 3,
        hidden: vec![8, 8],
        output_dim: 3,
        window_length: 5,
    };
    let mut net = LstmNetwork::new(arch, &mut rng).unwrap();
    let data = SampleSet {
        inputs: Array3::from_shape_fn((6, 5, 3), |_| rng.random_range(-1.0..1.0)),
        targets: Array2::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0)),
    };
    let (_, grad) = net.loss_and_gradient(&data).unwrap();
    let h = 1e-5;
    let n = net.params().len();
    let mut rel = vec![0.0; n];
    let mut tiny = 0;
    for i in 0..n {
        let x = net.params()[i];
        net.params_mut()[i] = x + h;
        let plus = net.loss_and_gradient(&data).unwrap().0;
        net.params_mut()[i] = x - h;
        let minus = net.loss_and_gradient(&data).unwrap().0;
        net.params_mut()[i] = x;
        let fd = (plus - minus) / (2.0 * h);
        let scale = fd.abs().max(grad[i].abs());
        if scale < 1e-8 {
            // both vanish; a ratio would be noise
            tiny += 1;
            assert!((fd - grad[i]).abs() < 1e-10);
            continue;
        }
        rel[i] = (fd - grad[i]).abs() / scale;
    }
    let probes = rand::seq::index::sample(&mut rng, n, 300);
    let worst = probes.iter().map(|i| rel[i]).fold(0.0, f64::max);
    let (all_i, all_worst) = rel.iter().enumerate().fold((0, 0.0), |m, (i, &r)| if r > m.1 { (i, r) } else { m });
    verdict(
        worst < 1e-4,
        format!(
            "{} random of {n} parameters, max relative error {worst:.2e}; over all {n}: {all_worst:.2e} at |g| = {:.1e} ({tiny} with |g| < 1e-8)",
            probes.len(),
            grad[all_i].abs()
        ),
    )
}

// 5

fn protocol_constants() -> Verdict {
    let mut failures = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            failures.push(what.to_string());
        }
    };
    let n = 701;
    let series = FeatureSeries {
        mode: FeatureMode::Population,
        times: (0..n).map(|k| 0.5 * k as f64).collect(),
        rows: Array2::zeros((n, 1)),
    };
    for l in [10, 50, 175] {
        let samples = slice_windows(&series, l).unwrap();
        check(samples.len() == n - l, "window count n - L");
        let split = split_groups(&samples, 3).unwrap();
        let m = samples.len() as f64;
        let a = split.train.len() + split.validation.len();
        check((a as f64 - 0.75 * m).abs() <= 1.0, "3:1 split");
        check(split.external.len() + a == samples.len(), "split covers all windows");
        check((split.train.len() as f64 - 0.7 * a as f64).abs() <= 1.0, "7:3 split");
    }
    let train = TrainConfig::default();
    check(train.batch_size == 50 && train.max_epochs == 300, "batch 50 / epochs 300");
    check(paper_neuron_grid() == (10..=510).step_by(20).collect::<Vec<_>>(), "neuron grid");
    check(CampaignConfig::paper(Method::SimulatedAnnealing, 0).total_trials() == 2000, "paper campaign 2000");
    check(CampaignConfig::desk(Method::SimulatedAnnealing, 0).total_trials() == 100, "desk campaign 100");
    let desk = RunConfig::desk();
    check(desk.campaign.tasks * desk.campaign.iters == 100, "desk config 4 x 25");
    let paper = RunConfig::paper();
    check(paper.campaign.tasks * paper.campaign.iters == 2000, "paper config 20 x 100");
    let c1 = "(SA-H10)×BT100".parse::<EnsembleSpec>().unwrap().member_count();
    let c2 = "(SA-H1)×BT50×MC50".parse::<EnsembleSpec>().unwrap().member_count();
    check(c1 == 1000 && c2 == 2500, "ensemble cardinalities");
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("windows n-L, 3:1 and 7:3 splits, 50/300, 26-value grid 10..510, 2000/100 trials, (H10)xBT100 = {c1}, (H1)xBT50xMC50 = {c2}")
        } else {
            format!("mismatched: {}", failures.join(", "))
        },
    )
}

// 6

fn sa_statistics() -> Verdict {
    let mut rng = seed::rng(606);
    let draws = 100_000;
    let t = 2.5;
    let accepted = (0..draws).filter(|_| sa_accept(t, t, rng.random())).count();
    let rate = accepted as f64 / draws as f64;
    let downhill = (0..draws).all(|_| sa_accept(-rng.random_range(1e-12..10.0), t, rng.random()));
    let target = (-1.0f64).exp();
    verdict(
        (rate - target).abs() <= 0.01 && downhill,
        format!("acceptance at df = T: {rate:.4} (e^-1 = {target:.4}); df < 0 always accepted: {downhill}"),
    )
}

// 7

fn tpe_mechanics() -> Verdict {
    let mut ok = true;
    for gamma in [0.1, 0.15, 0.25, 0.5] {
        for n in 1..=200 {
            ok &= good_set_size(gamma, n) == ((gamma * n as f64).ceil() as usize).max(1);
        }
    }
    // Constructed history over one categorical coordinate: low losses sit on
    // categories 0-2, high ones elsewhere.
    let mut rng = seed::rng(707);
    let n_cat = 8;
    let values: Vec<usize> = (0..60).map(|_| rng.random_range(0..n_cat)).collect();
    let losses: Vec<f64> = values
        .iter()
        .map(|&v| v as f64 + rng.random_range(0.0..0.5))
        .collect();
    let gamma = 0.25;
    let (good, poor) = tpe_split(&losses, gamma);
    ok &= good.len() == 15;
    let worst_good = good.iter().map(|&i| losses[i]).fold(f64::MIN, f64::max);
    ok &= poor.iter().all(|&i| losses[i] >= worst_good);
    let l = Parzen::fit(good.iter().map(|&i| values[i]), n_cat);
    let g = Parzen::fit(poor.iter().map(|&i| values[i]), n_cat);
    let mut by_ratio: Vec<usize> = (0..n_cat).collect();
    let mut by_ei = by_ratio.clone();
    by_ratio.sort_by(|&a, &b| (l.probs[b] / g.probs[b]).total_cmp(&(l.probs[a] / g.probs[a])));
    by_ei.sort_by(|&a, &b| {
        expected_improvement(gamma, l.probs[b], g.probs[b]).total_cmp(&expected_improvement(gamma, l.probs[a], g.probs[a]))
    });
    ok &= by_ratio == by_ei;
    // and on random density pairs
    let mut pairs_ok = 0;
    for _ in 0..1000 {
        let (l1, g1, l2, g2): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        let (r1, r2) = (l1 / g1, l2 / g2);
        let (e1, e2) = (expected_improvement(gamma, l1, g1), expected_improvement(gamma, l2, g2));
        if (r1 - r2).abs() <= 1e-12 || (r1 > r2) == (e1 > e2) {
            pairs_ok += 1;
        }
    }
    ok &= pairs_ok == 1000;
    verdict(
        ok,
        format!("good-set size = ceil(gamma n) for n <= 200; EI order = l/g order on constructed history ({:?}) and 1000 random pairs", &by_ei[..3]),
    )
}

// 8

fn bootstrap() -> Verdict {
    let mut rng = seed::rng(808);
    let m = 1000;
    let data: Vec<usize> = (0..m).collect();
    let mut sizes_ok = true;
    let mut total = 0.0;
    for _ in 0..1000 {
        let r = bootstrap_resample(&data, &mut rng).unwrap();
        sizes_ok &= r.len() == m;
        let mut seen = vec![false; m];
        for &x in &r {
            seen[x] = true;
        }
        total += seen.iter().filter(|&&s| s).count() as f64 / m as f64;
    }
    let frac = total / 1000.0;
    let expected = 1.0 - (1.0 - 1.0 / m as f64).powi(m as i32);
    verdict(
        sizes_ok && (frac - 0.632).abs() <= 0.01,
        format!("sizes preserved: {sizes_ok}; unique fraction {frac:.4} (1 - (1 - 1/m)^m = {expected:.4})"),
    )
}

// 9

fn optimizer_comparison() -> Verdict {
    let space = SearchSpace::paper(350.0, 0.5).unwrap();
    let optimum = HyperPoint {
        layers: 3,
        neurons: vec![170, 10, 10],
        memory_time: 50.0,
    };
    assert!(space.contains(&optimum) && SyntheticObjective::value(&optimum) == 0.0);
    let tasks = 20;
    let run = |method: Method| -> Vec<TaskResult> {
        let cfg = CampaignConfig::paper(method, 909);
        (0..tasks)
            .map(|t| {
                let s = cfg.task_seed(t);
                match method {
                    Method::RandomSearch => random_search(&space, &SyntheticObjective, 100, t, s),
                    Method::SimulatedAnnealing => sa_search(&space, &SyntheticObjective, 100, &SaConfig::default(), t, s),
                    Method::Tpe => tpe_search(&space, &SyntheticObjective, 100, &TpeConfig::default(), t, s),
                }
                .unwrap()
            })
            .collect()
    };
    let median_at = |results: &[TaskResult], iter: usize| {
        let mut v: Vec<f64> = results.iter().map(|r| r.best_trace()[iter - 1]).collect();
        v.sort_by(f64::total_cmp);
        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
    };
    let mut hits = Vec::new();
    let mut medians = Vec::new();
    for method in [Method::SimulatedAnnealing, Method::Tpe, Method::RandomSearch] {
        let results = run(method);
        hits.push(results.iter().filter(|r| r.best_trial().loss == 0.0).count());
        medians.push(median_at(&results, 25));
    }
    verdict(
        hits.iter().all(|&h| h >= 18) && medians[0] <= medians[2],
        format!(
            "global minimum found in SA {}/20, BO {}/20, RS {}/20 tasks (need >= 18); median best at iteration 25: SA {:.0}, RS {:.0}",
            hits[0], hits[1], hits[2], medians[0], medians[2]
        ),
    )
}

// 10-12

fn run_pipeline(cfg: &RunConfig, reference: &Trajectory, t_hist: f64, label: &str) -> ForecastRun {
    let run = pipeline::forecast_run(cfg, reference, t_hist).unwrap();
    let dir = out_dir().join(label);
    pipeline::write_forecast_bundle(
        &dir,
        reference,
        t_hist,
        &run.forecast,
        &run.errors,
        &format!("{}, {t_hist} fs history, {} mode", run.ensemble.spec, cfg.feature_mode),
    )
    .unwrap();
    run
}

fn main() {
    println!("acceptance: 12 criteria");
    let t = Instant::now();
    report(1, "TDVP vs dense propagation", t, &tdvp_vs_dense());
    let t = Instant::now();
    let desk = RunConfig::desk();
    let (v, reference) = conservation(&desk);
    let generate_s = t.elapsed().as_secs_f64();
    let v2 = verdict(v.pass && generate_s < 600.0, v.detail);
    report(2, "conservation over 1 ps", t, &v2);
    let t = Instant::now();
    report(3, "Rabi limit", t, &rabi());
    let t = Instant::now();
    report(4, "LSTM gradients vs central differences", t, &gradients());
    let t = Instant::now();
    report(5, "protocol constants", t, &protocol_constants());
    let t = Instant::now();
    report(6, "SA acceptance statistics", t, &sa_statistics());
    let t = Instant::now();
    report(7, "TPE mechanics", t, &tpe_mechanics());
    let t = Instant::now();
    report(8, "bootstrap statistics", t, &bootstrap());
    let t = Instant::now();
    let v9 = optimizer_comparison();
    let v9 = verdict(v9.pass && t.elapsed().as_secs_f64() < 60.0, v9.detail);
    report(9, "optimizer comparison on the synthetic objective", t, &v9);

    let t = Instant::now();
    let cfg = RunConfig {
        ensemble: "(SA-H3)×BT10".into(),
        ..desk.clone()
    };
    let full = run_pipeline(&cfg, &reference, 350.0, "full_350fs");
    let s = full.errors.summary;
    let minutes = (generate_s + t.elapsed().as_secs_f64()) / 60.0;
    report(
        10,
        "desk forecast, 350 fs history, (SA-H3)xBT10",
        t,
        &verdict(
            s.max_abs_err < 0.05 && s.coverage_2sigma >= 0.8 && minutes < 45.0,
            format!(
                "{} members, max |err| {:.4} (< 0.05), 2-sigma coverage {:.1}% (>= 80%), mean |err| {:.4}, {minutes:.1} min incl. reference",
                s.n_members,
                s.max_abs_err,
                100.0 * s.coverage_2sigma,
                s.mean_abs_err
            ),
        ),
    );

    let t = Instant::now();
    let pop_cfg = RunConfig {
        feature_mode: FeatureMode::Population,
        ..cfg.clone()
    };
    let pop = run_pipeline(&pop_cfg, &reference, 350.0, "population_350fs");
    let (w_full, w_pop) = (4.0 * s.mean_std, 4.0 * pop.errors.summary.mean_std);
    report(
        11,
        "population-only ablation widens the interval",
        t,
        &verdict(
            w_pop > w_full,
            format!("mean 2-sigma interval width: population {w_pop:.4}, full {w_full:.4}"),
        ),
    );

    let t = Instant::now();
    let short = run_pipeline(&cfg, &reference, 200.0, "full_200fs");
    let s200 = short.errors.summary;
    report(
        12,
        "shorter history forecasts worse",
        t,
        &verdict(
            s200.mean_abs_err >= s.mean_abs_err && s200.mean_std >= s.mean_std,
            format!(
                "mean |err| 200 fs {:.4} vs 350 fs {:.4}; mean sigma 200 fs {:.4} vs 350 fs {:.4}",
                s200.mean_abs_err, s.mean_abs_err, s200.mean_std, s.mean_std
            ),
        ),
    );
    println!("forecast bundles in {}", out_dir().display());
}
