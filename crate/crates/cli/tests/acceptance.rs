//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use drtsoh_core::drt::{fit_drt, fit_drt_with, kkt_violation, lambda_scale, solve_nnls_tikhonov, solve_ridge, FitMode, FitOptions};
use drtsoh_core::eis::{build_kernel_real, KernelMatrix};
use drtsoh_core::eval::{build_samples, cell_infos, default_experiments, run_set, SplitCategory, DEFAULT_INPUT_LAMBDA};
use drtsoh_core::features::find_peaks_default;
use drtsoh_core::linalg::Matrix;
use drtsoh_core::soh::{
    rmse, rmspe, selu, train, ModelConfig, PlateauScheduler, SequenceSample, SohModel, TrainConfig,
};
use drtsoh_core::synthetic::{
    gen_capacity, gen_dataset, harshest_condition, three_peak_benchmark, AgingKind, DatasetConfig,
    NOMINAL_CAPACITY_AH,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den
}

fn round_trip() -> Outcome {
    let t0 = Instant::now();
    let mut rp_err = Vec::new();
    let mut center_err = Vec::new();
    for seed in 0..20 {
        let b = three_peak_benchmark(seed, 0.003).unwrap();
        let sol = fit_drt(&b.spectrum, &b.truth.tau_grid, None).unwrap();
        rp_err.push((sol.rp_ohm - b.truth.rp_ohm).abs() / b.truth.rp_ohm);
        let found: Vec<f64> = find_peaks_default(&sol).iter().map(|p| p.tau_at_max_s.log10()).collect();
        let worst = b
            .peaks
            .iter()
            .map(|p| {
                found
                    .iter()
                    .map(|f| (f - p.center_log10_tau).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        center_err.push(worst);
    }
    let secs = t0.elapsed().as_secs_f64();
    let (rp, c) = (median(rp_err), median(center_err));
    (
        rp <= 0.05 && c <= 0.5 && secs < 5.0,
        format!("median Rp error {:.3}% (<= 5%), median worst center offset {c:.3} dec (<= 0.5), {secs:.2} s (< 5 s)", 100.0 * rp),
    )
}

fn random_kernel(rng: &mut ChaCha8Rng, m: usize, n: usize) -> KernelMatrix {
    let data = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
    KernelMatrix::new(Matrix::from_row_major(m, n, data).unwrap(), false).unwrap()
}

fn closed_form_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_ridge = 0.0f64;
    let mut worst_nnls = 0.0f64;
    let mut nonneg = 0;
    for _ in 0..50 {
        let m = rng.random_range(2..=40);
        let n = rng.random_range(2..=40);
        let a = random_kernel(&mut rng, m, n);
        let g_true: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let z: Vec<f64> = a.matrix.matvec(&g_true).iter().map(|v| v + rng.random_range(-1e-3..1e-3)).collect();
        let lambda = 10f64.powf(rng.random_range(-3.0..0.0));

        let am = nalgebra::DMatrix::from_row_slice(m, n, a.matrix.as_slice());
        let lhs = am.transpose() * &am + nalgebra::DMatrix::identity(n, n) * lambda;
        let rhs = am.transpose() * nalgebra::DVector::from_column_slice(&z);
        let dense = lhs.lu().solve(&rhs).expect("regularized system is nonsingular");
        let ridge = solve_ridge(&a, &z, lambda).unwrap();
        worst_ridge = worst_ridge.max(rel_l2(&ridge, dense.as_slice()));

        if ridge.iter().all(|v| *v >= 0.0) {
            nonneg += 1;
            let (g, _) = solve_nnls_tikhonov(&a, &z, lambda).unwrap();
            worst_nnls = worst_nnls.max(rel_l2(&g, &ridge));
        }
    }
    (
        worst_ridge <= 1e-10 && worst_nnls <= 1e-8 && nonneg > 0,
        format!("ridge vs dense LU {worst_ridge:.1e} (<= 1e-10); NNLS vs ridge {worst_nnls:.1e} (<= 1e-8) on {nonneg}/50 nonnegative instances"),
    )
}

fn kkt_certificate(cells: &[drtsoh_core::synthetic::CellRecord], tg: &drtsoh_core::eis::TimeConstantGrid) -> Outcome {
    use rayon::prelude::*;
    let spectra: Vec<_> = cells.iter().flat_map(|c| c.spectra.iter()).collect();
    let worst = spectra
        .par_iter()
        .map(|rec| {
            let sol = fit_drt(&rec.spectrum, tg, None).unwrap();
            let a = build_kernel_real(rec.spectrum.freq_grid(), &tg.with_unit_weights(), true);
            let mut x = vec![sol.r0_ohm];
            x.extend_from_slice(&sol.g_ohm);
            kkt_violation(&a, rec.spectrum.z_real_ohm(), sol.lambda.unwrap(), &x).unwrap()
        })
        .reduce(|| 0.0, f64::max);
    (
        worst <= 1e-8,
        format!("worst scaled KKT violation {worst:.1e} over {} corpus solves (<= 1e-8)", spectra.len()),
    )
}

fn lcurve_sanity() -> Outcome {
    let b = three_peak_benchmark(0, 0.003).unwrap();
    let tg = &b.truth.tau_grid;
    let opts = FitOptions::default();
    let fit = fit_drt_with(&b.spectrum, tg, &opts).unwrap();
    let pts = fit.lcurve.unwrap();
    let unit = lambda_scale(&b.spectrum, tg, FitMode::Real).unwrap();
    let err = |lambda: f64| {
        let sol = fit_drt(&b.spectrum, tg, Some(lambda)).unwrap();
        rel_l2(&sol.g_ohm, &b.truth.g_ohm)
    };
    let best = opts
        .lambda_multipliers
        .iter()
        .map(|m| err(m * unit))
        .fold(f64::INFINITY, f64::min);
    let chosen = err(fit.solution.lambda.unwrap());
    let monotone = pts.windows(2).all(|w| {
        w[1].residual_norm >= w[0].residual_norm - 1e-10 && w[1].solution_norm <= w[0].solution_norm + 1e-10
    });
    (
        chosen <= 1.5 * best && monotone,
        format!("selected-λ g error {chosen:.4} vs best on grid {best:.4} (ratio {:.2} <= 1.5); norms monotone: {monotone}", chosen / best),
    )
}

fn gradients_and_selu() -> Outcome {
    let cfg = ModelConfig::tiny();
    let mut model = SohModel::init(cfg.clone(), 11).unwrap();
    model.params_mut().iter_mut().for_each(|p| *p *= 2.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<Vec<f64>> = (0..5).map(|_| (0..cfg.input_dim).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
    let y = [0.95, 0.9, 0.87, 0.8, 0.72];
    let loss = |m: &SohModel| {
        let o = m.predict(&x).unwrap();
        o.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
    };
    let (out, cache) = model.forward(&x).unwrap();
    let grad = model.backward(&cache, &out, &y).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..model.param_count() {
        let mut p = model.clone();
        p.params_mut()[i] += h;
        let mut q = model.clone();
        q.params_mut()[i] -= h;
        let fd = (loss(&p) - loss(&q)) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-8));
    }
    let selu_err = [
        (0.0, 0.0),
        (1.0, 1.0507009873554805),
        (-1.0, 1.0507009873554805 * 1.6732632423543772 * ((-1.0f64).exp() - 1.0)),
    ]
    .iter()
    .map(|(x, want)| (selu(*x) - want).abs())
    .fold(0.0, f64::max);
    (
        worst < 1e-5 && selu_err <= 1e-12,
        format!(
            "worst finite-difference rel error {worst:.1e} over {} tiny-config params (< 1e-5); SELU max error {selu_err:.1e} (<= 1e-12)",
            model.param_count()
        ),
    )
}

fn metrics() -> Outcome {
    let (y, yh) = ([1.0, 1.0], [1.1, 0.9]);
    let (e, p) = (rmse(&y, &yh).unwrap(), rmspe(&y, &yh).unwrap());
    // Independent evaluation of the displayed formulas.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let y: Vec<f64> = (0..7).map(|_| rng.random_range(0.5..1.1)).collect();
        let yh: Vec<f64> = (0..7).map(|_| rng.random_range(0.5..1.1)).collect();
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for i in 0..7 {
            s1 += (y[i] - yh[i]) * (y[i] - yh[i]);
            s2 += ((y[i] - yh[i]) / y[i]) * ((y[i] - yh[i]) / y[i]);
        }
        let r = (s1 / 7.0).sqrt();
        let q = (s2 / 7.0).sqrt() * 100.0;
        worst = worst.max((rmse(&y, &yh).unwrap() - r).abs() / r);
        worst = worst.max((rmspe(&y, &yh).unwrap() - q).abs() / q);
    }
    let hand = (e - 0.1).abs() <= 1e-15 && (p - 10.0).abs() <= 1e-13;
    (
        hand && worst <= 1e-14,
        format!("rmse {e} (0.1), rmspe {p}% (10%); formula check max rel diff {worst:.1e}"),
    )
}

fn table_two(samples: &[SequenceSample], cells: &[drtsoh_core::synthetic::CellRecord]) -> Outcome {
    let t0 = Instant::now();
    let infos = cell_infos(cells);
    let mc = ModelConfig::default();
    let tc = TrainConfig::default();
    let mut per_cat: Vec<(SplitCategory, Vec<f64>)> = Vec::new();
    let mut losses = Vec::new();
    for spec in default_experiments(0) {
        let out = run_set(samples, &infos, &spec, &mc, &tc, &[0, 1, 2]).unwrap();
        let lstm = out.lstm_median().rmspe_pct;
        let lin = out.linreg.rmspe_pct;
        println!("    set {:>2} {:<17} lstm {lstm:>7.3}%  linreg {lin:>9.3}%", spec.set, out.split.category.as_str());
        if lstm >= lin {
            losses.push(spec.set);
        }
        match per_cat.iter_mut().find(|(c, _)| *c == out.split.category) {
            Some((_, v)) => v.push(lstm),
            None => per_cat.push((out.split.category, vec![lstm])),
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let mut ok = losses.is_empty() && secs < 15.0 * 60.0;
    let mut parts = Vec::new();
    for (cat, v) in &per_cat {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let limit = if *cat == SplitCategory::TemperatureBased { 4.0 } else { 3.0 };
        ok &= mean <= limit;
        parts.push(format!("{} {mean:.2}% (<= {limit}%)", cat.as_str()));
    }
    (
        ok,
        format!(
            "{}; linreg beaten on {}/10 sets{}; {:.0} s (< 900 s)",
            parts.join(", "),
            10 - losses.len(),
            if losses.is_empty() { String::new() } else { format!(" (not on {losses:?})") },
            secs
        ),
    )
}

fn scheduler() -> Outcome {
    let mut s = PlateauScheduler::new(1e-3, 0.5, 3, 1e-6).unwrap();
    let losses = [1.0, 0.9, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.8, 0.79, 0.79, 0.79, 0.79, 0.79];
    let mut lrs = vec![s.lr()];
    for l in losses {
        lrs.push(s.step(l));
    }
    let ratios_ok = lrs.windows(2).all(|w| w[1] == w[0] || w[1] == 0.5 * w[0]);
    let halvings = lrs.windows(2).filter(|w| w[1] < w[0]).count();

    // The same contract inside a real training run; the large threshold
    // guarantees a plateau after the first epoch.
    let mk = |id: &str, k: f64| {
        let x = (0..5).map(|t| vec![k, t as f64, 0.1]).collect();
        SequenceSample::new(id, x, vec![0.9 - 0.01 * k; 5]).unwrap()
    };
    let tr: Vec<_> = (0..4).map(|i| mk(&format!("T{i}"), i as f64)).collect();
    let tc = TrainConfig { max_epochs: 20, plateau_patience: 2, plateau_min_delta: 0.5, batch_size: 2, ..TrainConfig::default() };
    let res = train(&tr, &[mk("V", 1.5)], &ModelConfig::tiny(), &tc).unwrap();
    let hist: Vec<f64> = res.history.iter().map(|e| e.lr).collect();
    let run_ok = hist.windows(2).all(|w| w[1] == w[0] || w[1] == 0.5 * w[0]);
    let run_halvings = hist.windows(2).filter(|w| w[1] < w[0]).count();
    (
        ratios_ok && halvings >= 1 && run_ok && run_halvings >= 1,
        format!("scripted plateau: {halvings} halvings; training run: {run_halvings} halvings; every change exactly x0.5: {}", ratios_ok && run_ok),
    )
}

fn dataset_invariants(cells: &[drtsoh_core::synthetic::CellRecord]) -> Outcome {
    let monotone = cells.iter().all(|c| c.capacities_ah.windows(2).all(|w| w[1] <= w[0]));
    let harsh: Vec<f64> = (0..100).map(|s| gen_capacity(&harshest_condition(), 90, s) / NOMINAL_CAPACITY_AH).collect();
    let (hmin, hmax) = (harsh.iter().cloned().fold(f64::INFINITY, f64::min), harsh.iter().cloned().fold(0.0, f64::max));
    let s22 = cells.iter().find(|c| c.condition == harshest_condition()).map(|c| *c.soh().last().unwrap()).unwrap();
    let cal_min = cells
        .iter()
        .filter(|c| c.condition.aging_kind == AgingKind::Calendar)
        .flat_map(|c| c.capacities_ah.iter().cloned())
        .fold(f64::INFINITY, f64::min);
    (
        monotone && (0.60..=0.70).contains(&hmin) && (0.60..=0.70).contains(&hmax) && (0.60..=0.70).contains(&s22) && cal_min >= 5.2,
        format!("capacities nonincreasing: {monotone}; harshest day-90 SOH in [{hmin:.3}, {hmax:.3}] over 100 seeds, dataset {s22:.3} (in [0.60, 0.70]); calendar min {cal_min:.3} Ah (>= 5.2)"),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_drtsoh");
    let run = |args: &[&str]| {
        let o = Command::new(bin).args(args).output().unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    };
    let p = |name: &str| dir.path().join(name).display().to_string();
    let mut same = Vec::new();
    for tag in ["a", "b"] {
        run(&["synth", "--out", &p(&format!("data_{tag}")), "--seed", "9"]);
    }
    same.push(("synth", snapshot(&dir.path().join("data_a")) == snapshot(&dir.path().join("data_b"))));
    let data = p("data_a");
    for tag in ["a", "b"] {
        run(&["drt", &data, "--soc", "50", "--out", &p(&format!("drt_{tag}"))]);
    }
    same.push(("drt", snapshot(&dir.path().join("drt_a")) == snapshot(&dir.path().join("drt_b"))));
    for tag in ["a", "b"] {
        run(&["train", "--data", &data, "--out", &p(&format!("train_{tag}")), "--seed", "4", "--epochs", "15", "--lambda", "1e-3"]);
    }
    same.push(("train", snapshot(&dir.path().join("train_a")) == snapshot(&dir.path().join("train_b"))));
    let ck = p("train_a/checkpoint.json");
    for tag in ["a", "b"] {
        run(&["eval", "--data", &data, "--checkpoint", &ck, "--out", &p(&format!("eval_{tag}"))]);
    }
    same.push(("eval", snapshot(&dir.path().join("eval_a")) == snapshot(&dir.path().join("eval_b"))));
    (
        same.iter().all(|(_, s)| *s),
        same.iter().map(|(n, s)| format!("{n} {}", if *s { "identical" } else { "DIFFERS" })).collect::<Vec<_>>().join(", "),
    )
}

fn main() {
    let t0 = Instant::now();
    let cfg = DatasetConfig::default();
    let cells = gen_dataset(&cfg, 0).unwrap();
    let tg = cfg.tau_grid().unwrap();
    let report = |n: usize, name: &str, (ok, detail): Outcome, failed: &mut Vec<usize>| {
        println!("criterion {n:>2} {}: {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(n);
        }
    };
    let mut failed = Vec::new();
    report(1, "forward/inverse round trip", round_trip(), &mut failed);
    report(2, "closed-form oracle", closed_form_oracle(), &mut failed);
    report(3, "KKT certificate", kkt_certificate(&cells, &tg), &mut failed);
    report(4, "L-curve sanity", lcurve_sanity(), &mut failed);
    report(5, "gradient checks", gradients_and_selu(), &mut failed);
    report(6, "metrics", metrics(), &mut failed);
    let samples = build_samples(&cells, &tg, Some(DEFAULT_INPUT_LAMBDA)).unwrap();
    report(7, "ten-set SOH comparison", table_two(&samples, &cells), &mut failed);
    report(8, "scheduler contract", scheduler(), &mut failed);
    report(9, "dataset invariants", dataset_invariants(&cells), &mut failed);
    report(10, "determinism", determinism(), &mut failed);
    println!("acceptance: {}/10 passed in {:.0} s", 10 - failed.len(), t0.elapsed().as_secs_f64());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
