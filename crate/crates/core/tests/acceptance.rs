//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. The desk-scale benchmark and the ablations are run once and
//! shared by the criteria that read them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use survbench::harness::{
    emit_report, ingest_csv, nested_cv, run_ablation, run_benchmark, write_dataset_csv, AblationPlan, AblationTable,
    BenchDataset, BenchmarkReport, CsvSchema, Method, ModelSpec, NestedCvPlan, ParamValue, ReportFormat,
};
use survbench::linear::{
    cox_partial_loglik, coxnet_lambda_max, fit_cox, fit_coxnet, CoxFitOptions, CoxNetOptions, ElasticNetConfig,
};
use survbench::metrics::{
    antolini_c, brier_score_at, cumulative_dynamic_auc_at, harrell_c, rescale_brier, DEFAULT_QUANTILES,
};
use survbench::rng::stream;
use survbench::synthetic::{generate, GeneratorKind, GeneratorSpec};
use survbench::{RiskVector, SurvivalDataset, SurvivalPredictionMatrix, TimeGrid};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracles.

fn comparable(times: &[f64], events: &[bool], i: usize, j: usize) -> bool {
    events[i] && (times[i] < times[j] || (times[i] == times[j] && !events[j]))
}

fn brute_harrell(risk: &[f64], times: &[f64], events: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..times.len() {
        for j in 0..times.len() {
            if i != j && comparable(times, events, i, j) {
                den += 1.0;
                if risk[i] > risk[j] {
                    num += 1.0;
                } else if risk[i] == risk[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

fn brute_antolini(pred: &SurvivalPredictionMatrix, times: &[f64], events: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..times.len() {
        for j in 0..times.len() {
            if i != j && comparable(times, events, i, j) {
                den += 1.0;
                let (si, sj) = (pred.eval(i, times[i]), pred.eval(j, times[i]));
                if si < sj {
                    num += 1.0;
                } else if si == sj {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Product-limit censoring survival just before `s`.
fn censoring_left(times: &[f64], events: &[bool], s: f64) -> f64 {
    let mut distinct: Vec<f64> = times.iter().zip(events).filter(|(t, e)| !**e && **t < s).map(|(t, _)| *t).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    distinct
        .iter()
        .map(|&u| {
            let at_risk = times.iter().filter(|&&t| t >= u).count() as f64;
            let cens = times.iter().zip(events).filter(|(t, e)| !**e && **t == u).count() as f64;
            1.0 - cens / at_risk
        })
        .product()
}

fn brute_auc(pred: &SurvivalPredictionMatrix, times: &[f64], events: &[bool], t: f64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..times.len() {
        if !(events[i] && times[i] <= t) {
            continue;
        }
        let g = censoring_left(times, events, times[i]);
        if g <= 0.0 {
            continue;
        }
        for j in 0..times.len() {
            if times[j] > t {
                let (ri, rj) = (1.0 - pred.eval(i, t), 1.0 - pred.eval(j, t));
                den += 1.0 / g;
                if ri > rj {
                    num += 1.0 / g;
                } else if ri == rj {
                    num += 0.5 / g;
                }
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

fn random_case(seed: u64, n: usize) -> (SurvivalDataset, SurvivalPredictionMatrix, RiskVector) {
    let mut rng = stream(seed, &[0xacc]);
    let cens_rate: f64 = rng.gen_range(0.0..0.7);
    // Coarse times force tied event and censoring times.
    let times: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(1..=20u32)) * 0.5).collect();
    let events: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() >= cens_rate).collect();
    let grid = TimeGrid::new((1..=12).map(|k| f64::from(k) * 0.8).collect()).unwrap();
    let mut surv = Array2::zeros((n, grid.len()));
    for mut row in surv.rows_mut() {
        let mut v: Vec<f64> = (0..grid.len()).map(|_| (rng.gen_range(0..8u32) as f64) / 8.0).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        row.assign(&ndarray::Array1::from(v));
    }
    let risks: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..10u32))).collect();
    let d = SurvivalDataset::new(Array2::zeros((n, 1)), times, events).unwrap();
    (d, SurvivalPredictionMatrix::new(grid, surv).unwrap(), RiskVector::new(risks).unwrap())
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for seed in 0..200 {
        let (d, pred, risks) = random_case(seed, 50);
        if d.n_events() == 0 {
            continue;
        }
        let (t, e) = (d.times(), d.events());
        let h = harrell_c(&risks, &d).map_err(|e| e.to_string())?;
        worst = worst.max((h - brute_harrell(risks.as_slice(), t, e)).abs());
        let a = antolini_c(&pred, &d).map_err(|e| e.to_string())?;
        worst = worst.max((a - brute_antolini(&pred, t, e)).abs());
        for at in [2.0, 5.0, 7.5] {
            match (cumulative_dynamic_auc_at(&pred, &d, at), brute_auc(&pred, t, e, at)) {
                (Ok(x), Some(y)) => worst = worst.max((x - y).abs()),
                (Err(_), None) => {}
                (x, y) => return Err(format!("seed {seed} t {at}: library {x:?} vs oracle {y:?}")),
            }
        }
        checked += 1;
    }
    check(checked == 200 && worst <= 1e-12, format!("{checked} datasets, max abs diff {worst:.2e}"))
}

// ---------------------------------------------------------------------------

fn criterion_2(report: &BenchmarkReport, ablations: &[&AblationTable]) -> Outcome {
    let mut n = 0;
    let mut bad = Vec::new();
    let is_ph = |m: Method| matches!(m, Method::CoxPh | Method::CoxNet | Method::GbCox);
    let mut visit = |label: String, m: &survbench::metrics::MetricReport| {
        n += 1;
        if m.harrell_per_quartile.iter().any(|q| *q != Some(m.antolini)) {
            bad.push(format!("{label}: antolini {} vs {:?}", m.antolini, m.harrell_per_quartile));
        }
    };
    for r in report.rows.iter().filter(|r| is_ph(r.method)) {
        if let Some(m) = &r.metrics {
            visit(format!("{}/{}/fold{}", r.dataset, r.method, r.fold), m);
        }
    }
    for t in ablations {
        for r in t.rows.iter().filter(|r| is_ph(r.method)) {
            if let Some(m) = &r.metrics {
                visit(format!("ablation/{}/{}", r.method, r.size), m);
            }
        }
    }
    check(bad.is_empty() && n > 0, if bad.is_empty() { format!("{n} proportional predictions, all equal") } else { bad.join("; ") })
}

fn criterion_3(nonph: &AblationTable) -> Outcome {
    let m = nonph.get(Method::Rsf, 2400).ok_or("rsf ablation cell failed")?;
    let gap = m.antolini - m.harrell_quartile_avg;
    check(gap >= 0.05, format!("antolini {:.4} - quartile harrell {:.4} = {gap:.4} (need >= 0.05)", m.antolini, m.harrell_quartile_avg))
}

fn mean_of(report: &BenchmarkReport, ds: &str, m: Method) -> Result<f64, String> {
    report.mean(ds, m, "antolini").ok_or_else(|| format!("{ds}/{m} has no antolini mean"))
}

fn criterion_4(report: &BenchmarkReport) -> Outcome {
    let c = mean_of(report, "nonph", Method::CoxPh)?;
    check((0.60..=0.72).contains(&c), format!("coxph mean antolini on nonph {c:.4} (need [0.60, 0.72])"))
}

fn criterion_5(report: &BenchmarkReport, linph: &AblationTable) -> Outcome {
    let cox = mean_of(report, "linph", Method::CoxPh)?;
    let rsf = mean_of(report, "linph", Method::Rsf)?;
    let gb = mean_of(report, "linph", Method::GbCox)?;
    let small = linph.get(Method::CoxPh, 300).ok_or("coxph ablation at 300 failed")?.antolini;
    let large = linph.get(Method::CoxPh, 2400).ok_or("coxph ablation at 2400 failed")?.antolini;
    check(
        cox >= rsf - 0.01 && cox >= gb - 0.01 && (small - large).abs() <= 0.02,
        format!("coxph {cox:.4}, rsf {rsf:.4}, gbcox {gb:.4}; coxph at 300 {small:.4} vs 2400 {large:.4}"),
    )
}

fn criterion_6(report: &BenchmarkReport, nonlin: &AblationTable) -> Outcome {
    let cox = mean_of(report, "nonlinph", Method::CoxPh)?;
    let gb = mean_of(report, "nonlinph", Method::GbCox)?;
    let cox_1200 = nonlin.get(Method::CoxPh, 1200).ok_or("coxph ablation at 1200 failed")?.antolini;
    let gb_1200 = nonlin.get(Method::GbCox, 1200).ok_or("gbcox ablation at 1200 failed")?.antolini;
    check(
        gb - cox >= 0.05 && gb_1200 - cox_1200 >= 0.03,
        format!("n=2400 gbcox {gb:.4} - coxph {cox:.4} = {:.4}; n=1200 {gb_1200:.4} - {cox_1200:.4} = {:.4}", gb - cox, gb_1200 - cox_1200),
    )
}

// ---------------------------------------------------------------------------

fn normal_matrix(seed: u64, n: usize, p: usize) -> Array2<f64> {
    let mut rng = stream(seed, &[0x7]);
    Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng))
}

fn criterion_7() -> Outcome {
    let mut worst_rel: f64 = 0.0;
    for seed in 0..50 {
        let mut rng = stream(seed, &[0x77]);
        let x = normal_matrix(seed, 40, 3);
        let times: Vec<f64> = (0..40).map(|_| rng.gen_range(0.1..5.0)).collect();
        let events: Vec<bool> = (0..40).map(|_| rng.gen::<f64>() < 0.7).collect();
        let d = SurvivalDataset::new(x, times, events).map_err(|e| e.to_string())?;
        let beta: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, g) = cox_partial_loglik(&d, &beta).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let (mut diff, mut norm) = (0.0f64, 0.0f64);
        for j in 0..3 {
            let (mut up, mut dn) = (beta.clone(), beta.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (cox_partial_loglik(&d, &up).unwrap().0 - cox_partial_loglik(&d, &dn).unwrap().0) / (2.0 * h);
            diff += (fd - g[j]).powi(2);
            norm += g[j].powi(2);
        }
        worst_rel = worst_rel.max(diff.sqrt() / norm.sqrt().max(1e-12));
    }

    let n = 2000;
    let truth = [1.0, -1.0, 0.5];
    let x = normal_matrix(99, n, 3);
    let mut rng = stream(99, &[0x78]);
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        let eta: f64 = (0..3).map(|j| x[[i, j]] * truth[j]).sum();
        let t = -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln() / eta.exp();
        let c = rng.gen_range(0.0..4.0);
        times.push(if t <= c { t } else { c });
        events.push(t <= c);
    }
    let sim = SurvivalDataset::new(x, times, events).map_err(|e| e.to_string())?;
    let cox = fit_cox(&sim, &CoxFitOptions::default()).map_err(|e| e.to_string())?;
    let recover = cox.beta.iter().zip(truth).map(|(b, t)| (b - t).abs()).fold(0.0, f64::max);

    let opts = CoxNetOptions::default();
    let ridge = fit_coxnet(&sim, &ElasticNetConfig::new(1e-9, 0.0).unwrap(), &opts).map_err(|e| e.to_string())?;
    let ridge_gap = ridge.beta.iter().zip(&cox.beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut zero_ok = true;
    for l1 in [0.1, 0.5, 1.0] {
        let lmax = coxnet_lambda_max(&sim, l1).map_err(|e| e.to_string())?;
        for scale in [1.0, 2.0] {
            let m = fit_coxnet(&sim, &ElasticNetConfig::new(lmax * scale, l1).unwrap(), &opts).map_err(|e| e.to_string())?;
            zero_ok &= m.beta.iter().all(|&b| b == 0.0);
        }
    }
    check(
        worst_rel < 1e-5 && recover <= 0.1 && ridge_gap <= 1e-3 && zero_ok,
        format!(
            "gradient rel err {worst_rel:.2e}; recovery max err {recover:.3}; coxnet vs cox {ridge_gap:.2e}; zero at lambda_max {zero_ok}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut exact = true;
    for seed in 0..50 {
        let mut rng = stream(seed, &[0x8]);
        let n = 60;
        let times: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..10.0)).collect();
        let grid = TimeGrid::new((1..=10).map(f64::from).collect()).unwrap();
        let mut surv = Array2::zeros((n, 10));
        for mut row in surv.rows_mut() {
            let mut v: Vec<f64> = (0..10).map(|_| rng.gen::<f64>()).collect();
            v.sort_by(|a, b| b.total_cmp(a));
            row.assign(&ndarray::Array1::from(v));
        }
        let d = SurvivalDataset::new(Array2::zeros((n, 1)), times, vec![true; n]).unwrap();
        let pred = SurvivalPredictionMatrix::new(grid, surv).unwrap();
        for t in [1.5, 4.0, 8.25] {
            let plain = (0..n)
                .map(|i| {
                    let y = f64::from(u8::from(d.times()[i] > t));
                    let s = pred.eval(i, t);
                    (y - s) * (y - s)
                })
                .sum::<f64>()
                / n as f64;
            exact &= brier_score_at(&pred, &d, t).unwrap() == plain;
        }
    }
    let d = generate(&GeneratorSpec::new(GeneratorKind::NonPh, 200, 8, 0.3)).unwrap().0;
    let grid = TimeGrid::from_event_quantiles(&d, 20).unwrap();
    let m = grid.len();
    let half = SurvivalPredictionMatrix::new(grid, Array2::from_elem((200, m), 0.5)).unwrap();
    let no_cens = SurvivalDataset::new(d.features().to_owned(), d.times().to_vec(), vec![true; 200]).unwrap();
    let quarter = brier_score_at(&half, &no_cens, d.times()[0]).unwrap();
    let rescaled = [0.0, 0.125, 0.25, 0.5].iter().all(|&b| rescale_brier(b) == 1.0 - 2.0 * b);
    check(
        exact && quarter == 0.25 && rescaled,
        format!("uncensored == quadratic score {exact}; constant 0.5 -> {quarter}; 1-2BS exact {rescaled}"),
    )
}

fn criterion_9() -> Outcome {
    let d = generate(&GeneratorSpec::new(GeneratorKind::LinPh, 600, 9, 0.3)).unwrap().0;
    let mut spec = ModelSpec::default_for(Method::CoxPh);
    spec.grid.insert("ridge_eps".into(), vec![ParamValue::Num(1e-6), ParamValue::Num(1e-3)]);
    let plan = NestedCvPlan::default();
    let out = nested_cv(&BenchDataset::numeric("linph", d), &spec, &plan, &DEFAULT_QUANTILES).map_err(|e| e.to_string())?;
    check(out.fits == 3 * (10 * 2 + 1), format!("{} fits for a 2-point grid (expected {})", out.fits, 3 * 21))
}

fn criterion_10(report: &BenchmarkReport) -> Outcome {
    let c = report.correlations;
    let (b, a) = (c.antolini_vs_brier_rescaled.ok_or("no brier correlation")?, c.antolini_vs_auroc.ok_or("no auroc correlation")?);
    check(b >= 0.6 && a >= 0.9, format!("{} cells: corr(antolini, rescaled brier) {b:.3}, corr(antolini, auroc) {a:.3}", c.n_cells))
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| !e.file_name().to_string_lossy().starts_with("timings"))
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect()
}

fn criterion_11() -> Outcome {
    let d = generate(&GeneratorSpec::new(GeneratorKind::NonLinPh, 300, 11, 0.3)).unwrap().0;
    let datasets = [BenchDataset::numeric("nonlinph", d)];
    let mut rsf = ModelSpec::default_for(Method::Rsf);
    rsf.grid.insert("n_trees".into(), vec![ParamValue::Num(20.0)]);
    let specs = [ModelSpec::default_for(Method::CoxPh), rsf];
    let plan = NestedCvPlan { seed: 5, ..NestedCvPlan::default() };
    let mut emitted = Vec::new();
    for _ in 0..2 {
        let report = run_benchmark(&datasets, &specs, &plan, &DEFAULT_QUANTILES).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        emit_report(&report, ReportFormat::Csv, dir.path()).map_err(|e| e.to_string())?;
        emit_report(&report, ReportFormat::Json, dir.path()).map_err(|e| e.to_string())?;
        emitted.push(read_dir_bytes(dir.path()));
    }
    let identical = emitted[0] == emitted[1] && !emitted[0].is_empty();

    let mut round_trip = true;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (k, kind) in [GeneratorKind::LinPh, GeneratorKind::NonLinPh, GeneratorKind::NonPh].into_iter().enumerate() {
        let d = generate(&GeneratorSpec::new(kind, 500, 20 + k as u64, 0.3)).unwrap().0;
        let path = dir.path().join(format!("{kind:?}.csv"));
        write_dataset_csv(&path, &d).map_err(|e| e.to_string())?;
        round_trip &= ingest_csv(&path, &CsvSchema::default()).map_err(|e| e.to_string())?.data == d;
    }
    check(
        identical && round_trip,
        format!("{} report files byte-identical {identical}; csv round trip identical {round_trip}", emitted[0].len()),
    )
}

fn criterion_12(report: &BenchmarkReport, seconds: f64) -> Outcome {
    let failed = report.n_failed();
    check(
        failed == 0 && report.rows.len() == 3 * 4 * 3 && seconds < 45.0 * 60.0,
        format!("{} fold rows, {failed} failed, {} fits, {:.1} min", report.rows.len(), report.fits, seconds / 60.0),
    )
}

// ---------------------------------------------------------------------------

fn desk_benchmark() -> (BenchmarkReport, f64) {
    let datasets: Vec<BenchDataset> = [(GeneratorKind::LinPh, 1), (GeneratorKind::NonLinPh, 2), (GeneratorKind::NonPh, 3)]
        .into_iter()
        .map(|(kind, seed)| BenchDataset::numeric(kind.name(), generate(&GeneratorSpec::new(kind, 2400, seed, 0.3)).unwrap().0))
        .collect();
    let specs: Vec<ModelSpec> = Method::ALL.iter().map(|&m| ModelSpec::default_for(m)).collect();
    let t = Instant::now();
    let report = run_benchmark(&datasets, &specs, &NestedCvPlan::default(), &DEFAULT_QUANTILES).expect("benchmark inputs are valid");
    (report, t.elapsed().as_secs_f64())
}

fn ablation(kind: GeneratorKind, seed: u64, sizes: &[usize], methods: &[Method]) -> AblationTable {
    let mut plan = AblationPlan::new(GeneratorSpec::new(kind, 10_000, seed, 0.3), NestedCvPlan::default());
    plan.sizes = sizes.to_vec();
    let specs: Vec<ModelSpec> = methods.iter().map(|&m| ModelSpec::default_for(m)).collect();
    run_ablation(&plan, &specs, &DEFAULT_QUANTILES).expect("ablation inputs are valid")
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        eprintln!("[acceptance] criterion {id} done in {secs:.1}s");
        results.push((id, name, out, secs));
    };

    run(1, "metric oracle equivalence", &mut criterion_1);
    run(7, "cox numerics", &mut criterion_7);
    run(8, "brier properties", &mut criterion_8);
    run(9, "protocol arithmetic", &mut criterion_9);
    run(11, "determinism and round trips", &mut criterion_11);

    eprintln!("[acceptance] running desk-scale benchmark");
    let (report, bench_secs) = desk_benchmark();
    eprintln!("[acceptance] running ablations");
    let t = Instant::now();
    let nonph = ablation(GeneratorKind::NonPh, 103, &[2400], &[Method::Rsf]);
    let nonlin = ablation(GeneratorKind::NonLinPh, 102, &[1200], &[Method::CoxPh, Method::GbCox]);
    let linph = ablation(GeneratorKind::LinPh, 101, &[300, 2400], &[Method::CoxPh]);
    eprintln!("[acceptance] ablations done in {:.1}s", t.elapsed().as_secs_f64());

    run(2, "ph collapse", &mut || criterion_2(&report, &[&nonph, &nonlin, &linph]));
    run(3, "non-ph metric gap", &mut || criterion_3(&nonph));
    run(4, "cox on nonph", &mut || criterion_4(&report));
    run(5, "linph ordering", &mut || criterion_5(&report, &linph));
    run(6, "nonlinph ordering", &mut || criterion_6(&report, &nonlin));
    run(10, "score agreement", &mut || criterion_10(&report));
    run(12, "desk-scale benchmark", &mut || criterion_12(&report, bench_secs));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, out, secs) in &results {
        match out {
            Ok(detail) => println!("criterion {id:>2} [{name}]: PASS ({detail}) [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} [{name}]: FAIL ({detail}) [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
