//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the verdicts always print; exits nonzero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cointegra::johansen::DeterministicCase;
use cointegra::montecarlo::{adf_size_power, diagnostics_calibration, dual_forecast_gap, rank_recovery, RankScenario};
use cointegra::panel::{ingest_panel, summarize, Naics, PanelDataset, PanelSchema, StateCode, Variable};
use cointegra::parallel::Execution;
use cointegra::pipeline::{analyze_model, fmt_fixed3, run_pipeline, Defaults, ModelEntry, RunConfig, Stage};
use cointegra::vecm::{backtest, fit_vecm, forecast, ModelSpec};

/// Reference summary rows: state, naics, variable, n, mean, sd, min, max.
/// `*` marks the industry-wide price row.
const SUMMARY_ROWS: &str = "\
* 113 price 72 0.888 0.070 0.762 1.010
AL 113 employment 72 4770.722 528.868 4059 5852
AL 113 output 72 138.364 10.343 125.925 167.450
AL 113 wages 72 40045.820 3669.998 32128 48561
AL 113 num_firms 72 723.500 102.239 618 958
AR 113 employment 72 2634.806 486.663 2080 3490
AR 113 output 72 139.816 8.399 127.600 158.175
AR 113 wages 72 21729.430 2461.600 16572 27078
AR 113 num_firms 72 488.889 87.577 395 637
ME 113 employment 72 2435.694 402.883 1532 2945
ME 113 output 72 126.094 25.333 95.250 184.046
ME 113 wages 72 22862.690 4219.346 13490 28600
ME 113 num_firms 72 465.167 32.614 410 539
MS 113 employment 72 3509.125 525.034 2916 4367
MS 113 output 72 131.736 15.187 109.543 163.417
MS 113 wages 72 27146.690 2290.516 22072 31972
MS 113 num_firms 72 543.347 83.891 445 696
OR 113 employment 72 6520.056 914.163 5024 7931
OR 113 output 72 371.786 35.719 316.446 443.350
OR 113 wages 72 74452.690 9361.837 48541 95042
OR 113 num_firms 72 779.542 116.811 653 1009
* 321 price 60 0.844 0.080 0.700 1.042
AL 321 employment 60 16290.200 3211.876 12124 21922
AL 321 output 60 249.012 36.851 164.080 318.712
AL 321 wages 60 150755.500 28499.020 95805 208886
AL 321 num_firms 60 408.417 48.883 351 483
AR 321 employment 60 10505.350 1901.429 8607 14003
AR 321 output 60 179.579 25.049 131.518 221.631
AR 321 wages 60 93793.170 11820.660 72067 113987
AR 321 num_firms 60 348.233 33.143 300 403
ME 321 employment 60 4915.300 941.203 3902 6840
ME 321 output 60 78.765 9.636 58.651 102.044
ME 321 wages 60 45630.900 6859.528 31724 59522
ME 321 num_firms 60 217.167 31.553 181 283
MS 321 employment 60 10600.500 2199.874 8512 14465
MS 321 output 60 183.422 24.604 129.520 228.850
MS 321 wages 60 97188.620 14736.430 70435 127558
MS 321 num_firms 60 283.767 27.526 244 325
OR 321 employment 60 24457.850 4868.420 18917 32858
OR 321 output 60 427.237 50.814 302.302 504.151
OR 321 wages 60 261847.300 41054.910 190597 327597
OR 321 num_firms 60 462.117 44.934 407 533
WI 321 employment 60 19346.480 3852.204 15661 26103
WI 321 output 60 272.365 25.497 226.400 319.415
WI 321 wages 60 165318.400 27961.030 109319 216752
WI 321 num_firms 60 594.450 61.748 518 686
* 322 price 60 0.900 0.086 0.700 1.034
AL 322 employment 60 12719.620 1261.083 11025 14906
AL 322 output 60 709.239 90.370 570.600 890.713
AL 322 wages 60 229630.800 13505.820 204766 277691
AL 322 num_firms 60 98.917 7.552 88 116
AR 322 employment 60 10567.650 946.624 9311 12408
AR 322 output 60 456.539 51.549 375.600 561.713
AR 322 wages 60 151272.800 7235.220 136843 167105
AR 322 num_firms 60 79.533 6.342 69 92
ME 322 employment 60 7159.017 1752.367 4303 10141
ME 322 output 60 251.828 79.617 147.475 391.131
ME 322 wages 60 114647.900 18452.910 80014 145207
ME 322 num_firms 60 29.300 7.911 19 47
MS 322 employment 60 4392.867 723.909 3595 5840
MS 322 output 60 172.613 28.778 133.050 241.616
MS 322 wages 60 64160.980 7299.291 53038 82394
MS 322 num_firms 60 62.983 4.545 58 74
WI 322 employment 60 32667.700 3009.017 29441 38962
WI 322 output 60 1172.130 199.072 912.375 1553.405
WI 322 wages 60 481891.300 22935.080 427142 521102
WI 322 num_firms 60 268.467 19.314 244 302";

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/six_state")
}

fn fixture_config(out: &Path) -> RunConfig {
    let mut config = RunConfig::load(&fixture_dir().join("config.json")).expect("fixture config loads");
    config.out_dir = out.to_path_buf();
    config
}

fn fixture_panels() -> Vec<PanelDataset> {
    let config = fixture_config(Path::new("unused"));
    config
        .models
        .iter()
        .map(|m| {
            ingest_panel(&config.panel_path(&m.state, m.naics), m.state.clone(), m.naics, &PanelSchema::default())
                .expect("fixture panel loads")
        })
        .collect()
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn summary_reproduction() -> Verdict {
    let t0 = Instant::now();
    let panels = fixture_panels();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for line in SUMMARY_ROWS.lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let naics: Naics = f[1].parse().unwrap();
        let variable: Variable = f[2].parse().unwrap();
        let targets: Vec<&PanelDataset> = if f[0] == "*" {
            panels.iter().filter(|p| p.naics == naics).collect()
        } else {
            let state: StateCode = f[0].parse().unwrap();
            panels.iter().filter(|p| p.naics == naics && p.state == state).collect()
        };
        if targets.is_empty() {
            mismatches.push(format!("{line}: no panel"));
        }
        for p in targets {
            let s = summarize(p).into_iter().find(|s| s.variable == variable).unwrap();
            let got = [fmt_fixed3(s.mean), fmt_fixed3(s.sd), fmt_fixed3(s.min), fmt_fixed3(s.max)];
            let want: Vec<String> = f[4..8].iter().map(|v| fmt_fixed3(v.parse().unwrap())).collect();
            if s.n.to_string() != f[3] || got.as_slice() != want.as_slice() {
                mismatches.push(format!("{} {} {}: got {:?}", p.state, p.naics, variable, got));
            }
            checked += 1;
        }
    }
    let elapsed = t0.elapsed();
    verdict(
        mismatches.is_empty() && within(elapsed, 1.0),
        format!("{checked} series rows matched to 3 decimals, {} mismatches {:?}, {:.3}s", mismatches.len(), mismatches, elapsed.as_secs_f64()),
    )
}

fn normality_additivity() -> Verdict {
    // Reference five-equation row: per-equation JB sums to the joint value.
    let reference = [3.987, 16.960, 2.579, 0.141, 13.726];
    let joint: f64 = reference.iter().sum();
    let mut ok = (joint * 100.0).round() / 100.0 == 37.39;

    let defaults = Defaults { holdout_start: None, ..fixture_config(Path::new("unused")).defaults };
    let mut worst: f64 = 0.0;
    let mut models = 0;
    for panel in fixture_panels() {
        let entry = ModelEntry { state: panel.state.clone(), naics: panel.naics, k: None, r: None, case: None };
        let rep = analyze_model(panel, &entry, &defaults, Stage::Diagnose).expect("fixture model fits");
        let n = rep.normality.expect("normality report");
        let sums = [
            n.per_equation.iter().map(|e| e.jb.stat).sum::<f64>(),
            n.per_equation.iter().map(|e| e.skewness.stat).sum::<f64>(),
            n.per_equation.iter().map(|e| e.kurtosis.stat).sum::<f64>(),
        ];
        for (s, j) in sums.iter().zip([n.joint.jb.stat, n.joint.skewness.stat, n.joint.kurtosis.stat]) {
            worst = worst.max((s - j).abs());
        }
        for e in &n.per_equation {
            worst = worst.max((e.jb.stat - e.skewness.stat - e.kurtosis.stat).abs());
        }
        ok &= (n.joint.jb.dof, n.joint.skewness.dof, n.joint.kurtosis.dof) == (10, 5, 5);
        models += 1;
    }
    ok &= worst <= 1e-9 && models == 16;
    verdict(ok, format!("reference joint {joint:.3}; {models} fitted models, max additivity gap {worst:.2e}, df 10/5/5"))
}

fn dual_representation() -> Verdict {
    let t0 = Instant::now();
    let gap = dual_forecast_gap(100, 20, 31, Execution::Parallel);
    let elapsed = t0.elapsed();
    verdict(gap <= 1e-8 && within(elapsed, 10.0), format!("max relative gap {gap:.2e} over 100 models x 20 steps, {:.2}s", elapsed.as_secs_f64()))
}

fn rank_recovery_rates() -> Verdict {
    let t0 = Instant::now();
    let thresholds = [0.90, 0.85, 0.85];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (scenario, min)) in RankScenario::ALL.iter().zip(thresholds).enumerate() {
        let rate = rank_recovery(*scenario, 200, 500, 4000 + i as u64, Execution::Parallel);
        ok &= rate >= min;
        parts.push(format!("{scenario:?} {:.1}% (need {:.0}%)", rate * 100.0, min * 100.0));
    }
    let elapsed = t0.elapsed();
    verdict(ok && within(elapsed, 60.0), format!("{}, {:.2}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn adf_rates() -> Verdict {
    let t0 = Instant::now();
    let r = adf_size_power(500, 200, 5000, Execution::Parallel);
    let elapsed = t0.elapsed();
    verdict(
        r.random_walk_acceptance >= 0.90 && r.white_noise_rejection >= 0.95 && within(elapsed, 30.0),
        format!(
            "random walk non-rejection {:.1}%, white noise rejection {:.1}%, {:.2}s",
            r.random_walk_acceptance * 100.0,
            r.white_noise_rejection * 100.0,
            elapsed.as_secs_f64()
        ),
    )
}

fn diagnostics_rates() -> Verdict {
    let t0 = Instant::now();
    let r = diagnostics_calibration(500, 500, 5, 6000, Execution::Parallel);
    let elapsed = t0.elapsed();
    let band = 0.02..=0.09;
    verdict(
        band.contains(&r.lm_rejection) && band.contains(&r.jb_rejection) && within(elapsed, 60.0),
        format!("LM rejection {:.1}%, JB rejection {:.1}%, {:.2}s", r.lm_rejection * 100.0, r.jb_rejection * 100.0, elapsed.as_secs_f64()),
    )
}

fn pipeline_determinism() -> Verdict {
    let t0 = Instant::now();
    let a = tempfile::tempdir().expect("temp dir");
    let b = tempfile::tempdir().expect("temp dir");
    let ma = run_pipeline(&fixture_config(a.path())).expect("first run");
    let mb = run_pipeline(&fixture_config(b.path())).expect("second run");
    let elapsed = t0.elapsed();
    let mut identical = ma.outputs == mb.outputs && !ma.outputs.is_empty();
    for o in &ma.outputs {
        identical &= fs::read(a.path().join(&o.file)).ok() == fs::read(b.path().join(&o.file)).ok();
    }
    let statuses = |m: &cointegra::pipeline::RunManifest| {
        m.models.iter().map(|s| (s.state.clone(), s.naics, s.status.clone(), s.k, s.r)).collect::<Vec<_>>()
    };
    identical &= statuses(&ma) == statuses(&mb);
    let ok_models = ma.models.iter().filter(|m| m.status == "ok").count();
    let on_disk: Vec<String> = {
        let mut v: Vec<String> = fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n != "manifest.json")
            .collect();
        v.sort();
        v
    };
    let mut listed: Vec<String> = ma.outputs.iter().map(|o| o.file.clone()).collect();
    listed.sort();
    verdict(
        ma.models.len() == 16 && ok_models == 16 && identical && on_disk == listed && within(elapsed, 120.0),
        format!(
            "{} manifest entries ({ok_models} ok), {} output files byte-identical: {identical}, inventory matches disk: {}, {:.2}s",
            ma.models.len(),
            ma.outputs.len(),
            on_disk == listed,
            elapsed.as_secs_f64()
        ),
    )
}

fn backtest_directional() -> Verdict {
    let holdout = fixture_config(Path::new("unused")).defaults.holdout_start.expect("fixture holdout");
    let defaults = fixture_config(Path::new("unused")).defaults;
    let mut finite = 0;
    let mut total = 0;
    let mut flat = true;
    for panel in fixture_panels() {
        let entry = ModelEntry { state: panel.state.clone(), naics: panel.naics, k: None, r: None, case: None };
        let rep = analyze_model(panel.clone(), &entry, &defaults, Stage::Backtest).expect("fixture model runs");
        for a in &rep.backtest.expect("backtest report").accuracy {
            total += 1;
            finite += (a.rmse.is_finite() && a.mape.is_finite()) as usize;
        }

        let spec = ModelSpec { k: 1, rank: 0, case: DeterministicCase::None };
        let fit = fit_vecm(&panel, spec).expect("martingale fit");
        let levels = panel.levels();
        let last = levels.row_range(levels.rows() - 1, levels.rows());
        let path = forecast(&fit, &last, 20).expect("forecast");
        for h in 0..20 {
            for j in 0..5 {
                flat &= path.values[(h, j)] - last[(0, j)] == 0.0;
            }
        }
        let bt = backtest(&panel, spec, holdout).expect("martingale backtest");
        let anchor = panel.index_of(holdout).unwrap() - 1;
        for row in &bt.rows {
            flat &= row.forecast == panel.series(row.variable).values()[anchor];
        }
    }
    verdict(
        finite == total && total == 80 && flat,
        format!("{finite}/{total} finite RMSE/MAPE pairs; r = 0 forecasts exactly flat: {flat}"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("summary statistics reproduce the reference rows", summary_reproduction),
        ("normality joint statistics are per-equation sums", normality_additivity),
        ("VECM and level-VAR forecasts agree", dual_representation),
        ("Johansen rank recovery", rank_recovery_rates),
        ("ADF size and power", adf_rates),
        ("LM and JB calibration on white noise", diagnostics_rates),
        ("pipeline determinism and shape", pipeline_determinism),
        ("backtests finite, martingale forecasts flat", backtest_directional),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        failures += usize::from(!v.passed);
        println!("criterion {}: {} | {name} | {}", i + 1, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
