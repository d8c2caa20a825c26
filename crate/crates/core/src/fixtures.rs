//! Synthetic six-state dataset whose per-series N, mean, sample sd, min and
//! max equal reference summary rows. Each series is a seeded random-walk
//! shape mapped affinely onto the target moments, with the extremes pinned.

use std::fs;
use std::io;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::johansen::DeterministicCase;
use crate::panel::{write_panel, Naics, PanelDataset, QuarterDate, QuarterlySeries, StateCode, Variable};
use crate::parallel::replication_rng;
use crate::pipeline::{Defaults, ModelEntry, RunConfig};

pub const FIXTURE_SEED: u64 = 20_190_601;
const MAX_ATTEMPTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryTarget {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

const fn t(n: usize, mean: f64, sd: f64, min: f64, max: f64) -> SummaryTarget {
    SummaryTarget { n, mean, sd, min, max }
}

/// Employment, output, wages, number of firms.
type StateRow = (&'static str, [SummaryTarget; 4]);

const PRICE_113: SummaryTarget = t(72, 0.888, 0.070, 0.762, 1.010);
const PRICE_321: SummaryTarget = t(60, 0.844, 0.080, 0.700, 1.042);
const PRICE_322: SummaryTarget = t(60, 0.900, 0.086, 0.700, 1.034);

const ROWS_113: [StateRow; 5] = [
    ("AL", [t(72, 4770.722, 528.868, 4059.0, 5852.0), t(72, 138.364, 10.343, 125.925, 167.450), t(72, 40045.820, 3669.998, 32128.0, 48561.0), t(72, 723.500, 102.239, 618.0, 958.0)]),
    ("AR", [t(72, 2634.806, 486.663, 2080.0, 3490.0), t(72, 139.816, 8.399, 127.600, 158.175), t(72, 21729.430, 2461.600, 16572.0, 27078.0), t(72, 488.889, 87.577, 395.0, 637.0)]),
    ("ME", [t(72, 2435.694, 402.883, 1532.0, 2945.0), t(72, 126.094, 25.333, 95.250, 184.046), t(72, 22862.690, 4219.346, 13490.0, 28600.0), t(72, 465.167, 32.614, 410.0, 539.0)]),
    ("MS", [t(72, 3509.125, 525.034, 2916.0, 4367.0), t(72, 131.736, 15.187, 109.543, 163.417), t(72, 27146.690, 2290.516, 22072.0, 31972.0), t(72, 543.347, 83.891, 445.0, 696.0)]),
    ("OR", [t(72, 6520.056, 914.163, 5024.0, 7931.0), t(72, 371.786, 35.719, 316.446, 443.350), t(72, 74452.690, 9361.837, 48541.0, 95042.0), t(72, 779.542, 116.811, 653.0, 1009.0)]),
];

const ROWS_321: [StateRow; 6] = [
    ("AL", [t(60, 16290.200, 3211.876, 12124.0, 21922.0), t(60, 249.012, 36.851, 164.080, 318.712), t(60, 150755.500, 28499.020, 95805.0, 208886.0), t(60, 408.417, 48.883, 351.0, 483.0)]),
    ("AR", [t(60, 10505.350, 1901.429, 8607.0, 14003.0), t(60, 179.579, 25.049, 131.518, 221.631), t(60, 93793.170, 11820.660, 72067.0, 113987.0), t(60, 348.233, 33.143, 300.0, 403.0)]),
    ("ME", [t(60, 4915.300, 941.203, 3902.0, 6840.0), t(60, 78.765, 9.636, 58.651, 102.044), t(60, 45630.900, 6859.528, 31724.0, 59522.0), t(60, 217.167, 31.553, 181.0, 283.0)]),
    ("MS", [t(60, 10600.500, 2199.874, 8512.0, 14465.0), t(60, 183.422, 24.604, 129.520, 228.850), t(60, 97188.620, 14736.430, 70435.0, 127558.0), t(60, 283.767, 27.526, 244.0, 325.0)]),
    ("OR", [t(60, 24457.850, 4868.420, 18917.0, 32858.0), t(60, 427.237, 50.814, 302.302, 504.151), t(60, 261847.300, 41054.910, 190597.0, 327597.0), t(60, 462.117, 44.934, 407.0, 533.0)]),
    ("WI", [t(60, 19346.480, 3852.204, 15661.0, 26103.0), t(60, 272.365, 25.497, 226.400, 319.415), t(60, 165318.400, 27961.030, 109319.0, 216752.0), t(60, 594.450, 61.748, 518.0, 686.0)]),
];

const ROWS_322: [StateRow; 5] = [
    ("AL", [t(60, 12719.620, 1261.083, 11025.0, 14906.0), t(60, 709.239, 90.370, 570.600, 890.713), t(60, 229630.800, 13505.820, 204766.0, 277691.0), t(60, 98.917, 7.552, 88.0, 116.0)]),
    ("AR", [t(60, 10567.650, 946.624, 9311.0, 12408.0), t(60, 456.539, 51.549, 375.600, 561.713), t(60, 151272.800, 7235.220, 136843.0, 167105.0), t(60, 79.533, 6.342, 69.0, 92.0)]),
    ("ME", [t(60, 7159.017, 1752.367, 4303.0, 10141.0), t(60, 251.828, 79.617, 147.475, 391.131), t(60, 114647.900, 18452.910, 80014.0, 145207.0), t(60, 29.300, 7.911, 19.0, 47.0)]),
    ("MS", [t(60, 4392.867, 723.909, 3595.0, 5840.0), t(60, 172.613, 28.778, 133.050, 241.616), t(60, 64160.980, 7299.291, 53038.0, 82394.0), t(60, 62.983, 4.545, 58.0, 74.0)]),
    ("WI", [t(60, 32667.700, 3009.017, 29441.0, 38962.0), t(60, 1172.130, 199.072, 912.375, 1553.405), t(60, 481891.300, 22935.080, 427142.0, 521102.0), t(60, 268.467, 19.314, 244.0, 302.0)]),
];

/// One industry's sample window, shared price target and per-state rows.
pub struct IndustryTargets {
    pub naics: Naics,
    pub start: QuarterDate,
    pub price: SummaryTarget,
    rows: &'static [StateRow],
}

impl IndustryTargets {
    pub fn states(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.rows.iter().map(|r| r.0)
    }

    /// Target for `var` in `state`, if that state is modelled.
    pub fn target(&self, state: &str, var: Variable) -> Option<SummaryTarget> {
        if var == Variable::Price {
            return self.rows.iter().any(|r| r.0 == state).then_some(self.price);
        }
        let row = self.rows.iter().find(|r| r.0 == state)?;
        Some(match var {
            Variable::Employment => row.1[0],
            Variable::Output => row.1[1],
            Variable::Wages => row.1[2],
            Variable::NumFirms => row.1[3],
            Variable::Price => unreachable!(),
        })
    }
}

pub fn industry_targets() -> [IndustryTargets; 3] {
    let q1 = |y| QuarterDate::new(y, 1).expect("valid quarter");
    [
        IndustryTargets { naics: Naics::Forestry113, start: q1(2001), price: PRICE_113, rows: &ROWS_113 },
        IndustryTargets { naics: Naics::Wood321, start: q1(2004), price: PRICE_321, rows: &ROWS_321 },
        IndustryTargets { naics: Naics::Paper322, start: q1(2004), price: PRICE_322, rows: &ROWS_322 },
    ]
}

/// Draws a shape and maps it onto `target`; `None` if the affine image of
/// the interior points leaves `[min, max]` or the variance budget is negative.
fn attempt<R: Rng + ?Sized>(rng: &mut R, target: &SummaryTarget) -> Option<Vec<f64>> {
    let n = target.n;
    let mut z = Vec::with_capacity(n);
    let mut acc = 0.0;
    for _ in 0..n {
        acc += rng.sample::<f64, _>(StandardNormal);
        z.push(acc);
    }
    let zm = z.iter().sum::<f64>() / n as f64;
    let zs = (z.iter().map(|v| (v - zm).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-12);
    for v in z.iter_mut() {
        *v = (*v - zm) / zs;
    }
    let w: Vec<f64> = if rng.random_bool(0.5) {
        let g = rng.random_range(-2.5..2.5);
        z.iter().map(|v| (g * v).exp()).collect()
    } else {
        let g = rng.random_range(0.5..6.0);
        let c = rng.random_range(-1.0..1.0);
        z.iter().map(|v| (g * (v - c)).tanh()).collect()
    };

    let lo = (0..n).min_by(|&a, &b| w[a].total_cmp(&w[b]))?;
    let hi = (0..n).max_by(|&a, &b| w[a].total_cmp(&w[b]))?;
    if lo == hi {
        return None;
    }
    let interior: Vec<usize> = (0..n).filter(|&i| i != lo && i != hi).collect();
    let m = interior.len() as f64;
    let (mean, sd, a, b) = (target.mean, target.sd, target.min, target.max);
    let centre = (n as f64 * mean - a - b) / m;
    let budget = (n as f64 - 1.0) * sd * sd - (a - mean).powi(2) - (b - mean).powi(2) - m * (centre - mean).powi(2);
    if budget <= 0.0 {
        return None;
    }
    let wm = interior.iter().map(|&i| w[i]).sum::<f64>() / m;
    let ss: f64 = interior.iter().map(|&i| (w[i] - wm).powi(2)).sum();
    let scale = (budget / ss).sqrt();

    let mut out = vec![0.0; n];
    out[lo] = a;
    out[hi] = b;
    for &i in &interior {
        let v = centre + scale * (w[i] - wm);
        if !(v > a && v < b) {
            return None;
        }
        // Four decimals keeps files readable; the moment error stays below 1e-4.
        out[i] = (v * 1e4).round() / 1e4;
    }
    Some(out)
}

/// A series with exactly the target N, min and max, and mean and sd equal
/// to the target up to rounding of the interior values.
pub fn series_matching<R: Rng + ?Sized>(rng: &mut R, target: &SummaryTarget) -> Vec<f64> {
    for _ in 0..MAX_ATTEMPTS {
        if let Some(v) = attempt(rng, target) {
            return v;
        }
    }
    panic!("no series found for {target:?}");
}

/// All sixteen fixture panels in (naics, state) order.
pub fn six_state_panels(seed: u64) -> Vec<PanelDataset> {
    let mut stream = 0usize;
    let mut next_rng = || {
        stream += 1;
        replication_rng(seed, stream)
    };
    let mut panels = Vec::new();
    for industry in industry_targets() {
        let price = series_matching(&mut next_rng(), &industry.price);
        for state in industry.states() {
            let series = Variable::ALL.map(|var| {
                let values = if var == Variable::Price {
                    price.clone()
                } else {
                    let target = industry.target(state, var).expect("state row present");
                    series_matching(&mut next_rng(), &target)
                };
                QuarterlySeries::new(industry.start, values).expect("finite fixture values")
            });
            let code: StateCode = state.parse().expect("valid state code");
            panels.push(PanelDataset::new(code, industry.naics, series).expect("aligned fixture panel"));
        }
    }
    panels
}

pub fn panel_file_name(state: &StateCode, naics: Naics) -> String {
    format!("{state}_{naics}.csv")
}

const STATE_TOTALS: [(&str, f64); 6] =
    [("AL", 1.9e6), ("AR", 1.2e6), ("ME", 0.6e6), ("MS", 1.1e6), ("OR", 1.8e6), ("WI", 2.8e6)];
const NATIONAL_TOTAL: f64 = 140.0e6;

fn national_industry(naics: Naics) -> f64 {
    match naics {
        Naics::Forestry113 => 168_000.0,
        Naics::Wood321 => 406_000.0,
        Naics::Paper322 => 378_000.0,
    }
}

/// Employment counts for location quotients over every state and industry.
/// Modelled pairs reuse their panel employment; the two unmodelled pairs
/// get small industries whose LQ stays below one.
pub fn lq_inputs_csv(panels: &[PanelDataset], seed: u64) -> String {
    let mut rng = replication_rng(seed, 10_000);
    let mut out = String::from(
        "state,naics,year,quarter,industry_employment,total_employment,national_industry_employment,national_total_employment\n",
    );
    for naics in Naics::ALL {
        for (state, total) in STATE_TOTALS {
            let panel = panels.iter().find(|p| p.state.as_str() == state && p.naics == naics);
            let (start, employment): (QuarterDate, Vec<f64>) = match panel {
                Some(p) => (p.start(), p.series(Variable::Employment).values().to_vec()),
                None => {
                    let start = QuarterDate::new(2004, 1).expect("valid quarter");
                    (start, (0..60).map(|_| (rng.random_range(1500.0..2500.0f64)).round()).collect())
                }
            };
            for (i, e) in employment.iter().enumerate() {
                let q = start.advance(i as i64);
                let wiggle = 1.0 + 0.01 * (i as f64 * 0.7).sin();
                let row_total = (total * wiggle).round();
                let nat_ind = (national_industry(naics) * wiggle).round();
                let nat_total = (NATIONAL_TOTAL * wiggle).round();
                out.push_str(&format!(
                    "{state},{naics},{},{},{e},{row_total},{nat_ind},{nat_total}\n",
                    q.year(),
                    q.quarter()
                ));
            }
        }
    }
    out
}

/// Default run configuration over the fixture panels.
pub fn default_config() -> RunConfig {
    let models = six_state_panels_index()
        .into_iter()
        .map(|(state, naics)| ModelEntry { state, naics, k: None, r: None, case: None })
        .collect();
    RunConfig {
        data_dir: ".".into(),
        out_dir: "out".into(),
        lq_inputs: Some("lq_inputs.csv".into()),
        models,
        defaults: Defaults {
            holdout_start: Some(QuarterDate::new(2016, 1).expect("valid quarter")),
            johansen_case: DeterministicCase::RestrictedConstant,
            ..Defaults::default()
        },
        seed: FIXTURE_SEED,
    }
}

fn six_state_panels_index() -> Vec<(StateCode, Naics)> {
    industry_targets()
        .iter()
        .flat_map(|ind| ind.states().map(|s| (s.parse().expect("valid state code"), ind.naics)).collect::<Vec<_>>())
        .collect()
}

/// Writes panels, LQ inputs and `config.json` into `dir`.
pub fn write_six_state_dataset(dir: &Path, seed: u64) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let panels = six_state_panels(seed);
    for p in &panels {
        let mut buf = Vec::new();
        write_panel(p, &mut buf).map_err(io::Error::other)?;
        fs::write(dir.join(panel_file_name(&p.state, p.naics)), buf)?;
    }
    fs::write(dir.join("lq_inputs.csv"), lq_inputs_csv(&panels, seed))?;
    let mut config = serde_json::to_string_pretty(&default_config()).map_err(io::Error::other)?;
    config.push('\n');
    fs::write(dir.join("config.json"), config)
}
