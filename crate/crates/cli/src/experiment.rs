//! Runs an [`Experiment`] and writes its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use d2d_relay::policy::PolicyMode;
use d2d_relay::sim::{
    classify_stability, run_with_table, search_capacity, write_trace_csv, CapacityBracket,
    MetricsTrace, StabilityVerdict, Verdict, VerdictReport, MIN_CLASSIFY_SLOTS,
};
use d2d_relay::stability::{region_sweep, write_region_csv, Membership, StabilityInstance};

use crate::config::{Experiment, Kind};
use crate::plot::plot_script;

pub const SUMMARY_CSV: &str = "summary.csv";
pub const VERDICTS_TXT: &str = "verdicts.txt";
pub const PLOT_SCRIPT: &str = "plot_backlog.py";
pub const RESOLVED_CONFIG: &str = "resolved.toml";
pub const CAPACITY_CSV: &str = "capacity.csv";
pub const PROBES_CSV: &str = "probes.csv";
pub const REGION_CSV: &str = "region.csv";

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub mode: PolicyMode,
    pub lambda: f64,
    pub seed: u64,
    /// Empty when the run is shorter than the classifier needs.
    pub verdict: String,
    pub slope: Option<f64>,
    pub mean_backlog: f64,
    pub final_backlog: u64,
    pub throughput: f64,
    pub max_avg_power_mw: f64,
    pub power_ok: bool,
    pub trace: String,
}

/// What an experiment produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<SummaryRow>,
    pub brackets: Vec<(PolicyMode, CapacityBracket)>,
    pub region: Option<(usize, usize)>,
}

pub fn trace_file_name(mode: PolicyMode, rate: f64, seed: u64) -> String {
    format!("trace_{mode}_lambda{rate}_seed{seed}.csv")
}

pub fn run_experiment(exp: &Experiment) -> Result<Outcome> {
    fs::create_dir_all(&exp.out).with_context(|| format!("creating {}", exp.out.display()))?;
    let mut outcome = Outcome::default();
    let resolved = exp.out.join(RESOLVED_CONFIG);
    fs::write(&resolved, exp.to_toml())
        .with_context(|| format!("writing {}", resolved.display()))?;
    outcome.files.push(resolved);
    match exp.kind {
        Kind::Run => simulate(
            exp,
            &[exp.policy.mode],
            &[exp.traffic.arrival_rate],
            &mut outcome,
        )?,
        Kind::Sweep => simulate(exp, &exp.sweep.modes, &exp.sweep.rates, &mut outcome)?,
        Kind::Capacity => capacity(exp, &mut outcome)?,
        Kind::Region => region(exp, &mut outcome)?,
    }
    Ok(outcome)
}

struct Finished {
    mode: PolicyMode,
    rate: f64,
    seed: u64,
    trace: MetricsTrace,
    verdict: Option<StabilityVerdict>,
}

fn simulate(
    exp: &Experiment,
    modes: &[PolicyMode],
    rates: &[f64],
    outcome: &mut Outcome,
) -> Result<()> {
    let jobs: Vec<(PolicyMode, f64, u64)> = modes
        .iter()
        .flat_map(|&m| {
            rates
                .iter()
                .flat_map(move |&r| exp.seeds.iter().map(move |&s| (m, r, s)))
        })
        .collect();
    let table = exp.sim_config(modes[0], 0.0, exp.seeds[0])?.rate_table();
    let thresholds = exp.thresholds();
    let finished = jobs
        .par_iter()
        .map(|&(mode, rate, seed)| {
            let config = exp.sim_config(mode, rate, seed)?;
            let trace = run_with_table(&config, &table)?;
            let verdict = if trace.len() >= MIN_CLASSIFY_SLOTS {
                Some(classify_stability(&trace, &thresholds)?)
            } else {
                None
            };
            Ok(Finished {
                mode,
                rate,
                seed,
                trace,
                verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let p_bar = vec![exp.p_bar_mw(); exp.network.n_ms];
    let mut report = String::new();
    for f in &finished {
        let name = trace_file_name(f.mode, f.rate, f.seed);
        let path = exp.out.join(&name);
        write_trace_csv(&f.trace, BufWriter::new(File::create(&path)?))
            .with_context(|| format!("writing {name}"))?;
        outcome.files.push(path);
        let n = f.trace.len();
        outcome.summary.push(SummaryRow {
            mode: f.mode,
            lambda: f.rate,
            seed: f.seed,
            verdict: f.verdict.map_or(String::new(), |v| v.verdict.to_string()),
            slope: f.verdict.map(|v| v.slope),
            mean_backlog: f.trace.mean_total_backlog(),
            final_backlog: if n == 0 {
                0
            } else {
                f.trace.sum_own[n - 1] + f.trace.sum_relay[n - 1]
            },
            throughput: f.trace.throughput(),
            max_avg_power_mw: f.trace.averages.power.iter().copied().fold(0.0, f64::max),
            power_ok: f.trace.power_constraint_holds(&p_bar),
            trace: name,
        });
    }
    for &mode in modes {
        for &rate in rates {
            let runs: Vec<&Finished> = finished
                .iter()
                .filter(|f| f.mode == mode && f.rate == rate)
                .collect();
            let verdicts: Vec<StabilityVerdict> = runs.iter().filter_map(|f| f.verdict).collect();
            if verdicts.len() == runs.len() {
                let seeds = runs.iter().map(|f| f.seed).collect();
                let label = format!("{mode} lambda={rate}");
                report.push_str(
                    &VerdictReport {
                        label,
                        seeds,
                        verdicts,
                    }
                    .to_string(),
                );
            }
        }
    }

    let path = exp.out.join(SUMMARY_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    for row in &outcome.summary {
        w.serialize(row)?;
    }
    w.flush()?;
    outcome.files.push(path);

    let path = exp.out.join(VERDICTS_TXT);
    fs::write(&path, report)?;
    outcome.files.push(path);

    let path = exp.out.join(PLOT_SCRIPT);
    fs::write(&path, plot_script(&outcome.summary))?;
    outcome.files.push(path);
    Ok(())
}

fn capacity(exp: &Experiment, outcome: &mut Outcome) -> Result<()> {
    let thresholds = exp.thresholds();
    let c = &exp.capacity;
    let mut report = String::new();
    for &mode in &c.modes {
        let template = exp.sim_config(mode, c.lo, exp.seeds[0])?;
        let bracket = search_capacity(&template, c.lo, c.hi, c.resolution, &exp.seeds, &thresholds)
            .with_context(|| format!("capacity search in {mode} mode"))?;
        report.push_str(&format!(
            "[{mode}]\nlo = {}\nhi = {}\n",
            bracket.lo, bracket.hi
        ));
        outcome.brackets.push((mode, bracket));
    }

    let path = exp.out.join(CAPACITY_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["mode", "lo", "hi"])?;
    for (mode, b) in &outcome.brackets {
        w.write_record([mode.to_string(), b.lo.to_string(), b.hi.to_string()])?;
    }
    w.flush()?;
    outcome.files.push(path);

    let path = exp.out.join(PROBES_CSV);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["mode", "lambda", "verdicts"])?;
    for (mode, b) in &outcome.brackets {
        for p in &b.probes {
            let v: Vec<String> = p.verdicts.iter().map(Verdict::to_string).collect();
            w.write_record([mode.to_string(), p.rate.to_string(), v.join(" ")])?;
        }
    }
    w.flush()?;
    outcome.files.push(path);

    let path = exp.out.join(VERDICTS_TXT);
    fs::write(&path, report)?;
    outcome.files.push(path);
    Ok(())
}

/// Arrival grid of a region sweep, first MS varying slowest.
pub fn region_points(lambda_max: &[f64], points: usize, offset: f64) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for &m in lambda_max {
        let step = m / points as f64;
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                (0..points).map(move |a| {
                    let mut p = prefix.clone();
                    p.push((a as f64 + offset) * step);
                    p
                })
            })
            .collect();
    }
    out
}

fn region(exp: &Experiment, outcome: &mut Outcome) -> Result<()> {
    let path = &exp.region.instance;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let inst = StabilityInstance::from_toml_str(&text)
        .with_context(|| format!("region.instance {}", path.display()))?;
    let lambda_max = match &exp.region.lambda_max {
        Some(m) if m.len() != inst.n_ms => bail!(
            "region.lambda_max: {} values for {} MSs",
            m.len(),
            inst.n_ms
        ),
        Some(m) => m.clone(),
        None => (0..inst.n_ms).map(|i| inst.service_ceiling(i)).collect(),
    };
    let total = (exp.region.points as f64).powi(inst.n_ms as i32);
    if total > 1e6 {
        bail!("region.points: {total} grid points, at most 1e6 allowed");
    }
    let points = region_points(&lambda_max, exp.region.points, exp.region.offset);
    let results = region_sweep(&inst, &points)?;
    let out = exp.out.join(REGION_CSV);
    write_region_csv(BufWriter::new(File::create(&out)?), &points, &results)?;
    outcome.files.push(out);
    let inside = results
        .iter()
        .filter(|r| r.verdict == Membership::Inside)
        .count();
    outcome.region = Some((inside, results.len() - inside));
    let report = format!(
        "[region]\ninstance = {}\ninside = {}\noutside = {}\n",
        path.display(),
        inside,
        results.len() - inside
    );
    let txt = exp.out.join(VERDICTS_TXT);
    fs::write(&txt, report)?;
    outcome.files.push(txt);
    Ok(())
}

/// Writes the one-line-per-file listing printed at the end of a run.
pub fn list_files<W: Write>(mut w: W, files: &[PathBuf]) -> std::io::Result<()> {
    for f in files {
        writeln!(w, "wrote {}", f.display())?;
    }
    Ok(())
}
