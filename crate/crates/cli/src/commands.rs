//! The `run`, `compare` and `preset` subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{bail, Context, Result};
use formfield::{run, Mode, RunResult};

use crate::config::{load, preset_config, ConfigFile};
use crate::export::{trace_csv, Plot};
use crate::report::{comparison_csv, Report};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Success,
    NotConverged,
    Error,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Error => 1,
            Status::NotConverged => 2,
        }
    }

    pub fn of(r: &RunResult) -> Self {
        if r.failure.is_some() {
            Status::Error
        } else if r.completed {
            Status::Success
        } else {
            Status::NotConverged
        }
    }
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s.code())
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

pub struct RunOutput {
    pub status: Status,
    pub report: Report,
}

pub fn run_config(mut cfg: ConfigFile, out: &Path, seed: Option<u64>, mode: Option<Mode>) -> Result<RunOutput> {
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    if let Some(m) = mode {
        cfg.mode = m;
    }
    let sc = cfg.to_scenario()?;
    create_dir(out)?;
    let result = run(&sc, cfg.mode)?;
    let report = Report::new(&sc, cfg.hash(), &result);

    write(out.join("trace.csv"), &trace_csv(&result.trace, sc.sim.dt))?;
    let plot = Plot {
        traces: vec![(cfg.mode.as_str(), &result.trace)],
        obstacles: &sc.obstacles,
        goal: sc.goal,
    };
    write(out.join("trajectory.svg"), &plot.render())?;
    write(out.join("report.json"), &crate::json::to_string(&report)?)?;

    Ok(RunOutput {
        status: Status::of(&result),
        report,
    })
}

pub fn run_command(config: &Path, out: &Path, seed: Option<u64>, mode: Option<Mode>) -> Result<Status> {
    let cfg = load(config)?;
    let o = run_config(cfg, out, seed, mode)?;
    let r = &o.report;
    println!(
        "{} [{}] seed={} completed={} trapped={} t_end={:.5} steps={}",
        r.scenario, r.mode, r.seed, r.completed, r.trapped, r.t_end, r.steps
    );
    if let Some(f) = &r.failure {
        eprintln!("error: {f}");
    }
    println!("wrote {}", out.display());
    Ok(o.status)
}

pub fn parse_modes(list: &str) -> Result<Vec<Mode>> {
    let modes = list
        .split(',')
        .map(|m| m.trim().parse::<Mode>().map_err(anyhow::Error::msg))
        .collect::<Result<Vec<_>>>()?;
    if modes.len() < 2 {
        bail!("--modes: need at least two modes, got {}", modes.len());
    }
    Ok(modes)
}

pub struct CompareOutput {
    pub status: Status,
    pub table: String,
}

pub fn compare_config(cfg: &ConfigFile, modes: &[Mode], out: &Path) -> Result<CompareOutput> {
    let sc = cfg.to_scenario()?;
    create_dir(out)?;
    let results: Vec<RunResult> = thread::scope(|s| {
        let handles: Vec<_> = modes
            .iter()
            .map(|&m| {
                let sc = &sc;
                s.spawn(move || run(sc, m))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let reports: Vec<Report> = results
        .iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.mode = r.mode;
            Report::new(&sc, c.hash(), r)
        })
        .collect();
    let rows: Vec<(&RunResult, &Report)> = results.iter().zip(&reports).collect();
    let table = comparison_csv(sc.len(), &rows);
    write(out.join("comparison.csv"), &table)?;
    let plot = Plot {
        traces: results.iter().map(|r| (r.mode.as_str(), r.trace.as_slice())).collect(),
        obstacles: &sc.obstacles,
        goal: sc.goal,
    };
    write(out.join("comparison.svg"), &plot.render())?;
    let status = results.iter().map(Status::of).max().unwrap_or(Status::Success);
    Ok(CompareOutput { status, table })
}

pub fn compare_command(config: &Path, modes: &str, out: &Path) -> Result<Status> {
    let modes = parse_modes(modes)?;
    let cfg = load(config)?;
    let o = compare_config(&cfg, &modes, out)?;
    print!("{}", o.table);
    println!("wrote {}", out.display());
    Ok(o.status)
}

/// Prints the expanded preset, or writes it to `<name>.json` in `out`.
pub fn preset_command(name: &str, print: bool, out: &Path) -> Result<Status> {
    let text = preset_config(name)?.to_json_pretty();
    if print {
        print!("{text}");
    } else {
        create_dir(out)?;
        let path = out.join(format!("{name}.json"));
        write(path.clone(), &text)?;
        println!("wrote {}", path.display());
    }
    Ok(Status::Success)
}
