//! Command line, JSON formats and the figure harness for `gridsync`.
//!
//! The binary is a thin wrapper around [`run`], which returns the process
//! exit code: 0 on success, 2 on input errors, 3 on numerical failures.

pub mod commands;
pub mod config;
pub mod error;
pub mod figs;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use gridsync::smallsignal::{preset, sweep_gfl, sweep_gfm, SweepParam, SweepSpec};

use crate::error::{CliError, Result};
use crate::output::{OutDir, RunManifest};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "GRIDSYNC_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "gridsync", version, about = "Inverter synchronization stability: loci, poles, simulation")]
pub struct Cli {
    /// Output directory. Default: $GRIDSYNC_OUT_DIR or ./out, plus a dated
    /// sub-directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Root locus of a single inverter on an infinite bus.
    Rootlocus {
        /// Named sweep (gfm-grid-scale, gfl-grid-scale, gfm-droop,
        /// gfl-pll-bandwidth, gfm-v-loop, gfl-i-loop).
        #[arg(long, conflicts_with = "param")]
        preset: Option<String>,
        /// Swept parameter: grid_scale, droop_m (pu), pll_bandwidth, v_loop_bw,
        /// i_loop_bw (Hz).
        #[arg(long, requires_all = ["start", "end"])]
        param: Option<String>,
        #[arg(long)]
        start: Option<f64>,
        #[arg(long)]
        end: Option<f64>,
        /// Inverter type for a custom sweep.
        #[arg(long, default_value = "gfm", value_parser = ["gfm", "gfl"])]
        kind: String,
        /// Grid scale c in Z_g = c·(1/5 + j) pu for a custom sweep.
        #[arg(long, default_value_t = 0.3)]
        grid_scale: f64,
        #[arg(long, default_value_t = 21)]
        points: usize,
    },
    /// Whole-system poles of a network.
    Poles {
        #[arg(long)]
        topology: PathBuf,
        /// Scale line impedances, e.g. `1-2,1-5:0.2`.
        #[arg(long)]
        scale_lines: Option<String>,
        /// Parameter override `DEVICE.PARAM=VALUE` (repeatable). DEVICE is a
        /// name or index; a `_hz` suffix gives a bandwidth in Hz.
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Time-domain simulation of a scenario file.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Parameter override, as for `poles`.
        #[arg(long = "set")]
        sets: Vec<String>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Two-inverter power-angle analysis (default: the inertia swap).
    Transient {
        #[arg(long)]
        case: Option<PathBuf>,
    },
    /// Island GFL scenario with the three-phase report.
    Island {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Regenerate every figure with PASS/FAIL checks.
    PaperFigs {
        /// Comma-separated figure names.
        #[arg(long)]
        only: Option<String>,
        /// Directory holding ieee14.json and the scenario files.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

/// Shipped data directory.
pub fn default_data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn out_root(explicit: Option<&Path>, command: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let base = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
    let stamp = chrono::Local::now().format("%Y-%m-%d_%H%M%S");
    base.join(format!("{stamp}_{command}"))
}

/// Parse arguments and run; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("gridsync: {e}");
            e.exit_code()
        }
    }
}

fn custom_sweep(param: &str, start: f64, end: f64, kind: &str, grid_scale: f64, points: usize) -> Result<SweepSpec> {
    let param = SweepParam::parse(param)?;
    let device = if kind == "gfl" { sweep_gfl() } else { sweep_gfm() };
    let spec = SweepSpec { name: format!("custom-{}", param.id()), param, start, end, points, device, grid_scale };
    spec.validate()?;
    Ok(spec)
}

/// Run a parsed command; returns the terminal report.
pub fn execute(cli: Cli) -> Result<Vec<String>> {
    let mut lines = Vec::new();
    match cli.command {
        Command::Rootlocus { preset: name, param, start, end, kind, grid_scale, points } => {
            let spec = match (name, param) {
                (Some(n), _) => {
                    let mut s = preset(&n)?;
                    s.points = points;
                    s
                }
                (None, Some(p)) => {
                    custom_sweep(&p, start.unwrap_or(0.0), end.unwrap_or(0.0), &kind, grid_scale, points)?
                }
                (None, None) => {
                    return Err(CliError::Input("rootlocus needs --preset or --param/--start/--end".into()))
                }
            };
            let root = out_root(cli.out.as_deref(), "rootlocus");
            let mut out = OutDir::create(&root)?;
            let locus = commands::rootlocus(&spec, &mut out)?;
            let mut m = RunManifest::new("rootlocus", &root);
            m.param("sweep", &spec.name)
                .param("param", spec.param.id())
                .param("start", spec.start)
                .param("end", spec.end)
                .param("points", spec.points)
                .param("grid_scale", spec.grid_scale);
            out.write_manifest(&m)?;
            for (v, rep) in [locus.first(), locus.last()].into_iter().flatten() {
                lines.push(format!(
                    "{} = {v}: {} (max Re {:.4}, {:.2} Hz)",
                    spec.param.id(),
                    rep.verdict.as_str(),
                    rep.dominant.re,
                    rep.frequency_hz
                ));
            }
            lines.push(format!("wrote {}", root.display()));
        }
        Command::Poles { topology, scale_lines, sets } => {
            let (mut top, mut devs) = config::load_topology(&topology)?;
            config::apply_overrides(&mut devs, &sets)?;
            if let Some(s) = &scale_lines {
                let (pairs, f) = config::parse_line_scaling(s)?;
                config::scale_lines(&mut top, &pairs, f)?;
            }
            let root = out_root(cli.out.as_deref(), "poles");
            let mut out = OutDir::create(&root)?;
            let rep = commands::poles(top, devs, &mut out, "poles")?;
            let mut m = RunManifest::new("poles", &root);
            m.inputs.push(topology.display().to_string());
            m.param("scale_lines", scale_lines.as_deref().unwrap_or("none"));
            for s in &sets {
                if let Some((k, v)) = s.split_once('=') {
                    m.overrides.insert(k.into(), v.into());
                }
            }
            out.write_manifest(&m)?;
            lines.push(format!(
                "{}: dominant {:.4}{:+.4}j ({:.2} Hz, damping {:.4})",
                rep.verdict.as_str(),
                rep.dominant.re,
                rep.dominant.im.abs(),
                rep.frequency_hz,
                rep.damping_ratio
            ));
            if let Some(p) = rep.poles.iter().find(|p| p.re > 0.0 && p.im.abs() > 1e-6) {
                lines.push(format!("unstable pair near {:.2} Hz", p.im.abs() / (2.0 * std::f64::consts::PI)));
            }
            lines.push(format!("wrote {}", root.display()));
        }
        Command::Simulate { scenario, sets, duration, dt } => {
            let mut sc = config::load_scenario(&scenario)?;
            config::apply_overrides(&mut sc.devices, &sets)?;
            if let Some(d) = duration {
                sc.sim.duration = d;
            }
            if let Some(h) = dt {
                sc.sim.dt = h;
            }
            sc.sim.validate()?;
            let root = out_root(cli.out.as_deref(), "simulate");
            let mut out = OutDir::create(&root)?;
            let tr = commands::run_scenario(&sc)?;
            commands::write_traces(&tr, &mut out, "traces", "Simulation")?;
            let mut m = RunManifest::new("simulate", &root);
            m.inputs.push(scenario.display().to_string());
            m.param("dt", sc.sim.dt).param("duration", sc.sim.duration).param("decimation", sc.sim.decimation);
            for s in &sets {
                if let Some((k, v)) = s.split_once('=') {
                    m.overrides.insert(k.into(), v.into());
                }
            }
            out.write_manifest(&m)?;
            let t_check = (sc.sim.duration * 0.8).max(sc.events.iter().map(|e| e.time).fold(0.0, f64::max));
            lines.push(commands::describe(&tr, &commands::recovered(&tr, t_check)));
            lines.push(format!("wrote {}", root.display()));
        }
        Command::Transient { case } => {
            let cfg = commands::load_transient(case.as_deref())?;
            let root = out_root(cli.out.as_deref(), "transient");
            let mut out = OutDir::create(&root)?;
            let rep = commands::transient(&cfg, &mut out)?;
            let mut m = RunManifest::new("transient", &root);
            if let Some(c) = &case {
                m.inputs.push(c.display().to_string());
            }
            m.param("case", format!("{cfg:?}"));
            out.write_manifest(&m)?;
            lines.extend(rep.lines);
            lines.push(format!("wrote {}", root.display()));
        }
        Command::Island { scenario } => {
            let path = scenario.unwrap_or_else(|| default_data_dir().join("island_gfl.json"));
            let sc = config::load_scenario(&path)?;
            let root = out_root(cli.out.as_deref(), "island");
            let mut out = OutDir::create(&root)?;
            let (_, ph) = commands::island(&sc, &mut out)?;
            let mut m = RunManifest::new("island", &root);
            m.inputs.push(path.display().to_string());
            out.write_manifest(&m)?;
            lines.push(format!("phase 1: v_d = {:.4} pu", ph.v_d_phase1));
            lines.push(format!(
                "phase 2: f {:.3} -> {:.3} Hz, strictly increasing = {}",
                ph.f_phase2.0, ph.f_phase2.1, ph.increasing_phase2
            ));
            lines.push(format!(
                "phase 3: settled {}, final f = {:.4} Hz",
                ph.settle_time.map(|s| format!("after {s:.3} s")).unwrap_or("never".into()),
                ph.f_final
            ));
            lines.push(format!("wrote {}", root.display()));
        }
        Command::PaperFigs { only, data } => {
            let data = data.unwrap_or_else(default_data_dir);
            let root = out_root(cli.out.as_deref(), "paper-figs");
            let res = figs::paper_figs(&root, &data, only.as_deref())?;
            for r in &res {
                lines.push(format!("{:<12} {}  {}", r.name, if r.pass { "PASS" } else { "FAIL" }, r.detail));
            }
            lines.push(format!("wrote {}", root.display()));
        }
    }
    Ok(lines)
}
