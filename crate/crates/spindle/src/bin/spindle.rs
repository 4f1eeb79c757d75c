use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use spindle::birkhoff::{extend_boundary, find_periodic_points, sample_annulus};
use spindle::csf::{evolve, Budget, LoopState, Verdict};
use spindle::geodesic::{find_closed_geodesic, shoot, ClosedGeodesic};
use spindle::report::{fmt_f64, write_csv, write_json, write_loops_svg, write_points_svg};
use spindle::search::{
    cascade, relax_broken, sweep_separating_geodesic, BrokenLoop, RelaxMode, SweepOpts,
};
use spindle::surface::{ConeSurface, SurfPoint};
use spindle::suite::run_suite;

#[derive(Parser)]
#[command(version, about = "closed geodesics on cone surfaces of revolution")]
struct Args {
    /// JSON run configuration; defaults apply where omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory for artifacts
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// rayon thread count (0 = automatic)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// also write SVG sketches where a command supports them
    #[arg(long, default_value_t = false)]
    svg: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// integrate a single geodesic and dump its samples and cone events
    Trace,
    /// run the shortening flow on a parallel and report the verdict
    Csf,
    /// bisect a sweep of parallels down to a separating geodesic
    Sweep,
    /// sample the return map over the annulus and hunt periodic points
    Birkhoff,
    /// iterated shortening from the widest parallel geodesic
    Cascade,
    /// relax a broken loop and print its discrete signature
    Relax,
    /// run the full acceptance battery twice and compare the replays
    Suite,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    surface: String,
    p: u32,
    q: u32,
    r0: f64,
    theta0: f64,
    psi: f64,
    length: f64,
    n_v: usize,
    k: usize,
    n_t: usize,
    n_alpha: usize,
    max_period: usize,
    horizon_lengths: f64,
    fan_size: usize,
    horizon_factor: f64,
    max_stages: usize,
    budget_time: f64,
    budget_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            surface: "bumped_spindle".into(),
            p: 3,
            q: 1,
            r0: 1.0,
            theta0: 0.0,
            psi: 1.0,
            length: 10.0,
            n_v: 96,
            k: 0,
            n_t: 24,
            n_alpha: 24,
            max_period: 3,
            horizon_lengths: 10.0,
            fan_size: 48,
            horizon_factor: 1.25,
            max_stages: 4,
            budget_time: 50.0,
            budget_steps: 200_000,
        }
    }
}

impl RunConfig {
    fn surface(&self) -> Result<ConeSurface, String> {
        match self.surface.as_str() {
            "round" => Ok(ConeSurface::round()),
            "football" => Ok(ConeSurface::football(self.p)),
            "spindle" => Ok(ConeSurface::spindle(self.p, self.q)),
            "flat_cone" => Ok(ConeSurface::flat_cone(self.p)),
            "flat_neck" => Ok(ConeSurface::flat_neck()),
            "bumped_spindle" => Ok(ConeSurface::bumped_spindle()),
            other => Err(format!(
                "unknown surface {other:?}; expected round, football, spindle, \
                 flat_cone, flat_neck or bumped_spindle"
            )),
        }
    }

    fn budget(&self) -> Budget {
        Budget { max_time: self.budget_time, max_steps: self.budget_steps }
    }
}

/// 2 = bad input or configuration, 3 = numerical failure
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

fn main() -> ExitCode {
    let args = Args::parse();
    if args.threads > 0 {
        if let Err(e) =
            rayon::ThreadPoolBuilder::new().num_threads(args.threads).build_global()
        {
            eprintln!("thread pool: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    let config = match load_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let surface = match config.surface() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if let Err(e) = stamp_config(&args.out, &config) {
        eprintln!("write config: {e}");
        return ExitCode::from(EXIT_INPUT);
    }
    let run = match args.cmd {
        Cmd::Trace => trace(&args, &config, &surface),
        Cmd::Csf => csf(&args, &config, &surface),
        Cmd::Sweep => sweep(&args, &config, &surface).map(|_| ()),
        Cmd::Birkhoff => birkhoff(&args, &config, &surface),
        Cmd::Cascade => run_cascade(&args, &config, &surface),
        Cmd::Relax => relax(&args, &config, &surface),
        Cmd::Suite => suite(&args),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, String> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| e.to_string())?;
            serde_json::from_str(&text).map_err(|e| e.to_string())
        }
    }
}

fn stamp_config(out: &Path, config: &RunConfig) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Stamped<'a> {
        version: &'static str,
        #[serde(flatten)]
        config: &'a RunConfig,
    }
    write_json(&out.join("config.json"), &Stamped { version: env!("CARGO_PKG_VERSION"), config })
}

fn trace(args: &Args, config: &RunConfig, s: &ConeSurface) -> Result<(), String> {
    let start = SurfPoint::new(config.r0, config.theta0);
    let path = shoot(s, start, config.psi, config.length).map_err(|e| e.to_string())?;
    let n = 512;
    let rows: Vec<Vec<String>> = (0..=n)
        .map(|i| {
            let arc = config.length * i as f64 / n as f64;
            let p = path.eval(s, arc);
            vec![fmt_f64(arc), fmt_f64(p.r), fmt_f64(p.theta)]
        })
        .collect();
    write_csv(&args.out.join("trace.csv"), &["s", "r", "theta"], &rows)
        .map_err(|e| e.to_string())?;
    let events: Vec<Vec<String>> = path
        .events
        .iter()
        .map(|e| vec![fmt_f64(e.s), format!("{:?}", e.kind), fmt_f64(e.cover_defect)])
        .collect();
    write_csv(&args.out.join("events.csv"), &["s", "kind", "cover_defect"], &events)
        .map_err(|e| e.to_string())?;
    println!("traced {} units, {} cone events", config.length, path.events.len());
    Ok(())
}

fn csf(args: &Args, config: &RunConfig, s: &ConeSurface) -> Result<(), String> {
    let start = LoopState::parallel(s, config.r0, config.n_v);
    let out = evolve(s, start, config.budget()).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = out
        .trace
        .iter()
        .map(|(t, len, k)| vec![fmt_f64(*t), fmt_f64(*len), fmt_f64(*k)])
        .collect();
    write_csv(&args.out.join("flow_trace.csv"), &["t", "length", "max_curvature"], &rows)
        .map_err(|e| e.to_string())?;
    write_json(&args.out.join("verdict.json"), &out.verdict).map_err(|e| e.to_string())?;
    if args.svg {
        let frames: Vec<&LoopState> = out.history.iter().step_by(out.history.len().div_ceil(12).max(1)).collect();
        write_loops_svg(&args.out.join("flow.svg"), s, &frames).map_err(|e| e.to_string())?;
    }
    let label = match &out.verdict {
        Verdict::RoundPoint { collapse_time, .. } => {
            format!("round point at t = {collapse_time:.6}")
        }
        Verdict::ConeCollapse { cone, collapse_time } => {
            format!("cone collapse (order {}) at t = {collapse_time:.6}", cone.order)
        }
        Verdict::LimitGeodesic { length, final_time, .. } => {
            format!("limit geodesic of length {length:.8} at t = {final_time:.6}")
        }
        Verdict::BudgetExhausted { final_time, .. } => {
            format!("budget exhausted at t = {final_time:.6}")
        }
    };
    println!("{label}");
    Ok(())
}

fn sweep(args: &Args, config: &RunConfig, s: &ConeSurface) -> Result<ClosedGeodesic, String> {
    let opts = SweepOpts { n_v: config.n_v, flow_budget: config.budget(), ..SweepOpts::default() };
    let (c, records) = sweep_separating_geodesic(s, &opts).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.s),
                r.verdict.clone(),
                format!("{:?}", r.collapse_pole),
                fmt_f64(r.t_final),
            ]
        })
        .collect();
    write_csv(&args.out.join("sweep.csv"), &["s", "verdict", "collapse_pole", "t_final"], &rows)
        .map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct Found {
        length: String,
        defect: String,
        separating: bool,
        index: Option<usize>,
        nullity: Option<usize>,
    }
    write_json(
        &args.out.join("geodesic.json"),
        &Found {
            length: fmt_f64(c.length),
            defect: fmt_f64(c.defect),
            separating: c.is_separating(s),
            index: c.jacobi.as_ref().map(|j| j.index),
            nullity: c.jacobi.as_ref().map(|j| j.nullity),
        },
    )
    .map_err(|e| e.to_string())?;
    if args.svg {
        let state = LoopState::on_geodesic(s, &c, 256);
        write_loops_svg(&args.out.join("geodesic.svg"), s, &[&state]).map_err(|e| e.to_string())?;
    }
    println!("separating geodesic: length {:.8}, defect {:.2e}", c.length, c.defect);
    Ok(c)
}

fn birkhoff(args: &Args, config: &RunConfig, s: &ConeSurface) -> Result<(), String> {
    let c = sweep(args, config, s)?;
    let horizon = config.horizon_lengths * c.length;
    let mut sample = sample_annulus(s, &c, config.n_t, config.n_alpha, horizon);
    if let Err(e) = extend_boundary(s, &c, &mut sample) {
        eprintln!("boundary extension unavailable: {e}");
    }
    let rows: Vec<Vec<String>> = sample
        .nodes
        .iter()
        .map(|n| {
            vec![
                fmt_f64(n.t),
                fmt_f64(n.alpha),
                fmt_f64(n.t_prime),
                fmt_f64(n.alpha_prime),
                fmt_f64(n.return_length),
                n.jac_det.map(fmt_f64).unwrap_or_default(),
                format!("{:?}", n.status),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("annulus.csv"),
        &["t", "alpha", "t_prime", "alpha_prime", "return_length", "jac_det", "status"],
        &rows,
    )
    .map_err(|e| e.to_string())?;
    let (orbits, stats) = find_periodic_points(s, &c, &sample, config.max_period, horizon)
        .map_err(|e| e.to_string())?;
    let orbit_rows: Vec<Vec<String>> = orbits
        .iter()
        .map(|o| {
            vec![
                o.period.to_string(),
                fmt_f64(o.points[0].t),
                fmt_f64(o.points[0].alpha),
                fmt_f64(o.length),
                fmt_f64(o.geodesic.defect),
                o.is_iterate.to_string(),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("periodic_orbits.csv"),
        &["period", "t0", "alpha0", "length", "defect", "is_iterate"],
        &orbit_rows,
    )
    .map_err(|e| e.to_string())?;
    if args.svg {
        let colors = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];
        let drawn: Vec<(Vec<SurfPoint>, &str)> = orbits
            .iter()
            .enumerate()
            .map(|(i, o)| (o.geodesic.samples(s, 256), colors[i % colors.len()]))
            .collect();
        write_points_svg(&args.out.join("orbits.svg"), s, &drawn).map_err(|e| e.to_string())?;
    }
    println!(
        "annulus {}x{}: {} periodic orbits from {} seeds",
        config.n_t,
        config.n_alpha,
        orbits.len(),
        stats.seeds
    );
    for o in &orbits {
        println!(
            "  period {} length {:.8} defect {:.1e}{}",
            o.period,
            o.length,
            o.geodesic.defect,
            if o.is_iterate { " (iterate)" } else { "" }
        );
    }
    Ok(())
}

fn widest_parallel_geodesic(config: &RunConfig, s: &ConeSurface) -> Result<ClosedGeodesic, String> {
    let r = s
        .profile()
        .waist_r()
        .ok_or_else(|| format!("surface {:?} has no parallel geodesic", config.surface))?;
    find_closed_geodesic(s, SurfPoint::new(r, 0.0), FRAC_PI_2, std::f64::consts::TAU * s.warp(r).0)
        .map_err(|e| e.to_string())
}

fn run_cascade(args: &Args, config: &RunConfig, s: &ConeSurface) -> Result<(), String> {
    let c0 = widest_parallel_geodesic(config, s)?;
    let start_len = c0.length;
    let (chain, records) =
        cascade(s, c0, config.max_stages, config.fan_size, config.horizon_factor * s.len())
            .map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.length),
                r.index.to_string(),
                r.nullity.to_string(),
                r.separating.to_string(),
                r.conjugate_pair.to_string(),
            ]
        })
        .collect();
    write_csv(
        &args.out.join("cascade.csv"),
        &["length", "index", "nullity", "separating", "conjugate_pair"],
        &rows,
    )
    .map_err(|e| e.to_string())?;
    if args.svg {
        let states: Vec<LoopState> =
            chain.iter().map(|c| LoopState::on_geodesic(s, c, 256)).collect();
        let refs: Vec<&LoopState> = states.iter().collect();
        write_loops_svg(&args.out.join("cascade.svg"), s, &refs).map_err(|e| e.to_string())?;
    }
    println!("cascade from length {start_len:.8}:");
    for r in &records {
        println!(
            "  length {:.8} index {} nullity {} conjugate pair: {}",
            r.length, r.index, r.nullity, r.conjugate_pair
        );
    }
    Ok(())
}

fn relax(args: &Args, config: &RunConfig, s: &ConeSurface) -> Result<(), String> {
    let c = widest_parallel_geodesic(config, s)?;
    let k = if config.k > 0 { config.k } else { spindle::search::default_k(s, c.length) };
    let broken = BrokenLoop::from_geodesic(s, &c, k);
    let outcome = relax_broken(s, broken, RelaxMode::GradientDescent).map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct Out {
        k: usize,
        index: usize,
        nullity: usize,
        energy: String,
        length: String,
        degenerate_to_point: bool,
    }
    write_json(
        &args.out.join("relax.json"),
        &Out {
            k,
            index: outcome.index,
            nullity: outcome.nullity,
            energy: fmt_f64(outcome.energy),
            length: fmt_f64(outcome.length),
            degenerate_to_point: outcome.degenerate_to_point,
        },
    )
    .map_err(|e| e.to_string())?;
    println!(
        "relaxed k = {k}: length {:.8}, index {}, nullity {}",
        outcome.length, outcome.index, outcome.nullity
    );
    Ok(())
}

fn suite(args: &Args) -> Result<(), String> {
    let results = run_suite(&args.out);
    for r in &results {
        let mark = if r.passed { "pass" } else { "FAIL" };
        println!("[{mark}] {:>2}. {}: {}", r.id, r.name, r.detail);
    }
    write_json(&args.out.join("suite.json"), &results).map_err(|e| e.to_string())?;
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    Ok(())
}
