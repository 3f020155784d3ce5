//! Command-line front end: construction presets, evaluation, optimization,
//! diagnostics, parameter sweeps and SVG/CSV emission.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::constructions::{
    hex_perimeter, honeycomb, perturb, slab_partition, stretched_hex_domain, twoblock_competitor,
    wulff_tiling,
};
use crate::diagnostics;
use crate::energy::{evaluate_grid, evaluate_poly, EnergyModel, Mode, PerimeterKind};
use crate::error::{Error, Result};
use crate::functionals::{Anisotropy, Kernel};
use crate::geom::Vec2;
use crate::io;
use crate::lattice::Lattice;
use crate::optimizer::{minimize_grid, minimize_lattice, minimize_poly, OptimizerConfig, StepRule};
use crate::poly::PolyPartition;

#[derive(Parser, Debug)]
#[command(name = "peritile", about = "Periodic partition energies: construction, minimization, diagnostics")]
struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Optional TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all randomness in this run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// classical | l1 | hexagonal | nonlocal
    #[arg(long, default_value = "classical")]
    perimeter: String,
    /// Fractional order s for the nonlocal kernel.
    #[arg(long, default_value_t = 0.5)]
    nonlocal_s: f64,
    /// Truncation radius for the nonlocal kernel.
    #[arg(long, default_value_t = 4.0)]
    nonlocal_radius: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Penalization strength; constrained mode when absent.
    #[arg(long)]
    lambda: Option<f64>,
    /// Target volumes, comma separated; defaults to the state's stored targets.
    #[arg(long, value_delimiter = ',')]
    volumes: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a reference construction and write state file + SVG.
    Construct {
        /// honeycomb | stretched-hex | wulff | slab | twoblock
        preset: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        volumes: Option<Vec<f64>>,
        /// zd | hex | b1x,b1y,b2x,b2y (slab preset).
        #[arg(long)]
        lattice: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the energy of a state file; writes a per-cell CSV.
    Evaluate {
        state: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Gradient descent (polygonal) or label-flip descent (grid).
    Minimize {
        state: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Outer descent over the lattice basis with inner polygonal minimization.
    MinimizeLattice {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        opt: OptArgs,
        /// Initial lattice: zd | hex | b1x,b1y,b2x,b2y.
        #[arg(long, default_value = "zd")]
        lattice: String,
    },
    /// Regularity diagnostics report for a polygonal state.
    Diagnose {
        state: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Indecomposable components of every label of a grid state.
    Decompose { state: PathBuf },
    /// Energy of stretched-hex vs. the two-block competitor over a delta grid.
    SweepDelta {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.1, 0.2, 0.3, 0.4])]
        deltas: Vec<f64>,
        /// Also run gradient descent from perturbed stretched-hex starts.
        #[arg(long)]
        optimize: bool,
        #[arg(long, default_value_t = 3)]
        starts: usize,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Penalized minimization of a perturbed honeycomb over a lambda grid.
    SweepLambda {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0, 100.0])]
        lambdas: Vec<f64>,
        #[command(flatten)]
        opt: OptArgs,
    },
    /// Render a state file as a 3x3 periodic tiling.
    ExportSvg {
        state: PathBuf,
        #[arg(long)]
        junctions: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct OptArgs {
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol_grad: Option<f64>,
    #[arg(long)]
    tol_volume: Option<f64>,
    #[arg(long)]
    surgery_edge_min: Option<f64>,
    #[arg(long)]
    resample_interval: Option<usize>,
    #[arg(long)]
    resample_points: Option<usize>,
    #[arg(long)]
    anneal_temperature: Option<f64>,
    /// Fixed step size; backtracking line search when absent.
    #[arg(long)]
    fixed_step: Option<f64>,
}

/// Optional config-file values; unknown keys are rejected.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    seed: Option<u64>,
    max_iters: Option<usize>,
    tol_grad: Option<f64>,
    tol_volume: Option<f64>,
    surgery_edge_min: Option<f64>,
    resample_interval: Option<usize>,
    resample_points: Option<usize>,
    anneal_temperature: Option<f64>,
    fixed_step: Option<f64>,
}

fn resolve_config(file: &FileConfig, opt: &OptArgs, seed: u64) -> OptimizerConfig {
    let mut cfg = OptimizerConfig { seed, ..OptimizerConfig::default() };
    if let Some(v) = file.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = file.tol_grad {
        cfg.tol_grad = v;
    }
    if let Some(v) = file.tol_volume {
        cfg.tol_volume = v;
    }
    if let Some(v) = file.surgery_edge_min {
        cfg.surgery_edge_min = Some(v);
    }
    if let Some(v) = file.resample_interval {
        cfg.resample_interval = v;
    }
    if let Some(v) = file.resample_points {
        cfg.resample_points = v;
    }
    if let Some(v) = file.anneal_temperature {
        cfg.anneal_temperature = v;
    }
    if let Some(h) = file.fixed_step {
        cfg.step_rule = StepRule::Fixed(h);
    }
    if let Some(v) = opt.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = opt.tol_grad {
        cfg.tol_grad = v;
    }
    if let Some(v) = opt.tol_volume {
        cfg.tol_volume = v;
    }
    if let Some(v) = opt.surgery_edge_min {
        cfg.surgery_edge_min = Some(v);
    }
    if let Some(v) = opt.resample_interval {
        cfg.resample_interval = v;
    }
    if let Some(v) = opt.resample_points {
        cfg.resample_points = v;
    }
    if let Some(v) = opt.anneal_temperature {
        cfg.anneal_temperature = v;
    }
    if let Some(h) = opt.fixed_step {
        cfg.step_rule = StepRule::Fixed(h);
    }
    cfg
}

fn build_model(args: &ModelArgs, default_volumes: Vec<f64>) -> Result<EnergyModel> {
    let kind = match args.perimeter.as_str() {
        "classical" => PerimeterKind::Classical,
        "l1" => PerimeterKind::Anisotropic(Anisotropy::Ell1),
        "hexagonal" => PerimeterKind::Anisotropic(Anisotropy::Hexagonal),
        "nonlocal" => {
            PerimeterKind::Nonlocal(Kernel::new(args.nonlocal_s, args.nonlocal_radius)?)
        }
        other => {
            return Err(Error::InvalidParameter(format!("unknown perimeter kind {other:?}")))
        }
    };
    let mode = match args.lambda {
        Some(l) => Mode::Penalized { lambda: l },
        None => Mode::Constrained,
    };
    let volumes = args.volumes.clone().unwrap_or(default_volumes);
    EnergyModel::new(kind, args.mu, mode, volumes)
}

fn parse_lattice(spec: &str, volume: f64) -> Result<Lattice> {
    match spec {
        "zd" => Ok(Lattice::square(volume.sqrt())),
        "hex" => Ok(Lattice::hexagonal(volume)),
        other => {
            let parts: Vec<f64> = other
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("bad lattice entry {t:?}")))
                })
                .collect::<Result<_>>()?;
            if parts.len() != 4 {
                return Err(Error::InvalidParameter(
                    "lattice spec needs zd | hex | b1x,b1y,b2x,b2y".into(),
                ));
            }
            Lattice::from_cols_2d(Vec2::new(parts[0], parts[1]), Vec2::new(parts[2], parts[3]))
        }
    }
}

enum State {
    Poly(PolyPartition),
    Grid(crate::grid::GridPartition),
}

fn read_state(path: &Path) -> Result<State> {
    let text = std::fs::read_to_string(path)?;
    if text.starts_with(io::PARTITION_MAGIC) {
        Ok(State::Poly(io::partition_from_str(&text)?))
    } else if text.starts_with(io::GRID_MAGIC) {
        Ok(State::Grid(io::grid_from_str(&text)?))
    } else {
        Err(Error::Parse { line: 1, msg: "unrecognized state file header".into() })
    }
}

fn write_manifest(out_dir: &Path, cmd: &str, detail: toml::Table) -> Result<()> {
    let mut root = toml::Table::new();
    root.insert("command".into(), toml::Value::String(cmd.into()));
    root.insert("config".into(), toml::Value::Table(detail));
    std::fs::write(out_dir.join("manifest.toml"), toml::to_string_pretty(&root).unwrap())?;
    Ok(())
}

fn cfg_table(cfg: &OptimizerConfig, model: Option<&ModelArgs>, seed: u64) -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("seed".into(), toml::Value::Integer(seed as i64));
    t.insert("max_iters".into(), toml::Value::Integer(cfg.max_iters as i64));
    t.insert("tol_grad".into(), toml::Value::Float(cfg.tol_grad));
    t.insert("tol_volume".into(), toml::Value::Float(cfg.tol_volume));
    if let Some(e) = cfg.surgery_edge_min {
        t.insert("surgery_edge_min".into(), toml::Value::Float(e));
    }
    t.insert("resample_interval".into(), toml::Value::Integer(cfg.resample_interval as i64));
    t.insert("resample_points".into(), toml::Value::Integer(cfg.resample_points as i64));
    t.insert("anneal_temperature".into(), toml::Value::Float(cfg.anneal_temperature));
    match cfg.step_rule {
        StepRule::Fixed(h) => {
            t.insert("fixed_step".into(), toml::Value::Float(h));
        }
        StepRule::Backtracking { armijo, initial } => {
            t.insert("armijo".into(), toml::Value::Float(armijo));
            t.insert("initial_step".into(), toml::Value::Float(initial));
        }
    }
    if let Some(m) = model {
        t.insert("perimeter".into(), toml::Value::String(m.perimeter.clone()));
        t.insert("mu".into(), toml::Value::Float(m.mu));
        if let Some(l) = m.lambda {
            t.insert("lambda".into(), toml::Value::Float(l));
        }
        if m.perimeter == "nonlocal" {
            t.insert("nonlocal_s".into(), toml::Value::Float(m.nonlocal_s));
            t.insert("nonlocal_radius".into(), toml::Value::Float(m.nonlocal_radius));
        }
        if let Some(v) = &m.volumes {
            t.insert(
                "volumes".into(),
                toml::Value::Array(v.iter().map(|&x| toml::Value::Float(x)).collect()),
            );
        }
    }
    t
}

fn run_inner() -> Result<()> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap already prints its own message for --help/--version.
        let _ = e.print();
        Error::InvalidParameter("argument parsing failed".into())
    })?;
    std::fs::create_dir_all(&cli.out_dir)?;
    let file_cfg: FileConfig = match &cli.config {
        Some(path) => toml::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::InvalidParameter(format!("config file: {e}")))?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file_cfg.seed).unwrap_or(0);
    let out = &cli.out_dir;

    match &cli.cmd {
        Command::Construct { preset, n, volumes, lattice, delta, output } => {
            let default_name = format!("{preset}.partition");
            let path = output.clone().unwrap_or_else(|| out.join(default_name));
            let (p, extra): (PolyPartition, Option<String>) = match preset.as_str() {
                "honeycomb" => {
                    let n = n.ok_or_else(|| Error::InvalidParameter("--n required".into()))?;
                    (honeycomb(n)?, None)
                }
                "stretched-hex" => {
                    let v = volumes
                        .clone()
                        .ok_or_else(|| Error::InvalidParameter("--volumes required".into()))?;
                    (stretched_hex_domain(&v)?, None)
                }
                "wulff" => {
                    let v = volumes
                        .clone()
                        .ok_or_else(|| Error::InvalidParameter("--volumes required".into()))?;
                    (wulff_tiling(&Anisotropy::Ell1, &v)?, None)
                }
                "slab" => {
                    let v = volumes
                        .clone()
                        .ok_or_else(|| Error::InvalidParameter("--volumes required".into()))?;
                    let spec = lattice.as_deref().unwrap_or("zd");
                    let lat = parse_lattice(spec, v.iter().sum())?;
                    (slab_partition(&lat, &v)?, None)
                }
                "twoblock" => {
                    let n = n.ok_or_else(|| Error::InvalidParameter("--n required".into()))?;
                    let d =
                        delta.ok_or_else(|| Error::InvalidParameter("--delta required".into()))?;
                    let tb = twoblock_competitor(n, d)?;
                    let note = format!(
                        "measured_energy {}\nleading_term {}\nc_measured {}\nupper_bound {}\n",
                        io::fmt_f64(tb.measured_energy),
                        io::fmt_f64(tb.leading_term),
                        io::fmt_f64(tb.c_measured),
                        io::fmt_f64(tb.upper_bound)
                    );
                    (tb.partition, Some(note))
                }
                other => {
                    return Err(Error::InvalidParameter(format!("unknown preset {other:?}")))
                }
            };
            io::write_partition(&path, &p)?;
            std::fs::write(path.with_extension("svg"), io::partition_svg(&p, false)?)?;
            let model = EnergyModel::constrained(PerimeterKind::Classical, 0.0, p.target_volumes())?;
            let e = evaluate_poly(&p, &model)?;
            println!("wrote {} (cells {}, energy {})", path.display(), p.cell_count(), io::fmt_f64(e.total));
            if let Some(note) = extra {
                std::fs::write(path.with_extension("txt"), note)?;
            }
            let mut t = toml::Table::new();
            t.insert("preset".into(), toml::Value::String(preset.clone()));
            t.insert("seed".into(), toml::Value::Integer(seed as i64));
            write_manifest(out, "construct", t)?;
        }
        Command::Evaluate { state, model } => {
            let e = match read_state(state)? {
                State::Poly(p) => build_model(model, p.target_volumes())
                    .and_then(|m| evaluate_poly(&p, &m))?,
                State::Grid(g) => {
                    let m = build_model(model, g.volumes())?;
                    evaluate_grid(&g, &m)?
                }
            };
            std::fs::write(out.join("energy.csv"), io::breakdown_csv(&e))?;
            println!(
                "total {}  half_sum_perimeters {}  mu_term {}  penalty {}  residual {}",
                io::fmt_f64(e.total),
                io::fmt_f64(e.half_sum_perimeters),
                io::fmt_f64(e.mu_term),
                io::fmt_f64(e.penalty_term),
                io::fmt_f64(e.constraint_residual)
            );
            write_manifest(out, "evaluate", cfg_table(&OptimizerConfig::default(), Some(model), seed))?;
        }
        Command::Minimize { state, model, opt, output } => {
            let cfg = resolve_config(&file_cfg, opt, seed);
            match read_state(state)? {
                State::Poly(p) => {
                    let m = build_model(model, p.target_volumes())?;
                    let (s, trace) = minimize_poly(&p, &m, &cfg)?;
                    let path = output.clone().unwrap_or_else(|| out.join("minimized.partition"));
                    io::write_partition(&path, &s)?;
                    std::fs::write(out.join("trace.csv"), io::trace_csv(&trace))?;
                    std::fs::write(path.with_extension("svg"), io::partition_svg(&s, true)?)?;
                    println!(
                        "final energy {} ({}, {} iterates)",
                        io::fmt_f64(trace.final_energy()),
                        trace.termination,
                        trace.entries.len()
                    );
                }
                State::Grid(g) => {
                    let m = build_model(model, g.volumes())?;
                    let (s, trace) = minimize_grid(&g, &m, &cfg)?;
                    let path = output.clone().unwrap_or_else(|| out.join("minimized.grid"));
                    io::write_grid(&path, &s)?;
                    std::fs::write(out.join("trace.csv"), io::trace_csv(&trace))?;
                    std::fs::write(path.with_extension("svg"), io::grid_svg(&s))?;
                    println!(
                        "final energy {} ({}, {} passes)",
                        io::fmt_f64(trace.final_energy()),
                        trace.termination,
                        trace.entries.len()
                    );
                }
            }
            write_manifest(out, "minimize", cfg_table(&cfg, Some(model), seed))?;
        }
        Command::MinimizeLattice { model, opt, lattice } => {
            let cfg = resolve_config(&file_cfg, opt, seed);
            let volumes = model.volumes.clone().unwrap_or_else(|| vec![1.0]);
            let init = parse_lattice(lattice, volumes.iter().sum())?;
            let m = build_model(model, volumes)?;
            let (lat, s, trace) = minimize_lattice(&init, &m, &cfg)?;
            io::write_partition(&out.join("minimized.partition"), &s)?;
            std::fs::write(out.join("trace.csv"), io::trace_csv(&trace))?;
            std::fs::write(out.join("minimized.svg"), io::partition_svg(&s, true)?)?;
            let (b1, b2) = lat.basis2();
            println!(
                "final energy {}  lattice ({}, {}) ({}, {})",
                io::fmt_f64(trace.final_energy()),
                io::fmt_f64(b1.x),
                io::fmt_f64(b1.y),
                io::fmt_f64(b2.x),
                io::fmt_f64(b2.y)
            );
            write_manifest(out, "minimize-lattice", cfg_table(&cfg, Some(model), seed))?;
        }
        Command::Diagnose { state, model, trials } => {
            let State::Poly(p) = read_state(state)? else {
                return Err(Error::InvalidParameter("diagnose expects a polygonal state".into()));
            };
            let m = build_model(model, p.target_volumes())?;
            let rep = diagnostics::report(&p, &m, *trials, seed)?;
            let mut rows: Vec<Vec<String>> = Vec::new();
            rows.push(vec!["junction_angle_max_dev_deg".into(), io::fmt_f64(rep.junctions.max_dev_deg)]);
            rows.push(vec![
                "degree_violations".into(),
                rep.junctions.degree_violations.len().to_string(),
            ]);
            rows.push(vec!["arc_rms_max".into(), io::fmt_f64(rep.arc_rms_max)]);
            if let Some(c) = rep.curvature_sum_max {
                rows.push(vec!["curvature_sum_max".into(), io::fmt_f64(c)]);
            }
            if let Some(r) = rep.pressure_residual {
                rows.push(vec!["pressure_residual".into(), io::fmt_f64(r)]);
            }
            rows.push(vec!["diameter_ratio_max".into(), io::fmt_f64(rep.diameter.diameter_ratio_max)]);
            rows.push(vec!["domain_diameter".into(), io::fmt_f64(rep.diameter.domain_diameter)]);
            rows.push(vec!["two_r_g".into(), io::fmt_f64(rep.diameter.two_r_g)]);
            rows.push(vec!["probe_trials".into(), rep.probe.trials.to_string()]);
            rows.push(vec!["probe_worst_decrease".into(), io::fmt_f64(rep.probe.worst_decrease)]);
            let text = io::csv(&["metric", "value"], &rows);
            std::fs::write(out.join("diagnostics.csv"), &text)?;
            std::fs::write(out.join("diagnostics.svg"), io::partition_svg(&p, true)?)?;
            print!("{text}");
            write_manifest(out, "diagnose", cfg_table(&OptimizerConfig::default(), Some(model), seed))?;
        }
        Command::Decompose { state } => {
            let State::Grid(g) = read_state(state)? else {
                return Err(Error::InvalidParameter("decompose expects a grid state".into()));
            };
            let mut rows = Vec::new();
            for label in 1..=g.num_labels as u32 {
                let d = g.decompose(label)?;
                rows.push(vec![
                    label.to_string(),
                    d.components.len().to_string(),
                    g.is_simple(label)?.to_string(),
                ]);
            }
            let (simple, merges) = g.merge_to_simple()?;
            io::write_grid(&out.join("simple.grid"), &simple)?;
            let text = io::csv(&["label", "components", "simple"], &rows);
            std::fs::write(out.join("decompose.csv"), &text)?;
            print!("{text}");
            println!("merges applied: {merges}");
            let mut t = toml::Table::new();
            t.insert("seed".into(), toml::Value::Integer(seed as i64));
            write_manifest(out, "decompose", t)?;
        }
        Command::SweepDelta { n, deltas, optimize, starts, opt } => {
            let cfg = resolve_config(&file_cfg, opt, seed);
            // Half the N^2 volumes at 1-delta, half at 1+delta; the stretch is
            // affine in v, so the stretched-hex energy equals the honeycomb value.
            let honey = (*n as f64).powi(2) / 2.0 * hex_perimeter();
            let mut rows = Vec::new();
            for &d in deltas {
                let (measured, leading, upper) = if d == 0.0 {
                    (honey, honey, f64::NAN)
                } else {
                    let tb = twoblock_competitor(*n, d)?;
                    (tb.measured_energy, tb.leading_term, tb.upper_bound)
                };
                let optimized = if *optimize {
                    let half = n * n / 2;
                    let mut vols = vec![1.0 - d; half];
                    vols.extend(std::iter::repeat(1.0 + d).take(n * n - half));
                    let base = stretched_hex_domain(&vols)?;
                    let m = EnergyModel::constrained(
                        PerimeterKind::Classical,
                        0.0,
                        base.target_volumes(),
                    )?;
                    let mut best = f64::INFINITY;
                    for k in 0..*starts {
                        let init = perturb(&base, 0.02, seed.wrapping_add(k as u64))?;
                        let (_, trace) = minimize_poly(&init, &m, &cfg)?;
                        best = best.min(trace.final_energy());
                    }
                    best
                } else {
                    f64::NAN
                };
                rows.push(vec![
                    io::fmt_f64(d),
                    io::fmt_f64(honey),
                    io::fmt_f64(measured),
                    io::fmt_f64(leading),
                    io::fmt_f64(upper),
                    io::fmt_f64(optimized),
                    (leading < honey).to_string(),
                ]);
            }
            let text = io::csv(
                &["delta", "stretched_hex_energy", "competitor_energy", "competitor_leading", "competitor_bound", "optimized_energy", "competitor_beats_honeycomb"],
                &rows,
            );
            std::fs::write(out.join("sweep_delta.csv"), &text)?;
            print!("{text}");
            let mut t = cfg_table(&cfg, None, seed);
            t.insert("n".into(), toml::Value::Integer(*n as i64));
            t.insert("optimize".into(), toml::Value::Boolean(*optimize));
            t.insert("starts".into(), toml::Value::Integer(*starts as i64));
            write_manifest(out, "sweep-delta", t)?;
        }
        Command::SweepLambda { n, lambdas, opt } => {
            let cfg = resolve_config(&file_cfg, opt, seed);
            let hc = honeycomb(*n)?;
            let init = perturb(&hc, 0.03, seed)?;
            let mut rows = Vec::new();
            for &l in lambdas {
                let m = EnergyModel::new(
                    PerimeterKind::Classical,
                    0.0,
                    Mode::Penalized { lambda: l },
                    vec![1.0; *n],
                )?;
                let (s, trace) = minimize_poly(&init, &m, &cfg)?;
                let e = evaluate_poly(&s, &m)?;
                rows.push(vec![
                    io::fmt_f64(l),
                    io::fmt_f64(e.total),
                    io::fmt_f64(e.penalty_term),
                    io::fmt_f64(e.constraint_residual),
                    trace.termination.clone(),
                ]);
            }
            let text = io::csv(
                &["lambda", "final_energy", "penalty", "volume_residual", "termination"],
                &rows,
            );
            std::fs::write(out.join("sweep_lambda.csv"), &text)?;
            print!("{text}");
            write_manifest(out, "sweep-lambda", cfg_table(&cfg, None, seed))?;
        }
        Command::ExportSvg { state, junctions, output } => {
            let svg = match read_state(state)? {
                State::Poly(p) => io::partition_svg(&p, *junctions)?,
                State::Grid(g) => io::grid_svg(&g),
            };
            let path = output.clone().unwrap_or_else(|| out.join("state.svg"));
            std::fs::write(&path, svg)?;
            println!("wrote {}", path.display());
            let mut t = toml::Table::new();
            t.insert("seed".into(), toml::Value::Integer(seed as i64));
            write_manifest(out, "export-svg", t)?;
        }
    }
    Ok(())
}

/// Entry point; maps errors to exit codes (0 ok, 2 invalid input, 3 numerical).
pub fn run() -> i32 {
    match run_inner() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numerical(_) => 3,
                _ => 2,
            }
        }
    }
}
