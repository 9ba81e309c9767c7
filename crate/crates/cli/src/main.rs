//! `kinks`: run scenario pipelines and single computations from the shell.
//!
//! Every command writes into `$KINKS_OUT/<name>` (default `kinks-out/`) unless
//! `--out` is given, and exits with status 1 when any metric row fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use kinks::blowup;
use kinks::front::{compute_front, compute_interaction_coefficients, fit_tails};
use kinks::ghca::{self, CollisionEvent};
use kinks::pbvp;
use kinks::reduced_ode::{integrate_eta, integrate_normalized, NormalizedDistances, Perturbation, ReducedSystem};
use kinks::Nonlinearity;
use kinks_cli::compare::{compare_collision_sequences, ghca_sequence, SequenceEvent, SpaceMap};
use kinks_cli::config::ExperimentConfig;
use kinks_cli::output::{output_root, OutputDir};
use kinks_cli::report::{MetricRow, Report};
use kinks_cli::scenarios::{default_config, output_dir_for, run_scenario, SCENARIOS};

#[derive(Parser)]
#[command(name = "kinks", version, about = "Kink/antikink dynamics of the excitable theta equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the available scenarios.
    List,
    /// Print the full default configuration of a scenario as TOML.
    Config { id: String },
    /// Run one or more scenarios.
    Scenario(ScenarioArgs),
    /// Automaton runs.
    #[command(subcommand)]
    Ghca(GhcaCmd),
    /// Single traveling kink.
    #[command(subcommand)]
    Front(FrontCmd),
    /// PDE evolution (the `pde` scenario with a user configuration).
    #[command(subcommand)]
    Pde(PdeCmd),
    /// Reduced ODE systems.
    #[command(subcommand)]
    Ode(OdeCmd),
    /// Blow-up analysis of the distance system.
    #[command(subcommand)]
    Blowup(BlowupCmd),
    /// Periodic traveling waves.
    #[command(subcommand)]
    Pbvp(PbvpCmd),
    /// Compare automaton and PDE collision sequences written by `ghca run` and `pde run`.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario ids; see `kinks list`.
    ids: Vec<String>,
    /// Run every scenario.
    #[arg(long, conflicts_with = "ids")]
    all: bool,
    /// TOML file merged over the scenario defaults (single scenario only).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenarios run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output root, overriding `KINKS_OUT`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OutArg {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GhcaCmd {
    /// Symmetric pulse pairs colliding in the middle of a resting domain.
    Run {
        #[arg(long, default_value_t = 2)]
        e: u8,
        #[arg(long, default_value_t = 4)]
        r: u8,
        /// Gaps between consecutive pulses, from the inside out.
        #[arg(long, value_delimiter = ',', default_values_t = [12, 8, 8, 8])]
        gaps: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        margin: usize,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum FrontCmd {
    /// Speed, tail rates, tail amplitudes and interaction coefficients.
    Compute {
        #[arg(long, default_value_t = 0.2)]
        f0: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum PdeCmd {
    /// Run the PDE; positions, events and the final field are written out.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OdeSystem {
    /// Kink positions `η_j` driven by the tail interaction.
    Eta,
    /// Normalized distances `δ̃_j`.
    Normalized,
}

#[derive(Subcommand)]
enum OdeCmd {
    Run {
        #[arg(long, value_enum, default_value_t = OdeSystem::Normalized)]
        system: OdeSystem,
        /// Initial state: positions (decreasing) for `eta`, distances for `normalized`.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        init: Vec<f64>,
        #[arg(long, default_value_t = 1e4)]
        t_end: f64,
        #[arg(long, default_value_t = 0.2)]
        f0: f64,
        /// Perturbation size for the normalized system; 0 disables it.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum BlowupCmd {
    /// Enumerate the equilibria of the angular flow.
    Census {
        #[arg(long, default_value_t = 6)]
        max_n: usize,
        #[command(flatten)]
        out: OutArg,
    },
    /// Spectrum of the angular linearization at `E`.
    Eig {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand)]
enum PbvpCmd {
    /// Periodic wave speed `a(ℓ, j)` and profile.
    Solve {
        #[arg(long)]
        ell: f64,
        #[arg(long, default_value_t = 1)]
        j: u32,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 0.2)]
        f0: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Periodic PDE run from unequally spaced kinks (the `fig6` scenario with a user configuration).
    Washout {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct CompareArgs {
    /// `ghca_events.json` from `kinks ghca run`.
    #[arg(long)]
    ghca: PathBuf,
    /// `events.json` from `kinks pde run`.
    #[arg(long)]
    pde: PathBuf,
    /// Automaton cell placed at `x = 0`.
    #[arg(long)]
    origin_cell: f64,
    /// Single-front speed; computed for `--f0` when omitted.
    #[arg(long)]
    front_speed: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    f0: f64,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for s in SCENARIOS {
                println!("{:<12} {}", s.id, s.summary);
            }
            Ok(true)
        }
        Command::Config { id } => {
            print!("{}", default_config(&id)?.to_toml());
            Ok(true)
        }
        Command::Scenario(args) => scenario_cmd(args),
        Command::Ghca(GhcaCmd::Run { e, r, gaps, margin, steps, out }) => {
            let mut cfg = default_config("fig1a")?;
            cfg.ghca = kinks_cli::config::GhcaConfig { e, r, gaps, margin, steps };
            let mut dir = out_dir(out, "ghca")?;
            let (_, orbit, seq) = kinks_cli::scenarios::ghca_four_pairs(&cfg)?;
            let rows: Vec<Vec<String>> = orbit
                .iter()
                .enumerate()
                .map(|(s, c)| std::iter::once(s.to_string()).chain(c.cells.iter().map(|v| v.to_string())).collect())
                .collect();
            let mut header = vec!["s".to_string()];
            header.extend((0..orbit[0].len()).map(|i| format!("c{i}")));
            dir.write_csv("orbit.csv", &header.iter().map(String::as_str).collect::<Vec<_>>(), rows)?;
            dir.write_json("ghca_events.json", &seq.events)?;
            for ev in &seq.events {
                println!("collision at cell {} step {} (pulses {} and {})", ev.p, ev.s, ev.right_mover, ev.left_mover);
            }
            let pulses = ghca::identify_pulses(&orbit[0]);
            println!("{} pulses, {} events, output in {}", pulses.len(), seq.events.len(), dir.path().display());
            Ok(true)
        }
        Command::Front(FrontCmd::Compute { f0, out }) => {
            let nl = Nonlinearity::new(f0)?;
            let p = compute_front(&nl)?;
            let tails = fit_tails(&p);
            let coeffs = compute_interaction_coefficients(&p);
            let mut dir = out_dir(out, "front")?;
            dir.write_json("front.json", &serde_json::json!({
                "f0": f0, "c": p.c, "mu": p.mu, "lambda": p.lambda,
                "a_plus": p.a_plus, "a_minus": p.a_minus, "capital_lambda": p.capital_lambda,
                "a_l": p.a_l, "a_r": p.a_r, "tails": tails, "coefficients": coeffs,
            }))?;
            let rows: Vec<Vec<f64>> = (0..p.len()).map(|k| vec![p.z(k), p.values[k], p.slopes[k]]).collect();
            dir.write_table("profile.csv", &["z", "phi", "phi_prime"], &rows)?;
            println!("c = {:.10}\nmu = {:.10}\nlambda = {:.10}", p.c, p.mu, p.lambda);
            println!("a_L = {:.8}\na_R = {:.8}\nLambda = {:.8}", p.a_l, p.a_r, p.capital_lambda);
            Ok(true)
        }
        Command::Pde(PdeCmd::Run { config, out }) => config_scenario("pde", config, out),
        Command::Pbvp(PbvpCmd::Washout { config, out }) => config_scenario("fig6", config, out),
        Command::Ode(OdeCmd::Run { system, init, t_end, f0, epsilon, amplitude, seed, out }) => {
            let traj = match system {
                OdeSystem::Eta => {
                    let front = compute_front(&Nonlinearity::new(f0)?)?;
                    integrate_eta(&ReducedSystem::from_front(init.len(), &front)?, &init, t_end)?
                }
                OdeSystem::Normalized => {
                    let nd = if epsilon > 0.0 {
                        NormalizedDistances::perturbed(init.clone(), epsilon, Perturbation::random(init.len(), amplitude, seed))
                    } else {
                        NormalizedDistances::unperturbed(init.clone())
                    };
                    integrate_normalized(&nd, t_end)?
                }
            };
            let mut dir = out_dir(out, "ode")?;
            let mut header = vec!["t".to_string()];
            header.extend((1..=init.len()).map(|j| format!("y{j}")));
            let rows: Vec<Vec<f64>> =
                traj.times.iter().zip(&traj.states).map(|(t, s)| std::iter::once(*t).chain(s.iter().copied()).collect()).collect();
            dir.write_table("trajectory.csv", &header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)?;
            if let Some(b) = &traj.breach {
                println!("stopped early: {b:?}");
            }
            println!("t = {} state = {:?}", traj.times.last().unwrap_or(&0.0), traj.last());
            Ok(traj.breach.is_none())
        }
        Command::Blowup(BlowupCmd::Census { max_n, out }) => {
            let mut cfg = default_config("census")?;
            cfg.blowup.max_n = max_n;
            run_one(&cfg, out_dir(out, "census")?)
        }
        Command::Blowup(BlowupCmd::Eig { n, out }) => {
            let rep = blowup::eigenvalues_at_e(n)?;
            let mut dir = out_dir(out, "eig")?;
            dir.write_json("eigen.json", &rep)?;
            println!("beta = {}", blowup::beta(n));
            for z in &rep.tangential {
                println!("tangential {:.12} {:+.3e}i", z.re, z.im);
            }
            println!("transverse {:.12}", rep.transverse);
            Ok(true)
        }
        Command::Pbvp(PbvpCmd::Solve { ell, j, tol, f0, out }) => {
            let nl = Nonlinearity::new(f0)?;
            let sol = pbvp::solve_speed(&nl, ell, j, tol)?;
            let mut dir = out_dir(out, "pbvp")?;
            dir.write_json("sol.json", &sol)?;
            let rows: Vec<Vec<f64>> = (0..sol.profile.len()).map(|i| vec![sol.z(i), sol.profile[i]]).collect();
            dir.write_table("profile.csv", &["z", "u"], &rows)?;
            println!("a({ell}, {j}) = {:.12}", sol.a);
            println!("energy residual = {:.3e}, bound = {:.6}", sol.energy_residual, sol.speed_bound(&nl));
            Ok(true)
        }
        Command::Compare(args) => compare_cmd(args),
    }
}

fn out_dir(arg: OutArg, name: &str) -> Result<OutputDir> {
    OutputDir::create(arg.out.unwrap_or_else(|| output_root().join(name)))
}

fn load_config(id: &str, file: Option<&Path>) -> Result<ExperimentConfig> {
    let defaults = default_config(id)?;
    let Some(file) = file else { return Ok(defaults) };
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    // A file may name its own scenario; it then selects the defaults.
    let named = text.parse::<toml::Table>().ok().and_then(|t| t.get("scenario").and_then(|v| v.as_str().map(str::to_string)));
    let defaults = match named {
        Some(s) if s != id => default_config(&s)?,
        _ => defaults,
    };
    Ok(ExperimentConfig::from_toml_over(&defaults, &text)?)
}

fn config_scenario(id: &str, config: Option<PathBuf>, out: OutArg) -> Result<bool> {
    let cfg = load_config(id, config.as_deref())?;
    let dir = match out.out {
        Some(p) => OutputDir::create(p)?,
        None => OutputDir::create(output_dir_for(&cfg, &output_root()))?,
    };
    run_one(&cfg, dir)
}

fn run_one(cfg: &ExperimentConfig, mut dir: OutputDir) -> Result<bool> {
    let report = run_scenario(cfg, &mut dir)?;
    print_report(&report, dir.path());
    Ok(report.pass)
}

fn print_report(report: &Report, dir: &Path) {
    println!("== {} ({})", report.scenario, if report.pass { "PASS" } else { "FAIL" });
    for row in &report.rows {
        println!("   {}", row.describe());
    }
    println!("   output: {}", dir.display());
}

fn scenario_cmd(args: ScenarioArgs) -> Result<bool> {
    let ids: Vec<String> = if args.all { SCENARIOS.iter().map(|s| s.id.to_string()).collect() } else { args.ids };
    if ids.is_empty() {
        bail!("name at least one scenario or pass --all; see `kinks list`");
    }
    if args.config.is_some() && ids.len() != 1 {
        bail!("--config applies to a single scenario");
    }
    let configs: Vec<ExperimentConfig> = ids.iter().map(|id| load_config(id, args.config.as_deref())).collect::<Result<_>>()?;
    let root = args.out.unwrap_or_else(output_root);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let results: Vec<(String, Result<(Report, PathBuf)>)> = pool.install(|| {
        configs
            .par_iter()
            .map(|cfg| {
                let r = OutputDir::create(output_dir_for(cfg, &root)).and_then(|mut dir| {
                    let rep = run_scenario(cfg, &mut dir)?;
                    Ok((rep, dir.path().to_path_buf()))
                });
                (cfg.scenario.clone(), r)
            })
            .collect()
    });
    let mut ok = true;
    for (id, r) in results {
        match r {
            Ok((rep, dir)) => {
                ok &= rep.pass;
                print_report(&rep, &dir);
            }
            Err(e) => {
                ok = false;
                println!("== {id} (ERROR) {e:#}");
            }
        }
    }
    Ok(ok)
}

#[derive(Deserialize)]
struct PdeEventRecord {
    #[serde(rename = "type")]
    kind: String,
    t: f64,
    x: f64,
    level: i64,
}

fn compare_cmd(args: CompareArgs) -> Result<bool> {
    let ghca_events: Vec<CollisionEvent> = serde_json::from_str(&std::fs::read_to_string(&args.ghca)?)
        .with_context(|| format!("parsing {}", args.ghca.display()))?;
    let pde_events: Vec<PdeEventRecord> =
        serde_json::from_str(&std::fs::read_to_string(&args.pde)?).with_context(|| format!("parsing {}", args.pde.display()))?;
    let pairs = ghca_events.len();
    let g = ghca_sequence(&ghca::CollisionSequence { events: ghca_events }, pairs);
    let p: Vec<SequenceEvent> = pde_events
        .iter()
        .filter(|e| e.kind == "annihilation")
        .map(|e| SequenceEvent { pair: e.level as usize, position: e.x, time: e.t })
        .collect();
    let front_speed = match args.front_speed {
        Some(c) => c,
        None => compute_front(&Nonlinearity::new(args.f0)?)?.c,
    };
    let cmp = compare_collision_sequences(&g, &p, &SpaceMap { origin_cell: args.origin_cell, front_speed });
    println!("{}", serde_json::to_string_pretty(&cmp)?);
    let rows = [
        MetricRow::flag("orderings_match", cmp.ordering_match && cmp.structural.is_none()),
        MetricRow::at_most("max_position_error_in_cells", cmp.max_position_error / cmp.cell_width, 1.0),
    ];
    for r in &rows {
        println!("{}", r.describe());
    }
    Ok(rows.iter().all(|r| r.pass))
}
