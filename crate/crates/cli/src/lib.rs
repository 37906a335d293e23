//! Subcommands of the `hysterix` tool as plain functions. Each takes its
//! parsed arguments and a writer for standard output and returns the exit
//! status; diagnostics go to standard error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use hysterix_core::backstepping::{Attractor, GlobalController, Variant};
use hysterix_core::config::{RunConfig, Scenario};
use hysterix_core::expr::parse;
use hysterix_core::hybrid::{simulate, simulate_batch, HybridArc};
use hysterix_core::hysteresis::{choose_a_for_theorem, ASearch, AChoice};
use hysterix_core::io::{write_plot_data, write_trajectory_csv, Diagnostics, RunSummary};
use hysterix_core::verify::verify_scenario;
use hysterix_core::Error;

pub const SEED_ENV: &str = "HYSTERIX_SEED";

/// Process exit status. The numeric values are part of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    CheckFailed = 1,
    Config = 2,
    Runtime = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Parser)]
#[command(name = "hysterix", version, about = "Hybrid local/global feedback synthesis, verification and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate every initial condition of a configuration.
    Simulate(CommonArgs),
    /// Check the standing assumptions by sampling and print a margin report.
    Verify(CommonArgs),
    /// Compute the global feedback's constants and print them.
    Synthesize(CommonArgs),
    /// Run the built-in worked example and write its trajectory.
    ReproducePaper(ReproduceArgs),
    /// Parse expressions (or every expression of a configuration) and report errors.
    ParseCheck(ParseCheckArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Sampling seed; the HYSTERIX_SEED environment variable takes precedence.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Samples per verified domain.
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
    /// Override a configuration field, e.g. `--set local.v_ell=1e-5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Value of HYSTERIX_SEED, filled in by the binary.
    #[arg(skip)]
    pub env_seed: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReproduceArgs {
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Override a field of the built-in configuration
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParseCheckArgs {
    /// Expressions to lint.
    pub exprs: Vec<String>,
    /// Comma-separated variable names for the positional expressions.
    #[arg(long, default_value = "x1,x2,u")]
    pub vars: String,
    /// Also parse every expression of this configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Exit {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Synthesize(a) => cmd_synthesize(&a, out),
        Command::ReproducePaper(a) => cmd_reproduce_paper(&a, out),
        Command::ParseCheck(a) => cmd_parse_check(&a, out),
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Expr(_) | Error::InvalidModel(_) | Error::InvalidParameter(_) | Error::Json(_) | Error::Io(_)
    )
}

fn fail(e: &Error, default: Exit) -> Exit {
    eprintln!("error: {e}");
    if is_config_error(e) {
        Exit::Config
    } else {
        default
    }
}

/// `--seed` unless the environment variable is set.
pub fn effective_seed(flag: Option<u64>, env: Option<&str>) -> Result<Option<u64>, Error> {
    match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(text) => text
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidParameter(format!("{SEED_ENV}={text:?} is not an unsigned integer"))),
        None => Ok(flag),
    }
}

pub fn load_config(args: &CommonArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load_with_overrides(args.config.as_deref(), &args.set)?;
    if let Some(seed) = effective_seed(args.seed, args.env_seed.as_deref())? {
        cfg.verify.seed = seed;
        cfg.synthesis.zeta.seed = seed;
    }
    if let Some(n) = args.samples {
        if n == 0 {
            return Err(Error::InvalidParameter("--samples must be positive".into()));
        }
        cfg.verify.samples = n;
    }
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

fn load_scenario(args: &CommonArgs) -> Result<Scenario, Error> {
    load_config(args)?.build()
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_arc_files(
    s: &Scenario,
    g: Option<&GlobalController>,
    arc: &HybridArc,
    csv: &Path,
    summary: &Path,
) -> Result<(), Error> {
    let diag = Diagnostics {
        certificate: s.certificate.as_deref(),
        k: g.map(|g| g.params().k),
        local: s.local.as_deref(),
    };
    let mut w = create(csv)?;
    write_trajectory_csv(&mut w, arc, s.plant.dim(), &diag)?;
    w.flush()?;
    let mut w = create(summary)?;
    serde_json::to_writer_pretty(&mut w, &RunSummary::from_arc(arc))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn fmt_state(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(", "))
}

fn print_jumps(out: &mut dyn Write, arc: &HybridArc, s: &Scenario) -> std::io::Result<()> {
    writeln!(out, "  {:>22} {:>3} {:>8} {:>22}", "t", "j", "q", "V_ell")?;
    for jump in &arc.jumps {
        let v = s
            .local
            .as_ref()
            .and_then(|l| l.value(&jump.x).ok())
            .unwrap_or(f64::NAN);
        writeln!(
            out,
            "  {:>22.16e} {:>3} {:>8} {:>22.16e}",
            jump.t,
            jump.j,
            format!("{} -> {}", jump.q_from, jump.q_to),
            v
        )?;
    }
    Ok(())
}

pub fn cmd_simulate(args: &CommonArgs, out: &mut dyn Write) -> Exit {
    let s = match load_scenario(args) {
        Ok(s) => s,
        Err(e) => return fail(&e, Exit::Config),
    };
    let cfg = &s.config;
    if cfg.initial_conditions.is_empty() {
        eprintln!("error: no initial conditions to simulate");
        return Exit::Config;
    }
    let (ctrl, g) = match s.controller() {
        Ok(c) => c,
        Err(e) => return fail(&e, Exit::Runtime),
    };
    if let Some(g) = &g {
        for w in g.warnings() {
            eprintln!("warning: {w}");
        }
    }
    let initial = cfg.initial_states();
    let arcs = simulate_batch(&s.plant, ctrl.as_ref(), &initial, &cfg.integrator);
    let mut status = Exit::Ok;
    let _ = writeln!(out, "{:>4} {:<28} {:>2} {:>10} {:>6} {:>14}", "ic", "x0", "q0", "end", "jumps", "t_final");
    for (i, ((x0, q0), arc)) in initial.iter().zip(arcs).enumerate() {
        let arc = match arc {
            Ok(a) => a,
            Err(e) => {
                status = fail(&e, Exit::Runtime);
                continue;
            }
        };
        if let Err(msg) = arc.validate() {
            eprintln!("error: initial condition {i}: malformed solution record: {msg}");
            status = Exit::Runtime;
        }
        let stem = format!("{}_{i:03}", cfg.output.prefix);
        let csv = cfg.output.dir.join(format!("{stem}.csv"));
        let summary = cfg.output.dir.join(format!("{stem}.json"));
        if let Err(e) = write_arc_files(&s, g.as_deref(), &arc, &csv, &summary) {
            return fail(&e, Exit::Runtime);
        }
        let _ = writeln!(
            out,
            "{i:>4} {:<28} {:>2} {:>10} {:>6} {:>14.6e}",
            fmt_state(x0),
            q0,
            arc.termination.label(),
            arc.jumps.len(),
            arc.t_final()
        );
        if !arc.jumps.is_empty() {
            let _ = print_jumps(out, &arc, &s);
        }
        if !arc.termination.is_success() {
            if let hysterix_core::hybrid::Termination::Error(msg) = &arc.termination {
                eprintln!("error: initial condition {i}: {msg}");
            }
            status = Exit::Runtime;
        }
    }
    let _ = writeln!(out, "wrote {}", cfg.output.dir.display());
    status
}

pub fn cmd_verify(args: &CommonArgs, out: &mut dyn Write) -> Exit {
    let s = match load_scenario(args) {
        Ok(s) => s,
        Err(e) => return fail(&e, Exit::Config),
    };
    if let Some(cert) = &s.certificate {
        let c1 = s.params.get("c1").copied().filter(|_| s.config.plant.is_preset());
        let _ = writeln!(
            out,
            "certificate: epsilon = {}, M = {:e}{}",
            cert.epsilon(),
            cert.m(),
            c1.map_or(String::new(), |c| format!(", c1 = {c}"))
        );
    }
    let report = match verify_scenario(&s) {
        Ok(r) => r,
        Err(e) => return fail(&e, Exit::Runtime),
    };
    let _ = write!(out, "{}", report.to_table());
    let path = s.config.output.dir.join("verify_report.json");
    let written = create(&path).and_then(|mut w| {
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    });
    if let Err(e) = written {
        return fail(&e, Exit::Runtime);
    }
    let verdict = report.all_pass();
    let _ = writeln!(out, "verdict: {}", if verdict { "pass" } else { "FAIL" });
    if verdict {
        Exit::Ok
    } else {
        Exit::CheckFailed
    }
}

pub fn cmd_synthesize(args: &CommonArgs, out: &mut dyn Write) -> Exit {
    let s = match load_scenario(args) {
        Ok(s) => s,
        Err(e) => return fail(&e, Exit::Config),
    };
    let g = match s.global_controller() {
        Ok(g) => g,
        Err(e @ Error::Synthesis(_)) => return fail(&e, Exit::CheckFailed),
        Err(e) => return fail(&e, Exit::Runtime),
    };
    for w in g.warnings() {
        eprintln!("warning: {w}");
    }
    let p = g.params();
    let _ = writeln!(out, "k       = {:.16e}", p.k);
    let _ = writeln!(out, "a       = {:.16e}", p.a);
    let _ = writeln!(out, "a'      = {:.16e}", p.a_prime);
    let _ = writeln!(out, "a~      = {:.16e}", p.a_tilde);
    let _ = writeln!(out, "zeta    = {:.16e}", p.zeta);
    let _ = writeln!(out, "K_alpha = {:.16e}", p.k_alpha);
    let _ = writeln!(out, "c_g     = {:.16e}", p.c_g);
    let _ = writeln!(out, "c       = {:.16e}", p.c);
    let closed = if s.config.plant.is_preset() { g.closed_form() } else { None };
    if let Some(text) = &closed {
        let _ = writeln!(out, "phi_g(x1, x2) = {text}");
    }

    let a_choice = match (&s.local, s.v_ell_tilde) {
        (Some(local), Some(tilde)) => {
            let cert = s.certificate.as_ref().expect("synthesis needs a certificate");
            Attractor::new(cert, 2000, s.config.verify.seed)
                .and_then(|att| choose_a_for_theorem(local, &att, tilde, &ASearch::default()))
                .map(Some)
        }
        _ => Ok(None),
    };
    let a_choice = match a_choice {
        Ok(c) => c,
        Err(e) => return fail(&e, Exit::Runtime),
    };
    match &a_choice {
        Some(AChoice::Feasible { a, max_v_ell }) => {
            let _ = writeln!(
                out,
                "tube condition max V_ell over A + aB < v_ell_tilde holds up to a = {a:.6e} (max {max_v_ell:.6e}); configured a = {}",
                p.a
            );
            if p.a > *a {
                let _ = writeln!(out, "note: the configured a exceeds that radius; the switching guarantee is then empirical only");
            }
        }
        Some(AChoice::Infeasible { max_v_ell, .. }) => {
            let _ = writeln!(out, "tube condition infeasible: max V_ell over A = {max_v_ell:.6e} >= v_ell_tilde");
        }
        None => {}
    }

    let doc = serde_json::json!({
        "params": p,
        "variant": g.variant(),
        "warnings": g.warnings(),
        "closed_form": closed,
        "a_for_tube_condition": a_choice,
    });
    let path = s.config.output.dir.join("synthesis.json");
    let written = create(&path).and_then(|mut w| {
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    });
    if let Err(e) = written {
        return fail(&e, Exit::Runtime);
    }
    let _ = writeln!(out, "wrote {}", path.display());
    if p.c_g.is_finite() && p.c_g > 0.0 {
        Exit::Ok
    } else {
        eprintln!("error: degenerate c_g = {}", p.c_g);
        Exit::CheckFailed
    }
}

/// Trajectory of the worked example for one feedback variant.
pub fn reproduce_run(cfg: &RunConfig, variant: Variant) -> Result<(Scenario, Arc<GlobalController>, HybridArc), Error> {
    let mut cfg = cfg.clone();
    cfg.synthesis.variant = variant;
    let s = cfg.build()?;
    let g = Arc::new(s.global_controller()?);
    let ctrl = s.hysteresis_controller(g.clone())?;
    let ic = cfg
        .initial_conditions
        .first()
        .ok_or_else(|| Error::InvalidParameter("no initial condition".into()))?;
    let arc = simulate(&s.plant, &ctrl, &ic.x, ic.q, &cfg.integrator)?;
    Ok((s, g, arc))
}

pub fn cmd_reproduce_paper(args: &ReproduceArgs, out: &mut dyn Write) -> Exit {
    let mut cfg = match RunConfig::load_with_overrides(None, &args.set) {
        Ok(c) => c,
        Err(e) => return fail(&e, Exit::Config),
    };
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    let dir = cfg.output.dir.clone();
    let mut status = Exit::Ok;
    for (variant, stem) in [(Variant::Derived, "paper"), (Variant::PaperLiteral, "paper_literal")] {
        let (s, g, arc) = match reproduce_run(&cfg, variant) {
            Ok(r) => r,
            Err(e) => return fail(&e, Exit::Runtime),
        };
        let _ = writeln!(out, "{stem}: variant {variant:?}, termination {}, t_final {:.6e}", arc.termination.label(), arc.t_final());
        let _ = print_jumps(out, &arc, &s);
        if let Some(j) = arc.jumps.iter().find(|j| j.q_to == hysterix_core::hysteresis::Mode::Local) {
            let _ = writeln!(out, "  switch back to the local feedback at t* = {:.6}", j.t);
        }
        if let Err(msg) = arc.validate() {
            eprintln!("error: malformed solution record: {msg}");
            status = Exit::Runtime;
        }
        let written = write_arc_files(
            &s,
            Some(&g),
            &arc,
            &dir.join(format!("{stem}_trajectory.csv")),
            &dir.join(format!("{stem}_summary.json")),
        )
        .and_then(|_| {
            let mut w = create(&dir.join(format!("{stem}_plot.dat")))?;
            write_plot_data(&mut w, &arc)?;
            w.flush()?;
            Ok(())
        });
        if let Err(e) = written {
            return fail(&e, Exit::Runtime);
        }
        let converged = arc.termination == hysterix_core::hybrid::Termination::Converged;
        if variant == Variant::Derived && !converged {
            eprintln!("error: trajectory did not converge ({})", arc.termination.label());
            status = Exit::Runtime;
        }
    }
    let _ = writeln!(out, "wrote {}", dir.display());
    status
}

pub fn cmd_parse_check(args: &ParseCheckArgs, out: &mut dyn Write) -> Exit {
    let vars: Vec<String> = args
        .vars
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    let mut status = Exit::Ok;
    for text in &args.exprs {
        match parse(text, &vars) {
            Ok(e) => {
                let _ = writeln!(out, "ok    {text}  =>  {e}");
            }
            Err(err) => {
                let _ = writeln!(out, "error {text}: {err}");
                status = Exit::CheckFailed;
            }
        }
    }
    if let Some(path) = &args.config {
        match RunConfig::load(path).and_then(|c| c.build()) {
            Ok(_) => {
                let _ = writeln!(out, "ok    {}", path.display());
            }
            Err(e) => {
                let _ = writeln!(out, "error {}: {e}", path.display());
                return Exit::Config;
            }
        }
    }
    if args.exprs.is_empty() && args.config.is_none() {
        eprintln!("error: nothing to check (pass expressions or --config)");
        return Exit::Config;
    }
    status
}
