use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use aidc_grid::policies::{policy_from_spec, PlanningPolicy};
use aidc_grid::scenario::Scenario;
use aidc_grid::sim::{
    compute_metrics, read_metrics, run_episode, serve_stream, serve_tcp, sweep, write_baseline,
    write_run, write_sweep_csv, EnvServer, MetricsReport, SimContext,
};

#[derive(Parser)]
#[command(name = "aidc-sim", version, about = "AI data center and grid operator co-simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop episode and write its logs and metrics.
    Simulate {
        /// Scenario file or `builtin:NAME`.
        #[arg(long)]
        scenario: String,
        /// `fixed-buffer`, `heuristic` or `mlp:PATH`.
        #[arg(long, default_value = "heuristic")]
        policy: String,
        /// Replaces the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve and write the AIDC-free baseline dispatch.
    Baseline {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Curtailment frequency over a grid of budget and deviation values.
    Sweep {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, default_value = "heuristic")]
        policy: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the environment protocol to a training client.
    ServeEnv {
        /// Repeat to register several scenarios; ids are scenario names.
        #[arg(long, required = true)]
        scenario: Vec<String>,
        #[arg(long, conflicts_with = "stdio")]
        port: Option<u16>,
        #[arg(long)]
        stdio: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Episode length in steps; defaults to the whole trace.
        #[arg(long)]
        window: Option<usize>,
    },
    /// Summarize one or more simulate runs.
    Report {
        #[arg(long, required = true)]
        run: Vec<PathBuf>,
    },
}

fn load(spec: &str, seed: Option<u64>) -> Result<Scenario> {
    Scenario::load_seeded(spec, seed).with_context(|| format!("loading scenario {spec}"))
}

fn make_policy(spec: &str, scenario: &Scenario) -> Result<Box<dyn PlanningPolicy>> {
    Ok(policy_from_spec(spec, &scenario.policy)?)
}

fn simulate(scenario: &str, policy: &str, seed: Option<u64>, out: &Path) -> Result<()> {
    let s = load(scenario, seed)?;
    let mut p = make_policy(policy, &s)?;
    let ctx = SimContext::prepare(s)?;
    let ep = run_episode(&ctx, p.as_mut());
    let m = compute_metrics(&ep, &ctx.scenario.trace);
    write_run(out, &ep, &m)?;
    print_summary(&[m]);
    if let Some(a) = &ep.abort {
        bail!("episode aborted at step {}: {}", a.t, a.message);
    }
    Ok(())
}

fn run_sweep(scenario: &str, gammas: &[f64], eps: &[f64], policy: &str, seed: Option<u64>, out: &Path) -> Result<()> {
    let s = load(scenario, seed)?;
    make_policy(policy, &s)?;
    let ctx = SimContext::prepare(s)?;
    let cfg = ctx.scenario.policy.clone();
    let factory = |spec: &str| policy_from_spec(spec, &cfg).expect("policy spec checked above");
    let report = sweep(&ctx, gammas, eps, &|| factory(policy));
    std::fs::create_dir_all(out)?;
    write_sweep_csv(&out.join("sweep.csv"), &report)?;
    std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let mut stdout = std::io::stdout().lock();
    write!(stdout, "{:>8}", "gamma\\eps")?;
    for e in eps {
        write!(stdout, "{e:>11}")?;
    }
    writeln!(stdout)?;
    for (gi, g) in gammas.iter().enumerate() {
        write!(stdout, "{g:>9}")?;
        for ei in 0..eps.len() {
            let c = report.cell(gi, ei);
            match c.curtail_freq {
                Some(f) => write!(stdout, "{:>10.2}%", f)?,
                None => write!(stdout, "{:>11}", c.status.as_str())?,
            }
        }
        writeln!(stdout)?;
    }
    Ok(())
}

fn serve(scenarios: &[String], port: Option<u16>, stdio: bool, seed: Option<u64>, window: Option<usize>) -> Result<()> {
    let list = scenarios.iter().map(|s| load(s, seed)).collect::<Result<Vec<_>>>()?;
    let mut server = EnvServer::new(list, window);
    if stdio || port.is_none() {
        let stdin = std::io::stdin();
        serve_stream(&mut server, stdin.lock(), std::io::stdout())?;
    } else {
        let listener = TcpListener::bind(("127.0.0.1", port.unwrap_or(0)))?;
        eprintln!("listening on {}", listener.local_addr()?);
        serve_tcp(&mut server, listener, None)?;
    }
    Ok(())
}

fn print_summary(reports: &[MetricsReport]) {
    println!(
        "{:<14} {:>10} {:>9} {:>9} {:>9} {:>9} {:>10}",
        "policy", "reward", "kappa_mw", "curt_%", "w1a_%", "w1b_%", "energy_mwh"
    );
    for m in reports {
        println!(
            "{:<14} {:>10.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>10.2}",
            m.policy,
            m.cumulative_reward.total,
            m.mean_kappa_mw,
            m.curtailment_frequency_pct,
            m.work_pct[0],
            m.work_pct[1],
            m.curtailed_energy_mwh
        );
    }
}

fn report(runs: &[PathBuf]) -> Result<()> {
    let mut all = Vec::new();
    for dir in runs {
        let m = read_metrics(dir).with_context(|| format!("reading {}", dir.display()))?;
        let mut w = csv::Writer::from_path(dir.join("regimes.csv"))?;
        w.write_record(["regime", "steps", "p_req_mw", "kappa_mw", "s_1a", "s_1b", "s_2"])?;
        for (name, r) in [("peak", &m.peak), ("off_peak", &m.off_peak), ("delta", &m.delta)] {
            w.write_record([
                name.to_string(),
                r.steps.to_string(),
                r.p_req_mw.to_string(),
                r.kappa_mw.to_string(),
                r.s_1a.to_string(),
                r.s_1b.to_string(),
                r.s_2.to_string(),
            ])?;
        }
        w.flush()?;
        all.push(m);
    }
    print_summary(&all);
    println!();
    println!(
        "{:<14} {:>10} {:>10} {:>8} {:>8} {:>8}",
        "policy", "d_p_req_mw", "d_kappa_mw", "d_s_1a", "d_s_1b", "d_s_2"
    );
    for m in &all {
        let d = &m.delta;
        println!(
            "{:<14} {:>10.1} {:>10.2} {:>8.3} {:>8.3} {:>8.3}",
            m.policy, d.p_req_mw, d.kappa_mw, d.s_1a, d.s_1b, d.s_2
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            policy,
            seed,
            out,
        } => simulate(&scenario, &policy, seed, &out),
        Command::Baseline { scenario, seed, out } => {
            let ctx = SimContext::prepare(load(&scenario, seed)?)?;
            write_baseline(&out, &ctx)?;
            println!(
                "baseline cost {:.2} over {} steps ({} LP solves)",
                ctx.baseline.cost,
                ctx.horizon(),
                ctx.baseline.lp_solves
            );
            Ok(())
        }
        Command::Sweep {
            scenario,
            gamma,
            eps,
            policy,
            seed,
            out,
        } => run_sweep(&scenario, &gamma, &eps, &policy, seed, &out),
        Command::ServeEnv {
            scenario,
            port,
            stdio,
            seed,
            window,
        } => serve(&scenario, port, stdio, seed, window),
        Command::Report { run } => report(&run),
    }
}

fn error_line(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": { "kind": kind, "message": message } }));
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            error_line("usage", e.to_string().trim());
            std::process::exit(2);
        }
    };
    if let Err(e) = run(cli) {
        error_line("run", &format!("{e:#}"));
        std::process::exit(1);
    }
}
