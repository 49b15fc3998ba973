use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fractal_graph::report::{self, pipeline, to_canonical_json, RunConfig};
use fractal_graph::Error;

/// Lipschitz graphs through planar self-similar sets.
#[derive(Parser, Debug)]
#[command(name = "fgraph", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured pipeline and write the JSON report (and SVG if configured).
    Run(Common),
    /// Print the Favard length of generations 1..=depth.
    Favard(Common),
    /// Run the pipeline and print the graph quantities and certificates.
    Graph(Common),
    /// Print the similarity dimension and Hata surrogate.
    Dims(Common),
    /// Run the pipeline and write only the SVG figure.
    Render(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    /// Angle grid resolution.
    #[arg(long)]
    grid: Option<usize>,
    /// Output directory for `run` and `render`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Random seed for the randomized checks.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = RunConfig::from_path(&self.config)?;
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(d) = self.depth {
            cfg.depth = d;
        }
        if let Some(g) = self.grid {
            cfg.grid = g;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_certificates(report: &report::RunReport) {
    for c in &report.certificates {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let kind = if c.required { "" } else { " (info)" };
        eprintln!("{verdict} {}{kind}: {}", c.name, c.detail);
    }
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let outcome = report::run(&cfg)?;
            print_certificates(&outcome.report);
            for p in outcome.write(&cfg, &args.out)? {
                println!("{}", p.display());
            }
            Ok(outcome.exit_code() as u8)
        }
        Command::Favard(args) => {
            let cfg = args.load()?;
            println!("{}", to_canonical_json(&pipeline::favard_table(&cfg)?)?);
            Ok(0)
        }
        Command::Dims(args) => {
            let cfg = args.load()?;
            println!("{}", to_canonical_json(&pipeline::dims_report(&cfg)?)?);
            Ok(0)
        }
        Command::Graph(args) => {
            let cfg = args.load()?;
            let outcome = report::run(&cfg)?;
            let summary = serde_json::json!({
                "quantities": outcome.report.quantities,
                "certificates": outcome.report.certificates,
                "pass": outcome.report.pass,
            });
            println!("{}", to_canonical_json(&summary)?);
            Ok(outcome.exit_code() as u8)
        }
        Command::Render(args) => {
            let mut cfg = args.load()?;
            let name = cfg.output.svg.get_or_insert_with(|| "figure.svg".into()).clone();
            let outcome = report::run(&cfg)?;
            let svg = outcome.svg.expect("svg requested");
            std::fs::create_dir_all(&args.out)?;
            let path = args.out.join(name);
            std::fs::write(&path, svg)?;
            println!("{}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
