use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use simbound_cli::commands::{
    cmd_attractor, cmd_battery, cmd_boundary, cmd_dim, cmd_invariance, cmd_measure, cmd_render,
    cmd_tilecheck, svg_for, Run,
};
use simbound_cli::report::Report;
use simbound_cli::specfile::{parse_spec, RunParams};
use simbound_core::fixtures;
use simbound_core::{Backend, Error};

#[derive(Parser)]
#[command(
    name = "simbound",
    version,
    about = "Attractor, boundary, measure and dimension analysis for contracting similitude systems"
)]
struct Cli {
    /// System description file.
    #[arg(long, global = true, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Built-in system by name (koch, square4, square4-rotated, cantor2,
    /// segment2, sierpinski, l1-schief).
    #[arg(long, global = true, value_name = "NAME")]
    gallery: Option<String>,
    /// Refinement depth; overrides the spec file.
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Overlap scan tolerance; overrides the spec file and the default.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Directory for report and SVG artifacts; stdout always gets the report.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write an SVG rendering next to the report.
    #[arg(long, global = true)]
    svg: bool,
    /// Cell enumeration budget; overrides the spec file.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Sampling seed for map validation; overrides the spec file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Similarity dimension and per-map scaling validation.
    Dim,
    /// Certified attractor approximation statistics.
    Attractor,
    /// Similarity boundary witnesses and clusters.
    Boundary,
    /// Inverse invariance check of the boundary.
    Invariance,
    /// Branch, overlap and boundary mass brackets.
    Measure,
    /// The seven-condition verdict battery.
    Battery,
    /// Topological versus similarity boundary for full-dimensional tiles.
    Tilecheck,
    /// SVG rendering of the attractor with boundary highlights.
    Render,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Dim => "dim",
            Command::Attractor => "attractor",
            Command::Boundary => "boundary",
            Command::Invariance => "invariance",
            Command::Measure => "measure",
            Command::Battery => "battery",
            Command::Tilecheck => "tilecheck",
            Command::Render => "render",
        }
    }
}

fn load_system(cli: &Cli) -> Result<(simbound_core::spaces::IfsSpec, RunParams), String> {
    match (&cli.spec, &cli.gallery) {
        (Some(_), Some(_)) => Err("pass either --spec or --gallery, not both".into()),
        (None, None) => Err("pass --spec <file> or --gallery <name>".into()),
        (None, Some(name)) => match fixtures::by_name(name) {
            Some(ifs) => Ok((ifs, RunParams::default())),
            None => Err(format!(
                "unknown gallery system `{name}`; known: {}",
                fixtures::GALLERY.join(", ")
            )),
        },
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            let spec = parse_spec(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            Ok((spec.ifs, spec.params))
        }
    }
}

fn execute(cli: &Cli, run: &Run) -> simbound_core::Result<(Report, Option<String>)> {
    match cli.command {
        Command::Dim => Ok((cmd_dim(run)?, None)),
        Command::Attractor => Ok((cmd_attractor(run)?, None)),
        Command::Boundary => Ok((cmd_boundary(run)?, None)),
        Command::Invariance => Ok((cmd_invariance(run)?, None)),
        Command::Measure => Ok((cmd_measure(run)?, None)),
        Command::Battery => Ok((cmd_battery(run)?, None)),
        Command::Tilecheck => Ok((cmd_tilecheck(run)?, None)),
        Command::Render => {
            let (report, svg) = cmd_render(run)?;
            Ok((report, Some(svg)))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) =>
        {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };

    let (ifs, params) = match load_system(&cli) {
        Ok(loaded) => loaded,
        Err(msg) => {
            eprintln!("simbound: {msg}");
            return ExitCode::from(1);
        }
    };
    let run = Run::resolve(ifs, &params, cli.depth, cli.tol, None, cli.budget, cli.seed);

    let (mut report, mut svg) = match execute(&cli, &run) {
        Ok(done) => done,
        Err(Error::BudgetExceeded { required, budget }) => {
            eprintln!(
                "simbound: enumeration needs {required} cells but the budget is {budget}; \
                 raise --budget or lower --depth"
            );
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("simbound: {e}");
            return ExitCode::from(1);
        }
    };

    if svg.is_none() && cli.svg {
        match svg_for(&run) {
            Ok(rendered) => svg = Some(rendered),
            Err(e) if run.ifs.backend() == Backend::Sequence => {
                eprintln!("simbound: {e}");
            }
            Err(Error::BudgetExceeded { required, budget }) => {
                eprintln!(
                    "simbound: enumeration needs {required} cells but the budget is {budget}; \
                     raise --budget or lower --depth"
                );
                return ExitCode::from(2);
            }
            Err(e) => {
                eprintln!("simbound: {e}");
                return ExitCode::from(1);
            }
        }
    }

    let stem = format!("{}-{}", run.ifs.name, cli.command.name());
    if let Some(svg_text) = &svg {
        let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
        if let Err(e) = std::fs::create_dir_all(&dir) {
            eprintln!("simbound: {}: {e}", dir.display());
            return ExitCode::from(1);
        }
        let path = dir.join(format!("{stem}.svg"));
        if let Err(e) = std::fs::write(&path, svg_text) {
            eprintln!("simbound: {}: {e}", path.display());
            return ExitCode::from(1);
        }
        report.push("artifacts", "svg", path.display().to_string());
    }
    let rendered = report.render();
    if let Some(dir) = &cli.out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("simbound: {}: {e}", dir.display());
            return ExitCode::from(1);
        }
        let path = dir.join(format!("{stem}.txt"));
        if let Err(e) = std::fs::write(&path, &rendered) {
            eprintln!("simbound: {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    print!("{rendered}");
    ExitCode::SUCCESS
}
