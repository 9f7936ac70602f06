use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kz_core::io::parse_manifest;
use kz_core::report::{run, run_timed, trees_report, Command, Report};

#[derive(Parser)]
#[command(name = "kz", version, about = "Bar constructions, D-structures and their checks over exact fields")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Include wall time in the report (makes it run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct WithManifest {
    manifest: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Subcommand)]
enum Cmd {
    /// Operad, algebra and D-structure axioms.
    Validate(WithManifest),
    /// Enumerate trees with `n` vertices.
    Trees {
        n: usize,
        /// Count equivalence classes instead of planar trees.
        #[arg(long)]
        classes: bool,
        /// Take the sorts from this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// d², dh + hd = Id, μ and the homology of the bar window.
    Bar(WithManifest),
    /// Homology of the complex (or the algebra).
    Homology(WithManifest),
    /// Δ², Δη = ηd + δ and morphism checks for the D-structure.
    Dstruct(WithManifest),
    /// Roundtrip certificates for the algebra and the D-structure.
    Roundtrip(WithManifest),
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("KZ_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| format!("KZ_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        return Err("KZ_THREADS must be a positive integer, got `0`".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn load(path: &PathBuf) -> Result<kz_core::io::Manifest, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_manifest(&text).map_err(|e| format!("{}:{e}", path.display()))
}

fn emit(report: &Report, out: &Output) -> Result<(), String> {
    let text = match out.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.to_string(),
    };
    match &out.out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main_inner() -> Result<bool, String> {
    let cli = Cli::parse();
    configure_threads()?;
    let (report, output) = match cli.command {
        Cmd::Trees { n, classes, manifest, output } => {
            let r = match manifest {
                Some(p) => run(&Command::Trees { n, classes }, &load(&p)?)?,
                None => trees_report(n, classes, 1),
            };
            (r, output)
        }
        Cmd::Validate(w) => (exec(Command::Validate, &w)?, w.output),
        Cmd::Bar(w) => (exec(Command::Bar, &w)?, w.output),
        Cmd::Homology(w) => (exec(Command::Homology, &w)?, w.output),
        Cmd::Dstruct(w) => (exec(Command::Dstruct, &w)?, w.output),
        Cmd::Roundtrip(w) => (exec(Command::Roundtrip, &w)?, w.output),
    };
    emit(&report, &output)?;
    Ok(report.passed)
}

fn exec(cmd: Command, w: &WithManifest) -> Result<Report, String> {
    let m = load(&w.manifest)?;
    if w.output.timing {
        run_timed(&cmd, &m)
    } else {
        run(&cmd, &m)
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
