use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use sfkit_core::geodesic::ExampleParams;
use sfkit_core::linalg::Tolerance;
use sfkit_core::Error;

mod run;
mod scenario;

use run::{effective_seed, list_examples, run_one, Method, Settings, Source};
use scenario::{Kind, RandomSpec, Scenario, TrivializationKind};

const EXIT_VIOLATED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Spectral flow, subspace calculus and closed-geodesic index checks.
#[derive(Parser, Debug)]
#[command(name = "sfkit", version, about)]
struct Cli {
    /// Print the built-in examples with their expected invariants.
    #[arg(long)]
    list_examples: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral flow of a path of symmetric forms.
    Path {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "endpoints")]
        method: Method,
        /// Write sampled eigenvalues as CSV.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Reduction identity for a fixed subspace.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Give random instances degenerate endpoints.
        #[arg(long)]
        degenerate: bool,
    },
    /// Reduction identity for a moving family of subspaces.
    Vary {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        trivialization: Option<TrivializationKind>,
    },
    /// Index formulas for a closed geodesic given by frame data.
    Geodesic {
        #[command(flatten)]
        common: Common,
        /// Fourier modes of the Galerkin space (the flow is also checked at twice this).
        #[arg(long)]
        modes: Option<usize>,
        /// Dimension parameter of the flat_torus example.
        #[arg(long)]
        n: Option<usize>,
        /// Curvature parameter of the constant_curvature example.
        #[arg(long, allow_negative_numbers = true)]
        curvature: Option<f64>,
        /// Replace Rbar by Rbar + EPS*I, to move off a degenerate crossing.
        #[arg(long, value_name = "EPS", allow_negative_numbers = true)]
        shift: Option<f64>,
    },
    /// Fredholm index, relative dimension, minimum gap and gap of two subspaces.
    Grassmann {
        #[command(flatten)]
        common: Common,
    },
    /// Print the built-in examples with their expected invariants.
    ListExamples,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file (JSON).
    #[arg(short, long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Built-in example.
    #[arg(long, value_name = "NAME")]
    example: Option<String>,
    /// Synthesize a seeded random instance.
    #[arg(long)]
    random: bool,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    codim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random instances, with seeds seed, seed + 1, ...
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Write the report here instead of stdout.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Include wall-clock timings (makes reports non-reproducible).
    #[arg(long)]
    timings: bool,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("sfkit: {msg}");
    ExitCode::from(code)
}

fn error_code(e: &Error) -> u8 {
    if e.is_input() {
        EXIT_INPUT
    } else {
        EXIT_NUMERICAL
    }
}

fn base_tolerance() -> Result<(Tolerance, &'static str), Error> {
    match std::env::var("SFKIT_TOL") {
        Ok(text) => {
            let rel: f64 = text
                .trim()
                .parse()
                .map_err(|_| Error::input(format!("SFKIT_TOL is not a number: '{text}'")))?;
            Ok((Tolerance::with_rel(rel)?, "SFKIT_TOL"))
        }
        Err(_) => Ok((Tolerance::default(), "default")),
    }
}

fn source_of(kind: Kind, common: &Common, degenerate: bool) -> Result<(Source, Value), Error> {
    let chosen = [common.input.is_some(), common.example.is_some(), common.random]
        .iter()
        .filter(|&&x| x)
        .count();
    if chosen != 1 {
        return Err(Error::input("give exactly one of -i FILE, --example NAME or --random"));
    }
    if let Some(file) = &common.input {
        let text = std::fs::read_to_string(file)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", file.display())))?;
        let scenario = Scenario::parse(&text)?;
        if scenario.kind != kind {
            return Err(Error::input(format!(
                "scenario kind '{}' does not match the '{}' command",
                scenario.kind.name(),
                kind.name()
            )));
        }
        let echo = json!({"source": "file", "file": file.display().to_string(), "scenario": scenario});
        return Ok((Source::Scenario(Box::new(scenario)), echo));
    }
    if let Some(name) = &common.example {
        return Ok((Source::Example(name.clone()), json!({"source": "example", "example": name})));
    }
    let spec = RandomSpec {
        dim: common.dim,
        codim: common.codim,
        degenerate: Some(degenerate),
    };
    let echo = json!({"source": "random", "dim": common.dim, "codim": common.codim, "degenerate": degenerate});
    Ok((Source::Random(spec), echo))
}

fn emit(report: &Value, output: &Option<PathBuf>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(report).expect("json values serialize") + "\n";
    match output {
        Some(file) => std::fs::write(file, text)
            .map_err(|e| Error::input(format!("cannot write {}: {e}", file.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(kind: Kind, common: &Common, settings: &mut Settings, degenerate: bool) -> ExitCode {
    let (source, inputs) = match source_of(kind, common, degenerate) {
        Ok(x) => x,
        Err(e) => return fail(error_code(&e), e),
    };
    let (mut tol, mut tol_source) = match base_tolerance() {
        Ok(x) => x,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    if let Source::Scenario(s) = &source {
        if let Some(over) = &s.tolerance {
            match over.apply(tol) {
                Ok(t) => {
                    tol = t;
                    tol_source = "scenario";
                }
                Err(e) => return fail(EXIT_INPUT, e),
            }
        }
    }
    settings.tol = tol;
    let random = matches!(&source, Source::Random(_)) || matches!(&source, Source::Scenario(s) if s.random);
    if common.count == 0 {
        return fail(EXIT_INPUT, "--count must be positive");
    }
    if common.count > 1 && !random {
        return fail(EXIT_INPUT, "--count applies to random instances only");
    }

    let mut top = Map::new();
    top.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    top.insert("command".into(), json!(kind.name()));
    top.insert("inputs".into(), inputs);
    top.insert("tolerance".into(), json!({"rel_zero": tol.rel_zero, "abs_zero": tol.abs_zero, "source": tol_source}));

    let first_seed = effective_seed(&source, common.seed);
    if common.count == 1 {
        if random {
            top.insert("seed".into(), json!(first_seed));
        }
        return match run_one(kind, &source, first_seed, settings) {
            Ok(out) => {
                if let Value::Object(m) = out.report {
                    top.extend(m);
                }
                if let Err(e) = emit(&Value::Object(top), &common.output) {
                    return fail(EXIT_INPUT, e);
                }
                if out.holds {
                    ExitCode::SUCCESS
                } else {
                    fail(EXIT_VIOLATED, "identity violated")
                }
            }
            Err(e) => fail(error_code(&e), e),
        };
    }

    // batch of seeded instances, reported in seed order
    let mut runs = Vec::new();
    let (mut violations, mut failures) = (0u64, 0u64);
    for i in 0..common.count {
        let seed = first_seed + i;
        match run_one(kind, &source, seed, settings) {
            Ok(out) => {
                if !out.holds {
                    violations += 1;
                }
                let mut m = Map::new();
                m.insert("seed".into(), json!(seed));
                if let Value::Object(r) = out.report {
                    m.extend(r);
                }
                runs.push(Value::Object(m));
            }
            Err(e) if e.is_input() => return fail(EXIT_INPUT, e),
            Err(e) => {
                failures += 1;
                runs.push(json!({"seed": seed, "error": e.to_string()}));
            }
        }
    }
    top.insert("count".into(), json!(common.count));
    top.insert("violations".into(), json!(violations));
    top.insert("numerical_failures".into(), json!(failures));
    top.insert("runs".into(), Value::Array(runs));
    if let Err(e) = emit(&Value::Object(top), &common.output) {
        return fail(EXIT_INPUT, e);
    }
    if failures > 0 {
        fail(EXIT_NUMERICAL, format!("{failures} of {} instances failed numerically", common.count))
    } else if violations > 0 {
        fail(EXIT_VIOLATED, format!("identity violated on {violations} of {} instances", common.count))
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_examples || matches!(cli.command, Some(Command::ListExamples)) {
        print!("{}", list_examples());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        return fail(EXIT_INPUT, "no command given (try --help)");
    };
    let mut settings = Settings {
        tol: Tolerance::default(),
        method: Method::Endpoints,
        modes: None,
        trivialization: None,
        example: ExampleParams::default(),
        trace: None,
        shift: None,
        timings: false,
    };
    match command {
        Command::Path { common, method, trace } => {
            settings.method = method;
            settings.trace = trace;
            settings.timings = common.timings;
            execute(Kind::Path, &common, &mut settings, false)
        }
        Command::Reduce { common, degenerate } => {
            settings.timings = common.timings;
            execute(Kind::Reduce, &common, &mut settings, degenerate)
        }
        Command::Vary { common, trivialization } => {
            settings.trivialization = trivialization;
            settings.timings = common.timings;
            execute(Kind::Vary, &common, &mut settings, false)
        }
        Command::Geodesic { common, modes, n, curvature, shift } => {
            settings.modes = modes;
            settings.shift = shift;
            settings.example = ExampleParams { n, curvature };
            settings.timings = common.timings;
            execute(Kind::Geodesic, &common, &mut settings, false)
        }
        Command::Grassmann { common } => {
            settings.timings = common.timings;
            execute(Kind::Grassmann, &common, &mut settings, false)
        }
        Command::ListExamples => unreachable!("handled above"),
    }
}
