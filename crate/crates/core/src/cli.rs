//! The `shallow-learner` command line.
//!
//! Exit codes: 0 on success or a low-complexity verdict, 3 on a
//! high-complexity verdict, 1 on operational errors and 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::circuit::{backward_lightcone, extract_subcircuit, random_shallow_circuit, Circuit, Gate, GateSource};
use crate::covering::{ancilla_count, default_separation, lattice_covering, AncillaReport, CoveringScheme, ValidationReport};
use crate::error::{Error, Result};
use crate::inversion::{SearchConfig, Strategy};
use crate::json::{self, SCHEMA_VERSION};
use crate::lattice::LatticeGeometry;
use crate::linalg;
use crate::pipeline::{learn, score, test_complexity, LearnConfig, LearnReport, Problem, Secret, StateSource, Verdict};
use crate::rng::rng_from_seed;
use crate::simulator::{SimLimits, StateVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_HIGH_COMPLEXITY: i32 = 3;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "SHALLOW_LEARNER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "shallow-learner", version, about = "Learn shallow circuits that prepare lattice states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    /// A random hidden circuit.
    Circuit,
    /// The GHZ state, given explicitly.
    Ghz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Gates {
    Haar,
    Clifford,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a problem descriptor and its secret ground truth.
    Gen {
        #[arg(long, num_args = 1.., required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value = "haar")]
        gates: Gates,
        #[arg(long, value_enum, default_value = "circuit")]
        family: Family,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; gets `problem.json` and `instance.secret.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and validate the lattice covering scheme.
    Covering {
        #[arg(long, num_args = 1.., required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        d: usize,
        /// Coloring separation.
        #[arg(long = "R")]
        separation: Option<usize>,
        /// Also count the ancillas of the extracted circuit.
        #[arg(long)]
        ancillas: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn a circuit for a problem.
    Learn {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the search and sampling seeds.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a learn report against the secret state.
    Verify {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        secret: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide low or high circuit complexity.
    Test {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Backward lightcone of output wires of a circuit.
    Lightcone {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        outputs: Vec<usize>,
        /// Also emit the extracted circuit.
        #[arg(long)]
        extract: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Files only `verify` may open.
pub fn is_secret(path: &Path) -> bool {
    path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".secret.json"))
}

/// Reads a non-secret JSON document.
fn read_public<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if is_secret(path) {
        return Err(Error::SecretAccess(path.display().to_string()));
    }
    json::read_file(path)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => {
            if is_secret(p) {
                return Err(Error::SecretAccess(p.display().to_string()));
            }
            json::write_file(p, value)
        }
        None => {
            writeln!(stdout, "{}", json::to_canonical_string(value)?)?;
            Ok(())
        }
    }
}

/// A layer of independent single-site gates.
fn product_circuit(n: usize, gates: Gates, seed: u64) -> Circuit {
    let mut rng = rng_from_seed(seed);
    let mut c = Circuit::empty(n);
    let layer = (0..n)
        .map(|w| {
            let m = match gates {
                Gates::Haar => {
                    let u = linalg::haar_unitary(2, &mut rng);
                    [u[0], u[1], u[2], u[3]]
                }
                Gates::Clifford => crate::clifford::single_qubit(rand::Rng::gen_range(&mut rng, 0..24)),
            };
            Gate::Unitary1 { wire: w, matrix: m }
        })
        .collect();
    c.push_layer(layer).expect("one gate per wire");
    c
}

fn default_config(d: usize) -> LearnConfig {
    LearnConfig::new(d, SearchConfig::new(Strategy::CliffordEnum))
}

fn load_config(path: Option<&Path>, d: usize, seed: Option<u64>) -> Result<LearnConfig> {
    let mut c = match path {
        Some(p) => read_public::<LearnConfig>(p)?,
        None => default_config(d),
    };
    if let Some(s) = seed {
        c.seed = s;
        c.search.seed = s;
    }
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct CoveringOutput {
    schema: &'static str,
    separation: usize,
    scheme: CoveringScheme,
    validation: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    ancillas: Option<AncillaReport>,
}

#[derive(Serialize)]
struct LightconeOutput {
    schema: &'static str,
    mask: crate::circuit::SubCircuitMask,
    #[serde(skip_serializing_if = "Option::is_none")]
    extracted: Option<Circuit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output_wires: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    junk_wires: Option<Vec<usize>>,
}

/// Executes a parsed command, returning the exit code.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<i32> {
    let limits = SimLimits::default();
    match cli.command {
        Command::Gen { dims, d, gates, family, seed, out } => {
            let geom = LatticeGeometry::new(dims.clone())?;
            let n = geom.n_sites();
            let truth = match family {
                Family::Ghz => StateSource::explicit(&StateVector::ghz(n)),
                Family::Circuit if d == 0 => StateSource::HiddenCircuit { circuit: product_circuit(n, gates, seed) },
                Family::Circuit => {
                    let src = match gates {
                        Gates::Haar => GateSource::Haar,
                        Gates::Clifford => GateSource::Clifford,
                    };
                    StateSource::HiddenCircuit { circuit: random_shallow_circuit(&geom, d, src, seed) }
                }
            };
            std::fs::create_dir_all(&out)?;
            json::write_file(&out.join("problem.json"), &Problem { dims: dims.clone(), d, device: truth.clone() })?;
            json::write_file(&out.join("instance.secret.json"), &Secret { dims, truth })?;
            Ok(EXIT_OK)
        }
        Command::Covering { dims, d, separation, ancillas, out } => {
            let geom = LatticeGeometry::new(dims)?;
            let r = separation.unwrap_or_else(|| default_separation(geom.k(), d));
            let (scheme, validation) = lattice_covering(&geom, r, d)?;
            let ancillas = if ancillas && validation.is_valid() { Some(ancilla_count(&geom, &scheme)?) } else { None };
            emit(&CoveringOutput { schema: SCHEMA_VERSION, separation: r, scheme, validation, ancillas }, out.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Learn { problem, config, seed, out } => {
            let p: Problem = read_public(&problem)?;
            let geom = p.geometry()?;
            let cfg = load_config(config.as_deref(), p.d, seed)?;
            let report = learn(&p.device, &geom, &cfg)?;
            emit(&report, out.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Verify { report, secret, out } => {
            let r: LearnReport = read_public(&report)?;
            let s: Secret = json::read_file(&secret)?;
            let psi = s.truth.state(&limits)?;
            emit(&score(&r, &psi, &limits)?, out.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Test { problem, config, seed, out } => {
            let p: Problem = read_public(&problem)?;
            let geom = p.geometry()?;
            let cfg = load_config(config.as_deref(), p.d, seed)?;
            let report = test_complexity(&p.device, &geom, &cfg)?;
            emit(&report, out.as_deref(), stdout)?;
            Ok(match report.verdict {
                Verdict::LowComplexity => EXIT_OK,
                Verdict::HighComplexity => EXIT_HIGH_COMPLEXITY,
            })
        }
        Command::Lightcone { circuit, outputs, extract, out } => {
            let c: Circuit = read_public(&circuit)?;
            let mask = backward_lightcone(&c, &outputs)?;
            let (extracted, output_wires, junk_wires) = if extract {
                let ex = extract_subcircuit(&c, &mask)?;
                (Some(ex.circuit), Some(ex.output_wires), Some(ex.junk_wires))
            } else {
                (None, None, None)
            };
            emit(&LightconeOutput { schema: SCHEMA_VERSION, mask, extracted, output_wires, junk_wires }, out.as_deref(), stdout)?;
            Ok(EXIT_OK)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV}={v:?} is not a count")))?;
        if n > 0 {
            // a pool may already exist when called twice in one process
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let mut stdout = std::io::stdout().lock();
    match execute(cli, &mut stdout) {
        Ok(code) => code,
        Err(e @ Error::InvalidGeometry(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
