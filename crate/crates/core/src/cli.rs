//! The `towerforge` command line.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::compose::compose;
use crate::gadgets::{
    counting_loop, factorial_amplifier, program_e, trivial_amplifier, Amplifier, BoundNote,
    RatioExpr,
};
use crate::ir::{CounterId, Program};
use crate::parser::{parse, print};
use crate::probes::probe_suite;
use crate::semantics::{check_probes, computed_relation, find_witness, Caps};
use crate::suites::{run_suite, suite_names};
use crate::tower::{counter_census, hardness_reduction, refined_amplifier, refined_reduction, tower_amplifier};
use crate::translate::{export_pnml, export_vass_text, to_petri_net, to_vass};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Failed(String),
    #[error("{0}")]
    Usage(String),
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "towerforge", version, about = "Counter programs, amplifiers, and their lowering to VASS / Petri nets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct CapArgs {
    /// Untested counters must stay below this value.
    #[arg(long = "cap-counter", default_value_t = 16)]
    pub counter: u64,
    /// Largest number of stored configurations.
    #[arg(long = "cap-states", default_value_t = 50_000_000)]
    pub states: u64,
    /// Largest search depth.
    #[arg(long = "cap-steps", default_value_t = 1_000_000)]
    pub steps: u64,
}

impl CapArgs {
    fn caps(&self) -> Caps {
        Caps {
            counter_cap: self.counter,
            state_cap: self.states,
            step_cap: self.steps,
            test_budget: None,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Validate a program and print it canonically.
    Parse { file: String },
    /// Generate a program.
    Gen {
        #[command(subcommand)]
        what: Gen,
    },
    /// Compose amplifier A with program P.
    Compose {
        amplifier: String,
        program: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// The amplifier's (b,c,d) counters.
        #[arg(long = "amp-counters", default_value = "b,c,d")]
        amp_counters: String,
    },
    /// Reduce a program with only tested counters to one with none.
    Reduce {
        file: String,
        #[arg(long, conflicts_with = "refined")]
        tower: Option<u32>,
        /// H N
        #[arg(long, num_args = 2, value_names = ["H", "N"])]
        refined: Option<Vec<u64>>,
    },
    /// Compute the relation in a list of counters.
    Relation {
        file: String,
        #[arg(long)]
        bound: u64,
        #[arg(long)]
        counters: String,
        #[command(flatten)]
        caps: CapArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Find a shortest complete run ending in the given values.
    Witness {
        file: String,
        #[arg(long)]
        bound: u64,
        /// k1=v1,k2=v2,...
        #[arg(long)]
        target: String,
        #[command(flatten)]
        caps: CapArgs,
    },
    /// Run a named probe suite.
    Probes {
        file: String,
        #[arg(long)]
        bound: u64,
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        caps: CapArgs,
    },
    /// Count counters and halt-listed counters.
    Census { file: String },
    /// Export a test-free program as VASS text or PNML.
    Export {
        file: String,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an acceptance suite (or `all`) and print PASS/FAIL per criterion.
    Verify { suite: String },
}

#[derive(Subcommand, Debug)]
pub enum Gen {
    /// Trivial amplifier by R.
    TrivialAmp { r: u64 },
    /// add x' C; loop { inc x; dec x'; add y 2 }; halt x'.
    CountingLoop { c: u64 },
    /// The warm-up program E.
    ExampleE,
    /// The factorial amplifier F.
    Factorial,
    /// Tower amplifier by 3!^N.
    Tower { n: u32 },
    /// Refined amplifier by N!^(H+1).
    Refined { h: usize, n: u64 },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Vass,
    Pnml,
}

fn read_input(path: &str) -> Result<String, CliError> {
    let io = |source| CliError::Io {
        path: path.to_string(),
        source,
    };
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(io)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(io)
    }
}

fn load(path: &str) -> Result<Program, CliError> {
    let text = read_input(path)?;
    parse(&text).map_err(|e| CliError::Parse {
        path: path.to_string(),
        message: e.to_string(),
    })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        _ => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn counter_list(s: &str) -> Vec<CounterId> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(CounterId::new)
        .collect()
}

fn parse_target(s: &str) -> Result<Vec<(String, u64)>, CliError> {
    s.split(',')
        .filter(|kv| !kv.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("target entry {kv:?} is not name=value")))?;
            let v = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("target value {v:?} is not a natural")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn generate(what: &Gen) -> Result<Program, CliError> {
    Ok(match *what {
        Gen::TrivialAmp { r } => trivial_amplifier(r).map_err(failed)?.program,
        Gen::CountingLoop { c } => counting_loop(c).map_err(failed)?,
        Gen::ExampleE => program_e(),
        Gen::Factorial => factorial_amplifier().program,
        Gen::Tower { n } => tower_amplifier(n).program,
        Gen::Refined { h, n } => refined_amplifier(h, n).map_err(failed)?.program,
    })
}

/// Runs one command; the boolean is `false` when the command reports a
/// negative outcome (no witness, probe violated, suite failed).
pub fn execute(cli: &Cli) -> Result<bool, CliError> {
    match &cli.command {
        Cmd::Parse { file } => {
            emit(&None, &print(&load(file)?))?;
        }
        Cmd::Gen { what } => emit(&None, &print(&generate(what)?))?,
        Cmd::Compose {
            amplifier,
            program,
            out,
            amp_counters,
        } => {
            let a = load(amplifier)?;
            let p = load(program)?;
            let outs = counter_list(amp_counters);
            let [b, c, d]: [CounterId; 3] = outs
                .try_into()
                .map_err(|_| CliError::Usage("--amp-counters needs exactly three names".into()))?;
            let amp = Amplifier {
                program: a,
                out_b: b,
                out_c: c,
                out_d: d,
                ratio: RatioExpr::Bound,
                bound_note: BoundNote::Any,
            };
            emit(out, &print(&compose(&amp, &p).map_err(failed)?))?;
        }
        Cmd::Reduce { file, tower, refined } => {
            let m = load(file)?;
            let out = match (tower, refined.as_deref()) {
                (Some(n), None) => hardness_reduction(&m, *n).map_err(failed)?,
                (None, Some(&[h, n])) => refined_reduction(&m, h as usize, n).map_err(failed)?,
                _ => return Err(CliError::Usage("give exactly one of --tower N or --refined H N".into())),
            };
            emit(&None, &print(&out))?;
        }
        Cmd::Relation {
            file,
            bound,
            counters,
            caps,
            csv,
        } => {
            let p = load(file)?;
            let r = computed_relation(&p, *bound, &counter_list(counters), &caps.caps()).map_err(failed)?;
            emit(csv, &r.to_csv())?;
        }
        Cmd::Witness {
            file,
            bound,
            target,
            caps,
        } => {
            let p = load(file)?;
            let want = parse_target(target)?;
            let found = find_witness(
                &p,
                *bound,
                &|v| want.iter().all(|(k, x)| v.get(k) == *x),
                &caps.caps(),
            )
            .map_err(failed)?;
            let Some(t) = found else {
                println!("no witness within caps");
                return Ok(false);
            };
            let finals = t.verify(&p, *bound).map_err(failed)?;
            let lines: Vec<String> = t.lines.iter().map(|l| l.to_string()).collect();
            println!("steps {}", t.len().saturating_sub(1));
            println!("lines {}", lines.join(" "));
            let names = crate::semantics::CounterIndex::of(&p);
            let vals: Vec<String> = names
                .names()
                .iter()
                .zip(finals)
                .map(|(n, v)| format!("{n}={v}"))
                .collect();
            println!("final {}", vals.join(","));
        }
        Cmd::Probes {
            file,
            bound,
            suite,
            caps,
        } => {
            let p = load(file)?;
            let s = probe_suite(suite, &p, *bound).map_err(failed)?;
            let r = check_probes(&p, *bound, &s.probes, &s.snapshots, &caps.caps()).map_err(failed)?;
            for o in &r.outcomes {
                match &o.violation {
                    None => println!("holds   {} ({} checks)", o.label, o.checks),
                    Some(cx) => {
                        let vals: Vec<String> =
                            cx.valuation.iter().map(|(n, v)| format!("{n}={v}")).collect();
                        println!("VIOLATED {} at line {}: {}", o.label, cx.line, vals.join(","));
                    }
                }
            }
            println!(
                "complete runs: {}; {}",
                if r.complete_runs { "yes" } else { "none" },
                if r.exact { "exact" } else { "truncated" }
            );
            return Ok(r.all_hold());
        }
        Cmd::Census { file } => println!("{}", counter_census(&load(file)?)),
        Cmd::Export { file, format, out } => {
            let p = load(file)?;
            let v = to_vass(&p).map_err(failed)?;
            let text = match format {
                Format::Vass => export_vass_text(&v),
                Format::Pnml => {
                    let name = if file == "-" { "stdin" } else { file.as_str() };
                    export_pnml(&to_petri_net(&v), name)
                }
            };
            emit(out, &text)?;
        }
        Cmd::Verify { suite } => {
            let chosen: Vec<&str> = if suite == "all" {
                suite_names().collect()
            } else if suite_names().any(|s| s == suite) {
                vec![suite.as_str()]
            } else {
                return Err(CliError::Usage(format!(
                    "unknown suite {suite:?}; known: all, {}",
                    suite_names().collect::<Vec<_>>().join(", ")
                )));
            };
            let mut all = true;
            for name in chosen {
                let v = run_suite(name).expect("known suite");
                println!("{v}");
                all &= v.pass;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

/// Worker count from `TOWERFORGE_THREADS` (unset or 0 means automatic).
pub fn configure_threads() {
    let n = std::env::var("TOWERFORGE_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Exit codes: 0 success, 1 failure, 2 usage error.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
