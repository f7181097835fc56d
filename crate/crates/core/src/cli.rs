//! Command-line front end. `run` takes the argument vector and two output
//! streams and returns the process exit code.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::engine::{normalize, Verdict};
use crate::model::{ConstraintStore, Sort, Sym, Var};
use crate::oracle::{brute_force_consistent, OracleBudget};
use crate::semantics::{canonical_model, linearize, order_to_constraints, SemanticsError};
use crate::syntax::{format_constraint, parse_program, print_store};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INCONSISTENT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "plogic", version, about = "Feature logic with linear precedence constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalize a constraint file and print the normal form or the clash.
    Solve {
        file: PathBuf,
        /// Print every rule firing before the result.
        #[arg(long)]
        trace: bool,
    },
    /// Print the canonical model of a consistent constraint file.
    Model { file: PathBuf },
    /// Print a linear order of the variables ordered by a precedence.
    Linearize {
        file: PathBuf,
        #[arg(long = "prec")]
        prec: String,
    },
    /// Check whether a word order is compatible with a constraint file.
    OrderCheck {
        file: PathBuf,
        #[arg(long = "prec")]
        prec: String,
        /// Comma-separated variable names.
        #[arg(long = "order")]
        order: String,
    },
    /// Decide satisfiability by exhaustive search over small models.
    Oracle {
        file: PathBuf,
        /// Largest universe to try; defaults to the number of variables.
        #[arg(long = "max-universe")]
        max_universe: Option<usize>,
        /// Cap on the total size of the enumerated relations, in pairs.
        #[arg(long = "max-relation-bits", default_value_t = 32)]
        max_relation_bits: usize,
    },
}

/// Failure that ends a command early, with the exit code to report.
struct Exit(i32, String);

type Outcome = Result<i32, Exit>;

fn usage(msg: impl Into<String>) -> Exit {
    Exit(EXIT_USAGE, msg.into())
}

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(Exit(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

fn load(file: &PathBuf) -> Result<ConstraintStore, Exit> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| usage(format!("cannot read {}: {e}", file.display())))?;
    parse_program(&text).map_err(|e| usage(format!("{}:{e}", file.display())))
}

fn precedence(store: &ConstraintStore, name: &str) -> Result<Sym, Exit> {
    let p = Sym::new(name);
    store
        .signature()
        .expect(&p, Sort::Precedence)
        .map_err(|e| usage(e.to_string()))?;
    Ok(p)
}

fn clash_line(out: &mut dyn Write, verdict: &Verdict) -> std::io::Result<()> {
    if let Verdict::Clash(w) = verdict {
        writeln!(out, "CLASH: {}", format_constraint(w))?;
    }
    Ok(())
}

fn io(e: std::io::Error) -> Exit {
    Exit(EXIT_USAGE, format!("write failed: {e}"))
}

fn dispatch(command: Command, out: &mut dyn Write) -> Outcome {
    match command {
        Command::Solve { file, trace } => {
            let store = load(&file)?;
            let run = normalize(&store);
            if trace {
                for step in &run.trace {
                    writeln!(out, "{step}").map_err(io)?;
                }
            }
            match &run.verdict {
                Verdict::Consistent(nf) => {
                    out.write_all(print_store(nf).as_bytes()).map_err(io)?;
                    Ok(EXIT_OK)
                }
                v => {
                    clash_line(out, v).map_err(io)?;
                    Ok(EXIT_INCONSISTENT)
                }
            }
        }
        Command::Model { file } => {
            let store = load(&file)?;
            let verdict = normalize(&store).verdict;
            let Verdict::Consistent(nf) = &verdict else {
                clash_line(out, &verdict).map_err(io)?;
                return Ok(EXIT_INCONSISTENT);
            };
            let (interp, assign) = canonical_model(nf).map_err(|e| usage(e.to_string()))?;
            let mut lines = BTreeSet::new();
            for (sym, _) in interp.symbols() {
                for (a, b) in interp.pairs(sym) {
                    lines.insert(format!("REL {sym} : {} -> {}", interp.label(a), interp.label(b)));
                }
            }
            for line in &lines {
                writeln!(out, "{line}").map_err(io)?;
            }
            for (var, &e) in &assign {
                if interp.label(e) != var.as_str() {
                    writeln!(out, "BIND {var} := {}", interp.label(e)).map_err(io)?;
                }
            }
            Ok(EXIT_OK)
        }
        Command::Linearize { file, prec } => {
            let store = load(&file)?;
            let p = precedence(&store, &prec)?;
            let verdict = normalize(&store).verdict;
            let Verdict::Consistent(nf) = &verdict else {
                clash_line(out, &verdict).map_err(io)?;
                return Ok(EXIT_INCONSISTENT);
            };
            match linearize(nf, &p) {
                Ok(order) => {
                    let names: Vec<&str> = order.iter().map(Var::as_str).collect();
                    writeln!(out, "ORDER: {}", names.join(", ")).map_err(io)?;
                    Ok(EXIT_OK)
                }
                Err(SemanticsError::NotLinearizable) => {
                    writeln!(out, "NOT LINEARIZABLE").map_err(io)?;
                    Ok(EXIT_INCONSISTENT)
                }
                Err(e) => Err(usage(e.to_string())),
            }
        }
        Command::OrderCheck { file, prec, order } => {
            let mut store = load(&file)?;
            let p = precedence(&store, &prec)?;
            let known = store.all_variables();
            let order: Vec<Var> = order
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(Var::new)
                .collect();
            if let Some(v) = order.iter().find(|v| !known.contains(*v)) {
                return Err(usage(format!("`{v}` is not a variable of {}", file.display())));
            }
            let extra = order_to_constraints(store.signature(), &order, &p)
                .map_err(|e| usage(e.to_string()))?;
            for c in extra {
                store.add_constraint(c).map_err(|e| usage(e.to_string()))?;
            }
            if normalize(&store).verdict.is_consistent() {
                writeln!(out, "CONSISTENT").map_err(io)?;
                Ok(EXIT_OK)
            } else {
                writeln!(out, "INCONSISTENT").map_err(io)?;
                Ok(EXIT_INCONSISTENT)
            }
        }
        Command::Oracle {
            file,
            max_universe,
            max_relation_bits,
        } => {
            let store = load(&file)?;
            let budget = OracleBudget {
                max_universe: max_universe
                    .unwrap_or_else(|| store.all_variables().len())
                    .max(1),
                max_relation_bits,
            };
            match brute_force_consistent(&store, budget) {
                Ok(sat) => {
                    writeln!(out, "{}", if sat { "SAT" } else { "UNSAT" }).map_err(io)?;
                    Ok(if sat { EXIT_OK } else { EXIT_INCONSISTENT })
                }
                Err(e) => Err(Exit(EXIT_BUDGET, e.to_string())),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv: Vec<&str> = std::iter::once("plogic").chain(args.iter().copied()).collect();
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(call(&["solve", "/nonexistent/file.lp"]).0, EXIT_USAGE);
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("order-check"));
    }
}
