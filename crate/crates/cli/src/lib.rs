//! Command-line front-end: every subcommand reads a network file and prints
//! JSON (compact unless `--pretty`), a partition string, DOT or CSV.
//!
//! Exit codes: 0 on success, 1 on a domain error (unbalanced partition,
//! exceeded budget, diverging simulation) with a JSON error on stderr, 2 on
//! usage or parse errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use synchro::balance::{self, mp_table, Balance, BalanceError, Counterexample};
use synchro::cir::{cir, top};
use synchro::dynamics::{simulate_map, simulate_ode, unbalance_witness, DynamicsError, OracleSpec};
use synchro::lattice::{enumerate_balanced, LatticeError, DEFAULT_BUDGET};
use synchro::network::{self, Network};
use synchro::Partition;

#[derive(Debug, Parser)]
#[command(name = "synchro", version, about = "Balanced partitions and synchrony of weighted coupled cell networks")]
pub struct Cli {
    /// Indented JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the schema and typing of a network file.
    Validate { network: PathBuf },
    /// Decide whether a partition is balanced.
    Balanced {
        network: PathBuf,
        /// Partition as `id,id;id;...`.
        #[arg(short, long)]
        partition: String,
    },
    /// Coarsest invariant refinement, with the full iteration trace.
    Cir {
        network: PathBuf,
        /// Seed partition; defaults to the type partition.
        #[arg(short, long)]
        partition: Option<String>,
    },
    /// The maximal balanced partition.
    Top { network: PathBuf },
    /// Quotient network of a balanced partition.
    Quotient {
        network: PathBuf,
        #[arg(short, long)]
        partition: String,
        /// Write the quotient here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Every balanced partition and the Hasse diagram.
    Lattice {
        network: PathBuf,
        /// Maximum number of elements before giving up.
        #[arg(long, env = "SYNCHRO_BUDGET", default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = LatticeFormat::Json)]
        format: LatticeFormat,
    },
    /// Simulate admissible dynamics and print the trajectory as CSV.
    Simulate {
        network: PathBuf,
        /// Oracle spec file.
        #[arg(long)]
        oracle: PathBuf,
        /// Initial state, comma-separated, one value per cell (or a file
        /// holding such a line).
        #[arg(long)]
        x0: String,
        /// Iterate the map this many times.
        #[arg(long, required_unless_present = "tend", conflicts_with = "tend")]
        steps: Option<usize>,
        /// Integrate the ODE up to this time.
        #[arg(long, requires = "dt")]
        tend: Option<f64>,
        /// RK4 step.
        #[arg(long, requires = "tend")]
        dt: Option<f64>,
    },
    /// An admissible map leaving the polydiagonal of an unbalanced partition.
    Witness {
        network: PathBuf,
        #[arg(short, long)]
        partition: String,
    },
    /// Graphviz rendering, optionally colored by a partition.
    Dot {
        network: PathBuf,
        #[arg(short, long)]
        partition: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LatticeFormat {
    Json,
    Dot,
}

/// A failed command: exit code and the JSON written to stderr.
#[derive(Debug)]
struct Failure {
    code: i32,
    body: Value,
}

fn usage(kind: &str, message: impl ToString) -> Failure {
    Failure { code: 2, body: json!({ "error": kind, "message": message.to_string() }) }
}

fn domain(kind: &str, message: impl ToString, extra: Value) -> Failure {
    let mut body = json!({ "error": kind, "message": message.to_string() });
    if let (Value::Object(map), Value::Object(more)) = (&mut body, extra) {
        map.extend(more);
    }
    Failure { code: 1, body }
}

struct Output {
    text: String,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage("io", format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Network, Failure> {
    network::parse(&read(path)?).map_err(|e| usage("parse", format!("{}: {e}", path.display())))
}

fn partition(net: &Network, text: &str) -> Result<Partition, Failure> {
    net.parse_partition(text).map_err(|e| usage("partition", e))
}

fn counterexample_json(net: &Network, p: &Partition, cx: &Counterexample) -> Value {
    let sum = |cell: usize| {
        balance::row_signature(net, p, cell).map(|s| s.sums[cx.color].to_string()).unwrap_or_default()
    };
    let class = p.classes()[cx.color].iter().map(|&c| net.cell_ids()[c].clone()).collect::<Vec<_>>().join(",");
    json!({
        "cells": [net.cell_ids()[cx.first], net.cell_ids()[cx.second]],
        "color": cx.color + 1,
        "class": class,
        "sums": [sum(cx.first), sum(cx.second)],
    })
}

fn balance_failure(net: &Network, p: &Partition, err: BalanceError) -> Failure {
    match err {
        BalanceError::NotBalanced(cx) => {
            let ids = net.cell_ids();
            let message = format!(
                "partition is not balanced: cells {} and {} receive different input from color {}",
                ids[cx.first],
                ids[cx.second],
                cx.color + 1
            );
            domain("not_balanced", message, json!({ "counterexample": counterexample_json(net, p, &cx) }))
        }
        BalanceError::TypeIncompatible => domain("type_incompatible", err, json!({})),
        BalanceError::Partition(_) => usage("partition", err),
        other => domain("monoid", other, json!({})),
    }
}

fn render(value: &Value, pretty: bool) -> String {
    let mut text = if pretty {
        serde_json::to_string_pretty(value).expect("serializable")
    } else {
        serde_json::to_string(value).expect("serializable")
    };
    text.push('\n');
    text
}

fn validate(net: &Network) -> Value {
    let names = net.type_names();
    let monoids: Vec<Value> = net
        .registry()
        .iter()
        .map(|((t, s), spec)| json!({ "target_type": names[*t], "source_type": names[*s], "monoid": spec.name() }))
        .collect();
    json!({
        "valid": true,
        "cells": net.cell_count(),
        "types": names,
        "edges": net.edge_count(),
        "monoids": monoids,
    })
}

fn table_json(net: &Network, p: &Partition) -> Result<Value, Failure> {
    let table = mp_table(net, p).map_err(|e| balance_failure(net, p, e))?;
    Ok(Value::Array(
        table
            .iter()
            .map(|row| Value::Array(row.iter().map(|w| Value::String(w.to_string())).collect()))
            .collect(),
    ))
}

fn cir_json(net: &Network, seed: &Partition) -> Result<Value, Failure> {
    let trace = cir(net, seed).map_err(|e| balance_failure(net, seed, e))?;
    let mut steps = Vec::new();
    let mut input = seed.clone();
    for ((output, rank), stats) in trace.iterations.iter().zip(&trace.stats) {
        steps.push(json!({
            "input": net.format_partition(&input),
            "mp": table_json(net, &input)?,
            "output": net.format_partition(output),
            "rank": rank,
            "ops": {
                "entries_summed": stats.ops.entries_summed,
                "key_entries": stats.ops.key_entries,
                "probes": stats.ops.probes,
            },
        }));
        input = output.clone();
    }
    Ok(json!({
        "seed": net.format_partition(seed),
        "iterations": steps,
        "converged": net.format_partition(&trace.converged),
        "refinements": trace.refinements(),
    }))
}

fn state_vector(text: &str, cells: usize) -> Result<Vec<f64>, Failure> {
    let parse = |s: &str| -> Option<Vec<f64>> {
        s.trim().split(',').map(|v| v.trim().parse::<f64>().ok()).collect()
    };
    let values = match parse(text) {
        Some(v) => v,
        None if Path::new(text).is_file() => {
            parse(&read(Path::new(text))?).ok_or_else(|| usage("state", format!("{text}: not a list of numbers")))?
        }
        None => return Err(usage("state", format!("{text:?} is not a comma-separated list of numbers"))),
    };
    if values.len() != cells {
        return Err(usage("state", format!("initial state has {} values, network has {cells} cells", values.len())));
    }
    Ok(values)
}

fn dynamics_failure(err: DynamicsError) -> Failure {
    match err {
        DynamicsError::NonFinite { step, ref cell } => {
            domain("non_finite", &err, json!({ "step": step, "cell": cell }))
        }
        DynamicsError::Balanced => domain("balanced", err, json!({})),
        DynamicsError::InvalidStep(_) | DynamicsError::InvalidEndTime(_) | DynamicsError::DimensionMismatch { .. } => {
            usage("state", err)
        }
        other => domain("simulation", other, json!({})),
    }
}

fn execute(cli: &Cli) -> Result<Output, Failure> {
    let pretty = cli.pretty;
    let json_out = |v: Value| Ok(Output { text: render(&v, pretty) });
    match &cli.command {
        Command::Validate { network } => json_out(validate(&load(network)?)),
        Command::Balanced { network, partition: text } => {
            let net = load(network)?;
            let p = partition(&net, text)?;
            match balance::is_balanced(&net, &p).map_err(|e| balance_failure(&net, &p, e))? {
                Balance::Balanced => json_out(json!({ "balanced": true, "partition": net.format_partition(&p) })),
                Balance::Unbalanced(cx) => Err(balance_failure(&net, &p, BalanceError::NotBalanced(cx))),
            }
        }
        Command::Cir { network, partition: text } => {
            let net = load(network)?;
            let seed = match text {
                Some(t) => partition(&net, t)?,
                None => net.type_partition(),
            };
            json_out(cir_json(&net, &seed)?)
        }
        Command::Top { network } => {
            let net = load(network)?;
            Ok(Output { text: format!("{}\n", net.format_partition(&top(&net))) })
        }
        Command::Quotient { network, partition: text, output } => {
            let net = load(network)?;
            let p = partition(&net, text)?;
            let q = balance::quotient(&net, &p).map_err(|e| balance_failure(&net, &p, e))?;
            let mut text = network::serialize(&q.quotient);
            text.push('\n');
            match output {
                Some(path) => {
                    std::fs::write(path, &text).map_err(|e| usage("io", format!("{}: {e}", path.display())))?;
                    Ok(Output { text: String::new() })
                }
                None => Ok(Output { text }),
            }
        }
        Command::Lattice { network, budget, format } => {
            let net = load(network)?;
            match enumerate_balanced(&net, *budget) {
                Ok(lattice) => match format {
                    LatticeFormat::Dot => Ok(Output { text: lattice.to_dot(&net) }),
                    LatticeFormat::Json => {
                        let mut v = lattice.to_json(&net);
                        v["complete"] = Value::Bool(true);
                        json_out(v)
                    }
                },
                Err(err @ LatticeError::BudgetExceeded { .. }) => {
                    let LatticeError::BudgetExceeded { budget, ref partial } = err else { unreachable!() };
                    let mut v = partial.to_json(&net);
                    v["complete"] = Value::Bool(false);
                    Err(domain("budget_exceeded", &err, json!({ "budget": budget, "partial": v })))
                }
                Err(other) => Err(domain("lattice", other, json!({}))),
            }
        }
        Command::Simulate { network, oracle, x0, steps, tend, dt } => {
            let net = load(network)?;
            let spec = OracleSpec::parse(&read(oracle)?).map_err(|e| usage("oracle", format!("{}: {e}", oracle.display())))?;
            spec.validate_for(&net).map_err(|e| usage("oracle", e))?;
            let x = state_vector(x0, net.cell_count())?;
            let traj = match (steps, tend, dt) {
                (Some(n), _, _) => simulate_map(&net, &spec, &x, *n),
                (None, Some(t), Some(h)) => simulate_ode(&net, &spec, &x, *t, *h),
                _ => unreachable!("clap enforces --steps or --tend with --dt"),
            }
            .map_err(dynamics_failure)?;
            Ok(Output { text: traj.to_csv(net.cell_ids()) })
        }
        Command::Witness { network, partition: text } => {
            let net = load(network)?;
            let p = partition(&net, text)?;
            let w = unbalance_witness(&net, &p).map_err(|e| match e {
                DynamicsError::Balance(b) => balance_failure(&net, &p, b),
                other => dynamics_failure(other),
            })?;
            let verified = w.verify(&net, &p).map_err(dynamics_failure)?;
            json_out(json!({
                "partition": net.format_partition(&p),
                "counterexample": counterexample_json(&net, &p, &w.counterexample),
                "oracle": {
                    "kind": "indicator",
                    "target_type": w.oracle.target_type,
                    "source_type": w.oracle.source_type,
                    "target_state": w.oracle.target_state,
                    "signature": w.oracle.signature.to_string(),
                    "on_match": w.oracle.on_match,
                    "otherwise": w.oracle.otherwise,
                },
                "state": w.state,
                "output": w.output,
                "verified": verified,
            }))
        }
        Command::Dot { network, partition: text } => {
            let net = load(network)?;
            let p = text.as_deref().map(|t| partition(&net, t)).transpose()?;
            let dot = network::to_dot(&net, p.as_ref()).map_err(|e| usage("partition", e))?;
            Ok(Output { text: dot })
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 2 } else { 0 };
            let text = err.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.text.as_bytes());
            0
        }
        Err(failure) => {
            let _ = stderr.write_all(render(&failure.body, cli.pretty).as_bytes());
            failure.code
        }
    }
}
