//! `cdesign`: command-line front end for the causal-design library.
//!
//! Every subcommand is a thin adapter: it reads files, calls one library
//! entry point, and prints the result. Exit codes are part of the
//! interface: 0 success, 1 parse/validation problems, 2 a query that is not
//! identifiable, 3 data that does not match the design, 4 designs the
//! numeric operations do not support (shared selection, oversized state
//! spaces). With `--json`, failures print one machine-readable JSON object
//! to stderr.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use serde_json::{json, Value};

use causal_design::estimate::EstimateError;
use causal_design::likelihood::{self, LikelihoodError};
use causal_design::model::{ModelError, DEFAULT_STATE_CAP};
use causal_design::simulate::SimulateError;
use causal_design::{
    build_graph, canonical_dsl, classify_missingness, collapse_missingness,
    collapse_selection_diagram, d_separated, expected_frequencies, fit_mle, identify,
    saturated_binary_parametrization, simulate_dataset, DesignGraph, FitOptions, FrequencyTable,
    NodeKind, ParamMap,
};

const EXIT_INVALID: u8 = 1;
const EXIT_NOT_IDENTIFIABLE: u8 = 2;
const EXIT_DATA_MISMATCH: u8 = 3;
const EXIT_UNSUPPORTED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cdesign",
    about = "Analyze causal graphs that carry their own study design",
    version
)]
struct Cli {
    /// Print machine-readable JSON (results where applicable, errors on
    /// stderr).
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a design graph; exit 0 iff it is well-formed.
    Validate {
        /// Design graph file (DSL).
        graph: PathBuf,
    },
    /// Render a design graph as DOT with causal order on x and stage on y.
    Render {
        graph: PathBuf,
        /// Output DOT file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Identify a causal effect among the observable variables.
    Identify {
        graph: PathBuf,
        /// Treatment variable.
        #[arg(long)]
        treat: String,
        /// Outcome variable.
        #[arg(long)]
        outcome: String,
    },
    /// Check d-separation between two sets given a third.
    Ci {
        graph: PathBuf,
        /// First set of nodes.
        #[arg(long, num_args = 1.., required = true)]
        a: Vec<String>,
        /// Second set of nodes.
        #[arg(long, num_args = 1.., required = true)]
        b: Vec<String>,
        /// Conditioning set (may be empty).
        #[arg(long, num_args = 0..)]
        given: Vec<String>,
    },
    /// Classify the missingness mechanism of one measured variable.
    Classify {
        graph: PathBuf,
        /// Causal variable with a measurement.
        #[arg(long)]
        var: String,
    },
    /// Collapse a design graph to a missingness graph or selection diagram.
    #[command(group(ArgGroup::new("target").required(true).args(["missingness", "selection_diagram"])))]
    Collapse {
        graph: PathBuf,
        /// Produce the missingness-graph collapse.
        #[arg(long)]
        missingness: bool,
        /// Produce the selection diagram for source nodes S, given as
        /// `S=V1,V2` (the `S=` prefix is optional).
        #[arg(long, value_name = "S=V1,V2")]
        selection_diagram: Option<String>,
    },
    /// Write the observed-data likelihood stratified by selection.
    Factorize {
        graph: PathBuf,
        /// Integrate out variables without records.
        #[arg(long)]
        marginalize: bool,
    },
    /// Fit the saturated binary parametrization to observed counts.
    Fit {
        graph: PathBuf,
        /// Counts CSV (`var1,...,varK,count`, NA for hidden values).
        #[arg(long)]
        data: PathBuf,
        /// Interventional risks to report, e.g. `do(X=1)`.
        #[arg(long, num_args = 1.., value_name = "do(X=v)")]
        effects: Vec<String>,
        /// Seed for optimizer restarts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sample a population (or enumerate its exact expectation) as counts.
    Simulate {
        graph: PathBuf,
        /// Parameter JSON file (name -> value).
        #[arg(long)]
        params: PathBuf,
        /// Population size.
        #[arg(long)]
        n: u64,
        /// Sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Emit exact expected counts instead of sampling.
        #[arg(long)]
        expected: bool,
        /// Output CSV path; a sampled dataset also writes a metadata
        /// sidecar next to it (`<out>.meta.json`). Defaults to stdout
        /// (metadata on stderr).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with its exit code and a stable machine-readable kind.
struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(code: u8, kind: &'static str, message: impl ToString) -> Self {
        CliError { code, kind, message: message.to_string() }
    }

    fn invalid(message: impl ToString) -> Self {
        CliError::new(EXIT_INVALID, "invalid-input", message)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // Usage problems are invocation validation: exit 1, not clap's
            // default, so code 2 stays reserved for non-identifiability.
            eprint!("{e}");
            return ExitCode::from(EXIT_INVALID);
        }
        Err(e) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if json {
                let payload = json!({
                    "schema": "cdesign/error/1",
                    "error": {"code": e.code, "kind": e.kind, "message": e.message},
                });
                eprintln!("{payload}");
            } else {
                eprintln!("error: {}", e.message);
            }
            ExitCode::from(e.code)
        }
    }
}

fn read_graph(path: &Path) -> Result<DesignGraph, CliError> {
    let src = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    build_graph(&src).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Validate { graph } => {
            let g = read_graph(&graph)?;
            let causal = g.causal_ids().len();
            let selections = g.selection_ids().len();
            let data = g.data_ids().len();
            println!(
                "ok: {} ({causal} causal, {selections} selection, {data} data nodes)",
                g.name()
            );
            Ok(0)
        }
        Command::Render { graph, out } => {
            let g = read_graph(&graph)?;
            let dot = render_dot(&g).map_err(CliError::invalid)?;
            fs::write(&out, dot)
                .map_err(|e| CliError::invalid(format!("{}: {e}", out.display())))?;
            Ok(0)
        }
        Command::Identify { graph, treat, outcome } => {
            let g = read_graph(&graph)?;
            let result = identify(&g, &[treat.as_str()], &[outcome.as_str()])
                .map_err(CliError::invalid)?;
            if cli.json {
                let payload = json!({
                    "schema": "cdesign/identify/1",
                    "identifiable": result.identifiable,
                    "text": result.text,
                    "estimand": result.estimand.as_ref().map(causal_design::expr::to_json),
                    "hedge": result.hedge.as_ref().map(|h| json!({
                        "outer": h.outer,
                        "inner": h.inner,
                    })),
                });
                println!("{payload}");
            } else if result.identifiable {
                println!("{}", result.text.as_deref().unwrap_or_default());
            } else {
                let hedge = result.hedge.as_ref().expect("non-identifiable results carry a witness");
                println!(
                    "not identifiable: confounded sets {{{}}} within {{{}}}",
                    hedge.inner.join(", "),
                    hedge.outer.join(", ")
                );
            }
            Ok(if result.identifiable { 0 } else { EXIT_NOT_IDENTIFIABLE })
        }
        Command::Ci { graph, a, b, given } => {
            let g = read_graph(&graph)?;
            let separated = d_separated(&g, &a, &b, &given).map_err(CliError::invalid)?;
            if cli.json {
                println!(
                    "{}",
                    json!({"schema": "cdesign/ci/1", "separated": separated})
                );
            } else {
                println!("{separated}");
            }
            Ok(0)
        }
        Command::Classify { graph, var } => {
            let g = read_graph(&graph)?;
            let report = classify_missingness(&g, &var).map_err(CliError::invalid)?;
            let class = serde_json::to_value(report.class)
                .expect("classes serialize to strings");
            let class = class.as_str().expect("class names are strings").to_string();
            if cli.json {
                println!(
                    "{}",
                    json!({
                        "schema": "cdesign/classify/1",
                        "var": var,
                        "class": class,
                        "witness": report.witness,
                    })
                );
            } else {
                println!("{class}: {}", report.witness.join(" -> "));
            }
            Ok(0)
        }
        Command::Collapse { graph, missingness, selection_diagram } => {
            let g = read_graph(&graph)?;
            let collapsed = if missingness {
                collapse_missingness(&g)
            } else {
                let spec = selection_diagram.expect("clap enforces the argument group");
                let list = spec.strip_prefix("S=").unwrap_or(&spec);
                let sources: Vec<&str> =
                    list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                if sources.is_empty() {
                    return Err(CliError::invalid("selection diagram needs at least one source"));
                }
                collapse_selection_diagram(&g, &sources).map_err(CliError::invalid)?
            };
            print!("{}", canonical_dsl(&collapsed));
            Ok(0)
        }
        Command::Factorize { graph, marginalize } => {
            let g = read_graph(&graph)?;
            let mut f = likelihood::factorize(&g).map_err(map_likelihood)?;
            if marginalize {
                f = likelihood::marginalize(&f, &g);
            }
            if cli.json {
                let mut payload = likelihood::to_json(&f);
                payload["schema"] = Value::from("cdesign/factorize/1");
                println!("{payload}");
            } else {
                print!("{}", likelihood::to_text(&f));
            }
            Ok(0)
        }
        Command::Fit { graph, data, effects, seed } => {
            let g = read_graph(&graph)?;
            let table = FrequencyTable::from_csv_path(&data)
                .map_err(|e| CliError::new(EXIT_DATA_MISMATCH, "bad-data", e))?;
            let model = saturated_binary_parametrization(&g).map_err(CliError::invalid)?;
            let effects = effects
                .iter()
                .map(|s| parse_effect(s))
                .collect::<Result<Vec<_>, _>>()?;
            let opts = FitOptions { seed, effects, ..FitOptions::default() };
            let fit = fit_mle(&g, &model, &table, &opts).map_err(map_estimate)?;
            let mut payload = serde_json::to_value(&fit).expect("fit results serialize");
            payload["schema"] = Value::from("cdesign/fit/1");
            println!("{}", serde_json::to_string_pretty(&payload).expect("valid JSON"));
            Ok(0)
        }
        Command::Simulate { graph, params, n, seed, expected, out } => {
            let g = read_graph(&graph)?;
            let raw = fs::read_to_string(&params)
                .map_err(|e| CliError::invalid(format!("{}: {e}", params.display())))?;
            let params: ParamMap = serde_json::from_str(&raw)
                .map_err(|e| CliError::invalid(format!("parameter file: {e}")))?;
            let model = saturated_binary_parametrization(&g).map_err(CliError::invalid)?;
            if expected {
                let table = expected_frequencies(&g, &model, &params, n, DEFAULT_STATE_CAP)
                    .map_err(map_simulate)?;
                emit(out.as_deref(), &table.to_csv_string())?;
            } else {
                let (table, meta) =
                    simulate_dataset(&g, &model, &params, n, seed).map_err(map_simulate)?;
                let meta =
                    serde_json::to_string_pretty(&meta).expect("metadata serializes");
                match &out {
                    Some(path) => {
                        table.to_csv_path(path).map_err(|e| {
                            CliError::invalid(format!("{}: {e}", path.display()))
                        })?;
                        let sidecar = sidecar_path(path);
                        fs::write(&sidecar, meta).map_err(|e| {
                            CliError::invalid(format!("{}: {e}", sidecar.display()))
                        })?;
                    }
                    None => {
                        print!("{}", table.to_csv_string());
                        eprintln!("{meta}");
                    }
                }
            }
            Ok(0)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::invalid(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    csv.with_file_name(name)
}

/// Parses `do(X=1)` into `("X", "1")`.
fn parse_effect(spec: &str) -> Result<(String, String), CliError> {
    let inner = spec
        .strip_prefix("do(")
        .and_then(|rest| rest.strip_suffix(')'))
        .ok_or_else(|| CliError::invalid(format!("effect `{spec}` is not of the form do(X=v)")))?;
    let (var, value) = inner
        .split_once('=')
        .ok_or_else(|| CliError::invalid(format!("effect `{spec}` is not of the form do(X=v)")))?;
    Ok((var.trim().to_string(), value.trim().to_string()))
}

fn map_likelihood(e: LikelihoodError) -> CliError {
    match e {
        LikelihoodError::NotAChain(_) => CliError::new(EXIT_UNSUPPORTED, "unsupported-design", e),
        LikelihoodError::RowMatchesNoStratum { .. } | LikelihoodError::NonfiniteLogLik { .. } => {
            CliError::new(EXIT_DATA_MISMATCH, "data-mismatch", e)
        }
        LikelihoodError::Model(m) => map_model(m),
        LikelihoodError::Graph(_) => CliError::invalid(e),
    }
}

fn map_model(e: ModelError) -> CliError {
    match e {
        ModelError::StateSpaceTooLarge { .. } => {
            CliError::new(EXIT_UNSUPPORTED, "state-space-too-large", e)
        }
        ModelError::UnknownVariable(_)
        | ModelError::BadValue { .. }
        | ModelError::BadRow { .. }
        | ModelError::Csv(_) => CliError::new(EXIT_DATA_MISMATCH, "data-mismatch", e),
        _ => CliError::invalid(e),
    }
}

fn map_estimate(e: EstimateError) -> CliError {
    match e {
        EstimateError::SharedSelectionUnsupported { .. } => {
            CliError::new(EXIT_UNSUPPORTED, "shared-selection", e)
        }
        EstimateError::NoInteriorPoint => CliError::new(EXIT_DATA_MISMATCH, "data-mismatch", e),
        EstimateError::WrongModelFamily(_) => CliError::invalid(e),
        EstimateError::Likelihood(inner) => map_likelihood(inner),
        EstimateError::Model(inner) => map_model(inner),
    }
}

fn map_simulate(e: SimulateError) -> CliError {
    match e {
        SimulateError::SharedSelectionUnsupported { .. } => {
            CliError::new(EXIT_UNSUPPORTED, "shared-selection", e)
        }
        SimulateError::Model(inner) => map_model(inner),
        SimulateError::Graph(_) => CliError::invalid(e),
    }
}

/// DOT text for a design graph. Causal nodes sit at x = their causal-order
/// layer; a measurement shares its variable's x; selection nodes (and the
/// population) sit one column to the left of the causal block. Stages grow
/// downward on y. Glyphs follow the information attribute: circles for
/// random values, diamonds for design-determined ones, filled when the
/// analyst sees the value.
fn render_dot(g: &DesignGraph) -> Result<String, String> {
    let src = g.as_graph();
    let layers = g.causal_projection().topo_layers().map_err(|e| e.to_string())?;
    let stages = src.stages().map_err(|e| e.to_string())?;

    let x_of = |ix: usize| -> Result<i64, String> {
        let node = src.node(ix);
        match node.kind {
            NodeKind::Causal => Ok(layers[&node.id] as i64),
            NodeKind::Selection => Ok(-1),
            NodeKind::Data => {
                let (causal, _) = g.measured_pair(&node.id).map_err(|e| e.to_string())?;
                Ok(layers[causal] as i64)
            }
        }
    };

    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", g.name());
    let _ = writeln!(out, "  layout=neato;");
    let _ = writeln!(out, "  node [fontsize=12, width=0.5, fixedsize=true];");
    let mut occupied: std::collections::BTreeMap<(i64, i64), i64> = Default::default();
    for ix in 0..src.len() {
        let node = src.node(ix);
        let (shape, filled) = node.info.glyph();
        let style = if filled { "filled" } else { "empty" };
        // Stages grow downward; nodes sharing a cell fan out below it.
        let x = x_of(ix)?;
        let slot = occupied.entry((x, stages[ix])).or_insert(0);
        let depth = stages[ix] as f64 + 0.4 * *slot as f64;
        let y = if depth == 0.0 { 0.0 } else { -depth };
        *slot += 1;
        let _ = writeln!(
            out,
            "  \"{}\" [shape={shape}, style={style}, pos=\"{x},{y}!\"];",
            node.id
        );
    }
    for (from, to) in src.edge_ids() {
        let _ = writeln!(out, "  \"{from}\" -> \"{to}\";");
    }
    let _ = writeln!(out, "}}");
    Ok(out)
}
