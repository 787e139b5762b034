//! `pepa` — grouped-PEPA aggregation toolkit.
//!
//! Subcommands cover the pipeline: `parse`, `check`, `reduce`, `aggregate`,
//! `solve`, `verify`, `compare`, `analyze`, plus the bundled `table1`
//! experiment. Set `PEPA_LOG` for logging verbosity.

use clap::{Parser, Subcommand, ValueEnum};
use pepa_cli::experiment::{self, ExperimentSpec, Mode};
use pepa::analysis::{
    check_aggregation_condition, classify, reduce, ActionClassification, ConditionReport,
    GroupPartition,
};
use pepa::export::{
    ctmc_to_json, distribution_to_csv, generator_to_matrix_market, trajectory_to_csv,
};
use pepa::solve::{
    build_marginal_odes, steady_state, transient, Distribution, Integrator, TransientOptions,
};
use pepa::statespace::{format_counts, generate_ctmc, Ctmc, GenerateOptions};
use pepa::syntax::{parse_model, GroupedModel};
use pepa::verify::{
    boundary_states, collapse_ck, compare_generators, cross_rates, partition_subchains,
};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

// Exit codes, one per failure class.
const EXIT_PIPELINE: u8 = 11;
const EXIT_CONDITION_FAILED: u8 = 12;
const EXIT_REDUCTION_EMPTY: u8 = 13;
const EXIT_STATE_CAP: u8 = 14;
const EXIT_REDUCIBLE: u8 = 15;
const EXIT_IRREGULAR: u8 = 16;
const EXIT_INCOMPLETE: u8 = 17;
const EXIT_TOLERANCE: u8 = 18;
const EXIT_IO: u8 = 19;
const EXIT_VERIFY_FAILED: u8 = 20;
const EXIT_PARSE: u8 = 10;

#[derive(Parser)]
#[command(name = "pepa", version, about = "Grouped PEPA models: aggregation, verification and solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Exact,
    Approx,
    Both,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Approx => Mode::Approximate,
            ModeArg::Both => Mode::Both,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file and print its canonical form.
    Parse {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the size partition, action classification and aggregation-
    /// condition report as JSON; exits non-zero unless the condition holds.
    Check {
        model: PathBuf,
        /// Population threshold separating small from large groups.
        #[arg(long)]
        threshold: Option<u64>,
        /// Demand a passive offer in every local state, not only enabling ones.
        #[arg(long)]
        strict_condition: bool,
    },
    /// Print the reduced model (large groups removed).
    Reduce {
        model: PathBuf,
        #[arg(long)]
        threshold: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the aggregated CTMC; writes JSON and a MatrixMarket generator.
    Aggregate {
        model: PathBuf,
        #[arg(long)]
        threshold: Option<u64>,
        #[arg(long, default_value_t = GenerateOptions::default().state_cap)]
        state_cap: usize,
        /// Output directory (prints JSON to stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the steady-state distribution (or a transient trajectory).
    Solve {
        model: PathBuf,
        #[arg(long)]
        threshold: Option<u64>,
        #[arg(long, value_enum, default_value = "approx")]
        mode: ModeArg,
        #[arg(long, default_value_t = GenerateOptions::default().state_cap)]
        state_cap: usize,
        /// Comma-separated output times; solves the transient instead.
        #[arg(long)]
        times: Option<String>,
        /// Use the implicit (stiff) integrator for transients.
        #[arg(long)]
        stiff: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the aggregation from the full chain and check it: sub-chains,
    /// boundary census, rate regularity and the generator difference.
    Verify {
        model: PathBuf,
        #[arg(long)]
        threshold: Option<u64>,
        #[arg(long, default_value_t = GenerateOptions::default().state_cap)]
        state_cap: usize,
        /// Collapse even when the cross-rate table is irregular.
        #[arg(long)]
        force_collapse: bool,
    },
    /// Sweep parameters and compare exact against approximate measures.
    Compare {
        model: PathBuf,
        /// Override a rates-block constant: `--set name=v1,v2,...` (repeatable;
        /// multiple sets form a Cartesian product unless --zip is given).
        #[arg(long = "set")]
        sets: Vec<String>,
        /// Zip override lists case-by-case instead of taking the product.
        #[arg(long)]
        zip: bool,
        /// Measure over small-group counts: `--measure name:expr` (repeatable).
        #[arg(long = "measure")]
        measure_args: Vec<String>,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        #[arg(long)]
        threshold: Option<u64>,
        #[arg(long, default_value_t = GenerateOptions::default().state_cap)]
        state_cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the bundled three-case client-server experiment and diff the
    /// results against the stored regression values.
    Table1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: check, reduce, aggregate and solve; writes report files.
    Analyze {
        model: PathBuf,
        #[arg(long)]
        threshold: Option<u64>,
        #[arg(long, default_value_t = GenerateOptions::default().state_cap)]
        state_cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("PEPA_LOG")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Failure {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<pepa::Error> for Failure {
    fn from(err: pepa::Error) -> Failure {
        use pepa::analysis::AnalysisError;
        use pepa::solve::SolveError;
        use pepa::statespace::StateSpaceError;
        use pepa::verify::VerifyError;
        let code = match &err {
            pepa::Error::Parse(_) => EXIT_PARSE,
            pepa::Error::Analysis(AnalysisError::ReductionEmpty) => EXIT_REDUCTION_EMPTY,
            pepa::Error::Analysis(AnalysisError::ConditionFailed { .. }) => EXIT_CONDITION_FAILED,
            pepa::Error::Analysis(_) => EXIT_PIPELINE,
            pepa::Error::StateSpace(StateSpaceError::StateCapExceeded { .. }) => EXIT_STATE_CAP,
            pepa::Error::StateSpace(StateSpaceError::IncompleteModel { .. }) => EXIT_INCOMPLETE,
            pepa::Error::StateSpace(_) => EXIT_PIPELINE,
            pepa::Error::Verify(VerifyError::IrregularRates { .. }) => EXIT_IRREGULAR,
            pepa::Error::Verify(_) => EXIT_PIPELINE,
            pepa::Error::Solve(SolveError::ReducibleChain { .. }) => EXIT_REDUCIBLE,
            pepa::Error::Solve(_) => EXIT_PIPELINE,
        };
        Failure::new(code, err.to_string())
    }
}

impl From<experiment::ExperimentError> for Failure {
    fn from(err: experiment::ExperimentError) -> Failure {
        match err {
            experiment::ExperimentError::Pipeline(e) => e.into(),
            experiment::ExperimentError::Measure(e) => Failure::new(EXIT_PARSE, e.to_string()),
            experiment::ExperimentError::ConditionFailed(n) => Failure::new(
                EXIT_CONDITION_FAILED,
                format!("aggregation condition not satisfied: {n} violation(s)"),
            ),
        }
    }
}

fn io_failure(err: std::io::Error, path: &Path) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {err}", path.display()))
}

fn read_model(path: &Path) -> Result<GroupedModel, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_failure(e, path))?;
    let model = parse_model(&text).map_err(pepa::Error::from)?;
    for warning in &model.warnings {
        log::warn!("{warning}");
    }
    Ok(model)
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent).map_err(|e| io_failure(e, parent))?;
                }
            }
            std::fs::write(path, content).map_err(|e| io_failure(e, path))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(e, dir))?;
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|e| io_failure(e, &path))
}

fn action_names(model: &GroupedModel, actions: &std::collections::BTreeSet<pepa::syntax::ActionId>) -> Vec<String> {
    actions.iter().map(|a| model.actions.name(*a).to_owned()).collect()
}

fn check_report_json(
    model: &GroupedModel,
    partition: &GroupPartition,
    classification: &ActionClassification,
    condition: &ConditionReport,
) -> serde_json::Value {
    json!({
        "partition": {
            "small": partition.small,
            "large": partition.large,
        },
        "classification": {
            "largeOnly": action_names(model, &classification.large_only),
            "smallOnly": action_names(model, &classification.small_only),
            "shared": action_names(model, &classification.shared),
        },
        "condition": condition,
        "warnings": model.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
    })
}

fn run(command: Command) -> Result<u8, Failure> {
    match command {
        Command::Parse { model, out } => {
            let model = read_model(&model)?;
            write_or_print(out.as_deref(), &model.to_text())?;
            Ok(0)
        }
        Command::Check {
            model,
            threshold,
            strict_condition,
        } => {
            let model = read_model(&model)?;
            let partition = GroupPartition::from_hints(&model, threshold);
            let classification = classify(&model, &partition).map_err(pepa::Error::from)?;
            let condition = check_aggregation_condition(&model, &partition, strict_condition)
                .map_err(pepa::Error::from)?;
            let report = check_report_json(&model, &partition, &classification, &condition);
            println!("{}", serde_json::to_string_pretty(&report).expect("serialisable"));
            Ok(if condition.satisfied { 0 } else { EXIT_CONDITION_FAILED })
        }
        Command::Reduce {
            model,
            threshold,
            out,
        } => {
            let model = read_model(&model)?;
            let partition = GroupPartition::from_hints(&model, threshold);
            let reduced = reduce(&model, &partition).map_err(pepa::Error::from)?;
            write_or_print(out.as_deref(), &reduced.to_text())?;
            Ok(0)
        }
        Command::Aggregate {
            model,
            threshold,
            state_cap,
            out,
        } => {
            let model = read_model(&model)?;
            let partition = GroupPartition::from_hints(&model, threshold);
            let condition =
                check_aggregation_condition(&model, &partition, false).map_err(pepa::Error::from)?;
            if !condition.satisfied {
                return Err(Failure::new(
                    EXIT_CONDITION_FAILED,
                    format!(
                        "aggregation condition not satisfied: {} violation(s)",
                        condition.violations.len()
                    ),
                ));
            }
            let aggregated = pepa::aggregated_ctmc(&model, &partition, GenerateOptions { state_cap })?;
            match out {
                Some(dir) => {
                    write_file(&dir, "aggregated.json", &ctmc_to_json(&aggregated))?;
                    write_file(&dir, "generator.mtx", &generator_to_matrix_market(&aggregated))?;
                    println!(
                        "aggregated chain: {} states, {} transitions -> {}",
                        aggregated.len(),
                        aggregated.transitions.len(),
                        dir.display()
                    );
                }
                None => println!("{}", ctmc_to_json(&aggregated)),
            }
            Ok(0)
        }
        Command::Solve {
            model,
            threshold,
            mode,
            state_cap,
            times,
            stiff,
            format,
            out,
        } => {
            let model = read_model(&model)?;
            let partition = GroupPartition::from_hints(&model, threshold);
            let mode: Mode = mode.into();
            let options = GenerateOptions { state_cap };
            let mut pieces: Vec<(&str, Ctmc)> = Vec::new();
            if mode.wants_approximate() {
                let condition = check_aggregation_condition(&model, &partition, false)
                    .map_err(pepa::Error::from)?;
                if !condition.satisfied {
                    return Err(Failure::new(
                        EXIT_CONDITION_FAILED,
                        "aggregation condition not satisfied".to_owned(),
                    ));
                }
                pieces.push(("approx", pepa::aggregated_ctmc(&model, &partition, options)?));
            }
            if mode.wants_exact() {
                pieces.push(("exact", generate_ctmc(&model, options).map_err(pepa::Error::from)?));
            }
            for (tag, ctmc) in &pieces {
                let content = match &times {
                    None => {
                        let pi = steady_state(ctmc).map_err(pepa::Error::from)?;
                        render_distribution(ctmc, &pi, format)
                    }
                    Some(times) => {
                        let times = parse_times(times)?;
                        let odes = build_marginal_odes(ctmc);
                        let p0 = Distribution::point(ctmc.len(), ctmc.initial);
                        let opts = TransientOptions {
                            integrator: if stiff {
                                Integrator::ImplicitTrapezoid
                            } else {
                                Integrator::RungeKutta45
                            },
                            ..Default::default()
                        };
                        let trajectory =
                            transient(&odes, &p0, &times, opts).map_err(pepa::Error::from)?;
                        trajectory_to_csv(&trajectory, &ctmc.states)
                    }
                };
                match &out {
                    Some(dir) => {
                        let ext = match (times.is_some(), format) {
                            (true, _) | (false, FormatArg::Csv) => "csv",
                            (false, FormatArg::Json) => "json",
                        };
                        let name = format!(
                            "{}_{tag}.{ext}",
                            if times.is_some() { "trajectory" } else { "steady" }
                        );
                        write_file(dir, &name, &content)?;
                        println!("{tag}: {} states -> {}", ctmc.len(), dir.join(&name).display());
                    }
                    None => print!("{content}"),
                }
            }
            Ok(0)
        }
        Command::Verify {
            model,
            threshold,
            state_cap,
            force_collapse,
        } => {
            let model = read_model(&model)?;
            let partition = GroupPartition::from_hints(&model, threshold);
            let condition =
                check_aggregation_condition(&model, &partition, false).map_err(pepa::Error::from)?;
            if !condition.satisfied {
                return Err(Failure::new(
                    EXIT_CONDITION_FAILED,
                    "aggregation condition not satisfied".to_owned(),
                ));
            }
            let options = GenerateOptions { state_cap };
            let classification = classify(&model, &partition).map_err(pepa::Error::from)?;
            let full = generate_ctmc(&model, options).map_err(pepa::Error::from)?;
            let chains =
                partition_subchains(&full, &classification, &partition).map_err(pepa::Error::from)?;
            let boundary = boundary_states(&full, &model, &partition, &classification, &chains)
                .map_err(pepa::Error::from)?;
            let table = cross_rates(&full, &chains, &boundary, &classification);
            let collapsed =
                collapse_ck(&chains, &table, force_collapse).map_err(pepa::Error::from)?;
            let aggregated = pepa::aggregated_ctmc(&model, &partition, options)?;
            let diff = compare_generators(&collapsed, &aggregated).map_err(pepa::Error::from)?;

            let irregularities: Vec<serde_json::Value> = table
                .irregularities
                .iter()
                .map(|ir| {
                    json!({
                        "action": full.action_name(ir.action),
                        "fromChain": format_counts(&chains.chains[ir.chain_from].key),
                        "toChain": format_counts(&chains.chains[ir.chain_to].key),
                        "state": format_counts(&full.states[ir.state]),
                        "expected": ir.expected,
                        "found": ir.found,
                    })
                })
                .collect();
            let report = json!({
                "states": full.len(),
                "chains": chains.chains.len(),
                "boundary": {
                    "total": boundary.total(),
                    "perChain": chains.chains.iter().enumerate().map(|(i, c)| json!({
                        "chain": format_counts(&c.key),
                        "states": c.states.len(),
                        "boundaryStates": boundary.per_chain[i].boundary_states.len(),
                    })).collect::<Vec<_>>(),
                },
                "regular": table.regular,
                "irregularities": irregularities,
                "maxGeneratorDiff": diff.max_abs_diff,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("serialisable"));
            if !table.regular {
                Ok(EXIT_IRREGULAR)
            } else if diff.max_abs_diff > 1e-12 {
                Ok(EXIT_VERIFY_FAILED)
            } else {
                Ok(0)
            }
        }
        Command::Compare {
            model,
            sets,
            zip,
            measure_args,
            mode,
            threshold,
            state_cap,
            out,
        } => {
            let text = std::fs::read_to_string(&model).map_err(|e| io_failure(e, &model))?;
            let overrides = parse_sets(&sets)?;
            let measures = if measure_args.is_empty() {
                experiment::standard_measures()
            } else {
                parse_measures(&measure_args)?
            };
            let spec = ExperimentSpec {
                model_text: text,
                overrides,
                zip,
                measures,
                mode: mode.into(),
                threshold,
                state_cap,
                strict_condition: false,
            };
            let results = experiment::run_experiment(&spec)?;
            print!("{}", experiment::render_table(&results));
            if let Some(dir) = out {
                write_file(&dir, "compare.csv", &experiment::render_csv(&results))?;
            }
            Ok(0)
        }
        Command::Table1 { out } => {
            let spec = experiment::table1_spec();
            let results = experiment::run_experiment(&spec)?;
            print!("{}", experiment::render_table(&results));
            let csv = experiment::render_csv(&results);
            if let Some(dir) = &out {
                write_file(dir, "table1.csv", &csv)?;
                write_file(dir, "boundary.gnuplot", &experiment::boundary_plot_script(&results))?;
            }
            let golden = include_str!("../golden/table1.csv");
            let breaches = diff_against_golden(&csv, golden);
            if breaches.is_empty() {
                println!("regression check: all values match the stored results");
                Ok(0)
            } else {
                for b in &breaches {
                    eprintln!("regression mismatch: {b}");
                }
                Ok(EXIT_TOLERANCE)
            }
        }
        Command::Analyze {
            model,
            threshold,
            state_cap,
            out,
        } => {
            let model = read_model(&model)?;
            let partition = GroupPartition::from_hints(&model, threshold);
            let classification = classify(&model, &partition).map_err(pepa::Error::from)?;
            let condition =
                check_aggregation_condition(&model, &partition, false).map_err(pepa::Error::from)?;
            let report = check_report_json(&model, &partition, &classification, &condition);
            write_file(
                &out,
                "check.json",
                &serde_json::to_string_pretty(&report).expect("serialisable"),
            )?;
            if !condition.satisfied {
                return Err(Failure::new(
                    EXIT_CONDITION_FAILED,
                    format!(
                        "aggregation condition not satisfied: {} violation(s); see {}",
                        condition.violations.len(),
                        out.join("check.json").display()
                    ),
                ));
            }
            let reduced = reduce(&model, &partition).map_err(pepa::Error::from)?;
            write_file(&out, "reduced.pepa", &reduced.to_text())?;
            let aggregated =
                pepa::aggregated_ctmc(&model, &partition, GenerateOptions { state_cap })?;
            write_file(&out, "aggregated.json", &ctmc_to_json(&aggregated))?;
            write_file(&out, "generator.mtx", &generator_to_matrix_market(&aggregated))?;
            let pi = steady_state(&aggregated).map_err(pepa::Error::from)?;
            write_file(
                &out,
                "steady_marginal.csv",
                &distribution_to_csv(&pi, &aggregated.states, &aggregated.layout.variable_names()),
            )?;
            println!(
                "wrote check.json, reduced.pepa, aggregated.json, generator.mtx, steady_marginal.csv to {}",
                out.display()
            );
            Ok(0)
        }
    }
}

fn render_distribution(ctmc: &Ctmc, dist: &Distribution, format: FormatArg) -> String {
    match format {
        FormatArg::Csv => distribution_to_csv(dist, &ctmc.states, &ctmc.layout.variable_names()),
        FormatArg::Json => {
            let doc = json!({
                "time": match dist.time {
                    pepa::solve::TimePoint::Steady => json!("steady"),
                    pepa::solve::TimePoint::At(t) => json!(t),
                },
                "variables": ctmc.layout.variable_names(),
                "entries": ctmc.states.iter().zip(&dist.probs).map(|(s, p)| json!({
                    "state": s,
                    "probability": p,
                })).collect::<Vec<_>>(),
            });
            format!("{}\n", serde_json::to_string_pretty(&doc).expect("serialisable"))
        }
    }
}

fn parse_times(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure::new(EXIT_PARSE, format!("invalid time `{t}`")))
        })
        .collect()
}

fn parse_sets(sets: &[String]) -> Result<Vec<(String, Vec<f64>)>, Failure> {
    sets.iter()
        .map(|s| {
            let (name, values) = s
                .split_once('=')
                .ok_or_else(|| Failure::new(EXIT_PARSE, format!("--set `{s}`: expected name=v1,v2,...")))?;
            let values = values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Failure::new(EXIT_PARSE, format!("--set `{s}`: bad value `{v}`")))
                })
                .collect::<Result<Vec<f64>, Failure>>()?;
            Ok((name.trim().to_owned(), values))
        })
        .collect()
}

fn parse_measures(args: &[String]) -> Result<Vec<(String, String)>, Failure> {
    args.iter()
        .map(|m| {
            let (name, expr) = m
                .split_once(':')
                .ok_or_else(|| Failure::new(EXIT_PARSE, format!("--measure `{m}`: expected name:expr")))?;
            Ok((name.trim().to_owned(), expr.trim().to_owned()))
        })
        .collect()
}

/// Compare a freshly produced experiment CSV against the stored one, value by
/// value, at 1e-9 relative tolerance. Returns human-readable mismatches.
fn diff_against_golden(current: &str, golden: &str) -> Vec<String> {
    let parse = |text: &str| -> Vec<Vec<String>> {
        text.lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split(',').map(|f| f.to_owned()).collect())
            .collect()
    };
    let current = parse(current);
    let golden = parse(golden);
    let mut breaches = Vec::new();
    if current.len() != golden.len() {
        breaches.push(format!(
            "row count changed: {} now vs {} stored",
            current.len(),
            golden.len()
        ));
        return breaches;
    }
    for (c, g) in current.iter().zip(&golden) {
        if c.len() != g.len() || c[..3] != g[..3] {
            breaches.push(format!("row changed: {} vs {}", c.join(","), g.join(",")));
            continue;
        }
        for (field, (cv, gv)) in c.iter().zip(g).enumerate().skip(3) {
            match (cv.parse::<f64>(), gv.parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1e-300) {
                        breaches.push(format!(
                            "case {} measure {} field {}: {} vs stored {}",
                            c[0], c[2], field, a, b
                        ));
                    }
                }
                _ => {
                    if cv != gv {
                        breaches.push(format!(
                            "case {} measure {} field {}: `{}` vs stored `{}`",
                            c[0], c[2], field, cv, gv
                        ));
                    }
                }
            }
        }
    }
    breaches
}
