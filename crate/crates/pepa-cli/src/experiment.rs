//! Parameter-sweep experiments: solve a model exactly (full chain,
//! chain-summed) and approximately (aggregated chain), evaluate measures on
//! both, and tabulate the error.

use crate::measures::Predicate;
use pepa::analysis::{
    check_aggregation_condition, classify, GroupPartition,
};
use pepa::solve::{marginal_measure, steady_state, Distribution};
use pepa::statespace::{generate_ctmc, Ctmc, GenerateOptions, StateLayout};
use pepa::syntax::{parse_model_with_overrides, GroupedModel};
use pepa::verify::{boundary_probability, boundary_states, chain_sums, partition_subchains};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Approximate,
    Both,
}

impl Mode {
    pub fn wants_exact(self) -> bool {
        matches!(self, Mode::Exact | Mode::Both)
    }

    pub fn wants_approximate(self) -> bool {
        matches!(self, Mode::Approximate | Mode::Both)
    }
}

/// One experiment: a model, parameter overrides (swept case by case), and
/// measures over small-group counts.
pub struct ExperimentSpec {
    pub model_text: String,
    /// Each entry sweeps one constant over a list of values.
    pub overrides: Vec<(String, Vec<f64>)>,
    /// Zip the override lists instead of taking their Cartesian product.
    pub zip: bool,
    pub measures: Vec<(String, String)>,
    pub mode: Mode,
    pub threshold: Option<u64>,
    pub state_cap: usize,
    pub strict_condition: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub measure: String,
    pub exact: Option<f64>,
    pub approximate: Option<f64>,
    /// `100 * |approx - exact| / exact`; `None` unless both sides are present
    /// and the exact value is positive.
    pub error_pct: Option<f64>,
}

impl ComparisonRow {
    fn new(measure: &str, exact: Option<f64>, approximate: Option<f64>) -> ComparisonRow {
        let error_pct = match (exact, approximate) {
            (Some(e), Some(a)) if e > 0.0 => Some(100.0 * (a - e).abs() / e),
            _ => None,
        };
        ComparisonRow {
            measure: measure.to_owned(),
            exact,
            approximate,
            error_pct,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    /// Swept constants with this case's values, in sweep order.
    pub assignment: Vec<(String, f64)>,
    pub rows: Vec<ComparisonRow>,
    /// Probability mass on boundary states of the full chain (exact mode).
    pub boundary_probability: Option<f64>,
    pub exact_time: Option<Duration>,
    pub approximate_time: Option<Duration>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Pipeline(#[from] pepa::Error),
    #[error(transparent)]
    Measure(#[from] crate::measures::MeasureError),
    #[error("aggregation condition not satisfied: {0} violation(s)")]
    ConditionFailed(usize),
}

/// Enumerate the case assignments (Cartesian product or zipped lists).
pub fn case_assignments(spec: &ExperimentSpec) -> Vec<Vec<(String, f64)>> {
    if spec.overrides.is_empty() {
        return vec![Vec::new()];
    }
    if spec.zip {
        let len = spec.overrides.iter().map(|(_, vs)| vs.len()).min().unwrap_or(0);
        (0..len)
            .map(|i| {
                spec.overrides
                    .iter()
                    .map(|(name, vs)| (name.clone(), vs[i]))
                    .collect()
            })
            .collect()
    } else {
        let mut cases: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for (name, values) in &spec.overrides {
            let mut next = Vec::with_capacity(cases.len() * values.len());
            for case in &cases {
                for v in values {
                    let mut extended = case.clone();
                    extended.push((name.clone(), *v));
                    next.push(extended);
                }
            }
            cases = next;
        }
        cases
    }
}

/// Solve one case. The approximate path aggregates first; the exact path
/// solves the full chain and sums it over sub-chains.
pub fn run_case(
    spec: &ExperimentSpec,
    assignment: &[(String, f64)],
) -> Result<CaseResult, ExperimentError> {
    let overrides: Vec<(&str, f64)> = assignment.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let model = parse_model_with_overrides(&spec.model_text, &overrides).map_err(pepa::Error::from)?;
    let partition = GroupPartition::from_hints(&model, spec.threshold);
    let condition =
        check_aggregation_condition(&model, &partition, spec.strict_condition).map_err(pepa::Error::from)?;
    if !condition.satisfied {
        return Err(ExperimentError::ConditionFailed(condition.violations.len()));
    }
    let options = GenerateOptions {
        state_cap: spec.state_cap,
    };

    let mut approximate: Option<(Ctmc, Distribution, Duration)> = None;
    if spec.mode.wants_approximate() {
        let started = Instant::now();
        let aggregated = pepa::aggregated_ctmc(&model, &partition, options)?;
        let pi = steady_state(&aggregated).map_err(pepa::Error::from)?;
        approximate = Some((aggregated, pi, started.elapsed()));
    }

    let mut exact: Option<(Vec<Vec<u32>>, Distribution, f64, Duration)> = None;
    if spec.mode.wants_exact() {
        let started = Instant::now();
        let (keys, sums, pb) = exact_chain_marginal(&model, &partition, options)?;
        exact = Some((keys, sums, pb, started.elapsed()));
    }

    // Compile measures against whichever small-group layout is available.
    let layout = match &approximate {
        Some((ctmc, _, _)) => ctmc.layout.clone(),
        None => small_layout(&model, &partition)?,
    };
    let mut rows = Vec::new();
    for (name, expr) in &spec.measures {
        let predicate = Predicate::compile(expr, &layout)?;
        let approx_value = approximate
            .as_ref()
            .map(|(ctmc, pi, _)| marginal_measure(pi, &ctmc.states, |c| predicate.matches(c)));
        let exact_value = exact
            .as_ref()
            .map(|(keys, sums, _, _)| marginal_measure(sums, keys, |c| predicate.matches(c)));
        rows.push(ComparisonRow::new(name, exact_value, approx_value));
    }
    Ok(CaseResult {
        assignment: assignment.to_vec(),
        rows,
        boundary_probability: exact.as_ref().map(|(_, _, pb, _)| *pb),
        exact_time: exact.as_ref().map(|(_, _, _, t)| *t),
        approximate_time: approximate.as_ref().map(|(_, _, t)| *t),
    })
}

/// Full-chain steady state summed over sub-chains, plus the boundary mass.
fn exact_chain_marginal(
    model: &GroupedModel,
    partition: &GroupPartition,
    options: GenerateOptions,
) -> Result<(Vec<Vec<u32>>, Distribution, f64), ExperimentError> {
    let classification = classify(model, partition).map_err(pepa::Error::from)?;
    let full = generate_ctmc(model, options).map_err(pepa::Error::from)?;
    let chains = partition_subchains(&full, &classification, partition).map_err(pepa::Error::from)?;
    let boundary =
        boundary_states(&full, model, partition, &classification, &chains).map_err(pepa::Error::from)?;
    let pi = steady_state(&full).map_err(pepa::Error::from)?;
    let pb = boundary_probability(&pi, &boundary);
    let sums = chain_sums(&pi, &chains).map_err(pepa::Error::from)?;
    let keys = chains.chains.iter().map(|c| c.key.clone()).collect();
    Ok((keys, sums, pb))
}

/// Layout restricted to the small groups, in system-equation order. Matches
/// both the aggregated chain's layout and the sub-chain keys.
fn small_layout(model: &GroupedModel, partition: &GroupPartition) -> Result<StateLayout, ExperimentError> {
    let reduced = pepa::analysis::reduce(model, partition).map_err(pepa::Error::from)?;
    Ok(StateLayout::from_model(&reduced))
}

/// Run every case; cases run in parallel and merge in sweep order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<CaseResult>, ExperimentError> {
    let assignments = case_assignments(spec);
    let mut outputs: Vec<Option<Result<CaseResult, ExperimentError>>> =
        (0..assignments.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for assignment in &assignments {
            handles.push(scope.spawn(move || run_case(spec, assignment)));
        }
        for (slot, handle) in outputs.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("experiment case panicked"));
        }
    });
    outputs
        .into_iter()
        .map(|o| o.expect("all cases joined"))
        .collect()
}

fn format_value(v: Option<f64>, precision: usize) -> String {
    match v {
        Some(v) => format!("{v:.precision$}"),
        None => "-".to_owned(),
    }
}

/// Human-readable table, probabilities at three decimals.
pub fn render_table(results: &[CaseResult]) -> String {
    let mut out = String::new();
    for (i, case) in results.iter().enumerate() {
        let assignment: Vec<String> = case
            .assignment
            .iter()
            .map(|(n, v)| format!("{n} = {v}"))
            .collect();
        let _ = writeln!(
            out,
            "case {}{}{}",
            i + 1,
            if assignment.is_empty() { "" } else { ": " },
            assignment.join(", ")
        );
        let _ = writeln!(out, "  {:<16} {:>9} {:>12} {:>10}", "measure", "exact", "approximate", "error(%)");
        for row in &case.rows {
            let _ = writeln!(
                out,
                "  {:<16} {:>9} {:>12} {:>10}",
                row.measure,
                format_value(row.exact, 3),
                format_value(row.approximate, 3),
                format_value(row.error_pct, 1),
            );
        }
        if let Some(pb) = case.boundary_probability {
            let _ = writeln!(out, "  boundary probability: {pb:.6}");
        }
        match (case.exact_time, case.approximate_time) {
            (Some(e), Some(a)) => {
                let _ = writeln!(
                    out,
                    "  solve time: exact {:.3} s, approximate {:.3} s",
                    e.as_secs_f64(),
                    a.as_secs_f64()
                );
            }
            (Some(e), None) => {
                let _ = writeln!(out, "  solve time: exact {:.3} s", e.as_secs_f64());
            }
            (None, Some(a)) => {
                let _ = writeln!(out, "  solve time: approximate {:.3} s", a.as_secs_f64());
            }
            (None, None) => {}
        }
    }
    out
}

/// Full-precision CSV, one line per (case, measure) plus a boundary line per
/// exact case.
pub fn render_csv(results: &[CaseResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "case,assignment,measure,exact,approximate,error_pct");
    for (i, case) in results.iter().enumerate() {
        let assignment: Vec<String> = case
            .assignment
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        let assignment = assignment.join(" ");
        let field = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.17e}"));
        for row in &case.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                i + 1,
                assignment,
                row.measure,
                field(row.exact),
                field(row.approximate),
                field(row.error_pct),
            );
        }
        if let Some(pb) = case.boundary_probability {
            let _ = writeln!(out, "{},{},boundary,{pb:.17e},,", i + 1, assignment);
        }
    }
    out
}

/// Gnuplot script for the boundary-probability bar chart over the cases.
pub fn boundary_plot_script(results: &[CaseResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set terminal pngcairo size 640,480");
    let _ = writeln!(out, "set output 'boundary.png'");
    let _ = writeln!(out, "set style fill solid 0.6");
    let _ = writeln!(out, "set boxwidth 0.5");
    let _ = writeln!(out, "set ylabel 'probability of boundary states'");
    let _ = writeln!(out, "set yrange [0:*]");
    let _ = writeln!(out, "plot '-' using 1:3:xtic(2) with boxes notitle");
    for (i, case) in results.iter().enumerate() {
        let label: Vec<String> = case
            .assignment
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        let _ = writeln!(
            out,
            "{} \"{}\" {:.12e}",
            i + 1,
            label.join(" "),
            case.boundary_probability.unwrap_or(0.0)
        );
    }
    let _ = writeln!(out, "e");
    out
}

// ---------------------------------------------------------------------------
// The canned three-case experiment over the bundled client-server model.
// ---------------------------------------------------------------------------

pub const CLIENT_SERVER_MODEL: &str = include_str!("../models/client_server.pepa");

/// The six dependability measures of the bundled experiment.
pub fn standard_measures() -> Vec<(String, String)> {
    vec![
        ("P(5,0,0)".into(), "S_idle == 5 && S_log == 0 && S_broken == 0".into()),
        ("P(3,1,1)".into(), "S_idle == 3 && S_log == 1 && S_broken == 1".into()),
        ("P(0,0,5)".into(), "S_idle == 0 && S_log == 0 && S_broken == 5".into()),
        ("P(E5)".into(), "S_idle + S_log == 5".into()),
        ("P(E2)".into(), "S_idle + S_log == 2".into()),
        ("P(E1)".into(), "S_idle + S_log == 1".into()),
    ]
}

/// Three-case sweep of the client think rate.
pub fn table1_spec() -> ExperimentSpec {
    ExperimentSpec {
        model_text: CLIENT_SERVER_MODEL.to_owned(),
        overrides: vec![("r_t".into(), vec![15.0, 0.2, 0.1])],
        zip: false,
        measures: standard_measures(),
        mode: Mode::Both,
        threshold: None,
        state_cap: GenerateOptions::default().state_cap,
        strict_condition: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_and_zipped_assignments() {
        let mut spec = table1_spec();
        spec.overrides = vec![
            ("a".into(), vec![1.0, 2.0]),
            ("b".into(), vec![10.0, 20.0]),
        ];
        assert_eq!(case_assignments(&spec).len(), 4);
        spec.zip = true;
        let zipped = case_assignments(&spec);
        assert_eq!(zipped.len(), 2);
        assert_eq!(zipped[0], vec![("a".into(), 1.0), ("b".into(), 10.0)]);
    }

    #[test]
    fn approximate_only_case_runs_quickly() {
        let mut spec = table1_spec();
        spec.mode = Mode::Approximate;
        let results = run_experiment(&spec).unwrap();
        assert_eq!(results.len(), 3);
        for case in &results {
            assert_eq!(case.rows.len(), 6);
            assert!(case.boundary_probability.is_none());
            for row in &case.rows {
                assert!(row.exact.is_none());
                let p = row.approximate.unwrap();
                assert!((0.0..=1.0).contains(&p));
            }
        }
        // The aggregated chain does not depend on the think rate.
        for row in 0..6 {
            let p0 = results[0].rows[row].approximate.unwrap();
            for case in &results[1..] {
                assert_eq!(case.rows[row].approximate.unwrap(), p0);
            }
        }
    }

    #[test]
    fn condition_failure_is_reported() {
        let spec = ExperimentSpec {
            model_text: "
                C_think = (think, 1.0).C_req;
                C_req   = (req, 2.0).C_think;
                S_idle  = (req, 10.0).S_log;
                S_log   = (log, 50.0).S_idle;
                system = Servers{ S_idle[2] } <req> Clients{ C_think[20] };
                small Servers; large Clients;"
                .into(),
            overrides: Vec::new(),
            zip: false,
            measures: Vec::new(),
            mode: Mode::Approximate,
            threshold: None,
            state_cap: 1_000_000,
            strict_condition: false,
        };
        match run_experiment(&spec) {
            Err(ExperimentError::ConditionFailed(1)) => {}
            other => panic!("expected condition failure, got {other:?}"),
        }
    }

    #[test]
    fn error_percentage_definition() {
        let row = ComparisonRow::new("m", Some(0.2), Some(0.25));
        assert!((row.error_pct.unwrap() - 25.0).abs() < 1e-12);
        let na = ComparisonRow::new("m", Some(0.0), Some(0.1));
        assert!(na.error_pct.is_none());
    }

    #[test]
    fn emitted_error_percentages_are_self_consistent() {
        let mut spec = table1_spec();
        spec.overrides = vec![("r_t".into(), vec![0.2])];
        let results = run_experiment(&spec).unwrap();
        for row in &results[0].rows {
            let (e, a, pct) = (
                row.exact.unwrap(),
                row.approximate.unwrap(),
                row.error_pct.unwrap(),
            );
            let recomputed = 100.0 * (a - e).abs() / e;
            assert!((recomputed - pct).abs() < 0.1, "{recomputed} vs {pct}");
        }
    }

    #[test]
    fn approximate_path_is_much_faster_than_exact() {
        let mut spec = table1_spec();
        spec.overrides = vec![("r_t".into(), vec![0.2])];
        let results = run_experiment(&spec).unwrap();
        let exact = results[0].exact_time.unwrap();
        let approx = results[0].approximate_time.unwrap();
        assert!(
            exact > 5 * approx,
            "exact {exact:?} not at least 5x slower than approximate {approx:?}"
        );
    }

    #[test]
    fn boundary_plot_script_lists_each_case() {
        let mut spec = table1_spec();
        spec.overrides = vec![("r_t".into(), vec![0.2, 0.1])];
        let results = run_experiment(&spec).unwrap();
        let script = boundary_plot_script(&results);
        assert!(script.contains("with boxes"));
        assert!(script.contains("\"r_t=0.2\""));
        assert!(script.contains("\"r_t=0.1\""));
    }
}
