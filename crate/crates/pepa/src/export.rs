//! Serialisation of chains, distributions and trajectories. All outputs are
//! deterministic: repeated runs over the same model produce identical bytes.

use crate::solve::{Distribution, TimePoint};
use crate::statespace::{Ctmc, StateVec};
use serde::Serialize;
use std::fmt::Write;

#[derive(Serialize)]
struct CtmcJson<'a> {
    variables: Vec<String>,
    states: &'a [StateVec],
    initial: usize,
    transitions: Vec<TransitionJson<'a>>,
}

#[derive(Serialize)]
struct TransitionJson<'a> {
    from: usize,
    to: usize,
    action: &'a str,
    rate: f64,
}

/// JSON form of a CTMC: states as count vectors plus labelled transitions.
pub fn ctmc_to_json(ctmc: &Ctmc) -> String {
    let doc = CtmcJson {
        variables: ctmc.layout.variable_names(),
        states: &ctmc.states,
        initial: ctmc.initial,
        transitions: ctmc
            .transitions
            .iter()
            .map(|t| TransitionJson {
                from: t.from,
                to: t.to,
                action: ctmc.action_name(t.action),
                rate: t.rate,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("serialisable")
}

/// Generator matrix in MatrixMarket coordinate format (1-indexed), with
/// off-diagonal rates summed over actions and the diagonal carrying the
/// negated exit rates. Self-loops in the labelled relation are excluded.
pub fn generator_to_matrix_market(ctmc: &Ctmc) -> String {
    let n = ctmc.len();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        let row = ctmc.generator_row(i);
        let exit: f64 = row.iter().map(|(_, r)| r).sum();
        if exit != 0.0 {
            entries.push((i, i, -exit));
        }
        for (j, r) in row {
            entries.push((i, j, r));
        }
    }
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let mut out = String::new();
    let _ = writeln!(out, "%%MatrixMarket matrix coordinate real general");
    let _ = writeln!(out, "{} {} {}", n, n, entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v);
    }
    out
}

/// Distribution as CSV: one column per state variable, then the probability.
pub fn distribution_to_csv(dist: &Distribution, labels: &[StateVec], variables: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{},probability", variables.join(","));
    for (label, p) in labels.iter().zip(&dist.probs) {
        let counts: Vec<String> = label.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{},{:.17e}", counts.join(","), p);
    }
    out
}

/// Trajectory as long-format CSV `(time, state, prob)`; states are written
/// as space-joined count vectors.
pub fn trajectory_to_csv(trajectory: &[Distribution], labels: &[StateVec]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "time,state,prob");
    for dist in trajectory {
        let time = match dist.time {
            TimePoint::At(t) => format!("{t}"),
            TimePoint::Steady => "steady".to_owned(),
        };
        for (label, p) in labels.iter().zip(&dist.probs) {
            let counts: Vec<String> = label.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{},{},{:.17e}", time, counts.join(" "), p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::{generate_ctmc, GenerateOptions};
    use crate::syntax::parse_model;

    fn tiny() -> Ctmc {
        let model =
            parse_model("A = (go, 2.0).B; B = (back, 1.0).A; system = G{A[1]};").unwrap();
        generate_ctmc(&model, GenerateOptions::default()).unwrap()
    }

    #[test]
    fn matrix_market_shape() {
        let mm = generator_to_matrix_market(&tiny());
        let lines: Vec<&str> = mm.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines[1], "2 2 4");
        assert!(lines[2].starts_with("1 1 "));
    }

    #[test]
    fn ctmc_json_round_trips_through_serde() {
        let json = ctmc_to_json(&tiny());
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["states"].as_array().unwrap().len(), 2);
        assert_eq!(value["transitions"][0]["action"], "go");
    }

    #[test]
    fn exports_are_deterministic() {
        let a = tiny();
        let b = tiny();
        assert_eq!(ctmc_to_json(&a), ctmc_to_json(&b));
        assert_eq!(generator_to_matrix_market(&a), generator_to_matrix_market(&b));
    }
}
