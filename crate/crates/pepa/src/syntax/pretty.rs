//! Canonical text form of a resolved model. Rate constants are printed
//! already resolved; re-parsing the output reproduces the same model.

use super::{GroupedModel, SequentialComponent, SizeClass, SystemEquation};
use crate::rates::RateExpr;
use std::collections::BTreeMap;
use std::fmt::Write;

pub fn print_model(model: &GroupedModel) -> String {
    let mut out = String::new();

    // One definition per local state; components may share states (two groups
    // rooted at different states of one definition cluster), so collect the
    // union keyed by name.
    let mut defs: BTreeMap<&str, (&SequentialComponent, usize)> = BTreeMap::new();
    for component in model.components.values() {
        for (idx, state) in component.states.iter().enumerate() {
            defs.entry(state).or_insert((component, idx));
        }
    }
    let mut printed = std::collections::HashSet::new();
    let in_order = model
        .definition_order
        .iter()
        .map(String::as_str)
        .chain(defs.keys().copied());
    for name in in_order {
        let Some((component, idx)) = defs.get(name) else { continue };
        if !printed.insert(name.to_owned()) {
            continue;
        }
        let prefixes: Vec<String> = component
            .outgoing(*idx)
            .map(|t| {
                format!(
                    "({}, {}).{}",
                    model.actions.name(t.action),
                    print_rate(t.rate),
                    component.states[t.to]
                )
            })
            .collect();
        // A state with no outgoing activities cannot be expressed as a prefix
        // sum; such states do not arise from parsed input.
        if prefixes.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{} = {};", name, prefixes.join(" + "));
    }

    let _ = writeln!(out, "system = {};", print_equation(model, &model.equation, true));

    let smalls: Vec<&str> = model
        .hints
        .classes
        .iter()
        .filter(|(_, c)| **c == SizeClass::Small)
        .map(|(l, _)| l.as_str())
        .collect();
    let larges: Vec<&str> = model
        .hints
        .classes
        .iter()
        .filter(|(_, c)| **c == SizeClass::Large)
        .map(|(l, _)| l.as_str())
        .collect();
    if !smalls.is_empty() {
        let _ = writeln!(out, "small {};", smalls.join(", "));
    }
    if !larges.is_empty() {
        let _ = writeln!(out, "large {};", larges.join(", "));
    }
    if let Some(t) = model.hints.threshold {
        let _ = writeln!(out, "threshold {t};");
    }
    out
}

fn print_rate(rate: RateExpr) -> String {
    match rate {
        RateExpr::Active(r) => format!("{r}"),
        RateExpr::Passive(1) => "T".to_owned(),
        RateExpr::Passive(w) => format!("{w}*T"),
    }
}

fn print_equation(model: &GroupedModel, node: &SystemEquation, root: bool) -> String {
    match node {
        SystemEquation::Coop { left, right, coop_set } => {
            let actions: Vec<&str> = coop_set.iter().map(|a| model.actions.name(*a)).collect();
            let body = format!(
                "{} <{}> {}",
                print_equation(model, left, false),
                actions.join(", "),
                print_equation(model, right, false)
            );
            if root {
                body
            } else {
                format!("({body})")
            }
        }
        SystemEquation::Group(leaf) => {
            let component = &model.components[&leaf.component];
            let pops: Vec<String> = leaf
                .initial_counts
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(|(i, c)| format!("{}[{}]", component.states[i], c))
                .collect();
            format!("{}{{ {} }}", leaf.label, pops.join(" || "))
        }
    }
}
