//! Model text format: lexer, parser and the resolved in-memory model.
//!
//! A model file consists of an optional `rates { name = value; ... }` block,
//! semicolon-terminated process definitions, a `system = ...;` equation over
//! labelled groups, and optional `small`/`large`/`threshold` hints:
//!
//! ```text
//! rates { r_t = 15.0; r_s = 10.0; }
//! C_think = (think, r_t).C_req;
//! C_req   = (req, T).C_think;
//! S_idle  = (req, r_s).S_log + (brk, r_b).S_broken;
//! system  = Servers{ S_idle[5] } <req> Clients{ C_think[100] };
//! small Servers; large Clients;
//! ```
//!
//! `T` is the passive rate, `w*T` a weighted passive rate, `<a,b>` a
//! cooperation set (`||` and `<>` are the empty set), and `P[n]` instantiates
//! `n` copies of `P` inside a group.

mod lexer;
mod parser;
mod pretty;

pub use lexer::{LexError, Pos};
pub use parser::{parse_model, parse_model_with_overrides, ParseError};

use crate::rates::{ApparentRate, RateExpr};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Interned action type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ActionId(pub u32);

/// Action-type names, interned in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionTable {
    names: Vec<String>,
}

impl ActionTable {
    pub fn intern(&mut self, name: &str) -> ActionId {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            ActionId(i as u32)
        } else {
            self.names.push(name.to_owned());
            ActionId((self.names.len() - 1) as u32)
        }
    }

    pub fn lookup(&self, name: &str) -> Option<ActionId> {
        self.names.iter().position(|n| n == name).map(|i| ActionId(i as u32))
    }

    pub fn name(&self, id: ActionId) -> &str {
        &self.names[id.0 as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ActionId, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (ActionId(i as u32), n.as_str()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One activity of a sequential component, between local-state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTransition {
    pub from: usize,
    pub action: ActionId,
    pub rate: RateExpr,
    pub to: usize,
}

/// A sequential component as an explicit automaton: the derivative set of its
/// initial state plus all activity-labelled transitions between local states.
///
/// `states[0]` is the component's representative initial state and also gives
/// the component its name.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialComponent {
    pub name: String,
    pub states: Vec<String>,
    pub transitions: Vec<LocalTransition>,
}

impl SequentialComponent {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = &LocalTransition> {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    /// Action types enabled in at least one local state.
    pub fn enabled_actions(&self) -> BTreeSet<ActionId> {
        self.transitions.iter().map(|t| t.action).collect()
    }

    /// Actions this component undertakes passively (passivity is uniform per
    /// action across the component; the parser rejects mixtures).
    pub fn passive_actions(&self) -> BTreeSet<ActionId> {
        self.transitions
            .iter()
            .filter(|t| t.rate.is_passive())
            .map(|t| t.action)
            .collect()
    }

    /// Total rate `state` offers for `action` activities; `Active(0)` when
    /// the action is not enabled there.
    pub fn apparent_rate(&self, state: usize, action: ActionId) -> ApparentRate {
        self.outgoing(state)
            .filter(|t| t.action == action)
            .fold(ApparentRate::ZERO, |acc, t| {
                acc.checked_add(t.rate.apparent())
                    .expect("per-action passivity is uniform within a component")
            })
    }

    /// Restriction of [`apparent_rate`](Self::apparent_rate) to activities
    /// that lead to local state `target`.
    pub fn apparent_rate_to(&self, state: usize, action: ActionId, target: usize) -> ApparentRate {
        self.outgoing(state)
            .filter(|t| t.action == action && t.to == target)
            .fold(ApparentRate::ZERO, |acc, t| {
                acc.checked_add(t.rate.apparent())
                    .expect("per-action passivity is uniform within a component")
            })
    }
}

/// A labelled group in the system equation: a population of instances of one
/// sequential component, distributed over its local states.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLeaf {
    pub label: String,
    pub component: String,
    /// Instance counts aligned with the component's `states` order.
    pub initial_counts: Vec<u64>,
}

impl GroupLeaf {
    pub fn population(&self) -> u64 {
        self.initial_counts.iter().sum()
    }
}

/// System equation: a tree of cooperations over group leaves.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemEquation {
    Coop {
        left: Box<SystemEquation>,
        right: Box<SystemEquation>,
        coop_set: BTreeSet<ActionId>,
    },
    Group(GroupLeaf),
}

impl SystemEquation {
    /// Group leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&GroupLeaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a GroupLeaf>) {
        match self {
            SystemEquation::Coop { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
            SystemEquation::Group(leaf) => out.push(leaf),
        }
    }

    pub fn contains_group(&self, label: &str) -> bool {
        self.leaves().iter().any(|l| l.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Large,
}

/// Modeller-supplied sizing: explicit per-group classes win over the
/// population threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartitionHints {
    pub classes: BTreeMap<String, SizeClass>,
    pub threshold: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// A definition never reached from any group's initial states.
    UnreachableDefinition { name: String },
    /// A cooperation set names an action that can never synchronise there.
    InertCooperation { action: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::UnreachableDefinition { name } => {
                write!(f, "definition `{name}` is unreachable from every group")
            }
            Warning::InertCooperation { action } => {
                write!(f, "cooperation on `{action}` can never fire")
            }
        }
    }
}

/// A fully resolved grouped model: components as explicit automata, the
/// system-equation tree, and sizing hints.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedModel {
    pub actions: ActionTable,
    pub components: BTreeMap<String, SequentialComponent>,
    pub equation: SystemEquation,
    pub hints: PartitionHints,
    pub warnings: Vec<Warning>,
    /// Local-state definitions in source order, for printing.
    pub definition_order: Vec<String>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("unknown component `{0}`")]
pub struct UnknownComponent(pub String);

impl GroupedModel {
    pub fn groups(&self) -> Vec<&GroupLeaf> {
        self.equation.leaves()
    }

    pub fn group(&self, label: &str) -> Option<&GroupLeaf> {
        self.groups().into_iter().find(|l| l.label == label)
    }

    /// The automaton for a named component: its reachable local states and
    /// their outgoing activities.
    pub fn local_automaton(&self, component: &str) -> Result<&SequentialComponent, UnknownComponent> {
        self.components
            .get(component)
            .ok_or_else(|| UnknownComponent(component.to_owned()))
    }

    /// Component whose instances form group `label`.
    pub fn component_of(&self, label: &str) -> Option<&SequentialComponent> {
        self.group(label).and_then(|l| self.components.get(&l.component))
    }

    /// Canonical text form; parsing it back yields a structurally identical
    /// model.
    pub fn to_text(&self) -> String {
        pretty::print_model(self)
    }
}
