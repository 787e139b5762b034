//! Group-level structural analysis: interfaces, cooperation partners, the
//! small/large partition, action classification, the syntactic aggregation
//! condition, and reduction of a model to its small groups.

use crate::syntax::{
    ActionId, GroupedModel, PartitionHints, SequentialComponent, SizeClass, SystemEquation,
};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalysisError {
    #[error("unknown group label `{0}`")]
    UnknownGroup(String),
    #[error("group partition does not cover the model's groups")]
    InvalidPartition,
    #[error("action types {0:?} are enabled by both a small-only and a large-only context; the model is outside the analysable sub-class")]
    ClassificationOverlap(Vec<String>),
    #[error("aggregation condition not satisfied ({violations} violation(s))")]
    ConditionFailed { violations: usize },
    #[error("reduction would remove every group: the model has no small groups")]
    ReductionEmpty,
}

/// Set of group labels, computed by recursion over the system equation.
pub fn group_labels(model: &GroupedModel) -> BTreeSet<String> {
    model
        .groups()
        .into_iter()
        .map(|leaf| leaf.label.clone())
        .collect()
}

/// Action types on which instances of group `label` are required to
/// synchronise: the union of all cooperation sets on the root-to-leaf path.
pub fn interface(model: &GroupedModel, label: &str) -> Result<BTreeSet<ActionId>, AnalysisError> {
    fn walk(node: &SystemEquation, label: &str, acc: &BTreeSet<ActionId>) -> Option<BTreeSet<ActionId>> {
        match node {
            SystemEquation::Coop { left, right, coop_set } => {
                let mut acc2 = acc.clone();
                acc2.extend(coop_set.iter().copied());
                walk(left, label, &acc2).or_else(|| walk(right, label, &acc2))
            }
            SystemEquation::Group(leaf) if leaf.label == label => Some(acc.clone()),
            SystemEquation::Group(_) => None,
        }
    }
    walk(&model.equation, label, &BTreeSet::new())
        .ok_or_else(|| AnalysisError::UnknownGroup(label.to_owned()))
}

/// Action types enabled by instances of group `label`.
pub fn enabled_actions(model: &GroupedModel, label: &str) -> Result<BTreeSet<ActionId>, AnalysisError> {
    let leaf = model
        .group(label)
        .ok_or_else(|| AnalysisError::UnknownGroup(label.to_owned()))?;
    Ok(model.components[&leaf.component].enabled_actions())
}

/// Interface restricted to action types the group actually enables.
pub fn active_interface(model: &GroupedModel, label: &str) -> Result<BTreeSet<ActionId>, AnalysisError> {
    let interface = interface(model, label)?;
    let enabled = enabled_actions(model, label)?;
    Ok(interface.intersection(&enabled).copied().collect())
}

/// Groups whose instances synchronise on `action` activities with instances
/// in `label`: at every cooperation node on the path whose set names the
/// action, all groups on the opposite side become partners.
pub fn coop_partners(
    model: &GroupedModel,
    label: &str,
    action: ActionId,
) -> Result<BTreeSet<String>, AnalysisError> {
    fn walk(node: &SystemEquation, label: &str, action: ActionId, out: &mut BTreeSet<String>) -> bool {
        match node {
            SystemEquation::Coop { left, right, coop_set } => {
                let (containing, sibling) = if left.contains_group(label) {
                    (left, right)
                } else if right.contains_group(label) {
                    (right, left)
                } else {
                    return false;
                };
                if coop_set.contains(&action) {
                    out.extend(sibling.leaves().iter().map(|l| l.label.clone()));
                }
                walk(containing, label, action, out)
            }
            SystemEquation::Group(leaf) => leaf.label == label,
        }
    }
    let mut out = BTreeSet::new();
    if walk(&model.equation, label, action, &mut out) {
        Ok(out)
    } else {
        Err(AnalysisError::UnknownGroup(label.to_owned()))
    }
}

/// The small/large split of a model's groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupPartition {
    pub small: BTreeSet<String>,
    pub large: BTreeSet<String>,
}

impl GroupPartition {
    /// Derive the partition from the model's hints. Explicit `small`/`large`
    /// annotations win; remaining groups are compared against the threshold
    /// (total initial population `<=` threshold means small); without a
    /// threshold, unannotated groups default to small.
    pub fn from_hints(model: &GroupedModel, threshold_override: Option<u64>) -> GroupPartition {
        let threshold = threshold_override.or(model.hints.threshold);
        let mut small = BTreeSet::new();
        let mut large = BTreeSet::new();
        for leaf in model.groups() {
            let class = model.hints.classes.get(&leaf.label).copied().unwrap_or_else(|| {
                match threshold {
                    Some(t) if leaf.population() > t => SizeClass::Large,
                    _ => SizeClass::Small,
                }
            });
            match class {
                SizeClass::Small => small.insert(leaf.label.clone()),
                SizeClass::Large => large.insert(leaf.label.clone()),
            };
        }
        GroupPartition { small, large }
    }

    pub fn all_small(model: &GroupedModel) -> GroupPartition {
        GroupPartition {
            small: group_labels(model),
            large: BTreeSet::new(),
        }
    }

    pub fn validate(&self, model: &GroupedModel) -> Result<(), AnalysisError> {
        let labels = group_labels(model);
        let mut union = self.small.clone();
        union.extend(self.large.iter().cloned());
        if union != labels || !self.small.is_disjoint(&self.large) {
            return Err(AnalysisError::InvalidPartition);
        }
        Ok(())
    }

    pub fn is_large(&self, label: &str) -> bool {
        self.large.contains(label)
    }
}

/// Action types split by which side of the size partition drives them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionClassification {
    /// Dynamics of the large groups only (individual, or shared among larges).
    pub large_only: BTreeSet<ActionId>,
    /// Actions in which no large group participates.
    pub small_only: BTreeSet<ActionId>,
    /// Actions shared between small and large groups.
    pub shared: BTreeSet<ActionId>,
}

/// Classify every enabled action type of every group.
pub fn classify(
    model: &GroupedModel,
    partition: &GroupPartition,
) -> Result<ActionClassification, AnalysisError> {
    partition.validate(model)?;
    let mut large_only = BTreeSet::new();
    let mut small_only = BTreeSet::new();
    let mut shared = BTreeSet::new();
    for leaf in model.groups() {
        let enabled = model.components[&leaf.component].enabled_actions();
        let iface = interface(model, &leaf.label)?;
        let is_large = partition.is_large(&leaf.label);
        for action in enabled {
            let partners = if iface.contains(&action) {
                coop_partners(model, &leaf.label, action)?
            } else {
                BTreeSet::new()
            };
            if is_large {
                if partners.iter().all(|p| !partition.small.contains(p)) {
                    large_only.insert(action);
                }
                // A large group's shared actions are recorded from the small
                // side, mirroring the definitions' union over small groups.
            } else if partners.iter().any(|p| partition.large.contains(p)) {
                shared.insert(action);
            } else {
                small_only.insert(action);
            }
        }
    }
    let overlap: Vec<String> = large_only
        .iter()
        .filter(|a| small_only.contains(a) || shared.contains(a))
        .chain(small_only.intersection(&shared))
        .map(|a| model.actions.name(*a).to_owned())
        .collect();
    if !overlap.is_empty() {
        return Err(AnalysisError::ClassificationOverlap(overlap));
    }
    Ok(ActionClassification {
        large_only,
        small_only,
        shared,
    })
}

/// One breach of the aggregation condition: a local state of a large group
/// offering a shared action at a non-passive rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionViolation {
    pub group: String,
    pub action: String,
    pub state: String,
}

/// Outcome of the syntactic aggregation condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub satisfied: bool,
    pub violations: Vec<ConditionViolation>,
}

/// Check that every activity shared between a large and a small group is
/// offered only passively by the large side.
///
/// By default a large-group state that does not enable the action at all is
/// compliant (its apparent rate is zero, so it cannot decide the shared
/// rate). `strict` additionally demands a passive offer in *every* local
/// state, the literal universally-quantified form.
pub fn check_aggregation_condition(
    model: &GroupedModel,
    partition: &GroupPartition,
    strict: bool,
) -> Result<ConditionReport, AnalysisError> {
    partition.validate(model)?;
    let mut violations = Vec::new();
    for label in &partition.large {
        let leaf = model.group(label).expect("partition validated");
        let component = &model.components[&leaf.component];
        for action in active_interface(model, label)? {
            let partners = coop_partners(model, label, action)?;
            if partners.iter().all(|p| !partition.small.contains(p)) {
                continue;
            }
            for (idx, state) in component.states.iter().enumerate() {
                let rate = component.apparent_rate(idx, action);
                let compliant = if strict {
                    rate.is_passive()
                } else {
                    rate.is_passive() || rate.is_zero()
                };
                if !compliant {
                    violations.push(ConditionViolation {
                        group: label.clone(),
                        action: model.actions.name(action).to_owned(),
                        state: state.clone(),
                    });
                }
            }
        }
    }
    Ok(ConditionReport {
        satisfied: violations.is_empty(),
        violations,
    })
}

/// Replace every large group by the inert process and eliminate it, keeping
/// the minimal equation over the small groups. Components no longer
/// referenced are dropped.
pub fn reduce(model: &GroupedModel, partition: &GroupPartition) -> Result<GroupedModel, AnalysisError> {
    partition.validate(model)?;
    let reduced = reduce_node(&model.equation, partition).ok_or(AnalysisError::ReductionEmpty)?;

    let referenced: BTreeSet<String> = reduced
        .leaves()
        .iter()
        .map(|l| l.component.clone())
        .collect();
    let components: BTreeMap<String, SequentialComponent> = model
        .components
        .iter()
        .filter(|(name, _)| referenced.contains(*name))
        .map(|(name, c)| (name.clone(), c.clone()))
        .collect();
    let surviving: BTreeSet<String> = reduced.leaves().iter().map(|l| l.label.clone()).collect();
    let hints = PartitionHints {
        classes: model
            .hints
            .classes
            .iter()
            .filter(|(label, _)| surviving.contains(*label))
            .map(|(l, c)| (l.clone(), *c))
            .collect(),
        threshold: model.hints.threshold,
    };
    Ok(GroupedModel {
        actions: model.actions.clone(),
        components,
        equation: reduced,
        hints,
        warnings: Vec::new(),
        definition_order: model.definition_order.clone(),
    })
}

/// Drop from every cooperation set the actions that can never synchronise
/// there because the groups on one side (or both) do not enable them.
///
/// After reduction this matters: an action shared between a surviving group
/// and a *removed* large group stays in a higher cooperation set, where it
/// would block the surviving active side outright. The sub-chains of the full
/// CTMC keep making such moves (at the active side's apparent rate), so the
/// aggregated chain must too.
pub fn prune_inert_cooperation(model: &GroupedModel) -> GroupedModel {
    fn enabled_under(model: &GroupedModel, node: &SystemEquation) -> BTreeSet<ActionId> {
        node.leaves()
            .iter()
            .flat_map(|l| model.components[&l.component].enabled_actions())
            .collect()
    }
    fn prune(model: &GroupedModel, node: &SystemEquation) -> SystemEquation {
        match node {
            SystemEquation::Group(leaf) => SystemEquation::Group(leaf.clone()),
            SystemEquation::Coop { left, right, coop_set } => {
                let l = enabled_under(model, left);
                let r = enabled_under(model, right);
                SystemEquation::Coop {
                    left: Box::new(prune(model, left)),
                    right: Box::new(prune(model, right)),
                    coop_set: coop_set
                        .iter()
                        .filter(|a| l.contains(a) && r.contains(a))
                        .copied()
                        .collect(),
                }
            }
        }
    }
    GroupedModel {
        equation: prune(model, &model.equation),
        ..model.clone()
    }
}

fn reduce_node(node: &SystemEquation, partition: &GroupPartition) -> Option<SystemEquation> {
    match node {
        SystemEquation::Group(leaf) => {
            if partition.is_large(&leaf.label) {
                None // Nil
            } else {
                Some(SystemEquation::Group(leaf.clone()))
            }
        }
        SystemEquation::Coop { left, right, coop_set } => {
            match (reduce_node(left, partition), reduce_node(right, partition)) {
                (Some(l), Some(r)) => Some(SystemEquation::Coop {
                    left: Box::new(l),
                    right: Box::new(r),
                    coop_set: coop_set.clone(),
                }),
                // `Nil <L> P = P` drops the cooperation set with the Nil side.
                (Some(p), None) | (None, Some(p)) => Some(p),
                (None, None) => None,
            }
        }
    }
}
