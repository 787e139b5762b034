//! Population-level state space: numerical state vectors, apparent rates over
//! groups, the count-oriented semantics, and CTMC generation.
//!
//! Applied to a reduced model this yields the aggregated CTMC; applied to the
//! original model it yields the full CTMC. The two differ only in input.

use crate::rates::ApparentRate;
use crate::syntax::{ActionId, GroupedModel, SystemEquation};
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

/// Instance counts per (group, local state), in the fixed coordinate order of
/// a [`StateLayout`].
pub type StateVec = Vec<u32>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StateSpaceError {
    #[error("state cap of {cap} states exceeded")]
    StateCapExceeded { cap: usize },
    #[error("action `{action}` remains passive at the top level; the model is incomplete")]
    IncompleteModel { action: String },
    #[error("action `{action}`: non-zero active and passive offers meet within one cooperation side")]
    MixedCooperation { action: String },
    #[error("cannot move an instance out of a local state with count zero")]
    EmptySourceState,
    #[error("population of group `{label}` exceeds the supported range")]
    PopulationTooLarge { label: String },
    #[error("unknown group label `{0}`")]
    UnknownGroup(String),
}

/// Coordinates of one group within the global state vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSlot {
    pub label: String,
    pub component: String,
    pub offset: usize,
    pub states: Vec<String>,
}

impl GroupSlot {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Fixed (group, local state) coordinate order: groups in left-to-right
/// system-equation order, local states in component order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateLayout {
    pub slots: Vec<GroupSlot>,
    pub dimension: usize,
}

impl StateLayout {
    pub fn from_model(model: &GroupedModel) -> StateLayout {
        let mut slots = Vec::new();
        let mut offset = 0;
        for leaf in model.groups() {
            let component = &model.components[&leaf.component];
            slots.push(GroupSlot {
                label: leaf.label.clone(),
                component: component.name.clone(),
                offset,
                states: component.states.clone(),
            });
            offset += component.states.len();
        }
        StateLayout {
            slots,
            dimension: offset,
        }
    }

    pub fn slot(&self, label: &str) -> Option<&GroupSlot> {
        self.slots.iter().find(|s| s.label == label)
    }

    pub fn group_counts<'a>(&self, state: &'a [u32], label: &str) -> Option<&'a [u32]> {
        self.slot(label).map(|s| &state[s.offset..s.offset + s.len()])
    }

    /// `Group.State` names for every coordinate.
    pub fn variable_names(&self) -> Vec<String> {
        self.slots
            .iter()
            .flat_map(|s| s.states.iter().map(move |st| format!("{}.{}", s.label, st)))
            .collect()
    }
}

/// Comma-joined count vector, e.g. `2,0,0,1,1`.
pub fn format_counts(counts: &[u32]) -> String {
    counts
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Initial state vector from the model's declared populations.
pub fn initial_state(model: &GroupedModel, layout: &StateLayout) -> Result<StateVec, StateSpaceError> {
    let mut state = vec![0u32; layout.dimension];
    for (leaf, slot) in model.groups().iter().zip(&layout.slots) {
        for (i, count) in leaf.initial_counts.iter().enumerate() {
            state[slot.offset + i] =
                u32::try_from(*count).map_err(|_| StateSpaceError::PopulationTooLarge {
                    label: leaf.label.clone(),
                })?;
        }
    }
    Ok(state)
}

/// Count update for one instance changing local state: `from` loses one,
/// `to` gains one. With `from == to` the counts are unchanged.
pub fn move_instance(counts: &[u32], from: usize, to: usize) -> Result<Vec<u32>, StateSpaceError> {
    if counts[from] == 0 {
        return Err(StateSpaceError::EmptySourceState);
    }
    let mut next = counts.to_vec();
    next[from] -= 1;
    next[to] += 1;
    Ok(next)
}

/// Apparent rate of `action` offered by all instances of the group: the
/// population-weighted sum over its local states.
pub fn group_apparent_rate(
    model: &GroupedModel,
    layout: &StateLayout,
    state: &[u32],
    label: &str,
    action: ActionId,
) -> Result<ApparentRate, StateSpaceError> {
    let slot = layout
        .slot(label)
        .ok_or_else(|| StateSpaceError::UnknownGroup(label.to_owned()))?;
    let component = &model.components[&slot.component];
    let mut total = ApparentRate::ZERO;
    for (i, _) in slot.states.iter().enumerate() {
        let count = u64::from(state[slot.offset + i]);
        if count == 0 {
            continue;
        }
        let contribution = component.apparent_rate(i, action).scale(count);
        total = total.checked_add(contribution).map_err(|_| {
            StateSpaceError::MixedCooperation {
                action: model.actions.name(action).to_owned(),
            }
        })?;
    }
    Ok(total)
}

/// One enabled transition of the whole model in numerical vector form.
#[derive(Debug, Clone, PartialEq)]
pub struct Successor {
    pub action: ActionId,
    pub rate: f64,
    pub target: StateVec,
}

/// A derivation that may still be passive below the top of the equation tree.
#[derive(Debug, Clone)]
struct Derivation {
    action: ActionId,
    passive: bool,
    /// Rate for active derivations, total weight (possibly fractional after
    /// cooperation) for passive ones.
    magnitude: f64,
    target: StateVec,
}

/// All one-step transitions from `state`, in canonical order. Cooperation is
/// evaluated bottom-up over the equation tree; derivations reaching the same
/// `(action, target)` are merged by rate summation.
pub fn successors(
    model: &GroupedModel,
    layout: &StateLayout,
    state: &[u32],
) -> Result<Vec<Successor>, StateSpaceError> {
    let mut slot_index = 0usize;
    let moves = node_moves(model, layout, state, &model.equation, &mut slot_index)?;
    let mut merged: Vec<Successor> = Vec::new();
    for m in moves {
        if m.passive {
            return Err(StateSpaceError::IncompleteModel {
                action: model.actions.name(m.action).to_owned(),
            });
        }
        if m.magnitude <= 0.0 {
            continue;
        }
        match merged
            .iter_mut()
            .find(|s| s.action == m.action && s.target == m.target)
        {
            Some(existing) => existing.rate += m.magnitude,
            None => merged.push(Successor {
                action: m.action,
                rate: m.magnitude,
                target: m.target,
            }),
        }
    }
    merged.sort_by(|a, b| a.action.cmp(&b.action).then_with(|| a.target.cmp(&b.target)));
    Ok(merged)
}

fn node_moves(
    model: &GroupedModel,
    layout: &StateLayout,
    state: &[u32],
    node: &SystemEquation,
    slot_index: &mut usize,
) -> Result<Vec<Derivation>, StateSpaceError> {
    match node {
        SystemEquation::Group(leaf) => {
            let slot = &layout.slots[*slot_index];
            debug_assert_eq!(slot.label, leaf.label);
            *slot_index += 1;
            let component = &model.components[&leaf.component];
            let mut moves = Vec::new();
            for t in &component.transitions {
                let count = state[slot.offset + t.from];
                if count == 0 {
                    continue;
                }
                let mut target = state.to_vec();
                target[slot.offset + t.from] -= 1;
                target[slot.offset + t.to] += 1;
                let scaled = t.rate.apparent().scale(u64::from(count));
                let (passive, magnitude) = match scaled {
                    ApparentRate::Active(r) => (false, r),
                    ApparentRate::Passive(w) => (true, w as f64),
                };
                moves.push(Derivation {
                    action: t.action,
                    passive,
                    magnitude,
                    target,
                });
            }
            Ok(moves)
        }
        SystemEquation::Coop { left, right, coop_set } => {
            let left_moves = node_moves(model, layout, state, left, slot_index)?;
            let right_moves = node_moves(model, layout, state, right, slot_index)?;
            let mut out = Vec::new();
            for m in left_moves.iter().chain(right_moves.iter()) {
                if !coop_set.contains(&m.action) {
                    out.push(m.clone());
                }
            }
            for &action in coop_set {
                let l: Vec<&Derivation> = left_moves.iter().filter(|m| m.action == action).collect();
                let r: Vec<&Derivation> = right_moves.iter().filter(|m| m.action == action).collect();
                if l.is_empty() || r.is_empty() {
                    continue; // blocked: one side offers nothing
                }
                let total_l = side_total(model, action, &l)?;
                let total_r = side_total(model, action, &r)?;
                for lm in &l {
                    for rm in &r {
                        let (passive, magnitude) = cooperation_rate(lm, rm, total_l, total_r);
                        let mut target = lm.target.clone();
                        for (i, v) in rm.target.iter().enumerate() {
                            if *v != state[i] {
                                target[i] = *v;
                            }
                        }
                        out.push(Derivation {
                            action,
                            passive,
                            magnitude,
                            target,
                        });
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Total apparent rate one cooperation side offers for an action, as the sum
/// of its derivations' rates. Active and passive offers must not meet.
fn side_total(
    model: &GroupedModel,
    action: ActionId,
    moves: &[&Derivation],
) -> Result<(bool, f64), StateSpaceError> {
    let passive = moves[0].passive;
    if moves.iter().any(|m| m.passive != passive) {
        return Err(StateSpaceError::MixedCooperation {
            action: model.actions.name(action).to_owned(),
        });
    }
    Ok((passive, moves.iter().map(|m| m.magnitude).sum()))
}

/// Rate of one combined derivation:
/// `(r1/r*_left) * (r2/r*_right) * min(r*_left, r*_right)`, with a passive
/// side never bounding the minimum.
fn cooperation_rate(
    left: &Derivation,
    right: &Derivation,
    (left_passive, total_l): (bool, f64),
    (right_passive, total_r): (bool, f64),
) -> (bool, f64) {
    let frac_l = left.magnitude / total_l;
    let frac_r = right.magnitude / total_r;
    match (left_passive, right_passive) {
        (false, false) => (false, frac_l * frac_r * total_l.min(total_r)),
        (false, true) => (false, frac_l * frac_r * total_l),
        (true, false) => (false, frac_l * frac_r * total_r),
        (true, true) => (true, frac_l * frac_r * total_l.min(total_r)),
    }
}

/// Labelled transition of a generated CTMC.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CtmcTransition {
    pub from: usize,
    pub to: usize,
    pub action: ActionId,
    pub rate: f64,
}

/// Explicit CTMC over numerical state vectors. Self-loops may appear in the
/// labelled relation but are excluded from the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctmc {
    pub layout: StateLayout,
    pub actions: Vec<String>,
    pub states: Vec<StateVec>,
    pub initial: usize,
    pub transitions: Vec<CtmcTransition>,
    row_starts: Vec<usize>,
}

impl Ctmc {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn action_name(&self, id: ActionId) -> &str {
        &self.actions[id.0 as usize]
    }

    /// Transitions out of state `i` (sorted by action, then target).
    pub fn outgoing(&self, i: usize) -> &[CtmcTransition] {
        &self.transitions[self.row_starts[i]..self.row_starts[i + 1]]
    }

    /// Total exit rate of state `i`, self-loops excluded.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.outgoing(i)
            .iter()
            .filter(|t| t.to != i)
            .map(|t| t.rate)
            .sum()
    }

    /// Generator entries of row `i`: `(target, summed rate)` over distinct
    /// targets, self-loops excluded.
    pub fn generator_row(&self, i: usize) -> Vec<(usize, f64)> {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for t in self.outgoing(i) {
            if t.to == i {
                continue;
            }
            match row.iter_mut().find(|(to, _)| *to == t.to) {
                Some((_, r)) => *r += t.rate,
                None => row.push((t.to, t.rate)),
            }
        }
        row.sort_by_key(|(to, _)| *to);
        row
    }

    fn from_parts(
        layout: StateLayout,
        actions: Vec<String>,
        states: Vec<StateVec>,
        initial: usize,
        transitions: Vec<CtmcTransition>,
    ) -> Ctmc {
        let mut row_starts = vec![0usize; states.len() + 1];
        for t in &transitions {
            row_starts[t.from + 1] += 1;
        }
        for i in 1..row_starts.len() {
            row_starts[i] += row_starts[i - 1];
        }
        Ctmc {
            layout,
            actions,
            states,
            initial,
            transitions,
            row_starts,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    /// Abort once this many states have been discovered.
    pub state_cap: usize,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { state_cap: 10_000_000 }
    }
}

/// Breadth-first closure of the model's initial state under [`successors`].
/// State indices follow discovery order, which is deterministic because each
/// state's successors are canonically ordered.
pub fn generate_ctmc(model: &GroupedModel, options: GenerateOptions) -> Result<Ctmc, StateSpaceError> {
    let layout = StateLayout::from_model(model);
    let initial = initial_state(model, &layout)?;

    let mut index: HashMap<StateVec, usize> = HashMap::new();
    let mut states: Vec<StateVec> = Vec::new();
    let mut transitions: Vec<CtmcTransition> = Vec::new();
    index.insert(initial.clone(), 0);
    states.push(initial);

    let mut head = 0usize;
    while head < states.len() {
        let state = states[head].clone();
        for s in successors(model, &layout, &state)? {
            let to = match index.get(&s.target) {
                Some(&i) => i,
                None => {
                    if states.len() >= options.state_cap {
                        return Err(StateSpaceError::StateCapExceeded {
                            cap: options.state_cap,
                        });
                    }
                    let i = states.len();
                    index.insert(s.target.clone(), i);
                    states.push(s.target);
                    i
                }
            };
            transitions.push(CtmcTransition {
                from: head,
                to,
                action: s.action,
                rate: s.rate,
            });
        }
        head += 1;
    }

    let actions: Vec<String> = (0..model.actions.len())
        .map(|i| model.actions.name(ActionId(i as u32)).to_owned())
        .collect();
    Ok(Ctmc::from_parts(layout, actions, states, 0, transitions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{reduce, GroupPartition};
    use crate::syntax::parse_model;

    fn modified_model(ns: u64, nc: u64) -> GroupedModel {
        parse_model(&format!(
            "rates {{ r_t = 15.0; r_s = 10.0; r_l = 50.0; r_b = 0.005; r_f = 0.005; }}
             C_think = (think, r_t).C_req;
             C_req   = (req, T).C_think;
             S_idle  = (req, r_s).S_log + (brk, r_b).S_broken;
             S_log   = (log, r_l).S_idle;
             S_broken = (fix, r_f).S_idle;
             system = Servers{{ S_idle[{ns}] }} <req> Clients{{ C_think[{nc}] }};
             small Servers; large Clients;"
        ))
        .unwrap()
    }

    fn reduced(ns: u64) -> GroupedModel {
        let model = modified_model(ns, 2);
        let partition = GroupPartition::from_hints(&model, None);
        reduce(&model, &partition).unwrap()
    }

    fn state(model: &GroupedModel, layout: &StateLayout, counts: &[(&str, &str, u32)]) -> StateVec {
        let mut v = vec![0u32; layout.dimension];
        for (group, state, count) in counts {
            let slot = layout.slot(group).unwrap();
            let component = &model.components[&slot.component];
            let idx = component.state_index(state).unwrap();
            v[slot.offset + idx] = *count;
        }
        v
    }

    #[test]
    fn apparent_rate_of_single_prefix() {
        let model = modified_model(2, 2);
        let clients = &model.components["C_think"];
        let think = model.actions.lookup("think").unwrap();
        let c_think = clients.state_index("C_think").unwrap();
        assert_eq!(clients.apparent_rate(c_think, think), ApparentRate::Active(15.0));
    }

    #[test]
    fn apparent_rate_sums_passive_weights_over_choice() {
        let model = parse_model(
            "P = (a, 2*T).Q + (a, 3*T).R; Q = (b, 1.0).P; R = (b, 1.0).P;
             A = (a, 5.0).A;
             system = G{P[1]} <a> H{A[1]};",
        )
        .unwrap();
        let p = &model.components["P"];
        let a = model.actions.lookup("a").unwrap();
        assert_eq!(p.apparent_rate(0, a), ApparentRate::Passive(5));
    }

    #[test]
    fn apparent_rate_zero_when_not_enabled() {
        let model = modified_model(2, 2);
        let servers = &model.components["S_idle"];
        let req = model.actions.lookup("req").unwrap();
        let s_log = servers.state_index("S_log").unwrap();
        assert_eq!(servers.apparent_rate(s_log, req), ApparentRate::ZERO);
    }

    #[test]
    fn apparent_rate_to_specific_target() {
        let model = modified_model(2, 2);
        let servers = &model.components["S_idle"];
        let req = model.actions.lookup("req").unwrap();
        let (idle, log, broken) = (
            servers.state_index("S_idle").unwrap(),
            servers.state_index("S_log").unwrap(),
            servers.state_index("S_broken").unwrap(),
        );
        assert_eq!(servers.apparent_rate_to(idle, req, log), ApparentRate::Active(10.0));
        assert_eq!(servers.apparent_rate_to(idle, req, broken), ApparentRate::ZERO);
    }

    #[test]
    fn group_apparent_rate_scales_by_population() {
        let model = modified_model(2, 2);
        let layout = StateLayout::from_model(&model);
        let req = model.actions.lookup("req").unwrap();
        let s = state(&model, &layout, &[("Servers", "S_idle", 2), ("Clients", "C_think", 2)]);
        assert_eq!(
            group_apparent_rate(&model, &layout, &s, "Servers", req).unwrap(),
            ApparentRate::Active(20.0)
        );
        let s = state(
            &model,
            &layout,
            &[("Servers", "S_idle", 2), ("Clients", "C_req", 1), ("Clients", "C_think", 1)],
        );
        assert_eq!(
            group_apparent_rate(&model, &layout, &s, "Clients", req).unwrap(),
            ApparentRate::Passive(1)
        );
        let think = model.actions.lookup("think").unwrap();
        assert_eq!(
            group_apparent_rate(&model, &layout, &s, "Servers", think).unwrap(),
            ApparentRate::ZERO
        );
    }

    #[test]
    fn move_instance_shifts_one_count() {
        assert_eq!(move_instance(&[2, 0, 0], 0, 1).unwrap(), vec![1, 1, 0]);
        assert_eq!(move_instance(&[1, 1, 0], 1, 0).unwrap(), vec![2, 0, 0]);
        assert_eq!(move_instance(&[1, 1, 0], 0, 0).unwrap(), vec![1, 1, 0]);
        assert_eq!(move_instance(&[0, 1], 0, 1), Err(StateSpaceError::EmptySourceState));
    }

    #[test]
    fn cooperation_resolves_to_the_active_side() {
        let model = modified_model(2, 2);
        let layout = StateLayout::from_model(&model);
        let s = state(
            &model,
            &layout,
            &[("Servers", "S_idle", 2), ("Clients", "C_req", 1), ("Clients", "C_think", 1)],
        );
        let succ = successors(&model, &layout, &s).unwrap();
        let req = model.actions.lookup("req").unwrap();
        let req_moves: Vec<_> = succ.iter().filter(|m| m.action == req).collect();
        assert_eq!(req_moves.len(), 1);
        assert_eq!(req_moves[0].rate, 20.0); // min(2*r_s, 1*T) = 2*r_s
    }

    #[test]
    fn cooperation_blocked_without_passive_partners() {
        let model = modified_model(2, 2);
        let layout = StateLayout::from_model(&model);
        let s = state(&model, &layout, &[("Servers", "S_idle", 2), ("Clients", "C_think", 2)]);
        let succ = successors(&model, &layout, &s).unwrap();
        let req = model.actions.lookup("req").unwrap();
        assert!(succ.iter().all(|m| m.action != req));
        let think = model.actions.lookup("think").unwrap();
        let think_rate: f64 = succ.iter().filter(|m| m.action == think).map(|m| m.rate).sum();
        assert_eq!(think_rate, 30.0); // 2 thinking clients at r_t = 15
    }

    #[test]
    fn successors_preserve_population() {
        let model = modified_model(3, 5);
        let layout = StateLayout::from_model(&model);
        let initial = initial_state(&model, &layout).unwrap();
        for s in successors(&model, &layout, &initial).unwrap() {
            let servers: u32 = layout.group_counts(&s.target, "Servers").unwrap().iter().sum();
            let clients: u32 = layout.group_counts(&s.target, "Clients").unwrap().iter().sum();
            assert_eq!((servers, clients), (3, 5));
        }
    }

    #[test]
    fn incomplete_model_rejected_at_top_level() {
        // Both sides passive on `a`, no active participant anywhere.
        let model = parse_model(
            "P = (a, T).P; Q = (a, T).Q;
             system = G{P[1]} <a> H{Q[1]};",
        )
        .unwrap();
        let layout = StateLayout::from_model(&model);
        let initial = initial_state(&model, &layout).unwrap();
        assert_eq!(
            successors(&model, &layout, &initial),
            Err(StateSpaceError::IncompleteModel { action: "a".into() })
        );
    }

    #[test]
    fn aggregated_chain_has_compositions_of_servers() {
        assert_eq!(generate_ctmc(&reduced(2), GenerateOptions::default()).unwrap().len(), 6);
        assert_eq!(generate_ctmc(&reduced(5), GenerateOptions::default()).unwrap().len(), 21);
    }

    #[test]
    fn full_two_by_two_chain_has_18_states() {
        let ctmc = generate_ctmc(&modified_model(2, 2), GenerateOptions::default()).unwrap();
        assert_eq!(ctmc.len(), 18);
    }

    #[test]
    fn state_cap_is_enforced() {
        let err = generate_ctmc(&modified_model(5, 100), GenerateOptions { state_cap: 10 });
        assert_eq!(err, Err(StateSpaceError::StateCapExceeded { cap: 10 }));
    }

    #[test]
    fn aggregated_chain_is_independent_of_client_population() {
        let build = |nc: u64| {
            let model = modified_model(2, nc);
            let partition = GroupPartition::from_hints(&model, None);
            let reduced = reduce(&model, &partition).unwrap();
            generate_ctmc(&reduced, GenerateOptions::default()).unwrap()
        };
        let a = build(2);
        let b = build(100);
        assert_eq!(a.states, b.states);
        assert_eq!(a.transitions, b.transitions);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_ctmc(&modified_model(3, 4), GenerateOptions::default()).unwrap();
        let b = generate_ctmc(&modified_model(3, 4), GenerateOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_cooperation_reduces_to_plain_minimum() {
        // Single local move on each side: the derivation fractions are 1 and
        // the combined rate is exactly min of the sides' apparent rates.
        let model = parse_model(
            "P = (a, 3.0).P2; P2 = (b, 1.0).P;
             Q = (a, 2.0).Q2; Q2 = (c, 1.0).Q;
             system = G{P[4]} <a> H{Q[5]};",
        )
        .unwrap();
        let layout = StateLayout::from_model(&model);
        let initial = initial_state(&model, &layout).unwrap();
        let succ = successors(&model, &layout, &initial).unwrap();
        let a = model.actions.lookup("a").unwrap();
        let m: Vec<_> = succ.iter().filter(|m| m.action == a).collect();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].rate, f64::min(4.0 * 3.0, 5.0 * 2.0));
    }

    #[test]
    fn weighted_passive_branching_splits_the_shared_rate() {
        let model = parse_model(
            "C = (a, 2*T).C1 + (a, T).C2; C1 = (u, 1.0).C; C2 = (u, 1.0).C;
             S = (a, 6.0).S2; S2 = (v, 1.0).S;
             system = Srv{S[1]} <a> Cli{C[3]};",
        )
        .unwrap();
        let layout = StateLayout::from_model(&model);
        let initial = initial_state(&model, &layout).unwrap();
        let succ = successors(&model, &layout, &initial).unwrap();
        let a = model.actions.lookup("a").unwrap();
        let mut rates: Vec<f64> = succ.iter().filter(|m| m.action == a).map(|m| m.rate).collect();
        rates.sort_by(f64::total_cmp);
        // Weights 2:1 split the full rate 6.0 into 4.0 and 2.0.
        assert_eq!(rates, vec![2.0, 4.0]);
    }
}
