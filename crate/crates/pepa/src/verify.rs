//! Executable correctness argument for the aggregation: recover sub-chains,
//! boundary states and cross-chain rates from the *full* CTMC, collapse its
//! probability-flux equations to sub-chain level, and compare against the
//! generator of the directly built aggregated CTMC.

use crate::analysis::{coop_partners, ActionClassification, GroupPartition};
use crate::solve::{Distribution, OdeSystem};
use crate::statespace::{format_counts, group_apparent_rate, Ctmc, StateSpaceError, StateVec};
use crate::syntax::{ActionId, GroupedModel};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VerifyError {
    #[error("states <{a}> and <{b}> share a small-group configuration but are not connected by large-group transitions")]
    PartitionMismatch { a: String, b: String },
    #[error("a large-group transition connects <{a}> and <{b}>, which differ in their small-group configuration")]
    LargeTransitionChangesSmallGroups { a: String, b: String },
    #[error("cross-chain rates are irregular ({count} counterexample(s))")]
    IrregularRates { count: usize },
    #[error("no aggregated state matches sub-chain <{key}>")]
    UnmatchedChain { key: String },
    #[error("no sub-chain matches aggregated state <{key}>")]
    UnmatchedState { key: String },
    #[error("distribution has {got} entries but the chain has {expected} states")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    StateSpace(#[from] StateSpaceError),
}

/// One sub-chain: the full-CTMC states sharing a small-group configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainInfo {
    /// The shared small-group sub-vector.
    pub key: StateVec,
    pub states: Vec<usize>,
}

/// Partition of the full CTMC into sub-chains, keyed by the small-group
/// sub-vector and cross-checked against connectivity through large-group
/// transitions. Chains are ordered lexicographically by key.
#[derive(Debug, Clone, PartialEq)]
pub struct SubChainPartition {
    /// Indices of the small groups' coordinates within the full state vector.
    pub small_coords: Vec<usize>,
    pub chains: Vec<ChainInfo>,
    /// Chain id of every full-CTMC state.
    pub chain_of: Vec<usize>,
}

impl SubChainPartition {
    pub fn small_key(&self, state: &[u32]) -> StateVec {
        self.small_coords.iter().map(|&i| state[i]).collect()
    }

    pub fn chain_by_key(&self, key: &[u32]) -> Option<usize> {
        self.chains.iter().position(|c| c.key == key)
    }
}

/// Group the full CTMC's states into sub-chains.
///
/// Both characterisations are computed: states sharing their small-group
/// sub-vector, and undirected connectivity through transitions labelled with
/// large-only actions. A disagreement signals a model outside the analysable
/// sub-class (or an inconsistent classification) and is an error.
pub fn partition_subchains(
    full: &Ctmc,
    classification: &ActionClassification,
    partition: &GroupPartition,
) -> Result<SubChainPartition, VerifyError> {
    let mut small_coords = Vec::new();
    for slot in &full.layout.slots {
        if partition.small.contains(&slot.label) {
            small_coords.extend(slot.offset..slot.offset + slot.len());
        }
    }

    let n = full.len();
    let mut by_key: BTreeMap<StateVec, Vec<usize>> = BTreeMap::new();
    for (i, state) in full.states.iter().enumerate() {
        let key: StateVec = small_coords.iter().map(|&c| state[c]).collect();
        by_key.entry(key).or_default().push(i);
    }

    // Connectivity closure over large-only transitions.
    let mut find = UnionFind::new(n);
    for t in &full.transitions {
        if classification.large_only.contains(&t.action) {
            find.union(t.from, t.to);
        }
    }

    // The two characterisations must coincide.
    for t in &full.transitions {
        if classification.large_only.contains(&t.action) {
            let ka: StateVec = small_coords.iter().map(|&c| full.states[t.from][c]).collect();
            let kb: StateVec = small_coords.iter().map(|&c| full.states[t.to][c]).collect();
            if ka != kb {
                return Err(VerifyError::LargeTransitionChangesSmallGroups {
                    a: format_counts(&full.states[t.from]),
                    b: format_counts(&full.states[t.to]),
                });
            }
        }
    }
    for states in by_key.values() {
        let root = find.find(states[0]);
        for &s in &states[1..] {
            if find.find(s) != root {
                return Err(VerifyError::PartitionMismatch {
                    a: format_counts(&full.states[states[0]]),
                    b: format_counts(&full.states[s]),
                });
            }
        }
    }

    let mut chain_of = vec![0usize; n];
    let chains: Vec<ChainInfo> = by_key
        .into_iter()
        .enumerate()
        .map(|(id, (key, states))| {
            for &s in &states {
                chain_of[s] = id;
            }
            ChainInfo { key, states }
        })
        .collect();
    Ok(SubChainPartition {
        small_coords,
        chains,
        chain_of,
    })
}

/// Boundary census of one sub-chain: which of its states have some shared
/// action blocked by an empty large-group offer, and which actions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainBoundary {
    pub boundary_states: BTreeSet<usize>,
    /// Per state, the set of blocked shared actions.
    pub blocked: BTreeMap<usize, BTreeSet<ActionId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub per_chain: Vec<ChainBoundary>,
}

impl BoundaryReport {
    /// Union of all boundary states.
    pub fn all_states(&self) -> BTreeSet<usize> {
        self.per_chain
            .iter()
            .flat_map(|c| c.boundary_states.iter().copied())
            .collect()
    }

    /// States of one chain where `action` is blocked.
    pub fn blocked_in(&self, chain: usize, action: ActionId) -> BTreeSet<usize> {
        self.per_chain[chain]
            .blocked
            .iter()
            .filter(|(_, actions)| actions.contains(&action))
            .map(|(state, _)| *state)
            .collect()
    }

    pub fn total(&self) -> usize {
        self.per_chain.iter().map(|c| c.boundary_states.len()).sum()
    }
}

/// Identify boundary states: a state is boundary iff some small group shares
/// an action with a large cooperation partner whose apparent rate there is
/// zero (nobody on the large side to participate).
pub fn boundary_states(
    full: &Ctmc,
    model: &GroupedModel,
    partition: &GroupPartition,
    classification: &ActionClassification,
    chains: &SubChainPartition,
) -> Result<BoundaryReport, VerifyError> {
    // Distinct (shared action, large partner) pairs to probe per state.
    let mut probes: BTreeSet<(ActionId, String)> = BTreeSet::new();
    for label in &partition.small {
        let component = model.component_of(label).expect("group has a component");
        for action in component.enabled_actions() {
            if !classification.shared.contains(&action) {
                continue;
            }
            let partners = coop_partners(model, label, action).expect("valid group");
            for partner in partners {
                if partition.large.contains(&partner) {
                    probes.insert((action, partner));
                }
            }
        }
    }

    let mut per_chain = vec![ChainBoundary::default(); chains.chains.len()];
    for (i, state) in full.states.iter().enumerate() {
        let mut blocked: BTreeSet<ActionId> = BTreeSet::new();
        for (action, partner) in &probes {
            let rate = group_apparent_rate(model, &full.layout, state, partner, *action)?;
            if rate.is_zero() {
                blocked.insert(*action);
            }
        }
        if !blocked.is_empty() {
            let chain = chains.chain_of[i];
            per_chain[chain].boundary_states.insert(i);
            per_chain[chain].blocked.insert(i, blocked);
        }
    }
    Ok(BoundaryReport { per_chain })
}

/// A breach of rate regularity between two sub-chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Irregularity {
    pub action: ActionId,
    pub chain_from: usize,
    pub chain_to: usize,
    /// Offending non-boundary source state.
    pub state: usize,
    /// Rate expected from the first observed source.
    pub expected: f64,
    /// Rate actually offered by this state (0 when it has no such transition).
    pub found: f64,
}

/// Cross-chain rates `r(action, Y_i, Y_j)` and totals `r(Y_i, Y_j)`, with the
/// rate-regularity verdict over all non-boundary states.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossRateTable {
    pub per_action: BTreeMap<(ActionId, usize, usize), f64>,
    pub total: BTreeMap<(usize, usize), f64>,
    pub regular: bool,
    pub irregularities: Vec<Irregularity>,
}

/// Collect the rates of all small/shared-action transitions between
/// sub-chains and check rate regularity: within each `(action, Y_i, Y_j)`
/// triple, every non-boundary source must offer the same total rate into
/// `Y_j`, and every non-boundary state of `Y_i` that can perform the action
/// must have such a transition.
///
/// Rates are compared exactly first (the count semantics produces identical
/// arithmetic for regular models) with a `1e-9` relative fallback.
pub fn cross_rates(
    full: &Ctmc,
    chains: &SubChainPartition,
    boundary: &BoundaryReport,
    classification: &ActionClassification,
) -> CrossRateTable {
    let relevant = |a: ActionId| {
        classification.small_only.contains(&a) || classification.shared.contains(&a)
    };

    // Per source state: total rate into each target chain, per action.
    // Parallel activities from one state into the same target chain (e.g.
    // weighted passive branching inside a large group) sum.
    type PerSource = BTreeMap<(ActionId, usize), f64>; // (action, target chain) -> rate
    let mut per_source: Vec<PerSource> = vec![BTreeMap::new(); full.len()];
    for t in &full.transitions {
        if !relevant(t.action) {
            continue;
        }
        let target_chain = chains.chain_of[t.to];
        *per_source[t.from].entry((t.action, target_chain)).or_insert(0.0) += t.rate;
    }

    let mut per_action: BTreeMap<(ActionId, usize, usize), f64> = BTreeMap::new();
    let mut irregularities = Vec::new();

    for (chain_id, chain) in chains.chains.iter().enumerate() {
        // Actions observed leaving this chain, with their target chains.
        let mut triples: BTreeSet<(ActionId, usize)> = BTreeSet::new();
        for &s in &chain.states {
            triples.extend(per_source[s].keys().copied());
        }
        for (action, target_chain) in triples {
            let blocked = boundary.blocked_in(chain_id, action);
            // Non-boundary sources must all carry one rate.
            let mut expected: Option<f64> = None;
            for &s in &chain.states {
                if blocked.contains(&s) {
                    continue;
                }
                let found = per_source[s].get(&(action, target_chain)).copied().unwrap_or(0.0);
                match expected {
                    None => expected = Some(found),
                    Some(e) => {
                        if !rates_agree(e, found) {
                            irregularities.push(Irregularity {
                                action,
                                chain_from: chain_id,
                                chain_to: target_chain,
                                state: s,
                                expected: e,
                                found,
                            });
                        }
                    }
                }
            }
            if let Some(rate) = expected {
                if rate > 0.0 {
                    per_action.insert((action, chain_id, target_chain), rate);
                }
            }
        }
    }

    let mut total: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for ((_, i, j), rate) in &per_action {
        *total.entry((*i, *j)).or_insert(0.0) += rate;
    }
    CrossRateTable {
        regular: irregularities.is_empty(),
        per_action,
        total,
        irregularities,
    }
}

fn rates_agree(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Collapse the full chain's probability-flux equations to one equation per
/// sub-chain, using the cross-chain totals: the boundary-probability-is-zero
/// approximation applied exactly.
pub fn collapse_ck(
    chains: &SubChainPartition,
    table: &CrossRateTable,
    force: bool,
) -> Result<OdeSystem, VerifyError> {
    if !table.regular && !force {
        return Err(VerifyError::IrregularRates {
            count: table.irregularities.len(),
        });
    }
    let m = chains.chains.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut diagonal = vec![0.0f64; m];
    for (&(i, j), &rate) in &table.total {
        if i == j {
            continue; // influx and efflux cancel within one chain
        }
        rows[j].push((i, rate));
        diagonal[i] -= rate;
    }
    for (i, d) in diagonal.iter().enumerate() {
        if *d != 0.0 {
            rows[i].push((i, *d));
        }
        rows[i].sort_by_key(|(j, _)| *j);
    }
    let labels = chains.chains.iter().map(|c| c.key.clone()).collect();
    Ok(OdeSystem::from_rows(labels, rows))
}

/// Entrywise comparison of the collapsed system against the aggregated
/// CTMC's own flux equations.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorDiff {
    pub max_abs_diff: f64,
    /// `(row chain key, column chain key)` of the worst entry.
    pub worst: Option<(StateVec, StateVec)>,
}

/// Match sub-chains to aggregated states by their small-group configuration
/// and report the largest absolute coefficient difference between the
/// collapsed equations and the aggregated chain's equations.
pub fn compare_generators(
    collapsed: &OdeSystem,
    aggregated: &Ctmc,
) -> Result<GeneratorDiff, VerifyError> {
    let agg = crate::solve::build_marginal_odes(aggregated);
    if agg.dim() != collapsed.dim() {
        return Err(if agg.dim() > collapsed.dim() {
            VerifyError::UnmatchedState {
                key: format_counts(&agg.labels[collapsed.dim().min(agg.dim() - 1)]),
            }
        } else {
            VerifyError::UnmatchedChain {
                key: format_counts(&collapsed.labels[agg.dim()]),
            }
        });
    }
    let mut agg_index: HashMap<&StateVec, usize> = HashMap::new();
    for (i, label) in agg.labels.iter().enumerate() {
        agg_index.insert(label, i);
    }
    // chain id -> aggregated state id
    let mut mapping = Vec::with_capacity(collapsed.dim());
    for key in &collapsed.labels {
        match agg_index.get(key) {
            Some(&i) => mapping.push(i),
            None => {
                return Err(VerifyError::UnmatchedChain {
                    key: format_counts(key),
                })
            }
        }
    }

    let mut max_abs_diff = 0.0f64;
    let mut worst = None;
    for (i, collapsed_row) in collapsed.rows.iter().enumerate() {
        let mut entries: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for (j, v) in collapsed_row {
            entries.entry(*j).or_insert((0.0, 0.0)).0 = *v;
        }
        for (aj, v) in &agg.rows[mapping[i]] {
            // Translate the aggregated column back to a chain id.
            let j = collapsed
                .labels
                .iter()
                .position(|k| k == &agg.labels[*aj])
                .ok_or_else(|| VerifyError::UnmatchedState {
                    key: format_counts(&agg.labels[*aj]),
                })?;
            entries.entry(j).or_insert((0.0, 0.0)).1 = *v;
        }
        for (j, (a, b)) in entries {
            let diff = (a - b).abs();
            if diff > max_abs_diff {
                max_abs_diff = diff;
                worst = Some((collapsed.labels[i].clone(), collapsed.labels[j].clone()));
            }
        }
    }
    Ok(GeneratorDiff { max_abs_diff, worst })
}

/// Sum a full-chain distribution over each sub-chain.
pub fn chain_sums(dist: &Distribution, chains: &SubChainPartition) -> Result<Distribution, VerifyError> {
    let n = chains.chain_of.len();
    if dist.probs.len() != n {
        return Err(VerifyError::DimensionMismatch {
            expected: n,
            got: dist.probs.len(),
        });
    }
    let mut probs = vec![0.0; chains.chains.len()];
    for (state, p) in dist.probs.iter().enumerate() {
        probs[chains.chain_of[state]] += p;
    }
    Ok(Distribution {
        probs,
        time: dist.time,
    })
}

/// Probability mass on the union of all boundary states.
pub fn boundary_probability(dist: &Distribution, boundary: &BoundaryReport) -> f64 {
    crate::solve::probability_of(dist, &boundary.all_states())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{check_aggregation_condition, classify, reduce, GroupPartition};
    use crate::solve::{build_marginal_odes, steady_state};
    use crate::statespace::{generate_ctmc, GenerateOptions};
    use crate::syntax::parse_model;

    const RS: f64 = 10.0;
    const RL: f64 = 50.0;
    const RB: f64 = 0.005;
    const RF: f64 = 0.005;

    fn modified_model(ns: u64, nc: u64) -> GroupedModel {
        parse_model(&format!(
            "rates {{ r_t = 1.5; r_s = {RS}; r_l = {RL}; r_b = {RB}; r_f = {RF}; }}
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

    struct Setup {
        model: GroupedModel,
        partition: GroupPartition,
        classification: ActionClassification,
        full: Ctmc,
        chains: SubChainPartition,
        boundary: BoundaryReport,
    }

    fn setup(ns: u64, nc: u64) -> Setup {
        let model = modified_model(ns, nc);
        let partition = GroupPartition::from_hints(&model, None);
        assert!(check_aggregation_condition(&model, &partition, false).unwrap().satisfied);
        let classification = classify(&model, &partition).unwrap();
        let full = generate_ctmc(&model, GenerateOptions::default()).unwrap();
        let chains = partition_subchains(&full, &classification, &partition).unwrap();
        let boundary = boundary_states(&full, &model, &partition, &classification, &chains).unwrap();
        Setup {
            model,
            partition,
            classification,
            full,
            chains,
            boundary,
        }
    }

    fn chain_by_servers(s: &Setup, key: [u32; 3]) -> usize {
        s.chains.chain_by_key(&key).unwrap()
    }

    #[test]
    fn two_by_two_has_six_chains_of_three_states() {
        let s = setup(2, 2);
        assert_eq!(s.chains.chains.len(), 6);
        for chain in &s.chains.chains {
            assert_eq!(chain.states.len(), 3);
        }
    }

    #[test]
    fn five_by_hundred_has_21_chains_of_101_states() {
        let s = setup(5, 100);
        assert_eq!(s.chains.chains.len(), 21);
        assert!(s.chains.chains.iter().all(|c| c.states.len() == 101));
    }

    #[test]
    fn chains_partition_the_state_space() {
        let s = setup(3, 4);
        let mut seen = std::collections::BTreeSet::new();
        for chain in &s.chains.chains {
            for &state in &chain.states {
                assert!(seen.insert(state), "state {state} in two chains");
            }
        }
        assert_eq!(seen.len(), s.full.len());
    }

    #[test]
    fn without_large_groups_every_state_is_its_own_chain() {
        let model = parse_model(
            "P = (a, 1.0).Q; Q = (b, 2.0).P; system = G{P[3]};",
        )
        .unwrap();
        let partition = GroupPartition::from_hints(&model, None);
        let classification = classify(&model, &partition).unwrap();
        let full = generate_ctmc(&model, GenerateOptions::default()).unwrap();
        let chains = partition_subchains(&full, &classification, &partition).unwrap();
        assert_eq!(chains.chains.len(), full.len());
    }

    #[test]
    fn boundary_states_are_those_with_no_requesting_clients() {
        let s = setup(2, 2);
        let all = s.boundary.all_states();
        assert_eq!(all.len(), 6);
        let cr = s
            .full
            .layout
            .slot("Clients")
            .map(|slot| {
                let c = &s.model.components[&slot.component];
                slot.offset + c.state_index("C_req").unwrap()
            })
            .unwrap();
        for &i in &all {
            assert_eq!(s.full.states[i][cr], 0);
        }
        // Every chain of this model has exactly one boundary state.
        for chain in &s.boundary.per_chain {
            assert_eq!(chain.boundary_states.len(), 1);
        }
    }

    #[test]
    fn blocked_action_set_names_req() {
        let s = setup(2, 2);
        let req = s.model.actions.lookup("req").unwrap();
        let chain = chain_by_servers(&s, [2, 0, 0]);
        let blocked = s.boundary.blocked_in(chain, req);
        assert_eq!(blocked.len(), 1);
        let state = *blocked.iter().next().unwrap();
        assert_eq!(s.full.states[state][..3], [2, 0, 0]);
        // No requesting clients in the blocked state (client coordinates are
        // [C_think, C_req] in discovery order).
        assert_eq!(s.full.states[state][3..], [2, 0]);
    }

    #[test]
    fn chain_without_shared_enablers_has_no_boundary() {
        // Small group shares nothing: no probes, no boundary states.
        let model = parse_model(
            "P = (a, 1.0).Q; Q = (b, 2.0).P;
             C = (u, 0.5).D; D = (v, 0.5).C;
             system = G{P[2]} <> L{C[9]};
             small G; large L;",
        )
        .unwrap();
        let partition = GroupPartition::from_hints(&model, None);
        let classification = classify(&model, &partition).unwrap();
        let full = generate_ctmc(&model, GenerateOptions::default()).unwrap();
        let chains = partition_subchains(&full, &classification, &partition).unwrap();
        let boundary = boundary_states(&full, &model, &partition, &classification, &chains).unwrap();
        assert_eq!(boundary.total(), 0);
    }

    #[test]
    fn cross_rate_of_req_is_population_scaled() {
        let s = setup(2, 2);
        let table = cross_rates(&s.full, &s.chains, &s.boundary, &s.classification);
        assert!(table.regular, "{:?}", table.irregularities);
        let req = s.model.actions.lookup("req").unwrap();
        let from = chain_by_servers(&s, [2, 0, 0]);
        let to = chain_by_servers(&s, [1, 1, 0]);
        assert_eq!(table.per_action[&(req, from, to)], 2.0 * RS);
        // Totals sum the per-action rates.
        assert_eq!(table.total[&(from, to)], 2.0 * RS);
    }

    #[test]
    fn cross_rates_regular_at_scale() {
        let s = setup(5, 30);
        let table = cross_rates(&s.full, &s.chains, &s.boundary, &s.classification);
        assert!(table.regular, "{:?}", table.irregularities);
    }

    #[test]
    fn collapsed_equation_matches_hand_derivation() {
        // For the chain of <2,0,0>: efflux 2 r_s + 2 r_b, influx r_l from the
        // <1,1,0> chain and r_f from the <1,0,1> chain.
        let s = setup(2, 2);
        let table = cross_rates(&s.full, &s.chains, &s.boundary, &s.classification);
        let odes = collapse_ck(&s.chains, &table, false).unwrap();
        let c200 = chain_by_servers(&s, [2, 0, 0]);
        let c110 = chain_by_servers(&s, [1, 1, 0]);
        let c101 = chain_by_servers(&s, [1, 0, 1]);
        assert_eq!(odes.coefficient(c200, c200), -(2.0 * RS + 2.0 * RB));
        assert_eq!(odes.coefficient(c200, c110), RL);
        assert_eq!(odes.coefficient(c200, c101), RF);
        for sum in odes.column_sums() {
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn single_chain_model_collapses_to_zero_system() {
        let model = parse_model(
            "P = (a, 1.0).P;
             C = (u, 0.5).D; D = (v, 0.5).C;
             system = G{P[1]} <> L{C[5]};
             small G; large L;",
        )
        .unwrap();
        let partition = GroupPartition::from_hints(&model, None);
        let classification = classify(&model, &partition).unwrap();
        let full = generate_ctmc(&model, GenerateOptions::default()).unwrap();
        let chains = partition_subchains(&full, &classification, &partition).unwrap();
        let boundary = boundary_states(&full, &model, &partition, &classification, &chains).unwrap();
        let table = cross_rates(&full, &chains, &boundary, &classification);
        let odes = collapse_ck(&chains, &table, false).unwrap();
        assert_eq!(odes.dim(), 1);
        assert!(odes.rows[0].is_empty() || odes.rows[0].iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn collapse_equals_aggregated_generator() {
        let s = setup(2, 2);
        let table = cross_rates(&s.full, &s.chains, &s.boundary, &s.classification);
        let collapsed = collapse_ck(&s.chains, &table, false).unwrap();
        let reduced = reduce(&s.model, &s.partition).unwrap();
        let aggregated = generate_ctmc(&reduced, GenerateOptions::default()).unwrap();
        let diff = compare_generators(&collapsed, &aggregated).unwrap();
        assert_eq!(diff.max_abs_diff, 0.0, "worst at {:?}", diff.worst);
    }

    #[test]
    fn perturbed_rate_shows_up_as_localised_diff() {
        let s = setup(2, 2);
        let mut table = cross_rates(&s.full, &s.chains, &s.boundary, &s.classification);
        let req = s.model.actions.lookup("req").unwrap();
        let from = chain_by_servers(&s, [2, 0, 0]);
        let to = chain_by_servers(&s, [1, 1, 0]);
        *table.per_action.get_mut(&(req, from, to)).unwrap() += 1.0;
        *table.total.get_mut(&(from, to)).unwrap() += 1.0;
        let collapsed = collapse_ck(&s.chains, &table, false).unwrap();
        let reduced = reduce(&s.model, &s.partition).unwrap();
        let aggregated = generate_ctmc(&reduced, GenerateOptions::default()).unwrap();
        let diff = compare_generators(&collapsed, &aggregated).unwrap();
        assert!((diff.max_abs_diff - 1.0).abs() < 1e-12);
        let worst = diff.worst.unwrap();
        // The perturbation sits in the efflux/influx entries of those chains.
        assert!(worst.0 == vec![2, 0, 0] || worst.0 == vec![1, 1, 0]);
    }

    #[test]
    fn chain_sums_add_up_to_one() {
        let s = setup(2, 2);
        let pi = steady_state(&s.full).unwrap();
        let sums = chain_sums(&pi, &s.chains).unwrap();
        assert!((sums.sum() - 1.0).abs() < 1e-12);
        assert_eq!(sums.probs.len(), 6);
    }

    #[test]
    fn boundary_probability_is_mass_on_boundary_states() {
        let s = setup(2, 2);
        let pi = steady_state(&s.full).unwrap();
        let pb = boundary_probability(&pi, &s.boundary);
        let direct: f64 = s
            .boundary
            .all_states()
            .iter()
            .map(|&i| pi.probs[i])
            .sum();
        assert_eq!(pb, direct);
        assert!(pb > 0.0 && pb < 1.0);
    }

    #[test]
    fn empty_boundary_gives_zero_probability() {
        let s = setup(2, 2);
        let pi = steady_state(&s.full).unwrap();
        let empty = BoundaryReport {
            per_chain: vec![ChainBoundary::default(); s.chains.chains.len()],
        };
        assert_eq!(boundary_probability(&pi, &empty), 0.0);
    }

    #[test]
    fn irregular_table_blocks_collapse_unless_forced() {
        let s = setup(2, 2);
        let mut table = cross_rates(&s.full, &s.chains, &s.boundary, &s.classification);
        table.regular = false;
        table.irregularities.push(Irregularity {
            action: s.model.actions.lookup("req").unwrap(),
            chain_from: 0,
            chain_to: 1,
            state: 0,
            expected: 1.0,
            found: 2.0,
        });
        assert!(matches!(
            collapse_ck(&s.chains, &table, false),
            Err(VerifyError::IrregularRates { count: 1 })
        ));
        assert!(collapse_ck(&s.chains, &table, true).is_ok());
    }

    #[test]
    fn program_output_equals_collapse_for_conforming_model() {
        // The marginal flux equations built from the aggregated chain equal
        // the collapsed equations built from the full chain.
        let s = setup(3, 5);
        let table = cross_rates(&s.full, &s.chains, &s.boundary, &s.classification);
        let collapsed = collapse_ck(&s.chains, &table, false).unwrap();
        let reduced = reduce(&s.model, &s.partition).unwrap();
        let aggregated = generate_ctmc(&reduced, GenerateOptions::default()).unwrap();
        let marginal = build_marginal_odes(&aggregated);
        let diff = compare_generators(&collapsed, &aggregated).unwrap();
        assert_eq!(diff.max_abs_diff, 0.0);
        assert_eq!(marginal.dim(), collapsed.dim());
    }
}
