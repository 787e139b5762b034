//! End-to-end runs of the whole pipeline on small models: check, reduce,
//! generate both chains, verify the aggregation, and solve.

use pepa::analysis::{check_aggregation_condition, classify, reduce, GroupPartition};
use pepa::export::ctmc_to_json;
use pepa::solve::{
    build_marginal_odes, marginal_measure, steady_state, transient, Distribution,
    TimePoint, TransientOptions,
};
use pepa::statespace::{generate_ctmc, GenerateOptions};
use pepa::syntax::{parse_model, GroupedModel};
use pepa::verify::{
    boundary_probability, boundary_states, chain_sums, collapse_ck, compare_generators,
    cross_rates, partition_subchains,
};

fn client_server(ns: u64, nc: u64, rt: f64) -> GroupedModel {
    parse_model(&format!(
        "rates {{ r_t = {rt}; r_s = 10.0; r_l = 50.0; r_b = 0.005; r_f = 0.005; }}
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

/// Full pipeline on one conforming model; returns the generator diff.
fn verify_model(model: &GroupedModel) -> f64 {
    let partition = GroupPartition::from_hints(model, None);
    let report = check_aggregation_condition(model, &partition, false).unwrap();
    assert!(report.satisfied, "{:?}", report.violations);
    let classification = classify(model, &partition).unwrap();
    // The three classes are disjoint (checked by classify) and cover every
    // enabled action type.
    let mut classified: std::collections::BTreeSet<_> = classification.large_only.clone();
    classified.extend(&classification.small_only);
    classified.extend(&classification.shared);
    let enabled: std::collections::BTreeSet<_> = model
        .components
        .values()
        .flat_map(|c| c.enabled_actions())
        .collect();
    assert_eq!(classified, enabled, "classification does not cover all actions");
    let full = generate_ctmc(model, GenerateOptions::default()).unwrap();
    let chains = partition_subchains(&full, &classification, &partition).unwrap();
    let boundary = boundary_states(&full, model, &partition, &classification, &chains).unwrap();
    let table = cross_rates(&full, &chains, &boundary, &classification);
    assert!(table.regular, "{:?}", table.irregularities);
    let collapsed = collapse_ck(&chains, &table, false).unwrap();
    let aggregated = pepa::aggregated_ctmc(model, &partition, GenerateOptions::default()).unwrap();
    compare_generators(&collapsed, &aggregated).unwrap().max_abs_diff
}

#[test]
fn client_server_verifies_exactly() {
    assert_eq!(verify_model(&client_server(2, 2, 1.5)), 0.0);
    assert_eq!(verify_model(&client_server(3, 8, 0.4)), 0.0);
}

#[test]
fn two_server_type_model_verifies() {
    let model = parse_model(
        "C_think = (think, 1.0).C_req;
         C_req = (req, T).C_think + (ask, T).C_think;
         S_idle = (req, 10.0).S_log;
         S_log = (log, 50.0).S_idle;
         S_ready = (ask, 4.0).S_proc;
         S_proc = (process, 2.0).S_ready;
         system = (Servers{ S_idle[2] } <req> Clients{ C_think[8] }) <ask> Others{ S_ready[2] };
         small Servers, Others; large Clients;",
    )
    .unwrap();
    let diff = verify_model(&model);
    assert!(diff <= 1e-12, "diff {diff}");
}

#[test]
fn three_small_group_synthetic_verifies() {
    // Three small groups (one pair cooperating), a large passive partner with
    // weighted branching, and an independent small group.
    let model = parse_model(
        "P1 = (a, 1.5).P2; P2 = (b, 2.0).P1;
         Q1 = (a, T).Q2; Q2 = (c, 3.0).Q1;
         R1 = (d, 0.5).R2; R2 = (e, 0.75).R1;
         C1 = (b, 2*T).C2 + (b, T).C3; C2 = (f, 4.0).C1; C3 = (f, 4.0).C1;
         system = ((G1{P1[2]} <a> G2{Q1[2]}) <> G3{R1[1]}) <b> L{C1[7]};
         small G1, G2, G3; large L;",
    )
    .unwrap();
    let diff = verify_model(&model);
    // Weighted passive branching makes the two routes sum fractions in
    // different orders, so exact float identity is not guaranteed.
    assert!(diff <= 1e-12, "diff {diff}");
}

#[test]
fn aggregated_marginals_match_independent_product_form() {
    // In the reduced client-server model the servers are independent; the
    // stationary distribution is multinomial over the per-server chain
    // pi = (1, r_s/r_l, r_b/r_f) normalised. Checked for 2 servers.
    let model = client_server(2, 2, 1.5);
    let partition = GroupPartition::from_hints(&model, None);
    let reduced = reduce(&model, &partition).unwrap();
    let aggregated = generate_ctmc(&reduced, GenerateOptions::default()).unwrap();
    let pi = steady_state(&aggregated).unwrap();
    let (p_idle, p_log, p_broken): (f64, f64, f64) = {
        let z = 1.0 + 10.0 / 50.0 + 0.005 / 0.005;
        (1.0 / z, 0.2 / z, 1.0 / z)
    };
    let expect = |counts: [u32; 3]| {
        let coeff = match counts {
            [2, 0, 0] | [0, 2, 0] | [0, 0, 2] => 1.0,
            _ => 2.0,
        };
        coeff
            * p_idle.powi(counts[0] as i32)
            * p_log.powi(counts[1] as i32)
            * p_broken.powi(counts[2] as i32)
    };
    for (state, p) in aggregated.states.iter().zip(&pi.probs) {
        let want = expect([state[0], state[1], state[2]]);
        assert!((p - want).abs() < 1e-12, "state {state:?}: {p} vs {want}");
    }
}

#[test]
fn full_chain_sums_equal_aggregated_when_boundary_mass_vanishes() {
    // With fast thinking the boundary probability is negligible and the
    // chain-summed full distribution matches the aggregated one closely.
    let model = client_server(2, 6, 40.0);
    let partition = GroupPartition::from_hints(&model, None);
    let classification = classify(&model, &partition).unwrap();
    let full = generate_ctmc(&model, GenerateOptions::default()).unwrap();
    let chains = partition_subchains(&full, &classification, &partition).unwrap();
    let boundary = boundary_states(&full, &model, &partition, &classification, &chains).unwrap();

    let full_pi = steady_state(&full).unwrap();
    let sums = chain_sums(&full_pi, &chains).unwrap();

    let reduced = reduce(&model, &partition).unwrap();
    let aggregated = generate_ctmc(&reduced, GenerateOptions::default()).unwrap();
    let agg_pi = steady_state(&aggregated).unwrap();

    let pb = boundary_probability(&full_pi, &boundary);
    assert!(pb < 1e-3, "boundary probability {pb}");
    for (chain, chain_p) in chains.chains.iter().zip(&sums.probs) {
        let agg_state = aggregated
            .states
            .iter()
            .position(|s| *s == chain.key)
            .unwrap();
        let diff = (chain_p - agg_pi.probs[agg_state]).abs();
        assert!(diff <= 5.0 * pb + 1e-9, "chain {:?}: diff {diff}", chain.key);
    }
}

#[test]
fn chain_sums_track_aggregated_within_boundary_envelope() {
    // Across the three experiment cases, the chain-summed full steady state
    // deviates from the aggregated one by at most five times the boundary
    // probability per chain (plus float noise when that probability is ~0).
    for rt in [15.0, 0.2, 0.1] {
        let model = client_server(5, 100, rt);
        let partition = GroupPartition::from_hints(&model, None);
        let classification = classify(&model, &partition).unwrap();
        let full = generate_ctmc(&model, GenerateOptions::default()).unwrap();
        let chains = partition_subchains(&full, &classification, &partition).unwrap();
        let boundary =
            boundary_states(&full, &model, &partition, &classification, &chains).unwrap();
        let full_pi = steady_state(&full).unwrap();
        let pb = boundary_probability(&full_pi, &boundary);
        let sums = chain_sums(&full_pi, &chains).unwrap();
        let aggregated =
            pepa::aggregated_ctmc(&model, &partition, GenerateOptions::default()).unwrap();
        let agg_pi = steady_state(&aggregated).unwrap();
        for (chain, chain_p) in chains.chains.iter().zip(&sums.probs) {
            let agg_state = aggregated.states.iter().position(|s| *s == chain.key).unwrap();
            let diff = (chain_p - agg_pi.probs[agg_state]).abs();
            assert!(
                diff <= 5.0 * pb + 1e-9,
                "r_t={rt}, chain {:?}: diff {diff} vs envelope {}",
                chain.key,
                5.0 * pb + 1e-9
            );
        }
    }
}

#[test]
fn transient_converges_to_steady_state() {
    let model = client_server(2, 2, 1.5);
    let partition = GroupPartition::from_hints(&model, None);
    let reduced = reduce(&model, &partition).unwrap();
    let aggregated = generate_ctmc(&reduced, GenerateOptions::default()).unwrap();
    let odes = build_marginal_odes(&aggregated);
    let pi = steady_state(&aggregated).unwrap();
    let p0 = Distribution::point(aggregated.len(), aggregated.initial);
    let out = transient(&odes, &p0, &[10_000.0], TransientOptions::default()).unwrap();
    for (p, want) in out[0].probs.iter().zip(&pi.probs) {
        assert!((p - want).abs() < 1e-5, "{p} vs {want}");
    }
}

#[test]
fn marginal_measures_over_aggregated_states() {
    let model = client_server(2, 2, 1.5);
    let partition = GroupPartition::from_hints(&model, None);
    let reduced = reduce(&model, &partition).unwrap();
    let aggregated = generate_ctmc(&reduced, GenerateOptions::default()).unwrap();
    let pi = steady_state(&aggregated).unwrap();
    assert_eq!(pi.time, TimePoint::Steady);
    let all = marginal_measure(&pi, &aggregated.states, |_| true);
    assert!((all - 1.0).abs() < 1e-12);
    // "Running" servers are those not broken: coordinates are
    // [S_idle, S_log, S_broken].
    let both_running = marginal_measure(&pi, &aggregated.states, |c| c[0] + c[1] == 2);
    let one_broken = marginal_measure(&pi, &aggregated.states, |c| c[2] == 1);
    let both_broken = marginal_measure(&pi, &aggregated.states, |c| c[2] == 2);
    assert!((both_running + one_broken + both_broken - 1.0).abs() < 1e-12);
}

#[test]
fn aggregated_chain_serialisation_is_population_independent() {
    let build = |nc: u64| {
        let model = client_server(2, nc, 1.5);
        let partition = GroupPartition::from_hints(&model, None);
        let reduced = reduce(&model, &partition).unwrap();
        ctmc_to_json(&generate_ctmc(&reduced, GenerateOptions::default()).unwrap())
    };
    let reference = build(2);
    assert_eq!(reference, build(10));
    assert_eq!(reference, build(100));
}
