//! Scenario-level behavior: reproducibility of full runs and the in-degree
//! tail contrast between attachment rules.

use rnft_core::incentive::IncentiveParams;
use rnft_core::scenario::{
    report_csv, run_scenario, Arrivals, Attachment, ScenarioConfig,
};

fn config(attachment: Attachment, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        rounds: 25,
        arrivals_per_round: Arrivals::Fixed(20),
        references_per_arrival: 2,
        attachment,
        seed,
        self_weight: 0.5,
        incentive: IncentiveParams {
            base_expense: 100.0,
            lambda: 0.5,
            alpha: 0.5,
            beta: 1.0,
            g: 4.0,
            k_scale: 10.0,
        },
    }
}

#[test]
fn five_hundred_token_run_is_reproducible() {
    let cfg = config(Attachment::Preferential, 99);
    let (state_a, rows_a) = run_scenario(&cfg).unwrap();
    let (state_b, rows_b) = run_scenario(&cfg).unwrap();
    assert_eq!(state_a.graph().len(), 500);
    assert_eq!(report_csv(&rows_a), report_csv(&rows_b));
    assert_eq!(
        state_a
            .blocks()
            .iter()
            .map(|b| b.state_root)
            .collect::<Vec<_>>(),
        state_b
            .blocks()
            .iter()
            .map(|b| b.state_root)
            .collect::<Vec<_>>()
    );
    assert_eq!(state_a.graph().to_dot(), state_b.graph().to_dot());
    assert_eq!(
        state_a.graph().to_snapshot_json(),
        state_b.graph().to_snapshot_json()
    );
    state_a.graph().check_invariants().unwrap();
    state_a.verify_chain().unwrap();
}

#[test]
fn preferential_attachment_has_heavier_in_degree_tail() {
    let mut preferential_max_sum = 0usize;
    let mut uniform_max_sum = 0usize;
    for seed in 0..20 {
        let (state, _) = run_scenario(&config(Attachment::Preferential, seed)).unwrap();
        preferential_max_sum += state
            .graph()
            .records()
            .map(|r| r.relationship.referred.len())
            .max()
            .unwrap();
        let (state, _) = run_scenario(&config(Attachment::Uniform, seed)).unwrap();
        uniform_max_sum += state
            .graph()
            .records()
            .map(|r| r.relationship.referred.len())
            .max()
            .unwrap();
    }
    assert!(
        preferential_max_sum > uniform_max_sum,
        "preferential max-degree sum {preferential_max_sum} should exceed uniform {uniform_max_sum}"
    );
}

#[test]
fn report_rows_reflect_graph_topology() {
    let (state, rows) = run_scenario(&config(Attachment::Uniform, 3)).unwrap();
    assert_eq!(rows.len(), state.graph().len());
    for row in &rows {
        let record = state.graph().get(row.token_id).unwrap();
        assert_eq!(row.in_degree, record.relationship.referred.len());
        assert_eq!(row.out_degree, record.relationship.referring.len());
        assert_eq!(row.created_height, record.relationship.created_height);
        assert!(row.ancestors_count >= row.out_degree);
        assert!((row.payoff.utility - (row.payoff.income - row.payoff.outcome)).abs() < 1e-12);
    }
    let csv = report_csv(&rows);
    assert!(csv.starts_with("tokenId,createdHeight,inDegree,outDegree,ancestorsCount,"));
    assert_eq!(csv.lines().count(), rows.len() + 1);
}
