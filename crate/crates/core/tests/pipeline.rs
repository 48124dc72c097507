use rebac_miner::datagen::{builtin, generate, inject_unknowns};
use rebac_miner::io::{policy_from_json, policy_to_json, read_dataset_csv, write_dataset_csv};
use rebac_miner::metrics::evaluate;
use rebac_miner::miner::{mine, naive_unknown_as_false, IdStrategy, MinerConfig};
use rebac_miner::model::{meaning, AclPolicy};

#[test]
fn degraded_org_chart_round_trip() {
    let spec = builtin("org-chart").unwrap();
    let g = generate(&spec, 4, 21).unwrap();
    let om = inject_unknowns(&g.om, &spec, 2.0, 21).unwrap();
    let acl = AclPolicy::new(g.cm.clone(), om.clone(), g.acl.au.clone());
    for id_strategy in [IdStrategy::RetryWithIdFeatures, IdStrategy::PerVectorIdConjunction] {
        let out = mine(&acl, &MinerConfig { id_strategy, ..Default::default() }).unwrap();
        assert_eq!(meaning(&g.cm, &om, &out.policy.rules), g.acl.au);
        let report = evaluate(&g.cm, &g.om, &out.policy, &g.ground_truth);
        assert!(report.syntactic >= 0.8, "{}", report.table());
        let back = policy_from_json(&policy_to_json(&out.policy).unwrap()).unwrap();
        assert_eq!(back, out.policy);
    }
}

#[test]
fn without_unknowns_ground_truth_is_recovered() {
    for name in ["univ-mini", "org-chart"] {
        let spec = builtin(name).unwrap();
        let g = generate(&spec, 3, 5).unwrap();
        let out = mine(&g.acl, &MinerConfig::default()).unwrap();
        let report = evaluate(&g.cm, &g.om, &out.policy, &g.ground_truth);
        assert_eq!(report.semantic, 1.0, "{name}");
        assert_eq!(report.syntactic, 1.0, "{name}\n{}", report.table());
    }
}

#[test]
fn naive_mode_agrees_when_nothing_is_unknown() {
    let spec = builtin("univ-mini").unwrap();
    let g = generate(&spec, 3, 2).unwrap();
    let naive = naive_unknown_as_false(&g.acl, &MinerConfig::default()).unwrap();
    assert_eq!(meaning(&g.cm, &g.om, &naive.policy.rules), g.acl.au);
}

#[test]
fn task_datasets_survive_csv() {
    let spec = builtin("univ-mini").unwrap();
    let g = generate(&spec, 2, 9).unwrap();
    let om = inject_unknowns(&g.om, &spec, 3.0, 9).unwrap();
    let acl = AclPolicy::new(g.cm, om, g.acl.au);
    let out = mine(&acl, &MinerConfig::default()).unwrap();
    for t in &out.tasks {
        let mut buf = Vec::new();
        write_dataset_csv(&t.dataset, &mut buf).unwrap();
        let back = read_dataset_csv(buf.as_slice()).unwrap();
        assert_eq!(back.features, t.dataset.features);
        assert_eq!(back.rows.iter().map(|r| (&r.values, r.label)).collect::<Vec<_>>(),
                   t.dataset.rows.iter().map(|r| (&r.values, r.label)).collect::<Vec<_>>());
    }
}
