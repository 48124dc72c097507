//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rebac_miner::datagen::{builtin, generate, inject_unknowns, FieldClass, UnknownStats, BUILTIN_SPECS};
use rebac_miner::features::{build_dataset, ExtractionLimits, FeatureTable};
use rebac_miner::io::{read_acl, read_policy};
use rebac_miner::learner::{learn_formula, LearnerConfig};
use rebac_miner::metrics::{evaluate, jaccard, SimilarityReport};
use rebac_miner::miner::{mine, mine_observed, IdStrategy, MinerConfig, Transformation};
use rebac_miner::model::{meaning, AclPolicy, Sra};
use rebac_miner::tree::{build_tree, DecisionTree};
use rebac_miner::tvl::{
    check_monotonic, eval_dnf, fv_leq, info_leq, kleene_and, kleene_not, kleene_or, Conjunction, DnfFormula,
    Feature, FeatureId, FeatureVector, LabeledDataset, Literal, Polarity, Row, TruthValue,
};

use TruthValue::{F, T, U};

type Outcome = Result<String, String>;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn running_acl() -> AclPolicy {
    let fx = fixtures();
    read_acl(
        &fx.join("running_classmodel.json"),
        &fx.join("running_objectmodel.json"),
        &fx.join("running_au.json"),
    )
    .expect("fixture loads")
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn c1_running_example() -> Outcome {
    let acl = running_acl();
    let reference = read_policy(&fixtures().join("running_reference.json"), &acl.cm).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = mine(&acl, &MinerConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(out.policy.rules.len() == 2, format!("{} rules", out.policy.rules.len()))?;
    ensure(out.policy.sorted() == reference.sorted(), format!("mined\n{}", out.policy))?;
    let report = SimilarityReport::compute(&acl.cm, &acl.om, &out.policy.rules, &reference.rules);
    ensure(report.semantic == 1.0 && report.syntactic == 1.0, format!("{report:?}"))?;
    ensure(report.per_rule_best_match.iter().all(|m| m.score == 1.0), "a rule scored below 1")?;
    let want: BTreeSet<BTreeSet<String>> = [
        BTreeSet::from(["resource.type = Handbook".to_string()]),
        BTreeSet::from(["subject.dept = resource.dept".to_string()]),
    ]
    .into();
    ensure(out.tasks.len() == 1 && out.tasks[0].formula_labels() == want, "learned formula differs")?;
    ensure(elapsed.as_secs_f64() < 1.0, format!("took {elapsed:?}"))?;
    Ok(format!("2 rules, similarity 1.0/1.0, formula {}, {elapsed:.2?}", out.tasks[0].formula_text()))
}

fn c2_dataset_cells() -> Outcome {
    let acl = running_acl();
    let table = FeatureTable::build(&acl.cm, &acl.om, "Student", "Document", &ExtractionLimits::default())
        .map_err(|e| e.to_string())?;
    let d = build_dataset(&acl, &table, "read");
    let columns = ["subject.dept = resource.dept", "subject.dept = CS", "resource.dept = CS", "resource.type = Handbook"];
    let expected = [
        ("CS-student-1", "CS-doc-1", "UTUT", T),
        ("CS-student-1", "CS-doc-2", "TTTU", T),
        ("CS-student-1", "CS-doc-3", "UTUU", F),
        ("EE-student-1", "CS-doc-1", "UUUT", T),
        ("EE-student-1", "CS-doc-2", "UUTU", F),
        ("EE-student-1", "CS-doc-3", "UUUU", F),
    ];
    let labels: Vec<&str> = d.features.iter().map(|f| f.label.as_str()).collect();
    ensure(labels == columns, format!("columns {labels:?}"))?;
    ensure(d.rows.len() == 6, format!("{} rows", d.rows.len()))?;
    let mut cells = 0;
    for (row, (s, r, v, l)) in d.rows.iter().zip(expected) {
        ensure(row.provenance == Some((s.into(), r.into())), format!("row order at ({s}, {r})"))?;
        for (got, want) in row.values.0.iter().zip(v.chars()) {
            ensure(got.as_char() == want, format!("({s}, {r}): {} vs {v}", row.values))?;
            cells += 1;
        }
        ensure(row.label == l, format!("({s}, {r}) label {:?}", row.label))?;
    }
    Ok(format!("{cells} cells and 6 labels match"))
}

fn c3_tree() -> Outcome {
    let acl = running_acl();
    let table = FeatureTable::build(&acl.cm, &acl.om, "Student", "Document", &ExtractionLimits::default())
        .map_err(|e| e.to_string())?;
    let d = build_dataset(&acl, &table, "read");
    ensure(d.features.iter().all(|f| !f.label.contains(".id")), "id features present")?;
    let tree = build_tree(&d, &BTreeSet::new());
    let label = |t: &DecisionTree| match t {
        DecisionTree::Internal { feature, .. } => Some(d.label(*feature).to_string()),
        DecisionTree::Leaf(_) => None,
    };
    ensure(label(&tree).as_deref() == Some("resource.type = Handbook"), format!("root {:?}", label(&tree)))?;
    ensure(tree.child(T) == Some(&DecisionTree::Leaf(T)), "T branch is not Leaf(T)")?;
    let u = tree.child(U).ok_or("no U branch")?;
    ensure(label(u).as_deref() == Some("subject.dept = resource.dept"), format!("U branch {:?}", label(u)))?;
    Ok("root res.type = Handbook, T -> Leaf(T), U -> split on sub.dept = res.dept".into())
}

fn c4_naive() -> Outcome {
    let fx = fixtures();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("naive.json");
    let status = Command::new(env!("CARGO_BIN_EXE_rebac-miner"))
        .arg("mine")
        .arg("--classmodel")
        .arg(fx.join("running_classmodel.json"))
        .arg("--objectmodel")
        .arg(fx.join("running_objectmodel.json"))
        .arg("--au")
        .arg(fx.join("running_au.json"))
        .arg("--out")
        .arg(&out)
        .arg("--naive-unknown-as-false")
        .output()
        .map_err(|e| e.to_string())?;
    let code = status.status.code();
    ensure(code == Some(3), format!("exit code {code:?}"))?;
    let acl = running_acl();
    let policy = read_policy(&out, &acl.cm).map_err(|e| e.to_string())?;
    let granted = meaning(&acl.cm, &acl.om, &policy.rules);
    let request = Sra::new("CS-student-1", "CS-doc-2", "read");
    ensure(!granted.contains(&request), "naive policy grants the request")?;
    Ok(format!("exit 3, {request} denied"))
}

struct RoundTrip {
    runs: usize,
    semantic_failures: Vec<String>,
    syntactic: BTreeMap<String, f64>,
    reverse: BTreeMap<String, f64>,
    wsc_increases: Vec<String>,
    secs: f64,
}

fn round_trips() -> RoundTrip {
    let start = Instant::now();
    let mut rt = RoundTrip {
        runs: 0,
        semantic_failures: vec![],
        syntactic: BTreeMap::new(),
        reverse: BTreeMap::new(),
        wsc_increases: vec![],
        secs: 0.0,
    };
    for name in BUILTIN_SPECS {
        let spec = builtin(name).unwrap();
        for n in [3, 5] {
            for s in 0..=3 {
                for allow_negation in [true, false] {
                    let key = format!("{name} N={n} s={s} {}", if allow_negation { "neg" } else { "no-neg" });
                    let (mut syn, mut rev) = (0.0, 0.0);
                    for seed in 0..5 {
                        rt.runs += 1;
                        let tag = format!("{key} seed={seed}");
                        let g = generate(&spec, n, seed).unwrap();
                        let om = inject_unknowns(&g.om, &spec, s as f64, seed).unwrap();
                        let acl = AclPolicy::new(g.cm.clone(), om.clone(), g.acl.au.clone());
                        let cfg = MinerConfig { allow_negation, seed, ..Default::default() };
                        let out = match mine(&acl, &cfg) {
                            Ok(o) => o,
                            Err(e) => {
                                rt.semantic_failures.push(format!("{tag}: {e}"));
                                continue;
                            }
                        };
                        let sem = jaccard(&meaning(&g.cm, &om, &out.policy.rules), &g.acl.au);
                        if sem != 1.0 {
                            rt.semantic_failures.push(format!("{tag}: {sem}"));
                        }
                        let report = evaluate(&g.cm, &g.om, &out.policy, &g.ground_truth);
                        syn += report.syntactic;
                        rev += report.syntactic_mined_to_reference;
                        if out.wsc_trace.windows(2).any(|w| w[1] > w[0]) {
                            rt.wsc_increases.push(format!("{tag}: {:?}", out.wsc_trace));
                        }
                    }
                    rt.syntactic.insert(key.clone(), syn / 5.0);
                    rt.reverse.insert(key, rev / 5.0);
                }
            }
        }
    }
    rt.secs = start.elapsed().as_secs_f64();
    rt
}

fn c5_consistency(rt: &RoundTrip) -> Outcome {
    ensure(rt.runs == 160, format!("{} runs", rt.runs))?;
    ensure(rt.semantic_failures.is_empty(), format!("semantic < 1: {:?}", rt.semantic_failures))?;
    ensure(rt.secs < 300.0, format!("took {:.1}s", rt.secs))?;
    let below_gate: Vec<_> = rt.syntactic.iter().filter(|(_, &v)| v < 0.8).collect();
    ensure(below_gate.is_empty(), format!("syntactic below 0.8: {below_gate:?}"))?;
    let (min_key, min) = rt.syntactic.iter().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let below_target = rt.syntactic.values().filter(|&&v| v < 0.9).count();
    let rev_min = rt.reverse.values().copied().fold(f64::INFINITY, f64::min);
    Ok(format!(
        "160 runs semantic 1.0, {:.1}s; syntactic per configuration min {min:.3} ({min_key}), {below_target}/32 below 0.9; mined-to-reference min {rev_min:.3}",
        rt.secs
    ))
}

fn tv() -> impl Strategy<Value = TruthValue> {
    prop_oneof![Just(T), Just(F), Just(U)]
}

fn c6_kleene() -> Outcome {
    let not = [(T, F), (F, T), (U, U)];
    let and = [
        (T, T, T), (T, F, F), (T, U, U),
        (F, T, F), (F, F, F), (F, U, F),
        (U, T, U), (U, F, F), (U, U, U),
    ];
    let or = [
        (T, T, T), (T, F, T), (T, U, T),
        (F, T, T), (F, F, F), (F, U, U),
        (U, T, T), (U, F, U), (U, U, U),
    ];
    for (a, r) in not {
        ensure(kleene_not(a) == r, format!("not {a:?}"))?;
    }
    for (a, b, r) in and {
        ensure(kleene_and(a, b) == r, format!("{a:?} and {b:?}"))?;
    }
    for (a, b, r) in or {
        ensure(kleene_or(a, b) == r, format!("{a:?} or {b:?}"))?;
    }
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(tv(), tv()), |(a, b)| {
            prop_assert_eq!(kleene_not(kleene_and(a, b)), kleene_or(kleene_not(a), kleene_not(b)));
            prop_assert_eq!(kleene_not(kleene_or(a, b)), kleene_and(kleene_not(a), kleene_not(b)));
            Ok(())
        })
        .map_err(|e| format!("De Morgan: {e}"))?;
    let n = 5;
    let lit = (0..n, any::<bool>()).prop_map(|(f, pos)| if pos { Literal::pos(FeatureId(f)) } else { Literal::neg(FeatureId(f)) });
    let dnf = prop::collection::vec(prop::collection::vec(lit, 0..=4).prop_map(Conjunction::from_literals), 0..=4)
        .prop_map(DnfFormula::from_conjunctions);
    let cells = prop::collection::vec((tv(), any::<bool>()), n);
    let mut runner = TestRunner::new(Config { cases: 10_000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(dnf, cells), |(d, cells)| {
            let hi = FeatureVector(cells.iter().map(|c| c.0).collect());
            let lo = FeatureVector(cells.iter().map(|&(t, forget)| if forget { U } else { t }).collect());
            prop_assert!(fv_leq(&lo, &hi).unwrap());
            prop_assert!(info_leq(eval_dnf(&d, &lo), eval_dnf(&d, &hi)));
            Ok(())
        })
        .map_err(|e| format!("monotonicity: {e}"))?;
    Ok("3 + 9 + 9 table cells; De Morgan and monotonicity hold on 10000 cases each".into())
}

/// Independent Kleene evaluation of a DNF, by min/max over {F < U < T}.
fn oracle_eval(d: &DnfFormula, v: &FeatureVector) -> TruthValue {
    let rank = |t: TruthValue| match t {
        F => 0,
        U => 1,
        T => 2,
    };
    let unrank = [F, U, T];
    let best = d
        .iter()
        .map(|c| {
            c.literals()
                .map(|l| {
                    let x = v.0[l.feature.0];
                    match l.polarity {
                        Polarity::Positive => rank(x),
                        Polarity::Negative => 2 - rank(x),
                        Polarity::IsUnknown => 2 * usize::from(x == U),
                    }
                })
                .min()
                .unwrap_or(2)
        })
        .max()
        .unwrap_or(0);
    unrank[best]
}

fn brute_force_monotonic(d: &LabeledDataset) -> bool {
    let below = |a: &FeatureVector, b: &FeatureVector| a.0.iter().zip(&b.0).all(|(x, y)| x == y || *x == U);
    d.rows.iter().all(|r1| {
        d.rows.iter().all(|r2| !below(&r1.values, &r2.values) || r1.label == r2.label || r1.label == U)
    })
}

fn random_dataset(rng: &mut ChaCha8Rng) -> LabeledDataset {
    let tvs = [T, F, U];
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=30);
    let mut d = LabeledDataset::new((0..n).map(|i| Feature::new(format!("f{i}"), rng.random_range(1..=3))).collect());
    // Half the datasets are labelled by a hidden formula, the rest at random.
    let hidden = rng.random_bool(0.5).then(|| {
        DnfFormula::from_conjunctions((0..rng.random_range(0..=3)).map(|_| {
            Conjunction::from_literals((0..rng.random_range(1..=3)).map(|_| {
                let f = FeatureId(rng.random_range(0..n));
                if rng.random_bool(0.7) {
                    Literal::pos(f)
                } else {
                    Literal::neg(f)
                }
            }))
        }))
    });
    for _ in 0..m {
        let v = FeatureVector((0..n).map(|_| tvs[rng.random_range(0..3)]).collect());
        let label = match &hidden {
            Some(h) => oracle_eval(h, &v),
            None => tvs[rng.random_range(0..3)],
        };
        d.push(Row::new(v, label)).unwrap();
    }
    d
}

fn c7_learner() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut accepted, mut drawn, mut with_t) = (0, 0, 0);
    while accepted < 200 {
        drawn += 1;
        let d = random_dataset(&mut rng);
        let mono = brute_force_monotonic(&d);
        ensure(mono == check_monotonic(&d).is_none(), format!("monotonicity check disagrees on dataset {drawn}"))?;
        if !mono {
            continue;
        }
        accepted += 1;
        let res = learn_formula(&d, &LearnerConfig::default()).map_err(|e| format!("dataset {drawn}: {e}"))?;
        ensure(!res.formula.has_unknown_literal(), format!("dataset {drawn}: IsUnknown literal left"))?;
        for (i, r) in d.rows.iter().enumerate() {
            let got = oracle_eval(&res.formula, &r.values);
            ensure(got == eval_dnf(&res.formula, &r.values), format!("dataset {drawn} row {i}: evaluator disagrees"))?;
            ensure((got == T) == (r.label == T), format!("dataset {drawn} row {i}: {} label {:?} formula {got:?}", r.values, r.label))?;
        }
        with_t += usize::from(d.rows.iter().any(|r| r.label == T));
    }
    Ok(format!("200 monotonic datasets ({with_t} with T rows, {drawn} drawn): valid and covering"))
}

fn c8_meaning_preserved() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut broken = Vec::new();
    for run in 0..100 {
        let name = BUILTIN_SPECS[rng.random_range(0..BUILTIN_SPECS.len())];
        let spec = builtin(name).unwrap();
        let n = rng.random_range(2..=5);
        let s: f64 = rng.random_range(0.0..3.0);
        let seed = rng.random::<u64>();
        let g = generate(&spec, n, seed).map_err(|e| e.to_string())?;
        let om = inject_unknowns(&g.om, &spec, s, seed).map_err(|e| e.to_string())?;
        let acl = AclPolicy::new(g.cm.clone(), om, g.acl.au.clone());
        let cfg = MinerConfig {
            allow_negation: rng.random_bool(0.5),
            id_strategy: if rng.random_bool(0.5) { IdStrategy::RetryWithIdFeatures } else { IdStrategy::PerVectorIdConjunction },
            seed,
            ..Default::default()
        };
        let mut observer = |t: Transformation, rules: &[rebac_miner::model::Rule]| {
            *counts.entry(format!("{t:?}")).or_default() += 1;
            if meaning(&acl.cm, &acl.om, rules) != acl.au {
                broken.push(format!("run {run} ({name} N={n} s={s:.2}): {t:?}"));
            }
        };
        mine_observed(&acl, &cfg, &mut observer).map_err(|e| format!("run {run}: {e}"))?;
    }
    ensure(broken.is_empty(), format!("meaning changed: {broken:?}"))?;
    let total: usize = counts.values().sum();
    Ok(format!("100 policies, {total} transformations, meaning unchanged; {counts:?}"))
}

fn c9_injection() -> Outcome {
    let spec = builtin("org-chart").unwrap();
    let mut lines = Vec::new();
    for (s, lo, hi) in [(1.0, 0.015, 0.05), (2.0, 0.03, 0.10), (3.0, 0.045, 0.15)] {
        let (mut unknown, mut total, mut required) = (0, 0, 0);
        let (mut min, mut max) = (f64::INFINITY, 0.0_f64);
        for seed in 0..20 {
            let g = generate(&spec, 5, seed).map_err(|e| e.to_string())?;
            let stats = UnknownStats::of(&inject_unknowns(&g.om, &spec, s, seed).map_err(|e| e.to_string())?);
            unknown += stats.unknown();
            total += stats.total();
            required += stats.unknown_in(&spec, FieldClass::Required);
            min = min.min(stats.fraction());
            max = max.max(stats.fraction());
        }
        let frac = unknown as f64 / total as f64;
        ensure((lo..=hi).contains(&frac), format!("s={s}: {:.2}% outside [{}%, {}%]", 100.0 * frac, 100.0 * lo, 100.0 * hi))?;
        ensure(required == 0, format!("s={s}: {required} unknown required fields"))?;
        lines.push(format!("s={s} {:.2}% (seeds {:.1}..{:.1}%)", 100.0 * frac, 100.0 * min, 100.0 * max));
    }
    Ok(format!("{}; required fields never unknown", lines.join(", ")))
}

fn c10_wsc(rt: &RoundTrip) -> Outcome {
    let acl = running_acl();
    let p = read_policy(&fixtures().join("wsc_rules.json"), &acl.cm).map_err(|e| e.to_string())?;
    // Path lengths plus constants plus actions, one more per negation.
    let expected = [1 + 1 + 1, 1 + 1 + 1, (1 + 2) + (1 + 1 + 1) + (1 + 1) + 2, (1 + 1) + (1 + 1) + 1, (1 + 1) + (1 + 1 + 1) + 3];
    let got: Vec<usize> = p.rules.iter().map(|r| r.wsc()).collect();
    ensure(got == expected, format!("{got:?} vs {expected:?}"))?;
    ensure(rt.wsc_increases.is_empty(), format!("WSC increased: {:?}", rt.wsc_increases))?;
    Ok(format!("fixture rules {got:?}; non-increasing in all {} round trips", rt.runs))
}

fn main() {
    let rt = round_trips();
    let results: Vec<(&str, Outcome)> = vec![
        ("running example exactness", c1_running_example()),
        ("table cell fidelity", c2_dataset_cells()),
        ("tree fidelity", c3_tree()),
        ("naive baseline incorrectness", c4_naive()),
        ("consistency on synthetic policies", c5_consistency(&rt)),
        ("three-valued logic laws", c6_kleene()),
        ("learner oracle equivalence", c7_learner()),
        ("simplification preserves meaning", c8_meaning_preserved()),
        ("unknown injection statistics", c9_injection()),
        ("weighted structural complexity", c10_wsc(&rt)),
    ];
    let mut failed = 0;
    for (i, (name, r)) in results.iter().enumerate() {
        match r {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
