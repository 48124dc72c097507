//! Command-line front end: `generate`, `mine`, `eval` and `learn-formula`.
//!
//! Every flag can also be set through an environment variable named
//! `REBAC_MINER_` plus the flag in upper snake case.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use crate::datagen::{builtin, generate, inject_unknowns, BUILTIN_SPECS};
use crate::error::{Error, Result};
use crate::features::ExtractionLimits;
use crate::io::{read_acl, read_dataset_csv, read_models, read_policy, write_au, write_dataset_csv, write_json, write_policy, RunManifest};
use crate::learner::{learn_formula, LearnerConfig};
use crate::metrics::evaluate;
use crate::miner::{consistency_gap, inconsistency, mine, naive_unknown_as_false, IdStrategy, MinerConfig};
use crate::tree::build_tree;

#[derive(Debug, Parser)]
#[command(name = "rebac-miner", version, about = "Mine ReBAC policies from ACLs over object models with unknown values")]
pub struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic class model, object model, ground-truth policy and authorizations.
    Generate(GenerateArgs),
    /// Mine a policy from a class model, an object model and authorizations.
    Mine(MineArgs),
    /// Compare a mined policy with a reference policy.
    Eval(EvalArgs),
    /// Learn a formula from a CSV dataset of T/F/U feature values.
    LearnFormula(LearnArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Built-in generator: univ-mini or org-chart.
    #[arg(long, env = "REBAC_MINER_SPEC")]
    pub spec: String,
    /// Size parameter.
    #[arg(short = 'n', long = "size", env = "REBAC_MINER_SIZE", default_value_t = 5)]
    pub n: usize,
    /// Unknown-value scaling factor.
    #[arg(short = 's', long = "scale", env = "REBAC_MINER_SCALE", default_value_t = 0.0)]
    pub s: f64,
    #[arg(long, env = "REBAC_MINER_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(short, long, env = "REBAC_MINER_OUT", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IdStrategyArg {
    Retry,
    PerVector,
}

impl From<IdStrategyArg> for IdStrategy {
    fn from(a: IdStrategyArg) -> Self {
        match a {
            IdStrategyArg::Retry => IdStrategy::RetryWithIdFeatures,
            IdStrategyArg::PerVector => IdStrategy::PerVectorIdConjunction,
        }
    }
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long, env = "REBAC_MINER_CLASSMODEL")]
    pub classmodel: PathBuf,
    #[arg(long, env = "REBAC_MINER_OBJECTMODEL")]
    pub objectmodel: PathBuf,
    #[arg(long, env = "REBAC_MINER_AU")]
    pub au: PathBuf,
    /// Where to write the mined policy.
    #[arg(short, long, env = "REBAC_MINER_OUT", default_value = "policy.json")]
    pub out: PathBuf,
    /// Run manifest path; defaults to the output path with `.manifest.json`.
    #[arg(long, env = "REBAC_MINER_MANIFEST")]
    pub manifest: Option<PathBuf>,
    /// Remove negation from the mined rules.
    #[arg(long, env = "REBAC_MINER_NO_NEGATION")]
    pub no_negation: bool,
    #[arg(long, value_enum, env = "REBAC_MINER_ID_STRATEGY", default_value = "retry")]
    pub id_strategy: IdStrategyArg,
    /// Learning rounds per formula.
    #[arg(long, env = "REBAC_MINER_MAX_ITER", default_value_t = 5)]
    pub max_iter: usize,
    #[arg(long, env = "REBAC_MINER_MAX_COND_LEN", default_value_t = 2)]
    pub max_cond_len: usize,
    #[arg(long, env = "REBAC_MINER_MAX_CONS_LEN", default_value_t = 3)]
    pub max_cons_len: usize,
    /// Treat unknown feature values as false and skip verification. The
    /// result is usually wrong; the command then exits with status 3.
    #[arg(long, env = "REBAC_MINER_NAIVE_UNKNOWN_AS_FALSE")]
    pub naive_unknown_as_false: bool,
    /// Write each learning task's dataset as CSV into this directory.
    #[arg(long, env = "REBAC_MINER_DUMP_DATASETS")]
    pub dump_datasets: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, env = "REBAC_MINER_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Recorded in the manifest; mining is deterministic.
    #[arg(long, env = "REBAC_MINER_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, env = "REBAC_MINER_MINED")]
    pub mined: PathBuf,
    #[arg(long, env = "REBAC_MINER_REFERENCE")]
    pub reference: PathBuf,
    #[arg(long, env = "REBAC_MINER_CLASSMODEL")]
    pub classmodel: PathBuf,
    #[arg(long, env = "REBAC_MINER_OBJECTMODEL")]
    pub objectmodel: PathBuf,
    /// Where to write the JSON report.
    #[arg(short, long, env = "REBAC_MINER_OUT", default_value = "report.json")]
    pub out: PathBuf,
    #[arg(long, env = "REBAC_MINER_MANIFEST")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// CSV with one column per feature and a final `label` column.
    #[arg(long, env = "REBAC_MINER_DATASET")]
    pub dataset: PathBuf,
    #[arg(long, env = "REBAC_MINER_MAX_ITER", default_value_t = 5)]
    pub max_iter: usize,
    /// Also print the first decision tree.
    #[arg(long, env = "REBAC_MINER_TREE")]
    pub tree: bool,
    #[arg(long, env = "REBAC_MINER_MANIFEST")]
    pub manifest: Option<PathBuf>,
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn command_line() -> Vec<String> {
    std::env::args().skip(1).collect()
}

/// Runs one command. Returns the process exit status for outcomes that are
/// not errors but still unsuccessful.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Mine(a) => cmd_mine(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::LearnFormula(a) => cmd_learn(&a),
    }
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<i32> {
    let spec = builtin(&a.spec)
        .ok_or_else(|| Error::Usage(format!("unknown spec {:?}; expected one of {}", a.spec, BUILTIN_SPECS.join(", "))))?;
    let start = Instant::now();
    let g = generate(&spec, a.n, a.seed)?;
    let om = inject_unknowns(&g.om, &spec, a.s, a.seed)?;
    let mut manifest = RunManifest::new(
        "generate",
        json!({ "args": command_line(), "spec": a.spec, "n": a.n, "s": a.s }),
        Some(a.seed),
    );
    manifest.timings.insert("generate".into(), start.elapsed().as_secs_f64());
    fs::create_dir_all(&a.out)?;
    let files = [
        ("classmodel.json", serde_json::to_value(&g.cm)?),
        ("objectmodel.json", serde_json::to_value(&om)?),
        ("groundtruth.json", serde_json::to_value(crate::io::PolicyDoc::from(&g.ground_truth))?),
    ];
    for (name, v) in files {
        let p = a.out.join(name);
        write_json(&p, &v)?;
        manifest.output(&p)?;
    }
    let au = a.out.join("au.json");
    write_au(&au, &g.acl.au)?;
    manifest.output(&au)?;
    write_json(&a.out.join("manifest.json"), &manifest)?;
    println!(
        "{}: {} objects, {} authorizations, {} ground-truth rules written to {}",
        a.spec,
        om.len(),
        g.acl.au.len(),
        g.ground_truth.rules.len(),
        a.out.display()
    );
    Ok(0)
}

pub fn miner_config(a: &MineArgs) -> MinerConfig {
    MinerConfig {
        allow_negation: !a.no_negation,
        id_strategy: a.id_strategy.into(),
        limits: ExtractionLimits {
            max_condition_path_len: a.max_cond_len,
            max_constraint_path_len: a.max_cons_len,
            include_id_conditions: false,
        },
        learner: LearnerConfig { max_iter: a.max_iter, ..Default::default() },
        seed: a.seed,
        jobs: a.jobs,
    }
}

pub fn cmd_mine(a: &MineArgs) -> Result<i32> {
    let cfg = miner_config(a);
    let mut manifest = RunManifest::new(
        "mine",
        json!({ "args": command_line(), "miner": cfg, "naive_unknown_as_false": a.naive_unknown_as_false }),
        Some(a.seed),
    );
    let start = Instant::now();
    let acl = read_acl(&a.classmodel, &a.objectmodel, &a.au)?;
    for p in [&a.classmodel, &a.objectmodel, &a.au] {
        manifest.input(p)?;
    }
    manifest.timings.insert("read".into(), start.elapsed().as_secs_f64());

    let start = Instant::now();
    let result = if a.naive_unknown_as_false { naive_unknown_as_false(&acl, &cfg) } else { mine(&acl, &cfg) };
    manifest.timings.insert("mine".into(), start.elapsed().as_secs_f64());
    let outcome = result?;
    for t in &outcome.tasks {
        info!("formula for ({}, {}, {}): {}", t.subject_type, t.resource_type, t.action, t.formula_text());
    }

    if let Some(dir) = &a.dump_datasets {
        fs::create_dir_all(dir)?;
        for t in &outcome.tasks {
            let p = dir.join(format!("{}-{}-{}.csv", t.subject_type, t.resource_type, t.action));
            write_dataset_csv(&t.dataset, fs::File::create(&p)?)?;
        }
    }

    let policy = outcome.policy.sorted();
    write_policy(&a.out, &policy)?;
    manifest.output(&a.out)?;
    write_json(&a.manifest.clone().unwrap_or_else(|| sibling_manifest(&a.out)), &manifest)?;
    print!("{policy}");
    println!("# {} rules, WSC {}", policy.rules.len(), policy.wsc());

    if a.naive_unknown_as_false {
        let (missing, extra) = consistency_gap(&acl, &policy.rules);
        if !missing.is_empty() || !extra.is_empty() {
            eprintln!("error: {}", inconsistency(&missing, &extra));
            return Ok(3);
        }
    }
    Ok(0)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let mut manifest = RunManifest::new("eval", json!({ "args": command_line() }), None);
    let start = Instant::now();
    let (cm, om) = read_models(&a.classmodel, &a.objectmodel)?;
    let mined = read_policy(&a.mined, &cm)?;
    let reference = read_policy(&a.reference, &cm)?;
    for p in [&a.mined, &a.reference, &a.classmodel, &a.objectmodel] {
        manifest.input(p)?;
    }
    let report = evaluate(&cm, &om, &mined, &reference);
    manifest.timings.insert("eval".into(), start.elapsed().as_secs_f64());
    write_json(&a.out, &report)?;
    manifest.output(&a.out)?;
    write_json(&a.manifest.clone().unwrap_or_else(|| sibling_manifest(&a.out)), &manifest)?;
    print!("{}", report.table());
    Ok(0)
}

pub fn cmd_learn(a: &LearnArgs) -> Result<i32> {
    let start = Instant::now();
    let data = read_dataset_csv(fs::File::open(&a.dataset).map_err(|e| Error::Usage(format!("cannot read {}: {e}", a.dataset.display())))?)?;
    if a.tree {
        print!("{}", build_tree(&data, &Default::default()).render(&data));
    }
    let cfg = LearnerConfig { max_iter: a.max_iter, ..Default::default() };
    let res = learn_formula(&data, &cfg)?;
    println!("{}", res.formula.display(&data));
    if let Some(path) = &a.manifest {
        let mut manifest = RunManifest::new("learn-formula", json!({ "args": command_line(), "learner": cfg }), None);
        manifest.input(&a.dataset)?;
        manifest.timings.insert("learn".into(), start.elapsed().as_secs_f64());
        write_json(path, &manifest)?;
    }
    Ok(0)
}
