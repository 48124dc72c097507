//! Mine the student/document running example and compare with its reference.
//!
//! cargo run --example running_example

use std::path::Path;

use rebac_miner::io::{read_acl, read_policy};
use rebac_miner::metrics::evaluate;
use rebac_miner::miner::{mine, MinerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let acl = read_acl(
        &fx.join("running_classmodel.json"),
        &fx.join("running_objectmodel.json"),
        &fx.join("running_au.json"),
    )?;
    let out = mine(&acl, &MinerConfig::default())?;
    for t in &out.tasks {
        println!("learned for ({}, {}, {}): {}", t.subject_type, t.resource_type, t.action, t.formula_text());
    }
    println!("WSC per iteration: {:?}", out.wsc_trace);
    print!("{}", out.policy);
    let reference = read_policy(&fx.join("running_reference.json"), &acl.cm)?;
    print!("{}", evaluate(&acl.cm, &acl.om, &out.policy, &reference).table());
    Ok(())
}
