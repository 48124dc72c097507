//! Build the running example's labeled dataset and its 3-valued decision tree.
//!
//! cargo run --example decision_tree [-- --dot]

use std::collections::BTreeSet;
use std::path::Path;

use rebac_miner::features::{build_dataset, ExtractionLimits, FeatureTable};
use rebac_miner::io::read_acl;
use rebac_miner::tree::build_tree;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let acl = read_acl(
        &fx.join("running_classmodel.json"),
        &fx.join("running_objectmodel.json"),
        &fx.join("running_au.json"),
    )?;
    let table = FeatureTable::build(&acl.cm, &acl.om, "Student", "Document", &ExtractionLimits::default())?;
    let data = build_dataset(&acl, &table, "read");
    for f in &data.features {
        println!("feature {} (cost {})", f.label, f.cost);
    }
    for r in &data.rows {
        println!("  {} {} -> {}", r.values, r.describe(), r.label.as_char());
    }
    let tree = build_tree(&data, &BTreeSet::new());
    if std::env::args().any(|a| a == "--dot") {
        print!("{}", tree.to_dot(&data));
    } else {
        print!("{}", tree.render(&data));
    }
    Ok(())
}
