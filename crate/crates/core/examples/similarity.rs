//! Syntactic and semantic similarity between two small policies.
//!
//! cargo run --example similarity

use std::path::Path;

use rebac_miner::io::read_models;
use rebac_miner::metrics::{syn_rule, SimilarityReport};
use rebac_miner::model::{Atom, AtomicCondition, Path as FieldPath, Rule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let (cm, om) = read_models(&fx.join("running_classmodel.json"), &fx.join("running_objectmodel.json"))?;
    let handbook = Rule::new("Student", "Document", ["read"])
        .with_resource(AtomicCondition::eq(FieldPath::parse("type"), Atom::obj("Handbook")));
    let cs_only = Rule::new("Student", "Document", ["read", "write"])
        .with_subject(AtomicCondition::eq(FieldPath::parse("dept"), Atom::obj("CS")));
    println!("syn(handbook, cs_only) = {:.3}", syn_rule(&handbook, &cs_only));
    let report = SimilarityReport::compute(&cm, &om, &[cs_only], &[handbook]);
    print!("{}", report.table());
    Ok(())
}
