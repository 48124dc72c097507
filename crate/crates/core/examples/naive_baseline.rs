//! Treating unknown as false loses an authorization the real miner keeps.
//!
//! cargo run --example naive_baseline

use std::path::Path;

use rebac_miner::io::read_acl;
use rebac_miner::miner::{consistency_gap, mine, naive_unknown_as_false, MinerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let acl = read_acl(
        &fx.join("running_classmodel.json"),
        &fx.join("running_objectmodel.json"),
        &fx.join("running_au.json"),
    )?;
    let cfg = MinerConfig::default();
    for (name, policy) in [("3-valued", mine(&acl, &cfg)?.policy), ("naive", naive_unknown_as_false(&acl, &cfg)?.policy)] {
        let (missing, extra) = consistency_gap(&acl, &policy.rules);
        println!("{name}: {} rules, {} missing, {} extra", policy.rules.len(), missing.len(), extra.len());
        print!("{policy}");
        for m in &missing {
            println!("  denied: {m}");
        }
    }
    Ok(())
}
