//! Generate synthetic policies, degrade them with unknowns, mine them back
//! and compare with the ground truth.
//!
//! cargo run --release --example synthetic_round_trip -- [N] [seeds]

use std::time::Instant;

use rebac_miner::datagen::{builtin, generate, inject_unknowns, unknown_fraction, BUILTIN_SPECS};
use rebac_miner::metrics::{evaluate, jaccard};
use rebac_miner::miner::{mine, MinerConfig};
use rebac_miner::model::{meaning, AclPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(3), |a| a.parse())?;
    let seeds: u64 = args.next().map_or(Ok(3), |a| a.parse())?;
    println!("{:<10} {:>2} {:>4} {:>9} {:>8} {:>8} {:>6} {:>8}", "spec", "s", "neg", "unknown%", "syn", "sem", "rules", "ms");
    for name in BUILTIN_SPECS {
        let spec = builtin(name).expect("built-in");
        for s in 0..=3 {
            for allow_negation in [false, true] {
                let (mut syn, mut sem, mut unk, mut rules) = (0.0, 0.0, 0.0, 0);
                let start = Instant::now();
                for seed in 0..seeds {
                    let g = generate(&spec, n, seed)?;
                    let om = inject_unknowns(&g.om, &spec, s as f64, seed)?;
                    unk += unknown_fraction(&om);
                    let acl = AclPolicy::new(g.cm.clone(), om.clone(), g.acl.au.clone());
                    let cfg = MinerConfig { allow_negation, seed, ..Default::default() };
                    let mined = mine(&acl, &cfg)?.policy;
                    // Rules are compared on the fully known model; what they
                    // grant is judged on the model the miner saw.
                    syn += evaluate(&g.cm, &g.om, &mined, &g.ground_truth).syntactic;
                    sem += jaccard(&meaning(&g.cm, &om, &mined.rules), &g.acl.au);
                    rules += mined.rules.len();
                }
                let k = seeds as f64;
                println!(
                    "{:<10} {:>2} {:>4} {:>8.1}% {:>8.3} {:>8.3} {:>6.1} {:>8}",
                    name,
                    s,
                    if allow_negation { "yes" } else { "no" },
                    100.0 * unk / k,
                    syn / k,
                    sem / k,
                    rules as f64 / k,
                    start.elapsed().as_millis()
                );
            }
        }
    }
    Ok(())
}
