//! Learn a DNF formula from a small CSV dataset with unknown cells.
//!
//! cargo run --example learn_formula

use rebac_miner::io::read_dataset_csv;
use rebac_miner::learner::{learn_formula, LearnerConfig};
use rebac_miner::tvl::{covers, eval_dnf, valid};

const DATA: &str = "\
owner [2],public [1],archived [1],label
T,F,F,T
U,T,F,T
F,F,T,F
F,U,F,U
U,F,U,F
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = read_dataset_csv(DATA.as_bytes())?;
    let res = learn_formula(&data, &LearnerConfig::default())?;
    println!("formula: {}", res.formula.display(&data));
    println!("iterations {}, fallback {}", res.iterations, res.used_fallback);
    for r in &data.rows {
        println!("  {} label {} formula {}", r.values, r.label.as_char(), eval_dnf(&res.formula, &r.values).as_char());
    }
    assert!(valid(&res.formula, &data) && covers(&res.formula, &data));
    Ok(())
}
