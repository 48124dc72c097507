//! Kleene truth tables and the information ordering.
//!
//! cargo run --example kleene_logic

use rebac_miner::tvl::{info_leq, kleene_and, kleene_not, kleene_or, TruthValue};

fn main() {
    let all = TruthValue::ALL;
    println!("not:");
    for a in all {
        println!("  ¬{} = {}", a.as_char(), kleene_not(a).as_char());
    }
    for (name, op) in [("and", kleene_and as fn(_, _) -> _), ("or", kleene_or)] {
        println!("{name}:    T F U");
        for a in all {
            let cells: Vec<String> = all.iter().map(|&b| op(a, b).as_char().to_string()).collect();
            println!("     {}   {}", a.as_char(), cells.join(" "));
        }
    }
    // Learning more about an input can only sharpen an output, never flip it.
    let pairs: Vec<String> = all
        .iter()
        .flat_map(|&a| all.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| a != b && info_leq(a, b))
        .map(|(a, b)| format!("{} ≤ {}", a.as_char(), b.as_char()))
        .collect();
    println!("information order: {}", pairs.join(", "));
}
