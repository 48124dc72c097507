//! Per-field unknown rates produced by the degradation step.
//!
//! cargo run --example unknown_injection [-- spec N]

use rebac_miner::datagen::{builtin, generate, inject_unknowns, FieldClass, UnknownStats};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "org-chart".into());
    let n: usize = args.next().map_or(Ok(5), |a| a.parse())?;
    let spec = builtin(&name).ok_or("unknown spec")?;
    let g = generate(&spec, n, 1)?;
    for s in 0..=3 {
        let om = inject_unknowns(&g.om, &spec, s as f64, 1)?;
        let stats = UnknownStats::of(&om);
        println!(
            "s={s}: {:.1}% unknown, required fields {} unknown",
            100.0 * stats.fraction(),
            stats.unknown_in(&spec, FieldClass::Required)
        );
        for ((class, field), (total, unknown)) in &stats.per_field {
            println!("  {class}.{field}: {unknown}/{total}");
        }
    }
    Ok(())
}
