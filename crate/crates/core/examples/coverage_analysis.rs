//! Frequency and coverage of a small wizard-message corpus against the
//! reference inventory.

use std::path::PathBuf;

use woz::analytics::{coverage_with, frequency, Corpus, CoverageClass, CoverageOptions};
use woz::environment::EnvironmentMap;
use woz::inventory::Registry;

const CORPUS: &str = "\
12\tdone
7\tsent
3\tmove forward three feet
move forward 7 feet
2\tturn left 45 degrees
the crate on my left?
I'm in the kitchen.
rotate left 200 feet
Hmmm...
hmmm..
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let env = EnvironmentMap::load_path(fixtures.join("reference_environment.json"))?;
    let registry = Registry::load_path(fixtures.join("reference_inventory.json"), Some(&env))?;
    let corpus = Corpus::parse(CORPUS, "inline")?;

    let freq = frequency(&corpus)?;
    println!(
        "{} messages, {} distinct; {} repeated messages cover {:.1}%",
        freq.total,
        freq.unique,
        freq.repeated_unique,
        freq.repeated_fraction * 100.0
    );
    println!("singletons to consider as new buttons: {:?}", freq.singletons);

    let options = CoverageOptions { entities: Some(&env), ..Default::default() };
    let report = coverage_with(&corpus, &registry, options);
    for m in &report.messages {
        let how = match (&m.button_id, m.similarity) {
            (Some(id), Some(j)) => format!("{id} (jaccard {j:.2})"),
            (Some(id), None) => id.clone(),
            _ => "-".into(),
        };
        println!("  {:<8} x{:<3} {:<28} {how}", m.class.as_str(), m.count, m.text);
    }
    println!(
        "exact {:.1}%  partial {:.1}%  none {:.1}%",
        report.percent(CoverageClass::Exact),
        report.percent(CoverageClass::Partial),
        report.percent(CoverageClass::None)
    );
    Ok(())
}
