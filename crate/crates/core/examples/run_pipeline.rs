//! Runs every stage of the bundled parabola scenario into a temporary
//! directory and prints the verdict lines.
//!
//! ```text
//! cargo run --release -p diffract --example run_pipeline
//! ```

use diffract::pipeline::Pipeline;
use diffract::scenario::Scenario;

fn main() -> diffract::Result<()> {
    let scenario = Scenario::parse(include_str!("../scenarios/parabola.toml"))?;
    let out = std::env::temp_dir().join("diffract-example-parabola");
    let pipeline = Pipeline::new(scenario, Some(out.clone()));
    for outcome in pipeline.run_all()? {
        for v in &outcome.verdicts {
            println!("{v}");
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}
