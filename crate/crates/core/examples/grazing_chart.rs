//! Zero line of the grazing set for the quartic F4 in three dimensions.
//!
//! ```text
//! cargo run -p diffract --example grazing_chart
//! ```

use diffract::grazing::{build_grazing_chart, cozero_mismatches};
use diffract::obstacle::{Family, GraphObstacle, QuarticVariant};
use nalgebra::DVector;

fn main() -> diffract::Result<()> {
    let ob = GraphObstacle::new(Family::Quartic3D { variant: QuarticVariant::F4, remainder: None }, 3, 0.6)?;
    let chart = build_grazing_chart(&ob, &DVector::from_vec(vec![1.0, 0.0]))?;
    if let Some(line) = &chart.line {
        println!("zero line x3 = c x2 with c = {:.10}", line.x3_per_x2());
    }
    println!("regularity {:?}, H_p zeta at the base point {:.6}", chart.regularity, chart.hp_zeta_at_base());
    let (bad, total) = cozero_mismatches(&ob, &chart, 41, 1e-12)?;
    println!("sign mismatches against the incidence: {bad} of {total}");
    Ok(())
}
