//! Solves the semilinear profile system on the parabola by Picard iteration.
//!
//! ```text
//! cargo run --release -p diffract --example picard_profiles
//! ```

use diffract::energy::energy_diagnostic;
use diffract::obstacle::{Family, GraphObstacle};
use diffract::picard::{picard_iterate, PicardSettings};
use diffract::rays::{BumpData, RayGeometry};
use diffract::source::SourceSpec;

fn main() -> diffract::Result<()> {
    let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0)?;
    let geo = RayGeometry::new(ob, 1.0, 1.0, 1.2, 121, 60)?;
    let data = BumpData { center: [1.0, -1.3], radii: [0.35, 0.3], amplitude: 1.0, mode: 1, phase: 0.0 };
    let settings = PicardSettings { dlabel: 0.05, ds: 0.02, mean_h: 0.1, max_iter: 8, ..PicardSettings::default() };
    let res = picard_iterate(&geo, data, SourceSpec::SinDt { kappa: 0.1, psi: 0.5 }, settings)?;
    for step in &res.trace {
        println!("iteration {}: ratio {:?}", step.iteration, step.ratio);
    }
    println!("converged {}, boundary defect {:.2e}", res.converged, res.boundary_defect);
    let energy = energy_diagnostic(&res, &geo, 8);
    println!("energy constant {:.4}", energy.constant);
    Ok(())
}
