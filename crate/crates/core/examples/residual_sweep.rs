//! Residual of the assembled linear field on the region away from the
//! shadow boundary, for a decreasing schedule of wavelengths.
//!
//! ```text
//! cargo run --release -p diffract --example residual_sweep
//! ```

use diffract::obstacle::{Family, GraphObstacle};
use diffract::rays::{BumpData, LinearOptics, RayGeometry};
use diffract::source::SourceSpec;
use diffract::synthesis::{residual_scan, CorrectorSettings, LinearModel, RegionSettings, ResidualSettings, SampleRegion};

fn main() -> diffract::Result<()> {
    let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0)?;
    let geo = RayGeometry::new(ob, 1.0, 1.0, 1.2, 121, 60)?;
    let data = BumpData { center: [1.0, -1.3], radii: [0.35, 0.3], amplitude: 1.0, mode: 1, phase: 0.0 };
    let model = LinearModel {
        optics: LinearOptics { geo: &geo, data, n_modes: 2, mu: 0.1 },
        source: SourceSpec::Zero,
        corrector: CorrectorSettings::default(),
    };
    let region = SampleRegion::build(
        &geo,
        &RegionSettings { bbox: [0.3, 2.6, -1.7, 1.2, -0.9, 0.9], candidates: 1500, seed: 7, label_margin: 0.2, wall: 5.0, h_max: 0.01 },
    )?;
    println!("{} sample points", region.points.len());
    for eps in [0.1, 0.05, 0.025] {
        let rep = residual_scan(&model, &SourceSpec::Zero, &region, eps, &ResidualSettings::default())?;
        println!(
            "eps {eps}: total {:.4} (illuminated {:.4}, overlap {:.4}, shadow {:.4}), eikonal {:.1e}",
            rep.total, rep.illuminated, rep.overlap, rep.shadow, rep.eikonal
        );
    }
    Ok(())
}
