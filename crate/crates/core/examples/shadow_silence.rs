//! Finite-difference reference solutions on the flattened exterior and the
//! oscillation energy they carry in a shadow window and a lit window.
//!
//! ```text
//! cargo run --release -p diffract --example shadow_silence
//! ```

use diffract::obstacle::{Family, GraphObstacle};
use diffract::rays::{BumpData, LinearOptics, RayGeometry};
use diffract::reference::{reference_silence, ReferenceSettings, Windows};
use diffract::source::SourceSpec;
use diffract::synthesis::{CorrectorSettings, LinearModel};

fn main() -> diffract::Result<()> {
    let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0)?;
    let geo = RayGeometry::new(ob, 1.0, 1.0, 1.2, 121, 60)?;
    let data = BumpData { center: [1.0, -1.3], radii: [0.35, 0.3], amplitude: 1.0, mode: 1, phase: 0.0 };
    let start = LinearModel {
        optics: LinearOptics { geo: &geo, data, n_modes: 1, mu: 0.0 },
        source: SourceSpec::Zero,
        corrector: CorrectorSettings::default(),
    };
    let rep = reference_silence(&start, &geo, &[0.1, 0.05], &ReferenceSettings::default(), &Windows::default())?;
    for row in &rep.rows {
        println!("eps {}: shadow {:.3e}, illuminated {:.4}", row.eps, row.shadow, row.illuminated);
    }
    println!("shadow decreasing {}, illuminated spread {:.3}", rep.shadow_decreasing, rep.illuminated_spread);
    Ok(())
}
