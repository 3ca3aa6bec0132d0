//! Classifies boundary points of an order-4 obstacle for a plane wave and
//! prints the glancing order at the grazing point.
//!
//! ```text
//! cargo run -p diffract --example classify_boundary
//! ```

use diffract::flow::{classify_boundary_point, glancing_order};
use diffract::obstacle::{validate_strict_convexity, Family, GraphObstacle};
use nalgebra::DVector;

fn main() -> diffract::Result<()> {
    let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![0.0, 0.0, 1.0] }, 2, 1.0)?;
    let theta = DVector::from_element(1, 1.0);
    let convex = validate_strict_convexity(&ob, 2000, 1)?;
    println!("strictly convex on {} samples: {} (worst gap {:.2e})", convex.samples, convex.pass, convex.worst_gap);
    for x2 in [-0.6, -0.2, 0.0, 0.2, 0.6] {
        let class = classify_boundary_point(&ob, &theta, &DVector::from_element(1, x2))?;
        println!("x2 = {x2:5.2}: {class:?}");
    }
    let rep = glancing_order(&ob, &theta, &DVector::zeros(1), 12)?;
    println!("grazing point: {:?}, order {:?}, {:?}", rep.class, rep.order, rep.kind);
    Ok(())
}
