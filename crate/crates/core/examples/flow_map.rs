//! Evaluates the closed-form reflected flow on the parabola and checks it
//! against integrated bicharacteristics.
//!
//! ```text
//! cargo run -p diffract --example flow_map
//! ```

use diffract::checks::flowmap_oracle;
use diffract::obstacle::{Family, GraphObstacle};
use diffract::phase::ReflectedFlow;
use nalgebra::DVector;

fn main() -> diffract::Result<()> {
    let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0)?;
    let flow = ReflectedFlow::new(ob, &DVector::from_element(1, 1.0))?;
    let foot = DVector::from_element(1, -0.5);
    let cov = flow.covector(&foot)?;
    println!("reflected covector at x2 = -0.5: xi1 = {:.6}, xibar = {:.6}", cov.xi1, cov.xibar[0]);
    for s in [0.0, 0.25, 0.5, 1.0] {
        let (z, t) = flow.zr_forward(s, &foot, 0.0)?;
        println!("s = {s:4.2}: x = ({:.6}, {:.6}), t = {t:.3}", z[0], z[1]);
    }
    let rep = flowmap_oracle(&flow, 1.2, 1000, 7)?;
    println!("closed form against integration over {} samples: max error {:.2e}", rep.samples, rep.max_error);
    Ok(())
}
