//! Reflected Jacobians: the oracle against difference quotients and the
//! power law of `j(0, x2)` near the grazing point for orders 2 and 4.
//!
//! ```text
//! cargo run -p diffract --example jacobian
//! ```

use diffract::checks::jacobian_oracle;
use diffract::diagnostics::jacobian_scaling_near_grazing;
use diffract::obstacle::{Family, GraphObstacle};
use diffract::phase::ReflectedFlow;
use nalgebra::DVector;

fn main() -> diffract::Result<()> {
    let theta = DVector::from_element(1, 1.0);
    for coeffs in [vec![1.0], vec![0.0, 0.0, 1.0]] {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: coeffs.clone() }, 2, 1.0)?;
        let flow = ReflectedFlow::new(ob, &theta)?;
        let oracle = jacobian_oracle(&flow, 1.0, 500, 3, 0.05, 1e-5)?;
        let scaling = jacobian_scaling_near_grazing(&flow, 1e-3, 1e-2, 20)?;
        println!(
            "coeffs {coeffs:?}: relative error {:.2e}, lower bound {}, exponent of j(0, x2) {:.4}",
            oracle.max_rel_error, oracle.lower_bound_holds, scaling.exponent_j0
        );
    }
    Ok(())
}
