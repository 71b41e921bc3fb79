//! Dilation of a commuting pair of analytic semigroups into shift groups on
//! a grid: factorization defects under refinement, embedding norms, and the
//! transfer inequality back to the base space.

use hfc::config::QuadProfile;
use hfc::dilation::{build_dilation, transfer_fc, verify_factorization, LineGrid};
use hfc::linalg::CMatrix;
use hfc::operator::CommutingTuple;
use hfc::sector::{phi_m, H01Form};
use hfc::space::SpaceModel;

fn main() -> hfc::Result<()> {
    let basis = CMatrix::from_real_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
    let basis_inv = basis.inverse()?;
    let make = |d: &[f64]| basis.matmul(&CMatrix::diag_real(d)).matmul(&basis_inv);
    let tuple = CommutingTuple::new(
        SpaceModel::euclidean(2),
        vec![make(&[1.0, 2.0]), make(&[0.8, 1.4])],
        1e-9,
    )?;

    println!("factorization defect ||T_t - Q U_t J|| at t = (1, 1):");
    for h in [4e-3, 2e-3, 1e-3] {
        let sys = build_dilation(&tuple, LineGrid::new(2, h, 20.0)?)?;
        let rep = verify_factorization(&sys, &[vec![1.0, 1.0]])?;
        println!(
            "  h = {h:.0e}: defect {:.3e}  (||J|| = {:.4}, ||Q|| = {:.4})",
            rep.max_defect, sys.j_norm, sys.q_norm
        );
    }

    // transfer: || f(A) || <= ||Q|| ||J|| || f(B) || with the shift side
    // evaluated as a Fourier multiplier sup
    let sys = build_dilation(&tuple, LineGrid::new(2, 1e-2, 20.0)?)?;
    let theta = 0.6 * std::f64::consts::PI;
    for m in [1u32, 2, 8] {
        let f = phi_m(m, theta)?.tensor(&phi_m(m, theta)?);
        let rep = transfer_fc(
            &H01Form::from_function(f),
            &sys,
            &[vec![0.0, 0.0], vec![1.0, 1.0]],
            QuadProfile::Default,
        )?;
        println!(
            "transfer, f = Phi_{m} tensor Phi_{m}: ||f(A)|| = {:.4} <= {:.4} ({})",
            rep.lhs,
            rep.rhs,
            if rep.holds { "holds" } else { "violated" }
        );
    }
    Ok(())
}
