//! Fourier-multiplier norms of kernel averages of shift groups, the bounded
//! regularization of generators, and the two-sided multiplier/calculus
//! equivalence for a matrix group.

use hfc::config::QuadProfile;
use hfc::contour::EnsembleCfg;
use hfc::dilation::{
    group_calculus_equivalence_check, laplace_transform, modulated_exponential_kernel,
    multiplier_norm, yosida_regularize, GroupTuple, MultiplierMode,
};
use hfc::linalg::{CMatrix, C64};

fn main() -> hfc::Result<()> {
    let h = 0.25;
    let kernel = modulated_exponential_kernel(h, 1.0, 0.0)?;

    // circulant shifts are diagonalized exactly; zero padding costs a little
    let circ = multiplier_norm(&kernel, 256, MultiplierMode::Circulant)?;
    let zp = multiplier_norm(&kernel, 512, MultiplierMode::ZeroPadded)?;
    println!("kernel e^(-t) on a step-{h} grid:");
    println!(
        "  circulant:   operator {:.10}  symbol sup {:.10}",
        circ.operator_norm, circ.symbol_sup
    );
    println!(
        "  zero-padded: operator {:.10}  (discrepancy {:.2e})",
        zp.operator_norm,
        (zp.operator_norm - zp.symbol_sup).abs() / zp.symbol_sup
    );

    // Laplace transform of the same kernel
    let l1 = laplace_transform(&kernel, &[C64::new(1.0, 0.0)])?;
    println!("  laplace transform at z = 1: {:.6} (continuum 1/2)", l1.re);

    // Yosida regularization ladder of a generator
    let b = CMatrix::diag_real(&[1.0, 2.0]);
    println!("\nregularization error ||B_eps - B||:");
    for eps in [0.2, 0.1, 0.05] {
        let err = yosida_regularize(&b, eps)?.sub(&b).spectral_norm();
        println!("  eps = {eps}: {err:.4}");
    }

    // two-sided equivalence for a unitary diagonal group
    let u = CMatrix::diag(&[
        C64::from_polar(1.0, -0.4 * h),
        C64::from_polar(1.0, 0.9 * h),
    ]);
    let group = GroupTuple::new(h, vec![u])?;
    let kernels: Vec<_> = [0.0, -0.4, 0.4, 0.9, -0.9]
        .iter()
        .map(|&xi| modulated_exponential_kernel(h, 1.0, xi).unwrap())
        .collect();
    let cfg = EnsembleCfg {
        size: 12,
        max_atoms: 4,
        ..Default::default()
    };
    let rep = group_calculus_equivalence_check(&group, &kernels, &cfg, 3, QuadProfile::Fast)?;
    println!(
        "\nunitary group: multiplier constant {:.4}, calculus constant {:.4}, ratio {:.3}",
        rep.multiplier_constant, rep.fc_constant, rep.ratio
    );
    Ok(())
}
