//! Randomized geometry of the model spaces: Rademacher vs Gaussian averages,
//! R-bound estimates, gamma-norms of finite-rank maps and the iterated-gamma
//! comparison.

use hfc::linalg::{CMatrix, CVector, C64};
use hfc::space::SpaceModel;
use hfc::stochastic::{
    gamma_norm, gaussian_average, iterated_gamma_compare, r_bound_estimate, rademacher_average,
    rng_stream, AverageMode, GammaElement, GammaMode, GammaTensor, GaussianMode, ProbeBudget,
    VectorFamily,
};
use ndarray::Array1;
use rand::Rng;

fn random_vec(rng: &mut rand_chacha::ChaCha8Rng, dim: usize) -> CVector {
    Array1::from_iter((0..dim).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)))
}

fn main() -> hfc::Result<()> {
    let mut rng = rng_stream(42, "example", 0);

    // Gaussian vs Rademacher on l^p: the ratio band of the equivalence
    for p in [1.0f64, 2.0, 4.0] {
        let space = SpaceModel::lp(p, 6);
        let xs: Vec<CVector> = (0..6).map(|_| random_vec(&mut rng, 6)).collect();
        let fam = VectorFamily::new(space, xs)?;
        let rad = rademacher_average(&fam, AverageMode::Exact, 0)?.value;
        let gauss = gaussian_average(&fam, GaussianMode::MonteCarlo { samples: 8192 }, 1)?.value;
        println!("l^{p}: rademacher {rad:.4}, gaussian {gauss:.4}, ratio {:.3}", gauss / rad);
    }

    // R-bound of a resolvent-type family on the Euclidean model
    let a = CMatrix::diag_real(&[1.0, 2.0, 0.5]);
    let ops: Vec<CMatrix> = [C64::new(-1.0, 1.0), C64::new(-0.2, -2.0), C64::new(-3.0, 0.3)]
        .iter()
        .map(|&z| {
            hfc::operator::resolvent(&a, z)
                .map(|r| r.scale(z))
                .expect("resolvent")
        })
        .collect();
    let rb = r_bound_estimate(&ops, &SpaceModel::euclidean(3), &ProbeBudget::default(), 7)?;
    let sup: f64 = ops.iter().map(|t| t.spectral_norm()).fold(0.0, f64::max);
    println!("\nR-bound estimate {:.4} (sup of norms {:.4})", rb.estimate, sup);

    // gamma-norm: Hilbert-Schmidt on the Euclidean model, Monte Carlo on l^4
    let mut mat = CMatrix::zeros(4, 8);
    for j in 0..8 {
        mat.set_column(j, &random_vec(&mut rng, 4));
    }
    let u_euc = GammaElement::new(SpaceModel::euclidean(4), mat.clone())?;
    let u_l4 = GammaElement::new(SpaceModel::lp(4.0, 4), mat)?;
    let g_euc = gamma_norm(&u_euc, GammaMode::Auto, 3)?;
    let g_l4 = gamma_norm(&u_l4, GammaMode::MonteCarlo { samples: 8192 }, 3)?;
    println!(
        "\ngamma-norm: euclidean {:.6} (HS {:.6}), l^4 {:.4} with CI [{:.4}, {:.4}]",
        g_euc.value,
        u_euc.hs_norm(),
        g_l4.value,
        g_l4.ci_low.unwrap(),
        g_l4.ci_high.unwrap()
    );

    // iterated vs flat gamma-norm of an order-3 tensor
    for space in [SpaceModel::euclidean(3), SpaceModel::lp(4.0, 3)] {
        let slices: Vec<CMatrix> = (0..3)
            .map(|_| {
                let mut m = CMatrix::zeros(3, 4);
                for j in 0..4 {
                    m.set_column(j, &random_vec(&mut rng, 3));
                }
                m
            })
            .collect();
        let rep = iterated_gamma_compare(&GammaTensor { space, slices }, 5, 512)?;
        println!(
            "iterated/flat gamma ratio on {:?}: {:.4}",
            space.kind, rep.ratio
        );
    }
    Ok(())
}
