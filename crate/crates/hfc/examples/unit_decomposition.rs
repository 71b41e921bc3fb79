//! The dyadic surrogate decomposition of the unit on a sector: reports the
//! absolute-sum bounds, the ray integrals of the coefficients and the
//! truncation defect, next to the two-sided comparison band of the dyadic
//! atom family.

use hfc::sector::{
    dyadic_surrogate, ray_integral, sigma_k, unit_decomposition_check, UnitCheckCfg,
};
use num_complex::Complex64 as C64;

fn main() -> hfc::Result<()> {
    let mu = std::f64::consts::FRAC_PI_4;
    let nu = std::f64::consts::FRAC_PI_8;

    for n in [16usize, 32, 64] {
        let ud = dyadic_surrogate(n, mu)?;
        let rep = unit_decomposition_check(&ud, nu, &UnitCheckCfg::default())?;
        println!(
            "N = {n:3}: defect {:.3e}, sum|psi| <= {:.3}, |Delta| <= {:.3}, ray integral <= {:.2}",
            rep.truncation_defect, rep.psi_sum_bound, rep.delta_sup, rep.delta_ray_integral_max
        );
    }

    // the comparison atoms satisfy a two-sided dyadic band
    println!("\nsigma_k band (rho = 2, gamma = pi/2, mu = pi/4):");
    let rho = 2.0f64;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for k in -8..=8 {
        let sk = sigma_k(k, rho, std::f64::consts::FRAC_PI_2, mu)?;
        for n in -8..=8 {
            let r = rho.powf(n as f64 + 0.5);
            let v = sk.f.eval(&[C64::new(r, 0.0)])?.norm();
            let scaled = v * rho.powf((k - n).abs() as f64 / 4.0);
            lo = lo.min(scaled);
            hi = hi.max(scaled);
        }
    }
    println!("  scaled modulus in [{lo:.4}, {hi:.4}], ratio {:.1}", hi / lo);

    let cfg = UnitCheckCfg::default();
    let integrals: Vec<f64> = (-8..=8)
        .map(|k| {
            let sk = sigma_k(k, rho, std::f64::consts::FRAC_PI_2, mu).unwrap();
            ray_integral(&sk.f, nu, &cfg).unwrap()
        })
        .collect();
    let max = integrals.iter().cloned().fold(0.0, f64::max);
    let min = integrals.iter().cloned().fold(f64::INFINITY, f64::min);
    println!("  ray integrals of sigma_k: [{min:.3}, {max:.3}] over k in [-8, 8]");
    Ok(())
}
