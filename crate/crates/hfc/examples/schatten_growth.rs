//! The left/right multiplication pair on Schatten classes: the joint
//! calculus constant grows with the matrix size for p != 2, while the
//! Hilbert-Schmidt control stays flat.

use hfc::config::QuadProfile;
use hfc::contour::EnsembleCfg;
use hfc::sqfn::schatten_growth_experiment;

fn main() -> hfc::Result<()> {
    let cfg = EnsembleCfg {
        size: 16,
        max_atoms: 4,
        ..Default::default()
    };
    let ladder = [2usize, 4, 8, 16];
    println!("joint calculus constants of (x -> cx, x -> xc), c = diag(2^-k):\n");
    for p in [4.0f64, 2.0] {
        let pts = schatten_growth_experiment(p, &ladder, &cfg, 17, QuadProfile::Fast)?;
        print!("  S^{p}: ");
        for pt in &pts {
            print!("K({}) >= {:.4}   ", pt.n, pt.constant);
        }
        println!();
        print!("       quotient symbol alone: ");
        for pt in &pts {
            print!("{:.4}   ", pt.quotient_ratio);
        }
        println!();
    }
    println!("\n(growth for p != 2 signals the absence of a joint calculus in the limit;");
    println!(" only monotone growth is asserted at this scale)");
    Ok(())
}
