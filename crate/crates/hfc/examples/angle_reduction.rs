//! Calculus-constant estimates over a ladder of sector angles, with a shared
//! ensemble recipe: flat for a normal tuple, larger but finite for a
//! non-normal one.

use hfc::config::QuadProfile;
use hfc::contour::{angle_dependence_profile, EnsembleCfg};
use hfc::linalg::CMatrix;
use hfc::operator::CommutingTuple;
use hfc::space::SpaceModel;

fn main() -> hfc::Result<()> {
    let ladder = [0.9f64, 1.2, std::f64::consts::FRAC_PI_2, 2.0, 2.4];
    let cfg = EnsembleCfg {
        size: 24,
        ..Default::default()
    };

    let normal = CommutingTuple::new(
        SpaceModel::euclidean(3),
        vec![CMatrix::diag_real(&[0.6, 1.0, 1.9])],
        1e-10,
    )?;
    let defective = CommutingTuple::new(
        SpaceModel::euclidean(2),
        vec![CMatrix::from_real_rows(&[&[1.0, 6.0], &[0.0, 1.0]])],
        1e-10,
    )?;

    for (name, tuple, seed) in [("normal", normal, 3u64), ("jordan-type", defective, 4)] {
        let rep = angle_dependence_profile(&tuple, &ladder, &cfg, seed, QuadProfile::Fast)?;
        println!("{name} tuple:");
        for (theta, k) in rep.rungs.iter().zip(rep.estimates.iter()) {
            println!("  theta = {theta:.3}  K >= {k:.4}");
        }
        if rep.flagged.is_empty() {
            println!("  no rung exceeds {} x the top rung\n", rep.flag_factor);
        } else {
            println!("  flagged rungs: {:?}\n", rep.flagged);
        }
    }
    Ok(())
}
