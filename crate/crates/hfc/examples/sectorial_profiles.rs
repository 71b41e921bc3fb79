//! Resolvent growth profiles: the sectoriality constants of a matrix over a
//! grid of angles, on the Euclidean and l^p models, next to the R-bound
//! profile that replaces them in the randomized theory.

use hfc::linalg::{CMatrix, C64};
use hfc::operator::sectorial_profile;
use hfc::space::{NormSearchCfg, SpaceModel};
use hfc::stochastic::{r_sectoriality_profile, ProbeBudget};

fn main() -> hfc::Result<()> {
    let a = CMatrix::from_rows(&[
        vec![C64::new(1.0, 0.3), C64::new(0.8, 0.0)],
        vec![C64::new(0.0, 0.0), C64::new(2.0, -0.4)],
    ])?;
    let angles: Vec<f64> = (1..=7).map(|i| 0.35 * i as f64).collect();

    println!("angle    euclidean     l^4        R-bound(euclidean)");
    let euc = sectorial_profile(
        &a,
        &SpaceModel::euclidean(2),
        &angles,
        16,
        &NormSearchCfg::default(),
    )?;
    let lp = sectorial_profile(
        &a,
        &SpaceModel::lp(4.0, 2),
        &angles,
        8,
        &NormSearchCfg {
            restarts: 8,
            ..Default::default()
        },
    )?;
    let rb = r_sectoriality_profile(
        &a,
        &SpaceModel::euclidean(2),
        &angles,
        &ProbeBudget {
            probes: 24,
            max_family: 6,
        },
        7,
    )?;
    for i in 0..angles.len() {
        println!(
            "{:5.3}    {:9.4}    {:9.4}    {:9.4}",
            angles[i], euc.constants[i], lp.constants[i], rb[i].1
        );
    }
    println!(
        "\ninferred type at threshold 10: {:?}",
        euc.inferred_type(10.0)
    );
    Ok(())
}
