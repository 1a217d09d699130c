//! Builds per-user combiners from the left null space of the other users'
//! channels and shows that cross-user leakage vanishes.

use dmimo::rng;
use dmimo::suppression::build_suppression;
use dmimo::system_model::{draw_channel, SystemConfig};

fn main() -> dmimo::Result<()> {
    let cfg = SystemConfig::desk();
    let chan = draw_channel(&cfg, &mut rng::stream(cfg.seed, &[0]))?;
    let supp = build_suppression(
        &chan,
        cfg.antennas_per_rau,
        cfg.row_selection,
        cfg.noise_variance(),
    )?;
    println!(
        "{} users, {} receive antennas, {} combiner rows each",
        cfg.users,
        cfg.receive_antennas(),
        cfg.antennas_per_rau
    );
    for k in 0..cfg.users {
        println!(
            "user {k}: interferer rank {}, leakage {:.2e}, effective channel {:?}",
            supp.interferer_rank[k],
            supp.residual_leakage[k],
            supp.h_eff[k].shape()
        );
        for l in (0..cfg.users).filter(|&l| l != k) {
            let ratio = (&supp.w[k] * &chan.g[l]).frobenius_norm() / chan.g[l].frobenius_norm();
            println!("  |W_{k} G_{l}| / |G_{l}| = {ratio:.2e}");
        }
    }
    Ok(())
}
