//! One transmitted block through suppression and every receiver scheme,
//! with per-iteration diagnostics.

use dmimo::receiver::{receive_block, IterationPlan};
use dmimo::rng;
use dmimo::suppression::build_suppression;
use dmimo::system_model::{draw_channel, random_payload, transmit, LinkSetup, SystemConfig};

fn main() -> dmimo::Result<()> {
    let cfg = SystemConfig {
        snr_db: 9.0,
        ..SystemConfig::desk()
    };
    let link = LinkSetup::new(&cfg)?;
    let nv = cfg.noise_variance();
    let chan = draw_channel(&cfg, &mut rng::stream(cfg.seed, &[0, 1]))?;
    let payload = random_payload(&link, &mut rng::stream(cfg.seed, &[0, 2]));
    let tx = transmit(
        &cfg,
        &link,
        &chan,
        &payload,
        nv,
        &mut rng::stream(cfg.seed, &[0, 3]),
    )?;
    let supp = build_suppression(&chan, cfg.antennas_per_rau, cfg.row_selection, nv)?;
    println!(
        "{} codewords of {} bits per user block, noise variance {nv:.4}",
        link.codewords_per_block(0),
        link.code.n()
    );

    for plan in [
        IterationPlan::lmmse(),
        IterationPlan::id(3),
        IterationPlan::idd(3),
    ] {
        let res = receive_block(&cfg, &link, &supp, &tx.received, &payload, &plan)?;
        println!(
            "{} x{}: {} block errors",
            plan.scheme,
            plan.iterations,
            res.block_errors()
        );
        for (k, u) in res.users.iter().enumerate() {
            for (i, d) in u.diagnostics.iter().enumerate() {
                println!(
                    "  user {k} iteration {}: mean nu {:.4}, mean |LLR| {:.2}, inversions {}",
                    i + 1,
                    d.mean_nu,
                    d.mean_abs_llr,
                    d.inversions
                );
            }
        }
    }
    Ok(())
}
