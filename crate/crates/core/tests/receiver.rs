use dmimo::numerics::ComplexMatrix;
use dmimo::receiver::{receive_block, receive_block_naive, IterationPlan, ReceiveResult};
use dmimo::rng;
use dmimo::suppression::{build_suppression, SuppressionSet};
use dmimo::system_model::{
    draw_channel, random_payload, transmit, ChannelRealization, LinkSetup, PrecoderMode,
    SystemConfig,
};

struct Trial {
    supp: SuppressionSet,
    y: ComplexMatrix,
    truth: Vec<Vec<u8>>,
    chan: ChannelRealization,
}

fn trial(cfg: &SystemConfig, link: &LinkSetup, seed: u64, t: u64) -> Trial {
    let chan = draw_channel(cfg, &mut rng::stream(seed, &[t, 1])).unwrap();
    let truth = random_payload(link, &mut rng::stream(seed, &[t, 2]));
    let nv = cfg.noise_variance();
    let tx = transmit(
        cfg,
        link,
        &chan,
        &truth,
        nv,
        &mut rng::stream(seed, &[t, 3]),
    )
    .unwrap();
    let supp = build_suppression(&chan, cfg.antennas_per_rau, cfg.row_selection, nv).unwrap();
    Trial {
        supp,
        y: tx.received,
        truth,
        chan,
    }
}

fn receive(cfg: &SystemConfig, link: &LinkSetup, t: &Trial, plan: IterationPlan) -> ReceiveResult {
    receive_block(cfg, link, &t.supp, &t.y, &t.truth, &plan).unwrap()
}

#[test]
fn noiseless_blocks_decode_for_every_scheme() {
    let cfg = SystemConfig {
        noise_variance: Some(1e-12),
        ..SystemConfig::desk()
    };
    let link = LinkSetup::new(&cfg).unwrap();
    for t in 0..10 {
        let tr = trial(&cfg, &link, 31, t);
        for plan in [
            IterationPlan::lmmse(),
            IterationPlan::id(3),
            IterationPlan::idd(3),
        ] {
            assert_eq!(receive(&cfg, &link, &tr, plan).block_errors(), 0);
        }
    }
}

#[test]
fn single_iteration_schemes_decode_identically() {
    let cfg = SystemConfig {
        snr_db: 9.0,
        ..SystemConfig::desk()
    };
    let link = LinkSetup::new(&cfg).unwrap();
    for t in 0..10 {
        let tr = trial(&cfg, &link, 32, t);
        let a = receive(&cfg, &link, &tr, IterationPlan::lmmse());
        let b = receive(&cfg, &link, &tr, IterationPlan::id(1));
        let c = receive(&cfg, &link, &tr, IterationPlan::idd(1));
        let naive = receive_block_naive(
            &cfg,
            &link,
            &tr.supp,
            &tr.y,
            &tr.truth,
            &IterationPlan::idd(1),
        )
        .unwrap();
        for k in 0..2 {
            assert_eq!(a.users[k].decoded_bits, b.users[k].decoded_bits);
            assert_eq!(b.users[k].decoded_bits, c.users[k].decoded_bits);
            assert_eq!(c.users[k].decoded_bits, naive.users[k].decoded_bits);
        }
    }
}

#[test]
fn relabeling_users_permutes_results() {
    let cfg = SystemConfig {
        snr_db: 9.0,
        ..SystemConfig::desk()
    };
    let link = LinkSetup::new(&cfg).unwrap();
    let tr = trial(&cfg, &link, 33, 0);
    // Same channels with the users swapped; user k keeps its interleaver
    // index, so swap the payload through a link with swapped interleavers.
    let swapped_chan = ChannelRealization::from_channels(
        vec![tr.chan.g[1].clone(), tr.chan.g[0].clone()],
        &[2, 2],
        PrecoderMode::Columns,
    )
    .unwrap();
    let mut swapped_link = link.clone();
    swapped_link.interleavers.swap(0, 1);
    let swapped_supp =
        build_suppression(&swapped_chan, 4, cfg.row_selection, cfg.noise_variance()).unwrap();
    let truth = vec![tr.truth[1].clone(), tr.truth[0].clone()];
    let plan = IterationPlan::idd(2);
    let a = receive(&cfg, &link, &tr, plan);
    let b = receive_block(&cfg, &swapped_link, &swapped_supp, &tr.y, &truth, &plan).unwrap();
    assert_eq!(a.users[0].decoded_bits, b.users[1].decoded_bits);
    assert_eq!(a.users[1].decoded_bits, b.users[0].decoded_bits);
    assert_eq!(a.users[0].block_error, b.users[1].block_error);
}

#[test]
fn feedback_shrinks_prior_variance_on_decoded_blocks() {
    // Per block, later iterations only jitter around a small floor once the
    // extrinsic information saturates, so the trend is checked on the mean.
    let cfg = SystemConfig {
        snr_db: 10.0,
        ..SystemConfig::desk()
    };
    let link = LinkSetup::new(&cfg).unwrap();
    let (mut decoded, mut sums) = (0usize, [0.0f64; 3]);
    for t in 0..250 {
        let tr = trial(&cfg, &link, 34, t);
        for u in receive(&cfg, &link, &tr, IterationPlan::idd(3)).users {
            if u.block_error {
                continue;
            }
            decoded += 1;
            let nu: Vec<f64> = u.diagnostics.iter().map(|d| d.mean_nu).collect();
            assert_eq!(nu[0], 1.0);
            assert!(nu[1] < nu[0], "{nu:?}");
            for (s, v) in sums.iter_mut().zip(&nu) {
                *s += v;
            }
        }
    }
    assert!(decoded >= 400, "{decoded}");
    assert!(sums[2] <= sums[1] && sums[1] < 0.1 * sums[0], "{sums:?}");
}

#[test]
fn naive_receiver_is_not_worse_than_evd() {
    let cfg = SystemConfig {
        snr_db: 10.0,
        ..SystemConfig::desk()
    };
    let link = LinkSetup::new(&cfg).unwrap();
    let plan = IterationPlan::idd(3);
    let (mut evd, mut naive) = (0usize, 0usize);
    let trials = 150;
    for t in 0..trials {
        let tr = trial(&cfg, &link, 35, t);
        evd += receive(&cfg, &link, &tr, plan).block_errors();
        naive += receive_block_naive(&cfg, &link, &tr.supp, &tr.y, &tr.truth, &plan)
            .unwrap()
            .block_errors();
    }
    let n = (2 * trials) as f64;
    let (pe, pn) = (evd as f64 / n, naive as f64 / n);
    let sd = ((pe * (1.0 - pe) + pn * (1.0 - pn)) / n).sqrt();
    assert!(pn <= pe + 2.0 * sd, "naive {pn} evd {pe}");
}
