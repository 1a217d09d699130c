//! Soft interference cancellation with one eigendecomposition per block,
//! checked against the per-column inversion reference.

use std::time::Instant;

use dmimo::detector::{detect_evd, detect_naive, prepare, SoftBlock};
use dmimo::numerics::{complex_gaussian, ComplexMatrix};
use dmimo::rng;

fn main() -> dmimo::Result<()> {
    let mut r = rng::stream(7, &[]);
    let (streams, rows, len) = (8, 16, 256);
    let h = complex_gaussian(rows, streams, 1.0, &mut r);
    let b = complex_gaussian(rows, rows, 0.1, &mut r);
    let sigma = &(&b * &b.adjoint()) + &ComplexMatrix::identity(rows).scale(0.05);
    let state = prepare(&h, &sigma)?;
    println!("eigenvalues of H^H S^-1 H: {:.3?}", state.lambda);

    let y = complex_gaussian(rows, len, 1.0, &mut r);
    let soft = SoftBlock::uniform(complex_gaussian(streams, len, 0.5, &mut r), vec![0.3; len])?;

    let t = Instant::now();
    let evd = detect_evd(&state, &y, &soft)?;
    let t_evd = t.elapsed();
    let evd_inv = state.inversion_count();
    state.reset_inversion_count();
    let t = Instant::now();
    let naive = detect_naive(&state, &y, &soft)?;
    let t_naive = t.elapsed();

    println!(
        "max |evd - naive| = {:.2e}",
        (&evd.s_hat - &naive.s_hat).max_abs()
    );
    println!(
        "inversions: evd {evd_inv}, naive {}",
        state.inversion_count()
    );
    println!("time: evd {t_evd:?}, naive {t_naive:?}");
    println!("post-detection SNR of stream 0: {:.3}", evd.gamma[0]);
    Ok(())
}
