//! Gray-labeled QAM, max-log demapping and soft symbol statistics.

use num_complex::Complex64;

use dmimo::softmaps::{demap_soft, soft_symbol_stats, Constellation, DemapMode, SigmoidLut};

fn main() -> Result<(), dmimo::softmaps::SoftmapError> {
    let c = Constellation::qam16();
    let received = Complex64::new(0.3, -0.9);
    let mut max_log = vec![0.0; c.order_bits()];
    let mut exact = vec![0.0; c.order_bits()];
    demap_soft(received, 4.0, &c, DemapMode::MaxLog, &mut max_log);
    demap_soft(received, 4.0, &c, DemapMode::Exact, &mut exact);
    println!("s_hat = {received}, gamma = 4");
    println!("max-log LLRs {max_log:.3?}");
    println!("exact LLRs   {exact:.3?}");

    let lut = SigmoidLut::default();
    for llrs in [
        vec![0.0; 4],
        max_log.clone(),
        vec![12.0, -12.0, 12.0, -12.0],
    ] {
        let (mean, var) = soft_symbol_stats(&llrs, &c, None)?;
        let (lmean, lvar) = soft_symbol_stats(&llrs, &c, Some(&lut))?;
        println!("LLRs {llrs:>5.1?}: mean {mean:.4}, var {var:.4} (table: {lmean:.4}, {lvar:.4})");
    }
    Ok(())
}
