//! Bit and frame error rates of the built-in LDPC codes with BPSK over AWGN.

use rand::Rng;
use rand_distr::StandardNormal;

use dmimo::coding::{builtin_codes, LdpcCode};
use dmimo::rng;

fn main() -> Result<(), dmimo::coding::CodingError> {
    let frames = 300;
    println!("code\tEb/N0\tBER\tFER");
    for name in builtin_codes() {
        let code = LdpcCode::builtin(name)?;
        for ebn0_db in [1.0, 2.0, 3.0] {
            let sigma2 = 1.0 / (2.0 * code.rate() * 10f64.powf(ebn0_db / 10.0));
            let mut r = rng::stream(5, &[]);
            let (mut bit_err, mut frame_err) = (0usize, 0usize);
            for _ in 0..frames {
                let info: Vec<u8> = (0..code.k()).map(|_| r.random_range(0..2)).collect();
                let cw = code.encode(&info)?;
                // Bit 1 maps to -1 so that -2y/sigma^2 is ln P(1)/P(0).
                let llr: Vec<f64> = cw
                    .iter()
                    .map(|&b| {
                        let x = if b == 1 { -1.0 } else { 1.0 };
                        let n: f64 = r.sample(StandardNormal);
                        -2.0 * (x + n * sigma2.sqrt()) / sigma2
                    })
                    .collect();
                let out = code.decode_siso(&llr, 25)?;
                let errs = code
                    .extract_info(&out.hard_bits)
                    .iter()
                    .zip(&info)
                    .filter(|(a, b)| a != b)
                    .count();
                bit_err += errs;
                frame_err += usize::from(errs > 0);
            }
            println!(
                "{name}\t{ebn0_db:.1}\t{:.2e}\t{:.3}",
                bit_err as f64 / (frames * code.k()) as f64,
                frame_err as f64 / frames as f64
            );
        }
    }
    Ok(())
}
