//! Quantizes Gaussian samples with a fitted range and shows how the error
//! falls with the bit budget, plus the packed payload size. At high bit
//! counts the error stops following step^2/6 because clipping beyond the
//! range dominates.

use csi_feedback::channel::complex_gaussian;
use csi_feedback::quantizer::{dequantize, fit_range, pack_bits, quantize, unpack_bits, QuantizerSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> csi_feedback::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples: Vec<_> = (0..10_000).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
    let range = fit_range(&samples, 3.0)?;
    println!("fitted range {range:.3}");
    for bits in [1, 2, 4, 6, 8] {
        let spec = QuantizerSpec::midrise(bits, range)?;
        let q: Vec<_> = samples.iter().map(|&z| quantize(z, &spec)).collect::<Result<_, _>>()?;
        let err = q
            .iter()
            .zip(&samples)
            .map(|(v, z)| dequantize(v, &spec).map(|d| (d - z).norm_sqr()))
            .sum::<Result<f64, _>>()?
            / samples.len() as f64;
        let packed = pack_bits(&q);
        assert_eq!(unpack_bits(&packed, &spec, q.len())?, q);
        println!(
            "B={bits}  mse {err:.2e}  granular step^2/6 {:.2e}  {} bytes",
            spec.error_variance(),
            packed.len()
        );
    }
    Ok(())
}
