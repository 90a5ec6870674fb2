//! Received SNR of matched-filter precoding on perfect, noisy and coarsely
//! quantized channel knowledge.

use csi_feedback::channel::{complex_gaussian, ChannelTensor};
use csi_feedback::metrics::{mean_received_snr, to_db, PrecodingSetup};
use csi_feedback::quantizer::{dequantize, quantize, QuantizerSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> csi_feedback::Result<()> {
    let setup = PrecodingSetup::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let actual: Vec<ChannelTensor> = (0..5000)
        .map(|_| ChannelTensor::new(4, 2, 1, (0..8).map(|_| complex_gaussian(&mut rng, 1.0)).collect()))
        .collect::<Result<_, _>>()?;
    let noisy: Vec<ChannelTensor> = actual
        .iter()
        .map(|h| {
            let g = h.gains().iter().map(|&z| z + complex_gaussian(&mut rng, 0.3)).collect();
            ChannelTensor::new(4, 2, 1, g)
        })
        .collect::<Result<_, _>>()?;
    let spec = QuantizerSpec::midrise(1, 2.1)?;
    let coarse: Vec<ChannelTensor> = actual
        .iter()
        .map(|h| {
            let g = h.gains().iter().map(|&z| dequantize(&quantize(z, &spec)?, &spec)).collect::<Result<_, _>>()?;
            ChannelTensor::new(4, 2, 1, g)
        })
        .collect::<Result<_, _>>()?;
    for (name, est) in [("perfect", &actual), ("noisy", &noisy), ("1-bit", &coarse)] {
        let snr = mean_received_snr(&actual, est, &setup)?;
        println!("{name:<8} {snr:.3} ({:.2} dB)", to_db(snr));
    }
    Ok(())
}
