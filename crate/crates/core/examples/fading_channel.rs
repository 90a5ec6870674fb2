//! Simulates Gauss-Markov fading at a few predictability levels and prints
//! the measured power and lag-1 correlation next to the model values.

use csi_feedback::channel::{FadingConfig, LinkState};
use csi_feedback::rng::{substream, Purpose};

fn main() -> csi_feedback::Result<()> {
    for tau in [0.1, 0.5, 0.9] {
        let config = FadingConfig::gauss_markov(tau)?;
        let mut rng = substream(1, 0, 0, Purpose::Channel);
        let mut state: LinkState = config.initial_state(&mut rng);
        let h: Vec<_> = (0..200_000).map(|_| state.step(&config, &mut rng)).collect();
        let power = h.iter().map(|z| z.norm_sqr()).sum::<f64>() / h.len() as f64;
        let lag1 = h[1..].iter().zip(&h).map(|(a, b)| (a * b.conj()).re).sum::<f64>() / h.len() as f64;
        println!(
            "tau={tau:.1}  power {power:.3}  lag-1 correlation {:.3} (model {:.3})  spectral radius {:.3}",
            lag1 / power,
            (1.0 - tau * tau).sqrt(),
            config.spectral_radius()?
        );
    }
    Ok(())
}
