//! Tracks a fading link from noisy pilots and compares the filtered
//! estimate and the one-step prediction with the raw observation.

use csi_feedback::channel::{complex_gaussian, FadingConfig};
use csi_feedback::kalman::{init_belief, predict, predict_channel, update, StateSpaceModel};
use csi_feedback::rng::{substream, Purpose};

fn main() -> csi_feedback::Result<()> {
    let noise = 0.1;
    for tau in [0.1, 0.5, 1.0] {
        let fading = FadingConfig::gauss_markov(tau)?;
        let model = StateSpaceModel::from_fading(&fading, noise)?;
        let mut ch = substream(3, 0, 0, Purpose::Channel);
        let mut pilot = substream(3, 0, 0, Purpose::PilotNoise);
        let mut state = fading.initial_state(&mut ch);
        let mut belief = init_belief(fading.order())?;
        let (mut raw, mut filtered, mut predicted) = (0.0, 0.0, 0.0);
        let steps = 50_000;
        for _ in 0..steps {
            let guess = predict_channel(&belief, &model);
            let h = state.step(&fading, &mut ch);
            let y = h + complex_gaussian(&mut pilot, noise);
            belief = update(&predict(&belief, &model)?, y, &model)?.0;
            raw += (y - h).norm_sqr();
            filtered += (belief.channel_estimate() - h).norm_sqr();
            predicted += (guess - h).norm_sqr();
        }
        let n = steps as f64;
        println!(
            "tau={tau:.1}  raw {:.4}  filtered {:.4}  predicted {:.4}",
            raw / n,
            filtered / n,
            predicted / n
        );
    }
    Ok(())
}
