//! Runs one reporting session message by message: handshake, calibration,
//! initialization, then residual reports with the predictors in lockstep.

use csi_feedback::channel::FadingConfig;
use csi_feedback::experiment::{trial_traces, ExperimentConfig};
use csi_feedback::protocol::{
    advance_predictors, assessment_handshake, bs_reconstruct, calibrate, estimate_trace,
    ue_report, BsProposal, BsState, MessageTag, PredictorKind, UeCapabilities, UeEstimateMode,
    UeState,
};
use csi_feedback::quantizer::Compression;

fn main() -> csi_feedback::Result<()> {
    let fading = FadingConfig::gauss_markov(0.3)?;
    let proposal = BsProposal {
        predictor: PredictorKind::Kalman,
        fading: fading.clone(),
        noise_variance: 0.1,
        init_length: 20,
        suppression_threshold: 0.05,
        conventional: Compression::uniform(2, 3.0),
        delta: Compression::uniform(2, 3.0),
        ue_estimate: UeEstimateMode::Filtered,
    };
    let (session, outcome) = assessment_handshake(&UeCapabilities::kalman(4), &proposal)?;
    println!("handshake: {outcome:?}");

    let config = ExperimentConfig { samples_per_trial: 60, ..ExperimentConfig::default() };
    let (channel, noise) = trial_traces(&config, &fading, 0)?;
    let trace = estimate_trace(&channel, &noise, &session)?;
    let codebook = calibrate(&session, &trace.estimates, &trace.prior_predictions)?;
    println!("codebook: {codebook:?}");

    let links = config.links();
    let mut ue = UeState::new(&session, codebook, links)?;
    let mut bs = BsState::new(&session, codebook, links)?;
    let mut suppressed = 0;
    for (n, estimate) in trace.estimates.iter().enumerate() {
        let msg = ue_report(estimate, &ue, &session)?;
        let h_bs = bs_reconstruct(&msg, &bs, &session)?;
        advance_predictors(&h_bs, &mut ue, &mut bs, &session)?;
        let err = h_bs.iter().zip(channel[n].gains()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        suppressed += usize::from(msg.tag() == MessageTag::Suppressed);
        if n % 5 == 0 || n == 20 {
            println!(
                "cycle {:>2} {:<10} {:>3} bits  ||H - H_bs||^2 = {err:.3}",
                msg.time_index,
                msg.tag().to_string(),
                msg.bit_cost
            );
        }
    }
    println!("{suppressed} suppressed reports");
    Ok(())
}
