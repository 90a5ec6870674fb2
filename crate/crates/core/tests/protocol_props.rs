use csi_feedback::channel::{ChannelTensor, FadingConfig};
use csi_feedback::experiment::{session_for, trial_traces, ExperimentConfig};
use csi_feedback::metrics::Method;
use csi_feedback::protocol::{
    advance_predictors, bs_reconstruct, estimate_trace, run_link_session, run_reporting,
    ue_report, BsState, MessageTag, RunOptions, SessionConfig, SessionOutput, UeState,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn small_config(samples: usize) -> ExperimentConfig {
    ExperimentConfig { trials: 1, samples_per_trial: samples, ..ExperimentConfig::default() }
}

fn run(
    config: &ExperimentConfig,
    tau: f64,
    bits: u32,
    method: Method,
    options: RunOptions,
) -> (Vec<ChannelTensor>, SessionConfig, SessionOutput) {
    let fading = FadingConfig::gauss_markov(tau).unwrap();
    let (channel, noise) = trial_traces(config, &fading, 0).unwrap();
    let session = session_for(config, &fading, bits, method).unwrap();
    let out = run_link_session(&channel, &noise, &session, options).unwrap();
    (channel, session, out)
}

fn mean_bs_ue_gap(out: &SessionOutput, skip: usize) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (r, e) in out.reconstructed[skip..].iter().zip(&out.estimates[skip..]) {
        for (a, b) in r.gains().iter().zip(e.gains()) {
            total += (a - b).norm();
            count += 1;
        }
    }
    total / count as f64
}

#[test]
fn predictors_stay_in_lockstep() {
    let config = small_config(300);
    for tau in [0.1, 0.5, 1.0] {
        let options = RunOptions { record_trace: false, keep_predictions: true };
        let (_, _, out) = run(&config, tau, 2, Method::Proposed, options);
        assert_eq!(out.ue_predictions.len(), 300);
        for (u, b) in out.ue_predictions.iter().zip(&out.bs_predictions) {
            for (x, y) in u.iter().zip(b) {
                assert_eq!(x.re.to_bits(), y.re.to_bits());
                assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }
}

#[test]
fn conventional_reconstruction_is_quantized_estimate() {
    let config = small_config(200);
    let (_, session, out) = run(&config, 0.5, 3, Method::Conventional, RunOptions::default());
    assert!(!session.prediction_enabled());
    let codec = out.codebook.conventional;
    for (r, e) in out.reconstructed.iter().zip(&out.estimates) {
        for (a, b) in r.gains().iter().zip(e.gains()) {
            let want = codec.decode(&codec.encode(*b).unwrap()).unwrap();
            assert_eq!(*a, want);
        }
    }
    assert!(out.tags.iter().all(|t| *t == MessageTag::Init));
}

#[test]
fn fine_quantization_keeps_bs_close_to_ue() {
    let mut config = small_config(400);
    for noise in [0.1, 0.0] {
        config.noise_variance = noise;
        for method in [Method::Conventional, Method::Proposed] {
            let (_, _, out) = run(&config, 0.5, 16, method, RunOptions::default());
            let gap = mean_bs_ue_gap(&out, config.init_length);
            assert!(gap <= 1e-3, "{method} sigma2={noise}: {gap}");
        }
    }
}

#[test]
fn static_noiseless_channel_is_never_reported_again() {
    let mut config = small_config(200);
    config.noise_variance = 0.0;
    config.lossless_init = true;
    let (channel, _, out) = run(&config, 0.0, 1, Method::Proposed, RunOptions::default());
    let start = config.init_length;
    assert!(out.tags[..start].iter().all(|t| *t == MessageTag::Init));
    assert!(out.tags[start..].iter().all(|t| *t == MessageTag::Suppressed));
    assert!(out.bits[start..].iter().all(|&b| b == 1));
    assert_eq!(out.reconstructed, channel);
}

#[test]
fn noiseless_filtered_estimate_is_exact() {
    let mut config = small_config(150);
    config.noise_variance = 0.0;
    let (channel, _, out) = run(&config, 0.5, 4, Method::Proposed, RunOptions::default());
    for (e, h) in out.estimates.iter().zip(&channel) {
        for (a, b) in e.gains().iter().zip(h.gains()) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn infinite_threshold_suppresses_everything() {
    let mut config = small_config(150);
    config.suppression_threshold = f64::INFINITY;
    let (_, _, out) = run(&config, 0.5, 4, Method::Proposed, RunOptions::default());
    let start = config.init_length;
    assert!(out.tags[start..].iter().all(|t| *t == MessageTag::Suppressed));
    assert_eq!(out.total_bits() as usize, start * (1 + 8 * 8) + (150 - start));
}

#[test]
fn messages_replay_into_a_fresh_base_station() {
    let config = small_config(150);
    let fading = FadingConfig::gauss_markov(0.5).unwrap();
    let (channel, noise) = trial_traces(&config, &fading, 0).unwrap();
    let session = session_for(&config, &fading, 2, Method::Proposed).unwrap();
    let trace = estimate_trace(&channel, &noise, &session).unwrap();
    let reference = run_reporting(&trace, &session, RunOptions::default()).unwrap();

    let links = config.links();
    let codebook = reference.codebook;
    let mut ue = UeState::new(&session, codebook, links).unwrap();
    let mut bs = BsState::new(&session, codebook, links).unwrap();
    let mut messages = Vec::new();
    for est in &trace.estimates {
        let msg = ue_report(est, &ue, &session).unwrap();
        let rec = bs_reconstruct(&msg, &bs, &session).unwrap();
        advance_predictors(&rec, &mut ue, &mut bs, &session).unwrap();
        messages.push(msg);
    }

    // a second BS and a shadow UE predictor see only the messages
    let mut bs2 = BsState::new(&session, codebook, links).unwrap();
    let mut shadow = UeState::new(&session, codebook, links).unwrap();
    for (msg, want) in messages.iter().zip(&reference.reconstructed) {
        let rec = bs_reconstruct(msg, &bs2, &session).unwrap();
        assert_eq!(rec.as_slice(), want.gains());
        advance_predictors(&rec, &mut shadow, &mut bs2, &session).unwrap();
    }
}

#[test]
fn out_of_order_message_is_rejected() {
    let config = small_config(150);
    let fading = FadingConfig::gauss_markov(0.5).unwrap();
    let (channel, noise) = trial_traces(&config, &fading, 0).unwrap();
    let session = session_for(&config, &fading, 2, Method::Proposed).unwrap();
    let trace = estimate_trace(&channel, &noise, &session).unwrap();
    let codebook = run_reporting(&trace, &session, RunOptions::default()).unwrap().codebook;
    let ue = UeState::new(&session, codebook, config.links()).unwrap();
    let bs = BsState::new(&session, codebook, config.links()).unwrap();
    let mut msg = ue_report(&trace.estimates[0], &ue, &session).unwrap();
    msg.time_index = 5;
    assert!(bs_reconstruct(&msg, &bs, &session).is_err());
}

fn expected_cost(tag: MessageTag, links: u64, bits: u32) -> u64 {
    match tag {
        MessageTag::Suppressed => 1,
        MessageTag::Init | MessageTag::Delta => 1 + links * 2 * bits as u64,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn bit_accounting_is_exact(
        bits in 1u32..=8,
        tau in 0.0f64..=1.0,
        epsilon in 0.0f64..1.5,
        proposed in any::<bool>(),
    ) {
        let mut config = small_config(140);
        config.suppression_threshold = epsilon;
        let method = if proposed { Method::Proposed } else { Method::Conventional };
        let options = RunOptions { record_trace: true, keep_predictions: false };
        let (_, _, out) = run(&config, tau, bits, method, options);
        let links = config.links() as u64;
        for (n, rec) in out.records.iter().enumerate() {
            prop_assert_eq!(rec.time_index, n as u64 + 1);
            prop_assert_eq!(rec.bit_cost, expected_cost(rec.tag, links, bits));
            prop_assert_eq!(out.bits[n], rec.bit_cost);
            if let Some(d) = rec.max_abs_delta {
                prop_assert_eq!(rec.tag == MessageTag::Suppressed, d <= epsilon);
            }
        }
        if !proposed {
            prop_assert!(out.tags.iter().all(|t| *t == MessageTag::Init));
        }
    }

    #[test]
    fn delta_error_is_at_most_half_a_step_inside_the_range(
        bits in 2u32..=8,
        tau in 0.05f64..=1.0,
    ) {
        let config = small_config(140);
        let options = RunOptions { record_trace: true, keep_predictions: false };
        let (_, session, out) = run(&config, tau, bits, Method::Proposed, options);
        let spec = *out.codebook.delta.spec().unwrap();
        let half = spec.step() / 2.0 + 1e-12;
        for n in config.init_length..out.records.len() {
            if out.tags[n] != MessageTag::Delta {
                continue;
            }
            let prediction = &out.records[n - 1].prediction;
            let recon = out.reconstructed[n].gains();
            for ((p, e), r) in prediction.iter().zip(out.estimates[n].gains()).zip(recon) {
                let delta: Complex64 = session.update_function.apply(*p, *e);
                let err = r - e;
                if delta.re.abs() <= spec.range() {
                    prop_assert!(err.re.abs() <= half, "{} > {}", err.re, half);
                }
                if delta.im.abs() <= spec.range() {
                    prop_assert!(err.im.abs() <= half, "{} > {}", err.im, half);
                }
            }
        }
    }
}
