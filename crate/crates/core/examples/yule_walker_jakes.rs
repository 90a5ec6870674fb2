//! Fits AR models to the Jakes autocorrelation and compares the fitted
//! spectrum with the classical U-shaped Doppler spectrum.

use csi_feedback::channel::{jakes_autocorrelation, psd, yule_walker, FadingConfig};

fn main() -> csi_feedback::Result<()> {
    let doppler = 0.05;
    let r: Vec<f64> = (0..=3).map(|l| jakes_autocorrelation(l, doppler)).collect::<Result<_, _>>()?;
    println!("J0(2 pi f_m l), l = 0..3: {r:.4?}");
    for p in 1..=3 {
        let (coeffs, residual) = yule_walker(&r[..=p], p)?;
        let re: Vec<f64> = coeffs.iter().map(|c| c.re).collect();
        println!("p={p}: a = {re:.4?}, residual {residual:.2e}");
    }
    let config = FadingConfig::jakes(3, doppler)?;
    println!("AR(3) tau = {:.4}", config.tau());
    for f in [0.0, 0.02, 0.04, 0.05, 0.1, 0.3] {
        println!("  S({f:.2}) = {:.3e}", psd(&config, f)?);
    }
    Ok(())
}
