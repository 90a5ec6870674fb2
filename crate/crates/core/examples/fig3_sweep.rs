//! MSE and SNR against quantizer bits for both methods (reduced trial count).
//! Pass a trial count as the first argument; the preset uses 200.

use csi_feedback::experiment::{render_csv, run_sweep, ExperimentConfig};
use csi_feedback::metrics::{snr_gain_percent, Method};

fn main() -> csi_feedback::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let config = ExperimentConfig { trials, ..ExperimentConfig::fig3() };
    let table = run_sweep(&config)?;
    print!("{}", render_csv(&table)?);
    for tau in [0.1, 0.5] {
        let c = table.find(Method::Conventional, 1, tau).expect("row");
        let p = table.find(Method::Proposed, 1, tau).expect("row");
        println!("# tau={tau}: B=1 SNR gain {:.1}%", snr_gain_percent(p.snr_linear, c.snr_linear)?);
    }
    Ok(())
}
