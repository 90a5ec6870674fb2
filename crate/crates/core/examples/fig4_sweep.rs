//! MSE against channel predictability at one and two bits (reduced trial
//! count). Pass a trial count as the first argument; the preset uses 200.

use csi_feedback::experiment::{run_sweep, ExperimentConfig};
use csi_feedback::metrics::Method;

fn main() -> csi_feedback::Result<()> {
    let trials = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let config = ExperimentConfig { trials, ..ExperimentConfig::fig4() };
    let table = run_sweep(&config)?;
    println!("tau   B  conventional  proposed  ratio");
    for &bits in &config.bits {
        for &tau in &config.tau {
            let c = table.find(Method::Conventional, bits, tau).expect("row").mse;
            let p = table.find(Method::Proposed, bits, tau).expect("row").mse;
            println!("{tau:.1}  {bits}  {c:>12.4}  {p:>8.4}  {:.3}", p / c);
        }
    }
    Ok(())
}
