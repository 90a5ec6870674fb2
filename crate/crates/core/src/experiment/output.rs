use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::ResultTable;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "method,bits,tau,mse,snr_linear,snr_db,avg_bits,trials,seed";
pub const TRACE_HEADER: &str =
    "method,bits,tau,time_index,phase,message,bit_cost,max_abs_delta,h_bs,h_pred";

/// Header plus one line per row, numbers in shortest round-trip form.
pub fn render_csv(table: &ResultTable) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Contract("cannot write an empty result table".into()));
    }
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.method, r.bits, r.tau, r.mse, r.snr_linear, r.snr_db, r.avg_bits, r.trials, r.seed
        );
    }
    Ok(s)
}

pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let text = render_csv(table)?;
    write_file(path, &text)
}

/// Configuration that produced `table`, as a loadable config file with the
/// artifact-chosen defaults called out.
pub fn render_provenance(table: &ResultTable) -> String {
    let mut s = String::new();
    s.push_str("# Settings used for this run. Feed back with --config to reproduce.\n");
    s.push_str("# Simulation scale, pilot noise variance (noise_variance), quantizer range\n");
    s.push_str("# rule (session.kappa) and initialization length are artifact choices.\n");
    s.push_str("# avg_bits counts report cycles after initialization, including the 1-bit flag.\n");
    s.push_str(&table.config.to_config_text());
    s
}

/// One line per report cycle of trial 0; link values are `;`-separated.
pub fn render_trace(table: &ResultTable) -> String {
    let mut s = String::new();
    s.push_str(TRACE_HEADER);
    s.push('\n');
    let join = |v: &[num_complex::Complex64]| {
        v.iter().map(|z| format!("{}{:+}i", z.re, z.im)).collect::<Vec<_>>().join(";")
    };
    for (tag, records) in &table.trace {
        for r in records {
            let delta = r.max_abs_delta.map(|d| d.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                tag.method,
                tag.bits,
                tag.tau,
                r.time_index,
                r.phase,
                r.tag,
                r.bit_cost,
                delta,
                join(&r.reconstructed),
                join(&r.prediction)
            );
        }
    }
    s
}

pub fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}
