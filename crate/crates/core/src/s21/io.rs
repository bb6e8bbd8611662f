//! Reading and writing S21 traces and fit reports.
//!
//! Trace files are CSV with headers `freq_Hz,re,im` (complex quadratures)
//! or `freq_Hz,mag_dB,phase_rad` (polar, 20·log10 magnitude). Numeric
//! output uses Rust's shortest-round-trip float formatting, so writing and
//! re-reading a trace reproduces the samples bit for bit and reruns are
//! byte-identical.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{PowerSweepTable, ResonanceFitResult, S21Trace};
use crate::error::{CqedError, Result};

/// On-disk representation of the complex samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    /// Columns freq_Hz, re, im.
    ReIm,
    /// Columns freq_Hz, mag_dB, phase_rad with mag_dB = 20·log10|S21|.
    DbPhase,
}

impl TraceFormat {
    fn header(self) -> [&'static str; 3] {
        match self {
            TraceFormat::ReIm => ["freq_Hz", "re", "im"],
            TraceFormat::DbPhase => ["freq_Hz", "mag_dB", "phase_rad"],
        }
    }
}

/// Read a trace from CSV. The header must match the declared format; the
/// power annotation (if any) is supplied by the caller, not the file.
pub fn read_trace_csv<R: Read>(
    reader: R,
    format: TraceFormat,
    origin: &str,
    power_dbm: Option<f64>,
) -> Result<S21Trace> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let expected = format.header();
    let headers = csv_reader
        .headers()
        .map_err(|e| CqedError::parse(origin, e.to_string()))?;
    let found: Vec<&str> = headers.iter().collect();
    if found != expected {
        return Err(CqedError::parse(
            origin,
            format!(
                "expected header {} but found {}",
                expected.join(","),
                found.join(",")
            ),
        ));
    }

    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for (line, record) in csv_reader.records().enumerate() {
        let record = record.map_err(|e| CqedError::parse(origin, e.to_string()))?;
        if record.len() != 3 {
            return Err(CqedError::parse(
                origin,
                format!("row {} has {} fields, expected 3", line + 2, record.len()),
            ));
        }
        let field = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| {
                CqedError::parse(
                    origin,
                    format!(
                        "row {}, column {}: '{}' is not a number",
                        line + 2,
                        expected[i],
                        &record[i]
                    ),
                )
            })
        };
        freqs.push(field(0)?);
        values.push(match format {
            TraceFormat::ReIm => Complex64::new(field(1)?, field(2)?),
            TraceFormat::DbPhase => {
                Complex64::from_polar(10f64.powf(field(1)? / 20.0), field(2)?)
            }
        });
    }
    S21Trace::new(freqs, values, power_dbm)
}

/// Write a trace as `freq_Hz,re,im` CSV (shortest-round-trip floats, so the
/// samples survive a write/read cycle exactly).
pub fn write_trace_csv<W: Write>(trace: &S21Trace, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "freq_Hz,re,im")?;
    for (f, z) in trace.freqs.iter().zip(&trace.values) {
        writeln!(out, "{},{},{}", f, z.re, z.im)?;
    }
    Ok(())
}

/// Human-readable fit report: one parameter per line with its standard
/// error, then the derived internal quality factor and residual level.
pub fn fit_report_text(result: &ResonanceFitResult) -> String {
    let m = &result.model;
    let e = &result.stderr;
    let mut text = String::from("resonance fit (notch model)\n");
    let mut line = |name: &str, value: f64, err: f64, unit: &str| {
        text.push_str(&format!(
            "  {name:<10} = {value:.9e} ± {err:.3e} {unit}\n"
        ));
    };
    line("f_r", m.f_r, e.f_r, "Hz");
    line("Q_l", m.q_l, e.q_l, "");
    line("|Q_c|", m.abs_q_c, e.abs_q_c, "");
    line("phi", m.phi, e.phi, "rad");
    line("a", m.a, e.a, "");
    line("alpha_env", m.alpha_env, e.alpha_env, "rad");
    line("tau", m.tau, e.tau, "s");
    text.push_str(&format!("  {:<10} = {:.9e}\n", "Q_i", result.q_i));
    text.push_str(&format!(
        "  {:<10} = {:.3e}\n",
        "rms", result.residual_rms
    ));
    text
}

/// Header for [`fit_csv_row`].
pub fn fit_csv_header() -> &'static str {
    "f_r_Hz,Q_l,abs_Q_c,phi_rad,a,alpha_env_rad,tau_s,Q_i,\
     f_r_stderr_Hz,Q_l_stderr,abs_Q_c_stderr,phi_stderr,a_stderr,\
     alpha_env_stderr,tau_stderr,residual_rms"
}

/// One fit as a CSV row (fixed 9-digit scientific formatting, so reruns are
/// byte-identical).
pub fn fit_csv_row(result: &ResonanceFitResult) -> String {
    let m = &result.model;
    let e = &result.stderr;
    format!(
        "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},\
         {:.3e},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e},{:.3e}",
        m.f_r,
        m.q_l,
        m.abs_q_c,
        m.phi,
        m.a,
        m.alpha_env,
        m.tau,
        result.q_i,
        e.f_r,
        e.q_l,
        e.abs_q_c,
        e.phi,
        e.a,
        e.alpha_env,
        e.tau,
        result.residual_rms
    )
}

/// Write a power-sweep table as CSV (`power_dbm,Q_i,Q_c,f_r_Hz`), sorted as
/// produced by the batch fit.
pub fn write_power_sweep_csv<W: Write>(
    table: &PowerSweepTable,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "power_dbm,Q_i,Q_c,f_r_Hz")?;
    for row in &table.rows {
        writeln!(
            out,
            "{:.3},{:.9e},{:.9e},{:.9e}",
            row.power_dbm, row.q_i, row.q_c, row.f_r
        )?;
    }
    Ok(())
}
