//! `cqedkit` — command-line front end for the quantization and readout
//! toolkit.
//!
//! One binary, five subcommands:
//!
//! - `quantize`: netlist → capacitance-matrix reduction → transmon spectrum
//!   → dispersive readout parameters, as a text report plus CSV.
//! - `sweep`: χ versus Josephson inductance (the flux-tuning axis) as CSV.
//! - `fit-s21`: notch-resonator circle fit of a measured or synthetic trace.
//! - `qnd`: detection statistics of the repeated-interrogation photon
//!   counter, optionally Monte-Carlo validated.
//! - `cpw`: coplanar-waveguide resonator electricals from planar geometry.
//!
//! Configuration lives in a versioned JSON document (`schema_version: 1`);
//! paths inside it resolve relative to the document's directory, and a few
//! flags override individual entries. All output uses fixed units — GHz,
//! MHz, fF, nH, Ω, µs — and fixed formatting, so reruns are byte-identical.
//!
//! Exit codes: 0 success; 1 numerical failure on well-formed input (fit did
//! not converge, no resonance, unphysical fit, singular operating point);
//! 2 input problems (I/O, parse, validation, singular capacitance matrix).

// As in the library: `!(v > 0.0)` instead of `v <= 0.0` so NaN fails too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use cqedkit_core::cpw::{analyze_cpw, lumped_equivalent, CpwGeometry};
use cqedkit_core::dispersive::{
    analyze, kerr_anharmonicities, kerr_from_epr, sweep_chi_vs_lj, write_sweep_csv,
    CoupledSystem, DispersiveResult, EprInput,
};
use cqedkit_core::netlist::{build_matrices, reduce_to_lom, CircuitNetlist};
use cqedkit_core::qnd::{
    detection_statistics, qnd_csv_header, qnd_csv_row, qnd_report_text, run_monte_carlo,
    QndProtocol,
};
use cqedkit_core::s21::{
    fit_csv_header, fit_csv_row, fit_report_text, fit_resonance, read_trace_csv, TraceFormat,
};
use cqedkit_core::transmon::{
    diagonalize, ej_of_flux, ic_to_lj, lj_to_ej, SquidParams, TransmonParams, TransmonSpectrum,
};
use cqedkit_core::{CqedError, Result};

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "cqedkit",
    version,
    about = "Circuit-QED quantization and readout analysis",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize a lumped circuit: E_C from the capacitance matrix, transmon
    /// spectrum, coupling g, and dispersive shift χ.
    Quantize(ProjectArgs),
    /// Sweep χ against Josephson inductance and emit CSV rows for plotting.
    Sweep(SweepArgs),
    /// Fit a notch-type S21 trace and report f_r, Q_l, |Q_c|, Q_i.
    FitS21(FitArgs),
    /// Detection statistics of the k-of-N repeated-interrogation photon
    /// counter.
    Qnd(QndArgs),
    /// CPW resonator electricals (Z0, λ/4 frequency, lumped equivalent)
    /// from planar geometry.
    Cpw(CpwArgs),
}

/// Flags shared by the config-driven commands. Junction overrides replace
/// the config's parameterization outright, so the exactly-one rule applies
/// to them too.
#[derive(Args)]
struct ProjectArgs {
    /// Project configuration document (JSON, schema_version 1).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the junction with an inductance in nH.
    #[arg(long, value_name = "NH")]
    lj_nh: Option<f64>,
    /// Override the junction with a critical current in nA.
    #[arg(long, value_name = "NA")]
    ic_na: Option<f64>,
    /// Override the junction with a Josephson energy in GHz.
    #[arg(long, value_name = "GHZ")]
    ej_ghz: Option<f64>,
    /// Override the dressed readout frequency in GHz.
    #[arg(long, value_name = "GHZ")]
    readout_ghz: Option<f64>,
    /// Override the SQUID flux bias in units of Φ0 (needs squid settings in
    /// the config).
    #[arg(long, value_name = "PHI0")]
    flux: Option<f64>,
    /// Override the output directory (resolved from the working directory).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    project: ProjectArgs,
    /// Override the sweep start, nH.
    #[arg(long, value_name = "NH")]
    lj_start_nh: Option<f64>,
    /// Override the sweep stop, nH.
    #[arg(long, value_name = "NH")]
    lj_stop_nh: Option<f64>,
    /// Override the number of grid points.
    #[arg(long, value_name = "N")]
    points: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Trace CSV: `freq_Hz,re,im` or `freq_Hz,mag_dB,phase_rad`.
    trace: PathBuf,
    /// Column convention of the trace file.
    #[arg(long, value_enum, default_value_t = FitFormat::ReIm)]
    format: FitFormat,
    /// Probe power recorded with the trace, dBm (annotation only).
    #[arg(long, value_name = "DBM")]
    power_dbm: Option<f64>,
    /// Also append the fit as a CSV row to this file (header written when
    /// the file is new).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum FitFormat {
    /// freq_Hz,re,im
    ReIm,
    /// freq_Hz,mag_dB,phase_rad
    DbPhase,
}

impl From<FitFormat> for TraceFormat {
    fn from(f: FitFormat) -> TraceFormat {
        match f {
            FitFormat::ReIm => TraceFormat::ReIm,
            FitFormat::DbPhase => TraceFormat::DbPhase,
        }
    }
}

#[derive(Args)]
struct QndArgs {
    /// Dispersive phase rate ξ in rad/s (φ = 2·n·ξ·t).
    #[arg(long, value_name = "RAD_PER_S")]
    xi: f64,
    /// Ramsey interrogation time per repetition, seconds.
    #[arg(long, value_name = "S")]
    time_s: f64,
    /// Photon number present during interrogation.
    #[arg(long, default_value_t = 1)]
    photons: u32,
    /// Number of repeated interrogations N.
    #[arg(long, default_value_t = 5)]
    reps: u32,
    /// Detection threshold k (declare a photon on ≥ k clicks); defaults to
    /// N, the unanimity rule.
    #[arg(long, value_name = "K")]
    threshold: Option<u32>,
    /// Dark-click probability per shot, P(read e | g).
    #[arg(long, default_value_t = 0.0)]
    eps_ge: f64,
    /// Missed-click probability per shot, P(read g | e).
    #[arg(long, default_value_t = 0.0)]
    eps_eg: f64,
    /// Validate the analytic rates against this many Monte-Carlo shots.
    #[arg(long, value_name = "N")]
    shots: Option<u64>,
    /// Random seed for the Monte-Carlo run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit unanimity-rule rows for N = 1..=this instead of the single
    /// configured protocol (the exponential-suppression curve).
    #[arg(long, value_name = "N_MAX")]
    sweep_reps: Option<u32>,
    /// Write the CSV here instead of printing it after the report.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CpwArgs {
    /// Read the geometry from this project configuration's
    /// resonator_geometry section (flags below override field by field).
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Center-trace width, µm.
    #[arg(long, value_name = "UM")]
    width_um: Option<f64>,
    /// Trace-to-ground gap (one side), µm.
    #[arg(long, value_name = "UM")]
    gap_um: Option<f64>,
    /// Substrate relative permittivity.
    #[arg(long, value_name = "EPS")]
    eps_r: Option<f64>,
    /// Resonator length (λ/4 section), mm.
    #[arg(long, value_name = "MM")]
    length_mm: Option<f64>,
    /// Coupling capacitor loading the resonator, fF (repeatable).
    #[arg(long = "coupling-ff", value_name = "FF")]
    couplings_ff: Vec<f64>,
    /// Also report the lumped equivalent capacitance at this frequency, GHz.
    #[arg(long, value_name = "GHZ")]
    at_ghz: Option<f64>,
}

// ---------------------------------------------------------------------------
// Project configuration (JSON, schema_version 1)
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectConfig {
    schema_version: u32,
    /// Netlist path, relative to this document.
    netlist: String,
    junction: JunctionSpec,
    #[serde(rename = "readout_freq_GHz")]
    readout_freq_ghz: f64,
    /// Flux-tunable junction: the junction energy above acts as E_J_max.
    #[serde(default)]
    squid: Option<SquidSpec>,
    /// Energy-participation input path, relative to this document.
    #[serde(default)]
    epr: Option<String>,
    #[serde(default)]
    resonator_geometry: Option<GeometrySpec>,
    #[serde(default)]
    sweep: Option<SweepSpec>,
    /// Where CSV output lands, relative to this document.
    #[serde(default = "default_output_dir")]
    output_dir: String,
    /// Names of the qubit/resonator nodes; inferred from the netlist (the
    /// junction's node, and the one remaining active node) when omitted.
    #[serde(default)]
    qubit_node: Option<String>,
    #[serde(default)]
    resonator_node: Option<String>,
}

fn default_output_dir() -> String {
    "out".into()
}

/// Exactly one of the three junction parameterizations.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct JunctionSpec {
    #[serde(rename = "lj_nH", default)]
    lj_nh: Option<f64>,
    #[serde(rename = "ic_nA", default)]
    ic_na: Option<f64>,
    #[serde(rename = "ej_GHz", default)]
    ej_ghz: Option<f64>,
}

impl JunctionSpec {
    /// Josephson energy in Hz; errors unless exactly one field is set.
    fn e_j(&self) -> Result<f64> {
        match (self.lj_nh, self.ic_na, self.ej_ghz) {
            (Some(lj), None, None) => lj_to_ej(lj * 1e-9),
            (None, Some(ic), None) => lj_to_ej(ic_to_lj(ic * 1e-9)?),
            (None, None, Some(ej)) => {
                if !(ej > 0.0) || !ej.is_finite() {
                    return Err(CqedError::Validation(format!(
                        "Josephson energy must be positive, got {ej} GHz"
                    )));
                }
                Ok(ej * 1e9)
            }
            (None, None, None) => Err(CqedError::Validation(
                "junction needs one of lj_nH, ic_nA, ej_GHz".into(),
            )),
            _ => Err(CqedError::Validation(
                "junction must give exactly one of lj_nH, ic_nA, ej_GHz".into(),
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SquidSpec {
    asymmetry: f64,
    /// External flux in units of Φ0.
    flux: f64,
    #[serde(rename = "mutual_coupling_A_per_Phi0")]
    mutual_coupling: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometrySpec {
    trace_width_um: f64,
    gap_um: f64,
    substrate_eps_r: f64,
    length_mm: f64,
    #[serde(default)]
    substrate_thickness_um: Option<f64>,
}

impl GeometrySpec {
    fn to_geometry(&self) -> CpwGeometry {
        CpwGeometry {
            trace_width: self.trace_width_um * 1e-6,
            gap: self.gap_um * 1e-6,
            substrate_eps_r: self.substrate_eps_r,
            length: self.length_mm * 1e-3,
            substrate_thickness: self.substrate_thickness_um.map(|t| t * 1e-6),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSpec {
    #[serde(rename = "lj_start_nH")]
    lj_start_nh: f64,
    #[serde(rename = "lj_stop_nH")]
    lj_stop_nh: f64,
    points: usize,
}

fn load_config(path: &Path) -> Result<ProjectConfig> {
    let text = fs::read_to_string(path).map_err(|e| CqedError::io(path.display().to_string(), e))?;
    let config: ProjectConfig = serde_json::from_str(&text)
        .map_err(|e| CqedError::parse(path.display().to_string(), e.to_string()))?;
    if config.schema_version != 1 {
        return Err(CqedError::Validation(format!(
            "unsupported schema_version {} in '{}' (this build reads version 1)",
            config.schema_version,
            path.display()
        )));
    }
    Ok(config)
}

/// Directory the config lives in; document-relative paths resolve here.
fn config_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

// ---------------------------------------------------------------------------
// Config → coupled system
// ---------------------------------------------------------------------------

/// Everything `quantize` and `sweep` share: the reduced circuit with the
/// transmon pinned at the configured junction energy.
struct Project {
    config: ProjectConfig,
    system: CoupledSystem,
    spectrum: TransmonSpectrum,
    /// Junction energy after any SQUID flux tuning, Hz.
    e_j: f64,
    out_dir: PathBuf,
}

/// Qubit node = the junction's non-ground node; resonator node = the one
/// remaining active node. Anything more elaborate needs explicit
/// `qubit_node`/`resonator_node` entries in the config.
fn infer_mode_nodes(netlist: &CircuitNetlist) -> Result<(String, String)> {
    let junction = match netlist.josephson.as_slice() {
        [j] => j,
        _ => {
            return Err(CqedError::Validation(
                "node inference needs exactly one junction; set qubit_node and resonator_node \
                 in the config"
                    .into(),
            ))
        }
    };
    let qubit = if junction.node_a == netlist.ground {
        &junction.node_b
    } else if junction.node_b == netlist.ground {
        &junction.node_a
    } else {
        return Err(CqedError::Validation(
            "junction is not grounded; set qubit_node and resonator_node in the config".into(),
        ));
    };
    let mut others = netlist
        .nodes
        .iter()
        .filter(|n| *n != &netlist.ground && *n != qubit);
    match (others.next(), others.next()) {
        (Some(resonator), None) => Ok((qubit.clone(), resonator.clone())),
        _ => Err(CqedError::Validation(
            "could not infer the resonator node (need exactly one active node besides the \
             qubit); set qubit_node and resonator_node in the config"
                .into(),
        )),
    }
}

fn load_project(args: &ProjectArgs) -> Result<Project> {
    let config = load_config(&args.config)?;
    let dir = config_dir(&args.config);

    let overrides = [
        args.lj_nh.map(|v| JunctionSpec { lj_nh: Some(v), ..Default::default() }),
        args.ic_na.map(|v| JunctionSpec { ic_na: Some(v), ..Default::default() }),
        args.ej_ghz.map(|v| JunctionSpec { ej_ghz: Some(v), ..Default::default() }),
    ];
    let mut override_iter = overrides.into_iter().flatten();
    let junction_override = (override_iter.next(), override_iter.next());
    let junction = match &junction_override {
        (None, _) => &config.junction,
        (Some(o), None) => o,
        (Some(_), Some(_)) => {
            return Err(CqedError::Validation(
                "give at most one of --lj-nh, --ic-na, --ej-ghz".into(),
            ))
        }
    };
    let mut e_j = junction.e_j()?;

    if let Some(squid) = &config.squid {
        let params = SquidParams {
            e_j_max: e_j,
            asymmetry: squid.asymmetry,
            flux: args.flux.unwrap_or(squid.flux),
            mutual_coupling: squid.mutual_coupling,
        };
        e_j = ej_of_flux(&params)?;
    } else if args.flux.is_some() {
        return Err(CqedError::Validation(
            "--flux needs squid settings in the config".into(),
        ));
    }

    let netlist = CircuitNetlist::from_file(&dir.join(&config.netlist))?;
    let (qubit_node, resonator_node) = match (&config.qubit_node, &config.resonator_node) {
        (Some(q), Some(r)) => (q.clone(), r.clone()),
        (None, None) => infer_mode_nodes(&netlist)?,
        _ => {
            return Err(CqedError::Validation(
                "qubit_node and resonator_node must be given together".into(),
            ))
        }
    };
    let matrices = build_matrices(&netlist)?;
    let lom = reduce_to_lom(&matrices, &qubit_node, &resonator_node, None)?;

    let omega_r = args.readout_ghz.unwrap_or(config.readout_freq_ghz) * 1e9;
    let transmon = TransmonParams::new(e_j, lom.e_c);
    let spectrum = diagonalize(&transmon)?;
    let system = CoupledSystem::new(transmon, omega_r, lom);
    system.validate()?;

    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| dir.join(&config.output_dir));
    Ok(Project {
        config,
        system,
        spectrum,
        e_j,
        out_dir,
    })
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CqedError::io(dir.display().to_string(), e))
}

fn write_out(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CqedError::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// quantize
// ---------------------------------------------------------------------------

fn quantize_report(project: &Project, result: &DispersiveResult) -> String {
    let lom = &project.system.lom;
    let s = &project.spectrum;
    let mut text = String::from("quantization report\n");
    text.push_str(&format!(
        "  E_J        = {:.6} GHz ({})\n",
        project.e_j / 1e9,
        if project.config.squid.is_some() {
            "flux-tuned"
        } else {
            "fixed junction"
        }
    ));
    text.push_str(&format!("  E_C        = {:.6} MHz\n", lom.e_c / 1e6));
    text.push_str(&format!("  E_J/E_C    = {:.4}\n", project.e_j / lom.e_c));
    text.push_str(&format!("  C_t_eff    = {:.4} fF\n", lom.c_t_eff / 1e-15));
    text.push_str(&format!("  C_r_eff    = {:.4} fF\n", lom.c_r_eff / 1e-15));
    text.push_str(&format!("  omega_q    = {:.6} GHz\n", s.omega_q / 1e9));
    text.push_str(&format!("  alpha      = {:.4} MHz\n", s.alpha / 1e6));
    text.push_str(&format!(
        "  omega_r    = {:.6} GHz (input)\n",
        project.system.omega_r / 1e9
    ));
    text.push_str(&format!("  g          = {:.4} MHz\n", result.g / 1e6));
    text.push_str(&format!(
        "  delta      = {:+.6} GHz\n",
        result.delta_signed / 1e9
    ));
    text.push_str(&format!(
        "  chi_pert   = {:+.6} MHz\n",
        result.chi_perturbative / 1e6
    ));
    text.push_str(&format!(
        "  chi_exact  = {:+.6} MHz\n",
        result.chi_exact / 1e6
    ));
    text.push_str(&format!(
        "  dispersive = {} (g/|delta| = {:.4})\n",
        result.in_dispersive_regime,
        result.g / result.delta
    ));
    text
}

fn quantize_csv(project: &Project, result: &DispersiveResult) -> String {
    let lom = &project.system.lom;
    let s = &project.spectrum;
    let mut csv = String::from(
        "E_J_GHz,E_C_MHz,EJ_over_EC,C_t_eff_fF,C_r_eff_fF,omega_q_GHz,alpha_MHz,\
         omega_r_GHz,g_MHz,delta_GHz,chi_pert_MHz,chi_exact_MHz,dispersive\n",
    );
    csv.push_str(&format!(
        "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{:.9},{}\n",
        project.e_j / 1e9,
        lom.e_c / 1e6,
        project.e_j / lom.e_c,
        lom.c_t_eff / 1e-15,
        lom.c_r_eff / 1e-15,
        s.omega_q / 1e9,
        s.alpha / 1e6,
        project.system.omega_r / 1e9,
        result.g / 1e6,
        result.delta_signed / 1e9,
        result.chi_perturbative / 1e6,
        result.chi_exact / 1e6,
        result.in_dispersive_regime
    ));
    csv
}

fn cmd_quantize(args: &ProjectArgs) -> Result<()> {
    let project = load_project(args)?;
    let result = analyze(&project.system)?;

    print!("{}", quantize_report(&project, &result));

    // The participation-ratio route rides along when the config points at
    // mode data: an independent cross-check of α and χ.
    if let Some(epr_path) = &project.config.epr {
        let input = EprInput::from_file(&config_dir(&args.config).join(epr_path))?;
        let kerr = kerr_from_epr(&input)?;
        let alphas = kerr_anharmonicities(&kerr);
        println!("participation-ratio route ({} modes)", input.mode_names.len());
        for (m, name) in input.mode_names.iter().enumerate() {
            println!("  {name:<10} alpha = {:.4} MHz", alphas[m] / 1e6);
        }
        if kerr.nrows() >= 2 {
            println!("  chi(0,1)   = {:.6} MHz", kerr[(0, 1)] / 1e6);
        }
    }

    create_out_dir(&project.out_dir)?;
    let csv_path = project.out_dir.join("quantize.csv");
    write_out(&csv_path, &quantize_csv(&project, &result))?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let project = load_project(&args.project)?;

    let (start_nh, stop_nh, points) = match (&project.config.sweep, args.lj_start_nh) {
        (Some(spec), _) => (
            args.lj_start_nh.unwrap_or(spec.lj_start_nh),
            args.lj_stop_nh.unwrap_or(spec.lj_stop_nh),
            args.points.unwrap_or(spec.points),
        ),
        (None, Some(start)) => (
            start,
            args.lj_stop_nh.ok_or_else(|| {
                CqedError::Validation("--lj-stop-nh required without a config sweep spec".into())
            })?,
            args.points.unwrap_or(50),
        ),
        (None, None) => {
            return Err(CqedError::Validation(
                "no sweep spec in the config and no --lj-start-nh/--lj-stop-nh given".into(),
            ))
        }
    };
    if points == 0 {
        return Err(CqedError::Validation("sweep needs at least one point".into()));
    }
    if !(start_nh > 0.0) || !(stop_nh > 0.0) {
        return Err(CqedError::Validation(format!(
            "sweep bounds must be positive, got {start_nh}..{stop_nh} nH"
        )));
    }

    let grid: Vec<f64> = if points == 1 {
        vec![start_nh * 1e-9]
    } else {
        (0..points)
            .map(|i| (start_nh + (stop_nh - start_nh) * i as f64 / (points - 1) as f64) * 1e-9)
            .collect()
    };

    let rows = sweep_chi_vs_lj(&project.system, &grid)?;
    let flagged = rows.iter().filter(|r| r.flagged).count();

    create_out_dir(&project.out_dir)?;
    let csv_path = project.out_dir.join("chi_sweep.csv");
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)
        .map_err(|e| CqedError::io(csv_path.display().to_string(), e))?;
    fs::write(&csv_path, csv).map_err(|e| CqedError::io(csv_path.display().to_string(), e))?;

    println!(
        "chi sweep: {} points, L_j = {:.3}..{:.3} nH, delta = {:+.4}..{:+.4} GHz, {} flagged",
        rows.len(),
        start_nh,
        stop_nh,
        rows.first().unwrap().delta / 1e9,
        rows.last().unwrap().delta / 1e9,
        flagged
    );
    println!("wrote {}", csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// fit-s21
// ---------------------------------------------------------------------------

fn cmd_fit_s21(args: &FitArgs) -> Result<()> {
    let file = fs::File::open(&args.trace)
        .map_err(|e| CqedError::io(args.trace.display().to_string(), e))?;
    let trace = read_trace_csv(
        BufReader::new(file),
        args.format.into(),
        &args.trace.display().to_string(),
        args.power_dbm,
    )?;
    let fit = fit_resonance(&trace, None)?;
    print!("{}", fit_report_text(&fit));

    if let Some(out) = &args.out {
        let mut text = if out.exists() {
            fs::read_to_string(out).map_err(|e| CqedError::io(out.display().to_string(), e))?
        } else {
            format!("{}\n", fit_csv_header())
        };
        text.push_str(&fit_csv_row(&fit));
        text.push('\n');
        write_out(out, &text)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// qnd
// ---------------------------------------------------------------------------

fn cmd_qnd(args: &QndArgs) -> Result<()> {
    let base = QndProtocol {
        xi: args.xi,
        interrogation_time: args.time_s,
        n_photons: args.photons,
        repetitions: args.reps,
        readout_error_ge: args.eps_ge,
        readout_error_eg: args.eps_eg,
        decision_threshold: args.threshold.unwrap_or(args.reps),
    };

    let evaluate = |protocol: &QndProtocol| -> Result<_> {
        match args.shots {
            Some(shots) => run_monte_carlo(protocol, shots, args.seed),
            None => detection_statistics(protocol),
        }
    };

    let mut csv = format!("{}\n", qnd_csv_header());
    match args.sweep_reps {
        None => {
            let stats = evaluate(&base)?;
            print!("{}", qnd_report_text(&base, &stats));
            csv.push_str(&qnd_csv_row(&base, &stats));
            csv.push('\n');
        }
        Some(n_max) => {
            if n_max < 1 {
                return Err(CqedError::Validation(
                    "--sweep-reps needs at least one repetition".into(),
                ));
            }
            // Unanimity rows: the false-positive rate should fall as ε^N.
            for n in 1..=n_max {
                let protocol = QndProtocol {
                    repetitions: n,
                    decision_threshold: n,
                    ..base
                };
                let stats = evaluate(&protocol)?;
                csv.push_str(&qnd_csv_row(&protocol, &stats));
                csv.push('\n');
            }
            println!("unanimity sweep, N = 1..{n_max}");
        }
    }

    match &args.out {
        Some(out) => {
            write_out(out, &csv)?;
            println!("wrote {}", out.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cpw
// ---------------------------------------------------------------------------

fn cmd_cpw(args: &CpwArgs) -> Result<()> {
    let from_config = match &args.config {
        Some(path) => Some(load_config(path)?.resonator_geometry.ok_or_else(|| {
            CqedError::Validation(format!(
                "'{}' has no resonator_geometry section",
                path.display()
            ))
        })?),
        None => None,
    };
    let base = from_config.as_ref().map(GeometrySpec::to_geometry);
    let field = |flag: Option<f64>, scale: f64, from_base: Option<f64>, name: &str| {
        flag.map(|v| v * scale).or(from_base).ok_or_else(|| {
            CqedError::Validation(format!("--{name} required without --config"))
        })
    };
    let geometry = CpwGeometry {
        trace_width: field(args.width_um, 1e-6, base.map(|g| g.trace_width), "width-um")?,
        gap: field(args.gap_um, 1e-6, base.map(|g| g.gap), "gap-um")?,
        substrate_eps_r: field(args.eps_r, 1.0, base.map(|g| g.substrate_eps_r), "eps-r")?,
        length: field(args.length_mm, 1e-3, base.map(|g| g.length), "length-mm")?,
        substrate_thickness: base.and_then(|g| g.substrate_thickness),
    };
    let couplings: Vec<f64> = args.couplings_ff.iter().map(|c| c * 1e-15).collect();
    let electrical = analyze_cpw(&geometry, &couplings)?;

    println!("CPW resonator electricals");
    println!("  Z0        = {:.4} ohm", electrical.z0);
    println!("  eps_eff   = {:.4}", electrical.eps_eff);
    println!("  f_bare    = {:.6} GHz", electrical.f_bare / 1e9);
    println!("  C_lumped  = {:.4} fF", electrical.c_lumped / 1e-15);
    println!("  f_loaded  = {:.6} GHz", electrical.f_loaded / 1e9);
    if let Some(at_ghz) = args.at_ghz {
        let c = lumped_equivalent(at_ghz * 1e9, electrical.z0)?;
        println!("  C({at_ghz} GHz) = {:.4} fF", c / 1e-15);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// 1 for numerical failures on well-formed input, 2 for input problems.
fn exit_code(err: &CqedError) -> u8 {
    match err {
        CqedError::Convergence(_)
        | CqedError::Singularity(_)
        | CqedError::NotAResonance(_)
        | CqedError::InvalidFit(_) => 1,
        CqedError::Validation(_)
        | CqedError::SingularMatrix { .. }
        | CqedError::Io { .. }
        | CqedError::Parse { .. } => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Quantize(args) => cmd_quantize(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::FitS21(args) => cmd_fit_s21(args),
        Command::Qnd(args) => cmd_qnd(args),
        Command::Cpw(args) => cmd_cpw(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
