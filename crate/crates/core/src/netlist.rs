//! Lumped-element circuit representation and its reduction to effective
//! oscillator-model coefficients.
//!
//! A circuit is a set of named nodes (one of which is ground) connected by
//! capacitors, Josephson elements, and linear inductors, plus capacitive
//! drive/readout ports. [`build_matrices`] assembles the Maxwell capacitance
//! matrix C (diagonal = sum of capacitances incident on a node, off-diagonal
//! = minus the direct capacitance between two nodes) and the analogous
//! inverse-inductance matrix. [`reduce_to_lom`] inverts C on the active nodes
//! to produce the effective single-mode coefficients:
//!
//! with M = C⁻¹:  C̃_t = 1/M[q,q],  C̃_r = 1/M[r,r],  1/C̃_rt = M[q,r]
//!
//! and the charging energy E_C = e²/(2C̃_t)/h in ordinary Hz. Drive ports are
//! AC-grounded capacitors; a port of capacitance c_d attached at node p gives
//! the dimensionless drive couplings β̃_t = c_d·M[q,p], β̃_r = c_d·M[r,p]
//! (the constrained-source Legendre transform; for a single node this reduces
//! to the familiar voltage divider c_d/C_Σ).
//!
//! File format: JSON with capacitances in femtofarads and inductances in
//! nanohenries, converted to SI on load. See `CircuitNetlist::from_json_str`.

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::constants::{ELEMENTARY_CHARGE, PLANCK_H};
use crate::error::{CqedError, Result};

/// A two-terminal capacitor between named nodes (SI farads).
#[derive(Debug, Clone)]
pub struct Capacitor {
    pub node_a: String,
    pub node_b: String,
    /// Capacitance in farads; strictly positive.
    pub capacitance: f64,
}

/// A Josephson element: nonlinear inductance L_j with its parasitic shunt
/// capacitance C_j. The inductance is *not* part of the linear
/// inverse-inductance matrix (it is the nonlinear element); C_j enters the
/// capacitance matrix like any other capacitor.
#[derive(Debug, Clone)]
pub struct JosephsonElement {
    pub node_a: String,
    pub node_b: String,
    /// Zero-bias Josephson inductance in henries.
    pub l_j: f64,
    /// Parasitic junction capacitance in farads.
    pub c_j: f64,
    /// True if the element is a two-junction SQUID loop (flux-tunable).
    pub is_squid: bool,
}

/// A linear inductor between named nodes (SI henries).
#[derive(Debug, Clone)]
pub struct Inductor {
    pub node_a: String,
    pub node_b: String,
    pub inductance: f64,
}

/// A capacitive port: a coupling capacitor from a node to an AC-grounded
/// line (drive or feedline). Enters the Maxwell diagonal only.
#[derive(Debug, Clone)]
pub struct DrivePort {
    pub node: String,
    /// Coupling capacitance in farads.
    pub capacitance: f64,
    /// Marks the port used for the drive couplings β̃; if no port is marked,
    /// the first listed port is taken as the drive.
    pub is_drive: bool,
}

/// The lumped circuit: named nodes (ground distinguished) plus elements.
#[derive(Debug, Clone)]
pub struct CircuitNetlist {
    /// All node names, including ground.
    pub nodes: Vec<String>,
    /// Name of the ground node; must appear in `nodes`.
    pub ground: String,
    pub capacitors: Vec<Capacitor>,
    pub josephson: Vec<JosephsonElement>,
    pub inductors: Vec<Inductor>,
    pub ports: Vec<DrivePort>,
}

/// Maxwell capacitance and inverse-inductance matrices on the active
/// (non-ground) nodes, in the order given by `node_order`.
#[derive(Debug, Clone)]
pub struct MaxwellMatrices {
    /// Active node names; row/column i of the matrices belongs to
    /// `node_order[i]`.
    pub node_order: Vec<String>,
    /// Symmetric capacitance matrix in farads (positive definite when every
    /// node has a capacitive path to ground).
    pub c: DMatrix<f64>,
    /// Symmetric inverse-inductance matrix in 1/henries (positive
    /// semidefinite); Josephson inductances are excluded.
    pub linv: DMatrix<f64>,
    /// Ports as (active-node index, capacitance, is_drive); kept so the
    /// reduction can form drive couplings.
    pub ports: Vec<(usize, f64, bool)>,
}

/// Effective oscillator-model coefficients from the capacitance-matrix
/// reduction.
#[derive(Debug, Clone, Copy)]
pub struct LomCoefficients {
    /// Effective transmon (qubit-mode) capacitance C̃_t in farads.
    pub c_t_eff: f64,
    /// Effective resonator-mode capacitance C̃_r in farads.
    pub c_r_eff: f64,
    /// Signed inverse coupling capacitance 1/C̃_rt in 1/farads. Zero for a
    /// decoupled (block-diagonal) circuit, which keeps the decoupled limit
    /// exactly representable; the sign is the sign of M[q,r].
    pub c_rt_inv: f64,
    /// Dimensionless drive coupling to the qubit mode (0 without a drive port).
    pub beta_t: f64,
    /// Dimensionless drive coupling to the resonator mode.
    pub beta_r: f64,
    /// Charging energy E_C = e²/(2C̃_t)/h in ordinary Hz.
    pub e_c: f64,
}

impl LomCoefficients {
    /// Signed effective coupling capacitance C̃_rt in farads, or `None` for a
    /// decoupled circuit (1/C̃_rt = 0).
    pub fn c_rt_eff(&self) -> Option<f64> {
        if self.c_rt_inv == 0.0 {
            None
        } else {
            Some(1.0 / self.c_rt_inv)
        }
    }

    /// True when the qubit and resonator modes are capacitively coupled.
    pub fn is_coupled(&self) -> bool {
        self.c_rt_inv != 0.0
    }
}

// ---------------------------------------------------------------------------
// JSON schema (file units: fF and nH)
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct NetlistFile {
    #[serde(default = "default_schema_version")]
    schema_version: u32,
    ground: String,
    nodes: Vec<String>,
    #[serde(default)]
    capacitors: Vec<CapacitorSpec>,
    #[serde(default)]
    josephson: Vec<JosephsonSpec>,
    #[serde(default)]
    inductors: Vec<InductorSpec>,
    #[serde(default)]
    ports: Vec<PortSpec>,
}

fn default_schema_version() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
struct CapacitorSpec {
    node_a: String,
    node_b: String,
    #[serde(rename = "capacitance_fF")]
    capacitance_ff: f64,
}

#[derive(Debug, Deserialize)]
struct JosephsonSpec {
    node_a: String,
    node_b: String,
    #[serde(rename = "lj_nH")]
    lj_nh: f64,
    #[serde(rename = "cj_fF")]
    cj_ff: f64,
    #[serde(default)]
    is_squid: bool,
}

#[derive(Debug, Deserialize)]
struct InductorSpec {
    node_a: String,
    node_b: String,
    #[serde(rename = "inductance_nH")]
    inductance_nh: f64,
}

#[derive(Debug, Deserialize)]
struct PortSpec {
    node: String,
    #[serde(rename = "capacitance_fF")]
    capacitance_ff: f64,
    #[serde(default)]
    is_drive: bool,
}

const FARADS_PER_FF: f64 = 1e-15;
const HENRIES_PER_NH: f64 = 1e-9;

impl CircuitNetlist {
    /// Parse a netlist from its JSON representation (capacitances in fF,
    /// inductances in nH) and validate it. `origin` labels error messages,
    /// typically the file path.
    pub fn from_json_str(json: &str, origin: &str) -> Result<Self> {
        let file: NetlistFile =
            serde_json::from_str(json).map_err(|e| CqedError::parse(origin, e.to_string()))?;
        if file.schema_version != 1 {
            return Err(CqedError::parse(
                origin,
                format!("unsupported schema_version {}", file.schema_version),
            ));
        }
        let netlist = CircuitNetlist {
            nodes: file.nodes,
            ground: file.ground,
            capacitors: file
                .capacitors
                .into_iter()
                .map(|c| Capacitor {
                    node_a: c.node_a,
                    node_b: c.node_b,
                    capacitance: c.capacitance_ff * FARADS_PER_FF,
                })
                .collect(),
            josephson: file
                .josephson
                .into_iter()
                .map(|j| JosephsonElement {
                    node_a: j.node_a,
                    node_b: j.node_b,
                    l_j: j.lj_nh * HENRIES_PER_NH,
                    c_j: j.cj_ff * FARADS_PER_FF,
                    is_squid: j.is_squid,
                })
                .collect(),
            inductors: file
                .inductors
                .into_iter()
                .map(|l| Inductor {
                    node_a: l.node_a,
                    node_b: l.node_b,
                    inductance: l.inductance_nh * HENRIES_PER_NH,
                })
                .collect(),
            ports: file
                .ports
                .into_iter()
                .map(|p| DrivePort {
                    node: p.node,
                    capacitance: p.capacitance_ff * FARADS_PER_FF,
                    is_drive: p.is_drive,
                })
                .collect(),
        };
        netlist.validate()?;
        Ok(netlist)
    }

    /// Load and validate a netlist from a JSON file.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CqedError::io(path.display().to_string(), e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    /// Check the structural invariants: unique node names, ground present,
    /// every element references existing distinct nodes, all values strictly
    /// positive.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(CqedError::Validation("netlist has no nodes".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.nodes {
            if !seen.insert(name.as_str()) {
                return Err(CqedError::Validation(format!("duplicate node '{name}'")));
            }
        }
        if !seen.contains(self.ground.as_str()) {
            return Err(CqedError::Validation(format!(
                "ground node '{}' is not in the node list",
                self.ground
            )));
        }

        let check_edge = |a: &str, b: &str, kind: &str| -> Result<()> {
            if !seen.contains(a) || !seen.contains(b) {
                return Err(CqedError::Validation(format!(
                    "{kind} references unknown node '{}'",
                    if seen.contains(a) { b } else { a }
                )));
            }
            if a == b {
                return Err(CqedError::Validation(format!(
                    "{kind} has both terminals on node '{a}'"
                )));
            }
            Ok(())
        };

        for c in &self.capacitors {
            check_edge(&c.node_a, &c.node_b, "capacitor")?;
            if !(c.capacitance > 0.0) || !c.capacitance.is_finite() {
                return Err(CqedError::Validation(format!(
                    "capacitor {}-{} has nonpositive value {}",
                    c.node_a, c.node_b, c.capacitance
                )));
            }
        }
        for j in &self.josephson {
            check_edge(&j.node_a, &j.node_b, "josephson element")?;
            if !(j.l_j > 0.0) || !j.l_j.is_finite() {
                return Err(CqedError::Validation(format!(
                    "josephson element {}-{} has nonpositive inductance {}",
                    j.node_a, j.node_b, j.l_j
                )));
            }
            if !(j.c_j > 0.0) || !j.c_j.is_finite() {
                return Err(CqedError::Validation(format!(
                    "josephson element {}-{} has nonpositive parasitic capacitance {}",
                    j.node_a, j.node_b, j.c_j
                )));
            }
        }
        for l in &self.inductors {
            check_edge(&l.node_a, &l.node_b, "inductor")?;
            if !(l.inductance > 0.0) || !l.inductance.is_finite() {
                return Err(CqedError::Validation(format!(
                    "inductor {}-{} has nonpositive value {}",
                    l.node_a, l.node_b, l.inductance
                )));
            }
        }
        for p in &self.ports {
            if !seen.contains(p.node.as_str()) {
                return Err(CqedError::Validation(format!(
                    "port references unknown node '{}'",
                    p.node
                )));
            }
            if p.node == self.ground {
                return Err(CqedError::Validation(
                    "port attached directly to ground".into(),
                ));
            }
            if !(p.capacitance > 0.0) || !p.capacitance.is_finite() {
                return Err(CqedError::Validation(format!(
                    "port on '{}' has nonpositive capacitance {}",
                    p.node, p.capacitance
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Matrix assembly
// ---------------------------------------------------------------------------

/// Assemble the Maxwell capacitance matrix and the inverse-inductance matrix
/// on the active (non-ground) nodes.
///
/// Capacitors and Josephson parasitic capacitances add to the diagonal of
/// both their terminals and subtract from the off-diagonal; a terminal on
/// ground contributes to the other terminal's diagonal only. Ports add their
/// coupling capacitance to the diagonal (the line is AC ground). Josephson
/// inductances are excluded from the inverse-inductance matrix.
///
/// Errors with [`CqedError::SingularMatrix`] naming a node if some active
/// node has no capacitive path to ground (the matrix would be singular).
pub fn build_matrices(netlist: &CircuitNetlist) -> Result<MaxwellMatrices> {
    netlist.validate()?;

    let node_order: Vec<String> = netlist
        .nodes
        .iter()
        .filter(|n| **n != netlist.ground)
        .cloned()
        .collect();
    let n = node_order.len();
    if n == 0 {
        return Err(CqedError::Validation(
            "netlist has no active (non-ground) nodes".into(),
        ));
    }
    let index = |name: &str| -> Option<usize> { node_order.iter().position(|n| n == name) };

    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut linv = DMatrix::<f64>::zeros(n, n);

    // Capacitive edges: (node_a, node_b, capacitance). Josephson C_j counts.
    let cap_edges = netlist
        .capacitors
        .iter()
        .map(|cap| (cap.node_a.as_str(), cap.node_b.as_str(), cap.capacitance))
        .chain(
            netlist
                .josephson
                .iter()
                .map(|j| (j.node_a.as_str(), j.node_b.as_str(), j.c_j)),
        );

    for (a, b, value) in cap_edges {
        match (index(a), index(b)) {
            (Some(i), Some(j)) => {
                c[(i, i)] += value;
                c[(j, j)] += value;
                c[(i, j)] -= value;
                c[(j, i)] -= value;
            }
            (Some(i), None) | (None, Some(i)) => c[(i, i)] += value,
            (None, None) => unreachable!("validate() rejects ground-to-ground elements"),
        }
    }

    let mut ports = Vec::with_capacity(netlist.ports.len());
    for p in &netlist.ports {
        // validate() guarantees the port node is active.
        let i = index(&p.node).expect("port node is active");
        c[(i, i)] += p.capacitance;
        ports.push((i, p.capacitance, p.is_drive));
    }

    for l in &netlist.inductors {
        let g = 1.0 / l.inductance;
        match (index(&l.node_a), index(&l.node_b)) {
            (Some(i), Some(j)) => {
                linv[(i, i)] += g;
                linv[(j, j)] += g;
                linv[(i, j)] -= g;
                linv[(j, i)] -= g;
            }
            (Some(i), None) | (None, Some(i)) => linv[(i, i)] += g,
            (None, None) => unreachable!("validate() rejects ground-to-ground elements"),
        }
    }

    // Every active node needs a capacitive path to ground, otherwise C is
    // singular. Union-find over the capacitive graph including ground.
    if let Some(orphan) = find_node_without_ground_path(netlist, &node_order) {
        return Err(CqedError::SingularMatrix { node: orphan });
    }

    Ok(MaxwellMatrices {
        node_order,
        c,
        linv,
        ports,
    })
}

/// Returns the name of an active node with no capacitive path to ground, if
/// any. Ports count as connections to ground (the line is AC-grounded).
fn find_node_without_ground_path(netlist: &CircuitNetlist, active: &[String]) -> Option<String> {
    // Index all nodes; ground is one component seed.
    let all: Vec<&str> = netlist.nodes.iter().map(String::as_str).collect();
    let idx_of = |name: &str| all.iter().position(|n| *n == name).unwrap();
    let mut parent: Vec<usize> = (0..all.len()).collect();

    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    };

    for cap in &netlist.capacitors {
        union(&mut parent, idx_of(&cap.node_a), idx_of(&cap.node_b));
    }
    for j in &netlist.josephson {
        union(&mut parent, idx_of(&j.node_a), idx_of(&j.node_b));
    }
    let ground_idx = idx_of(&netlist.ground);
    for p in &netlist.ports {
        union(&mut parent, idx_of(&p.node), ground_idx);
    }

    let ground_root = find(&mut parent, ground_idx);
    active
        .iter()
        .find(|name| find(&mut parent, idx_of(name)) != ground_root)
        .cloned()
}

// ---------------------------------------------------------------------------
// Reduction
// ---------------------------------------------------------------------------

/// Reduce the Maxwell matrices to effective oscillator-model coefficients for
/// the named qubit and resonator nodes.
///
/// `drive_node`, when given, names the active node whose attached port
/// provides the drive couplings β̃; when `None`, the port marked `is_drive`
/// (or the first listed port) is used, and β̃ = 0 if the circuit has no ports.
pub fn reduce_to_lom(
    matrices: &MaxwellMatrices,
    qubit_node: &str,
    resonator_node: &str,
    drive_node: Option<&str>,
) -> Result<LomCoefficients> {
    let q = matrices
        .node_order
        .iter()
        .position(|n| n == qubit_node)
        .ok_or_else(|| CqedError::Validation(format!("unknown qubit node '{qubit_node}'")))?;
    let r = matrices
        .node_order
        .iter()
        .position(|n| n == resonator_node)
        .ok_or_else(|| {
            CqedError::Validation(format!("unknown resonator node '{resonator_node}'"))
        })?;
    if q == r {
        return Err(CqedError::Validation(
            "qubit and resonator must be distinct nodes".into(),
        ));
    }

    let m = matrices.c.clone().try_inverse().ok_or_else(|| {
        // build_matrices() normally rejects singular assemblies up front;
        // name the qubit node as the entry point for diagnosis.
        CqedError::SingularMatrix {
            node: qubit_node.to_string(),
        }
    })?;

    let c_t_eff = 1.0 / m[(q, q)];
    let c_r_eff = 1.0 / m[(r, r)];
    // Treat coupling entries at the numerical-noise floor of the inversion as
    // exact decoupling so block-diagonal circuits reduce cleanly.
    let noise_floor = f64::EPSILON * m[(q, q)].abs().max(m[(r, r)].abs()) * 1e3;
    let c_rt_inv = if m[(q, r)].abs() <= noise_floor {
        0.0
    } else {
        m[(q, r)]
    };

    let (beta_t, beta_r) = match drive_port(matrices, drive_node)? {
        Some((p, c_d)) => (c_d * m[(q, p)], c_d * m[(r, p)]),
        None => (0.0, 0.0),
    };

    let e_c = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c_t_eff) / PLANCK_H;

    Ok(LomCoefficients {
        c_t_eff,
        c_r_eff,
        c_rt_inv,
        beta_t,
        beta_r,
        e_c,
    })
}

/// Resolve which port supplies the drive couplings: the one attached at
/// `drive_node` when given (error if that node has no port), otherwise the
/// port marked `is_drive`, otherwise the first port, otherwise none.
fn drive_port(
    matrices: &MaxwellMatrices,
    drive_node: Option<&str>,
) -> Result<Option<(usize, f64)>> {
    match drive_node {
        Some(name) => {
            let idx = matrices
                .node_order
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| CqedError::Validation(format!("unknown drive node '{name}'")))?;
            let port = matrices
                .ports
                .iter()
                .find(|(i, _, _)| *i == idx)
                .ok_or_else(|| {
                    CqedError::Validation(format!("drive node '{name}' has no attached port"))
                })?;
            Ok(Some((port.0, port.1)))
        }
        None => Ok(matrices
            .ports
            .iter()
            .find(|(_, _, is_drive)| *is_drive)
            .or_else(|| matrices.ports.first())
            .map(|(i, c, _)| (*i, *c))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, rel_tol: f64) {
        let scale = expected.abs().max(1e-300);
        assert!(
            (actual - expected).abs() / scale <= rel_tol,
            "got {actual:e}, want {expected:e} (rel tol {rel_tol})"
        );
    }

    const FF: f64 = 1e-15;

    /// The two-active-node readout circuit used across the test suite:
    /// transmon node shunted by c_s with junction (C_j) to ground, coupled by
    /// c_g to the readout node (c_r to ground), plus drive (c_d) and feedline
    /// (c_f) ports.
    fn readout_netlist() -> CircuitNetlist {
        CircuitNetlist {
            nodes: vec!["gnd".into(), "transmon".into(), "readout".into()],
            ground: "gnd".into(),
            capacitors: vec![
                Capacitor {
                    node_a: "transmon".into(),
                    node_b: "gnd".into(),
                    capacitance: 87.40 * FF,
                },
                Capacitor {
                    node_a: "transmon".into(),
                    node_b: "readout".into(),
                    capacitance: 3.93 * FF,
                },
                Capacitor {
                    node_a: "readout".into(),
                    node_b: "gnd".into(),
                    capacitance: 404.07 * FF,
                },
            ],
            josephson: vec![JosephsonElement {
                node_a: "transmon".into(),
                node_b: "gnd".into(),
                l_j: 10e-9,
                c_j: 2.0 * FF,
                is_squid: false,
            }],
            inductors: vec![Inductor {
                node_a: "readout".into(),
                node_b: "gnd".into(),
                inductance: 1.705e-9,
            }],
            ports: vec![
                DrivePort {
                    node: "transmon".into(),
                    capacitance: 0.20 * FF,
                    is_drive: true,
                },
                DrivePort {
                    node: "readout".into(),
                    capacitance: 6.41 * FF,
                    is_drive: false,
                },
            ],
        }
    }

    #[test]
    fn single_capacitor_to_ground() {
        let netlist = CircuitNetlist {
            nodes: vec!["gnd".into(), "island".into()],
            ground: "gnd".into(),
            capacitors: vec![Capacitor {
                node_a: "island".into(),
                node_b: "gnd".into(),
                capacitance: 10.0 * FF,
            }],
            josephson: vec![],
            inductors: vec![],
            ports: vec![],
        };
        let m = build_matrices(&netlist).unwrap();
        assert_eq!(m.c.nrows(), 1);
        assert_close(m.c[(0, 0)], 10.0 * FF, 1e-15);
    }

    #[test]
    fn readout_circuit_diagonal_and_offdiagonal() {
        let m = build_matrices(&readout_netlist()).unwrap();
        let q = m.node_order.iter().position(|n| n == "transmon").unwrap();
        let r = m.node_order.iter().position(|n| n == "readout").unwrap();
        // Transmon diagonal: c_s + C_j + c_g + c_d = 87.40 + 2 + 3.93 + 0.20 fF.
        assert_close(m.c[(q, q)], 93.53 * FF, 1e-12);
        // Readout diagonal: c_r + c_g + c_f = 404.07 + 3.93 + 6.41 fF.
        assert_close(m.c[(r, r)], 414.41 * FF, 1e-12);
        // Off-diagonal: minus the direct coupling capacitance.
        assert_close(m.c[(q, r)], -3.93 * FF, 1e-12);
        assert_close(m.c[(r, q)], -3.93 * FF, 1e-12);
        // Inverse-inductance: only the linear resonator inductor; the
        // Josephson inductance is excluded.
        assert_close(m.linv[(r, r)], 1.0 / 1.705e-9, 1e-12);
        assert_eq!(m.linv[(q, q)], 0.0);
    }

    #[test]
    fn matrix_is_symmetric_and_positive_definite() {
        let m = build_matrices(&readout_netlist()).unwrap();
        assert_eq!(m.c[(0, 1)], m.c[(1, 0)]);
        let eig = m.c.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&ev| ev > 0.0));
    }

    #[test]
    fn reduction_reproduces_charging_energy() {
        let m = build_matrices(&readout_netlist()).unwrap();
        let lom = reduce_to_lom(&m, "transmon", "readout", None).unwrap();
        // Independently computed from the hand-inverted 2x2 matrix.
        assert_close(lom.e_c, 207.184_337e6, 1e-6);
        assert_close(lom.c_t_eff, 93.492_730_4e-15, 1e-6);
        assert_close(lom.c_r_eff, 414.244_867e-15, 1e-6);
        // 1/C_rt = M[q,r]: positive because the Maxwell off-diagonal is
        // negative and the cofactor flips the sign.
        assert_close(1.0 / lom.c_rt_inv, 9.858_606_2e-12, 1e-6);
        assert!(lom.is_coupled());
    }

    #[test]
    fn drive_couplings_from_marked_port() {
        let m = build_matrices(&readout_netlist()).unwrap();
        let lom = reduce_to_lom(&m, "transmon", "readout", None).unwrap();
        // beta_t = c_d * M[q,q] = c_d / C_t_eff; drive leakage into the
        // resonator is smaller by the coupling ratio.
        assert_close(lom.beta_t, 0.20 * FF / lom.c_t_eff, 1e-12);
        assert_close(lom.beta_r, 0.20 * FF * lom.c_rt_inv, 1e-12);
        // Explicit drive node agrees with the marked-port default.
        let explicit = reduce_to_lom(&m, "transmon", "readout", Some("transmon")).unwrap();
        assert_eq!(lom.beta_t, explicit.beta_t);
        assert_eq!(lom.beta_r, explicit.beta_r);
    }

    #[test]
    fn block_diagonal_circuit_is_exactly_decoupled() {
        let netlist = CircuitNetlist {
            nodes: vec!["gnd".into(), "a".into(), "b".into()],
            ground: "gnd".into(),
            capacitors: vec![
                Capacitor {
                    node_a: "a".into(),
                    node_b: "gnd".into(),
                    capacitance: 50.0 * FF,
                },
                Capacitor {
                    node_a: "b".into(),
                    node_b: "gnd".into(),
                    capacitance: 300.0 * FF,
                },
            ],
            josephson: vec![],
            inductors: vec![],
            ports: vec![],
        };
        let m = build_matrices(&netlist).unwrap();
        let lom = reduce_to_lom(&m, "a", "b", None).unwrap();
        assert_eq!(lom.c_rt_inv, 0.0);
        assert!(lom.c_rt_eff().is_none());
        assert!(!lom.is_coupled());
        assert_close(lom.c_t_eff, 50.0 * FF, 1e-12);
        assert_close(lom.c_r_eff, 300.0 * FF, 1e-12);
    }

    #[test]
    fn three_node_reduction_matches_hand_inverse() {
        // Chain gnd - a - b - c - gnd with distinct couplings; compare the
        // reduction against an explicitly hand-built inverse.
        let netlist = CircuitNetlist {
            nodes: vec!["gnd".into(), "a".into(), "b".into(), "c".into()],
            ground: "gnd".into(),
            capacitors: vec![
                Capacitor {
                    node_a: "a".into(),
                    node_b: "gnd".into(),
                    capacitance: 70.0 * FF,
                },
                Capacitor {
                    node_a: "a".into(),
                    node_b: "b".into(),
                    capacitance: 5.0 * FF,
                },
                Capacitor {
                    node_a: "b".into(),
                    node_b: "gnd".into(),
                    capacitance: 120.0 * FF,
                },
                Capacitor {
                    node_a: "b".into(),
                    node_b: "c".into(),
                    capacitance: 8.0 * FF,
                },
                Capacitor {
                    node_a: "c".into(),
                    node_b: "gnd".into(),
                    capacitance: 250.0 * FF,
                },
            ],
            josephson: vec![],
            inductors: vec![],
            ports: vec![],
        };
        let m = build_matrices(&netlist).unwrap();
        let inv = m.c.clone().try_inverse().unwrap();
        let a = m.node_order.iter().position(|n| n == "a").unwrap();
        let c = m.node_order.iter().position(|n| n == "c").unwrap();
        let lom = reduce_to_lom(&m, "a", "c", None).unwrap();
        assert_close(lom.c_t_eff, 1.0 / inv[(a, a)], 1e-14);
        assert_close(lom.c_r_eff, 1.0 / inv[(c, c)], 1e-14);
        assert_close(lom.c_rt_inv, inv[(a, c)], 1e-14);
    }

    #[test]
    fn disconnected_node_is_reported_by_name() {
        let netlist = CircuitNetlist {
            nodes: vec!["gnd".into(), "a".into(), "floating".into()],
            ground: "gnd".into(),
            capacitors: vec![Capacitor {
                node_a: "a".into(),
                node_b: "gnd".into(),
                capacitance: 10.0 * FF,
            }],
            josephson: vec![],
            // Only an inductor to ground: no *capacitive* path, so the
            // capacitance matrix is singular.
            inductors: vec![Inductor {
                node_a: "floating".into(),
                node_b: "gnd".into(),
                inductance: 2e-9,
            }],
            ports: vec![],
        };
        match build_matrices(&netlist) {
            Err(CqedError::SingularMatrix { node }) => assert_eq!(node, "floating"),
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn nonpositive_values_are_rejected() {
        let mut netlist = readout_netlist();
        netlist.capacitors[0].capacitance = -FF;
        assert!(matches!(
            build_matrices(&netlist),
            Err(CqedError::Validation(_))
        ));
        let mut netlist = readout_netlist();
        netlist.josephson[0].l_j = 0.0;
        assert!(matches!(
            build_matrices(&netlist),
            Err(CqedError::Validation(_))
        ));
    }

    #[test]
    fn unknown_nodes_are_rejected() {
        let m = build_matrices(&readout_netlist()).unwrap();
        assert!(matches!(
            reduce_to_lom(&m, "nope", "readout", None),
            Err(CqedError::Validation(_))
        ));
        assert!(matches!(
            reduce_to_lom(&m, "transmon", "readout", Some("nowhere")),
            Err(CqedError::Validation(_))
        ));
    }

    #[test]
    fn json_round_trip_with_femtofarad_units() {
        let json = r#"{
            "schema_version": 1,
            "ground": "gnd",
            "nodes": ["gnd", "q", "r"],
            "capacitors": [
                {"node_a": "q", "node_b": "gnd", "capacitance_fF": 87.40},
                {"node_a": "q", "node_b": "r", "capacitance_fF": 3.93},
                {"node_a": "r", "node_b": "gnd", "capacitance_fF": 404.07}
            ],
            "josephson": [
                {"node_a": "q", "node_b": "gnd", "lj_nH": 10.0, "cj_fF": 2.0}
            ],
            "ports": [
                {"node": "q", "capacitance_fF": 0.20, "is_drive": true},
                {"node": "r", "capacitance_fF": 6.41}
            ]
        }"#;
        let netlist = CircuitNetlist::from_json_str(json, "inline").unwrap();
        assert_close(netlist.capacitors[0].capacitance, 87.40e-15, 1e-12);
        assert_close(netlist.josephson[0].l_j, 10e-9, 1e-12);
        let m = build_matrices(&netlist).unwrap();
        let lom = reduce_to_lom(&m, "q", "r", None).unwrap();
        assert_close(lom.e_c, 207.184_337e6, 1e-6);
    }

    #[test]
    fn bad_json_is_a_parse_error() {
        assert!(matches!(
            CircuitNetlist::from_json_str("{not json", "inline"),
            Err(CqedError::Parse { .. })
        ));
    }
}
