//! Track model ingestion and preparation for the time integrators.
//!
//! A [`RawModel`] holds the matrices and topology exactly as supplied by an
//! external FE code. [`TrackModel::build`] lumps the mass, removes blocked
//! dofs, statically condenses the massless ones and splits the condensed
//! stiffness and damping into element blocks for the explicit solver.

mod condense;
pub mod io;
mod lump;
mod rail_line;
mod track;

use nalgebra_sparse::{CooMatrix, CsrMatrix};

pub use condense::condense_massless;
pub use io::{load_model, load_model_dir, write_model_dir, ModelFiles};
pub use lump::lump_mass;
pub use rail_line::{RailLine, RailNode, RailSegment};
pub use track::{Condensation, DofSlot, ElementBlock, TrackModel};

use crate::error::{Error, Result};

/// One `(row, col, value)` matrix entry, 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DofKind {
    Translation,
    Rotation,
}

/// A rail node: arclength position plus its vertical and rotational dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    /// Arclength along the rail line [m].
    pub s: f64,
    pub dof_w: Option<usize>,
    pub dof_theta: Option<usize>,
    pub blocked_w: bool,
    pub blocked_theta: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementRecord {
    pub id: usize,
    pub node_a: usize,
    pub node_b: usize,
}

/// Spring-damper between a vertical dof and the ground, with an optional gap.
///
/// Displacements are positive downward. With `gap > 0` the support carries
/// no load until the downward deflection reaches the gap, and the damper only
/// acts while it is closed. `gap == 0` is an ordinary bilateral linear support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportElement {
    pub dof: usize,
    /// [N/m]
    pub stiffness: f64,
    /// [N s/m]
    pub damping: f64,
    /// [m]
    pub gap: f64,
}

impl SupportElement {
    pub fn new(dof: usize, stiffness: f64, damping: f64, gap: f64) -> Result<Self> {
        for (name, v) in [("stiffness", stiffness), ("damping", damping), ("gap", gap)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "support on dof {dof}: {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(SupportElement {
            dof,
            stiffness,
            damping,
            gap,
        })
    }

    pub fn linear(dof: usize, stiffness: f64, damping: f64) -> Self {
        SupportElement {
            dof,
            stiffness,
            damping,
            gap: 0.0,
        }
    }

    #[inline]
    pub fn is_closed(&self, w: f64) -> bool {
        self.gap == 0.0 || w >= self.gap
    }

    /// Force exerted on the rail by the support, resisting downward motion.
    #[inline]
    pub fn force(&self, w: f64, w_dot: f64) -> f64 {
        if self.is_closed(w) {
            self.stiffness * (w - self.gap) + self.damping * w_dot
        } else {
            0.0
        }
    }
}

/// The model as ingested: global matrices in triplet form plus topology.
#[derive(Debug, Clone, Default)]
pub struct RawModel {
    pub n_dofs: usize,
    pub mass: Vec<Triplet>,
    pub damping: Vec<Triplet>,
    pub stiffness: Vec<Triplet>,
    pub nodes: Vec<NodeRecord>,
    pub elements: Vec<ElementRecord>,
    /// Supports keyed by original dof index.
    pub supports: Vec<SupportElement>,
}

/// Relative asymmetry tolerated in the mass and stiffness matrices.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

pub(crate) fn assemble(n: usize, triplets: &[Triplet]) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for t in triplets {
        coo.push(t.row, t.col, t.value);
    }
    CsrMatrix::from(&coo)
}

impl RawModel {
    pub fn assembled_mass(&self) -> CsrMatrix<f64> {
        assemble(self.n_dofs, &self.mass)
    }

    pub fn assembled_stiffness(&self) -> CsrMatrix<f64> {
        assemble(self.n_dofs, &self.stiffness)
    }

    pub fn assembled_damping(&self) -> CsrMatrix<f64> {
        assemble(self.n_dofs, &self.damping)
    }

    /// Blocked flag per original dof.
    pub fn blocked(&self) -> Vec<bool> {
        let mut blocked = vec![false; self.n_dofs];
        for node in &self.nodes {
            if let (Some(d), true) = (node.dof_w, node.blocked_w) {
                blocked[d] = true;
            }
            if let (Some(d), true) = (node.dof_theta, node.blocked_theta) {
                blocked[d] = true;
            }
        }
        blocked
    }

    /// Dofs listed as rail rotations are rotational; everything else translates.
    pub fn dof_kinds(&self) -> Vec<DofKind> {
        let mut kinds = vec![DofKind::Translation; self.n_dofs];
        for node in &self.nodes {
            if let Some(d) = node.dof_theta {
                kinds[d] = DofKind::Rotation;
            }
        }
        kinds
    }

    /// Every dof index referenced anywhere is below `n_dofs`, and elements
    /// refer to known nodes.
    pub fn check_indices(&self) -> Result<()> {
        let n = self.n_dofs;
        let check = |what: &'static str, index: usize| {
            if index >= n {
                Err(Error::IndexOutOfRange { what, index, bound: n })
            } else {
                Ok(())
            }
        };
        for t in self.mass.iter().chain(&self.damping).chain(&self.stiffness) {
            check("matrix row", t.row)?;
            check("matrix column", t.col)?;
        }
        for node in &self.nodes {
            if let Some(d) = node.dof_w {
                check("node dof_w", d)?;
            }
            if let Some(d) = node.dof_theta {
                check("node dof_theta", d)?;
            }
        }
        for s in &self.supports {
            check("support dof", s.dof)?;
        }
        for e in &self.elements {
            for id in [e.node_a, e.node_b] {
                if !self.nodes.iter().any(|n| n.id == id) {
                    return Err(Error::InvalidModel(format!(
                        "element {} references unknown node {id}",
                        e.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Full structural validation: indices, symmetry, positive stiffness
    /// diagonal on unblocked dofs.
    pub fn validate(&self) -> Result<()> {
        self.check_indices()?;
        for (name, m) in [
            ("mass", self.assembled_mass()),
            ("stiffness", self.assembled_stiffness()),
        ] {
            check_symmetric(name, &m)?;
        }
        let blocked = self.blocked();
        let mut diag = csr_diagonal(&self.assembled_stiffness());
        for s in &self.supports {
            diag[s.dof] += s.stiffness;
        }
        for (dof, (&k, &b)) in diag.iter().zip(&blocked).enumerate() {
            if !b && k <= 0.0 {
                return Err(Error::IndefiniteDiagonal { dof, value: k });
            }
        }
        Ok(())
    }
}

pub(crate) fn csr_diagonal(m: &CsrMatrix<f64>) -> Vec<f64> {
    let mut d = vec![0.0; m.nrows()];
    for (i, j, v) in m.triplet_iter() {
        if i == j {
            d[i] += *v;
        }
    }
    d
}

fn check_symmetric(name: &str, m: &CsrMatrix<f64>) -> Result<()> {
    let scale = m.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Ok(());
    }
    let transposed = m.transpose();
    let diff = m - &transposed;
    let worst = diff.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if worst > SYMMETRY_TOLERANCE * scale {
        return Err(Error::InvalidModel(format!(
            "{name} matrix is not symmetric (max |A - A^T| = {worst:e}, largest entry {scale:e})"
        )));
    }
    Ok(())
}
