use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

use super::{csr_diagonal, DofKind, RailLine, RawModel, SupportElement};
use crate::error::{Error, Result};

/// Where an original dof ended up after preparation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofSlot {
    Retained(usize),
    Condensed(usize),
    Blocked,
}

/// Static condensation of the massless dofs.
///
/// Condensed displacements are recovered from the retained ones through
/// `x_Z = recovery * x_B`, where `B` (`boundary`) lists the retained dofs
/// coupled to the condensed set.
#[derive(Debug, Clone)]
pub struct Condensation {
    /// Original indices of the condensed dofs.
    pub condensed: Vec<usize>,
    /// Retained indices of the dofs the condensed set couples to.
    pub boundary: Vec<usize>,
    /// `-K_ZZ^-1 K_ZB`, `condensed.len() x boundary.len()`.
    pub recovery: DMatrix<f64>,
}

impl Condensation {
    pub fn identity() -> Self {
        Condensation {
            condensed: Vec::new(),
            boundary: Vec::new(),
            recovery: DMatrix::zeros(0, 0),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.condensed.is_empty()
    }
}

/// Dense stiffness and damping over a small set of retained dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBlock {
    /// Source element id; `None` for coupling terms no element covers.
    pub element: Option<usize>,
    pub dofs: Vec<usize>,
    /// Row-major `dofs.len()` squared.
    pub stiffness: Vec<f64>,
    pub damping: Vec<f64>,
}

/// Condensed, lumped model ready for time integration. Immutable once built.
#[derive(Debug, Clone)]
pub struct TrackModel {
    pub(crate) n_original: usize,
    pub(crate) retained: Vec<usize>,
    pub(crate) slots: Vec<DofSlot>,
    pub(crate) kinds: Vec<DofKind>,
    pub(crate) lumped_mass: Vec<f64>,
    pub(crate) blocks: Vec<ElementBlock>,
    pub(crate) supports: Vec<SupportElement>,
    pub(crate) rail_line: RailLine,
    pub(crate) condensation: Condensation,
    pub(crate) stiffness: CsrMatrix<f64>,
    pub(crate) damping: CsrMatrix<f64>,
}

impl TrackModel {
    /// Validates, lumps and condenses `raw`.
    pub fn build(raw: &RawModel) -> Result<Self> {
        raw.validate()?;
        let lumped = super::lump_mass(raw)?;
        super::condense_massless(raw, &lumped)
    }

    /// Number of retained (active) dofs.
    pub fn n_dofs(&self) -> usize {
        self.retained.len()
    }

    pub fn n_original_dofs(&self) -> usize {
        self.n_original
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    /// Condensed global stiffness over retained dofs, supports excluded.
    pub fn stiffness(&self) -> &CsrMatrix<f64> {
        &self.stiffness
    }

    pub fn damping(&self) -> &CsrMatrix<f64> {
        &self.damping
    }

    /// `K_ii` plus the stiffness of every support on dof `i` taken as closed.
    pub fn stiffness_diagonal(&self) -> Vec<f64> {
        let mut d = csr_diagonal(&self.stiffness);
        for s in &self.supports {
            d[s.dof] += s.stiffness;
        }
        d
    }

    pub fn blocks(&self) -> &[ElementBlock] {
        &self.blocks
    }

    /// Supports with `dof` as a retained index.
    pub fn supports(&self) -> &[SupportElement] {
        &self.supports
    }

    pub fn rail_line(&self) -> &RailLine {
        &self.rail_line
    }

    pub fn condensation(&self) -> &Condensation {
        &self.condensation
    }

    pub fn kinds(&self) -> &[DofKind] {
        &self.kinds
    }

    pub fn slot(&self, original: usize) -> DofSlot {
        self.slots.get(original).copied().unwrap_or(DofSlot::Blocked)
    }

    pub fn original_dof(&self, retained: usize) -> usize {
        self.retained[retained]
    }

    pub fn retained_index(&self, original: usize) -> Option<usize> {
        match self.slot(original) {
            DofSlot::Retained(i) => Some(i),
            _ => None,
        }
    }

    /// Original indices of the blocked dofs.
    pub fn blocked_dofs(&self) -> Vec<usize> {
        (0..self.n_original)
            .filter(|&d| self.slots[d] == DofSlot::Blocked)
            .collect()
    }

    /// Adds a nodal load given on original dofs to a retained load vector.
    /// Loads on condensed dofs are carried over statically; blocked dofs
    /// absorb theirs.
    pub fn project_load(&self, original: usize, value: f64, out: &mut [f64]) {
        match self.slot(original) {
            DofSlot::Retained(i) => out[i] += value,
            DofSlot::Condensed(z) => {
                let c = &self.condensation;
                for (k, &b) in c.boundary.iter().enumerate() {
                    out[b] += c.recovery[(z, k)] * value;
                }
            }
            DofSlot::Blocked => {}
        }
    }

    /// Value of an original dof given retained values `x`.
    pub fn dof_value(&self, x: &[f64], original: usize) -> f64 {
        match self.slot(original) {
            DofSlot::Retained(i) => x[i],
            DofSlot::Condensed(z) => {
                let c = &self.condensation;
                c.boundary
                    .iter()
                    .enumerate()
                    .map(|(k, &b)| c.recovery[(z, k)] * x[b])
                    .sum()
            }
            DofSlot::Blocked => 0.0,
        }
    }

    /// Full original-dof vector from retained values.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_original).map(|d| self.dof_value(x, d)).collect()
    }

    /// Same model with different lumped masses (used by mass scaling).
    pub fn with_lumped_mass(&self, lumped_mass: Vec<f64>) -> Result<Self> {
        if lumped_mass.len() != self.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "expected {} masses, got {}",
                self.n_dofs(),
                lumped_mass.len()
            )));
        }
        if let Some(i) = lumped_mass.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::NonPhysicalMass {
                dof: self.retained[i],
                row_sum: lumped_mass[i],
            });
        }
        Ok(TrackModel {
            lumped_mass,
            ..self.clone()
        })
    }

    /// Same model with the gap of the supports on the given original dofs replaced.
    pub fn with_support_gaps(&self, original_dofs: &[usize], gap: f64) -> Result<Self> {
        let mut model = self.clone();
        for &d in original_dofs {
            let i = self
                .retained_index(d)
                .ok_or_else(|| Error::InvalidArgument(format!("dof {d} is not retained")))?;
            let mut found = false;
            for s in model.supports.iter_mut().filter(|s| s.dof == i) {
                *s = SupportElement::new(s.dof, s.stiffness, s.damping, gap)?;
                found = true;
            }
            if !found {
                return Err(Error::InvalidArgument(format!("no support on dof {d}")));
            }
        }
        Ok(model)
    }

    /// Same model with every damping term (matrix and supports) removed.
    pub fn undamped(&self) -> Self {
        let mut model = self.clone();
        model.damping = CsrMatrix::zeros(self.n_dofs(), self.n_dofs());
        for b in &mut model.blocks {
            b.damping.iter_mut().for_each(|c| *c = 0.0);
        }
        for s in &mut model.supports {
            s.damping = 0.0;
        }
        model
    }
}
