use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, SymmetricEigen};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use super::track::{Condensation, DofSlot, ElementBlock, TrackModel};
use super::{RailLine, RawModel};
use crate::error::{Error, Result};

/// Builds the [`TrackModel`]: blocked dofs are dropped, dofs with zero lumped
/// mass are removed by static (Guyan) condensation and the condensed K and C
/// are split into element blocks.
///
/// With `T = [I; R]`, `R = -K_ZZ^-1 K_Zr`, the retained matrices are
/// `T^T K T = K_rr + K_rZ R` and `T^T C T`.
pub fn condense_massless(raw: &RawModel, lumped: &[f64]) -> Result<TrackModel> {
    let n = raw.n_dofs;
    if lumped.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} lumped masses, got {}",
            lumped.len()
        )));
    }
    let blocked = raw.blocked();
    let kinds_all = raw.dof_kinds();

    let mut slots = vec![DofSlot::Blocked; n];
    let mut retained = Vec::new();
    let mut condensed = Vec::new();
    for d in 0..n {
        if blocked[d] {
            continue;
        }
        if lumped[d] > 0.0 {
            slots[d] = DofSlot::Retained(retained.len());
            retained.push(d);
        } else {
            slots[d] = DofSlot::Condensed(condensed.len());
            condensed.push(d);
        }
    }
    let n_r = retained.len();

    let k = raw.assembled_stiffness();
    let c = raw.assembled_damping();

    // Split entries by slot pair.
    let (k_rr, k_rz, k_zz) = split(&k, &slots);
    let (c_rr, c_rz, c_zz) = split(&c, &slots);

    let mut k_cond: BTreeMap<(usize, usize), f64> = k_rr;
    let mut c_cond: BTreeMap<(usize, usize), f64> = c_rr;
    let condensation = if condensed.is_empty() {
        Condensation::identity()
    } else {
        let n_z = condensed.len();
        let kzz = dense(n_z, n_z, &k_zz);
        let factor = nalgebra::Cholesky::new(kzz.clone()).ok_or_else(|| Error::SingularCondensation {
            dofs: mechanism_dofs(&kzz, &condensed),
        })?;

        // Boundary: retained dofs K couples to the condensed set.
        let boundary: Vec<usize> = k_rz
            .keys()
            .map(|&(r, _)| r)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let b_pos: BTreeMap<usize, usize> = boundary.iter().enumerate().map(|(p, &r)| (r, p)).collect();
        let mut kzb = DMatrix::zeros(n_z, boundary.len());
        for (&(r, z), &v) in &k_rz {
            kzb[(z, b_pos[&r])] += v;
        }
        let recovery = -factor.solve(&kzb);

        // K: K_rr + K_rZ R  (= K_rr - K_bZ K_ZZ^-1 K_Zb on the boundary block)
        let k_corr = kzb.transpose() * &recovery;
        add_dense(&mut k_cond, &boundary, &boundary, &k_corr);

        // C: C_rr + C_rZ R + R^T C_Zr + R^T C_ZZ R
        if !c_rz.is_empty() || !c_zz.is_empty() {
            let c_rows: Vec<usize> = c_rz
                .keys()
                .map(|&(r, _)| r)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let c_pos: BTreeMap<usize, usize> = c_rows.iter().enumerate().map(|(p, &r)| (r, p)).collect();
            let mut czr = DMatrix::zeros(n_z, c_rows.len());
            for (&(r, z), &v) in &c_rz {
                czr[(z, c_pos[&r])] += v;
            }
            let cross = czr.transpose() * &recovery; // rows c_rows, cols boundary
            add_dense(&mut c_cond, &c_rows, &boundary, &cross);
            add_dense(&mut c_cond, &boundary, &c_rows, &cross.transpose());
            let czz = dense(n_z, n_z, &c_zz);
            let inner = recovery.transpose() * czz * &recovery;
            add_dense(&mut c_cond, &boundary, &boundary, &inner);
        }
        Condensation {
            condensed: condensed.clone(),
            boundary,
            recovery,
        }
    };

    let mut supports = Vec::with_capacity(raw.supports.len());
    for s in &raw.supports {
        match slots[s.dof] {
            DofSlot::Retained(i) => supports.push(super::SupportElement { dof: i, ..*s }),
            DofSlot::Blocked => continue,
            DofSlot::Condensed(_) => {
                return Err(Error::InvalidModel(format!(
                    "support on dof {} which has no mass; supported dofs must carry mass",
                    s.dof
                )))
            }
        }
    }

    let rail_line = RailLine::build(raw)?;
    let blocks = partition_blocks(&rail_line, &slots, &k_cond, &c_cond);

    Ok(TrackModel {
        n_original: n,
        kinds: retained.iter().map(|&d| kinds_all[d]).collect(),
        lumped_mass: retained.iter().map(|&d| lumped[d]).collect(),
        retained,
        slots,
        blocks,
        supports,
        rail_line,
        condensation,
        stiffness: to_csr(n_r, &k_cond),
        damping: to_csr(n_r, &c_cond),
    })
}

type Entries = BTreeMap<(usize, usize), f64>;

/// Returns (rr, rz, zz) entries in local indices. `rz` is keyed (r, z) and
/// only collected from rows of retained dofs; K is symmetric so that suffices.
fn split(m: &CsrMatrix<f64>, slots: &[DofSlot]) -> (Entries, Entries, Entries) {
    let (mut rr, mut rz, mut zz) = (Entries::new(), Entries::new(), Entries::new());
    for (i, j, &v) in m.triplet_iter() {
        if v == 0.0 {
            continue;
        }
        match (slots[i], slots[j]) {
            (DofSlot::Retained(a), DofSlot::Retained(b)) => *rr.entry((a, b)).or_default() += v,
            (DofSlot::Retained(a), DofSlot::Condensed(z)) => *rz.entry((a, z)).or_default() += v,
            (DofSlot::Condensed(a), DofSlot::Condensed(b)) => *zz.entry((a, b)).or_default() += v,
            _ => {}
        }
    }
    (rr, rz, zz)
}

fn dense(rows: usize, cols: usize, entries: &Entries) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for (&(i, j), &v) in entries {
        m[(i, j)] += v;
    }
    m
}

fn add_dense(target: &mut Entries, rows: &[usize], cols: &[usize], m: &DMatrix<f64>) {
    for (p, &i) in rows.iter().enumerate() {
        for (q, &j) in cols.iter().enumerate() {
            let v = m[(p, q)];
            if v != 0.0 {
                *target.entry((i, j)).or_default() += v;
            }
        }
    }
}

fn to_csr(n: usize, entries: &Entries) -> CsrMatrix<f64> {
    let mut coo = CooMatrix::new(n, n);
    for (&(i, j), &v) in entries {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

/// Dofs participating in the (near-)null space of a singular `K_ZZ`.
fn mechanism_dofs(kzz: &DMatrix<f64>, condensed: &[usize]) -> Vec<usize> {
    let eig = SymmetricEigen::new(kzz.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let mut dofs = BTreeSet::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= tol {
            for (z, &v) in eig.eigenvectors.column(k).iter().enumerate() {
                if v.abs() > 1e-8 {
                    dofs.insert(condensed[z]);
                }
            }
        }
    }
    dofs.into_iter().collect()
}

/// Splits the condensed matrices into per-element dense blocks. Elements are
/// visited in rail order and claim every entry among their retained dofs not
/// yet claimed, so terms on a shared node go to the element owning it as its
/// lower-indexed node. Entries no element covers become 1x1 or 2x2 blocks.
fn partition_blocks(rail: &RailLine, slots: &[DofSlot], k: &Entries, c: &Entries) -> Vec<ElementBlock> {
    let mut remaining: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (&key, &v) in k {
        remaining.entry(key).or_default().0 += v;
    }
    for (&key, &v) in c {
        remaining.entry(key).or_default().1 += v;
    }

    let mut blocks = Vec::new();
    for seg in rail.segments() {
        let mut dofs = Vec::with_capacity(4);
        for d in [
            seg.node_a.dof_w,
            seg.node_a.dof_theta,
            seg.node_b.dof_w,
            seg.node_b.dof_theta,
        ]
        .into_iter()
        .flatten()
        {
            if let Some(DofSlot::Retained(i)) = slots.get(d) {
                if !dofs.contains(i) {
                    dofs.push(*i);
                }
            }
        }
        let n = dofs.len();
        let mut block = ElementBlock {
            element: Some(seg.element_id),
            dofs: dofs.clone(),
            stiffness: vec![0.0; n * n],
            damping: vec![0.0; n * n],
        };
        let mut claimed = false;
        for (p, &i) in dofs.iter().enumerate() {
            for (q, &j) in dofs.iter().enumerate() {
                if let Some((kv, cv)) = remaining.remove(&(i, j)) {
                    block.stiffness[p * n + q] = kv;
                    block.damping[p * n + q] = cv;
                    claimed = true;
                }
            }
        }
        if claimed {
            blocks.push(block);
        }
    }

    let mut extra: BTreeMap<(usize, usize), ElementBlock> = BTreeMap::new();
    for ((i, j), (kv, cv)) in remaining {
        let key = (i.min(j), i.max(j));
        let block = extra.entry(key).or_insert_with(|| {
            let dofs = if key.0 == key.1 {
                vec![key.0]
            } else {
                vec![key.0, key.1]
            };
            let n = dofs.len();
            ElementBlock {
                element: None,
                dofs,
                stiffness: vec![0.0; n * n],
                damping: vec![0.0; n * n],
            }
        });
        let n = block.dofs.len();
        let p = block.dofs.iter().position(|&d| d == i).unwrap();
        let q = block.dofs.iter().position(|&d| d == j).unwrap();
        block.stiffness[p * n + q] = kv;
        block.damping[p * n + q] = cv;
    }
    blocks.extend(extra.into_values());
    blocks
}
