//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vti_core::demo::DemoTrack;
use vti_core::model::{ElementRecord, NodeRecord, RawModel, SupportElement, TrackModel, Triplet};

pub fn diag(values: &[f64]) -> Vec<Triplet> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, &value)| Triplet { row: i, col: i, value })
        .collect()
}

/// One translational dof with mass `m`, stiffness `k`, damping `c`.
pub fn single_dof(m: f64, k: f64, c: f64) -> TrackModel {
    let raw = RawModel {
        n_dofs: 1,
        mass: diag(&[m]),
        stiffness: diag(&[k]),
        damping: diag(&[c]),
        ..Default::default()
    };
    TrackModel::build(&raw).unwrap()
}

/// One dof with a base spring `k` and a gap support on top.
pub fn gap_dof(m: f64, k: f64, support: SupportElement) -> TrackModel {
    let raw = RawModel {
        n_dofs: 1,
        mass: diag(&[m]),
        stiffness: diag(&[k]),
        supports: vec![support],
        ..Default::default()
    };
    TrackModel::build(&raw).unwrap()
}

/// Springs k1 = 2 (blocked dof 0 to massless dof 1) and k2 = 3 (dof 1 to
/// dof 2, mass 1): the condensed stiffness on dof 2 is 1.2 N/m.
pub fn series_springs() -> RawModel {
    let (k1, k2) = (2.0, 3.0);
    let t = |row, col, value| Triplet { row, col, value };
    RawModel {
        n_dofs: 3,
        mass: vec![t(0, 0, 1.0), t(2, 2, 1.0)],
        stiffness: vec![
            t(0, 0, k1),
            t(0, 1, -k1),
            t(1, 0, -k1),
            t(1, 1, k1 + k2),
            t(1, 2, -k2),
            t(2, 1, -k2),
            t(2, 2, k2),
        ],
        nodes: vec![NodeRecord {
            id: 0,
            s: 0.0,
            dof_w: Some(0),
            dof_theta: None,
            blocked_w: true,
            blocked_theta: false,
        }],
        ..Default::default()
    }
}

pub fn demo() -> TrackModel {
    TrackModel::build(&DemoTrack::default().build().unwrap()).unwrap()
}

pub fn demo_raw() -> RawModel {
    DemoTrack::default().build().unwrap()
}

/// Demo rail with a translational-only lumped mass matrix: every rotation
/// is massless and gets condensed.
pub fn demo_massless_rotations() -> RawModel {
    let mut raw = demo_raw();
    raw.mass.retain(|t| t.row % 2 == 0 && t.col % 2 == 0);
    raw
}

/// Dense `K` (supports included) and `C` of the retained dofs.
pub fn dense_kc(model: &TrackModel) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = model.n_dofs();
    let mut k = DMatrix::zeros(n, n);
    let mut c = DMatrix::zeros(n, n);
    for (i, j, v) in model.stiffness().triplet_iter() {
        k[(i, j)] += *v;
    }
    for (i, j, v) in model.damping().triplet_iter() {
        c[(i, j)] += *v;
    }
    for s in model.supports() {
        k[(s.dof, s.dof)] += s.stiffness;
        c[(s.dof, s.dof)] += s.damping;
    }
    (k, c)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    d / max_abs(b).max(f64::MIN_POSITIVE)
}

/// A simple beam: `n` elements with node 0 fully blocked, used where the
/// demo would be needlessly large.
pub fn element_records(n: usize) -> Vec<ElementRecord> {
    (0..n)
        .map(|e| ElementRecord {
            id: e,
            node_a: e,
            node_b: e + 1,
        })
        .collect()
}
