use super::RawModel;
use crate::error::{Error, Result};

/// Row-sum lumping, restricted to columns of the same dof kind.
///
/// Summing translation rows over translation columns only keeps the total
/// translational mass exact; rotation rows are summed over rotation columns
/// so no length-dimensioned coupling terms leak into the inertias. A row
/// that is identically zero gives a massless dof (later condensed). A
/// nonzero row summing to zero or less on an unblocked dof is rejected.
pub fn lump_mass(model: &RawModel) -> Result<Vec<f64>> {
    let kinds = model.dof_kinds();
    let blocked = model.blocked();
    let mass = model.assembled_mass();
    let mut lumped = vec![0.0; model.n_dofs];
    let mut magnitude = vec![0.0; model.n_dofs];
    for (i, j, &v) in mass.triplet_iter() {
        if kinds[i] == kinds[j] {
            lumped[i] += v;
        }
        magnitude[i] += v.abs();
    }
    for dof in 0..model.n_dofs {
        if blocked[dof] || magnitude[dof] == 0.0 {
            continue;
        }
        if lumped[dof] <= 1e-12 * magnitude[dof] {
            return Err(Error::NonPhysicalMass {
                dof,
                row_sum: lumped[dof],
            });
        }
    }
    Ok(lumped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeRecord, Triplet};

    fn model(n: usize, mass: &[(usize, usize, f64)]) -> RawModel {
        RawModel {
            n_dofs: n,
            mass: mass
                .iter()
                .map(|&(row, col, value)| Triplet { row, col, value })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn diagonal_is_identity() {
        let m = model(2, &[(0, 0, 2.0), (1, 1, 3.0)]);
        assert_eq!(lump_mass(&m).unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn consistent_bar_mass() {
        // (m/6)[[2,1],[1,2]] with m = 6
        let m = model(2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        assert_eq!(lump_mass(&m).unwrap(), vec![3.0, 3.0]);
    }

    #[test]
    fn zero_row_sum_rejected() {
        let m = model(2, &[(0, 0, 0.5), (0, 1, -0.5), (1, 0, -0.5), (1, 1, 1.0)]);
        assert!(matches!(lump_mass(&m), Err(Error::NonPhysicalMass { dof: 0, .. })));
    }

    #[test]
    fn blocked_dof_not_checked() {
        let mut m = model(2, &[(0, 0, 0.5), (0, 1, -0.5), (1, 0, -0.5), (1, 1, 1.0)]);
        m.nodes.push(NodeRecord {
            id: 0,
            s: 0.0,
            dof_w: Some(0),
            dof_theta: None,
            blocked_w: true,
            blocked_theta: false,
        });
        assert!(lump_mass(&m).is_ok());
    }

    #[test]
    fn zero_row_is_massless() {
        let m = model(3, &[(0, 0, 1.0), (2, 2, 1.0)]);
        assert_eq!(lump_mass(&m).unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn beam_translational_mass_preserved() {
        // Consistent Euler-Bernoulli element, dofs (w_a, th_a, w_b, th_b).
        let (m, l) = (60.0, 0.6);
        let f = m * l / 420.0;
        let k = [
            [156.0, 22.0 * l, 54.0, -13.0 * l],
            [22.0 * l, 4.0 * l * l, 13.0 * l, -3.0 * l * l],
            [54.0, 13.0 * l, 156.0, -22.0 * l],
            [-13.0 * l, -3.0 * l * l, -22.0 * l, 4.0 * l * l],
        ];
        let mut entries = Vec::new();
        for (i, row) in k.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                entries.push((i, j, f * v));
            }
        }
        let mut raw = model(4, &entries);
        raw.nodes = vec![
            NodeRecord {
                id: 0,
                s: 0.0,
                dof_w: Some(0),
                dof_theta: Some(1),
                blocked_w: false,
                blocked_theta: false,
            },
            NodeRecord {
                id: 1,
                s: l,
                dof_w: Some(2),
                dof_theta: Some(3),
                blocked_w: false,
                blocked_theta: false,
            },
        ];
        let lumped = lump_mass(&raw).unwrap();
        assert!((lumped[0] + lumped[2] - m * l).abs() < 1e-12 * m * l);
        assert!((lumped[1] - m * l.powi(3) / 420.0).abs() < 1e-15);
    }
}
