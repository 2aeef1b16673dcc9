use super::{DemandVector, SystemConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Instances of each type on each server for one slot: a dense
/// `servers x types` matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<u32>>", try_from = "Vec<Vec<u32>>")]
pub struct Placement {
    servers: usize,
    types: usize,
    cells: Vec<u32>,
}

impl Placement {
    pub fn zeros(servers: usize, types: usize) -> Self {
        Placement {
            servers,
            types,
            cells: vec![0; servers * types],
        }
    }

    pub fn from_rows(rows: &[Vec<u32>], types: usize) -> Result<Self> {
        let mut cells = Vec::with_capacity(rows.len() * types);
        for row in rows {
            if row.len() != types {
                return Err(Error::Dimension {
                    what: "placement row",
                    expected: types,
                    found: row.len(),
                });
            }
            cells.extend_from_slice(row);
        }
        Ok(Placement {
            servers: rows.len(),
            types,
            cells,
        })
    }

    pub fn num_servers(&self) -> usize {
        self.servers
    }

    pub fn num_types(&self) -> usize {
        self.types
    }

    #[inline]
    pub fn get(&self, server: usize, ty: usize) -> u32 {
        self.cells[server * self.types + ty]
    }

    #[inline]
    pub fn set(&mut self, server: usize, ty: usize, value: u32) {
        self.cells[server * self.types + ty] = value;
    }

    #[inline]
    pub fn add(&mut self, server: usize, ty: usize, delta: i64) {
        let cell = &mut self.cells[server * self.types + ty];
        *cell = (*cell as i64 + delta) as u32;
    }

    pub fn row(&self, server: usize) -> &[u32] {
        &self.cells[server * self.types..(server + 1) * self.types]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        // chunks_exact panics on 0; a zero-type placement has no cells anyway.
        self.cells.chunks_exact(self.types.max(1)).take(self.servers)
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.types];
        for row in self.rows() {
            for (s, &v) in sums.iter_mut().zip(row) {
                *s += v as u64;
            }
        }
        sums
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|&c| c == 0)
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &Placement) -> bool {
        self.same_shape(other) && self.cells.iter().zip(&other.cells).all(|(a, b)| a <= b)
    }

    pub fn same_shape(&self, other: &Placement) -> bool {
        self.servers == other.servers && self.types == other.types
    }

    pub(crate) fn check_shape(&self, other: &Placement) -> Result<()> {
        if self.servers != other.servers {
            return Err(Error::Dimension {
                what: "placement servers",
                expected: self.servers,
                found: other.servers,
            });
        }
        if self.types != other.types {
            return Err(Error::Dimension {
                what: "placement types",
                expected: self.types,
                found: other.types,
            });
        }
        Ok(())
    }

    /// Raw cells, row-major. Used for hashing trajectories.
    pub fn as_slice(&self) -> &[u32] {
        &self.cells
    }
}

impl fmt::Debug for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl From<Placement> for Vec<Vec<u32>> {
    fn from(p: Placement) -> Self {
        p.rows().map(|r| r.to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<u32>>> for Placement {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u32>>) -> Result<Self> {
        let types = rows.first().map_or(0, |r| r.len());
        Placement::from_rows(&rows, types)
    }
}

/// True iff every server's summed demand stays within capacity in every
/// resource dimension. Comparison is exact.
pub fn check_capacity(x: &Placement, sys: &SystemConfig) -> bool {
    x.num_types() == sys.num_types() && x.rows().all(|row| sys.units().fits(row))
}

/// True iff the column sums of `x` dominate `n`.
pub fn check_coverage(x: &Placement, n: &DemandVector) -> bool {
    x.num_types() == n.len()
        && x.column_sums()
            .iter()
            .zip(n.iter())
            .all(|(&have, &need)| have >= need as u64)
}

/// True iff, for every type, the per-server counts moved in one direction
/// only between `prev` and `cur`: no server gained instances of a type while
/// another lost instances of the same type.
pub fn is_migration_free(prev: &Placement, cur: &Placement) -> bool {
    if !prev.same_shape(cur) {
        return false;
    }
    (0..cur.num_types()).all(|i| {
        let mut grew = false;
        let mut shrank = false;
        for u in 0..cur.num_servers() {
            let (a, b) = (prev.get(u, i), cur.get(u, i));
            grew |= b > a;
            shrank |= b < a;
        }
        !(grew && shrank)
    })
}

/// True iff for every type the summed per-server launches equal the positive
/// part of the change in the type's total.
pub fn aggregate_deployment_equal(prev: &Placement, cur: &Placement) -> bool {
    if !prev.same_shape(cur) {
        return false;
    }
    let before = prev.column_sums();
    let after = cur.column_sums();
    (0..cur.num_types()).all(|i| {
        let launches: u64 = (0..cur.num_servers())
            .map(|u| cur.get(u, i).saturating_sub(prev.get(u, i)) as u64)
            .sum();
        launches == after[i].saturating_sub(before[i])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cluster, VnfType};
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn firewall_only() -> SystemConfig {
        SystemConfig::new(
            vec![VnfType {
                id: 1,
                name: "firewall".into(),
                demand: vec![4.0],
                capacity_mbps: 900.0,
                op_cost: Ratio::from_integer(4),
                deploy_cost: Ratio::from_integer(8),
            }],
            vec![],
            Cluster {
                num_servers: 1,
                capacity: vec![16.0],
            },
        )
        .unwrap()
    }

    #[test]
    fn capacity_boundary() {
        let sys = firewall_only();
        assert!(check_capacity(&Placement::zeros(1, 1), &sys));
        assert!(check_capacity(&Placement::from_rows(&[vec![4]], 1).unwrap(), &sys));
        assert!(!check_capacity(&Placement::from_rows(&[vec![5]], 1).unwrap(), &sys));
    }

    #[test]
    fn coverage_boundary() {
        let x = Placement::from_rows(&[vec![2, 1], vec![1, 1]], 2).unwrap();
        assert!(check_coverage(&x, &DemandVector(vec![3, 2])));
        assert!(!check_coverage(&x, &DemandVector(vec![4, 2])));
        assert!(!check_coverage(&x, &DemandVector(vec![3, 3])));
    }

    #[test]
    fn migration_detection() {
        let a = Placement::from_rows(&[vec![1, 0], vec![0, 0]], 2).unwrap();
        let b = Placement::from_rows(&[vec![0, 0], vec![1, 0]], 2).unwrap();
        assert!(!is_migration_free(&a, &b));
        assert!(!aggregate_deployment_equal(&a, &b));
        let c = Placement::from_rows(&[vec![2, 0], vec![1, 3]], 2).unwrap();
        assert!(is_migration_free(&a, &c));
        assert!(aggregate_deployment_equal(&a, &c));
    }

    #[test]
    fn serde_as_rows() {
        let x = Placement::from_rows(&[vec![2, 1], vec![0, 3]], 2).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "[[2,1],[0,3]]");
        let back: Placement = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        assert!(serde_json::from_str::<Placement>("[[1,2],[3]]").is_err());
    }

    fn small_system() -> SystemConfig {
        let ty = |id: u32, d: Vec<f64>| VnfType {
            id,
            name: String::new(),
            demand: d,
            capacity_mbps: 1.0,
            op_cost: Ratio::from_integer(1),
            deploy_cost: Ratio::from_integer(1),
        };
        SystemConfig::new(
            vec![ty(1, vec![3.0, 1.0]), ty(2, vec![1.0, 2.5]), ty(3, vec![2.0, 0.0])],
            vec![],
            Cluster {
                num_servers: 3,
                capacity: vec![7.0, 5.0],
            },
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn capacity_matches_resummation(cells in prop::collection::vec(0u32..4, 9)) {
            let sys = small_system();
            let rows: Vec<Vec<u32>> = cells.chunks(3).map(|c| c.to_vec()).collect();
            let x = Placement::from_rows(&rows, 3).unwrap();
            let demand = [[3.0, 1.0], [1.0, 2.5], [2.0, 0.0]];
            let expected = rows.iter().all(|row| {
                (0..2).all(|r| {
                    let used: f64 = (0..3).map(|i| row[i] as f64 * demand[i][r]).sum();
                    // Values are multiples of 0.5, so f64 sums are exact here.
                    used <= [7.0, 5.0][r]
                })
            });
            prop_assert_eq!(check_capacity(&x, &sys), expected);
        }

        #[test]
        fn coverage_matches_recount(cells in prop::collection::vec(0u32..4, 6), need in prop::collection::vec(0u32..8, 2)) {
            let rows: Vec<Vec<u32>> = cells.chunks(2).map(|c| c.to_vec()).collect();
            let x = Placement::from_rows(&rows, 2).unwrap();
            let mut ok = true;
            for i in 0..2 {
                let mut total = 0;
                for row in &rows {
                    total += row[i];
                }
                if total < need[i] {
                    ok = false;
                }
            }
            prop_assert_eq!(check_coverage(&x, &DemandVector(need)), ok);
        }
    }
}
