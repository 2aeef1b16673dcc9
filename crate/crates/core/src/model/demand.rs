use serde::{Deserialize, Serialize};
use std::ops::{Deref, DerefMut};

/// Minimal number of instances of each type for one slot, indexed by type
/// index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector(pub Vec<u32>);

impl DemandVector {
    pub fn zeros(num_types: usize) -> Self {
        DemandVector(vec![0; num_types])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&n| n as u64).sum()
    }

    /// Componentwise `self <= other`.
    pub fn dominated_by(&self, other: &DemandVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl Deref for DemandVector {
    type Target = [u32];

    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl DerefMut for DemandVector {
    fn deref_mut(&mut self) -> &mut [u32] {
        &mut self.0
    }
}

impl From<Vec<u32>> for DemandVector {
    fn from(v: Vec<u32>) -> Self {
        DemandVector(v)
    }
}
