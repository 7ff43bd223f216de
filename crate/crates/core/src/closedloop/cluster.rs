use std::ops::Range;

use crate::error::{Error, Result};
use crate::geometry::Geometry;

/// Disjoint element groups that always share one weight value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    clusters: Vec<Range<usize>>,
}

impl Partition {
    /// Contiguous runs of `size` elements along each ring; the last run of a
    /// ring takes the remainder.
    pub fn from_rings(rings: &[Range<usize>], size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("cluster_size must be at least 1".into()));
        }
        let mut clusters = Vec::new();
        for ring in rings {
            let mut s = ring.start;
            while s < ring.end {
                let e = (s + size).min(ring.end);
                clusters.push(s..e);
                s = e;
            }
        }
        Ok(Self { clusters })
    }

    pub fn singletons(n: usize) -> Self {
        Self { clusters: (0..n).map(|i| i..i + 1).collect() }
    }

    pub fn clusters(&self) -> &[Range<usize>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.clusters.iter().map(|c| c.len()).sum()
    }
}

pub fn cluster_partition(geometry: &Geometry, cluster_size: usize) -> Result<Partition> {
    Partition::from_rings(geometry.rings(), cluster_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_remainders() {
        let rings = vec![0..7, 7..12];
        let p = Partition::from_rings(&rings, 3).unwrap();
        assert_eq!(p.clusters(), &[0..3, 3..6, 6..7, 7..10, 10..12]);
        assert_eq!(Partition::from_rings(&rings, 1).unwrap(), Partition::singletons(12));
        assert!(Partition::from_rings(&rings, 0).is_err());
    }
}
