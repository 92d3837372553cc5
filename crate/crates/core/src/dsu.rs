//! Union-find with union by size and path halving.

use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
            size: alloc::vec![1; len],
        }
    }

    /// Starts with vertices `0..merged` already in one set rooted at 0.
    /// `merged` may be zero, which gives plain singletons.
    pub fn with_merged_prefix(len: usize, merged: usize) -> Self {
        let mut sets = Self::new(len);
        let merged = merged.min(len);
        if merged > 0 {
            for p in sets.parent.iter_mut().take(merged) {
                *p = 0;
            }
            sets.size[0] = merged;
        }
        sets
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            let grand = self.parent[self.parent[x]];
            self.parent[x] = grand;
            x = grand;
        }
        x
    }

    /// Returns `true` when `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            core::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_prefix_is_one_set() {
        let mut d = DisjointSets::with_merged_prefix(5, 3);
        assert!(d.same(0, 2));
        assert!(d.same(1, 2));
        assert!(!d.same(0, 3));
        assert_eq!(d.set_size(1), 3);
        assert!(d.union(4, 1));
        assert_eq!(d.set_size(4), 4);
        assert!(!d.union(0, 4));
    }

    #[test]
    fn zero_prefix_is_singletons() {
        let mut d = DisjointSets::with_merged_prefix(3, 0);
        assert!(!d.same(0, 1));
        assert_eq!(d.len(), 3);
    }
}
