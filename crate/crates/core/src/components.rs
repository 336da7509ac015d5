//! Fixed-width set of embedding components (bit `k` = component `k`).

use std::cmp::Ordering;
use std::fmt;

pub const MAX_COMPONENTS: usize = 64;

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Components(pub u64);

impl Components {
    pub const EMPTY: Components = Components(0);

    /// All components `0..width`.
    pub fn full(width: usize) -> Self {
        debug_assert!(width <= MAX_COMPONENTS);
        if width == 64 {
            Components(u64::MAX)
        } else {
            Components((1u64 << width) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut bits = 0u64;
        for k in indices {
            debug_assert!(k < MAX_COMPONENTS);
            bits |= 1 << k;
        }
        Components(bits)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_indices(bits.iter().enumerate().filter(|(_, b)| **b).map(|(k, _)| k))
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn contains(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    #[inline]
    pub fn with(self, k: usize) -> Self {
        Components(self.0 | 1 << k)
    }

    #[inline]
    pub fn without(self, k: usize) -> Self {
        Components(self.0 & !(1 << k))
    }

    #[inline]
    pub fn union(self, other: Self) -> Self {
        Components(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: Self) -> Self {
        Components(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: Self) -> Self {
        Components(self.0 & !other.0)
    }

    /// `true` if every component of `self` is also in `other`.
    #[inline]
    pub fn is_subset(self, other: Self) -> bool {
        self.0 & other.0 == self.0
    }

    /// Lowest set component.
    #[inline]
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(k)
            }
        })
    }

    pub fn indices(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// Lexicographic order of the bit vectors read from component 0 upward,
    /// so `(0,1,..)` sorts before `(1,0,..)`.
    pub fn lex_cmp(self, other: Self) -> Ordering {
        let diff = self.0 ^ other.0;
        if diff == 0 {
            return Ordering::Equal;
        }
        let k = diff.trailing_zeros();
        if self.0 >> k & 1 == 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

impl fmt::Debug for Components {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lex_order_reads_from_component_zero() {
        let a = Components::from_indices([1]);
        let b = Components::from_indices([0]);
        assert_eq!(a.lex_cmp(b), Ordering::Less);
        assert_eq!(b.lex_cmp(a), Ordering::Greater);
        let c = Components::from_indices([0, 5]);
        assert_eq!(b.lex_cmp(c), Ordering::Less);
        assert_eq!(c.lex_cmp(c), Ordering::Equal);
    }

    #[test]
    fn iter_and_full() {
        assert_eq!(Components::full(3).indices(), vec![0, 1, 2]);
        assert_eq!(Components::full(64).len(), 64);
        assert_eq!(Components::from_indices([4, 2]).first(), Some(2));
        assert!(Components::from_indices([2]).is_subset(Components::from_indices([2, 3])));
    }
}
