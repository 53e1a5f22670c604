//! Small fixed-width bitsets for query-edge and query-variable subsets.

use std::fmt;

macro_rules! bitset {
    ($(#[$doc:meta])* $name:ident, $word:ty) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub $word);

        impl $name {
            pub const CAPACITY: usize = <$word>::BITS as usize;
            pub const EMPTY: Self = $name(0);

            pub fn singleton(i: usize) -> Self {
                debug_assert!(i < Self::CAPACITY);
                $name(1 << i)
            }

            /// The set `{0, .., n-1}`.
            pub fn full(n: usize) -> Self {
                debug_assert!(n <= Self::CAPACITY);
                if n == Self::CAPACITY {
                    $name(<$word>::MAX)
                } else {
                    $name((1 << n) - 1)
                }
            }

            pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
                it.into_iter().fold(Self::EMPTY, |s, i| s.with(i))
            }

            pub fn bits(self) -> $word {
                self.0
            }

            pub fn len(self) -> usize {
                self.0.count_ones() as usize
            }

            pub fn is_empty(self) -> bool {
                self.0 == 0
            }

            pub fn contains(self, i: usize) -> bool {
                i < Self::CAPACITY && self.0 >> i & 1 == 1
            }

            pub fn with(self, i: usize) -> Self {
                $name(self.0 | 1 << i)
            }

            pub fn without(self, i: usize) -> Self {
                $name(self.0 & !(1 << i))
            }

            pub fn union(self, o: Self) -> Self {
                $name(self.0 | o.0)
            }

            pub fn intersect(self, o: Self) -> Self {
                $name(self.0 & o.0)
            }

            pub fn minus(self, o: Self) -> Self {
                $name(self.0 & !o.0)
            }

            pub fn is_subset(self, o: Self) -> bool {
                self.0 & !o.0 == 0
            }

            pub fn intersects(self, o: Self) -> bool {
                self.0 & o.0 != 0
            }

            /// Lowest member, if any.
            pub fn first(self) -> Option<usize> {
                (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
            }

            pub fn iter(self) -> impl Iterator<Item = usize> {
                let mut w = self.0;
                std::iter::from_fn(move || {
                    if w == 0 {
                        None
                    } else {
                        let i = w.trailing_zeros() as usize;
                        w &= w - 1;
                        Some(i)
                    }
                })
            }

            pub fn to_vec(self) -> Vec<usize> {
                self.iter().collect()
            }

            /// All subsets of `self`, starting with the empty set, in increasing
            /// numeric order.
            pub fn subsets(self) -> impl Iterator<Item = Self> {
                let full = self.0;
                let mut cur: Option<$word> = Some(0);
                std::iter::from_fn(move || {
                    let s = cur?;
                    cur = if s == full { None } else { Some((s.wrapping_sub(full)) & full) };
                    Some($name(s))
                })
            }

            /// Lexicographic comparison on the sorted index lists.
            pub fn lex_cmp(self, o: Self) -> std::cmp::Ordering {
                self.iter().cmp(o.iter())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.debug_set().entries(self.iter()).finish()
            }
        }
    };
}

bitset!(
    /// A set of query-edge indices.
    EdgeSet,
    u64
);

bitset!(
    /// A set of query-variable indices.
    VarSet,
    u32
);
