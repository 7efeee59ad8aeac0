//! Small fixed-capacity permutations.

use std::fmt;

use crate::events::MAX_DEGREE;

/// A permutation of `0..len` with `len <= MAX_DEGREE`, stored as its image
/// table: `self.apply(i) == map[i]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm {
    len: u8,
    map: [u8; MAX_DEGREE],
}

impl Perm {
    pub fn identity(len: usize) -> Perm {
        assert!(len <= MAX_DEGREE, "permutation degree {len} too large");
        let mut map = [0u8; MAX_DEGREE];
        for (i, m) in map.iter_mut().enumerate() {
            *m = i as u8;
        }
        Perm { len: len as u8, map }
    }

    /// Builds a permutation from its image table; `None` if not a bijection.
    pub fn from_images(images: &[usize]) -> Option<Perm> {
        let len = images.len();
        if len > MAX_DEGREE {
            return None;
        }
        let mut seen = [false; MAX_DEGREE];
        let mut map = Perm::identity(len).map;
        for (i, &x) in images.iter().enumerate() {
            if x >= len || seen[x] {
                return None;
            }
            seen[x] = true;
            map[i] = x as u8;
        }
        Some(Perm { len: len as u8, map })
    }

    /// Transposition `(a b)` on `0..len`.
    pub fn transposition(len: usize, a: usize, b: usize) -> Perm {
        let mut p = Perm::identity(len);
        p.map.swap(a, b);
        p
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.map[i] as usize
    }

    pub fn images(&self) -> &[u8] {
        &self.map[..self.len()]
    }

    pub fn is_identity(&self) -> bool {
        self.images().iter().enumerate().all(|(i, &x)| i == x as usize)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.len, other.len);
        let mut out = *self;
        for i in 0..self.len() {
            out.map[i] = self.map[other.map[i] as usize];
        }
        out
    }

    pub fn inverse(&self) -> Perm {
        let mut out = *self;
        for i in 0..self.len() {
            out.map[self.map[i] as usize] = i as u8;
        }
        out
    }

    /// +1 for even permutations, -1 for odd ones.
    pub fn sign(&self) -> i8 {
        let mut seen = [false; MAX_DEGREE];
        let mut transpositions = 0;
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut cur = start;
            let mut cycle = 0;
            while !seen[cur] {
                seen[cur] = true;
                cur = self.apply(cur);
                cycle += 1;
            }
            transpositions += cycle - 1;
        }
        if transpositions % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// All permutations of `0..len` in lexicographic order of image tables.
    pub fn all(len: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..len).collect();
        loop {
            out.push(Perm::from_images(&current).expect("valid permutation"));
            // next lexicographic permutation
            let Some(i) = (1..len).rev().find(|&i| current[i - 1] < current[i]) else {
                break;
            };
            let j = (i..len).rev().find(|&j| current[j] > current[i - 1]).unwrap();
            current.swap(i - 1, j);
            current[i..].reverse();
        }
        out
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Perm{:?}", self.images())
    }
}
