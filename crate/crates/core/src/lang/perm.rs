//! Permutation utilities shared by the built-in distances and the casebook.

use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::num::Rat;

/// Interprets an array as a permutation of `0..n`.
pub fn as_perm(a: &[Rat]) -> Result<Vec<usize>> {
    let n = a.len();
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(n);
    for x in a {
        let v = x
            .is_integer()
            .then(|| x.to_integer().to_usize())
            .flatten()
            .filter(|&v| v < n && !seen[v])
            .ok_or_else(|| Error::eval("array is not a permutation of 0..N"))?;
        seen[v] = true;
        out.push(v);
    }
    Ok(out)
}

pub fn is_perm(a: &[Rat]) -> bool {
    as_perm(a).is_ok()
}

/// `inv[card] = position`.
pub fn inverse(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (pos, &card) in p.iter().enumerate() {
        inv[card] = pos;
    }
    inv
}

/// The unique minimal partition of positions into contiguous blocks such that
/// each block holds the same set of cards in both decks. Returned as block
/// boundaries `[(start, end_exclusive)]`.
pub fn blocks(d1: &[usize], d2: &[usize]) -> Vec<(usize, usize)> {
    assert_eq!(d1.len(), d2.len());
    let inv2 = inverse(d2);
    let mut out = Vec::new();
    let mut start = 0;
    let mut reach = 0;
    for (i, &card) in d1.iter().enumerate() {
        // Position of this card in deck 2; the block must extend to cover it.
        reach = reach.max(inv2[card]);
        if reach == i {
            out.push((start, i + 1));
            start = i + 1;
        }
    }
    out
}

/// For every card `c`, the size of its block minus one.
pub fn block_distances(d1: &[usize], d2: &[usize]) -> Vec<usize> {
    let mut dc = vec![0; d1.len()];
    for (s, e) in blocks(d1, d2) {
        for &card in &d1[s..e] {
            dc[card] = e - s - 1;
        }
    }
    dc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reverse_is_one_block() {
        assert_eq!(blocks(&[0, 1, 2], &[2, 1, 0]), vec![(0, 3)]);
        assert_eq!(block_distances(&[0, 1, 2], &[2, 1, 0]), vec![2, 2, 2]);
    }

    #[test]
    fn equal_decks_are_singletons() {
        assert_eq!(blocks(&[2, 0, 1], &[2, 0, 1]), vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn mixed_blocks() {
        assert_eq!(
            blocks(&[0, 1, 2, 3], &[1, 0, 2, 3]),
            vec![(0, 2), (2, 3), (3, 4)]
        );
    }
}
