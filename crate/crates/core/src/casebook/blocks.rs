use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lang::perm::{block_distances, blocks, inverse};
use crate::num::{rat, Rat};

/// Minimal block decomposition of two decks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockDecomposition {
    /// Position ranges `[start, end)` holding the same cards in both decks.
    pub blocks: Vec<(usize, usize)>,
    /// `d_c = |BD(c)| - 1` for every card `c`.
    pub dc: Vec<usize>,
    /// `(1/N^2) * sum_c d_c`.
    #[serde(serialize_with = "crate::num::ser_rat")]
    pub d: Rat,
}

fn check_perm(deck: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &c in deck {
        if c >= n || std::mem::replace(&mut seen[c], true) {
            return Err(Error::Precondition(format!("{deck:?} is not a permutation of 0..{n}")));
        }
    }
    Ok(())
}

pub fn block_decomposition(deck1: &[usize], deck2: &[usize]) -> Result<BlockDecomposition> {
    let n = deck1.len();
    if deck2.len() != n {
        return Err(Error::Precondition("decks have different lengths".into()));
    }
    check_perm(deck1, n)?;
    check_perm(deck2, n)?;
    let dc = block_distances(deck1, deck2);
    let total: usize = dc.iter().sum();
    let d = if n == 0 { Rat::zero() } else { rat(total as i64, (n * n) as i64) };
    Ok(BlockDecomposition { blocks: blocks(deck1, deck2), dc, d })
}

impl BlockDecomposition {
    /// `|deck1^-1(c) - deck2^-1(c)| <= d_c` for every card.
    pub fn bounds_displacement(&self, deck1: &[usize], deck2: &[usize]) -> bool {
        let (i1, i2) = (inverse(deck1), inverse(deck2));
        (0..deck1.len()).all(|c| i1[c].abs_diff(i2[c]) <= self.dc[c])
    }
}
