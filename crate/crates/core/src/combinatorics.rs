//! Exact binomial coefficients and colexicographic subset enumeration.
//!
//! Subsets of `{1, ..., n}` are represented as `u64` bitmasks where bit `i`
//! stands for element `i + 1`, so `n` is limited to 64. Increasing integer
//! order of equal-weight bitmasks is exactly colexicographic order, which is
//! what gives constructed graphs their stable vertex and matching indices.

use thiserror::Error;

/// Largest ground set a bitmask subset can describe.
pub const MAX_GROUND_SET: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CombinatoricsError {
    #[error("binomial coefficient C({n}, {k}) overflows u64")]
    Overflow { n: u64, k: u64 },
    #[error("ground set of size {0} exceeds the supported maximum of 64")]
    GroundSetTooLarge(u32),
}

/// `C(n, k)` with overflow checking. Returns 0 when `k > n`.
pub fn binomial(n: u64, k: u64) -> Result<u64, CombinatoricsError> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return Err(CombinatoricsError::Overflow { n, k });
        }
    }
    Ok(acc as u64)
}

/// Colexicographic rank of a subset among all subsets of the same size.
///
/// For sorted 0-based elements `c_0 < c_1 < ... < c_{m-1}` the rank is
/// `sum C(c_i, i + 1)`.
pub fn colex_rank(mask: u64) -> u64 {
    let mut rank = 0u64;
    let mut rest = mask;
    let mut i = 0u64;
    while rest != 0 {
        let c = u64::from(rest.trailing_zeros());
        // Cannot overflow: the rank is below C(64, popcount) which fits in u64.
        rank += binomial(c, i + 1).expect("colex rank term fits in u64");
        rest &= rest - 1;
        i += 1;
    }
    rank
}

/// Iterator over all `k`-subsets of `{1, ..., n}` in colexicographic order.
#[derive(Debug, Clone)]
pub struct Subsets {
    next: Option<u64>,
    limit_bit: u32,
}

impl Iterator for Subsets {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let cur = self.next?;
        self.next = next_same_weight(cur)
            .filter(|&m| self.limit_bit == MAX_GROUND_SET || m >> self.limit_bit == 0);
        Some(cur)
    }
}

/// Enumerate `k`-subsets of an `n`-element ground set.
pub fn subsets(n: u32, k: u32) -> Result<Subsets, CombinatoricsError> {
    if n > MAX_GROUND_SET {
        return Err(CombinatoricsError::GroundSetTooLarge(n));
    }
    let first = if k > n {
        None
    } else if k == 64 {
        Some(u64::MAX)
    } else {
        Some((1u64 << k) - 1)
    };
    Ok(Subsets {
        next: first,
        limit_bit: n,
    })
}

// Gosper's hack; None once the pattern would run past bit 63.
fn next_same_weight(x: u64) -> Option<u64> {
    if x == 0 {
        return None;
    }
    let c = x & x.wrapping_neg();
    let (r, overflow) = x.overflowing_add(c);
    if overflow || r == 0 {
        return None;
    }
    Some((((r ^ x) >> 2) / c) | r)
}

/// 1-based elements of a subset mask, ascending.
pub fn elements(mask: u64) -> Vec<u32> {
    let mut out = Vec::with_capacity(mask.count_ones() as usize);
    let mut rest = mask;
    while rest != 0 {
        out.push(rest.trailing_zeros() + 1);
        rest &= rest - 1;
    }
    out
}

/// Bitmask of a set of 1-based elements.
pub fn mask_of(elements: &[u32]) -> u64 {
    elements.iter().fold(0u64, |m, &e| m | (1u64 << (e - 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(5, 2).unwrap(), 10);
        assert_eq!(binomial(10, 5).unwrap(), 252);
        assert_eq!(binomial(0, 0).unwrap(), 1);
        assert_eq!(binomial(3, 4).unwrap(), 0);
        assert_eq!(binomial(1000, 2).unwrap(), 499_500);
        assert_eq!(binomial(64, 32).unwrap(), 1_832_624_140_942_590_534);
    }

    #[test]
    fn binomial_overflow_is_reported() {
        assert_eq!(
            binomial(200, 100),
            Err(CombinatoricsError::Overflow { n: 200, k: 100 })
        );
    }

    #[test]
    fn colex_order_for_two_subsets_of_four() {
        let got: Vec<Vec<u32>> = subsets(4, 2).unwrap().map(elements).collect();
        assert_eq!(
            got,
            vec![
                vec![1, 2],
                vec![1, 3],
                vec![2, 3],
                vec![1, 4],
                vec![2, 4],
                vec![3, 4]
            ]
        );
    }

    #[test]
    fn rank_matches_enumeration_position() {
        for n in 0..=10u32 {
            for k in 0..=n {
                let all: Vec<u64> = subsets(n, k).unwrap().collect();
                assert_eq!(all.len() as u64, binomial(n.into(), k.into()).unwrap());
                for (i, &m) in all.iter().enumerate() {
                    assert_eq!(colex_rank(m), i as u64);
                }
            }
        }
    }

    #[test]
    fn empty_and_oversized() {
        assert_eq!(subsets(3, 4).unwrap().count(), 0);
        assert_eq!(subsets(5, 0).unwrap().collect::<Vec<_>>(), vec![0]);
        assert!(subsets(65, 2).is_err());
        assert_eq!(subsets(64, 64).unwrap().count(), 1);
        assert_eq!(subsets(64, 63).unwrap().count(), 64);
    }

    #[test]
    fn mask_roundtrip() {
        assert_eq!(elements(mask_of(&[1, 4, 7])), vec![1, 4, 7]);
    }
}
