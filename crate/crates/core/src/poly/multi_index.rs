use std::fmt;

use crate::error::{Error, Result};

/// Largest number of variables a [`MultiIndex`] can carry (so `n <= 8`
/// degrees of freedom for phase-space polynomials).
pub const MAX_VARS: usize = 16;

/// Largest exponent of a single variable.
pub const MAX_EXPONENT: u32 = u8::MAX as u32;

/// Exponent vector of a monomial.
///
/// For phase-space polynomials the layout is `(q_1..q_n, p_1..p_n)`; action
/// polynomials use one slot per action. Ordering is graded lexicographic:
/// total degree first, then exponents left to right.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    degree: u16,
    exps: [u8; MAX_VARS],
    len: u8,
}

impl MultiIndex {
    pub fn zero(len: usize) -> Self {
        assert!(len <= MAX_VARS, "multi-index length {len} exceeds {MAX_VARS}");
        Self {
            degree: 0,
            exps: [0; MAX_VARS],
            len: len as u8,
        }
    }

    pub fn new(exps: &[u32]) -> Result<Self> {
        if exps.len() > MAX_VARS {
            return Err(Error::invalid(format!(
                "multi-index length {} exceeds {MAX_VARS}",
                exps.len()
            )));
        }
        let mut out = Self::zero(exps.len());
        for (slot, &e) in out.exps.iter_mut().zip(exps) {
            if e > MAX_EXPONENT {
                return Err(Error::invalid(format!("exponent {e} exceeds {MAX_EXPONENT}")));
            }
            *slot = e as u8;
        }
        out.degree = exps.iter().sum::<u32>() as u16;
        Ok(out)
    }

    /// Unit vector `e_i`.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut out = Self::zero(len);
        out.exps[i] = 1;
        out.degree = 1;
        out
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn degree(&self) -> u32 {
        self.degree as u32
    }

    #[inline]
    pub fn get(&self, i: usize) -> u32 {
        self.exps[i] as u32
    }

    pub fn exponents(&self) -> &[u8] {
        &self.exps[..self.len as usize]
    }

    pub fn to_vec(&self) -> Vec<u32> {
        self.exponents().iter().map(|&e| e as u32).collect()
    }

    /// Componentwise sum. Panics if an exponent overflows.
    #[inline]
    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len, other.len);
        let mut out = *self;
        for i in 0..self.len as usize {
            out.exps[i] = self.exps[i]
                .checked_add(other.exps[i])
                .expect("monomial exponent overflow");
        }
        out.degree += other.degree;
        out
    }

    /// `self + other - e_i - e_j`, the exponent of a bracket contribution.
    /// Caller guarantees the subtraction is valid.
    #[inline]
    pub(crate) fn add_minus_pair(&self, other: &Self, i: usize, j: usize) -> Self {
        let mut out = self.add(other);
        out.exps[i] -= 1;
        out.exps[j] -= 1;
        out.degree -= 2;
        out
    }

    /// `self - e_i`, or `None` when the exponent of `i` is zero.
    pub fn lower(&self, i: usize) -> Option<Self> {
        if self.exps[i] == 0 {
            return None;
        }
        let mut out = *self;
        out.exps[i] -= 1;
        out.degree -= 1;
        Some(out)
    }

    pub(crate) fn set(&mut self, i: usize, e: u32) {
        let old = self.exps[i] as u16;
        self.exps[i] = e as u8;
        self.degree = self.degree - old + e as u16;
    }

    /// For a phase-space index of length `2n`: the q-part `(k_1..k_n)`.
    pub fn q_part(&self) -> &[u8] {
        let n = self.len as usize / 2;
        &self.exps[..n]
    }

    /// For a phase-space index of length `2n`: the p-part.
    pub fn p_part(&self) -> &[u8] {
        let n = self.len as usize / 2;
        &self.exps[n..2 * n]
    }

    /// Whether the q-part equals the p-part. In a complex chart this is the
    /// resonant (paired) structure `ζ^k ζ̄^k`.
    pub fn is_paired(&self) -> bool {
        self.len % 2 == 0 && self.q_part() == self.p_part()
    }

    /// Every index of total degree `d` in `len` variables, in ascending order.
    pub fn all_of_degree(len: usize, d: u32) -> Vec<Self> {
        fn rec(cur: &mut MultiIndex, i: usize, left: u32, out: &mut Vec<MultiIndex>) {
            if i + 1 == cur.len() {
                cur.set(i, left);
                out.push(*cur);
                cur.set(i, 0);
                return;
            }
            for e in 0..=left {
                cur.set(i, e);
                rec(cur, i + 1, left - e, out);
            }
            cur.set(i, 0);
        }
        let mut out = Vec::new();
        if len == 0 {
            return out;
        }
        rec(&mut Self::zero(len), 0, d, &mut out);
        out.sort();
        out
    }

    /// `q_part - p_part` as signed integers.
    pub fn pair_difference(&self) -> Vec<i64> {
        self.q_part()
            .iter()
            .zip(self.p_part())
            .map(|(&a, &b)| a as i64 - b as i64)
            .collect()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.exponents())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_order() {
        let a = MultiIndex::new(&[2, 0]).unwrap();
        let b = MultiIndex::new(&[0, 3]).unwrap();
        let c = MultiIndex::new(&[1, 2]).unwrap();
        assert!(a < b);
        assert!(b < c);
        assert_eq!(b.degree(), 3);
    }

    #[test]
    fn enumerates_a_degree() {
        let all = MultiIndex::all_of_degree(4, 3);
        assert_eq!(all.len() as u128, crate::poly::monomial_count(4, 3) - crate::poly::monomial_count(4, 2));
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(all.iter().all(|k| k.degree() == 3));
    }

    #[test]
    fn rejects_overlong_index() {
        assert!(MultiIndex::new(&[0; MAX_VARS + 1]).is_err());
        assert!(MultiIndex::new(&[256]).is_err());
    }

    #[test]
    fn pairing() {
        assert!(MultiIndex::new(&[1, 2, 1, 2]).unwrap().is_paired());
        assert!(!MultiIndex::new(&[1, 0, 0, 1]).unwrap().is_paired());
        assert_eq!(
            MultiIndex::new(&[3, 0, 1, 2]).unwrap().pair_difference(),
            vec![2, -2]
        );
    }
}
