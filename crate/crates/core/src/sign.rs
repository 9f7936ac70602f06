//! Normalized monomials in Λ(n,s,L) ⊗ C_n.
//!
//! Relations: e_i² = 0, e_i e_j = −e_j e_i, f_i² = 1, f_i f_j = −f_j f_i (i ≠ j), f_j e_i = −e_i f_j.
//! Normal form is `±e_{a1}…e_{ak} f_{b1}…f_{bm}` with both index lists strictly increasing.

use std::fmt;

use thiserror::Error;

use crate::coeff::{FieldSpec, Scalar};
use crate::tree::Tree;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignError {
    #[error("e{0} is not a generator of the ambient exterior algebra")]
    BadE(usize),
    #[error("f{0} is not a generator of the ambient Clifford algebra")]
    BadF(usize),
    #[error("relabeling map is undefined at {0}")]
    RhoUndefined(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gen {
    E(usize),
    F(usize),
}

impl Gen {
    fn key(self) -> (u8, usize) {
        match self {
            Gen::E(i) => (0, i),
            Gen::F(i) => (1, i),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignWord {
    Zero,
    Mono { negative: bool, e: Vec<usize>, f: Vec<usize> },
}

/// Generators available on a tree: e_i for `i ∈ {1..n−1} \ L`, f_j for `j ∈ {1..n}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ambient {
    n: usize,
    e_ok: Vec<bool>,
}

impl Ambient {
    pub fn of(t: &Tree) -> Self {
        Ambient { n: t.n(), e_ok: (1..=t.n()).map(|i| i < t.n() && !t.is_leaf(i)).collect() }
    }

    pub fn check(&self, w: &SignWord) -> Result<(), SignError> {
        if let SignWord::Mono { e, f, .. } = w {
            for &i in e {
                if i == 0 || i > self.n || !self.e_ok[i - 1] {
                    return Err(SignError::BadE(i));
                }
            }
            for &j in f {
                if j == 0 || j > self.n {
                    return Err(SignError::BadF(j));
                }
            }
        }
        Ok(())
    }
}

/// Merge sort by generator key, counting inversions between distinct keys.
fn sort_count(v: &mut Vec<Gen>) -> usize {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let right = v.split_off(n / 2);
    let mut left = std::mem::take(v);
    let mut right = right;
    let mut inv = sort_count(&mut left) + sort_count(&mut right);
    let (mut i, mut j) = (0, 0);
    v.reserve(n);
    while i < left.len() && j < right.len() {
        if right[j].key() < left[i].key() {
            inv += left.len() - i;
            v.push(right[j]);
            j += 1;
        } else {
            v.push(left[i]);
            i += 1;
        }
    }
    v.extend_from_slice(&left[i..]);
    v.extend_from_slice(&right[j..]);
    inv
}

impl SignWord {
    pub fn one() -> Self {
        SignWord::Mono { negative: false, e: vec![], f: vec![] }
    }

    pub fn e(i: usize) -> Self {
        SignWord::Mono { negative: false, e: vec![i], f: vec![] }
    }

    pub fn f(j: usize) -> Self {
        SignWord::Mono { negative: false, e: vec![], f: vec![j] }
    }

    /// Normal form of `±g_1 g_2 … g_k`.
    pub fn from_product(negative: bool, gens: &[Gen]) -> Self {
        let mut v = gens.to_vec();
        let inv = sort_count(&mut v);
        let negative = negative ^ (inv % 2 == 1);
        let mut e = Vec::new();
        let mut f: Vec<usize> = Vec::new();
        for g in v {
            match g {
                Gen::E(i) => {
                    if e.last() == Some(&i) {
                        return SignWord::Zero;
                    }
                    e.push(i);
                }
                Gen::F(j) => {
                    if f.last() == Some(&j) {
                        f.pop();
                    } else {
                        f.push(j);
                    }
                }
            }
        }
        SignWord::Mono { negative, e, f }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SignWord::Zero)
    }

    pub fn is_negative(&self) -> bool {
        matches!(self, SignWord::Mono { negative: true, .. })
    }

    pub fn e_indices(&self) -> &[usize] {
        match self {
            SignWord::Mono { e, .. } => e,
            SignWord::Zero => &[],
        }
    }

    pub fn f_indices(&self) -> &[usize] {
        match self {
            SignWord::Mono { f, .. } => f,
            SignWord::Zero => &[],
        }
    }

    /// Coefficient as a field element (0, 1 or −1).
    pub fn coefficient(&self, field: FieldSpec) -> Scalar {
        match self {
            SignWord::Zero => field.zero(),
            SignWord::Mono { negative, .. } => field.sign(*negative),
        }
    }

    pub fn gens(&self) -> Vec<Gen> {
        match self {
            SignWord::Zero => vec![],
            SignWord::Mono { e, f, .. } => e.iter().map(|&i| Gen::E(i)).chain(f.iter().map(|&j| Gen::F(j))).collect(),
        }
    }

    /// Same monomial with sign +1.
    pub fn unsigned(&self) -> SignWord {
        match self {
            SignWord::Zero => SignWord::Zero,
            SignWord::Mono { e, f, .. } => SignWord::Mono { negative: false, e: e.clone(), f: f.clone() },
        }
    }

    pub fn negated(&self) -> SignWord {
        match self {
            SignWord::Zero => SignWord::Zero,
            SignWord::Mono { negative, e, f } => SignWord::Mono { negative: !negative, e: e.clone(), f: f.clone() },
        }
    }

    /// Product without ambient checks.
    pub fn mul(&self, other: &SignWord) -> SignWord {
        match (self, other) {
            (SignWord::Mono { negative: a, .. }, SignWord::Mono { negative: b, .. }) => {
                let mut g = self.gens();
                g.extend(other.gens());
                SignWord::from_product(a ^ b, &g)
            }
            _ => SignWord::Zero,
        }
    }
}

pub fn multiply(amb: &Ambient, a: &SignWord, b: &SignWord) -> Result<SignWord, SignError> {
    amb.check(a)?;
    amb.check(b)?;
    Ok(a.mul(b))
}

/// Left derivative ∂/∂e_j.
pub fn partial_e(j: usize, w: &SignWord) -> SignWord {
    match w {
        SignWord::Zero => SignWord::Zero,
        SignWord::Mono { negative, e, f } => match e.iter().position(|&i| i == j) {
            None => SignWord::Zero,
            Some(pos) => {
                let mut e = e.clone();
                e.remove(pos);
                SignWord::Mono { negative: negative ^ (pos % 2 == 1), e, f: f.clone() }
            }
        },
    }
}

pub fn left_mul_f(i: usize, w: &SignWord) -> SignWord {
    SignWord::f(i).mul(w)
}

/// Applies `rho` (`rho[k - 1] = ρ(k)`) to every index, then renormalizes in the target ambient.
pub fn relabel(w: &SignWord, rho: &[usize], target: &Ambient) -> Result<SignWord, SignError> {
    let SignWord::Mono { negative, .. } = w else { return Ok(SignWord::Zero) };
    let map = |k: usize| rho.get(k.wrapping_sub(1)).copied().filter(|&x| x > 0).ok_or(SignError::RhoUndefined(k));
    let mut gens = Vec::new();
    for g in w.gens() {
        gens.push(match g {
            Gen::E(i) => Gen::E(map(i)?),
            Gen::F(j) => Gen::F(map(j)?),
        });
    }
    let out = SignWord::from_product(*negative, &gens);
    target.check(&out)?;
    Ok(out)
}

/// `∏_{i ∈ {1..n−1} \ L} e_i`, ascending, sign +1.
pub fn det_generator(t: &Tree) -> SignWord {
    SignWord::Mono { negative: false, e: t.inner_edges(), f: vec![] }
}

impl fmt::Display for SignWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignWord::Zero => write!(f, "0"),
            SignWord::Mono { negative, e, f: fs } => {
                let mut parts: Vec<String> = e.iter().map(|i| format!("e{i}")).collect();
                parts.extend(fs.iter().map(|j| format!("f{j}")));
                let body = if parts.is_empty() { "1".to_string() } else { parts.join(" ") };
                if *negative {
                    write!(f, "-{body}")
                } else {
                    write!(f, "{body}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(neg: bool, e: &[usize], f: &[usize]) -> SignWord {
        SignWord::Mono { negative: neg, e: e.to_vec(), f: f.to_vec() }
    }

    #[test]
    fn products() {
        assert_eq!(SignWord::f(2).mul(&SignWord::f(1)), w(true, &[], &[1, 2]));
        assert_eq!(SignWord::f(1).mul(&SignWord::f(1)), SignWord::one());
        assert_eq!(w(false, &[1], &[1]).mul(&SignWord::e(2)), w(true, &[1, 2], &[1]));
        assert_eq!(SignWord::e(1).mul(&SignWord::e(1)), SignWord::Zero);
    }

    #[test]
    fn derivatives() {
        let e12 = w(false, &[1, 2], &[]);
        assert_eq!(partial_e(1, &e12), SignWord::e(2));
        assert_eq!(partial_e(2, &e12), w(true, &[1], &[]));
        assert_eq!(partial_e(3, &e12), SignWord::Zero);
    }

    #[test]
    fn clifford_left_mul() {
        assert_eq!(left_mul_f(1, &SignWord::e(1)), w(true, &[1], &[1]));
        assert_eq!(left_mul_f(1, &SignWord::f(1)), SignWord::one());
        assert_eq!(left_mul_f(2, &w(false, &[1], &[1])), w(false, &[1], &[1, 2]));
    }

    #[test]
    fn relabel_examples() {
        let t = Tree::chain(3);
        let amb = Ambient::of(&Tree::chain(2));
        let t2 = Tree::new(2, &[2], &[]).unwrap();
        assert_eq!(relabel(&SignWord::e(2), &[1, 1, 2], &Ambient::of(&t2)).unwrap(), SignWord::e(1));
        assert_eq!(relabel(&w(false, &[], &[1, 2]), &[1, 1, 2], &amb).unwrap(), SignWord::one());
        assert_eq!(relabel(&w(false, &[1, 2], &[]), &[1, 1, 2], &Ambient::of(&t)).unwrap(), SignWord::Zero);
    }

    #[test]
    fn det_examples() {
        assert_eq!(det_generator(&Tree::bush(2)), SignWord::one());
        assert_eq!(det_generator(&Tree::chain(3)), SignWord::e(2));
        assert_eq!(det_generator(&Tree::single(true, 0)), SignWord::one());
        assert_eq!(w(true, &[1, 3], &[2]).to_string(), "-e1 e3 f2");
    }
}
