//! Sparse vectors, formal linear combinations and exact row echelon forms.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::coeff::{FieldSpec, Scalar};

/// Finite K-linear combination of basis keys, zero coefficients pruned.
#[derive(Clone, PartialEq, Eq)]
pub struct LinComb<T: Ord> {
    terms: BTreeMap<T, Scalar>,
}

impl<T: Ord> Default for LinComb<T> {
    fn default() -> Self {
        LinComb { terms: BTreeMap::new() }
    }
}

impl<T: Ord + fmt::Debug> fmt::Debug for LinComb<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}*{k:?}")?;
        }
        Ok(())
    }
}

impl<T: Ord + Clone> LinComb<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(key: T, coeff: Scalar) -> Self {
        let mut v = Self::new();
        v.add_term(key, coeff);
        v
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, key: &T) -> Option<&Scalar> {
        self.terms.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &Scalar)> {
        self.terms.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &T> {
        self.terms.keys()
    }

    pub fn add_term(&mut self, key: T, coeff: Scalar) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&key) {
            Some(c) => {
                let s = &*c + &coeff;
                if s.is_zero() {
                    self.terms.remove(&key);
                } else {
                    *c = s;
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &LinComb<T>, coeff: &Scalar) {
        if coeff.is_zero() {
            return;
        }
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c * coeff);
        }
    }

    pub fn add_assign(&mut self, other: &LinComb<T>) {
        for (k, c) in &other.terms {
            self.add_term(k.clone(), c.clone());
        }
    }

    pub fn scaled(&self, coeff: &Scalar) -> LinComb<T> {
        let mut out = LinComb::new();
        out.add_scaled(self, coeff);
        out
    }

    pub fn neg(&self) -> LinComb<T> {
        LinComb {
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c.neg())).collect(),
        }
    }

    pub fn sub(&self, other: &LinComb<T>) -> LinComb<T> {
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.neg());
        }
        out
    }

    pub fn map_keys<U: Ord + Clone>(&self, mut f: impl FnMut(&T) -> U) -> LinComb<U> {
        let mut out = LinComb::new();
        for (k, c) in &self.terms {
            out.add_term(f(k), c.clone());
        }
        out
    }

    /// Applies a linear map given on basis keys.
    pub fn apply<U: Ord + Clone>(&self, mut f: impl FnMut(&T) -> LinComb<U>) -> LinComb<U> {
        let mut out = LinComb::new();
        for (k, c) in &self.terms {
            out.add_scaled(&f(k), c);
        }
        out
    }

    pub fn into_terms(self) -> BTreeMap<T, Scalar> {
        self.terms
    }
}

impl<T: Ord + Clone> FromIterator<(T, Scalar)> for LinComb<T> {
    fn from_iter<I: IntoIterator<Item = (T, Scalar)>>(iter: I) -> Self {
        let mut v = LinComb::new();
        for (k, c) in iter {
            v.add_term(k, c);
        }
        v
    }
}

impl<T: Ord> IntoIterator for LinComb<T> {
    type Item = (T, Scalar);
    type IntoIter = std::collections::btree_map::IntoIter<T, Scalar>;
    fn into_iter(self) -> Self::IntoIter {
        self.terms.into_iter()
    }
}

pub type SparseVec = BTreeMap<usize, Scalar>;

fn axpy(v: &mut SparseVec, c: &Scalar, row: &[(usize, Scalar)]) {
    for (j, a) in row {
        let t = c * a;
        match v.get_mut(j) {
            Some(x) => {
                let s = &*x + &t;
                if s.is_zero() {
                    v.remove(j);
                } else {
                    *x = s;
                }
            }
            None => {
                if !t.is_zero() {
                    v.insert(*j, t);
                }
            }
        }
    }
}

/// Incremental row echelon basis with unit leading entries.
#[derive(Clone, Debug)]
pub struct Echelon {
    field: FieldSpec,
    rows: Vec<Vec<(usize, Scalar)>>,
    history: Vec<SparseVec>,
    pivot_of: HashMap<usize, usize>,
    track: bool,
}

impl Echelon {
    pub fn new(field: FieldSpec) -> Self {
        Echelon { field, rows: Vec::new(), history: Vec::new(), pivot_of: HashMap::new(), track: false }
    }

    /// Also records, for every row, the combination of inserted vectors producing it.
    pub fn with_history(field: FieldSpec) -> Self {
        Echelon { track: true, ..Echelon::new(field) }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn pivots(&self) -> impl Iterator<Item = usize> + '_ {
        self.pivot_of.keys().copied()
    }

    /// Reduces until the leading column has no pivot. Returns the residue and its history.
    fn reduce_leading(&self, mut v: SparseVec, mut hist: SparseVec) -> (SparseVec, SparseVec) {
        loop {
            let Some((&col, c)) = v.iter().next() else { break };
            let Some(&r) = self.pivot_of.get(&col) else { break };
            let c = c.neg();
            axpy(&mut v, &c, &self.rows[r]);
            if self.track {
                let h: Vec<(usize, Scalar)> = self.history[r].iter().map(|(k, x)| (*k, x.clone())).collect();
                axpy(&mut hist, &c, &h);
            }
        }
        (v, hist)
    }

    /// Eliminates every pivot column from `v`.
    pub fn reduce_full(&self, mut v: SparseVec) -> SparseVec {
        let mut start = 0;
        while let Some(col) = v.keys().copied().find(|c| *c >= start && self.pivot_of.contains_key(c)) {
            let c = v[&col].neg();
            axpy(&mut v, &c, &self.rows[self.pivot_of[&col]]);
            start = col + 1;
        }
        v
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce_leading(v.clone(), SparseVec::new()).0.is_empty()
    }

    /// Inserts `v`; returns false when it was already in the span.
    pub fn insert(&mut self, v: SparseVec) -> bool {
        self.insert_tagged(v, None).is_none()
    }

    /// Inserts `v` tagged with index `tag` in the history. When `v` lies in the span, returns
    /// the dependency: a combination of tags summing to zero.
    pub fn insert_tagged(&mut self, v: SparseVec, tag: Option<usize>) -> Option<SparseVec> {
        let mut hist = SparseVec::new();
        if let Some(t) = tag {
            hist.insert(t, self.field.one());
        }
        let (v, hist) = self.reduce_leading(v, hist);
        let Some((&col, lead)) = v.iter().next() else {
            return Some(hist);
        };
        let inv = lead.inv().expect("nonzero leading entry");
        let row: Vec<(usize, Scalar)> = v.iter().map(|(k, x)| (*k, x * &inv)).collect();
        self.pivot_of.insert(col, self.rows.len());
        self.rows.push(row);
        if self.track {
            self.history.push(hist.into_iter().map(|(k, x)| (k, &x * &inv)).collect());
        }
        None
    }
}

/// Column-major sparse matrix; column `j` is the image of source basis vector `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    cols: Vec<Vec<(usize, Scalar)>>,
}

impl SparseMatrix {
    pub fn zero(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, cols: vec![Vec::new(); ncols] }
    }

    pub fn from_columns(nrows: usize, cols: Vec<SparseVec>) -> Self {
        let ncols = cols.len();
        let cols = cols
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .filter(|(_, x)| !x.is_zero())
                    .inspect(|(i, _)| assert!(*i < nrows, "row index out of range"))
                    .collect()
            })
            .collect();
        SparseMatrix { nrows, ncols, cols }
    }

    pub fn column(&self, j: usize) -> SparseVec {
        self.cols[j].iter().cloned().collect()
    }

    pub fn column_entries(&self, j: usize) -> &[(usize, Scalar)] {
        &self.cols[j]
    }

    pub fn entry(&self, i: usize, j: usize) -> Option<&Scalar> {
        self.cols[j].iter().find(|(r, _)| *r == i).map(|(_, x)| x)
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (j, c) in v {
            axpy(&mut out, c, &self.cols[*j]);
        }
        out
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows, "dimension mismatch in composition");
        let cols = (0..other.ncols).map(|j| self.apply(&other.column(j))).collect();
        SparseMatrix::from_columns(self.nrows, cols)
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(|c| c.is_empty())
    }

    pub fn scale_columns(&self, f: impl Fn(usize) -> Scalar) -> SparseMatrix {
        let cols = (0..self.ncols)
            .map(|j| {
                let s = f(j);
                self.cols[j].iter().map(|(i, x)| (*i, x * &s)).collect()
            })
            .collect();
        SparseMatrix::from_columns(self.nrows, cols)
    }

    pub fn sub(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let cols = (0..self.ncols)
            .map(|j| {
                let mut v = self.column(j);
                let neg: Vec<(usize, Scalar)> = other.cols[j].iter().map(|(i, x)| (*i, x.neg())).collect();
                let one = neg.first().map(|(_, x)| x.field().one());
                if let Some(one) = one {
                    axpy(&mut v, &one, &neg);
                }
                v
            })
            .collect();
        SparseMatrix::from_columns(self.nrows, cols)
    }

    /// First entry where the two matrices differ, as `(row, col, left, right)`.
    pub fn first_difference(&self, other: &SparseMatrix, field: FieldSpec) -> Option<(usize, usize, Scalar, Scalar)> {
        for j in 0..self.ncols.max(other.ncols) {
            let a = if j < self.ncols { self.column(j) } else { SparseVec::new() };
            let b = if j < other.ncols { other.column(j) } else { SparseVec::new() };
            if a != b {
                let mut rows: Vec<usize> = a.keys().chain(b.keys()).copied().collect();
                rows.sort_unstable();
                for i in rows {
                    let x = a.get(&i).cloned().unwrap_or_else(|| field.zero());
                    let y = b.get(&i).cloned().unwrap_or_else(|| field.zero());
                    if x != y {
                        return Some((i, j, x, y));
                    }
                }
            }
        }
        None
    }
}

/// Rank of a set of vectors, inserting sparsest first.
pub fn rank_of(field: FieldSpec, vectors: impl IntoIterator<Item = SparseVec>) -> usize {
    let mut vs: Vec<SparseVec> = vectors.into_iter().filter(|v| !v.is_empty()).collect();
    vs.sort_by_key(|v| v.len());
    let mut e = Echelon::new(field);
    for v in vs {
        e.insert(v);
    }
    e.rank()
}

pub fn matrix_rank(field: FieldSpec, m: &SparseMatrix) -> usize {
    rank_of(field, (0..m.ncols).map(|j| m.column(j)))
}

/// Basis of the kernel of `m`, as vectors in the source.
pub fn kernel_basis(field: FieldSpec, m: &SparseMatrix) -> Vec<SparseVec> {
    let mut order: Vec<usize> = (0..m.ncols).collect();
    order.sort_by_key(|&j| m.column_entries(j).len());
    let mut e = Echelon::with_history(field);
    let mut out = Vec::new();
    for j in order {
        if let Some(dep) = e.insert_tagged(m.column(j), Some(j)) {
            out.push(dep);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vecq(f: FieldSpec, xs: &[(usize, i64)]) -> SparseVec {
        xs.iter().map(|(i, x)| (*i, f.from_i64(*x))).filter(|(_, x)| !x.is_zero()).collect()
    }

    #[test]
    fn lincomb_cancels() {
        let q = FieldSpec::Rationals;
        let mut v = LinComb::single("a", q.one());
        v.add_term("a", q.from_i64(-1));
        assert!(v.is_zero());
        v.add_term("b", q.from_i64(2));
        assert_eq!(v.sub(&v), LinComb::new());
    }

    #[test]
    fn rank_over_f2() {
        let f2 = FieldSpec::prime(2).unwrap();
        let m = SparseMatrix::from_columns(2, vec![vecq(f2, &[(0, 1), (1, 1)]), vecq(f2, &[(0, 1), (1, 1)])]);
        assert_eq!(matrix_rank(f2, &m), 1);
        let q = FieldSpec::Rationals;
        let m = SparseMatrix::from_columns(2, vec![vecq(q, &[(0, 1), (1, 1)]), vecq(q, &[(0, 1), (1, -1)])]);
        assert_eq!(matrix_rank(q, &m), 2);
    }

    #[test]
    fn kernel_vectors_are_in_kernel() {
        let q = FieldSpec::Rationals;
        let m = SparseMatrix::from_columns(
            2,
            vec![vecq(q, &[(0, 1)]), vecq(q, &[(0, 2), (1, 1)]), vecq(q, &[(0, 3), (1, 1)]), vecq(q, &[])],
        );
        let k = kernel_basis(q, &m);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(m.apply(v).is_empty());
        }
    }

    #[test]
    fn full_reduction() {
        let q = FieldSpec::Rationals;
        let mut e = Echelon::new(q);
        e.insert(vecq(q, &[(0, 1), (1, 1)]));
        e.insert(vecq(q, &[(1, 1), (2, 1)]));
        let r = e.reduce_full(vecq(q, &[(0, 1), (1, 0), (2, 5)]));
        assert!(!r.contains_key(&0) && !r.contains_key(&1));
        assert_eq!(r.get(&2), Some(&q.from_i64(6)));
    }
}
