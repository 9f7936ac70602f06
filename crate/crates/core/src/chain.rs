//! Finite-dimensional chain complexes (d lowers degree by one), chain maps and homology.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::RangeInclusive;

use serde::Serialize;
use thiserror::Error;

use crate::coeff::{FieldSpec, Scalar};
use crate::linalg::{kernel_basis, Echelon, LinComb, SparseMatrix, SparseVec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("duplicate basis name `{0}`")]
    DuplicateName(String),
    #[error("unknown basis name `{0}`")]
    UnknownName(String),
    #[error("d({from}) has a component on `{to}` whose degree is not one lower")]
    DegreeMismatch { from: String, to: String },
    #[error("d∘d is nonzero on `{0}`")]
    NotSquareZero(String),
    #[error("matrix shape {rows}x{cols} does not fit {expected_rows}x{expected_cols}")]
    Shape { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("map is not of degree {degree} on `{element}`")]
    MapDegree { element: String, degree: i64 },
    #[error("map does not commute with differentials on `{0}`")]
    NotChainMap(String),
    #[error("field mismatch between complexes")]
    FieldMismatch,
    #[error("d({element}) leaves the window through `{term}`")]
    Overflow { element: String, term: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct GradedBasis {
    elements: Vec<(String, i64)>,
}

impl GradedBasis {
    pub fn new(elements: Vec<(String, i64)>) -> Result<Self, ChainError> {
        let mut seen = HashSet::new();
        for (n, _) in &elements {
            if !seen.insert(n.as_str()) {
                return Err(ChainError::DuplicateName(n.clone()));
            }
        }
        Ok(GradedBasis { elements })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.elements[i].0
    }

    pub fn degree(&self, i: usize) -> i64 {
        self.elements[i].1
    }

    pub fn elements(&self) -> &[(String, i64)] {
        &self.elements
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|(n, _)| n == name)
    }

    pub fn degrees(&self) -> BTreeSet<i64> {
        self.elements.iter().map(|(_, d)| *d).collect()
    }

    pub fn indices_in_degree(&self, k: i64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.elements[i].1 == k).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainComplex {
    field: FieldSpec,
    basis: GradedBasis,
    d: SparseMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HomologyGroup {
    pub dim: usize,
    /// Cycles (as coordinate vectors) whose classes form a basis.
    #[serde(skip)]
    pub representatives: Vec<SparseVec>,
}

impl ChainComplex {
    /// Builds a complex, checking degree lowering and d∘d = 0.
    pub fn new(field: FieldSpec, basis: GradedBasis, d: SparseMatrix) -> Result<Self, ChainError> {
        let n = basis.len();
        if d.nrows != n || d.ncols != n {
            return Err(ChainError::Shape { rows: d.nrows, cols: d.ncols, expected_rows: n, expected_cols: n });
        }
        for j in 0..n {
            for (i, x) in d.column_entries(j) {
                if x.field() != field {
                    return Err(ChainError::FieldMismatch);
                }
                if basis.degree(*i) != basis.degree(j) - 1 {
                    return Err(ChainError::DegreeMismatch {
                        from: basis.name(j).to_string(),
                        to: basis.name(*i).to_string(),
                    });
                }
            }
        }
        let dd = d.compose(&d);
        if let Some(j) = (0..n).find(|&j| !dd.column_entries(j).is_empty()) {
            return Err(ChainError::NotSquareZero(basis.name(j).to_string()));
        }
        Ok(ChainComplex { field, basis, d })
    }

    /// Builds a complex from named differentials `name -> [(target, coeff)]`.
    pub fn from_named(
        field: FieldSpec,
        elements: Vec<(String, i64)>,
        d: &[(String, Vec<(String, Scalar)>)],
    ) -> Result<Self, ChainError> {
        let basis = GradedBasis::new(elements)?;
        let mut cols = vec![SparseVec::new(); basis.len()];
        for (src, terms) in d {
            let j = basis.index_of(src).ok_or_else(|| ChainError::UnknownName(src.clone()))?;
            for (t, c) in terms {
                let i = basis.index_of(t).ok_or_else(|| ChainError::UnknownName(t.clone()))?;
                let e = cols[j].entry(i).or_insert_with(|| field.zero());
                *e = &*e + c;
            }
        }
        let cols = cols.into_iter().map(|c| c.into_iter().filter(|(_, x)| !x.is_zero()).collect()).collect();
        let m = SparseMatrix::from_columns(basis.len(), cols);
        ChainComplex::new(field, basis, m)
    }

    pub fn zero(field: FieldSpec) -> Self {
        ChainComplex { field, basis: GradedBasis::default(), d: SparseMatrix::zero(0, 0) }
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn d(&self) -> &SparseMatrix {
        &self.d
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn dims_by_degree(&self) -> BTreeMap<i64, usize> {
        let mut m = BTreeMap::new();
        for (_, k) in self.basis.elements() {
            *m.entry(*k).or_insert(0) += 1;
        }
        m
    }

    fn cycles(&self, k: i64) -> Vec<SparseVec> {
        let idx = self.basis.indices_in_degree(k);
        let cols: Vec<SparseVec> = idx.iter().map(|&j| self.d.column(j)).collect();
        let local = SparseMatrix::from_columns(self.dim(), cols);
        kernel_basis(self.field, &local)
            .into_iter()
            .map(|v| v.into_iter().map(|(l, x)| (idx[l], x)).collect())
            .collect()
    }

    fn boundaries(&self, k: i64) -> Echelon {
        let mut e = Echelon::new(self.field);
        let mut cols: Vec<SparseVec> =
            self.basis.indices_in_degree(k + 1).into_iter().map(|j| self.d.column(j)).collect();
        cols.sort_by_key(|c| c.len());
        for c in cols {
            e.insert(c);
        }
        e
    }

    pub fn homology_in_degree(&self, k: i64) -> HomologyGroup {
        let mut e = self.boundaries(k);
        let mut reps = Vec::new();
        for z in self.cycles(k) {
            if e.insert(z.clone()) {
                reps.push(z);
            }
        }
        HomologyGroup { dim: reps.len(), representatives: reps }
    }

    pub fn homology(&self, window: RangeInclusive<i64>) -> BTreeMap<i64, HomologyGroup> {
        window.map(|k| (k, self.homology_in_degree(k))).collect()
    }

    /// `X[n]`: an element of degree k moves to degree k + n.
    pub fn shift(&self, n: i64) -> ChainComplex {
        let elements = self.basis.elements().iter().map(|(s, k)| (s.clone(), k + n)).collect();
        ChainComplex { field: self.field, basis: GradedBasis { elements }, d: self.d.clone() }
    }

    /// `a ⊗ b` with d(x⊗y) = dx⊗y + (−1)^{|x|} x⊗dy; basis pair (i, j) has index i·dim(b) + j.
    pub fn tensor(&self, other: &ChainComplex) -> Result<ChainComplex, ChainError> {
        if self.field != other.field {
            return Err(ChainError::FieldMismatch);
        }
        let nb = other.dim();
        let mut elements = Vec::with_capacity(self.dim() * nb);
        for (x, dx) in self.basis.elements() {
            for (y, dy) in other.basis.elements() {
                elements.push((format!("{x}⊗{y}"), dx + dy));
            }
        }
        let mut cols = Vec::with_capacity(elements.len());
        for i in 0..self.dim() {
            let sign = self.field.sign(self.basis.degree(i).rem_euclid(2) == 1);
            for j in 0..nb {
                let mut v = SparseVec::new();
                for (r, c) in self.d.column_entries(i) {
                    v.insert(r * nb + j, c.clone());
                }
                for (r, c) in other.d.column_entries(j) {
                    v.insert(i * nb + r, c * &sign);
                }
                cols.push(v);
            }
        }
        let n = elements.len();
        ChainComplex::new(self.field, GradedBasis::new(elements)?, SparseMatrix::from_columns(n, cols))
    }

    /// The subcomplex spanned by the masked basis elements, with its inclusion.
    pub fn subcomplex(&self, mask: &[bool]) -> Result<(ChainComplex, ChainMap), ChainError> {
        let keep: Vec<usize> = (0..self.dim()).filter(|&i| mask[i]).collect();
        let mut pos = vec![usize::MAX; self.dim()];
        for (l, &i) in keep.iter().enumerate() {
            pos[i] = l;
        }
        let mut cols = Vec::new();
        for &j in &keep {
            let mut v = SparseVec::new();
            for (i, c) in self.d.column_entries(j) {
                if pos[*i] == usize::MAX {
                    return Err(ChainError::NotChainMap(self.basis.name(j).to_string()));
                }
                v.insert(pos[*i], c.clone());
            }
            cols.push(v);
        }
        let elements = keep.iter().map(|&i| self.basis.elements()[i].clone()).collect();
        let sub = ChainComplex::new(self.field, GradedBasis { elements }, SparseMatrix::from_columns(keep.len(), cols))?;
        let incl_cols = keep.iter().map(|&i| SparseVec::from([(i, self.field.one())])).collect();
        let incl = SparseMatrix::from_columns(self.dim(), incl_cols);
        let map = ChainMap::new(sub.clone(), self.clone(), incl, 0)?;
        Ok((sub, map))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMap {
    pub source: ChainComplex,
    pub target: ChainComplex,
    pub matrix: SparseMatrix,
    pub degree: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeEvidence {
    pub degree: i64,
    pub source_dim: usize,
    pub target_dim: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuasiIsoEvidence {
    pub iso: bool,
    pub degrees: Vec<DegreeEvidence>,
}

impl ChainMap {
    /// Checks degrees and d_target ∘ f = (−1)^degree f ∘ d_source.
    pub fn new(source: ChainComplex, target: ChainComplex, matrix: SparseMatrix, degree: i64) -> Result<Self, ChainError> {
        if source.field != target.field {
            return Err(ChainError::FieldMismatch);
        }
        if matrix.nrows != target.dim() || matrix.ncols != source.dim() {
            return Err(ChainError::Shape {
                rows: matrix.nrows,
                cols: matrix.ncols,
                expected_rows: target.dim(),
                expected_cols: source.dim(),
            });
        }
        for j in 0..source.dim() {
            for (i, _) in matrix.column_entries(j) {
                if target.basis.degree(*i) != source.basis.degree(j) + degree {
                    return Err(ChainError::MapDegree { element: source.basis.name(j).to_string(), degree });
                }
            }
        }
        let left = target.d.compose(&matrix);
        let sign = source.field.sign(degree.rem_euclid(2) == 1);
        let right = matrix.compose(&source.d).scale_columns(|_| sign.clone());
        if let Some((_, j, _, _)) = left.first_difference(&right, source.field) {
            return Err(ChainError::NotChainMap(source.basis.name(j).to_string()));
        }
        Ok(ChainMap { source, target, matrix, degree })
    }

    pub fn identity(c: &ChainComplex) -> ChainMap {
        let cols = (0..c.dim()).map(|i| SparseVec::from([(i, c.field.one())])).collect();
        ChainMap { source: c.clone(), target: c.clone(), matrix: SparseMatrix::from_columns(c.dim(), cols), degree: 0 }
    }

    /// Rank of the induced map H_k(source) → H_{k+degree}(target).
    pub fn induced_rank(&self, k: i64) -> usize {
        let reps = self.source.homology_in_degree(k).representatives;
        let mut e = self.target.boundaries(k + self.degree);
        let base = e.rank();
        for z in reps {
            e.insert(self.matrix.apply(&z));
        }
        e.rank() - base
    }
}

/// Complex spanned by `basis` (sorted, distinct) under `d`; fails when `d` leaves the span.
/// Returns the complex and the index of every basis element.
pub fn span_complex<E, N, G, D>(
    field: FieldSpec,
    basis: &[E],
    name: N,
    degree: G,
    d: D,
) -> Result<(ChainComplex, BTreeMap<E, usize>), ChainError>
where
    E: Ord + Clone + Send + Sync,
    N: Fn(&E) -> String + Sync,
    G: Fn(&E) -> i64 + Sync,
    D: Fn(&E) -> LinComb<E> + Sync,
{
    use rayon::prelude::*;
    let index: BTreeMap<E, usize> = basis.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
    let images: Vec<LinComb<E>> = basis.par_iter().map(&d).collect();
    let mut cols = Vec::with_capacity(basis.len());
    for (j, img) in images.into_iter().enumerate() {
        let mut col = SparseVec::new();
        for (t, c) in img {
            match index.get(&t) {
                Some(&i) => {
                    col.insert(i, c);
                }
                None => return Err(ChainError::Overflow { element: name(&basis[j]), term: name(&t) }),
            }
        }
        cols.push(col);
    }
    let gb = GradedBasis::new(basis.iter().map(|e| (name(e), degree(e))).collect())?;
    let c = ChainComplex::new(field, gb, SparseMatrix::from_columns(basis.len(), cols))?;
    Ok((c, index))
}

pub fn is_quasi_iso(f: &ChainMap, window: RangeInclusive<i64>) -> QuasiIsoEvidence {
    let mut degrees = Vec::new();
    let mut iso = true;
    for k in window {
        let s = f.source.homology_in_degree(k).dim;
        let t = f.target.homology_in_degree(k + f.degree).dim;
        let r = f.induced_rank(k);
        if !(s == t && r == s) {
            iso = false;
        }
        degrees.push(DegreeEvidence { degree: k, source_dim: s, target_dim: t, rank: r });
    }
    QuasiIsoEvidence { iso, degrees }
}

/// Dimensions of the images H_k(sub) → H_k(c) for the subcomplex given by `mask`.
pub fn persistent_dims(
    c: &ChainComplex,
    mask: &[bool],
    window: RangeInclusive<i64>,
) -> Result<BTreeMap<i64, usize>, ChainError> {
    let (_, incl) = c.subcomplex(mask)?;
    Ok(window.map(|k| (k, incl.induced_rank(k))).collect())
}
