//! D-structures: a graded module `N` with `d` and a splitting `δ: N → CN`, the induced
//! differential `Δ` on the free algebra `CN`, the bar D-structure, morphisms, and the
//! roundtrip certificates.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::Hash;
use std::sync::{Arc, RwLock};

use serde::Serialize;
use thiserror::Error;

use crate::algebra::Carrier;
use crate::bar::{Bar, BarBasis, BarError, Label};
use crate::chain::{is_quasi_iso, persistent_dims, span_complex, ChainComplex, ChainError, ChainMap, QuasiIsoEvidence};
use crate::coeff::{FieldSpec, Scalar};
use crate::linalg::{LinComb, SparseMatrix, SparseVec};
use crate::operad::{koszul_negative, CheckOutcome, OpElem, Operad, OperadError, VerifyReport};
use crate::tree::{permutations, SortId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DError {
    #[error(transparent)]
    Operad(#[from] OperadError),
    #[error(transparent)]
    Bar(#[from] BarError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("generator `{name}`: {reason}")]
    Invalid { name: String, reason: String },
    #[error("no weight grading: δ feeds back into `{0}`")]
    NoWeight(String),
    #[error("morphism image of `{element}` leaves the target window at `{term}`")]
    Overflow { element: String, term: String },
}

/// One term `coeff · (z_1 ⊗ … ⊗ z_m ⊗ op)` of `δ(x)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaTerm<G> {
    pub inputs: Vec<G>,
    pub op: OpElem,
    pub coeff: Scalar,
}

/// The data of a D-structure. `weight` is at least 1, never increased by `d`, and strictly
/// larger than the total weight of every δ-term; windows of bounded weight are then finite
/// and closed under `Δ`.
pub trait Generators: Send + Sync {
    type Gen: Clone + Ord + Hash + fmt::Debug + Send + Sync;

    fn operad(&self) -> &Operad;

    fn field(&self) -> FieldSpec {
        self.operad().field()
    }

    fn degree(&self, x: &Self::Gen) -> i64;

    fn sort(&self, x: &Self::Gen) -> SortId;

    fn weight(&self, x: &Self::Gen) -> usize;

    fn d(&self, x: &Self::Gen) -> Result<LinComb<Self::Gen>, OperadError>;

    fn delta(&self, x: &Self::Gen) -> Result<Vec<DeltaTerm<Self::Gen>>, OperadError>;

    /// Generators of weight at most `w`, sorted.
    fn basis_upto(&self, w: usize) -> Result<Vec<Self::Gen>, OperadError>;

    fn gen_name(&self, x: &Self::Gen) -> String;
}

/// `(y_1 ⊗ … ⊗ y_m) ⊗ c` in `CN = ⊕ N^{⊗m} ⊗_{Σ_m} 𝒞(m)`, inputs sorted and `c` minimal in
/// its stabilizer orbit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CnBasis<G> {
    pub inputs: Vec<G>,
    pub op: OpElem,
}

type CnKey<G> = (Vec<G>, OpElem);

/// The free algebra `CN` with differential `Δ`, i.e. `C_Δ(N)`.
pub struct Cn<'a, G: Generators> {
    pub gens: &'a G,
    norm: RwLock<HashMap<CnKey<G::Gen>, Option<(CnBasis<G::Gen>, bool)>>>,
}

fn monomial(op: &Operad, v: LinComb<OpElem>, x: OpElem) -> Result<(OpElem, bool), OperadError> {
    let mut it = v.iter();
    match (it.next(), it.next()) {
        (Some((y, c)), None) if c.is_one() => Ok((*y, false)),
        (Some((y, c)), None) if c.neg().is_one() => Ok((*y, true)),
        _ => Err(OperadError::NotMonomial(op.name(x).to_string())),
    }
}

/// Permutations fixing a sorted tuple: products of permutations within runs of equal entries.
fn stabilizer<T: PartialEq>(sorted: &[T]) -> Vec<Vec<usize>> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] != sorted[start] {
            runs.push((start, i - start));
            start = i;
        }
    }
    let mut out = vec![Vec::new()];
    for (s, len) in runs {
        let perms = permutations(len);
        let mut next = Vec::with_capacity(out.len() * perms.len());
        for base in &out {
            for p in &perms {
                let mut v: Vec<usize> = base.clone();
                v.extend(p.iter().map(|&x| x + s + 1));
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn sign_of(neg: bool, c: &Scalar) -> Scalar {
    if neg {
        c.neg()
    } else {
        c.clone()
    }
}

impl<'a, G: Generators> Cn<'a, G> {
    pub fn new(gens: &'a G) -> Result<Self, DError> {
        let op = gens.operad();
        if !op.is_monomial() {
            return Err(OperadError::NotMonomial(op.builtin_name().unwrap_or("operad").to_string()).into());
        }
        Ok(Cn { gens, norm: RwLock::new(HashMap::new()) })
    }

    pub fn op(&self) -> &Operad {
        self.gens.operad()
    }

    fn odd(&self, x: &G::Gen) -> bool {
        self.gens.degree(x).rem_euclid(2) == 1
    }

    fn normal_form(&self, ys: &[G::Gen], c: OpElem) -> Result<Option<(CnBasis<G::Gen>, bool)>, OperadError> {
        let key = (ys.to_vec(), c);
        if let Some(v) = self.norm.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let op = self.op();
        let m = ys.len();
        if op.arity(c) != m {
            return Err(OperadError::ArityMismatch(format!("{m} inputs for `{}`", op.name(c))));
        }
        for (i, y) in ys.iter().enumerate() {
            if self.gens.sort(y) != op.signature(c).inputs[i] {
                return Err(OperadError::SortMismatch(format!("input {} of `{}`", i + 1, op.name(c))));
            }
        }
        let mut sigma: Vec<usize> = (1..=m).collect();
        sigma.sort_by(|&a, &b| ys[a - 1].cmp(&ys[b - 1]));
        let odd: Vec<bool> = ys.iter().map(|y| self.odd(y)).collect();
        let sorted: Vec<G::Gen> = sigma.iter().map(|&i| ys[i - 1].clone()).collect();
        let (c1, n1) = monomial(op, op.act_perm(&sigma, c)?, c)?;
        let base = koszul_negative(&odd, &sigma) ^ n1;
        let odd_s: Vec<bool> = sorted.iter().map(|y| self.odd(y)).collect();
        let char2 = self.gens.field().characteristic() == 2;
        let mut best: Option<(OpElem, bool)> = None;
        let mut vanishes = false;
        for tau in stabilizer(&sorted) {
            let (c2, n2) = monomial(op, op.act_perm(&tau, c1)?, c1)?;
            let n = koszul_negative(&odd_s, &tau) ^ n2;
            match best {
                Some((b, bn)) if b == c2 => {
                    if bn != n && !char2 {
                        vanishes = true;
                    }
                }
                Some((b, _)) if b < c2 => {}
                _ => {
                    best = Some((c2, n));
                    vanishes = false;
                }
            }
        }
        let (c2, n2) = best.expect("identity permutation");
        let out = (!vanishes).then(|| (CnBasis { inputs: sorted, op: c2 }, base ^ n2));
        self.norm.write().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// `coeff · (ys ⊗ c)` in normal form.
    pub fn normalize(&self, ys: Vec<G::Gen>, c: OpElem, coeff: &Scalar) -> Result<LinComb<CnBasis<G::Gen>>, OperadError> {
        if coeff.is_zero() {
            return Ok(LinComb::new());
        }
        Ok(match self.normal_form(&ys, c)? {
            Some((b, neg)) => LinComb::single(b, sign_of(neg, coeff)),
            None => LinComb::new(),
        })
    }

    /// `η(x) = x ⊗ 1`.
    pub fn eta(&self, x: &G::Gen) -> Result<LinComb<CnBasis<G::Gen>>, OperadError> {
        let mut out = LinComb::new();
        for (u, c) in self.op().unit(self.gens.sort(x)).iter() {
            out.add_assign(&self.normalize(vec![x.clone()], *u, c)?);
        }
        Ok(out)
    }

    pub fn eta_vec(&self, v: &LinComb<G::Gen>) -> Result<LinComb<CnBasis<G::Gen>>, OperadError> {
        let mut out = LinComb::new();
        for (x, c) in v.iter() {
            out.add_scaled(&self.eta(x)?, c);
        }
        Ok(out)
    }

    /// `δ(x)` as an element of `CN`.
    pub fn delta_elem(&self, x: &G::Gen) -> Result<LinComb<CnBasis<G::Gen>>, OperadError> {
        let mut out = LinComb::new();
        for t in self.gens.delta(x)? {
            out.add_assign(&self.normalize(t.inputs, t.op, &t.coeff)?);
        }
        Ok(out)
    }

    pub fn degree_of(&self, b: &CnBasis<G::Gen>) -> i64 {
        b.inputs.iter().map(|y| self.gens.degree(y)).sum::<i64>() + self.op().degree(b.op)
    }

    pub fn weight_of(&self, b: &CnBasis<G::Gen>) -> usize {
        b.inputs.iter().map(|y| self.gens.weight(y)).sum()
    }

    /// `Δ` on a basis element.
    pub fn delta_diff(&self, b: &CnBasis<G::Gen>) -> Result<LinComb<CnBasis<G::Gen>>, OperadError> {
        let op = self.op();
        let ys = &b.inputs;
        let m = ys.len();
        let degs: Vec<i64> = ys.iter().map(|y| self.gens.degree(y)).collect();
        let total: i64 = degs.iter().sum();
        let mut out = LinComb::new();
        let mut before = 0i64;
        for i in 0..m {
            let after = total - before - degs[i];
            for (z, k) in self.gens.d(&ys[i])?.iter() {
                let mut inputs = ys.clone();
                inputs[i] = z.clone();
                let s = if before.rem_euclid(2) == 1 { k.neg() } else { k.clone() };
                out.add_assign(&self.normalize(inputs, b.op, &s)?);
            }
            for t in self.gens.delta(&ys[i])? {
                let e = before + op.degree(t.op) * after;
                let s = if e.rem_euclid(2) == 1 { t.coeff.neg() } else { t.coeff.clone() };
                for (g, k) in op.gamma_j_basis(i + 1, t.op, b.op)?.iter() {
                    let mut inputs = ys[..i].to_vec();
                    inputs.extend(t.inputs.iter().cloned());
                    inputs.extend(ys[i + 1..].iter().cloned());
                    out.add_assign(&self.normalize(inputs, *g, &(k * &s))?);
                }
            }
            before += degs[i];
        }
        for (c2, k) in op.d(b.op).iter() {
            let s = if total.rem_euclid(2) == 1 { k.neg() } else { k.clone() };
            out.add_assign(&self.normalize(ys.clone(), *c2, &s)?);
        }
        Ok(out)
    }

    pub fn delta_diff_vec(&self, v: &LinComb<CnBasis<G::Gen>>) -> Result<LinComb<CnBasis<G::Gen>>, OperadError> {
        let mut out = LinComb::new();
        for (b, c) in v.iter() {
            out.add_scaled(&self.delta_diff(b)?, c);
        }
        Ok(out)
    }

    /// Free-algebra structure: `((Y_q; c_q))_q; c ↦ ±(Y_1 … Y_m; γ(c_1,…,c_m; c))`.
    pub fn product(&self, xs: &[CnBasis<G::Gen>], c: OpElem) -> Result<LinComb<CnBasis<G::Gen>>, OperadError> {
        let op = self.op();
        let mut inputs = Vec::new();
        let mut inner = Vec::new();
        let mut e = 0i64;
        let mut op_deg_before = 0i64;
        for x in xs {
            let ydeg: i64 = x.inputs.iter().map(|y| self.gens.degree(y)).sum();
            e += op_deg_before * ydeg;
            op_deg_before += op.degree(x.op);
            inputs.extend(x.inputs.iter().cloned());
            inner.push(x.op);
        }
        let neg = e.rem_euclid(2) == 1;
        let mut out = LinComb::new();
        for (g, k) in op.gamma_basis(&inner, c)?.iter() {
            out.add_assign(&self.normalize(inputs.clone(), *g, &sign_of(neg, k))?);
        }
        Ok(out)
    }

    /// Multilinear extension of [`Cn::product`].
    pub fn product_vec(&self, xs: &[LinComb<CnBasis<G::Gen>>], c: OpElem) -> Result<LinComb<CnBasis<G::Gen>>, OperadError> {
        let mut acc: Vec<(Vec<CnBasis<G::Gen>>, Scalar)> = vec![(Vec::new(), self.gens.field().one())];
        for v in xs {
            let mut next = Vec::new();
            for (pre, k) in &acc {
                for (b, c2) in v.iter() {
                    let mut p = pre.clone();
                    p.push(b.clone());
                    next.push((p, k * c2));
                }
            }
            acc = next;
        }
        let mut out = LinComb::new();
        for (tuple, k) in acc {
            out.add_scaled(&self.product(&tuple, c)?, &k);
        }
        Ok(out)
    }

    /// All basis elements of weight at most `w`, sorted.
    pub fn basis_upto(&self, w: usize) -> Result<Vec<CnBasis<G::Gen>>, OperadError> {
        let op = self.op();
        let mut gens = self.gens.basis_upto(w)?;
        gens.sort();
        gens.dedup();
        let weights: Vec<usize> = gens.iter().map(|g| self.gens.weight(g)).collect();
        let mut out = BTreeSet::new();
        let mut stack: Vec<(Vec<usize>, usize)> = vec![(Vec::new(), 0)];
        while let Some((idx, used)) = stack.pop() {
            let sorts: Vec<SortId> = idx.iter().map(|&i| self.gens.sort(&gens[i])).collect();
            for s in 0..op.num_sorts() as SortId {
                for c in op.basis_of(&sorts, s) {
                    let ys: Vec<G::Gen> = idx.iter().map(|&i| gens[i].clone()).collect();
                    if let Some((b, _)) = self.normal_form(&ys, c)? {
                        out.insert(b);
                    }
                }
            }
            if idx.len() < op.cap() {
                let from = idx.last().copied().unwrap_or(0);
                for (i, &wi) in weights.iter().enumerate().skip(from) {
                    if used + wi <= w {
                        let mut n = idx.clone();
                        n.push(i);
                        stack.push((n, used + wi));
                    }
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    pub fn name_of(&self, b: &CnBasis<G::Gen>) -> String {
        let ys: Vec<String> = b.inputs.iter().map(|y| self.gens.gen_name(y)).collect();
        format!("({}; {})", ys.join(", "), self.op().name(b.op))
    }

    pub fn fmt_vec(&self, v: &LinComb<CnBasis<G::Gen>>) -> String {
        if v.is_zero() {
            return "0".into();
        }
        v.iter().map(|(b, c)| format!("{c}*{}", self.name_of(b))).collect::<Vec<_>>().join(" + ")
    }
}

impl<G: Generators> Carrier for Cn<'_, G> {
    type Elem = CnBasis<G::Gen>;

    fn operad(&self) -> &Operad {
        self.gens.operad()
    }

    fn degree(&self, x: &Self::Elem) -> i64 {
        self.degree_of(x)
    }

    fn sort(&self, x: &Self::Elem) -> SortId {
        self.op().signature(x.op).output
    }

    fn weight(&self, x: &Self::Elem) -> usize {
        self.weight_of(x)
    }

    fn diff(&self, x: &Self::Elem) -> Result<LinComb<Self::Elem>, OperadError> {
        self.delta_diff(x)
    }

    fn act(&self, xs: &[Self::Elem], c: OpElem) -> Result<LinComb<Self::Elem>, OperadError> {
        self.product(xs, c)
    }

    fn basis_upto(&self, w: usize) -> Result<Vec<Self::Elem>, OperadError> {
        Cn::basis_upto(self, w)
    }

    fn elem_name(&self, x: &Self::Elem) -> String {
        self.name_of(x)
    }
}

// ---------------------------------------------------------------------------------------------
// Finite D-structures

/// A D-structure on a finite-dimensional `N` given by tables.
#[derive(Clone, Debug)]
pub struct FiniteDStructure {
    op: Arc<Operad>,
    names: Vec<String>,
    degrees: Vec<i64>,
    sorts: Vec<SortId>,
    d: Vec<LinComb<u32>>,
    delta: Vec<Vec<DeltaTerm<u32>>>,
    weights: Vec<usize>,
}

impl FiniteDStructure {
    /// `elems` lists `(name, degree, sort)`; `d` and `delta` are indexed like `elems`.
    pub fn new(
        op: Arc<Operad>,
        elems: Vec<(String, i64, SortId)>,
        d: Vec<LinComb<u32>>,
        delta: Vec<Vec<DeltaTerm<u32>>>,
    ) -> Result<Self, DError> {
        let k = elems.len();
        let invalid = |i: usize, reason: String| DError::Invalid { name: elems[i].0.clone(), reason };
        if d.len() != k || delta.len() != k {
            return Err(DError::Invalid { name: String::new(), reason: "d and δ must list every generator".into() });
        }
        let mut seen = BTreeSet::new();
        for (i, (name, _, s)) in elems.iter().enumerate() {
            if !seen.insert(name.clone()) {
                return Err(invalid(i, "duplicate name".into()));
            }
            if *s as usize >= op.num_sorts() {
                return Err(invalid(i, format!("sort {s} out of range")));
            }
        }
        for i in 0..k {
            for (y, _) in d[i].iter() {
                let y = *y as usize;
                if y >= k {
                    return Err(invalid(i, "d refers to an unknown generator".into()));
                }
                if elems[y].1 != elems[i].1 - 1 || elems[y].2 != elems[i].2 {
                    return Err(invalid(i, format!("d has a term `{}` of the wrong degree or sort", elems[y].0)));
                }
            }
            for t in &delta[i] {
                let sig = op.signature(t.op);
                if t.inputs.iter().any(|&z| z as usize >= k) {
                    return Err(invalid(i, "δ refers to an unknown generator".into()));
                }
                let ins: Vec<SortId> = t.inputs.iter().map(|&z| elems[z as usize].2).collect();
                if ins != sig.inputs || sig.output != elems[i].2 {
                    return Err(invalid(i, format!("δ term with `{}` has the wrong sorts", op.name(t.op))));
                }
                let deg: i64 = t.inputs.iter().map(|&z| elems[z as usize].1).sum::<i64>() + op.degree(t.op);
                if deg != elems[i].1 - 1 {
                    return Err(invalid(i, format!("δ term with `{}` has degree {deg}", op.name(t.op))));
                }
            }
        }
        // longest-path weights: d may keep the weight, δ must raise it
        let mut weights = vec![1usize; k];
        let mut rounds = 0;
        loop {
            let mut changed = false;
            for i in 0..k {
                let mut w = weights[i];
                for (y, _) in d[i].iter() {
                    w = w.max(weights[*y as usize]);
                }
                for t in &delta[i] {
                    w = w.max(1 + t.inputs.iter().map(|&z| weights[z as usize]).sum::<usize>());
                }
                if w != weights[i] {
                    weights[i] = w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            rounds += 1;
            if rounds > k + 1 {
                let i = (0..k).max_by_key(|&i| weights[i]).unwrap();
                return Err(DError::NoWeight(elems[i].0.clone()));
            }
        }
        let (names, rest): (Vec<String>, Vec<(i64, SortId)>) = elems.into_iter().map(|(n, a, s)| (n, (a, s))).unzip();
        let (degrees, sorts) = rest.into_iter().unzip();
        Ok(FiniteDStructure { op, names, degrees, sorts, d, delta, weights })
    }

    pub fn operad_arc(&self) -> &Arc<Operad> {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    pub fn sorts(&self) -> &[SortId] {
        &self.sorts
    }

    pub fn d_table(&self) -> &[LinComb<u32>] {
        &self.d
    }

    pub fn delta_table(&self) -> &[Vec<DeltaTerm<u32>>] {
        &self.delta
    }

    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }
}

impl Generators for FiniteDStructure {
    type Gen = u32;

    fn operad(&self) -> &Operad {
        &self.op
    }

    fn degree(&self, x: &u32) -> i64 {
        self.degrees[*x as usize]
    }

    fn sort(&self, x: &u32) -> SortId {
        self.sorts[*x as usize]
    }

    fn weight(&self, x: &u32) -> usize {
        self.weights[*x as usize]
    }

    fn d(&self, x: &u32) -> Result<LinComb<u32>, OperadError> {
        Ok(self.d[*x as usize].clone())
    }

    fn delta(&self, x: &u32) -> Result<Vec<DeltaTerm<u32>>, OperadError> {
        Ok(self.delta[*x as usize].clone())
    }

    fn basis_upto(&self, w: usize) -> Result<Vec<u32>, OperadError> {
        Ok((0..self.dim() as u32).filter(|&i| self.weights[i as usize] <= w).collect())
    }

    fn gen_name(&self, x: &u32) -> String {
        self.names[*x as usize].clone()
    }
}

// ---------------------------------------------------------------------------------------------
// The bar D-structure

fn op_err(e: BarError) -> OperadError {
    match e {
        BarError::Operad(o) => o,
        other => OperadError::Invalid(other.to_string()),
    }
}

/// `(B̃(A), δ)` with `δ` splitting a tree at its root, `δ(T) = −s(T)·(T_1 ⊗ … ⊗ T_m ⊗ x_n)` where
/// `s(T)` is the sign of [`Bar::split`]; single leaves have `δ = 0`.
pub struct BarDStructure<'a, C: Carrier> {
    pub bar: Bar<'a, C>,
}

impl<'a, C: Carrier> BarDStructure<'a, C> {
    pub fn new(carrier: &'a C) -> Result<Self, DError> {
        Ok(BarDStructure { bar: Bar::new(carrier)? })
    }
}

impl<C: Carrier> Generators for BarDStructure<'_, C> {
    type Gen = BarBasis<C::Elem>;

    fn operad(&self) -> &Operad {
        self.bar.operad()
    }

    fn degree(&self, x: &Self::Gen) -> i64 {
        self.bar.degree(x)
    }

    fn sort(&self, x: &Self::Gen) -> SortId {
        x.tree.sort(x.tree.n())
    }

    fn weight(&self, x: &Self::Gen) -> usize {
        self.bar.size(x)
    }

    fn d(&self, x: &Self::Gen) -> Result<LinComb<Self::Gen>, OperadError> {
        self.bar.diff_tilde(x).map_err(op_err)
    }

    fn delta(&self, x: &Self::Gen) -> Result<Vec<DeltaTerm<Self::Gen>>, OperadError> {
        Ok(match self.bar.split(x) {
            None => Vec::new(),
            Some((blocks, root, neg)) => vec![DeltaTerm { inputs: blocks, op: root, coeff: self.field().sign(!neg) }],
        })
    }

    fn basis_upto(&self, w: usize) -> Result<Vec<Self::Gen>, OperadError> {
        self.bar.basis_upto(w).map_err(op_err)
    }

    fn gen_name(&self, x: &Self::Gen) -> String {
        self.bar.elem_name(x)
    }
}

/// The identification `B(A) → C_Δ(B̃(A))`, `T ↦ δ(T)`.
pub fn bar_to_cn<C: Carrier>(
    cn: &Cn<'_, BarDStructure<'_, C>>,
    b: &BarBasis<C::Elem>,
) -> Result<LinComb<CnBasis<BarBasis<C::Elem>>>, OperadError> {
    cn.delta_elem(b)
}

/// The 𝒞-algebra structure on `B(A)`: join the trees under a new root labeled `c`.
pub fn bar_algebra_action<C: Carrier>(
    ds: &BarDStructure<'_, C>,
    xs: &[LinComb<BarBasis<C::Elem>>],
    c: OpElem,
) -> Result<LinComb<BarBasis<C::Elem>>, DError> {
    let cn = Cn::new(ds)?;
    let mut images = Vec::new();
    for v in xs {
        let mut img = LinComb::new();
        for (b, k) in v.iter() {
            if b.is_single_leaf() {
                return Err(DError::Invalid { name: ds.bar.elem_name(b), reason: "not an element of B(A)".into() });
            }
            img.add_scaled(&bar_to_cn(&cn, b)?, k);
        }
        images.push(img);
    }
    let prod = cn.product_vec(&images, c)?;
    let mut out = LinComb::new();
    for (b, k) in prod.iter() {
        out.add_assign(&ds.bar.join(&b.inputs, b.op, k)?);
    }
    Ok(out)
}

/// Checks that `T ↦ δ(T)` is a basis bijection from the window `F_size` of `B(A)` onto the
/// weight `size − 1` window of `C_Δ(B̃(A))` carrying `d_B` to `Δ`, term by term.
pub fn check_bar_identity<C: Carrier>(ds: &BarDStructure<'_, C>, size: usize) -> Result<CheckOutcome, DError> {
    let cn = Cn::new(ds)?;
    let win = ds.bar.quotient_window(size)?;
    let target: BTreeSet<CnBasis<BarBasis<C::Elem>>> = cn.basis_upto(size.saturating_sub(1))?.into_iter().collect();
    let mut out = CheckOutcome::new("bar-identity");
    let mut hit = BTreeSet::new();
    for b in &win.basis {
        let img = bar_to_cn(&cn, b)?;
        let single = img.len() == 1 && img.iter().all(|(x, c)| (c.is_one() || c.neg().is_one()) && target.contains(x));
        out.record(single, || format!("{} ↦ {}", ds.bar.elem_name(b), cn.fmt_vec(&img)));
        hit.extend(img.keys().cloned());
        let lhs = {
            let mut v = LinComb::new();
            for (t, k) in ds.bar.diff_quotient(b)?.iter() {
                v.add_scaled(&bar_to_cn(&cn, t)?, k);
            }
            v
        };
        let rhs = cn.delta_diff_vec(&img)?;
        out.record(lhs == rhs, || {
            format!("{}: δ(d_B x) = {} but Δ(δ x) = {}", ds.bar.elem_name(b), cn.fmt_vec(&lhs), cn.fmt_vec(&rhs))
        });
    }
    for x in target.difference(&hit) {
        out.fail(format!("{} is not hit", cn.name_of(x)));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------------------------
// Checks on D-structures

fn check_each<T, F>(name: &str, items: &[T], f: F) -> Result<CheckOutcome, DError>
where
    T: Sync,
    F: Fn(&T) -> Result<Option<String>, DError> + Sync,
{
    use rayon::prelude::*;
    let results: Vec<Result<Option<String>, DError>> = items.par_iter().map(&f).collect();
    let mut out = CheckOutcome::new(name);
    for r in results {
        let r = r?;
        let ok = r.is_none();
        out.record(ok, || r.unwrap());
    }
    Ok(out)
}

/// `Δ∘Δ = 0`, `Δη = ηd + δ`, `δ′ = (−1)^{|x|}δ` a chain map, and the Leibniz rule for binary
/// operations, on the weight-`w` window (products past the arity cap are skipped).
pub fn verify_dstructure<G: Generators>(g: &G, w: usize) -> Result<VerifyReport, DError> {
    let cn = Cn::new(g)?;
    let field = g.field();
    let basis = cn.basis_upto(w)?;
    let gens = g.basis_upto(w)?;
    let mut checks = Vec::new();

    checks.push(check_each("delta-squared", &basis, |b| {
        let dd = cn.delta_diff_vec(&cn.delta_diff(b)?)?;
        Ok((!dd.is_zero()).then(|| format!("ΔΔ{} = {}", cn.name_of(b), cn.fmt_vec(&dd))))
    })?);

    checks.push(check_each("eta", &gens, |x| {
        let lhs = cn.delta_diff_vec(&cn.eta(x)?)?.sub(&cn.eta_vec(&g.d(x)?)?);
        let rhs = cn.delta_elem(x)?;
        Ok((lhs != rhs).then(|| format!("{}: Δη − ηd = {} but δ = {}", g.gen_name(x), cn.fmt_vec(&lhs), cn.fmt_vec(&rhs))))
    })?);

    let delta_prime = |x: &G::Gen| -> Result<LinComb<CnBasis<G::Gen>>, DError> {
        let s = field.sign(g.degree(x).rem_euclid(2) == 1);
        Ok(cn.delta_elem(x)?.scaled(&s))
    };
    checks.push(check_each("delta-prime-chain-map", &gens, |x| {
        let lhs = cn.delta_diff_vec(&delta_prime(x)?)?;
        let mut rhs = LinComb::new();
        for (y, k) in g.d(x)?.iter() {
            rhs.add_scaled(&delta_prime(y)?, k);
        }
        Ok((lhs != rhs).then(|| format!("{}: Δδ′ = {} but δ′d = {}", g.gen_name(x), cn.fmt_vec(&lhs), cn.fmt_vec(&rhs))))
    })?);

    let op = g.operad();
    let mut pairs = Vec::new();
    'outer: for u in &basis {
        for v in &basis {
            if cn.weight_of(u) + cn.weight_of(v) > w || op.arity(u.op) + op.arity(v.op) > op.cap() {
                continue;
            }
            let (su, sv) = (Carrier::sort(&cn, u), Carrier::sort(&cn, v));
            for s in 0..op.num_sorts() as SortId {
                for c in op.basis_of(&[su, sv], s) {
                    pairs.push((u.clone(), v.clone(), c));
                    if pairs.len() >= 4000 {
                        break 'outer;
                    }
                }
            }
        }
    }
    checks.push(check_each("leibniz", &pairs, |(u, v, c)| {
        let one = field.one();
        let ul = LinComb::single(u.clone(), one.clone());
        let vl = LinComb::single(v.clone(), one);
        let lhs = cn.delta_diff_vec(&cn.product(&[u.clone(), v.clone()], *c)?)?;
        let mut rhs = cn.product_vec(&[cn.delta_diff(u)?, vl.clone()], *c)?;
        let su = field.sign(cn.degree_of(u).rem_euclid(2) == 1);
        rhs.add_scaled(&cn.product_vec(&[ul.clone(), cn.delta_diff(v)?], *c)?, &su);
        let suv = field.sign((cn.degree_of(u) + cn.degree_of(v)).rem_euclid(2) == 1);
        for (c2, k) in op.d(*c).iter() {
            rhs.add_scaled(&cn.product_vec(&[ul.clone(), vl.clone()], *c2)?, &(k * &suv));
        }
        Ok((lhs != rhs).then(|| format!("Δ {}({}, {}): {} ≠ {}", op.name(*c), cn.name_of(u), cn.name_of(v), cn.fmt_vec(&lhs), cn.fmt_vec(&rhs))))
    })?);
    Ok(VerifyReport { checks })
}

// ---------------------------------------------------------------------------------------------
// Morphisms

type F0<'a, S, T> =
    Box<dyn Fn(&<S as Generators>::Gen) -> Result<LinComb<CnBasis<<T as Generators>::Gen>>, OperadError> + Send + Sync + 'a>;

/// A morphism of D-structures: a degree-0 map `f₀: N → C_{Δ′}(N′)`, extended to `f̄: CN → CN′`.
pub struct DMorphism<'a, S: Generators, T: Generators> {
    pub source: Cn<'a, S>,
    pub target: Cn<'a, T>,
    f0: F0<'a, S, T>,
}

impl<'a, S: Generators, T: Generators> DMorphism<'a, S, T> {
    pub fn new(
        source: &'a S,
        target: &'a T,
        f0: impl Fn(&S::Gen) -> Result<LinComb<CnBasis<T::Gen>>, OperadError> + Send + Sync + 'a,
    ) -> Result<Self, DError> {
        if source.field() != target.field() || source.operad().sort_names() != target.operad().sort_names() {
            return Err(DError::Invalid { name: String::new(), reason: "source and target live over different operads".into() });
        }
        Ok(DMorphism { source: Cn::new(source)?, target: Cn::new(target)?, f0: Box::new(f0) })
    }

    pub fn f0(&self, x: &S::Gen) -> Result<LinComb<CnBasis<T::Gen>>, OperadError> {
        (self.f0)(x)
    }

    /// `f̄(y_1 … y_m; c) = θ(f₀y_1, …, f₀y_m; c)`.
    pub fn extend(&self, b: &CnBasis<S::Gen>) -> Result<LinComb<CnBasis<T::Gen>>, OperadError> {
        let imgs = b.inputs.iter().map(|y| self.f0(y)).collect::<Result<Vec<_>, _>>()?;
        self.target.product_vec(&imgs, b.op)
    }

    pub fn extend_vec(&self, v: &LinComb<CnBasis<S::Gen>>) -> Result<LinComb<CnBasis<T::Gen>>, OperadError> {
        let mut out = LinComb::new();
        for (b, c) in v.iter() {
            out.add_scaled(&self.extend(b)?, c);
        }
        Ok(out)
    }

    /// `(g∘f)₀ = ḡ f₀`.
    pub fn then<'b, U: Generators>(&'b self, g: &'b DMorphism<'b, T, U>) -> Result<DMorphism<'b, S, U>, DError>
    where
        'a: 'b,
    {
        DMorphism::new(self.source.gens, g.target.gens, move |x| g.extend_vec(&self.f0(x)?))
    }
}

impl<'a, S: Generators> DMorphism<'a, S, S> {
    /// The identity morphism `η`.
    pub fn identity(ds: &'a S) -> Result<Self, DError> {
        let cn = Cn::new(ds)?;
        DMorphism::new(ds, ds, move |x| cn.eta(x))
    }
}

/// `f̄∘Δ = Δ′∘f̄` on `η(x)` for every generator of weight at most `w`, plus degree and sort checks.
pub fn verify_morphism<S: Generators, T: Generators>(m: &DMorphism<'_, S, T>, w: usize) -> Result<CheckOutcome, DError> {
    let gens = m.source.gens.basis_upto(w)?;
    let mut out = check_each("morphism", &gens, |x| {
        let img = m.f0(x)?;
        let deg = m.source.gens.degree(x);
        let sort = m.source.gens.sort(x);
        if let Some((b, _)) = img.iter().find(|(b, _)| m.target.degree_of(b) != deg || Carrier::sort(&m.target, *b) != sort) {
            return Ok(Some(format!("f₀({}) has a term {} of the wrong degree or sort", m.source.gens.gen_name(x), m.target.name_of(b))));
        }
        let lhs = m.extend_vec(&m.source.delta_diff_vec(&m.source.eta(x)?)?)?;
        let rhs = m.target.delta_diff_vec(&img)?;
        Ok((lhs != rhs).then(|| {
            format!("{}: f̄Δη = {} but Δ′f₀ = {}", m.source.gens.gen_name(x), m.target.fmt_vec(&lhs), m.target.fmt_vec(&rhs))
        }))
    })?;
    out.name = "morphism".into();
    Ok(out)
}

// ---------------------------------------------------------------------------------------------
// Windowed homology and equivalences

/// A weight window `F_w` of a carrier as a complex, with the mask of `F_{w−1}`.
pub struct Window<E> {
    pub basis: Vec<E>,
    pub complex: ChainComplex,
    pub inner_mask: Vec<bool>,
}

pub fn carrier_window<C: Carrier>(c: &C, w: usize) -> Result<Window<C::Elem>, DError> {
    let basis = c.basis_upto(w)?;
    let err = RwLock::new(None);
    let (complex, _) = span_complex(
        c.field(),
        &basis,
        |x| c.elem_name(x),
        |x| c.degree(x),
        |x| {
            c.diff(x).unwrap_or_else(|e| {
                *err.write().unwrap() = Some(e);
                LinComb::new()
            })
        },
    )?;
    if let Some(e) = err.into_inner().unwrap() {
        return Err(e.into());
    }
    let inner_mask = basis.iter().map(|x| c.weight(x) < w).collect();
    Ok(Window { basis, complex, inner_mask })
}

/// Degrees whose homology does not see the window boundary:
/// `dim H_k(F_{w−1}) = rank(H_k(F_{w−1}) → H_k(F_w)) = dim H_k(F_w)`.
pub fn stable_degrees(c: &ChainComplex, inner_mask: &[bool]) -> Result<BTreeSet<i64>, ChainError> {
    let degs = c.basis().degrees();
    let (Some(&lo), Some(&hi)) = (degs.first(), degs.last()) else { return Ok(BTreeSet::new()) };
    let (sub, _) = c.subcomplex(inner_mask)?;
    let pers = persistent_dims(c, inner_mask, lo..=hi)?;
    Ok(pers
        .into_iter()
        .filter(|(k, p)| sub.homology_in_degree(*k).dim == *p && c.homology_in_degree(*k).dim == *p)
        .map(|(k, _)| k)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Equivalence {
    /// Degrees stable on both sides.
    pub stable: Vec<i64>,
    pub evidence: QuasiIsoEvidence,
    /// `None` when no degree is stable.
    pub verdict: Option<bool>,
}

/// Matrix of a linear map between two windows; errors when an image leaves the target.
fn window_map<E: Ord + Clone, F: Ord + Clone>(
    source: &[E],
    target: &[F],
    name_s: impl Fn(&E) -> String,
    name_t: impl Fn(&F) -> String,
    f: impl Fn(&E) -> Result<LinComb<F>, DError>,
) -> Result<SparseMatrix, DError> {
    let index: BTreeMap<&F, usize> = target.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let mut cols = Vec::with_capacity(source.len());
    for x in source {
        let mut col = SparseVec::new();
        for (t, c) in f(x)?.iter() {
            let Some(&i) = index.get(t) else {
                return Err(DError::Overflow { element: name_s(x), term: name_t(t) });
            };
            col.insert(i, c.clone());
        }
        cols.push(col);
    }
    Ok(SparseMatrix::from_columns(target.len(), cols))
}

fn equivalence_of(map: &ChainMap, s_stable: &BTreeSet<i64>, t_stable: &BTreeSet<i64>) -> Equivalence {
    let stable: Vec<i64> = s_stable.intersection(t_stable).copied().collect();
    let mut evidence = QuasiIsoEvidence { iso: true, degrees: Vec::new() };
    for &k in &stable {
        let e = is_quasi_iso(map, k..=k);
        evidence.iso &= e.iso;
        evidence.degrees.extend(e.degrees);
    }
    let verdict = (!stable.is_empty()).then_some(evidence.iso);
    Equivalence { stable, evidence, verdict }
}

/// Windowed quasi-isomorphism test for `f̄: C_Δ N → C_{Δ′} N′` on weight `w`.
pub fn is_equivalence<S: Generators, T: Generators>(m: &DMorphism<'_, S, T>, w: usize) -> Result<Equivalence, DError> {
    let sw = carrier_window(&m.source, w)?;
    let tw = carrier_window(&m.target, w)?;
    let mat = window_map(&sw.basis, &tw.basis, |x| m.source.name_of(x), |x| m.target.name_of(x), |x| Ok(m.extend(x)?))?;
    let s_stable = stable_degrees(&sw.complex, &sw.inner_mask)?;
    let t_stable = stable_degrees(&tw.complex, &tw.inner_mask)?;
    let map = ChainMap::new(sw.complex, tw.complex, mat, 0)?;
    Ok(equivalence_of(&map, &s_stable, &t_stable))
}

// ---------------------------------------------------------------------------------------------
// Roundtrips

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundtripReport {
    pub window: usize,
    pub checks: Vec<CheckOutcome>,
    /// Dimensions of the window of `B(A)` by degree.
    pub bar_dims: BTreeMap<i64, usize>,
    /// Ranks of `H(F_{N−1} B(A)) → H(F_N B(A))`.
    pub persistent_ranks: BTreeMap<i64, usize>,
    /// Homology of the target window, by degree.
    pub target_homology: BTreeMap<i64, usize>,
    pub equivalence: Equivalence,
}

impl RoundtripReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.equivalence.verdict != Some(false)
    }
}

/// `μ: B(A) → A` on the window `F_size`: the identification `C_Δ B̃(A) = B(A)`, the chain-map
/// property, and the homotopy certificate `μι = id`, `ιμ − id = d_B H + H d_B` with `H = q h`
/// checked on `F_{size−1}`.
pub fn roundtrip_algebra<C: Carrier>(a: &C, size: usize) -> Result<RoundtripReport, DError> {
    let ds = BarDStructure::new(a)?;
    let bar = &ds.bar;
    let field = a.field();
    let mut checks = vec![check_bar_identity(&ds, size)?];
    let win = bar.quotient_window(size)?;

    checks.push(check_each("mu-chain-map", &win.basis, |b| {
        let lhs = bar.mu_vec(&bar.diff_quotient(b)?)?;
        let mut rhs = LinComb::new();
        for (x, k) in bar.mu(b)?.iter() {
            rhs.add_scaled(&a.diff(x)?, k);
        }
        Ok((lhs != rhs).then(|| format!("{}: μd = {:?} but dμ = {:?}", bar.elem_name(b), lhs, rhs)))
    })?);

    let leaves: Vec<C::Elem> = a.basis_upto(size.saturating_sub(2))?;
    checks.push(check_each("mu-section", &leaves, |x| {
        let back = bar.mu_vec(&bar.iota(x)?)?;
        Ok((back != LinComb::single(x.clone(), field.one())).then(|| format!("μι({}) = {:?}", a.elem_name(x), back)))
    })?);

    let q = |v: LinComb<BarBasis<C::Elem>>| -> LinComb<BarBasis<C::Elem>> {
        v.into_terms().into_iter().filter(|(x, _)| !x.is_single_leaf()).collect()
    };
    let d_b = |v: &LinComb<BarBasis<C::Elem>>| -> Result<LinComb<BarBasis<C::Elem>>, DError> {
        let mut out = LinComb::new();
        for (x, k) in v.iter() {
            out.add_scaled(&bar.diff_quotient(x)?, k);
        }
        Ok(out)
    };
    let inner: Vec<BarBasis<C::Elem>> = win.basis.iter().filter(|b| bar.size(b) < size).cloned().collect();
    checks.push(check_each("mu-homotopy", &inner, |b| {
        let one = LinComb::single(b.clone(), field.one());
        let mut lhs = LinComb::new();
        for (x, k) in bar.mu(b)?.iter() {
            lhs.add_scaled(&q(bar.iota(x)?), k);
        }
        let lhs = lhs.sub(&one);
        let hb = q(bar.homotopy(b)?);
        let mut rhs = d_b(&hb)?;
        rhs.add_assign(&q(bar.homotopy_vec(&d_b(&one)?)?));
        Ok((lhs != rhs).then(|| format!("{}: ιμ − id = {} but dH + Hd = {}", bar.elem_name(b), bar.fmt_vec(&lhs), bar.fmt_vec(&rhs))))
    })?);

    let bar_dims = win.complex.dims_by_degree();
    let persistent_ranks = win.persistent_ranks()?;
    let aw = carrier_window(a, size.saturating_sub(2))?;
    let mat = window_map(&win.basis, &aw.basis, |b| bar.elem_name(b), |x| a.elem_name(x), |b| Ok(bar.mu(b)?))?;
    let b_stable = stable_degrees(&win.complex, &win.inner_mask)?;
    let a_stable = stable_degrees(&aw.complex, &aw.inner_mask)?;
    let target_homology = aw.complex.basis().degrees().into_iter().map(|k| (k, aw.complex.homology_in_degree(k).dim)).collect();
    let map = ChainMap::new(win.complex, aw.complex, mat, 0)?;
    let equivalence = equivalence_of(&map, &b_stable, &a_stable);
    Ok(RoundtripReport { window: size, checks, bar_dims, persistent_ranks, target_homology, equivalence })
}

/// The counit `B(C_Δ N) → C_Δ N`: everything in [`roundtrip_algebra`] for `A = C_Δ N`, plus
/// the counit as a D-structure morphism `B̃(C_Δ N) → N` (leaf projection) and its windowed
/// equivalence test.
pub fn roundtrip_dstructure<G: Generators>(g: &G, size: usize) -> Result<RoundtripReport, DError> {
    let cn = Cn::new(g)?;
    let mut report = roundtrip_algebra(&cn, size)?;
    let ds = BarDStructure::new(&cn)?;
    let m = DMorphism::new(&ds, g, |b: &BarBasis<CnBasis<G::Gen>>| {
        Ok(match (b.is_single_leaf(), b.labels.first()) {
            (true, Some(Label::Leaf(x))) => LinComb::single(x.clone(), g.field().one()),
            _ => LinComb::new(),
        })
    })?;
    report.checks.push(verify_morphism(&m, size)?);
    let eq = is_equivalence(&m, size.saturating_sub(1))?;
    let mut c = CheckOutcome::new("counit-equivalence");
    c.record(eq.verdict != Some(false), || format!("{:?}", eq.evidence));
    report.checks.push(c);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Algebra;
    use crate::operad::{builtin, Builtin};

    fn op(b: Builtin, field: FieldSpec, cap: usize) -> Arc<Operad> {
        Arc::new(builtin(&b, field, cap).unwrap())
    }

    #[test]
    fn stabilizers() {
        assert_eq!(stabilizer(&[1, 1, 2]).len(), 2);
        assert_eq!(stabilizer(&[1, 2, 3]).len(), 1);
    }

    #[test]
    fn odd_square_vanishes_in_com() {
        let o = op(Builtin::Com, FieldSpec::Rationals, 3);
        let ds = FiniteDStructure::new(o.clone(), vec![("x".into(), 1, 0)], vec![LinComb::new()], vec![vec![]]).unwrap();
        let cn = Cn::new(&ds).unwrap();
        let c2 = o.lookup("c2").unwrap();
        assert!(cn.normalize(vec![0, 0], c2, &FieldSpec::Rationals.one()).unwrap().is_zero());
    }

    #[test]
    fn bar_identity_small() {
        for field in [FieldSpec::Rationals, FieldSpec::prime(3).unwrap()] {
            let a = Algebra::builtin(op(Builtin::UAss, field, 3), "dual-numbers").unwrap();
            let ds = BarDStructure::new(&a).unwrap();
            let r = check_bar_identity(&ds, 4).unwrap();
            assert!(r.passed, "{:?}", r.failures);
        }
    }

    #[test]
    fn nilpotent_unit_operad_structure() {
        let f = FieldSpec::Rationals;
        let o = op(Builtin::UnitOperad, f, 3);
        let one = o.lookup("1").unwrap();
        let ds = FiniteDStructure::new(
            o,
            vec![("x".into(), 1, 0), ("y".into(), 0, 0)],
            vec![LinComb::new(), LinComb::new()],
            vec![vec![DeltaTerm { inputs: vec![1], op: one, coeff: f.one() }], vec![]],
        )
        .unwrap();
        assert_eq!(ds.weights(), &[2, 1]);
        let r = verify_dstructure(&ds, 3).unwrap();
        assert!(r.passed(), "{:?}", r);
    }
}
