//! The augmented bar construction `B̃(A)` on labeled trees, its quotient `B(A)`, the grafting
//! homotopy, the map `μ: B(A) → A`, and the splitting of a tree at its root.
//!
//! A basis element is a canonical tree with labels; its sign word is always the positive
//! normal form `Det·f^ε`, so every sign lives in the coefficient.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::RwLock;

use thiserror::Error;

use crate::algebra::Carrier;
use crate::chain::{persistent_dims, span_complex, ChainComplex, ChainError};
use crate::coeff::{FieldSpec, Scalar};
use crate::linalg::LinComb;
use crate::operad::{CheckOutcome, OpElem, Operad, OperadError, VerifyReport};
use crate::sign::{left_mul_f, partial_e, relabel, Ambient, Gen, SignError, SignWord};
use crate::tree::{enumerate, Intertwiner, Tree, TreeError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BarError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Sign(#[from] SignError),
    #[error(transparent)]
    Operad(#[from] OperadError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("the Σ-action is not monomial on `{0}`; the bar construction needs monomial actions")]
    NonMonomial(String),
    #[error("label mismatch at vertex {vertex}: {reason}")]
    Label { vertex: usize, reason: String },
    #[error("window of size {size} needs arity cap ≥ {needed}, operad cap is {cap}")]
    CapTooSmall { size: usize, needed: usize, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label<E> {
    Leaf(E),
    Vertex(OpElem),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BarBasis<E> {
    pub tree: Tree,
    /// `labels[v - 1]` labels vertex `v`.
    pub labels: Vec<Label<E>>,
}

impl<E> BarBasis<E> {
    pub fn is_single_leaf(&self) -> bool {
        self.tree.n() == 1 && self.tree.root_is_leaf()
    }
}

type NormKey<E> = (Tree, Vec<Label<E>>);

pub struct Bar<'a, C: Carrier> {
    pub carrier: &'a C,
    canon: RwLock<HashMap<Tree, (Tree, Intertwiner)>>,
    auts: RwLock<HashMap<Tree, Vec<Intertwiner>>>,
    norm: RwLock<HashMap<NormKey<C::Elem>, Option<(BarBasis<C::Elem>, bool)>>>,
}

/// A window `F_N` of `B(A)` (trees with `n` plus leaf weights at most `N`, single leaves dropped).
pub struct BarWindow<E> {
    pub size: usize,
    pub basis: Vec<BarBasis<E>>,
    pub complex: ChainComplex,
    /// Basis elements lying in `F_{N−1}`.
    pub inner_mask: Vec<bool>,
}

impl<'a, C: Carrier> Bar<'a, C> {
    pub fn new(carrier: &'a C) -> Result<Self, BarError> {
        let op = carrier.operad();
        if !op.is_monomial() {
            let bad = op.all_basis().into_iter().find(|x| (1..op.arity(*x)).any(|a| op.swap_image(a, *x).len() != 1));
            return Err(BarError::NonMonomial(bad.map(|x| op.name(x).to_string()).unwrap_or_default()));
        }
        Ok(Bar {
            carrier,
            canon: RwLock::new(HashMap::new()),
            auts: RwLock::new(HashMap::new()),
            norm: RwLock::new(HashMap::new()),
        })
    }

    pub fn operad(&self) -> &Operad {
        self.carrier.operad()
    }

    pub fn field(&self) -> FieldSpec {
        self.carrier.field()
    }

    pub fn label_degree(&self, l: &Label<C::Elem>) -> i64 {
        match l {
            Label::Leaf(a) => self.carrier.degree(a),
            Label::Vertex(x) => self.operad().degree(*x),
        }
    }

    /// Degree in `B̃(A)`: label degrees plus the number of non-leaf vertices.
    pub fn degree(&self, b: &BarBasis<C::Elem>) -> i64 {
        b.labels.iter().map(|l| self.label_degree(l)).sum::<i64>() + b.tree.nonleaf_count() as i64
    }

    /// `n` plus the weights of the leaf labels.
    pub fn size(&self, b: &BarBasis<C::Elem>) -> usize {
        b.tree.n()
            + b.labels
                .iter()
                .map(|l| match l {
                    Label::Leaf(a) => self.carrier.weight(a),
                    Label::Vertex(_) => 0,
                })
                .sum::<usize>()
    }

    fn parity(&self, l: &Label<C::Elem>) -> bool {
        self.label_degree(l).rem_euclid(2) == 1
    }

    /// The positive word `Det·f^ε` of a labeled tree.
    pub fn word(&self, tree: &Tree, labels: &[Label<C::Elem>]) -> SignWord {
        let f = (1..=tree.n()).filter(|&i| self.parity(&labels[i - 1])).collect();
        SignWord::Mono { negative: false, e: tree.inner_edges(), f }
    }

    pub fn check_labels(&self, tree: &Tree, labels: &[Label<C::Elem>]) -> Result<(), BarError> {
        let op = self.operad();
        if labels.len() != tree.n() {
            return Err(BarError::Label { vertex: 0, reason: format!("{} labels for {} vertices", labels.len(), tree.n()) });
        }
        for v in 1..=tree.n() {
            match (&labels[v - 1], tree.is_leaf(v)) {
                (Label::Leaf(a), true) => {
                    if self.carrier.sort(a) != tree.sort(v) {
                        return Err(BarError::Label { vertex: v, reason: "leaf label of the wrong sort".into() });
                    }
                }
                (Label::Vertex(x), false) => {
                    let sig = op.signature(*x);
                    let kids: Vec<_> = tree.children(v).into_iter().map(|c| tree.sort(c)).collect();
                    if sig.inputs != kids || sig.output != tree.sort(v) {
                        return Err(BarError::Label { vertex: v, reason: format!("`{}` does not fit the vertex", op.name(*x)) });
                    }
                }
                _ => return Err(BarError::Label { vertex: v, reason: "leaf/vertex label kind mismatch".into() }),
            }
        }
        Ok(())
    }

    fn canonical(&self, t: &Tree) -> (Tree, Intertwiner) {
        if let Some(v) = self.canon.read().unwrap().get(t) {
            return v.clone();
        }
        let v = t.canonical_form();
        self.canon.write().unwrap().insert(t.clone(), v.clone());
        v
    }

    fn automorphisms(&self, t: &Tree) -> Vec<Intertwiner> {
        if let Some(v) = self.auts.read().unwrap().get(t) {
            return v.clone();
        }
        let v = t.automorphisms();
        self.auts.write().unwrap().insert(t.clone(), v.clone());
        v
    }

    /// Moves labels along an intertwiner `σ: tree → target`. Returns the new labels and whether
    /// the sign flips (word relabeling plus the Σ-action at every vertex).
    pub fn transport(
        &self,
        tree: &Tree,
        labels: &[Label<C::Elem>],
        sigma: &Intertwiner,
        target: &Tree,
    ) -> Result<(Vec<Label<C::Elem>>, bool), BarError> {
        let op = self.operad();
        let w = relabel(&self.word(tree, labels), &sigma.sigma, &Ambient::of(target))?;
        let mut neg = w.is_negative();
        let mut out: Vec<Option<Label<C::Elem>>> = vec![None; tree.n()];
        for v in 1..=tree.n() {
            let tv = sigma.apply(v);
            let new = match &labels[v - 1] {
                Label::Leaf(a) => Label::Leaf(a.clone()),
                Label::Vertex(x) => {
                    let kids = tree.children(v);
                    let tkids = target.children(tv);
                    // π(a): position of σ(c_a) among the children of σ(v); act by ρ = π⁻¹
                    let mut rho = vec![0; kids.len()];
                    for (a, c) in kids.iter().enumerate() {
                        let b = tkids.iter().position(|&t| t == sigma.apply(*c)).expect("intertwiner");
                        rho[b] = a + 1;
                    }
                    let img = op.act_perm(&rho, *x)?;
                    let mut it = img.iter();
                    match (it.next(), it.next()) {
                        (Some((y, c)), None) if c.is_one() || c.neg().is_one() => {
                            if !c.is_one() {
                                neg = !neg;
                            }
                            Label::Vertex(*y)
                        }
                        _ => return Err(BarError::NonMonomial(op.name(*x).to_string())),
                    }
                }
            };
            out[tv - 1] = Some(new);
        }
        Ok((out.into_iter().map(|l| l.unwrap()).collect(), neg))
    }

    /// The basis element and sign representing `tree ⊗ labels`, or `None` when the class vanishes.
    fn normal_form(&self, tree: &Tree, labels: &[Label<C::Elem>]) -> Result<Option<(BarBasis<C::Elem>, bool)>, BarError> {
        let key = (tree.clone(), labels.to_vec());
        if let Some(v) = self.norm.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let (canon, sigma) = self.canonical(tree);
        let (l1, n1) = self.transport(tree, labels, &sigma, &canon)?;
        let mut best: Option<(Vec<Label<C::Elem>>, bool)> = None;
        let mut vanishes = false;
        let char2 = self.field().characteristic() == 2;
        for alpha in self.automorphisms(&canon) {
            let (l, n) = self.transport(&canon, &l1, &alpha, &canon)?;
            match &best {
                Some((bl, bn)) if *bl == l => {
                    if *bn != n && !char2 {
                        vanishes = true;
                    }
                }
                Some((bl, _)) if *bl < l => {}
                _ => {
                    best = Some((l, n));
                    vanishes = false;
                }
            }
        }
        let (l, n) = best.expect("identity automorphism");
        let out = (!vanishes).then(|| (BarBasis { tree: canon, labels: l }, n ^ n1));
        self.norm.write().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// `coeff · (tree ⊗ labels)` as a normalized vector.
    pub fn normalize(
        &self,
        tree: &Tree,
        labels: Vec<Label<C::Elem>>,
        coeff: &Scalar,
    ) -> Result<LinComb<BarBasis<C::Elem>>, BarError> {
        if coeff.is_zero() {
            return Ok(LinComb::new());
        }
        Ok(match self.normal_form(tree, &labels)? {
            Some((b, neg)) => LinComb::single(b, if neg { coeff.neg() } else { coeff.clone() }),
            None => LinComb::new(),
        })
    }

    /// Signed word `w` as a coefficient, after checking it is `±Det·f^ε` for the new labels.
    fn word_coeff(&self, w: &SignWord, tree: &Tree, labels: &[Label<C::Elem>]) -> Scalar {
        debug_assert!(w.is_zero() || w.unsigned() == self.word(tree, labels), "word {w} on {tree}");
        w.coefficient(self.field())
    }

    fn leaf_elem<'l>(&self, l: &'l Label<C::Elem>) -> &'l C::Elem {
        match l {
            Label::Leaf(a) => a,
            Label::Vertex(_) => panic!("vertex label on a leaf"),
        }
    }

    fn vertex_elem(&self, l: &Label<C::Elem>) -> OpElem {
        match l {
            Label::Vertex(x) => *x,
            Label::Leaf(_) => panic!("leaf label on a vertex"),
        }
    }

    /// The differential of `B̃(A)` on a basis element.
    pub fn diff_tilde(&self, b: &BarBasis<C::Elem>) -> Result<LinComb<BarBasis<C::Elem>>, BarError> {
        let t = &b.tree;
        let n = t.n();
        let op = self.operad();
        let field = self.field();
        let w = self.word(t, &b.labels);
        let mut out = LinComb::new();

        for j in t.inner_edges() {
            let wit = t.edge_contract(j)?;
            let p = t.s(j);
            let ell = t.children(p).iter().position(|&c| c == j).unwrap() + 1;
            let g = op.gamma_j_basis(ell, self.vertex_elem(&b.labels[j - 1]), self.vertex_elem(&b.labels[p - 1]))?;
            let word = relabel(&partial_e(j, &w), &wit.rho, &Ambient::of(&wit.result))?;
            for (z, c) in g.iter() {
                let labels: Vec<Label<C::Elem>> = (1..=wit.result.n())
                    .map(|i| if i == p - 1 { Label::Vertex(*z) } else { b.labels[wit.tau[i - 1] - 1].clone() })
                    .collect();
                let s = self.word_coeff(&word, &wit.result, &labels);
                out.add_assign(&self.normalize(&wit.result, labels, &(c * &s))?);
            }
        }

        for (i, j) in t.leaf_contraction_sites() {
            let wit = t.leaf_contract(i, j)?;
            let xs: Vec<C::Elem> = (i..j).map(|q| self.leaf_elem(&b.labels[q - 1]).clone()).collect();
            let th = self.carrier.act(&xs, self.vertex_elem(&b.labels[j - 1]))?;
            let amb = Ambient::of(&wit.result);
            let word = if j < n {
                relabel(&partial_e(j, &w), &wit.rho, &amb)?.negated()
            } else {
                relabel(&w, &wit.rho, &amb)?
            };
            for (z, c) in th.iter() {
                let labels: Vec<Label<C::Elem>> = (1..=wit.result.n())
                    .map(|q| if q == i { Label::Leaf(z.clone()) } else { b.labels[wit.tau[q - 1] - 1].clone() })
                    .collect();
                let s = self.word_coeff(&word, &wit.result, &labels);
                out.add_assign(&self.normalize(&wit.result, labels, &(c * &s))?);
            }
        }

        let root_neg = !t.root_is_leaf();
        for i in 1..=n {
            let word = left_mul_f(i, &w);
            let dx: LinComb<Label<C::Elem>> = match &b.labels[i - 1] {
                Label::Leaf(a) => self.carrier.diff(a)?.map_keys(|y| Label::Leaf(y.clone())),
                Label::Vertex(x) => op.d(*x).map_keys(|y| Label::Vertex(*y)),
            };
            for (y, c) in dx.iter() {
                let mut labels = b.labels.clone();
                labels[i - 1] = y.clone();
                let s = self.word_coeff(&word, t, &labels);
                let s = if root_neg { s.neg() } else { s };
                out.add_assign(&self.normalize(t, labels, &(c * &s))?);
            }
        }
        let _ = field;
        Ok(out)
    }

    pub fn diff_tilde_vec(&self, v: &LinComb<BarBasis<C::Elem>>) -> Result<LinComb<BarBasis<C::Elem>>, BarError> {
        let mut out = LinComb::new();
        for (b, c) in v.iter() {
            out.add_scaled(&self.diff_tilde(b)?, c);
        }
        Ok(out)
    }

    /// The differential of `B(A) = (B̃(A)/A)[−1]`.
    pub fn diff_quotient(&self, b: &BarBasis<C::Elem>) -> Result<LinComb<BarBasis<C::Elem>>, BarError> {
        let d = self.diff_tilde(b)?;
        Ok(d.into_terms().into_iter().filter(|(x, _)| !x.is_single_leaf()).map(|(x, c)| (x, c.neg())).collect())
    }

    /// The grafting homotopy: new root labeled by the unit, word multiplied by `e_n` on the left.
    pub fn homotopy(&self, b: &BarBasis<C::Elem>) -> Result<LinComb<BarBasis<C::Elem>>, BarError> {
        let t = &b.tree;
        let n = t.n();
        let g = t.graft();
        let w = self.word(t, &b.labels);
        let word = if t.root_is_leaf() { w } else { SignWord::e(n).mul(&w) };
        Ambient::of(&g).check(&word)?;
        let mut out = LinComb::new();
        for (u, c) in self.operad().unit(t.sort(n)).iter() {
            let mut labels = b.labels.clone();
            labels.push(Label::Vertex(*u));
            let s = self.word_coeff(&word, &g, &labels);
            out.add_assign(&self.normalize(&g, labels, &(c * &s))?);
        }
        Ok(out)
    }

    pub fn homotopy_vec(&self, v: &LinComb<BarBasis<C::Elem>>) -> Result<LinComb<BarBasis<C::Elem>>, BarError> {
        let mut out = LinComb::new();
        for (b, c) in v.iter() {
            out.add_scaled(&self.homotopy(b)?, c);
        }
        Ok(out)
    }

    /// `μ`: `θ(x_1,…,x_{n−1}; x_n)` on bushes, zero on other trees.
    pub fn mu(&self, b: &BarBasis<C::Elem>) -> Result<LinComb<C::Elem>, BarError> {
        if !b.tree.is_bush() {
            return Ok(LinComb::new());
        }
        let n = b.tree.n();
        let xs: Vec<C::Elem> = b.labels[..n - 1].iter().map(|l| self.leaf_elem(l).clone()).collect();
        Ok(self.carrier.act(&xs, self.vertex_elem(&b.labels[n - 1]))?)
    }

    pub fn mu_vec(&self, v: &LinComb<BarBasis<C::Elem>>) -> Result<LinComb<C::Elem>, BarError> {
        let mut out = LinComb::new();
        for (b, c) in v.iter() {
            out.add_scaled(&self.mu(b)?, c);
        }
        Ok(out)
    }

    /// The single-leaf element `a ∈ A ⊂ B̃(A)`.
    pub fn leaf(&self, a: C::Elem) -> BarBasis<C::Elem> {
        BarBasis { tree: Tree::single(true, self.carrier.sort(&a)), labels: vec![Label::Leaf(a)] }
    }

    /// `ι(a)`: the two-vertex chain with leaf `a` and root the unit. A section of `μ`.
    pub fn iota(&self, a: &C::Elem) -> Result<LinComb<BarBasis<C::Elem>>, BarError> {
        let b = self.leaf(a.clone());
        self.homotopy(&b)
    }

    /// Splits a tree with non-leaf root into its successor trees and root label:
    /// `b = ±(b_1 ⊗ … ⊗ b_m) ⊗ x_n`. The sign compares `Det·f^ε` with
    /// `∏_i (e_{k_i} E_i F_i) · f_n^{ε_n}`, `k_i` the root of the `i`-th block.
    pub fn split(&self, b: &BarBasis<C::Elem>) -> Option<(Vec<BarBasis<C::Elem>>, OpElem, bool)> {
        let t = &b.tree;
        if t.root_is_leaf() {
            return None;
        }
        let n = t.n();
        let mut gens = Vec::new();
        let mut blocks = Vec::new();
        let mut prev = 0;
        for (k, sub) in t.children(n).into_iter().zip(t.successors().ok()?) {
            if !t.is_leaf(k) {
                gens.push(Gen::E(k));
            }
            gens.extend((prev + 1..k).filter(|&i| !t.is_leaf(i)).map(Gen::E));
            gens.extend((prev + 1..=k).filter(|&i| self.parity(&b.labels[i - 1])).map(Gen::F));
            blocks.push(BarBasis { tree: sub, labels: b.labels[prev..k].to_vec() });
            prev = k;
        }
        if self.parity(&b.labels[n - 1]) {
            gens.push(Gen::F(n));
        }
        let w = SignWord::from_product(false, &gens);
        debug_assert_eq!(w.unsigned(), self.word(t, &b.labels));
        Some((blocks, self.vertex_elem(&b.labels[n - 1]), w.is_negative()))
    }

    /// Inverse of the bar D-structure's `δ`: `(T_1 ⊗ … ⊗ T_m ⊗ c) ↦ −s(T)·T`.
    pub fn join(
        &self,
        blocks: &[BarBasis<C::Elem>],
        root: OpElem,
        coeff: &Scalar,
    ) -> Result<LinComb<BarBasis<C::Elem>>, BarError> {
        let subs: Vec<Tree> = blocks.iter().map(|b| b.tree.clone()).collect();
        let tree = Tree::from_successors(self.operad().signature(root).output, &subs);
        let mut labels: Vec<Label<C::Elem>> = blocks.iter().flat_map(|b| b.labels.iter().cloned()).collect();
        labels.push(Label::Vertex(root));
        self.check_labels(&tree, &labels)?;
        let raw = BarBasis { tree: tree.clone(), labels: labels.clone() };
        let (_, _, neg) = self.split(&raw).expect("non-leaf root");
        self.normalize(&tree, labels, &if neg { coeff.clone() } else { coeff.neg() })
    }

    /// All basis elements of `B̃(A)` with size at most `size`, sorted.
    pub fn basis_upto(&self, size: usize) -> Result<Vec<BarBasis<C::Elem>>, BarError> {
        let op = self.operad();
        let leaves = self.carrier.basis_upto(size.saturating_sub(1))?;
        let mut out = BTreeSet::new();
        for n in 1..=size {
            for t in enumerate(n, true, op.num_sorts())? {
                if (1..=n).any(|v| !t.is_leaf(v) && t.valence(v) > op.cap()) {
                    continue;
                }
                let mut choices: Vec<Vec<Label<C::Elem>>> = Vec::new();
                for v in 1..=n {
                    if t.is_leaf(v) {
                        choices.push(
                            leaves
                                .iter()
                                .filter(|a| self.carrier.sort(a) == t.sort(v) && self.carrier.weight(a) + n <= size)
                                .map(|a| Label::Leaf(a.clone()))
                                .collect(),
                        );
                    } else {
                        let ins: Vec<_> = t.children(v).into_iter().map(|c| t.sort(c)).collect();
                        choices.push(op.basis_of(&ins, t.sort(v)).into_iter().map(Label::Vertex).collect());
                    }
                }
                if choices.iter().any(|c| c.is_empty()) {
                    continue;
                }
                let mut idx = vec![0; n];
                loop {
                    let labels: Vec<Label<C::Elem>> = (0..n).map(|v| choices[v][idx[v]].clone()).collect();
                    let b = BarBasis { tree: t.clone(), labels };
                    if self.size(&b) <= size {
                        if let Some((nb, _)) = self.normal_form(&b.tree, &b.labels)? {
                            out.insert(nb);
                        }
                    }
                    let mut k = n;
                    loop {
                        if k == 0 {
                            break;
                        }
                        k -= 1;
                        idx[k] += 1;
                        if idx[k] < choices[k].len() {
                            break;
                        }
                        idx[k] = 0;
                        if k == 0 {
                            k = usize::MAX;
                            break;
                        }
                    }
                    if k == usize::MAX || (k == 0 && idx[0] == 0) {
                        break;
                    }
                }
            }
        }
        Ok(out.into_iter().collect())
    }

    pub fn elem_name(&self, b: &BarBasis<C::Elem>) -> String {
        let op = self.operad();
        let ls: Vec<String> = b
            .labels
            .iter()
            .map(|l| match l {
                Label::Leaf(a) => self.carrier.elem_name(a),
                Label::Vertex(x) => op.name(*x).to_string(),
            })
            .collect();
        format!("{}[{}]", b.tree.fmt_with_sorts(if op.num_sorts() > 1 { Some(op.sort_names()) } else { None }), ls.join(" "))
    }

    pub fn fmt_vec(&self, v: &LinComb<BarBasis<C::Elem>>) -> String {
        if v.is_zero() {
            return "0".into();
        }
        v.iter().map(|(b, c)| format!("{c}*{}", self.elem_name(b))).collect::<Vec<_>>().join(" + ")
    }

    fn check_window_cap(&self, size: usize) -> Result<(), BarError> {
        let cap = self.operad().cap();
        if size >= 2 && cap < size - 1 {
            return Err(BarError::CapTooSmall { size, needed: size - 1, cap });
        }
        Ok(())
    }

    /// The window `F_size` of `B̃(A)` as a chain complex.
    pub fn tilde_window(&self, size: usize) -> Result<(Vec<BarBasis<C::Elem>>, ChainComplex), BarError> {
        self.check_window_cap(size)?;
        let basis = self.basis_upto(size)?;
        let err = RwLock::new(None);
        let (c, _) = span_complex(
            self.field(),
            &basis,
            |b| self.elem_name(b),
            |b| self.degree(b),
            |b| {
                self.diff_tilde(b).unwrap_or_else(|e| {
                    *err.write().unwrap() = Some(e);
                    LinComb::new()
                })
            },
        )?;
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
        Ok((basis, c))
    }

    /// The window `F_size` of `B(A)`.
    pub fn quotient_window(&self, size: usize) -> Result<BarWindow<C::Elem>, BarError> {
        self.check_window_cap(size)?;
        let basis: Vec<BarBasis<C::Elem>> = self.basis_upto(size)?.into_iter().filter(|b| !b.is_single_leaf()).collect();
        let err = RwLock::new(None);
        let (complex, _) = span_complex(
            self.field(),
            &basis,
            |b| self.elem_name(b),
            |b| self.degree(b) - 1,
            |b| {
                self.diff_quotient(b).unwrap_or_else(|e| {
                    *err.write().unwrap() = Some(e);
                    LinComb::new()
                })
            },
        )?;
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
        let inner_mask = basis.iter().map(|b| self.size(b) < size).collect();
        Ok(BarWindow { size, basis, complex, inner_mask })
    }
}

impl<E> BarWindow<E> {
    /// Ranks of `H_k(F_{N−1}) → H_k(F_N)` over the degrees present in the window.
    pub fn persistent_ranks(&self) -> Result<std::collections::BTreeMap<i64, usize>, ChainError> {
        let degs = self.complex.basis().degrees();
        let (lo, hi) = match (degs.first(), degs.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Ok(Default::default()),
        };
        persistent_dims(&self.complex, &self.inner_mask, lo..=hi)
    }
}

impl<E: fmt::Debug> fmt::Debug for BarWindow<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarWindow").field("size", &self.size).field("dim", &self.basis.len()).finish()
    }
}

/// `d∘d = 0` and `dh + hd = Id` on every element of `F_size B̃(A)`, vanishing of the persistent
/// homology of `B̃(A)`, and `μ` a chain map on `F_size B(A)`.
pub fn verify_bar<C: Carrier>(bar: &Bar<'_, C>, size: usize) -> Result<VerifyReport, BarError> {
    use rayon::prelude::*;
    let field = bar.field();
    let (basis, complex) = bar.tilde_window(size)?;
    type Outcome = Result<(Option<String>, Option<String>), BarError>;
    let results: Vec<Outcome> = basis
        .par_iter()
        .map(|x| {
            let d = bar.diff_tilde(x)?;
            let dd = bar.diff_tilde_vec(&d)?;
            let sq = (!dd.is_zero()).then(|| format!("dd {} = {}", bar.elem_name(x), bar.fmt_vec(&dd)));
            let mut id = bar.diff_tilde_vec(&bar.homotopy(x)?)?;
            id.add_assign(&bar.homotopy_vec(&d)?);
            let one = LinComb::single(x.clone(), field.one());
            let ht = (id != one).then(|| format!("(dh + hd) {} = {}", bar.elem_name(x), bar.fmt_vec(&id)));
            Ok((sq, ht))
        })
        .collect();
    let mut squared = CheckOutcome::new("d-squared");
    let mut homotopy = CheckOutcome::new("homotopy");
    for r in results {
        let (sq, ht) = r?;
        squared.record(sq.is_none(), || sq.unwrap());
        homotopy.record(ht.is_none(), || ht.unwrap());
    }

    let mut acyclic = CheckOutcome::new("tilde-acyclic");
    let mask: Vec<bool> = basis.iter().map(|b| bar.size(b) < size).collect();
    let degs = complex.basis().degrees();
    if let (Some(&lo), Some(&hi)) = (degs.first(), degs.last()) {
        for (k, r) in persistent_dims(&complex, &mask, lo..=hi)? {
            acyclic.record(r == 0, || format!("H_{k}(F_{}) → H_{k}(F_{size}) has rank {r}", size - 1));
        }
    }

    let win = bar.quotient_window(size)?;
    let carrier = bar.carrier;
    let results: Vec<Result<Option<String>, BarError>> = win
        .basis
        .par_iter()
        .map(|b| {
            let lhs = bar.mu_vec(&bar.diff_quotient(b)?)?;
            let mut rhs = LinComb::new();
            for (x, k) in bar.mu(b)?.iter() {
                rhs.add_scaled(&carrier.diff(x)?, k);
            }
            Ok((lhs != rhs).then(|| format!("{}: μd = {:?} but dμ = {:?}", bar.elem_name(b), lhs, rhs)))
        })
        .collect();
    let mut mu = CheckOutcome::new("mu-chain-map");
    for r in results {
        let r = r?;
        mu.record(r.is_none(), || r.unwrap());
    }
    Ok(VerifyReport { checks: vec![squared, homotopy, acyclic, mu] })
}
