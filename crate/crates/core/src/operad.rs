//! Unital DG operads presented by basis, single- or multi-sorted.
//!
//! Conventions. For `σ ∈ Σ_k` write `R_σ(x)_i = ±x_{σ(i)}` (Koszul sign). The right action `σ*` on
//! operations satisfies `θ(R_σ x; σ*c) = θ(x; c)` and `(σ∘τ)* = τ*∘σ*`. It is stored on adjacent
//! transpositions `t_a = (a a+1)`. Composition is `γ(x_1,…,x_k; y)`: the outputs of the `x_i`
//! feed the inputs of `y`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use serde::Serialize;
use thiserror::Error;

use crate::algebra::UnitalAlgebra;
use crate::coeff::{FieldSpec, Scalar};
use crate::linalg::LinComb;
use crate::tree::{permutations, SortId};

pub type SigId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Signature {
    pub inputs: Vec<SortId>,
    pub output: SortId,
}

impl Signature {
    pub fn new(inputs: Vec<SortId>, output: SortId) -> Self {
        Signature { inputs, output }
    }

    pub fn arity(&self) -> usize {
        self.inputs.len()
    }

    fn swapped(&self, a: usize) -> Signature {
        let mut s = self.clone();
        s.inputs.swap(a - 1, a);
        s
    }
}

/// A basis element of some component `𝒞(sig)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OpElem {
    pub sig: SigId,
    pub idx: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub sig: Signature,
    pub names: Vec<String>,
    pub degrees: Vec<i64>,
    pub d: Vec<LinComb<u32>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Certificate {
    Char0,
    FreeModule,
    Asserted,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Certificate::Char0 => "char0",
            Certificate::FreeModule => "free-module",
            Certificate::Asserted => "asserted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OperadError {
    #[error("unknown operation `{0}`")]
    UnknownName(String),
    #[error("duplicate operation name `{0}`")]
    DuplicateName(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("arity {arity} exceeds cap {cap}")]
    CapExceeded { arity: usize, cap: usize },
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("no component with signature {0}")]
    NoComponent(String),
    #[error("invalid presentation: {0}")]
    Invalid(String),
    #[error("certificate error: {0}")]
    Certificate(String),
    #[error("Σ-action is not monomial on `{0}`")]
    NotMonomial(String),
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
}

pub type GammaRule = Arc<dyn Fn(&Operad, &[OpElem], OpElem) -> LinComb<OpElem> + Send + Sync>;

type GammaKey = (Vec<OpElem>, OpElem);

#[derive(Clone)]
pub enum GammaSource {
    Table(HashMap<GammaKey, LinComb<OpElem>>),
    Rule(GammaRule),
}

pub struct Operad {
    field: FieldSpec,
    sort_names: Vec<String>,
    cap: usize,
    comps: Vec<Component>,
    sig_ids: HashMap<Signature, SigId>,
    names: HashMap<String, OpElem>,
    swaps: HashMap<(SigId, usize), Vec<LinComb<OpElem>>>,
    units: Vec<LinComb<OpElem>>,
    gamma: GammaSource,
    certificate: Certificate,
    builtin: Option<String>,
    perm_cache: RwLock<HashMap<(Vec<usize>, OpElem), LinComb<OpElem>>>,
    gamma_cache: RwLock<HashMap<GammaKey, LinComb<OpElem>>>,
    by_output: OnceLock<Vec<Vec<OpElem>>>,
}

impl fmt::Debug for Operad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operad")
            .field("field", &self.field)
            .field("sorts", &self.sort_names)
            .field("cap", &self.cap)
            .field("components", &self.comps.len())
            .field("builtin", &self.builtin)
            .finish()
    }
}

/// Mutable presentation of an operad, resolved and checked by [`OperadBuilder::build`].
pub struct OperadBuilder {
    field: FieldSpec,
    sort_names: Vec<String>,
    cap: usize,
    comps: Vec<(Signature, Vec<(String, i64)>)>,
    d: Vec<(String, Vec<(String, Scalar)>)>,
    swaps: Vec<(usize, String, Vec<(String, Scalar)>)>,
    units: Vec<(SortId, Vec<(String, Scalar)>)>,
    gamma_entries: Vec<(String, Vec<String>, Vec<(String, Scalar)>)>,
    gamma_rule: Option<GammaRule>,
    certificate: Certificate,
    builtin: Option<String>,
}

impl OperadBuilder {
    pub fn new(field: FieldSpec, sort_names: Vec<String>, cap: usize) -> Self {
        OperadBuilder {
            field,
            sort_names,
            cap,
            comps: Vec::new(),
            d: Vec::new(),
            swaps: Vec::new(),
            units: Vec::new(),
            gamma_entries: Vec::new(),
            gamma_rule: None,
            certificate: Certificate::Asserted,
            builtin: None,
        }
    }

    pub fn component(&mut self, sig: Signature, basis: Vec<(String, i64)>) -> &mut Self {
        self.comps.push((sig, basis));
        self
    }

    pub fn differential(&mut self, name: &str, image: Vec<(String, Scalar)>) -> &mut Self {
        self.d.push((name.to_string(), image));
        self
    }

    /// Image of `name` under `t_a*`, `a` 1-based.
    pub fn swap(&mut self, a: usize, name: &str, image: Vec<(String, Scalar)>) -> &mut Self {
        self.swaps.push((a, name.to_string(), image));
        self
    }

    pub fn unit(&mut self, sort: SortId, value: Vec<(String, Scalar)>) -> &mut Self {
        self.units.push((sort, value));
        self
    }

    pub fn gamma(&mut self, outer: &str, inner: Vec<String>, value: Vec<(String, Scalar)>) -> &mut Self {
        self.gamma_entries.push((outer.to_string(), inner, value));
        self
    }

    pub fn gamma_rule(&mut self, rule: GammaRule) -> &mut Self {
        self.gamma_rule = Some(rule);
        self
    }

    pub fn certificate(&mut self, c: Certificate) -> &mut Self {
        self.certificate = c;
        self
    }

    fn builtin_name(&mut self, name: &str) -> &mut Self {
        self.builtin = Some(name.to_string());
        self
    }

    pub fn build(self) -> Result<Operad, OperadError> {
        let mut comps = Vec::new();
        let mut sig_ids = HashMap::new();
        let mut names = HashMap::new();
        for (sig, basis) in &self.comps {
            if sig.arity() > self.cap {
                return Err(OperadError::CapExceeded { arity: sig.arity(), cap: self.cap });
            }
            if sig.inputs.iter().chain([&sig.output]).any(|&s| s as usize >= self.sort_names.len()) {
                return Err(OperadError::UnknownSort(format!("{sig:?}")));
            }
            let id = comps.len() as SigId;
            if sig_ids.insert(sig.clone(), id).is_some() {
                return Err(OperadError::Invalid(format!("component {sig:?} declared twice")));
            }
            for (i, (n, _)) in basis.iter().enumerate() {
                if names.insert(n.clone(), OpElem { sig: id, idx: i as u32 }).is_some() {
                    return Err(OperadError::DuplicateName(n.clone()));
                }
            }
            comps.push(Component {
                sig: sig.clone(),
                names: basis.iter().map(|(n, _)| n.clone()).collect(),
                degrees: basis.iter().map(|(_, k)| *k).collect(),
                d: vec![LinComb::new(); basis.len()],
            });
        }
        let resolve = |n: &str| names.get(n).copied().ok_or_else(|| OperadError::UnknownName(n.to_string()));
        let resolve_comb = |terms: &[(String, Scalar)]| -> Result<LinComb<OpElem>, OperadError> {
            let mut v = LinComb::new();
            for (n, c) in terms {
                v.add_term(resolve(n)?, c.clone());
            }
            Ok(v)
        };
        for (n, img) in &self.d {
            let x = resolve(n)?;
            let v = resolve_comb(img)?;
            let deg = comps[x.sig as usize].degrees[x.idx as usize];
            let mut local = LinComb::new();
            for (y, c) in v.iter() {
                if y.sig != x.sig || comps[y.sig as usize].degrees[y.idx as usize] != deg - 1 {
                    return Err(OperadError::Invalid(format!("d({n}) leaves its component or degree")));
                }
                local.add_term(y.idx, c.clone());
            }
            comps[x.sig as usize].d[x.idx as usize] = local;
        }
        let mut swaps: HashMap<(SigId, usize), Vec<LinComb<OpElem>>> = HashMap::new();
        for (id, c) in comps.iter().enumerate() {
            for a in 1..c.sig.arity() {
                let target = c.sig.swapped(a);
                if !sig_ids.contains_key(&target) {
                    return Err(OperadError::Invalid(format!("component {:?} has no swapped partner", c.sig)));
                }
                swaps.insert((id as SigId, a), vec![LinComb::new(); c.names.len()]);
            }
        }
        for (a, n, img) in &self.swaps {
            let x = resolve(n)?;
            let sig = &comps[x.sig as usize].sig;
            if *a == 0 || *a >= sig.arity() {
                return Err(OperadError::Invalid(format!("swap position {a} out of range for `{n}`")));
            }
            let target = sig_ids[&sig.swapped(*a)];
            let v = resolve_comb(img)?;
            if v.keys().any(|y| y.sig != target) {
                return Err(OperadError::Invalid(format!("swap {a} of `{n}` lands in the wrong component")));
            }
            swaps.get_mut(&(x.sig, *a)).unwrap()[x.idx as usize] = v;
        }
        let mut units = vec![LinComb::new(); self.sort_names.len()];
        for (s, val) in &self.units {
            let v = resolve_comb(val)?;
            let want = Signature::new(vec![*s], *s);
            if v.keys().any(|y| comps[y.sig as usize].sig != want) {
                return Err(OperadError::Invalid(format!("unit of sort {} is not in 𝒞(1)", self.sort_names[*s as usize])));
            }
            units[*s as usize] = v;
        }
        let gamma = match self.gamma_rule {
            Some(rule) => GammaSource::Rule(rule),
            None => {
                let mut table = HashMap::new();
                for (outer, inner, val) in &self.gamma_entries {
                    let o = resolve(outer)?;
                    let inn: Vec<OpElem> = inner.iter().map(|n| resolve(n)).collect::<Result<_, _>>()?;
                    table.insert((inn, o), resolve_comb(val)?);
                }
                GammaSource::Table(table)
            }
        };
        let op = Operad {
            field: self.field,
            sort_names: self.sort_names,
            cap: self.cap,
            comps,
            sig_ids,
            names,
            swaps,
            units,
            gamma,
            certificate: self.certificate,
            builtin: self.builtin,
            perm_cache: RwLock::new(HashMap::new()),
            gamma_cache: RwLock::new(HashMap::new()),
            by_output: OnceLock::new(),
        };
        op.check_structure()?;
        Ok(op)
    }
}

impl Operad {
    fn check_structure(&self) -> Result<(), OperadError> {
        for (s, u) in self.units.iter().enumerate() {
            if u.is_zero() {
                return Err(OperadError::Invalid(format!("sort {} has no unit", self.sort_names[s])));
            }
            for (x, _) in u.iter() {
                if self.degree(*x) != 0 {
                    return Err(OperadError::Invalid("unit is not of degree 0".into()));
                }
            }
            if !self.d_comb(u).is_zero() {
                return Err(OperadError::Invalid("unit is not a cycle".into()));
            }
        }
        for (id, c) in self.comps.iter().enumerate() {
            for i in 0..c.names.len() {
                let x = OpElem { sig: id as SigId, idx: i as u32 };
                if !self.d_comb(&self.d(x)).is_zero() {
                    return Err(OperadError::Invalid(format!("d∘d ≠ 0 on `{}`", c.names[i])));
                }
                for a in 1..c.sig.arity() {
                    let img = &self.swaps[&(id as SigId, a)][i];
                    if img.iter().any(|(y, _)| self.degree(*y) != c.degrees[i]) {
                        return Err(OperadError::Invalid(format!("t_{a} changes the degree of `{}`", c.names[i])));
                    }
                }
            }
        }
        match self.certificate {
            Certificate::Char0 if !self.field.is_char_zero() => {
                return Err(OperadError::Certificate("char0 certificate over a field of positive characteristic".into()))
            }
            Certificate::FreeModule => self.check_free()?,
            _ => {}
        }
        Ok(())
    }

    /// Every basis element has trivial stabilizer (up to sign) and the action is monomial,
    /// so each 𝒞(n) is a sum of signed regular representations.
    fn check_free(&self) -> Result<(), OperadError> {
        for (id, c) in self.comps.iter().enumerate() {
            let k = c.sig.arity();
            for i in 0..c.names.len() {
                let x = OpElem { sig: id as SigId, idx: i as u32 };
                let mut orbit = std::collections::HashSet::new();
                for p in permutations(k) {
                    let sigma: Vec<usize> = p.iter().map(|v| v + 1).collect();
                    let img = self.act_perm(&sigma, x)?;
                    if img.len() != 1 {
                        return Err(OperadError::Certificate(format!(
                            "free-module certificate needs a monomial action; `{}` is not",
                            c.names[i]
                        )));
                    }
                    orbit.insert(*img.keys().next().unwrap());
                }
                if orbit.len() != permutations(k).len() {
                    return Err(OperadError::Certificate(format!("`{}` has a nontrivial stabilizer", c.names[i])));
                }
            }
        }
        Ok(())
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn sort_names(&self) -> &[String] {
        &self.sort_names
    }

    pub fn num_sorts(&self) -> usize {
        self.sort_names.len()
    }

    pub fn sort_id(&self, name: &str) -> Option<SortId> {
        self.sort_names.iter().position(|s| s == name).map(|i| i as SortId)
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    pub fn builtin_name(&self) -> Option<&str> {
        self.builtin.as_deref()
    }

    pub fn components(&self) -> &[Component] {
        &self.comps
    }

    pub fn signature(&self, x: OpElem) -> &Signature {
        &self.comps[x.sig as usize].sig
    }

    pub fn sig_of(&self, id: SigId) -> &Signature {
        &self.comps[id as usize].sig
    }

    pub fn sig_id(&self, sig: &Signature) -> Option<SigId> {
        self.sig_ids.get(sig).copied()
    }

    pub fn arity(&self, x: OpElem) -> usize {
        self.signature(x).arity()
    }

    pub fn degree(&self, x: OpElem) -> i64 {
        self.comps[x.sig as usize].degrees[x.idx as usize]
    }

    pub fn name(&self, x: OpElem) -> &str {
        &self.comps[x.sig as usize].names[x.idx as usize]
    }

    pub fn lookup(&self, name: &str) -> Option<OpElem> {
        self.names.get(name).copied()
    }

    pub fn basis(&self, sig: SigId) -> impl Iterator<Item = OpElem> + '_ {
        (0..self.comps[sig as usize].names.len() as u32).map(move |idx| OpElem { sig, idx })
    }

    /// Every basis element, ordered by component then index.
    pub fn all_basis(&self) -> Vec<OpElem> {
        (0..self.comps.len() as SigId).flat_map(|s| self.basis(s)).collect()
    }

    /// Basis elements with the given input sorts and output sort.
    pub fn basis_of(&self, inputs: &[SortId], output: SortId) -> Vec<OpElem> {
        match self.sig_id(&Signature::new(inputs.to_vec(), output)) {
            Some(id) => self.basis(id).collect(),
            None => Vec::new(),
        }
    }

    pub fn d(&self, x: OpElem) -> LinComb<OpElem> {
        self.comps[x.sig as usize].d[x.idx as usize].map_keys(|&idx| OpElem { sig: x.sig, idx })
    }

    pub fn d_comb(&self, v: &LinComb<OpElem>) -> LinComb<OpElem> {
        v.apply(|x| self.d(*x))
    }

    pub fn unit(&self, sort: SortId) -> &LinComb<OpElem> {
        &self.units[sort as usize]
    }

    pub fn is_monomial(&self) -> bool {
        self.swaps.values().all(|imgs| imgs.iter().all(|v| v.len() == 1))
    }

    pub fn swap_image(&self, a: usize, x: OpElem) -> LinComb<OpElem> {
        self.swaps[&(x.sig, a)][x.idx as usize].clone()
    }

    /// `σ*x`, where `sigma[i - 1] = σ(i)`.
    pub fn act_perm(&self, sigma: &[usize], x: OpElem) -> Result<LinComb<OpElem>, OperadError> {
        let k = self.arity(x);
        if sigma.len() != k {
            return Err(OperadError::ArityMismatch(format!("permutation of length {} on arity {k}", sigma.len())));
        }
        if sigma.iter().enumerate().all(|(i, &s)| s == i + 1) {
            return Ok(LinComb::single(x, self.field.one()));
        }
        let key = (sigma.to_vec(), x);
        if let Some(v) = self.perm_cache.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let mut rank = vec![0; k + 1];
        for (i, &s) in sigma.iter().enumerate() {
            rank[s] = i;
        }
        let mut cur: Vec<usize> = (1..=k).collect();
        let mut v = LinComb::single(x, self.field.one());
        loop {
            let Some(a) = (0..k.saturating_sub(1)).find(|&a| rank[cur[a]] > rank[cur[a + 1]]) else { break };
            cur.swap(a, a + 1);
            v = v.apply(|y| self.swap_image(a + 1, *y));
        }
        self.perm_cache.write().unwrap().insert(key, v.clone());
        Ok(v)
    }

    /// `γ(x_1,…,x_k; y)` on basis elements.
    pub fn gamma_basis(&self, inner: &[OpElem], outer: OpElem) -> Result<LinComb<OpElem>, OperadError> {
        let sig = self.signature(outer);
        if inner.len() != sig.arity() {
            return Err(OperadError::ArityMismatch(format!(
                "{} inner operations for `{}` of arity {}",
                inner.len(),
                self.name(outer),
                sig.arity()
            )));
        }
        let mut total = 0;
        for (i, x) in inner.iter().enumerate() {
            if self.signature(*x).output != sig.inputs[i] {
                return Err(OperadError::SortMismatch(format!(
                    "output of `{}` does not match input {} of `{}`",
                    self.name(*x),
                    i + 1,
                    self.name(outer)
                )));
            }
            total += self.arity(*x);
        }
        if total > self.cap {
            return Err(OperadError::CapExceeded { arity: total, cap: self.cap });
        }
        let key = (inner.to_vec(), outer);
        if let Some(v) = self.gamma_cache.read().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let v = match &self.gamma {
            GammaSource::Table(t) => t.get(&key).cloned().unwrap_or_default(),
            GammaSource::Rule(r) => r(self, inner, outer),
        };
        self.gamma_cache.write().unwrap().insert(key, v.clone());
        Ok(v)
    }

    /// Multilinear `γ(x_1,…,x_k; y)`.
    pub fn gamma(&self, inner: &[LinComb<OpElem>], outer: &LinComb<OpElem>) -> Result<LinComb<OpElem>, OperadError> {
        let mut out = LinComb::new();
        for (y, cy) in outer.iter() {
            let mut partial: Vec<(Vec<OpElem>, Scalar)> = vec![(Vec::new(), cy.clone())];
            for xs in inner {
                let mut next = Vec::new();
                for (tuple, c) in &partial {
                    for (x, cx) in xs.iter() {
                        let mut t = tuple.clone();
                        t.push(*x);
                        next.push((t, c * cx));
                    }
                }
                partial = next;
            }
            for (tuple, c) in partial {
                out.add_scaled(&self.gamma_basis(&tuple, *y)?, &c);
            }
        }
        Ok(out)
    }

    /// `γ_j(x, y) = γ(1,…,1, x, 1,…,1; y)` with `x` in position `j` (1-based).
    pub fn gamma_j(&self, j: usize, x: &LinComb<OpElem>, y: &LinComb<OpElem>) -> Result<LinComb<OpElem>, OperadError> {
        let mut out = LinComb::new();
        for (yb, cy) in y.iter() {
            let sig = self.signature(*yb).clone();
            if j == 0 || j > sig.arity() {
                return Err(OperadError::ArityMismatch(format!("γ_{j} on arity {}", sig.arity())));
            }
            let inner: Vec<LinComb<OpElem>> = (1..=sig.arity())
                .map(|i| if i == j { x.clone() } else { self.unit(sig.inputs[i - 1]).clone() })
                .collect();
            out.add_scaled(&self.gamma(&inner, &LinComb::single(*yb, self.field.one()))?, cy);
        }
        Ok(out)
    }

    pub fn gamma_j_basis(&self, j: usize, x: OpElem, y: OpElem) -> Result<LinComb<OpElem>, OperadError> {
        let one = self.field.one();
        self.gamma_j(j, &LinComb::single(x, one.clone()), &LinComb::single(y, one))
    }

    /// Replaces a rule-based γ with its table on all basis tuples up to the cap.
    pub fn materialize_gamma(&mut self) {
        if let GammaSource::Table(_) = self.gamma {
            return;
        }
        let mut table = HashMap::new();
        for y in self.all_basis() {
            let sig = self.signature(y).clone();
            for tuple in self.inner_tuples(&sig.inputs, self.cap) {
                let v = self.gamma_basis(&tuple, y).expect("rule-based γ on valid tuple");
                if !v.is_zero() {
                    table.insert((tuple, y), v);
                }
            }
        }
        self.gamma = GammaSource::Table(table);
        self.builtin = None;
    }

    /// Overwrites one structure constant (used for presentations and fault injection).
    pub fn set_gamma_entry(&mut self, inner: Vec<OpElem>, outer: OpElem, value: LinComb<OpElem>) {
        self.materialize_gamma();
        if let GammaSource::Table(t) = &mut self.gamma {
            t.insert((inner, outer), value);
        }
        self.gamma_cache.write().unwrap().clear();
    }

    pub fn gamma_table(&self) -> Option<BTreeMap<GammaKey, LinComb<OpElem>>> {
        match &self.gamma {
            GammaSource::Table(t) => Some(t.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
            GammaSource::Rule(_) => None,
        }
    }

    /// Tuples `(x_1,…,x_k)` of basis elements with output sorts `outputs` and total arity ≤ `max_total`.
    pub fn inner_tuples(&self, outputs: &[SortId], max_total: usize) -> Vec<Vec<OpElem>> {
        let by_output = self.by_output.get_or_init(|| {
            (0..self.num_sorts() as SortId)
                .map(|s| self.all_basis().into_iter().filter(|x| self.signature(*x).output == s).collect())
                .collect()
        });
        let mut out = Vec::new();
        let mut cur = Vec::new();
        self.tuples_rec(outputs, by_output, max_total, &mut cur, &mut out);
        out
    }

    fn tuples_rec(
        &self,
        outputs: &[SortId],
        by_output: &[Vec<OpElem>],
        budget: usize,
        cur: &mut Vec<OpElem>,
        out: &mut Vec<Vec<OpElem>>,
    ) {
        if cur.len() == outputs.len() {
            out.push(cur.clone());
            return;
        }
        for &x in &by_output[outputs[cur.len()] as usize] {
            let a = self.arity(x);
            if a <= budget {
                cur.push(x);
                self.tuples_rec(outputs, by_output, budget - a, cur, out);
                cur.pop();
            }
        }
    }

    pub fn fmt_comb(&self, v: &LinComb<OpElem>) -> String {
        if v.is_zero() {
            return "0".into();
        }
        v.iter().map(|(x, c)| format!("{c}*{}", self.name(*x))).collect::<Vec<_>>().join(" + ")
    }
}

/// Parity of the Koszul sign of `R_σ` on a tuple with the given parities (`sigma` 1-based).
pub fn koszul_negative(odd: &[bool], sigma: &[usize]) -> bool {
    let mut neg = false;
    for i in 0..sigma.len() {
        for j in i + 1..sigma.len() {
            if sigma[i] > sigma[j] && odd[sigma[i] - 1] && odd[sigma[j] - 1] {
                neg = !neg;
            }
        }
    }
    neg
}

// ---------------------------------------------------------------------------------------------
// Verification

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    pub failures: Vec<String>,
}

impl CheckOutcome {
    pub fn new(name: &str) -> Self {
        CheckOutcome { name: name.to_string(), passed: true, instances: 0, failures: Vec::new() }
    }

    pub fn record(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.instances += 1;
        if !ok {
            self.passed = false;
            if self.failures.len() < 20 {
                self.failures.push(witness());
            }
        }
    }

    pub fn fail(&mut self, witness: String) {
        self.passed = false;
        if self.failures.len() < 20 {
            self.failures.push(witness);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn one_of(op: &Operad, x: OpElem) -> LinComb<OpElem> {
    LinComb::single(x, op.field.one())
}

/// Checks the operad axioms on basis tuples of total arity at most `verify_cap`.
pub fn verify_operad(op: &Operad, verify_cap: usize) -> VerifyReport {
    let cap = verify_cap.min(op.cap);
    let field = op.field;
    let basis: Vec<OpElem> = op.all_basis().into_iter().filter(|x| op.arity(*x) <= cap).collect();
    let tuple_name = |xs: &[OpElem]| xs.iter().map(|x| op.name(*x)).collect::<Vec<_>>().join(",");

    let mut sym = CheckOutcome::new("sigma-relations");
    for &x in &op.all_basis() {
        let k = op.arity(x);
        let ox = one_of(op, x);
        for a in 1..k {
            let sq = op.swap_image(a, x).apply(|y| op.swap_image(a, *y));
            sym.record(sq == ox, || format!("t{a}² ≠ 1 on {}", op.name(x)));
            let dsw = op.d_comb(&op.swap_image(a, x));
            let swd = op.d(x).apply(|y| op.swap_image(a, *y));
            sym.record(dsw == swd, || format!("t{a} does not commute with d on {}", op.name(x)));
            if a + 1 < k {
                let t = |b: usize, v: &LinComb<OpElem>| v.apply(|y| op.swap_image(b, *y));
                let l = t(a, &t(a + 1, &t(a, &ox)));
                let r = t(a + 1, &t(a, &t(a + 1, &ox)));
                sym.record(l == r, || format!("braid relation fails at {a} on {}", op.name(x)));
            }
            for b in a + 2..k {
                let t = |b: usize, v: &LinComb<OpElem>| v.apply(|y| op.swap_image(b, *y));
                sym.record(t(a, &t(b, &ox)) == t(b, &t(a, &ox)), || {
                    format!("t{a} and t{b} do not commute on {}", op.name(x))
                });
            }
        }
    }

    let mut unit = CheckOutcome::new("unit-laws");
    let mut deriv = CheckOutcome::new("derivation");
    let mut equiv = CheckOutcome::new("equivariance");
    let mut assoc = CheckOutcome::new("associativity");
    for &y in &basis {
        let sig = op.signature(y).clone();
        let k = sig.arity();
        let oy = one_of(op, y);
        match op.gamma(&[oy.clone()], op.unit(sig.output)) {
            Ok(v) => unit.record(v == oy, || format!("γ({}; 1) = {}", op.name(y), op.fmt_comb(&v))),
            Err(e) => unit.fail(format!("γ({}; 1): {e}", op.name(y))),
        }
        let units: Vec<LinComb<OpElem>> = sig.inputs.iter().map(|s| op.unit(*s).clone()).collect();
        match op.gamma(&units, &oy) {
            Ok(v) => unit.record(v == oy, || format!("γ(1,…,1; {}) = {}", op.name(y), op.fmt_comb(&v))),
            Err(e) => unit.fail(format!("γ(1,…,1; {}): {e}", op.name(y))),
        }
        for xs in op.inner_tuples(&sig.inputs, cap) {
            let Ok(g) = op.gamma_basis(&xs, y) else { continue };
            // derivation
            let lhs = op.d_comb(&g);
            let mut rhs = LinComb::new();
            let mut pre = 0i64;
            for i in 0..k {
                let dx = op.d(xs[i]);
                let inner: Vec<LinComb<OpElem>> =
                    (0..k).map(|j| if j == i { dx.clone() } else { one_of(op, xs[j]) }).collect();
                let v = op.gamma(&inner, &oy).unwrap_or_default();
                rhs.add_scaled(&v, &field.sign(pre.rem_euclid(2) == 1));
                pre += op.degree(xs[i]);
            }
            let inner: Vec<LinComb<OpElem>> = xs.iter().map(|x| one_of(op, *x)).collect();
            rhs.add_scaled(&op.gamma(&inner, &op.d(y)).unwrap_or_default(), &field.sign(pre.rem_euclid(2) == 1));
            deriv.record(lhs == rhs, || format!("d γ({}; {})", tuple_name(&xs), op.name(y)));

            // outer equivariance: γ(R_t x; t*y) = ± B*γ(x; y)
            let arities: Vec<usize> = xs.iter().map(|x| op.arity(*x)).collect();
            let total: usize = arities.iter().sum();
            for a in 1..k {
                let mut sx = xs.clone();
                sx.swap(a - 1, a);
                let sy = op.swap_image(a, y);
                let inner: Vec<LinComb<OpElem>> = sx.iter().map(|x| one_of(op, *x)).collect();
                let lhs = op.gamma(&inner, &sy).unwrap_or_default();
                let block = block_swap(&arities, a);
                let mut rhs = LinComb::new();
                for (z, c) in g.iter() {
                    rhs.add_scaled(&op.act_perm(&block, *z).unwrap(), c);
                }
                let neg = (op.degree(xs[a - 1]) * op.degree(xs[a])).rem_euclid(2) == 1;
                let rhs = rhs.scaled(&field.sign(neg));
                equiv.record(lhs == rhs, || format!("outer t{a} on γ({}; {})", tuple_name(&xs), op.name(y)));
            }
            // inner equivariance: γ(…, t*x_i, …; y) = (t shifted into block i)* γ(x; y)
            let mut off = 0;
            for i in 0..k {
                for a in 1..arities[i] {
                    let inner: Vec<LinComb<OpElem>> = (0..k)
                        .map(|j| if j == i { op.swap_image(a, xs[j]) } else { one_of(op, xs[j]) })
                        .collect();
                    let lhs = op.gamma(&inner, &oy).unwrap_or_default();
                    let mut sigma: Vec<usize> = (1..=total).collect();
                    sigma.swap(off + a - 1, off + a);
                    let mut rhs = LinComb::new();
                    for (z, c) in g.iter() {
                        rhs.add_scaled(&op.act_perm(&sigma, *z).unwrap(), c);
                    }
                    equiv.record(lhs == rhs, || format!("inner t{a} at {} on γ({}; {})", i + 1, tuple_name(&xs), op.name(y)));
                }
                off += arities[i];
            }
            // associativity
            let mid_inputs: Vec<SortId> = xs.iter().flat_map(|x| op.signature(*x).inputs.clone()).collect();
            for zs in op.inner_tuples(&mid_inputs, cap) {
                let mut lhs_inner = Vec::new();
                let mut pos = 0;
                let mut neg = false;
                let mut later_z = vec![0i64; k];
                for i in 0..k {
                    let m = arities[i];
                    let block = &zs[pos..pos + m];
                    lhs_inner.push(op.gamma_basis(block, xs[i]).unwrap_or_default());
                    later_z[i] = block.iter().map(|z| op.degree(*z)).sum();
                    pos += m;
                }
                for i in 0..k {
                    for j in i + 1..k {
                        if (op.degree(xs[i]) * later_z[j]).rem_euclid(2) == 1 {
                            neg = !neg;
                        }
                    }
                }
                let Ok(lhs) = op.gamma(&lhs_inner, &oy) else { continue };
                let zs_comb: Vec<LinComb<OpElem>> = zs.iter().map(|z| one_of(op, *z)).collect();
                let Ok(rhs) = op.gamma(&zs_comb, &g) else { continue };
                let rhs = rhs.scaled(&field.sign(neg));
                assoc.record(lhs == rhs, || {
                    format!("γ(γ({}); {}) with outer ({})", tuple_name(&zs), op.name(y), tuple_name(&xs))
                });
            }
        }
    }
    VerifyReport { checks: vec![sym, unit, equiv, assoc, deriv] }
}

/// Permutation of `1..=Σ arities` exchanging blocks `a` and `a+1` (1-based), as `σ(i)` values:
/// position `i` of the result holds old input `σ(i)`.
fn block_swap(arities: &[usize], a: usize) -> Vec<usize> {
    let mut starts = vec![0];
    for m in arities {
        starts.push(starts.last().unwrap() + m);
    }
    let mut order: Vec<usize> = (0..arities.len()).collect();
    order.swap(a - 1, a);
    let mut sigma = Vec::new();
    for b in order {
        for i in starts[b]..starts[b + 1] {
            sigma.push(i + 1);
        }
    }
    sigma
}

// ---------------------------------------------------------------------------------------------
// Builtins

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Builtin {
    UnitOperad,
    Ass,
    UAss,
    Com,
    AlgebraAsOperad(String),
    ModuleOperad,
}

impl Builtin {
    pub fn parse(name: &str) -> Result<Builtin, OperadError> {
        let name = name.trim();
        Ok(match name {
            "unit-operad" => Builtin::UnitOperad,
            "Ass" => Builtin::Ass,
            "uAss" => Builtin::UAss,
            "Com" => Builtin::Com,
            "module-operad" => Builtin::ModuleOperad,
            _ => {
                if let Some(inner) = name.strip_prefix("algebra-as-operad(").and_then(|r| r.strip_suffix(')')) {
                    Builtin::AlgebraAsOperad(inner.trim().to_string())
                } else {
                    return Err(OperadError::UnknownBuiltin(name.to_string()));
                }
            }
        })
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::UnitOperad => write!(f, "unit-operad"),
            Builtin::Ass => write!(f, "Ass"),
            Builtin::UAss => write!(f, "uAss"),
            Builtin::Com => write!(f, "Com"),
            Builtin::AlgebraAsOperad(a) => write!(f, "algebra-as-operad({a})"),
            Builtin::ModuleOperad => write!(f, "module-operad"),
        }
    }
}

pub fn builtin(which: &Builtin, field: FieldSpec, cap: usize) -> Result<Operad, OperadError> {
    let mut op = match which {
        Builtin::UnitOperad => unit_operad(field, cap),
        Builtin::Ass => linear_orders(field, cap, vec!["*".into()], 1, |_, _, _| true),
        Builtin::UAss => linear_orders(field, cap, vec!["*".into()], 0, |_, _, _| true),
        Builtin::Com => commutative(field, cap),
        Builtin::AlgebraAsOperad(name) => {
            let r = UnitalAlgebra::builtin(name, field).map_err(|_| OperadError::UnknownBuiltin(which.to_string()))?;
            algebra_as_operad(&r, cap)
        }
        Builtin::ModuleOperad => linear_orders(field, cap, vec!["a".into(), "m".into()], 0, module_admissible),
    }?;
    op.builtin = Some(which.to_string());
    Ok(op)
}

/// Two sorts `a` (0) and `m` (1): output `a` needs all inputs `a`; output `m` needs exactly one
/// `m` input, read first (right module action).
fn module_admissible(inputs: &[SortId], output: SortId, order: &[usize]) -> bool {
    if output == 0 {
        inputs.iter().all(|&s| s == 0)
    } else {
        let ms: Vec<usize> = (0..inputs.len()).filter(|&i| inputs[i] == 1).collect();
        ms.len() == 1 && order.first() == Some(&(ms[0] + 1))
    }
}

fn unit_operad(field: FieldSpec, cap: usize) -> Result<Operad, OperadError> {
    let mut b = OperadBuilder::new(field, vec!["*".into()], cap.max(1));
    b.component(Signature::new(vec![0], 0), vec![("1".into(), 0)])
        .unit(0, vec![("1".into(), field.one())])
        .gamma("1", vec!["1".into()], vec![("1".into(), field.one())])
        .certificate(Certificate::FreeModule)
        .builtin_name("unit-operad");
    b.build()
}

fn commutative(field: FieldSpec, cap: usize) -> Result<Operad, OperadError> {
    if !field.is_char_zero() {
        return Err(OperadError::Certificate("Com is Σ-cofibrant only in characteristic 0".into()));
    }
    let mut b = OperadBuilder::new(field, vec!["*".into()], cap);
    for k in 1..=cap {
        let name = format!("c{k}");
        b.component(Signature::new(vec![0; k], 0), vec![(name.clone(), 0)]);
        for a in 1..k {
            b.swap(a, &name, vec![(name.clone(), field.one())]);
        }
    }
    b.unit(0, vec![("c1".into(), field.one())]);
    b.gamma_rule(Arc::new(|op: &Operad, inner: &[OpElem], _outer: OpElem| {
        let total: usize = inner.iter().map(|x| op.arity(*x)).sum();
        match op.lookup(&format!("c{total}")) {
            Some(x) => LinComb::single(x, op.field().one()),
            None => LinComb::new(),
        }
    }));
    b.certificate(Certificate::Char0);
    b.build()
}

/// The linear order encoded in a linear-orders operation name (`p2413`, `p21:ma>m`).
pub fn linear_order(name: &str) -> Option<Vec<usize>> {
    let body = name.split(':').next()?.strip_prefix('p')?;
    body.chars().map(|c| c.to_digit(10).map(|d| d as usize)).collect()
}

fn order_name(order: &[usize]) -> String {
    format!("p{}", order.iter().map(|i| i.to_string()).collect::<String>())
}

/// Operads whose basis operations are linear orders of the inputs, `θ(x; π) = ±x_{π(1)}⋯x_{π(k)}`,
/// restricted by an admissibility predicate on `(input sorts, output sort, π)`.
fn linear_orders(
    field: FieldSpec,
    cap: usize,
    sort_names: Vec<String>,
    min_arity: usize,
    admissible: fn(&[SortId], SortId, &[usize]) -> bool,
) -> Result<Operad, OperadError> {
    let ns = sort_names.len();
    let multi = ns > 1;
    let label = |inputs: &[SortId], output: SortId| -> String {
        if multi {
            let ins: String = inputs.iter().map(|&s| sort_names[s as usize].clone()).collect();
            format!(":{ins}>{}", sort_names[output as usize])
        } else {
            String::new()
        }
    };
    let mut b = OperadBuilder::new(field, sort_names.clone(), cap);
    let mut orders: HashMap<Signature, Vec<Vec<usize>>> = HashMap::new();
    for k in min_arity..=cap {
        let perms: Vec<Vec<usize>> = permutations(k).into_iter().map(|p| p.iter().map(|v| v + 1).collect()).collect();
        for inputs in sort_tuples(ns, k) {
            for t in 0..ns as SortId {
                let ok: Vec<Vec<usize>> = perms.iter().filter(|p| admissible(&inputs, t, p)).cloned().collect();
                if ok.is_empty() {
                    continue;
                }
                let suffix = label(&inputs, t);
                b.component(
                    Signature::new(inputs.clone(), t),
                    ok.iter().map(|p| (format!("{}{suffix}", order_name(p)), 0)).collect(),
                );
                orders.insert(Signature::new(inputs.clone(), t), ok);
            }
        }
    }
    for (sig, ords) in &orders {
        let suffix = label(&sig.inputs, sig.output);
        let ssuffix = |a: usize| {
            let s = sig.swapped(a);
            label(&s.inputs, s.output)
        };
        for p in ords {
            for a in 1..sig.arity() {
                let q: Vec<usize> = p.iter().map(|&v| if v == a { a + 1 } else if v == a + 1 { a } else { v }).collect();
                b.swap(a, &format!("{}{suffix}", order_name(p)), vec![(format!("{}{}", order_name(&q), ssuffix(a)), field.one())]);
            }
        }
    }
    for s in 0..ns as SortId {
        if orders.contains_key(&Signature::new(vec![s], s)) {
            b.unit(s, vec![(format!("p1{}", label(&[s], s)), field.one())]);
        }
    }
    b.gamma_rule(Arc::new(move |op: &Operad, inner: &[OpElem], outer: OpElem| {
        let parse = |x: OpElem| linear_order(op.name(x)).expect("linear-order name");
        let pi = parse(outer);
        let mut offsets = vec![0];
        for x in inner {
            offsets.push(offsets.last().unwrap() + op.arity(*x));
        }
        let mut seq = Vec::new();
        for &q in &pi {
            for v in parse(inner[q - 1]) {
                seq.push(offsets[q - 1] + v);
            }
        }
        let inputs: Vec<SortId> = inner.iter().flat_map(|x| op.signature(*x).inputs.clone()).collect();
        let output = op.signature(outer).output;
        let name = format!("{}{}", order_name(&seq), if op.num_sorts() > 1 {
            let ins: String = inputs.iter().map(|&s| op.sort_names()[s as usize].clone()).collect();
            format!(":{ins}>{}", op.sort_names()[output as usize])
        } else {
            String::new()
        });
        match op.lookup(&name) {
            Some(x) => LinComb::single(x, op.field().one()),
            None => LinComb::new(),
        }
    }));
    b.certificate(Certificate::FreeModule);
    b.build()
}

fn sort_tuples(ns: usize, k: usize) -> Vec<Vec<SortId>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in &out {
            for s in 0..ns as SortId {
                let mut u = t.clone();
                u.push(s);
                next.push(u);
            }
        }
        out = next;
    }
    out
}

/// `𝒞(1) = R` with `γ(x; y) = x·y`; its algebras are right `R`-modules.
pub fn algebra_as_operad(r: &UnitalAlgebra, cap: usize) -> Result<Operad, OperadError> {
    let field = r.field();
    let mut b = OperadBuilder::new(field, vec!["*".into()], cap.max(1));
    b.component(Signature::new(vec![0], 0), r.names().iter().cloned().zip(r.degrees().iter().copied()).collect());
    for i in 0..r.dim() {
        let img: Vec<(String, Scalar)> = r.d(i).iter().map(|(j, c)| (r.names()[*j as usize].clone(), c.clone())).collect();
        if !img.is_empty() {
            b.differential(&r.names()[i], img);
        }
        for j in 0..r.dim() {
            let prod: Vec<(String, Scalar)> =
                r.mul(i as u32, j as u32).iter().map(|(k, c)| (r.names()[*k as usize].clone(), c.clone())).collect();
            b.gamma(&r.names()[j], vec![r.names()[i].clone()], prod);
        }
    }
    b.unit(0, vec![(r.names()[r.unit_index() as usize].clone(), field.one())]);
    b.certificate(Certificate::FreeModule);
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ass(field: FieldSpec, cap: usize) -> Operad {
        builtin(&Builtin::Ass, field, cap).unwrap()
    }

    #[test]
    fn ass_dimensions() {
        let f2 = FieldSpec::prime(2).unwrap();
        let op = ass(f2, 4);
        for k in 1..=4usize {
            let sig = op.sig_id(&Signature::new(vec![0; k], 0)).unwrap();
            assert_eq!(op.basis(sig).count(), (1..=k).product::<usize>());
        }
        assert!(op.sig_id(&Signature::new(vec![], 0)).is_none());
        let u = builtin(&Builtin::UAss, f2, 4).unwrap();
        assert_eq!(u.basis_of(&[], 0).len(), 1);
    }

    #[test]
    fn ass_block_composition() {
        let q = FieldSpec::Rationals;
        let op = ass(q, 4);
        let id2 = op.lookup("p12").unwrap();
        let g = op.gamma_basis(&[id2, id2], id2).unwrap();
        assert_eq!(g, LinComb::single(op.lookup("p1234").unwrap(), q.one()));
        let g = op.gamma_j_basis(2, id2, id2).unwrap();
        assert_eq!(g, LinComb::single(op.lookup("p123").unwrap(), q.one()));
        let p21 = op.lookup("p21").unwrap();
        let g = op.gamma_basis(&[id2, p21], p21).unwrap();
        assert_eq!(g, LinComb::single(op.lookup("p4312").unwrap(), q.one()));
    }

    #[test]
    fn perm_action_composes() {
        let q = FieldSpec::Rationals;
        let op = ass(q, 4);
        let x = op.lookup("p2413").unwrap();
        for s in permutations(4) {
            for t in permutations(4) {
                let s1: Vec<usize> = s.iter().map(|v| v + 1).collect();
                let t1: Vec<usize> = t.iter().map(|v| v + 1).collect();
                let st: Vec<usize> = t1.iter().map(|&i| s1[i - 1]).collect();
                let lhs = op.act_perm(&st, x).unwrap();
                let rhs = op.act_perm(&s1, x).unwrap().apply(|y| op.act_perm(&t1, *y).unwrap());
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn builtins_verify() {
        for field in [FieldSpec::Rationals, FieldSpec::prime(2).unwrap(), FieldSpec::prime(3).unwrap()] {
            for b in [Builtin::UnitOperad, Builtin::Ass, Builtin::UAss, Builtin::ModuleOperad] {
                let op = builtin(&b, field, 4).unwrap();
                let vcap = if b == Builtin::Ass { 4 } else { 3 };
                let r = verify_operad(&op, vcap);
                assert!(r.passed(), "{b} over {field}: {:?}", r);
            }
        }
        let com = builtin(&Builtin::Com, FieldSpec::Rationals, 4).unwrap();
        assert!(verify_operad(&com, 4).passed());
        assert!(builtin(&Builtin::Com, FieldSpec::prime(3).unwrap(), 4).is_err());
    }

    #[test]
    fn corrupted_constant_is_named() {
        let q = FieldSpec::Rationals;
        let mut op = ass(q, 3);
        let id2 = op.lookup("p12").unwrap();
        let id1 = op.lookup("p1").unwrap();
        let wrong = LinComb::single(op.lookup("p21").unwrap(), q.one());
        op.set_gamma_entry(vec![id1, id1], id2, wrong);
        let r = verify_operad(&op, 3);
        assert!(!r.passed());
        let unit = r.check("unit-laws").unwrap();
        assert!(unit.failures.iter().any(|f| f.contains("γ(1,…,1; p12)")));
    }
}
