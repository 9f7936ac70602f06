//! DG algebras over an operad, presented by basis, and the arity parts of the free algebra.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::Hash;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use crate::chain::{ChainComplex, ChainError, GradedBasis};
use crate::coeff::{FieldSpec, Scalar};
use crate::linalg::{Echelon, LinComb, SparseMatrix, SparseVec};
use crate::operad::{koszul_negative, linear_order, Builtin, CheckOutcome, OpElem, Operad, OperadError, VerifyReport};
use crate::tree::SortId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("unknown element `{0}`")]
    UnknownName(String),
    #[error("duplicate element `{0}`")]
    DuplicateName(String),
    #[error("unknown builtin algebra `{0}`")]
    UnknownBuiltin(String),
    #[error("arity mismatch: {0}")]
    ArityMismatch(String),
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("arity {arity} exceeds cap {cap}")]
    CapExceeded { arity: usize, cap: usize },
    #[error("invalid presentation: {0}")]
    Invalid(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// A unital associative DG algebra given by a multiplication table (optionally with a second
/// sort carrying a right module).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnitalAlgebra {
    field: FieldSpec,
    names: Vec<String>,
    degrees: Vec<i64>,
    sorts: Vec<SortId>,
    d: Vec<LinComb<u32>>,
    mult: HashMap<(u32, u32), LinComb<u32>>,
    unit: u32,
}

impl UnitalAlgebra {
    /// Elements are `(name, degree, sort)`; products not listed are zero except those with the unit.
    pub fn new(
        field: FieldSpec,
        elements: Vec<(String, i64, SortId)>,
        unit: &str,
        d: &[(&str, Vec<(&str, Scalar)>)],
        products: &[(&str, &str, Vec<(&str, Scalar)>)],
    ) -> Result<Self, AlgebraError> {
        let idx = |n: &str| {
            elements.iter().position(|(m, _, _)| m == n).map(|i| i as u32).ok_or_else(|| AlgebraError::UnknownName(n.into()))
        };
        let comb = |t: &[(&str, Scalar)]| -> Result<LinComb<u32>, AlgebraError> {
            let mut v = LinComb::new();
            for (n, c) in t {
                v.add_term(idx(n)?, c.clone());
            }
            Ok(v)
        };
        let u = idx(unit)?;
        let mut dv = vec![LinComb::new(); elements.len()];
        for (n, t) in d {
            dv[idx(n)? as usize] = comb(t)?;
        }
        let mut mult = HashMap::new();
        for i in 0..elements.len() as u32 {
            mult.insert((u, i), LinComb::single(i, field.one()));
            mult.insert((i, u), LinComb::single(i, field.one()));
        }
        for (a, b, t) in products {
            mult.insert((idx(a)?, idx(b)?), comb(t)?);
        }
        Ok(UnitalAlgebra {
            field,
            names: elements.iter().map(|e| e.0.clone()).collect(),
            degrees: elements.iter().map(|e| e.1).collect(),
            sorts: elements.iter().map(|e| e.2).collect(),
            d: dv,
            mult,
            unit: u,
        })
    }

    /// `K`, `dual-numbers` (`K[x]/(x²)`), `exterior` (`Λ[y]`, `|y| = 1`), `dg-cone`
    /// (`1, y, z` with `|y| = 1`, `dy = z`, all products of non-units zero), and
    /// `dual-numbers-module` (the pair `K[x]/(x²)`, `K` with `x` acting by 0).
    pub fn builtin(name: &str, field: FieldSpec) -> Result<Self, AlgebraError> {
        let one = field.one();
        match name {
            "K" => UnitalAlgebra::new(field, vec![("1".into(), 0, 0)], "1", &[], &[]),
            "dual-numbers" => UnitalAlgebra::new(field, vec![("1".into(), 0, 0), ("x".into(), 0, 0)], "1", &[], &[]),
            "exterior" => UnitalAlgebra::new(field, vec![("1".into(), 0, 0), ("y".into(), 1, 0)], "1", &[], &[]),
            "dg-cone" => UnitalAlgebra::new(
                field,
                vec![("1".into(), 0, 0), ("y".into(), 1, 0), ("z".into(), 0, 0)],
                "1",
                &[("y", vec![("z", one)])],
                &[],
            ),
            "dual-numbers-module" => {
                let mut a = UnitalAlgebra::new(
                    field,
                    vec![("1".into(), 0, 0), ("x".into(), 0, 0), ("m".into(), 0, 1)],
                    "1",
                    &[],
                    &[],
                )?;
                a.mult.remove(&(2, 0));
                a.mult.remove(&(0, 2));
                a.mult.insert((2, 0), LinComb::single(2, one));
                Ok(a)
            }
            _ => Err(AlgebraError::UnknownBuiltin(name.into())),
        }
    }

    pub fn field(&self) -> FieldSpec {
        self.field
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

    pub fn d(&self, i: usize) -> &LinComb<u32> {
        &self.d[i]
    }

    pub fn mul(&self, i: u32, j: u32) -> LinComb<u32> {
        self.mult.get(&(i, j)).cloned().unwrap_or_default()
    }

    pub fn unit_index(&self) -> u32 {
        self.unit
    }

    fn product(&self, xs: &[u32]) -> LinComb<u32> {
        let Some((&first, rest)) = xs.split_first() else {
            return LinComb::single(self.unit, self.field.one());
        };
        let mut acc = LinComb::single(first, self.field.one());
        for &x in rest {
            acc = acc.apply(|a| self.mul(*a, x));
        }
        acc
    }
}

/// The interface the bar construction needs from an algebra: possibly infinite, graded by a
/// weight so that windows of bounded weight are finite.
pub trait Carrier: Send + Sync {
    type Elem: Clone + Ord + Hash + fmt::Debug + Send + Sync;

    fn operad(&self) -> &Operad;

    fn field(&self) -> FieldSpec {
        self.operad().field()
    }

    fn degree(&self, x: &Self::Elem) -> i64;

    fn sort(&self, x: &Self::Elem) -> SortId;

    fn weight(&self, x: &Self::Elem) -> usize;

    fn diff(&self, x: &Self::Elem) -> Result<LinComb<Self::Elem>, OperadError>;

    /// `θ(x_1,…,x_k; c)`; callers guarantee matching arity and sorts.
    fn act(&self, xs: &[Self::Elem], c: OpElem) -> Result<LinComb<Self::Elem>, OperadError>;

    /// All basis elements of weight at most `w`, sorted.
    fn basis_upto(&self, w: usize) -> Result<Vec<Self::Elem>, OperadError>;

    fn elem_name(&self, x: &Self::Elem) -> String;
}

type ThetaKey = (Vec<u32>, OpElem);
pub type ThetaRule = Arc<dyn Fn(&Algebra, &[u32], OpElem) -> LinComb<u32> + Send + Sync>;

#[derive(Clone)]
enum ThetaSource {
    Table(HashMap<ThetaKey, LinComb<u32>>),
    Rule(ThetaRule),
}

/// A finite-dimensional algebra over an operad.
pub struct Algebra {
    op: Arc<Operad>,
    names: Vec<String>,
    degrees: Vec<i64>,
    sorts: Vec<SortId>,
    d: Vec<LinComb<u32>>,
    theta: ThetaSource,
    builtin: Option<String>,
    cache: RwLock<HashMap<ThetaKey, LinComb<u32>>>,
}

impl fmt::Debug for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Algebra").field("names", &self.names).field("builtin", &self.builtin).finish()
    }
}

impl Algebra {
    /// Elements `(name, degree, sort)`, differential and θ table given by names.
    pub fn from_table(
        op: Arc<Operad>,
        elements: Vec<(String, i64, SortId)>,
        d: &[(String, Vec<(String, Scalar)>)],
        theta: &[(Vec<String>, String, Vec<(String, Scalar)>)],
    ) -> Result<Algebra, AlgebraError> {
        let mut index = HashMap::new();
        for (i, (n, _, s)) in elements.iter().enumerate() {
            if index.insert(n.clone(), i as u32).is_some() {
                return Err(AlgebraError::DuplicateName(n.clone()));
            }
            if *s as usize >= op.num_sorts() {
                return Err(AlgebraError::SortMismatch(format!("`{n}` has an unknown sort")));
            }
        }
        let idx = |n: &str| index.get(n).copied().ok_or_else(|| AlgebraError::UnknownName(n.into()));
        let comb = |t: &[(String, Scalar)]| -> Result<LinComb<u32>, AlgebraError> {
            let mut v = LinComb::new();
            for (n, c) in t {
                v.add_term(idx(n)?, c.clone());
            }
            Ok(v)
        };
        let mut dv = vec![LinComb::new(); elements.len()];
        for (n, t) in d {
            dv[idx(n)? as usize] = comb(t)?;
        }
        let mut table = HashMap::new();
        for (xs, c, t) in theta {
            let xs: Vec<u32> = xs.iter().map(|n| idx(n)).collect::<Result<_, _>>()?;
            let c = op.lookup(c).ok_or_else(|| AlgebraError::UnknownName(c.clone()))?;
            table.insert((xs, c), comb(t)?);
        }
        let a = Algebra {
            op,
            names: elements.iter().map(|e| e.0.clone()).collect(),
            degrees: elements.iter().map(|e| e.1).collect(),
            sorts: elements.iter().map(|e| e.2).collect(),
            d: dv,
            theta: ThetaSource::Table(table),
            builtin: None,
            cache: RwLock::new(HashMap::new()),
        };
        a.check_presentation()?;
        Ok(a)
    }

    fn check_presentation(&self) -> Result<(), AlgebraError> {
        for (i, dx) in self.d.iter().enumerate() {
            for (j, _) in dx.iter() {
                if self.degrees[*j as usize] != self.degrees[i] - 1 || self.sorts[*j as usize] != self.sorts[i] {
                    return Err(AlgebraError::Invalid(format!("d({}) has a component of the wrong degree or sort", self.names[i])));
                }
            }
            let ddx = dx.apply(|j| self.d[*j as usize].clone());
            if !ddx.is_zero() {
                return Err(AlgebraError::Invalid(format!("d∘d ≠ 0 on `{}`", self.names[i])));
            }
        }
        Ok(())
    }

    /// The builtin algebra `name` over the operad (which must be a builtin the algebra fits).
    pub fn builtin(op: Arc<Operad>, name: &str) -> Result<Algebra, AlgebraError> {
        let field = op.field();
        let which = op.builtin_name().and_then(|b| Builtin::parse(b).ok());
        let table = match (&which, name) {
            (Some(Builtin::UnitOperad), _) => UnitalAlgebra::builtin(name, field)?,
            (Some(Builtin::ModuleOperad), "dual-numbers-module") => UnitalAlgebra::builtin(name, field)?,
            (Some(Builtin::Ass | Builtin::UAss | Builtin::Com), n) if n != "dual-numbers-module" => {
                UnitalAlgebra::builtin(name, field)?
            }
            (Some(Builtin::AlgebraAsOperad(r)), "regular") => UnitalAlgebra::builtin(r, field)?,
            _ => {
                return Err(AlgebraError::UnknownBuiltin(format!(
                    "{name} over {}",
                    op.builtin_name().unwrap_or("a presented operad")
                )))
            }
        };
        let kind = which.clone().unwrap();
        let t = Arc::new(table.clone());
        let rule: ThetaRule = match kind {
            Builtin::UnitOperad => Arc::new(|_a: &Algebra, xs: &[u32], _c: OpElem| LinComb::single(xs[0], _a.field().one())),
            Builtin::Com => {
                let t = t.clone();
                Arc::new(move |_a: &Algebra, xs: &[u32], _c: OpElem| t.product(xs))
            }
            Builtin::AlgebraAsOperad(_) => {
                let t = t.clone();
                Arc::new(move |_a: &Algebra, xs: &[u32], c: OpElem| t.mul(xs[0], c.idx))
            }
            _ => {
                let t = t.clone();
                Arc::new(move |a: &Algebra, xs: &[u32], c: OpElem| {
                    let pi = linear_order(a.op.name(c)).expect("linear-order operation");
                    let odd: Vec<bool> = xs.iter().map(|x| t.degrees[*x as usize].rem_euclid(2) == 1).collect();
                    let ordered: Vec<u32> = pi.iter().map(|&p| xs[p - 1]).collect();
                    t.product(&ordered).scaled(&a.field().sign(koszul_negative(&odd, &pi)))
                })
            }
        };
        if matches!(kind, Builtin::UnitOperad) && table.dim() != 1 {
            return Err(AlgebraError::UnknownBuiltin(format!("{name} over unit-operad")));
        }
        let a = Algebra {
            op,
            names: table.names.clone(),
            degrees: table.degrees.clone(),
            sorts: table.sorts.clone(),
            d: table.d.clone(),
            theta: ThetaSource::Rule(rule),
            builtin: Some(name.to_string()),
            cache: RwLock::new(HashMap::new()),
        };
        a.check_presentation()?;
        Ok(a)
    }

    pub fn operad_arc(&self) -> &Arc<Operad> {
        &self.op
    }

    pub fn builtin_name(&self) -> Option<&str> {
        self.builtin.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, i: u32) -> &str {
        &self.names[i as usize]
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

    pub fn lookup(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn d_of(&self, i: u32) -> &LinComb<u32> {
        &self.d[i as usize]
    }

    fn theta_basis(&self, xs: &[u32], c: OpElem) -> LinComb<u32> {
        let key = (xs.to_vec(), c);
        if let Some(v) = self.cache.read().unwrap().get(&key) {
            return v.clone();
        }
        let v = match &self.theta {
            ThetaSource::Table(t) => t.get(&key).cloned().unwrap_or_default(),
            ThetaSource::Rule(r) => r(self, xs, c),
        };
        self.cache.write().unwrap().insert(key, v.clone());
        v
    }

    fn check_args(&self, xs: &[u32], c: OpElem) -> Result<(), AlgebraError> {
        let sig = self.op.signature(c);
        if xs.len() != sig.arity() {
            return Err(AlgebraError::ArityMismatch(format!("{} inputs for `{}`", xs.len(), self.op.name(c))));
        }
        for (i, x) in xs.iter().enumerate() {
            if self.sorts[*x as usize] != sig.inputs[i] {
                return Err(AlgebraError::SortMismatch(format!("input {} `{}` of `{}`", i + 1, self.name(*x), self.op.name(c))));
            }
        }
        Ok(())
    }

    /// Multilinear `θ(x_1,…,x_k; c)`.
    pub fn theta_eval(&self, xs: &[LinComb<u32>], c: &LinComb<OpElem>) -> Result<LinComb<u32>, AlgebraError> {
        let mut out = LinComb::new();
        for (cb, cc) in c.iter() {
            let mut partial: Vec<(Vec<u32>, Scalar)> = vec![(Vec::new(), cc.clone())];
            for x in xs {
                let mut next = Vec::new();
                for (t, k) in &partial {
                    for (b, kb) in x.iter() {
                        let mut t = t.clone();
                        t.push(*b);
                        next.push((t, k * kb));
                    }
                }
                partial = next;
            }
            for (t, k) in partial {
                self.check_args(&t, *cb)?;
                out.add_scaled(&self.theta_basis(&t, *cb), &k);
            }
        }
        Ok(out)
    }

    /// Replaces a rule-based θ by its table on all basis tuples.
    pub fn materialize_theta(&mut self) {
        if let ThetaSource::Table(_) = self.theta {
            return;
        }
        let mut table = HashMap::new();
        for c in self.op.all_basis() {
            for xs in self.input_tuples(&self.op.signature(c).inputs) {
                let v = self.theta_basis(&xs, c);
                if !v.is_zero() {
                    table.insert((xs, c), v);
                }
            }
        }
        self.theta = ThetaSource::Table(table);
        self.builtin = None;
    }

    pub fn set_theta_entry(&mut self, xs: Vec<u32>, c: OpElem, value: LinComb<u32>) {
        self.materialize_theta();
        if let ThetaSource::Table(t) = &mut self.theta {
            t.insert((xs, c), value);
        }
        self.cache.write().unwrap().clear();
    }

    pub fn theta_table(&self) -> Option<BTreeMap<ThetaKey, LinComb<u32>>> {
        match &self.theta {
            ThetaSource::Table(t) => Some(t.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
            ThetaSource::Rule(_) => None,
        }
    }

    /// All basis tuples with the given sorts.
    pub fn input_tuples(&self, sorts: &[SortId]) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new()];
        for s in sorts {
            let cands: Vec<u32> = (0..self.dim() as u32).filter(|i| self.sorts[*i as usize] == *s).collect();
            let mut next = Vec::new();
            for t in &out {
                for &c in &cands {
                    let mut u = t.clone();
                    u.push(c);
                    next.push(u);
                }
            }
            out = next;
        }
        out
    }

    pub fn fmt_comb(&self, v: &LinComb<u32>) -> String {
        if v.is_zero() {
            return "0".into();
        }
        v.iter().map(|(x, c)| format!("{c}*{}", self.name(*x))).collect::<Vec<_>>().join(" + ")
    }

    /// The carrier as a chain complex.
    pub fn complex(&self) -> ChainComplex {
        let basis = GradedBasis::new(self.names.iter().cloned().zip(self.degrees.iter().copied()).collect()).unwrap();
        let cols = self.d.iter().map(|v| v.iter().map(|(i, c)| (*i as usize, c.clone())).collect()).collect();
        ChainComplex::new(self.field(), basis, SparseMatrix::from_columns(self.dim(), cols)).expect("checked presentation")
    }
}

impl Carrier for Algebra {
    type Elem = u32;

    fn operad(&self) -> &Operad {
        &self.op
    }

    fn degree(&self, x: &u32) -> i64 {
        self.degrees[*x as usize]
    }

    fn sort(&self, x: &u32) -> SortId {
        self.sorts[*x as usize]
    }

    fn weight(&self, _x: &u32) -> usize {
        0
    }

    fn diff(&self, x: &u32) -> Result<LinComb<u32>, OperadError> {
        Ok(self.d[*x as usize].clone())
    }

    fn act(&self, xs: &[u32], c: OpElem) -> Result<LinComb<u32>, OperadError> {
        Ok(self.theta_basis(xs, c))
    }

    fn basis_upto(&self, _w: usize) -> Result<Vec<u32>, OperadError> {
        Ok((0..self.dim() as u32).collect())
    }

    fn elem_name(&self, x: &u32) -> String {
        self.names[*x as usize].clone()
    }
}

fn one_of<T: Ord + Clone>(field: FieldSpec, x: T) -> LinComb<T> {
    LinComb::single(x, field.one())
}

/// Checks unit, equivariance, associativity and the chain-map property of θ on basis tuples
/// whose operations have arity at most `verify_cap`.
pub fn verify_algebra(a: &Algebra, verify_cap: usize) -> VerifyReport {
    let op = a.op.as_ref();
    let field = op.field();
    let cap = verify_cap.min(op.cap());
    let tname = |xs: &[u32]| xs.iter().map(|x| a.name(*x)).collect::<Vec<_>>().join(",");
    let mut unit = CheckOutcome::new("unit-law");
    let mut equiv = CheckOutcome::new("equivariance");
    let mut assoc = CheckOutcome::new("associativity");
    let mut chain = CheckOutcome::new("chain-map");
    for x in 0..a.dim() as u32 {
        let v = a.theta_eval(&[one_of(field, x)], op.unit(a.sorts[x as usize])).unwrap_or_default();
        unit.record(v == one_of(field, x), || format!("θ({}; 1) = {}", a.name(x), a.fmt_comb(&v)));
    }
    let ops: Vec<OpElem> = op.all_basis().into_iter().filter(|c| op.arity(*c) <= cap).collect();
    for &c in &ops {
        let sig = op.signature(c).clone();
        let k = sig.arity();
        for xs in a.input_tuples(&sig.inputs) {
            let base = a.theta_basis(&xs, c);
            for s in 1..k {
                let mut sx = xs.clone();
                sx.swap(s - 1, s);
                let neg = (a.degrees[xs[s - 1] as usize] * a.degrees[xs[s] as usize]).rem_euclid(2) == 1;
                let sx_c: Vec<LinComb<u32>> = sx.iter().map(|x| one_of(field, *x)).collect();
                let lhs = a.theta_eval(&sx_c, &op.swap_image(s, c)).unwrap_or_default().scaled(&field.sign(neg));
                equiv.record(lhs == base, || format!("t{s} on θ({}; {})", tname(&xs), op.name(c)));
            }
            let mut rhs = LinComb::new();
            let mut pre = 0i64;
            for i in 0..k {
                let inner: Vec<LinComb<u32>> =
                    (0..k).map(|j| if j == i { a.d[xs[j] as usize].clone() } else { one_of(field, xs[j]) }).collect();
                rhs.add_scaled(&a.theta_eval(&inner, &one_of(field, c)).unwrap_or_default(), &field.sign(pre.rem_euclid(2) == 1));
                pre += a.degrees[xs[i] as usize];
            }
            let xs_c: Vec<LinComb<u32>> = xs.iter().map(|x| one_of(field, *x)).collect();
            rhs.add_scaled(&a.theta_eval(&xs_c, &op.d(c)).unwrap_or_default(), &field.sign(pre.rem_euclid(2) == 1));
            let lhs = base.apply(|y| a.d[*y as usize].clone());
            chain.record(lhs == rhs, || format!("d θ({}; {})", tname(&xs), op.name(c)));
        }
        // associativity: θ(θ(X_1;c_1),…,θ(X_k;c_k); c) = ± θ(X; γ(c_1,…,c_k; c))
        for inner in op.inner_tuples(&sig.inputs, cap) {
            let inputs: Vec<SortId> = inner.iter().flat_map(|ci| op.signature(*ci).inputs.clone()).collect();
            let Ok(g) = op.gamma_basis(&inner, c) else { continue };
            for xs in a.input_tuples(&inputs) {
                let mut pos = 0;
                let mut parts = Vec::new();
                let mut block_deg = Vec::new();
                for ci in &inner {
                    let m = op.arity(*ci);
                    let block = &xs[pos..pos + m];
                    parts.push(a.theta_basis(block, *ci));
                    block_deg.push(block.iter().map(|x| a.degrees[*x as usize]).sum::<i64>());
                    pos += m;
                }
                let mut neg = false;
                for p in 0..inner.len() {
                    for q in p + 1..inner.len() {
                        if (op.degree(inner[p]) * block_deg[q]).rem_euclid(2) == 1 {
                            neg = !neg;
                        }
                    }
                }
                let lhs = a.theta_eval(&parts, &one_of(field, c)).unwrap_or_default();
                let xs_c: Vec<LinComb<u32>> = xs.iter().map(|x| one_of(field, *x)).collect();
                let rhs = a.theta_eval(&xs_c, &g).unwrap_or_default().scaled(&field.sign(neg));
                assoc.record(lhs == rhs, || {
                    let inn: Vec<&str> = inner.iter().map(|ci| op.name(*ci)).collect();
                    format!("θ(θ({}; {}); {})", tname(&xs), inn.join(","), op.name(c))
                });
            }
        }
    }
    VerifyReport { checks: vec![unit, equiv, assoc, chain] }
}

/// A finite complex with a sort per basis element, the generators of a free algebra.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortedComplex {
    pub complex: ChainComplex,
    pub sorts: Vec<SortId>,
}

impl SortedComplex {
    pub fn single_sorted(complex: ChainComplex) -> Self {
        let n = complex.dim();
        SortedComplex { complex, sorts: vec![0; n] }
    }
}

/// The arity-`n` part `X^{⊗n} ⊗_{Σ_n} 𝒞(n)` of the free algebra (with output sort `output`),
/// computed as a cokernel by exact elimination.
#[derive(Clone, Debug)]
pub struct FreeArity {
    pub arity: usize,
    pub output: SortId,
    /// Basis of `X^{⊗n} ⊗ 𝒞(n)` before the quotient.
    pub raw: Vec<(Vec<usize>, OpElem)>,
    /// Indices into `raw` of the surviving basis vectors.
    pub survivors: Vec<usize>,
    pub complex: ChainComplex,
    /// Projection of every raw basis vector onto the quotient basis.
    pub projection: Vec<SparseVec>,
}

pub fn free_arity(x: &SortedComplex, op: &Operad, n: usize, output: SortId) -> Result<FreeArity, AlgebraError> {
    if n > op.cap() {
        return Err(AlgebraError::CapExceeded { arity: n, cap: op.cap() });
    }
    let field = op.field();
    let basis = x.complex.basis();
    let deg = |i: usize| basis.degree(i);
    let mut raw = Vec::new();
    for c in op.all_basis() {
        let sig = op.signature(c);
        if sig.arity() != n || sig.output != output {
            continue;
        }
        let mut tuples = vec![Vec::new()];
        for s in &sig.inputs {
            let cands: Vec<usize> = (0..basis.len()).filter(|i| x.sorts[*i] == *s).collect();
            tuples = tuples
                .into_iter()
                .flat_map(|t: Vec<usize>| {
                    cands.iter().map(move |&c| {
                        let mut u = t.clone();
                        u.push(c);
                        u
                    })
                })
                .collect();
        }
        for t in tuples {
            raw.push((t, c));
        }
    }
    raw.sort();
    let index: HashMap<(Vec<usize>, OpElem), usize> = raw.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    let vec_of = |ys: &[usize], v: &LinComb<OpElem>, coeff: &Scalar| -> SparseVec {
        let mut out = SparseVec::new();
        for (c, k) in v.iter() {
            let i = index[&(ys.to_vec(), *c)];
            let val = out.remove(&i).map(|old| &old + &(coeff * k)).unwrap_or_else(|| coeff * k);
            if !val.is_zero() {
                out.insert(i, val);
            }
        }
        out
    };
    let mut rel = Echelon::new(field);
    for (i, (ys, c)) in raw.iter().enumerate() {
        for a in 1..n {
            let mut sy = ys.clone();
            sy.swap(a - 1, a);
            let neg = (deg(ys[a - 1]) * deg(ys[a])).rem_euclid(2) == 1;
            let mut v = vec_of(&sy, &op.swap_image(a, *c), &field.sign(neg));
            let e = v.remove(&i).map(|old| &old - &field.one()).unwrap_or_else(|| field.one().neg());
            if !e.is_zero() {
                v.insert(i, e);
            }
            rel.insert(v);
        }
    }
    let pivots: std::collections::HashSet<usize> = rel.pivots().collect();
    let survivors: Vec<usize> = (0..raw.len()).filter(|i| !pivots.contains(i)).collect();
    let pos: HashMap<usize, usize> = survivors.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let project = |v: SparseVec| -> SparseVec {
        rel.reduce_full(v).into_iter().map(|(i, c)| (pos[&i], c)).collect()
    };
    let projection: Vec<SparseVec> = (0..raw.len()).map(|i| project(SparseVec::from([(i, field.one())]))).collect();
    let mut cols = Vec::new();
    for &i in &survivors {
        let (ys, c) = &raw[i];
        let mut img = SparseVec::new();
        let mut pre = 0i64;
        let add = |img: &mut SparseVec, v: SparseVec| {
            for (k, x) in v {
                let val = img.remove(&k).map(|o| &o + &x).unwrap_or(x);
                if !val.is_zero() {
                    img.insert(k, val);
                }
            }
        };
        for p in 0..n {
            for (t, k) in x.complex.d().column_entries(ys[p]) {
                let mut zs = ys.clone();
                zs[p] = *t;
                let s = field.sign(pre.rem_euclid(2) == 1);
                add(&mut img, vec_of(&zs, &one_of(field, *c), &(k * &s)));
            }
            pre += deg(ys[p]);
        }
        add(&mut img, vec_of(ys, &op.d(*c), &field.sign(pre.rem_euclid(2) == 1)));
        cols.push(project(img));
    }
    let names: Vec<(String, i64)> = survivors
        .iter()
        .map(|&i| {
            let (ys, c) = &raw[i];
            let ns: Vec<&str> = ys.iter().map(|y| basis.name(*y)).collect();
            (format!("({};{})", ns.join(","), op.name(*c)), ys.iter().map(|y| deg(*y)).sum::<i64>() + op.degree(*c))
        })
        .collect();
    let complex = ChainComplex::new(field, GradedBasis::new(names)?, SparseMatrix::from_columns(survivors.len(), cols))?;
    Ok(FreeArity { arity: n, output, raw, survivors, complex, projection })
}
