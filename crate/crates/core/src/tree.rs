//! Planar trees `(n, s, L)` with optional sort maps.
//!
//! Vertices are `1..=n` in post-order, `n` is the root, `s(x)` is the parent of `x` and `L` the
//! leaf set. All public indices are 1-based.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub type SortId = u16;

/// Largest vertex count accepted by [`enumerate`].
pub const ENUMERATION_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum TreeViolation {
    Empty,
    SuccessorCount { expected: usize, found: usize },
    SuccessorRange { x: usize, value: usize },
    /// condition (1): s(x) > x
    NotIncreasing { x: usize },
    /// condition (2): x ≤ y < s(x) implies s(y) ≤ s(x)
    NotNested { x: usize, y: usize },
    SuccessorIsLeaf { x: usize },
    LeafRange { leaf: usize },
    RootLeaf,
    SortCount { expected: usize, found: usize },
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeViolation::Empty => write!(f, "tree has no vertices"),
            TreeViolation::SuccessorCount { expected, found } => {
                write!(f, "successor map has {found} entries, expected {expected}")
            }
            TreeViolation::SuccessorRange { x, value } => write!(f, "s({x}) = {value} is out of range"),
            TreeViolation::NotIncreasing { x } => write!(f, "condition (1) violated: s({x}) <= {x}"),
            TreeViolation::NotNested { x, y } => {
                write!(f, "condition (2) violated: {x} <= {y} < s({x}) but s({y}) > s({x})")
            }
            TreeViolation::SuccessorIsLeaf { x } => write!(f, "s({x}) is a leaf"),
            TreeViolation::LeafRange { leaf } => write!(f, "leaf {leaf} is out of range"),
            TreeViolation::RootLeaf => write!(f, "root is a leaf but n > 1"),
            TreeViolation::SortCount { expected, found } => {
                write!(f, "sort map has {found} entries, expected {expected}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("invalid tree: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<TreeViolation>),
    #[error("root is a leaf")]
    RootIsLeaf,
    #[error("permutation of length {found} does not match root valence {expected}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("{0} is not a permutation")]
    NotAPermutation(String),
    #[error("vertex {0} is out of range")]
    VertexRange(usize),
    #[error("vertex {0} is a leaf")]
    IsLeaf(usize),
    #[error("vertex {0} is the root")]
    IsRoot(usize),
    #[error("children of {j} are {found:?}, expected {{{i}..{}}}", j - 1)]
    ChildrenMismatch { i: usize, j: usize, found: Vec<usize> },
    #[error("child {0} is not a leaf")]
    ChildNotLeaf(usize),
    #[error("n = {n} exceeds the enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("n must be positive")]
    ZeroVertices,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tree {
    n: usize,
    succ: Vec<usize>,
    leaf: Vec<bool>,
    sorts: Vec<SortId>,
}

/// A permutation `σ` of `{1..n}` with `σ(L) = L′`, `s′∘σ = σ∘s` and `f′∘σ = f`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Intertwiner {
    /// `sigma[i - 1] = σ(i)`
    pub sigma: Vec<usize>,
}

impl Intertwiner {
    pub fn identity(n: usize) -> Self {
        Intertwiner { sigma: (1..=n).collect() }
    }

    pub fn apply(&self, i: usize) -> usize {
        self.sigma[i - 1]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.sigma.len()];
        for (i, &s) in self.sigma.iter().enumerate() {
            inv[s - 1] = i + 1;
        }
        Intertwiner { sigma: inv }
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Intertwiner) -> Self {
        Intertwiner { sigma: other.sigma.iter().map(|&i| self.apply(i)).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.sigma.iter().enumerate().all(|(i, &s)| s == i + 1)
    }

    /// Checks the intertwining conditions from `a` to `b`.
    pub fn intertwines(&self, a: &Tree, b: &Tree) -> bool {
        let n = a.n;
        if b.n != n || self.sigma.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for &s in &self.sigma {
            if s == 0 || s > n || seen[s - 1] {
                return false;
            }
            seen[s - 1] = true;
        }
        (1..=n).all(|i| a.is_leaf(i) == b.is_leaf(self.apply(i)) && a.sort(i) == b.sort(self.apply(i)))
            && (1..n).all(|i| self.apply(i) < n && b.s(self.apply(i)) == self.apply(a.s(i)))
    }
}

/// Result of a contraction: `tau` maps the smaller index set into the larger, `rho` is its left inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractionWitness {
    pub result: Tree,
    /// `tau[k - 1] = τ(k)` for `k` in `1..=result.n()`
    pub tau: Vec<usize>,
    /// `rho[k - 1] = ρ(k)` for `k` in `1..=n`
    pub rho: Vec<usize>,
}

impl Tree {
    /// Validates `(n, s, L, f)`; `s[x - 1] = s(x)`.
    pub fn validate(n: usize, s: &[usize], leaves: &[usize], sorts: Option<&[SortId]>) -> Result<Tree, Vec<TreeViolation>> {
        let mut errs = Vec::new();
        if n == 0 {
            return Err(vec![TreeViolation::Empty]);
        }
        if s.len() != n - 1 {
            return Err(vec![TreeViolation::SuccessorCount { expected: n - 1, found: s.len() }]);
        }
        let mut leaf = vec![false; n];
        for &l in leaves {
            if l == 0 || l > n {
                errs.push(TreeViolation::LeafRange { leaf: l });
            } else {
                leaf[l - 1] = true;
            }
        }
        for x in 1..n {
            let v = s[x - 1];
            if v == 0 || v > n {
                errs.push(TreeViolation::SuccessorRange { x, value: v });
                continue;
            }
            if v <= x {
                errs.push(TreeViolation::NotIncreasing { x });
            }
            if leaf[v - 1] {
                errs.push(TreeViolation::SuccessorIsLeaf { x });
            }
        }
        if errs.is_empty() {
            for x in 1..n {
                let sx = s[x - 1];
                for y in x..sx.min(n) {
                    if s[y - 1] > sx {
                        errs.push(TreeViolation::NotNested { x, y });
                    }
                }
            }
        }
        if n > 1 && leaf[n - 1] {
            errs.push(TreeViolation::RootLeaf);
        }
        let sorts = match sorts {
            Some(f) if f.len() != n => {
                errs.push(TreeViolation::SortCount { expected: n, found: f.len() });
                vec![0; n]
            }
            Some(f) => f.to_vec(),
            None => vec![0; n],
        };
        if errs.is_empty() {
            Ok(Tree { n, succ: s.to_vec(), leaf, sorts })
        } else {
            Err(errs)
        }
    }

    pub fn new(n: usize, s: &[usize], leaves: &[usize]) -> Result<Tree, TreeError> {
        Tree::validate(n, s, leaves, None).map_err(TreeError::Invalid)
    }

    pub fn with_sorts(n: usize, s: &[usize], leaves: &[usize], sorts: &[SortId]) -> Result<Tree, TreeError> {
        Tree::validate(n, s, leaves, Some(sorts)).map_err(TreeError::Invalid)
    }

    /// The one-vertex tree `(1, ∅, {1})` or `(1, ∅, ∅)`.
    pub fn single(is_leaf: bool, sort: SortId) -> Tree {
        Tree { n: 1, succ: vec![], leaf: vec![is_leaf], sorts: vec![sort] }
    }

    /// Bush with `k` leaves under the root.
    pub fn bush(k: usize) -> Tree {
        let n = k + 1;
        Tree { n, succ: vec![n; k], leaf: (1..=n).map(|i| i < n).collect(), sorts: vec![0; n] }
    }

    /// Chain `1 -> 2 -> … -> n` with leaf 1.
    pub fn chain(n: usize) -> Tree {
        Tree { n, succ: (2..=n).collect(), leaf: (1..=n).map(|i| i == 1 && n > 1).collect(), sorts: vec![0; n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self, x: usize) -> usize {
        self.succ[x - 1]
    }

    pub fn successor_map(&self) -> &[usize] {
        &self.succ
    }

    pub fn is_leaf(&self, x: usize) -> bool {
        self.leaf[x - 1]
    }

    pub fn leaves(&self) -> Vec<usize> {
        (1..=self.n).filter(|&x| self.leaf[x - 1]).collect()
    }

    pub fn sort(&self, x: usize) -> SortId {
        self.sorts[x - 1]
    }

    pub fn sorts(&self) -> &[SortId] {
        &self.sorts
    }

    pub fn is_sorted_trivially(&self) -> bool {
        self.sorts.iter().all(|&s| s == 0)
    }

    pub fn root_is_leaf(&self) -> bool {
        self.leaf[self.n - 1]
    }

    /// `s⁻¹(v)` in increasing order.
    pub fn children(&self, v: usize) -> Vec<usize> {
        (1..v).filter(|&x| self.succ[x - 1] == v).collect()
    }

    pub fn valence(&self, v: usize) -> usize {
        (1..v).filter(|&x| self.succ[x - 1] == v).count()
    }

    /// Smallest vertex of the subtree rooted at `v`.
    pub fn subtree_start(&self, v: usize) -> usize {
        let mut v = v;
        loop {
            match (1..v).find(|&x| self.succ[x - 1] == v) {
                Some(c) => v = c,
                None => return v,
            }
        }
    }

    /// A tree is a bush when every non-root vertex is a leaf (includes `(1, ∅, ∅)`).
    pub fn is_bush(&self) -> bool {
        !self.root_is_leaf() && (1..self.n).all(|x| self.leaf[x - 1])
    }

    /// Non-leaf vertices other than the root, i.e. `{1..n−1} \ L`.
    pub fn inner_edges(&self) -> Vec<usize> {
        (1..self.n).filter(|&x| !self.leaf[x - 1]).collect()
    }

    pub fn nonleaf_count(&self) -> usize {
        self.leaf.iter().filter(|l| !**l).count()
    }

    pub fn successors(&self) -> Result<Vec<Tree>, TreeError> {
        if self.root_is_leaf() {
            return Err(TreeError::RootIsLeaf);
        }
        let mut out = Vec::new();
        let mut prev = 0;
        for k in self.children(self.n) {
            out.push(self.block(prev, k));
            prev = k;
        }
        Ok(out)
    }

    /// The subtree on vertices `prev+1..=k`, reindexed from 1.
    fn block(&self, prev: usize, k: usize) -> Tree {
        let m = k - prev;
        Tree {
            n: m,
            succ: (1..m).map(|j| self.succ[j + prev - 1] - prev).collect(),
            leaf: (1..=m).map(|j| self.leaf[j + prev - 1]).collect(),
            sorts: (1..=m).map(|j| self.sorts[j + prev - 1]).collect(),
        }
    }

    /// The subtree rooted at `v`, reindexed from 1.
    pub fn subtree(&self, v: usize) -> Tree {
        self.block(self.subtree_start(v) - 1, v)
    }

    /// The unique tree with a non-leaf root of sort `root_sort` and the given successor sequence.
    pub fn from_successors(root_sort: SortId, subs: &[Tree]) -> Tree {
        let mut succ = Vec::new();
        let mut leaf = Vec::new();
        let mut sorts = Vec::new();
        let n = subs.iter().map(|t| t.n).sum::<usize>() + 1;
        let mut off = 0;
        for t in subs {
            for j in 1..t.n {
                succ.push(t.s(j) + off);
            }
            succ.push(n);
            leaf.extend_from_slice(&t.leaf);
            sorts.extend_from_slice(&t.sorts);
            off += t.n;
        }
        leaf.push(false);
        sorts.push(root_sort);
        Tree { n, succ, leaf, sorts }
    }

    /// Reorders the successor sequence to `(T_σ(1), …, T_σ(m))`; `sigma` is 1-based.
    pub fn permute_successors(&self, sigma: &[usize]) -> Result<Tree, TreeError> {
        let subs = self.successors()?;
        if sigma.len() != subs.len() {
            return Err(TreeError::ArityMismatch { expected: subs.len(), found: sigma.len() });
        }
        check_permutation(sigma)?;
        let permuted: Vec<Tree> = sigma.iter().map(|&i| subs[i - 1].clone()).collect();
        Ok(Tree::from_successors(self.sort(self.n), &permuted))
    }

    pub fn graft(&self) -> Tree {
        let mut succ = self.succ.clone();
        succ.push(self.n + 1);
        let mut leaf = self.leaf.clone();
        leaf.push(false);
        let mut sorts = self.sorts.clone();
        sorts.push(self.sort(self.n));
        Tree { n: self.n + 1, succ, leaf, sorts }
    }

    /// Vertex-local encoding; `children_codes` must already be in the desired order.
    fn encode_vertex(&self, v: usize, children_codes: Vec<Vec<u32>>) -> Vec<u32> {
        let mut code = vec![!self.is_leaf(v) as u32, self.sort(v) as u32];
        if !self.is_leaf(v) {
            code.push(children_codes.len() as u32);
            for c in children_codes {
                code.extend(c);
            }
        }
        code
    }

    /// Canonical code of the ∼-class: leaf-flag, sort, then sorted successor codes.
    pub fn canonical_code(&self) -> Vec<u32> {
        self.canon_rec(self.n).0
    }

    /// Code of this planar tree as given (successors in planar order).
    pub fn planar_code(&self) -> Vec<u32> {
        self.planar_rec(self.n)
    }

    fn planar_rec(&self, v: usize) -> Vec<u32> {
        let codes = self.children(v).into_iter().map(|c| self.planar_rec(c)).collect();
        self.encode_vertex(v, codes)
    }

    /// Returns the canonical code of the subtree at `v` and its vertices in canonical post-order.
    fn canon_rec(&self, v: usize) -> (Vec<u32>, Vec<usize>) {
        let mut kids: Vec<(Vec<u32>, Vec<usize>)> = self.children(v).into_iter().map(|c| self.canon_rec(c)).collect();
        kids.sort_by(|a, b| a.0.cmp(&b.0));
        let mut order = Vec::new();
        let mut codes = Vec::new();
        for (c, o) in kids {
            codes.push(c);
            order.extend(o);
        }
        order.push(v);
        (self.encode_vertex(v, codes), order)
    }

    pub fn is_canonical(&self) -> bool {
        self.planar_code() == self.canonical_code()
    }

    /// Canonical representative and an intertwiner from `self` to it.
    pub fn canonical_form(&self) -> (Tree, Intertwiner) {
        let (_, order) = self.canon_rec(self.n);
        let mut sigma = vec![0; self.n];
        for (pos, &old) in order.iter().enumerate() {
            sigma[old - 1] = pos + 1;
        }
        let sig = Intertwiner { sigma };
        (self.transport(&sig), sig)
    }

    /// The tree `σ·self`, defined by `s′(σ(i)) = σ(s(i))`.
    fn transport(&self, sig: &Intertwiner) -> Tree {
        let n = self.n;
        let mut succ = vec![0; n - 1];
        let mut leaf = vec![false; n];
        let mut sorts = vec![0; n];
        for i in 1..=n {
            let j = sig.apply(i);
            leaf[j - 1] = self.leaf[i - 1];
            sorts[j - 1] = self.sorts[i - 1];
            if i < n {
                succ[j - 1] = sig.apply(self.succ[i - 1]);
            }
        }
        Tree { n, succ, leaf, sorts }
    }

    pub fn find_intertwiner(&self, other: &Tree) -> Option<Intertwiner> {
        if self.n != other.n {
            return None;
        }
        let (c1, s1) = self.canonical_form();
        let (c2, s2) = other.canonical_form();
        (c1 == c2).then(|| s2.inverse().compose(&s1))
    }

    pub fn is_equivalent(&self, other: &Tree) -> bool {
        self.n == other.n && self.canonical_code() == other.canonical_code()
    }

    /// All automorphisms of a canonical tree.
    pub fn automorphisms(&self) -> Vec<Intertwiner> {
        assert!(self.is_canonical(), "automorphisms are enumerated on canonical trees");
        self.aut_rec(self.n)
            .into_iter()
            .map(|m| Intertwiner { sigma: m })
            .collect()
    }

    /// Automorphisms of the subtree at `v` as maps on absolute vertex numbers of that subtree,
    /// stored relative to the subtree start.
    fn aut_rec(&self, v: usize) -> Vec<Vec<usize>> {
        let start = self.subtree_start(v);
        let kids = self.children(v);
        let codes: Vec<Vec<u32>> = kids.iter().map(|&c| self.planar_rec(c)).collect();
        let ranges: Vec<(usize, usize)> = kids.iter().map(|&c| (self.subtree_start(c), c)).collect();
        let child_auts: Vec<Vec<Vec<usize>>> = kids.iter().map(|&c| self.aut_rec(c)).collect();
        let mut out = Vec::new();
        for perm in permutations(kids.len()) {
            if (0..kids.len()).any(|i| codes[i] != codes[perm[i]]) {
                continue;
            }
            let mut partial: Vec<Vec<usize>> = vec![vec![0; v - start + 1]];
            for i in 0..kids.len() {
                let (a, _) = ranges[i];
                let (b, _) = ranges[perm[i]];
                let mut next = Vec::new();
                for p in &partial {
                    for ca in &child_auts[i] {
                        let mut q = p.clone();
                        for (off, &img) in ca.iter().enumerate() {
                            q[a - start + off] = img - a + b;
                        }
                        next.push(q);
                    }
                }
                partial = next;
            }
            for mut p in partial {
                p[v - start] = v;
                out.push(p);
            }
        }
        out
    }

    pub fn edge_contract(&self, j: usize) -> Result<ContractionWitness, TreeError> {
        let n = self.n;
        if j == 0 || j > n {
            return Err(TreeError::VertexRange(j));
        }
        if j == n {
            return Err(TreeError::IsRoot(j));
        }
        if self.is_leaf(j) {
            return Err(TreeError::IsLeaf(j));
        }
        let sj = self.s(j);
        let tau: Vec<usize> = (1..n).map(|k| if k < j { k } else { k + 1 }).collect();
        let rho: Vec<usize> = (1..=n)
            .map(|k| match k.cmp(&j) {
                std::cmp::Ordering::Less => k,
                std::cmp::Ordering::Equal => sj - 1,
                std::cmp::Ordering::Greater => k - 1,
            })
            .collect();
        Ok(self.contracted(n - 1, tau, rho, None))
    }

    pub fn leaf_contract(&self, i: usize, j: usize) -> Result<ContractionWitness, TreeError> {
        let n = self.n;
        if i == 0 || i > n {
            return Err(TreeError::VertexRange(i));
        }
        if j < i || j > n {
            return Err(TreeError::VertexRange(j));
        }
        if self.is_leaf(j) {
            return Err(TreeError::IsLeaf(j));
        }
        let kids = self.children(j);
        if kids != (i..j).collect::<Vec<_>>() {
            return Err(TreeError::ChildrenMismatch { i, j, found: kids });
        }
        if let Some(&c) = kids.iter().find(|&&c| !self.is_leaf(c)) {
            return Err(TreeError::ChildNotLeaf(c));
        }
        let m = n - j + i;
        let tau: Vec<usize> = (1..=m).map(|k| if k < i { k } else { k + j - i }).collect();
        let rho: Vec<usize> = (1..=n)
            .map(|k| {
                if k < i {
                    k
                } else if k <= j {
                    i
                } else {
                    k - (j - i)
                }
            })
            .collect();
        Ok(self.contracted(m, tau, rho, Some(i)))
    }

    fn contracted(&self, m: usize, tau: Vec<usize>, rho: Vec<usize>, new_leaf: Option<usize>) -> ContractionWitness {
        let succ = (1..m).map(|k| rho[self.s(tau[k - 1]) - 1]).collect();
        let mut leaf: Vec<bool> = (1..=m).map(|k| self.is_leaf(tau[k - 1])).collect();
        if let Some(i) = new_leaf {
            leaf[i - 1] = true;
        }
        let sorts = (1..=m).map(|k| self.sort(tau[k - 1])).collect();
        let result = Tree { n: m, succ, leaf, sorts };
        debug_assert!(Tree::validate(m, &result.succ, &result.leaves(), Some(&result.sorts)).is_ok());
        ContractionWitness { result, tau, rho }
    }

    /// Admissible leaf contractions `(i, j)`: `j ∉ L` with all children leaves.
    pub fn leaf_contraction_sites(&self) -> Vec<(usize, usize)> {
        (1..=self.n)
            .filter(|&j| !self.is_leaf(j))
            .filter_map(|j| {
                let kids = self.children(j);
                kids.iter().all(|&c| self.is_leaf(c)).then(|| (j - kids.len(), j))
            })
            .collect()
    }

    pub fn fmt_with_sorts(&self, names: Option<&[String]>) -> String {
        let s: Vec<String> = (1..self.n).map(|x| format!("{}->{}", x, self.s(x))).collect();
        let l: Vec<String> = self.leaves().iter().map(|x| x.to_string()).collect();
        let mut out = format!("tree({}; s: {}; L: {{{}}}", self.n, s.join(", "), l.join(","));
        if let Some(names) = names {
            let f: Vec<String> =
                (1..=self.n).map(|x| format!("{}:{}", x, names[self.sort(x) as usize])).collect();
            out.push_str(&format!("; f: {}", f.join(",")));
        }
        out.push(')');
        out
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_sorted_trivially() {
            write!(f, "{}", self.fmt_with_sorts(None))
        } else {
            let names: Vec<String> = (0..=*self.sorts.iter().max().unwrap()).map(|s| s.to_string()).collect();
            write!(f, "{}", self.fmt_with_sorts(Some(&names)))
        }
    }
}

fn check_permutation(sigma: &[usize]) -> Result<(), TreeError> {
    let mut seen = vec![false; sigma.len()];
    for &s in sigma {
        if s == 0 || s > sigma.len() || seen[s - 1] {
            return Err(TreeError::NotAPermutation(format!("{sigma:?}")));
        }
        seen[s - 1] = true;
    }
    Ok(())
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// All trees with `n` vertices and sorts in `0..num_sorts`, or one canonical tree per class.
pub fn enumerate(n: usize, up_to_equiv: bool, num_sorts: usize) -> Result<Vec<Tree>, TreeError> {
    if n == 0 {
        return Err(TreeError::ZeroVertices);
    }
    if n > ENUMERATION_CAP {
        return Err(TreeError::CapExceeded { n, cap: ENUMERATION_CAP });
    }
    let num_sorts = num_sorts.max(1);
    let mut table: Vec<Vec<Tree>> = vec![Vec::new()];
    for m in 1..n {
        table.push(gen_subtrees(m, up_to_equiv, num_sorts, &table));
    }
    let mut out = Vec::new();
    for sort in 0..num_sorts as SortId {
        if n == 1 {
            out.push(Tree::single(true, sort));
        }
        for subs in sequences(n - 1, up_to_equiv, &table) {
            out.push(Tree::from_successors(sort, &subs));
        }
    }
    if up_to_equiv {
        out.sort_by_cached_key(|t| t.planar_code());
    } else {
        out.sort();
    }
    Ok(out)
}

/// Trees of size `m` allowed as proper subtrees (root may be a leaf when `m = 1`).
fn gen_subtrees(m: usize, canonical: bool, num_sorts: usize, table: &[Vec<Tree>]) -> Vec<Tree> {
    let mut out = Vec::new();
    for sort in 0..num_sorts as SortId {
        if m == 1 {
            out.push(Tree::single(true, sort));
        }
        for subs in sequences(m - 1, canonical, table) {
            out.push(Tree::from_successors(sort, &subs));
        }
    }
    if canonical {
        out.sort_by_cached_key(|t| t.planar_code());
    }
    out
}

/// Sequences of subtrees with total size `total`; nondecreasing by code when `canonical`.
fn sequences(total: usize, canonical: bool, table: &[Vec<Tree>]) -> Vec<Vec<Tree>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    seq_rec(total, canonical, table, &mut cur, &mut out);
    out
}

fn seq_rec(rest: usize, canonical: bool, table: &[Vec<Tree>], cur: &mut Vec<Tree>, out: &mut Vec<Vec<Tree>>) {
    if rest == 0 {
        out.push(cur.clone());
        return;
    }
    for size in 1..=rest {
        for t in &table[size] {
            if canonical {
                if let Some(last) = cur.last() {
                    if t.planar_code() < last.planar_code() {
                        continue;
                    }
                }
            }
            cur.push(t.clone());
            seq_rec(rest - size, canonical, table, cur, out);
            cur.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_examples() {
        assert!(Tree::new(1, &[], &[1]).is_ok());
        assert!(Tree::new(2, &[2], &[1]).is_ok());
        let e = Tree::validate(2, &[1], &[], None).unwrap_err();
        assert!(e.contains(&TreeViolation::NotIncreasing { x: 1 }));
        assert_eq!(Tree::validate(2, &[2], &[2], None).unwrap_err(), vec![TreeViolation::SuccessorIsLeaf { x: 1 }, TreeViolation::RootLeaf]);
    }

    #[test]
    fn successor_examples() {
        let bush = Tree::bush(2);
        assert_eq!(bush.successors().unwrap(), vec![Tree::single(true, 0); 2]);
        let chain = Tree::chain(3);
        assert_eq!(chain.successors().unwrap(), vec![Tree::chain(2)]);
        assert!(Tree::single(false, 0).successors().unwrap().is_empty());
        assert_eq!(Tree::single(true, 0).successors(), Err(TreeError::RootIsLeaf));
    }

    #[test]
    fn permute_and_canonical() {
        let t = Tree::new(3, &[3, 3], &[1]).unwrap();
        let swapped = t.permute_successors(&[2, 1]).unwrap();
        assert_eq!(swapped, Tree::new(3, &[3, 3], &[2]).unwrap());
        let (c, sig) = swapped.canonical_form();
        assert_eq!(c, t);
        assert_eq!(sig.sigma, vec![2, 1, 3]);
        assert_eq!(t.find_intertwiner(&swapped).unwrap().sigma, vec![2, 1, 3]);
        assert!(Tree::chain(3).find_intertwiner(&Tree::bush(2)).is_none());
    }

    #[test]
    fn contraction_examples() {
        let w = Tree::chain(3).edge_contract(2).unwrap();
        assert_eq!(w.result, Tree::chain(2));
        assert_eq!(w.tau, vec![1, 3]);
        let w = Tree::new(2, &[2], &[]).unwrap().edge_contract(1).unwrap();
        assert_eq!(w.result, Tree::single(false, 0));
        assert_eq!(Tree::bush(2).edge_contract(1), Err(TreeError::IsLeaf(1)));
        let w = Tree::bush(2).leaf_contract(1, 3).unwrap();
        assert_eq!(w.result, Tree::single(true, 0));
        assert_eq!(w.rho, vec![1, 1, 1]);
        assert!(matches!(Tree::chain(3).leaf_contract(1, 3), Err(TreeError::ChildrenMismatch { .. })));
    }

    #[test]
    fn graft_examples() {
        let t = Tree::single(true, 0).graft();
        assert_eq!(t, Tree::chain(2));
        let b = Tree::bush(3);
        assert_eq!(b.graft().successors().unwrap(), vec![b.clone()]);
        assert_eq!(b.graft().leaves(), b.leaves());
    }

    #[test]
    fn small_counts() {
        assert_eq!(enumerate(1, false, 1).unwrap().len(), 2);
        assert_eq!(enumerate(2, false, 1).unwrap().len(), 2);
        assert_eq!(enumerate(3, false, 1).unwrap().len(), 6);
        assert_eq!(enumerate(3, true, 1).unwrap().len(), 5);
        assert!(enumerate(11, false, 1).is_err());
    }

    #[test]
    fn automorphism_counts() {
        assert_eq!(Tree::bush(3).automorphisms().len(), 6);
        assert_eq!(Tree::chain(4).automorphisms().len(), 1);
    }
}
