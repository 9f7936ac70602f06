//! Test-only oracles, written independently of the production code paths they check.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use kz_core::algebra::Algebra;
use kz_core::chain::ChainComplex;
use kz_core::coeff::{FieldSpec, Scalar};
use kz_core::operad::{builtin, Builtin, Operad};
use kz_core::sign::{Gen, SignWord};
use kz_core::tree::Tree;

pub const FIELDS: [&str; 3] = ["Q", "Fp 2", "Fp 3"];

pub fn field(s: &str) -> FieldSpec {
    s.parse().unwrap()
}

pub fn seed() -> u64 {
    std::env::var("KZ_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(20240601)
}

pub fn operad(b: Builtin, f: FieldSpec, cap: usize) -> Arc<Operad> {
    Arc::new(builtin(&b, f, cap).unwrap())
}

/// The algebras every bar criterion runs on: `(label, operad, algebra name)`.
pub fn example_names() -> Vec<(&'static str, Builtin, &'static str)> {
    vec![
        ("unit-operad/K", Builtin::UnitOperad, "K"),
        ("uAss/dual-numbers", Builtin::UAss, "dual-numbers"),
        ("uAss/exterior", Builtin::UAss, "exterior"),
        ("uAss/dg-cone", Builtin::UAss, "dg-cone"),
        ("module-operad/dual-numbers-module", Builtin::ModuleOperad, "dual-numbers-module"),
    ]
}

pub fn algebra(b: &Builtin, name: &str, f: FieldSpec, cap: usize) -> Algebra {
    Algebra::builtin(operad(b.clone(), f, cap), name).unwrap()
}

// ---------------------------------------------------------------------------------------------
// Dense elimination

/// Row echelon form in place; returns pivot columns.
fn echelon(rows: &mut Vec<Vec<Scalar>>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else { continue };
        rows.swap(r, p);
        let inv = rows[r][c].inv().unwrap();
        for x in rows[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows.len() {
            if i != r && !rows[i][c].is_zero() {
                let k = rows[i][c].clone();
                for j in 0..ncols {
                    let v = &rows[i][j] - &(&k * &rows[r][j]);
                    rows[i][j] = v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    pivots
}

pub fn rank(mut rows: Vec<Vec<Scalar>>, ncols: usize) -> usize {
    echelon(&mut rows, ncols).len()
}

/// Kernel of the matrix with the given rows, as vectors of length `ncols`.
pub fn kernel(f: FieldSpec, mut rows: Vec<Vec<Scalar>>, ncols: usize) -> Vec<Vec<Scalar>> {
    let pivots = echelon(&mut rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&fc| {
            let mut v = vec![f.zero(); ncols];
            v[fc] = f.one();
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = rows[r][fc].neg();
            }
            v
        })
        .collect()
}

/// The block of `d` from degree `k` to degree `k − 1`, as dense rows, restricted to source
/// columns selected by `mask`.
fn block(c: &ChainComplex, k: i64, mask: Option<&[bool]>) -> (Vec<Vec<Scalar>>, Vec<usize>, Vec<usize>) {
    let f = c.field();
    let b = c.basis();
    let src: Vec<usize> = b.indices_in_degree(k).into_iter().filter(|&i| mask.is_none_or(|m| m[i])).collect();
    let tgt: Vec<usize> = b.indices_in_degree(k - 1);
    let row_of: BTreeMap<usize, usize> = tgt.iter().enumerate().map(|(r, &i)| (i, r)).collect();
    let mut rows = vec![vec![f.zero(); src.len()]; tgt.len()];
    for (col, &j) in src.iter().enumerate() {
        for (i, v) in c.d().column_entries(j) {
            rows[row_of[i]][col] = v.clone();
        }
    }
    (rows, src, tgt)
}

pub fn homology_dims(c: &ChainComplex) -> BTreeMap<i64, usize> {
    c.basis()
        .degrees()
        .into_iter()
        .map(|k| {
            let (rk, src, _) = block(c, k, None);
            let n = src.len();
            let out = rank(rk, n);
            let (rin, s2, _) = block(c, k + 1, None);
            let inc = rank(rin, s2.len());
            (k, n - out - inc)
        })
        .collect()
}

/// Rank of `H_k(sub) → H_k(c)` where `sub` is spanned by the basis elements in `mask`.
pub fn persistent_rank(c: &ChainComplex, mask: &[bool], k: i64) -> usize {
    let f = c.field();
    let (rows, src, _) = block(c, k, Some(mask));
    let cycles = kernel(f, rows, src.len());
    let all = c.basis().indices_in_degree(k);
    let pos: BTreeMap<usize, usize> = all.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    // boundaries from degree k + 1, as vectors over degree-k coordinates
    let (brows, bsrc, _) = block(c, k + 1, None);
    let mut vecs: Vec<Vec<Scalar>> = (0..bsrc.len()).map(|j| brows.iter().map(|r| r[j].clone()).collect()).collect();
    let b = rank(vecs.clone(), all.len());
    for z in cycles {
        let mut v = vec![f.zero(); all.len()];
        for (col, &i) in src.iter().enumerate() {
            v[pos[&i]] = z[col].clone();
        }
        vecs.push(v);
    }
    rank(vecs, all.len()) - b
}

// ---------------------------------------------------------------------------------------------
// Sign words by single relation steps

fn key(g: &Gen) -> (u8, usize) {
    match g {
        Gen::E(i) => (0, *i),
        Gen::F(j) => (1, *j),
    }
}

/// Applies one relation at a time until none applies: `e_i e_i = 0`, `f_i f_i = 1`, and
/// anticommutation of distinct adjacent generators that are out of order.
pub fn rewrite(negative: bool, gens: &[Gen]) -> SignWord {
    let mut w = gens.to_vec();
    let mut neg = negative;
    'step: loop {
        for i in 0..w.len().saturating_sub(1) {
            let (a, b) = (w[i], w[i + 1]);
            if a == b {
                match a {
                    Gen::E(_) => return SignWord::Zero,
                    Gen::F(_) => {
                        w.drain(i..i + 2);
                        continue 'step;
                    }
                }
            }
            if key(&a) > key(&b) {
                w.swap(i, i + 1);
                neg = !neg;
                continue 'step;
            }
        }
        break;
    }
    let e = w.iter().filter_map(|g| if let Gen::E(i) = g { Some(*i) } else { None }).collect();
    let f = w.iter().filter_map(|g| if let Gen::F(j) = g { Some(*j) } else { None }).collect();
    SignWord::Mono { negative: neg, e, f }
}

// ---------------------------------------------------------------------------------------------
// Trees by brute force

/// Every `(s, L)` on `{1..n}` satisfying the conditions of a tree, found by trying all maps.
pub fn brute_trees(n: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut maps: Vec<Vec<usize>> = vec![Vec::new()];
    for x in 1..n {
        maps = maps
            .into_iter()
            .flat_map(|m| (x + 1..=n).map(move |y| {
                let mut m = m.clone();
                m.push(y);
                m
            }))
            .collect();
    }
    let mut out = Vec::new();
    for s in &maps {
        let cond2 = (1..n).all(|x| (x..s[x - 1]).filter(|&y| y < n).all(|y| s[y - 1] <= s[x - 1]));
        if !cond2 {
            continue;
        }
        for mask in 0u32..(1 << n) {
            let leaves: Vec<usize> = (1..=n).filter(|v| mask & (1 << (v - 1)) != 0).collect();
            if s.iter().any(|t| leaves.contains(t)) {
                continue;
            }
            if leaves.contains(&n) && n != 1 {
                continue;
            }
            out.push((s.clone(), leaves));
        }
    }
    out
}

pub fn all_perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in all_perms(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n);
            out.push(q);
        }
    }
    out
}

/// All permutations `σ` (as `sigma[i-1] = σ(i)`) with `σ(L) = M` and `t∘σ = σ∘s`.
pub fn brute_intertwiners(a: &Tree, b: &Tree) -> Vec<Vec<usize>> {
    if a.n() != b.n() {
        return Vec::new();
    }
    let n = a.n();
    all_perms(n)
        .into_iter()
        .filter(|p| {
            (1..=n).all(|i| a.is_leaf(i) == b.is_leaf(p[i - 1]) && a.sort(i) == b.sort(p[i - 1]))
                && (1..n).all(|i| p[i - 1] != n && b.s(p[i - 1]) == p[a.s(i) - 1])
        })
        .collect()
}
