mod common;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use kz_core::algebra::{Algebra, Carrier};
use kz_core::bar::{Bar, BarBasis, Label};
use kz_core::coeff::FieldSpec;
use kz_core::dstructure::{
    bar_algebra_action, carrier_window, is_equivalence, verify_morphism, BarDStructure, Cn, DMorphism, DeltaTerm,
    FiniteDStructure, Generators,
};
use kz_core::linalg::LinComb;
use kz_core::operad::Builtin;
use kz_core::tree::{enumerate, Intertwiner, Tree};

fn q() -> FieldSpec {
    FieldSpec::Rationals
}

fn single(b: BarBasis<u32>, f: FieldSpec) -> LinComb<BarBasis<u32>> {
    LinComb::single(b, f.one())
}

#[test]
fn homotopy_of_a_leaf_is_the_two_chain() {
    let a = algebra(&Builtin::UAss, "dual-numbers", q(), 4);
    let bar = Bar::new(&a).unwrap();
    let x = a.lookup("x").unwrap();
    let one = a.operad().lookup("p1").unwrap();
    let h = bar.homotopy(&bar.leaf(x)).unwrap();
    let chain = BarBasis { tree: Tree::new(2, &[2], &[1]).unwrap(), labels: vec![Label::Leaf(x), Label::Vertex(one)] };
    assert_eq!(h, single(chain.clone(), q()));
    assert_eq!(bar.mu(&chain).unwrap(), LinComb::single(x, q().one()));
}

#[test]
fn homotopy_squared_does_not_vanish() {
    // h∘h grafts twice and multiplies by e_{n+1} e_n: nothing cancels it
    let a = algebra(&Builtin::UnitOperad, "K", q(), 4);
    let bar = Bar::new(&a).unwrap();
    let hh = bar.homotopy_vec(&bar.homotopy(&bar.leaf(0)).unwrap()).unwrap();
    assert_eq!(hh.len(), 1);
    let (b, c) = hh.iter().next().unwrap();
    assert_eq!(b.tree, Tree::chain(3));
    assert!(c.is_one() || c.neg().is_one());
    // dh + hd = Id still holds on that element
    let d = bar.diff_tilde(b).unwrap();
    let mut id = bar.diff_tilde_vec(&bar.homotopy(b).unwrap()).unwrap();
    id.add_assign(&bar.homotopy_vec(&d).unwrap());
    assert_eq!(id, single(b.clone(), q()));
}

#[test]
fn mu_on_bushes_and_chains() {
    let a = algebra(&Builtin::UAss, "dual-numbers", q(), 4);
    let bar = Bar::new(&a).unwrap();
    let op = a.operad();
    let (one, x) = (a.lookup("1").unwrap(), a.lookup("x").unwrap());
    let (p12, p1) = (op.lookup("p12").unwrap(), op.lookup("p1").unwrap());
    let bush = |l: u32, r: u32| BarBasis { tree: Tree::bush(2), labels: vec![Label::Leaf(l), Label::Leaf(r), Label::Vertex(p12)] };
    assert!(bar.mu(&bush(x, x)).unwrap().is_zero());
    assert_eq!(bar.mu(&bush(x, one)).unwrap(), LinComb::single(x, q().one()));
    let chain3 = BarBasis { tree: Tree::chain(3), labels: vec![Label::Leaf(x), Label::Vertex(p1), Label::Vertex(p1)] };
    assert!(bar.mu(&chain3).unwrap().is_zero());
}

#[test]
fn swapped_bush_labels_normalize_together() {
    let a = algebra(&Builtin::UAss, "dual-numbers", q(), 4);
    let bar = Bar::new(&a).unwrap();
    let op = a.operad();
    let (one, x) = (a.lookup("1").unwrap(), a.lookup("x").unwrap());
    let (p12, p21) = (op.lookup("p12").unwrap(), op.lookup("p21").unwrap());
    let t = Tree::bush(2);
    let lhs = bar.normalize(&t, vec![Label::Leaf(x), Label::Leaf(one), Label::Vertex(p12)], &q().one()).unwrap();
    let rhs = bar.normalize(&t, vec![Label::Leaf(one), Label::Leaf(x), Label::Vertex(p21)], &q().one()).unwrap();
    assert_eq!(lhs, rhs);
    assert_eq!(lhs.len(), 1);
}

#[test]
fn normal_form_ignores_the_choice_of_intertwiner() {
    for f in FIELDS {
        let fs = field(f);
        for name in ["dual-numbers", "dg-cone"] {
            let a = algebra(&Builtin::UAss, name, fs, 4);
            let bar = Bar::new(&a).unwrap();
            let planar: Vec<Tree> = (1..=4).flat_map(|n| enumerate(n, false, 1).unwrap()).collect();
            for b in bar.basis_upto(4).unwrap() {
                let expect = single(b.clone(), fs);
                for u in planar.iter().filter(|u| u.n() == b.tree.n()) {
                    for p in brute_intertwiners(&b.tree, u) {
                        let sigma = Intertwiner { sigma: p };
                        let (labels, neg) = bar.transport(&b.tree, &b.labels, &sigma, u).unwrap();
                        let back = bar.normalize(u, labels, &fs.sign(neg)).unwrap();
                        assert_eq!(back, expect, "over {f}: {} via {:?} onto {u}", bar.elem_name(&b), sigma.sigma);
                    }
                }
            }
        }
    }
}

fn random_labels(rng: &mut ChaCha8Rng, a: &Algebra, t: &Tree) -> Option<Vec<Label<u32>>> {
    let op = a.operad();
    let mut labels = Vec::new();
    for v in 1..=t.n() {
        if t.is_leaf(v) {
            labels.push(Label::Leaf(rng.gen_range(0..a.dim() as u32)));
        } else {
            let k = t.valence(v);
            let ops = op.basis_of(&vec![0; k], 0);
            labels.push(Label::Vertex(*ops.choose(rng)?));
        }
    }
    Some(labels)
}

#[test]
fn normalize_is_idempotent_on_random_elements() {
    let mut rng = ChaCha8Rng::seed_from_u64(seed());
    for f in FIELDS {
        let fs = field(f);
        let a = algebra(&Builtin::UAss, "dg-cone", fs, 4);
        let bar = Bar::new(&a).unwrap();
        let trees: Vec<Tree> = (1..=5).flat_map(|n| enumerate(n, false, 1).unwrap()).collect();
        let mut done = 0;
        while done < 1000 {
            let t = trees.choose(&mut rng).unwrap();
            let Some(labels) = random_labels(&mut rng, &a, t) else { continue };
            let v = bar.normalize(t, labels, &fs.one()).unwrap();
            for (b, c) in v.iter() {
                let again = bar.normalize(&b.tree, b.labels.clone(), c).unwrap();
                assert_eq!(again, LinComb::single(b.clone(), c.clone()), "over {f}: {}", bar.elem_name(b));
            }
            done += 1;
        }
    }
}

#[test]
fn bar_delta_splits_at_the_root() {
    let a = algebra(&Builtin::UAss, "dual-numbers", q(), 4);
    let ds = BarDStructure::new(&a).unwrap();
    let x = a.lookup("x").unwrap();
    assert!(ds.delta(&ds.bar.leaf(x)).unwrap().is_empty());
    let p12 = a.operad().lookup("p12").unwrap();
    let bush = BarBasis { tree: Tree::bush(2), labels: vec![Label::Leaf(x), Label::Leaf(x), Label::Vertex(p12)] };
    let terms = ds.delta(&bush).unwrap();
    assert_eq!(terms.len(), 1);
    assert_eq!(terms[0].op, p12);
    assert_eq!(terms[0].inputs, vec![ds.bar.leaf(x), ds.bar.leaf(x)]);
    // every δ has support in the root valence only
    for b in ds.basis_upto(4).unwrap() {
        for t in ds.delta(&b).unwrap() {
            assert_eq!(t.inputs.len(), b.tree.valence(b.tree.n()));
        }
    }
}

#[test]
fn algebra_action_unit_and_chain_map() {
    for f in FIELDS {
        let fs = field(f);
        let a = algebra(&Builtin::UAss, "dg-cone", fs, 4);
        let ds = BarDStructure::new(&a).unwrap();
        let bar = &ds.bar;
        let op = a.operad();
        let (p1, p12, p21) = (op.lookup("p1").unwrap(), op.lookup("p12").unwrap(), op.lookup("p21").unwrap());
        let elems: Vec<BarBasis<u32>> = bar.basis_upto(3).unwrap().into_iter().filter(|b| !b.is_single_leaf()).collect();
        for b in &elems {
            let v = single(b.clone(), fs);
            assert_eq!(bar_algebra_action(&ds, &[v.clone()], p1).unwrap(), v, "unit law on {}", bar.elem_name(b));
        }
        // degree in B(A) is one less than in B̃(A)
        let deg = |b: &BarBasis<u32>| bar.degree(b) - 1;
        let d = |v: &LinComb<BarBasis<u32>>| {
            let mut out = LinComb::new();
            for (b, c) in v.iter() {
                out.add_scaled(&bar.diff_quotient(b).unwrap(), c);
            }
            out
        };
        let small: Vec<&BarBasis<u32>> = elems.iter().filter(|b| bar.size(b) <= 2).collect();
        for u in &small {
            for w in &small {
                for c in [p12, p21] {
                    let (uv, wv) = (single((*u).clone(), fs), single((*w).clone(), fs));
                    let lhs = d(&bar_algebra_action(&ds, &[uv.clone(), wv.clone()], c).unwrap());
                    let mut rhs = bar_algebra_action(&ds, &[d(&uv), wv.clone()], c).unwrap();
                    let s = fs.sign(deg(u).rem_euclid(2) == 1);
                    rhs.add_scaled(&bar_algebra_action(&ds, &[uv, d(&wv)], c).unwrap(), &s);
                    assert_eq!(lhs, rhs, "over {f}: d({}, {}; {})", bar.elem_name(u), bar.elem_name(w), op.name(c));
                }
            }
        }
    }
}

fn nilpotent(f: FieldSpec) -> FiniteDStructure {
    let op = operad(Builtin::UnitOperad, f, 3);
    let one = op.lookup("1").unwrap();
    FiniteDStructure::new(
        op,
        vec![("x".into(), 1, 0), ("y".into(), 0, 0)],
        vec![LinComb::new(), LinComb::new()],
        vec![vec![DeltaTerm { inputs: vec![1], op: one, coeff: f.one() }], vec![]],
    )
    .unwrap()
}

fn scaling<'a>(ds: &'a FiniteDStructure, k: i64) -> DMorphism<'a, FiniteDStructure, FiniteDStructure> {
    let cn = Cn::new(ds).unwrap();
    let s = ds.field().from_i64(k);
    DMorphism::new(ds, ds, move |x| Ok(cn.eta(x)?.scaled(&s))).unwrap()
}

#[test]
fn morphisms_identity_composition_and_fault() {
    let f = q();
    let ds = nilpotent(f);
    let id = DMorphism::identity(&ds).unwrap();
    assert!(verify_morphism(&id, 3).unwrap().passed);

    let two = scaling(&ds, 2);
    let three = scaling(&ds, 3);
    let six = two.then(&three).unwrap();
    assert!(verify_morphism(&six, 3).unwrap().passed);
    let cn = Cn::new(&ds).unwrap();
    for x in 0..2u32 {
        assert_eq!(six.f0(&x).unwrap(), cn.eta(&x).unwrap().scaled(&f.from_i64(6)));
    }
    // associativity and unitality on generators
    let left = two.then(&three).unwrap();
    let left = left.then(&id).unwrap();
    let right_inner = three.then(&id).unwrap();
    let right = two.then(&right_inner).unwrap();
    let unit_left = id.then(&two).unwrap();
    for x in 0..2u32 {
        assert_eq!(left.f0(&x).unwrap(), right.f0(&x).unwrap());
        assert_eq!(unit_left.f0(&x).unwrap(), two.f0(&x).unwrap());
    }

    // one corrupted coefficient: f₀(y) = 3y while f₀(x) = 2x
    let corrupt = DMorphism::new(&ds, &ds, {
        let cn = Cn::new(&ds).unwrap();
        move |x: &u32| Ok(cn.eta(x)?.scaled(&f.from_i64(if *x == 1 { 3 } else { 2 })))
    })
    .unwrap();
    let out = verify_morphism(&corrupt, 3).unwrap();
    assert!(!out.passed);
    assert!(out.failures[0].starts_with("x:"), "{:?}", out.failures);
}

#[test]
fn equivalence_verdicts() {
    let f = q();
    let op = operad(Builtin::UnitOperad, f, 3);
    let k = FiniteDStructure::new(op.clone(), vec![("x".into(), 0, 0)], vec![LinComb::new()], vec![vec![]]).unwrap();
    let id = DMorphism::identity(&k).unwrap();
    assert_eq!(is_equivalence(&id, 2).unwrap().verdict, Some(true));

    // zero map onto an acyclic target
    let acyclic = nilpotent(f);
    let zero = DMorphism::new(&k, &acyclic, |_| Ok(LinComb::new())).unwrap();
    assert!(verify_morphism(&zero, 2).unwrap().passed);
    // the target window only stabilises once x (weight 2 in CN) has room below the boundary
    assert_eq!(is_equivalence(&zero, 2).unwrap().verdict, None);
    let e = is_equivalence(&zero, 3).unwrap();
    assert_eq!(e.stable, vec![0]);
    assert_eq!(e.verdict, Some(false));
}

#[test]
fn zero_structure_has_homology() {
    for f in FIELDS {
        let op = operad(Builtin::UAss, field(f), 3);
        let ds = FiniteDStructure::new(op, vec![("x".into(), 0, 0)], vec![LinComb::new()], vec![vec![]]).unwrap();
        let cn = Cn::new(&ds).unwrap();
        let w = carrier_window(&cn, 2).unwrap();
        assert!(homology_dims(&w.complex).values().any(|&d| d > 0));
    }
}

#[test]
fn delta_zero_gives_internal_differential() {
    let f = q();
    let op: Arc<_> = operad(Builtin::UAss, f, 3);
    let ds = FiniteDStructure::new(
        op,
        vec![("x".into(), 1, 0), ("y".into(), 0, 0)],
        vec![LinComb::single(1, f.one()), LinComb::new()],
        vec![vec![], vec![]],
    )
    .unwrap();
    let cn = Cn::new(&ds).unwrap();
    for b in cn.basis_upto(2).unwrap() {
        let mut expect = LinComb::new();
        let mut sign = f.one();
        for (i, y) in b.inputs.iter().enumerate() {
            for (z, k) in ds.d(y).unwrap().iter() {
                let mut ys = b.inputs.clone();
                ys[i] = *z;
                expect.add_assign(&cn.normalize(ys, b.op, &(k * &sign)).unwrap());
            }
            if ds.degree(y).rem_euclid(2) == 1 {
                sign = sign.neg();
            }
        }
        assert_eq!(cn.delta_diff(&b).unwrap(), expect, "{}", cn.name_of(&b));
    }
}

