//! Acceptance suite: one test per criterion, each printing a PASS line.
//! All tolerances are exact rational comparisons (tolerance zero unless the
//! criterion itself states a bound).

use banach_forge::fraisse::{ComplexityBudget, GenericRun};
use banach_forge::rational::{int, rat, Rational};
use banach_forge::seeded::SeededGen;
use banach_forge::space::{
    is_eps_isometry, lower_isometry_bound, op_norm, Chain, Operator, PolyBanachSpace,
};
use banach_forge::universal::{back_and_forth, embed_chain, SeedIsometry};
use banach_forge::{
    corrected_sum, pushout, rationalize_pair, rationalize_space, retraction_pairs, Matrix,
    ProjectionPair,
};
use num_traits::{One, Signed, Zero};

fn pass(criterion: &str) {
    println!("acceptance {criterion}: PASS");
}

/// Criterion 1: corrected sums of seeded eps-isometries have exactly
/// isometric canonical embeddings and defect at most eps.
#[test]
fn criterion_01_crucial_lemma() {
    let mut gen = SeededGen::new(0xC1);
    for case in 0..50 {
        let eps = if case % 2 == 0 { rat(1, 4) } else { rat(1, 2) };
        let dim_domain = 1 + (case % 3); // 1..=3
        let dim_extra = 1 + (case % 2); // codomain dim <= 4 (wait: 3 + 2 = 5)
        let dim_extra = if dim_domain + dim_extra > 4 { 1 } else { dim_extra };
        let f = gen.eps_isometry(dim_domain, dim_extra, 2, &eps);
        assert!(f.domain().dim() <= 4 && f.codomain().dim() <= 4);
        assert!(is_eps_isometry(&f, &eps).unwrap());
        let sum = corrected_sum(&f, &eps).unwrap();
        assert_eq!(op_norm(&sum.embed_domain), int(1), "case {case}: op_norm(i)");
        assert_eq!(op_norm(&sum.embed_codomain), int(1), "case {case}: op_norm(j)");
        assert_eq!(
            lower_isometry_bound(&sum.embed_domain).unwrap(),
            int(1),
            "case {case}: lower(i)"
        );
        assert_eq!(
            lower_isometry_bound(&sum.embed_codomain).unwrap(),
            int(1),
            "case {case}: lower(j)"
        );
        let defect = op_norm(
            &sum.embed_codomain
                .compose(&f)
                .unwrap()
                .sub(&sum.embed_domain)
                .unwrap(),
        );
        assert!(defect <= eps, "case {case}: || j f - i || = {defect:?}");
        assert_eq!(defect, sum.defect);
        assert!(sum.cert.holds());
    }
    pass("criterion 1 (crucial lemma, 50 seeded eps-isometries)");
}

/// Criterion 2: the unique 1-bounded factorization through the corrected
/// sum, on 30 seeded hypothesis-satisfying pairs.
#[test]
fn criterion_02_universal_property() {
    let mut gen = SeededGen::new(0xC2);
    for case in 0..30 {
        let eps = if case % 2 == 0 { rat(1, 4) } else { rat(1, 2) };
        let f = gen.eps_isometry(1 + (case % 2), 1, 2, &eps);
        let sum = corrected_sum(&f, &eps).unwrap();
        let v = gen.space(2, 2);
        // l random 1-bounded, k a hypothesis-satisfying perturbation of l.f:
        // k = (l f + (eps/2) k0) / (1 + eps/2) keeps both conditions exact.
        let l = gen.one_bounded(f.codomain(), &v);
        let k0 = gen.one_bounded(f.domain(), &v);
        let lf = l.compose(&f).unwrap();
        let k = lf
            .add(&k0.scale(&(eps.clone() / int(2))))
            .unwrap()
            .scale(&(int(1) + eps.clone() / int(2)).recip());
        let hypothesis = op_norm(&lf.sub(&k).unwrap());
        assert!(hypothesis <= eps, "case {case}: hypothesis {hypothesis:?}");
        let (h, cert) = sum.factor(&k, &l).unwrap();
        assert_eq!(
            h.matrix().mul(sum.embed_domain.matrix()),
            k.matrix().clone(),
            "case {case}: h i = k"
        );
        assert_eq!(
            h.matrix().mul(sum.embed_codomain.matrix()),
            l.matrix().clone(),
            "case {case}: h j = l"
        );
        assert!(op_norm(&h) <= int(1), "case {case}: op_norm(h)");
        assert!(cert.holds());
        // Uniqueness: any operator with the same composites equals h.
        let again = k.matrix().hconcat(l.matrix());
        assert_eq!(&again, h.matrix());
    }
    pass("criterion 2 (universal property, 30 seeded factorizations)");
}

fn coordinate_pair(a: &PolyBanachSpace, b: &PolyBanachSpace) -> ProjectionPair {
    let e = Operator::coordinate_inclusion(a, b).unwrap();
    let mut pm = Matrix::zeros(a.dim(), b.dim());
    for i in 0..a.dim() {
        pm.set(i, i, int(1));
    }
    ProjectionPair::new(e, Operator::new(b.clone(), a.clone(), pm).unwrap()).unwrap()
}

/// A valid pair out of `z` into the sum-normed extension by `extra`
/// coordinates of the cross-polytope.
fn seeded_pair(gen: &mut SeededGen, z: &PolyBanachSpace, extra: usize) -> ProjectionPair {
    let dim = z.dim() + extra;
    let mut points = Vec::new();
    for v in z.ball().vertices() {
        let mut p = v.clone();
        p.extend(vec![int(0); extra]);
        points.push(p);
    }
    for i in 0..extra {
        for s in [1i64, -1] {
            let mut p = vec![int(0); dim];
            p[z.dim() + i] = rat(s, 1);
            points.push(p);
        }
    }
    // A couple of extra symmetric vertices keep the balls varied.
    for _ in 0..gen.below(2) {
        let mut p: Vec<Rational> = z
            .ball()
            .vertices()
            .first()
            .cloned()
            .unwrap_or_else(|| vec![int(0); z.dim()]);
        p.extend((0..extra).map(|_| gen.rational(1, 2)));
        if p.iter().any(|c| !c.is_zero()) {
            let n: Vec<Rational> = p.iter().map(|x| -x).collect();
            points.push(p);
            points.push(n);
        }
    }
    let ball = banach_forge::polytope::convex_hull(dim, points).unwrap();
    let space = PolyBanachSpace::new(ball).unwrap();
    let pair = coordinate_pair(z, &space);
    // The sum-style ball keeps the coordinate pair valid; verify exactly.
    pair.verify().unwrap();
    pair
}

/// Criterion 3: thirty seeded pushouts satisfy all four diagram identities
/// exactly, output arrows verify, and the trivial-base case reproduces the
/// sum ball.
#[test]
fn criterion_03_amalgamation() {
    let mut gen = SeededGen::new(0xC3);
    for case in 0..30 {
        let z = if case % 5 == 0 {
            PolyBanachSpace::trivial()
        } else {
            gen.space(1 + (case % 2), 2)
        };
        let zx = seeded_pair(&mut gen, &z, 1 + (case % 2));
        let zy = seeded_pair(&mut gen, &z, 1);
        let po = pushout(&zx, &zy).unwrap();
        assert_eq!(
            po.space.dim(),
            zx.codomain().dim() + zy.codomain().dim() - z.dim(),
            "case {case}: dim formula"
        );
        // four identities
        assert_eq!(
            po.left.embed.matrix().mul(zx.embed.matrix()),
            po.right.embed.matrix().mul(zy.embed.matrix()),
            "case {case}: i' i = j' j"
        );
        assert_eq!(
            zx.project.matrix().mul(po.left.project.matrix()),
            zy.project.matrix().mul(po.right.project.matrix()),
            "case {case}: P P' = Q Q'"
        );
        assert_eq!(
            zy.embed.matrix().mul(zx.project.matrix()),
            po.right.project.matrix().mul(po.left.embed.matrix()),
            "case {case}: j P = Q' i'"
        );
        assert_eq!(
            zx.embed.matrix().mul(zy.project.matrix()),
            po.left.project.matrix().mul(po.right.embed.matrix()),
            "case {case}: i Q = P' j'"
        );
        assert!(po.left.verify().unwrap().holds(), "case {case}: left pair");
        assert!(po.right.verify().unwrap().holds(), "case {case}: right pair");
        assert!(po.cert.holds());
    }
    // trivial base: the quotient over {0} is the sum ball exactly
    let z = PolyBanachSpace::trivial();
    let x = PolyBanachSpace::linf(1);
    let y = PolyBanachSpace::linf(2);
    let zx = ProjectionPair::new(Operator::zero(&z, &x), Operator::zero(&x, &z)).unwrap();
    let zy = ProjectionPair::new(Operator::zero(&z, &y), Operator::zero(&y, &z)).unwrap();
    let po = pushout(&zx, &zy).unwrap();
    let mut expected = Vec::new();
    for v in x.ball().vertices() {
        let mut p = v.clone();
        p.extend(vec![int(0); 2]);
        expected.push(p);
    }
    for u in y.ball().vertices() {
        let mut p = vec![int(0)];
        p.extend(u.clone());
        expected.push(p);
    }
    let expected = banach_forge::polytope::convex_hull(3, expected).unwrap();
    assert_eq!(po.space.ball(), &expected);
    pass("criterion 3 (amalgamation, 30 seeded pushouts + trivial base)");
}

/// Criterion 4: retraction pairs from 30 seeded almost inverses satisfy the
/// four exact identities and certify the eps-isometry of the forward map.
#[test]
fn criterion_04_retraction_pairs() {
    let mut gen = SeededGen::new(0xC4);
    for case in 0..30 {
        let eps = if case % 2 == 0 { rat(1, 4) } else { rat(1, 2) };
        // forward: shrunk coordinate inclusion into a sum-normed extension;
        // backward: the coordinate projection. || T f - id || = shrink.
        let f0 = gen.eps_isometry(1 + (case % 2), 1, 2, &eps);
        let x = f0.domain().clone();
        let y = f0.codomain().clone();
        let mut back_m = Matrix::zeros(x.dim(), y.dim());
        for i in 0..x.dim() {
            back_m.set(i, i, int(1));
        }
        let back = Operator::new(y.clone(), x.clone(), back_m).unwrap();
        assert!(op_norm(&back) <= int(1));
        let delta = op_norm(&back.compose(&f0).unwrap().sub(&Operator::identity(&x)).unwrap());
        assert!(delta <= eps, "case {case}: hypothesis {delta:?}");
        let rp = retraction_pairs(&f0, &back, &eps).unwrap();
        let w_dim_x = x.dim();
        assert_eq!(
            rp.domain_pair.project.matrix().mul(rp.domain_pair.embed.matrix()),
            Matrix::identity(w_dim_x),
            "case {case}: P i = id"
        );
        assert_eq!(
            rp.codomain_pair.project.matrix().mul(rp.codomain_pair.embed.matrix()),
            Matrix::identity(y.dim()),
            "case {case}: Q j = id"
        );
        assert_eq!(
            rp.domain_pair.project.matrix().mul(rp.codomain_pair.embed.matrix()),
            back.matrix().clone(),
            "case {case}: P j = T"
        );
        assert_eq!(
            rp.codomain_pair.project.matrix().mul(rp.domain_pair.embed.matrix()),
            f0.matrix().clone(),
            "case {case}: Q i = f"
        );
        // the hypothesis certifies f as an eps-isometry, exactly
        assert!(op_norm(&f0) <= int(1));
        assert!(
            lower_isometry_bound(&f0).unwrap() >= int(1) - eps.clone(),
            "case {case}: lower bound"
        );
        assert!(rp.cert.holds());
        assert!(rp.domain_pair.verify().unwrap().holds());
        assert!(rp.codomain_pair.verify().unwrap().holds());
    }
    pass("criterion 4 (return law, 30 seeded almost inverses)");
}

/// Criterion 5: both rationalization lemmas on 30 seeded inputs each, with
/// the proof constants matched exactly on identity cases.
#[test]
fn criterion_05_rationalization() {
    let mut gen = SeededGen::new(0xC5);
    for case in 0..30 {
        let eps = if case % 2 == 0 { rat(1, 4) } else { rat(1, 2) };
        let e = gen.space(1 + (case % 3), 8);
        let r = rationalize_space(&e, &eps, 16).unwrap();
        // || P e - id || equals eps exactly (P is the (1-eps) scaling).
        let roundtrip = op_norm(
            &r.backward
                .compose(&r.forward)
                .unwrap()
                .sub(&Operator::identity(&e))
                .unwrap(),
        );
        assert_eq!(roundtrip, eps, "case {case}: space pass constant");
        // sandwich at the vertices of both balls
        for v in e.ball().vertices() {
            assert!(r.space.norm(v).unwrap() <= int(1));
        }
        let dilation = (int(1) - eps.clone()).recip();
        for u in r.space.ball().vertices() {
            assert!(e.norm(u).unwrap() <= dilation);
        }
        assert!(r.cert.holds());
    }
    for case in 0..30 {
        let eps = if case % 2 == 0 { rat(1, 4) } else { rat(1, 2) };
        let z = gen.space(1 + (case % 2), 2);
        let pair = seeded_pair(&mut gen, &z, 1);
        let r = rationalize_pair(&pair, &eps, 8, &[]).unwrap();
        // P . T = Q holds exactly and the pair survives.
        assert_eq!(
            pair.project.matrix().mul(r.couple.backward.matrix()),
            r.pair.project.matrix().clone(),
            "case {case}: P T = Q"
        );
        assert!(r.defect <= eps, "case {case}: || f e - i ||");
        assert!(r.pair.verify().unwrap().holds());
        assert!(r.cert.holds());
    }
    // identity-map cases match the computed constants exactly
    let e = PolyBanachSpace::linf(2);
    for eps in [rat(1, 4), rat(1, 2)] {
        let rs = rationalize_space(&e, &eps, 4).unwrap();
        let roundtrip = op_norm(
            &rs.backward
                .compose(&rs.forward)
                .unwrap()
                .sub(&Operator::identity(&e))
                .unwrap(),
        );
        assert_eq!(roundtrip, eps);
        let rp = rationalize_pair(&ProjectionPair::identity(&e), &eps, 4, &[]).unwrap();
        assert_eq!(rp.defect, eps.clone() / (int(1) + eps.clone()));
    }
    pass("criterion 5 (rationalization lemmas, 30 + 30 seeded inputs)");
}

/// Criterion 6: a 20-step run at budget (dim <= 3, magnitude <= 2) saturates
/// its first epoch, every certificate re-verifies, and reruns are
/// byte-identical.
#[test]
fn criterion_06_generic_run_saturation() {
    let cap = ComplexityBudget::new(3, 2, 8);
    let mut run = GenericRun::new(7, cap.clone());
    run.extend(20).unwrap();
    assert!(!run.epoch_marks().is_empty(), "epoch 0 completed");
    let audit = run.audit_epoch(0).unwrap();
    assert!(
        audit.saturated(),
        "pending within the first completed epoch: {:?}",
        audit.pending
    );
    run.verify_ledger().unwrap();
    for req in run.ledger() {
        let banach_forge::fraisse::RequirementStatus::Realized { cert, .. } = &req.status;
        assert!(cert.holds());
    }
    // byte-identical rerun through the persistence layer
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    banach_forge::manifest::save_run(dir_a.path(), &run).unwrap();
    let mut rerun = GenericRun::new(7, cap);
    rerun.extend(20).unwrap();
    banach_forge::manifest::save_run(dir_b.path(), &rerun).unwrap();
    let bytes_a = std::fs::read(dir_a.path().join("manifest.json")).unwrap();
    let bytes_b = std::fs::read(dir_b.path().join("manifest.json")).unwrap();
    assert_eq!(bytes_a, bytes_b, "manifests differ between reruns");
    pass("criterion 6 (generic-run saturation, 20 steps at (3, 2))");
}

fn ladder_bounds_hold(ladder: &banach_forge::EmbeddingLadder) {
    for (n, rung) in ladder.stages.iter().enumerate() {
        let bound = banach_forge::rational::pow2_inv(n as u32);
        assert!(
            rung.roundtrip_defect < bound,
            "stage {n}: (1) defect {:?}",
            rung.roundtrip_defect
        );
        if n + 1 < ladder.stages.len() {
            assert!(rung.embed_drift < bound, "stage {n}: (2) drift");
            assert!(rung.retract_drift < bound, "stage {n}: (3) drift");
        }
    }
    assert!(ladder.cert.holds());
}

/// Criterion 7: three-stage sup-norm and sum-norm chains embed with the
/// strict 2^-n ladder bounds certified per stage.
#[test]
fn criterion_07_universality() {
    let cap = ComplexityBudget::new(3, 2, 8);
    let linf_chain = Chain::coordinate_chain(vec![
        PolyBanachSpace::linf(1),
        PolyBanachSpace::linf(2),
        PolyBanachSpace::linf(3),
    ])
    .unwrap();
    let mut run = GenericRun::new(1, cap.clone());
    run.extend(2).unwrap();
    let ladder = embed_chain(&mut run, &linf_chain, 3).unwrap();
    ladder_bounds_hold(&ladder);
    run.verify_ledger().unwrap();

    let l1_chain = Chain::coordinate_chain(vec![
        PolyBanachSpace::l1(1),
        PolyBanachSpace::l1(2),
        PolyBanachSpace::l1(3),
    ])
    .unwrap();
    let mut run = GenericRun::new(2, cap);
    run.extend(2).unwrap();
    let ladder = embed_chain(&mut run, &l1_chain, 3).unwrap();
    ladder_bounds_hold(&ladder);
    run.verify_ledger().unwrap();
    pass("criterion 7 (universality, sup and sum chains, 3 stages)");
}

/// Criterion 8: back-and-forth between two independently grown runs with
/// the trivial seed certifies the per-level conditions and the truncated
/// schedule inequality.
#[test]
fn criterion_08_homogeneity() {
    let cap = ComplexityBudget::new(3, 2, 8);
    let mut run_a = GenericRun::new(11, cap.clone());
    run_a.extend(2).unwrap();
    let mut run_b = GenericRun::new(22, cap);
    run_b.extend(3).unwrap();
    let seed = SeedIsometry::trivial(&run_a, &run_b);
    let eps = rat(1, 2);
    let state = back_and_forth(&mut run_a, &mut run_b, &seed, &eps, 4).unwrap();
    assert!(state.cert.holds());
    assert_eq!(state.stages.len(), 5);
    for (n, level) in state.stages[..4].iter().enumerate() {
        let eps_n = if n == 0 {
            state.eps_zero.clone()
        } else {
            state.schedule[n - 1].clone()
        };
        let back = level.cond_back.as_ref().unwrap();
        let forth = level.cond_forth.as_ref().unwrap();
        assert!(back < &eps_n, "level {n}: (5) {back:?} vs {eps_n:?}");
        assert!(forth < &eps_n, "level {n}: (6) {forth:?} vs {eps_n:?}");
    }
    // truncated schedule inequality, exactly
    let two = int(2);
    let sum: Rational = state.schedule.iter().fold(int(0), |a, b| a + b);
    let lhs = &two * &sum + &two * state.schedule.last().unwrap();
    assert!(lhs < eps.clone() - state.eps_zero.clone());
    // strictly increasing levels on both sides
    for w in state.stages.windows(2) {
        assert!(run_a.stage(w[0].a_stage).dim() < run_a.stage(w[1].a_stage).dim());
        assert!(run_b.stage(w[0].b_stage).dim() < run_b.stage(w[1].b_stage).dim());
    }
    run_a.verify_ledger().unwrap();
    run_b.verify_ledger().unwrap();
    pass("criterion 8 (homogeneity, trivial seed, eps = 1/2, 4 levels)");
}

/// Criterion 9: the Minkowski-functional LP agrees exactly with the
/// facet-intersection oracle on 200 seeded (space, point) pairs.
#[test]
fn criterion_09_oracle_equivalence() {
    let mut gen = SeededGen::new(0xC9);
    let mut checked = 0;
    while checked < 200 {
        let dim = 2 + (checked / 100); // 100 cases in dim 2, 100 in dim 3
        let space = gen.space(dim, 2);
        let dual = space.dual_ball().unwrap().clone();
        for _ in 0..10 {
            let x: Vec<Rational> = (0..dim).map(|_| gen.rational(3, 3)).collect();
            let lp_norm = space.norm(&x).unwrap();
            // Facet oracle: the gauge is the largest facet functional value.
            let facet_norm = dual
                .halfspaces()
                .iter()
                .map(|h| {
                    let num = h
                        .normal
                        .iter()
                        .zip(&x)
                        .fold(int(0), |acc, (a, b)| acc + a * b);
                    num / &h.offset
                })
                .max()
                .unwrap()
                .max(int(0));
            assert_eq!(lp_norm, facet_norm, "disagreement at {x:?}");
            checked += 1;
        }
    }
    pass("criterion 9 (oracle equivalence, 200 seeded pairs in dims 2-3)");
}
