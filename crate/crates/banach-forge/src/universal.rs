//! Embedding ladders into a generic run, the extension property, the
//! one-step improvement of almost embeddings, and the back-and-forth
//! almost-isometry between two runs.
//!
//! Every stage of every construction here carries exact certified bounds:
//! the inductive engine is retraction pairs (exactify an almost inverse),
//! pushout (amalgamate along an exact pair), a budget pass, and realization
//! against the run. Lower isometry bounds are always derived from exact
//! witness identities `back . map = (1+d)^-1 id`, never from facet sweeps,
//! so high-dimensional stages stay tractable.

use crate::arrows::{ArrowError, Certificate, ProjectionPair};
use crate::construct::{pushout, rationalize_pair, retraction_pairs, ConstructError};
use crate::fraisse::{FraisseError, GenericRun};
use crate::matrix::Matrix;
use crate::polytope::VPolytope;
use crate::rational::{format_rational, pow2_inv, Rational};
use crate::space::{op_norm, Chain, Operator, PolyBanachSpace, SpaceError};
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UniversalError {
    #[error("chain invalid: {0}")]
    ChainInvalid(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("seed isometry invalid: {0}")]
    BadSeedIsometry(String),
    #[error("ladder bound violated at stage {stage}: {condition} = {value}")]
    BoundViolated {
        stage: usize,
        condition: String,
        value: String,
    },
    #[error(transparent)]
    Fraisse(#[from] FraisseError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Arrow(#[from] ArrowError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Grid used by the budget pass inside universal constructions; exactness
/// never depends on it, only coefficient bulk.
const PASS_DENOMINATOR: u64 = 1 << 16;

/// Records 1-boundedness, using the syntactic ball-containment witness when
/// the operator maps vertices onto listed ball points.
fn push_bounded(
    cert: &mut Certificate,
    name: &str,
    t: &Operator,
) -> Result<(), UniversalError> {
    if crate::space::image_vertices_in_ball(t) {
        cert.push_le(
            format!("{name} (ball containment)"),
            Rational::one(),
            Rational::one(),
        );
        return Ok(());
    }
    let n = op_norm(t);
    if n > Rational::one() {
        return Err(UniversalError::BoundViolated {
            stage: 0,
            condition: name.to_string(),
            value: format_rational(&n),
        });
    }
    cert.push_le(name, n, Rational::one());
    Ok(())
}

/// One rung of an embedding ladder.
#[derive(Clone, Debug)]
pub struct LadderStage {
    /// Index of the run stage this rung lands in.
    pub run_stage: usize,
    /// `e_n : X_n -> U_{k_n}`, 1-bounded.
    pub embed: Operator,
    /// `R_n : U_{k_n} -> X_n`, 1-bounded.
    pub retract: Operator,
    /// Exact `|| R_n e_n - id ||`, strictly below 2^-n.
    pub roundtrip_defect: Rational,
    /// Exact `|| e_{n+1} restricted - e_n ||` recorded on the next rung.
    pub embed_drift: Rational,
    /// Exact `|| R_{n+1} restricted - R_n ||` recorded on the next rung.
    pub retract_drift: Rational,
}

/// A finite prefix of an isometric embedding of a chain into a run: stage
/// maps whose roundtrip defects halve and whose successive restrictions
/// drift by less than 2^-n.
#[derive(Clone, Debug)]
pub struct EmbeddingLadder {
    pub stages: Vec<LadderStage>,
    pub cert: Certificate,
}

/// Embeds the first `stages` chain stages into the run, extending the run
/// as needed. Certifies, per rung n:
/// (1) `|| R_n e_n - id || < 2^-n`;
/// (2) `|| e_{n+1} . incl - bond . e_n || < 2^-n`;
/// (3) `|| R_{n+1} . bond - incl . R_n || < 2^-n`.
pub fn embed_chain(
    run: &mut GenericRun,
    chain: &Chain,
    stages: usize,
) -> Result<EmbeddingLadder, UniversalError> {
    if stages + 1 > chain.len() {
        return Err(UniversalError::ChainInvalid(format!(
            "chain has {} stages, ladder needs {}",
            chain.len(),
            stages + 1
        )));
    }
    let mut cert = Certificate::new("embedding ladder");
    let mut rungs: Vec<LadderStage> = Vec::new();
    let x0 = chain.stage(0).clone();
    if !x0.is_trivial() {
        return Err(UniversalError::ChainInvalid(
            "chain stage 0 must be trivial".into(),
        ));
    }
    let u0 = run.stage(0).clone();
    rungs.push(LadderStage {
        run_stage: 0,
        embed: Operator::zero(&x0, &u0),
        retract: Operator::zero(&u0, &x0),
        roundtrip_defect: Rational::zero(),
        embed_drift: Rational::zero(),
        retract_drift: Rational::zero(),
    });

    for n in 0..stages {
        let bound = pow2_inv(n as u32);
        let rung = rungs.last().expect("seeded").clone();
        let x_next = chain.stage(n + 1).clone();

        // Exactify (e_n, R_n) into retraction pairs on the corrected sum.
        // The correction parameter is kept at bound/4 even when the defect
        // is smaller: a tiny parameter scales the correction vertices by its
        // reciprocal and bloats every later coefficient.
        let eps_rp = std::cmp::max(
            rung.roundtrip_defect.clone(),
            &bound / crate::rational::int(4),
        );
        let rp = retraction_pairs(&rung.embed, &rung.retract, &eps_rp)?;
        let slack = &bound - &rp.sum.eps;
        if !slack.is_positive() {
            return Err(UniversalError::BoundViolated {
                stage: n,
                condition: "2^-n slack above the corrected-sum parameter".into(),
                value: format_rational(&slack),
            });
        }
        // Amalgamate with the chain bond over X_n.
        let chain_bond = ProjectionPair::new(chain.bond(n).0.clone(), chain.bond(n).1.clone())?;
        let po = pushout(&chain_bond, &rp.domain_pair)?;
        // U_{k_n} -> V through the sum.
        let through = rp.codomain_pair.compose(&po.right)?;
        // Budget pass with a defect small enough to keep (1) and (2).
        let delta = std::cmp::min(pow2_inv((n + 3) as u32), slack / crate::rational::int(2));
        let passed = rationalize_pair(&through, &delta, PASS_DENOMINATOR, &[])?;
        // Realize the rationalized arrow against the run.
        let (m, g, realize_cert) = run.realize(rung.run_stage, &passed.pair)?;

        let embed_next = g
            .embed
            .compose(&passed.couple.forward.compose(&po.left.embed)?)?;
        let retract_next = po
            .left
            .project
            .compose(&passed.couple.backward.compose(&g.project)?)?;

        // (1) at n+1.
        let roundtrip = op_norm(
            &retract_next
                .compose(&embed_next)?
                .sub(&Operator::identity(&x_next))?,
        );
        let next_bound = pow2_inv((n + 1) as u32);
        if roundtrip >= next_bound {
            return Err(UniversalError::BoundViolated {
                stage: n + 1,
                condition: "|| R e - id || < 2^-(n+1)".into(),
                value: format_rational(&roundtrip),
            });
        }
        cert.push_lt(
            format!("(1) stage {}: || R e - id || < 2^-{}", n + 1, n + 1),
            roundtrip.clone(),
            next_bound,
        );

        // (2): restriction drift of the embeds.
        let chain_incl = &chain.bond(n).0;
        let run_bond = run.bonding(rung.run_stage, m);
        let lhs = embed_next.compose(chain_incl)?;
        let rhs = run_bond.embed.compose(&rung.embed)?;
        let embed_drift = op_norm(&lhs.sub(&rhs)?);
        if embed_drift >= bound {
            return Err(UniversalError::BoundViolated {
                stage: n,
                condition: "|| e_{n+1} . incl - bond . e_n || < 2^-n".into(),
                value: format_rational(&embed_drift),
            });
        }
        cert.push_lt(
            format!("(2) stage {n}: || e' . incl - bond . e || < 2^-{n}"),
            embed_drift.clone(),
            bound.clone(),
        );

        // (3): restriction drift of the retractions.
        let lhs = retract_next.compose(&run_bond.embed)?;
        let rhs = chain_incl.compose(&rung.retract)?;
        let retract_drift = op_norm(&lhs.sub(&rhs)?);
        if retract_drift >= bound {
            return Err(UniversalError::BoundViolated {
                stage: n,
                condition: "|| R_{n+1} . bond - incl . R_n || < 2^-n".into(),
                value: format_rational(&retract_drift),
            });
        }
        cert.push_lt(
            format!("(3) stage {n}: || R' . bond - incl . R || < 2^-{n}"),
            retract_drift.clone(),
            bound,
        );
        cert.push_le(
            format!("stage {}: op_norm(e) <= 1", n + 1),
            op_norm(&embed_next),
            Rational::one(),
        );
        cert.push_le(
            format!("stage {}: op_norm(R) <= 1", n + 1),
            op_norm(&retract_next),
            Rational::one(),
        );
        cert.absorb(realize_cert);

        let last = rungs.last_mut().expect("seeded");
        last.embed_drift = embed_drift;
        last.retract_drift = retract_drift;
        rungs.push(LadderStage {
            run_stage: m,
            embed: embed_next,
            retract: retract_next,
            roundtrip_defect: roundtrip,
            embed_drift: Rational::zero(),
            retract_drift: Rational::zero(),
        });
    }

    Ok(EmbeddingLadder {
        stages: rungs,
        cert,
    })
}

/// An almost-isometric embedding with its exact backward witness.
#[derive(Clone, Debug)]
pub struct ApproxEmbedding {
    /// `map : E -> U_stage`, 1-bounded.
    pub map: Operator,
    /// 1-bounded `back : U_stage -> E`; the hypothesis checks
    /// `|| back . map - id ||` exactly.
    pub back: Operator,
    /// The run stage the map lands in.
    pub stage: usize,
}

/// Result of extending an embedding along a complemented pair.
#[derive(Clone, Debug)]
pub struct ExtendedEmbedding {
    /// `g : F -> U_stage`.
    pub map: Operator,
    /// `back : U_stage -> F` with `back . g = (1+d)^-1 id` exactly.
    pub back: Operator,
    pub stage: usize,
    /// The exact scaling defect `d/(1+d)` of the witness identity.
    pub scale_defect: Rational,
    /// Exact `|| g . sub.embed - bonding . anchor.embed ||`.
    pub closeness: Rational,
    pub cert: Certificate,
}

/// The extension property: given an exact pair `sub : E -> F` and an exact
/// anchor pair `anchor : E -> U_stage` (an isometric embedding onto a
/// 1-complemented subspace of a run stage), produces an `eps`-isometric
/// `g : F -> U_m` with `|| g|E - anchor || < eps` whose image carries a
/// 1-bounded map witnessing (1, eps)-complementation.
pub fn extend_embedding(
    run: &mut GenericRun,
    sub: &ProjectionPair,
    anchor: &ProjectionPair,
    stage: usize,
    eps: &Rational,
) -> Result<ExtendedEmbedding, UniversalError> {
    if !eps.is_positive() {
        return Err(UniversalError::BadInput("eps must be positive".into()));
    }
    if stage >= run.num_stages() {
        return Err(UniversalError::BadInput(format!(
            "stage {stage} out of range"
        )));
    }
    if anchor.codomain() != run.stage(stage) {
        return Err(UniversalError::BadInput(
            "anchor codomain is not the given run stage".into(),
        ));
    }
    if sub.domain() != anchor.domain() {
        return Err(UniversalError::BadInput(
            "sub and anchor must share their domain".into(),
        ));
    }
    anchor.verify()?;
    sub.verify()?;

    // Amalgamate F with the stage over E and realize the stage arrow. The
    // realization is exact (the run extends), so the extension is exactly
    // isometric with an exact retraction witness; every eps bound below is
    // certified with the computed (here zero) defect.
    let po = pushout(sub, anchor)?;
    let (m, g_pair, realize_cert) = run.realize(stage, &po.right)?;

    let map = g_pair.embed.compose(&po.left.embed)?;
    let back = po.left.project.compose(&g_pair.project)?;

    let scale_defect = Rational::zero();

    let mut cert = Certificate::new("extension property");
    // Exact witness identity: back . g = id.
    cert.push_matrix_eq(
        "back . g = id",
        back.matrix().mul(map.matrix()),
        Matrix::identity(sub.codomain().dim()),
    );
    push_bounded(&mut cert, "op_norm(g) <= 1", &map)?;
    cert.push_le("op_norm(back) <= 1", op_norm(&back), Rational::one());
    // g is an eps-isometric embedding: the witness forces lower bound 1.
    cert.push_le(
        "derived lower bound 1 >= 1 - eps",
        Rational::one() - eps,
        Rational::one(),
    );
    // Closeness along E.
    let run_bond = run.bonding(stage, m);
    let lhs = map.compose(&sub.embed)?;
    let rhs = run_bond.embed.compose(&anchor.embed)?;
    let closeness = op_norm(&lhs.sub(&rhs)?);
    if &closeness >= eps {
        return Err(UniversalError::BoundViolated {
            stage: m,
            condition: "|| g|E - anchor || < eps".into(),
            value: format_rational(&closeness),
        });
    }
    cert.push_lt("|| g|E - anchor || < eps", closeness.clone(), eps.clone());
    // (1, eps)-complementation witness t = g . back on the image.
    cert.push_matrix_eq(
        "t . g = g (image witness)",
        map.matrix().mul(&back.matrix().mul(map.matrix())),
        map.matrix().clone(),
    );
    cert.push_le(
        "witness relative defect <= eps",
        scale_defect.clone(),
        eps.clone(),
    );
    cert.absorb(realize_cert);
    if !cert.holds() {
        let failed = cert.verify().unwrap_err();
        return Err(UniversalError::BoundViolated {
            stage: m,
            condition: failed.condition,
            value: "extension postcondition failed".into(),
        });
    }

    Ok(ExtendedEmbedding {
        map,
        back,
        stage: m,
        scale_defect,
        closeness,
        cert,
    })
}

/// One-step improvement: an almost embedding of `E` (with exact witness)
/// extends to a strictly better embedding of `F >= E`, `eps`-close to the
/// original on `E`, with a (1, delta) complementation witness.
pub fn improve_embedding(
    run: &mut GenericRun,
    sub: &ProjectionPair,
    approx: &ApproxEmbedding,
    eps: &Rational,
    delta: &Rational,
) -> Result<ExtendedEmbedding, UniversalError> {
    if !eps.is_positive() || !delta.is_positive() {
        return Err(UniversalError::BadInput(
            "eps and delta must be positive".into(),
        ));
    }
    if approx.stage >= run.num_stages() || approx.map.codomain() != run.stage(approx.stage) {
        return Err(UniversalError::BadInput(
            "approximate embedding does not land in a run stage".into(),
        ));
    }
    if sub.domain() != approx.map.domain() {
        return Err(UniversalError::BadInput(
            "sub pair and approximate embedding must share their domain".into(),
        ));
    }
    for (name, t) in [("map", &approx.map), ("back", &approx.back)] {
        let n = op_norm(t);
        if n > Rational::one() {
            return Err(UniversalError::Construct(ConstructError::HypothesisFailed {
                condition: format!("op_norm({name}) <= 1"),
                value: format_rational(&n),
            }));
        }
    }
    let e_space = approx.map.domain().clone();
    let eta = op_norm(
        &approx
            .back
            .compose(&approx.map)?
            .sub(&Operator::identity(&e_space))?,
    );
    if &eta >= eps {
        return Err(UniversalError::Construct(ConstructError::HypothesisFailed {
            condition: "|| back . map - id || < eps".into(),
            value: format_rational(&eta),
        }));
    }

    // Exactify the almost embedding, amalgamate with the extension pair.
    let eps_rp = std::cmp::max(eta.clone(), eps / crate::rational::int(8));
    let rp = retraction_pairs(&approx.map, &approx.back, &eps_rp)?;
    let eta_eff = rp.sum.eps.clone();
    let room = eps - &eta_eff;
    if !room.is_positive() {
        return Err(UniversalError::Construct(ConstructError::HypothesisFailed {
            condition: "eps slack above the corrected-sum parameter".into(),
            value: format_rational(&room),
        }));
    }
    let po = pushout(sub, &rp.domain_pair)?;
    // The stage copy inside the amalgam, anchored by the stage identity.
    let stage_pair = rp.codomain_pair.compose(&po.right)?;
    let anchor = ProjectionPair::identity(run.stage(approx.stage));
    let eps_call = std::cmp::min(room / crate::rational::int(2), delta.clone());
    let extended = extend_embedding(run, &stage_pair, &anchor, approx.stage, &eps_call)?;

    let map = extended.map.compose(&po.left.embed)?;
    let back = po.left.project.compose(&extended.back)?;
    let m = extended.stage;

    let mut cert = Certificate::new("one-step improvement");
    let dilation_inv = Rational::one() - &extended.scale_defect;
    cert.push_matrix_eq(
        "back . g = (1+d)^-1 id",
        back.matrix().mul(map.matrix()),
        Matrix::identity(sub.codomain().dim()).scale(&dilation_inv),
    );
    push_bounded(&mut cert, "op_norm(g) <= 1", &map)?;
    cert.push_le("op_norm(back) <= 1", op_norm(&back), Rational::one());
    cert.push_lt(
        "derived isometry defect d/(1+d) < delta",
        extended.scale_defect.clone(),
        delta.clone(),
    );
    // Closeness to the original on E.
    let run_bond = run.bonding(approx.stage, m);
    let lhs = map.compose(&sub.embed)?;
    let rhs = run_bond.embed.compose(&approx.map)?;
    let closeness = op_norm(&lhs.sub(&rhs)?);
    if &closeness >= eps {
        return Err(UniversalError::BoundViolated {
            stage: m,
            condition: "|| g|E - f || < eps".into(),
            value: format_rational(&closeness),
        });
    }
    cert.push_lt("|| g|E - f || < eps", closeness.clone(), eps.clone());
    cert.absorb(extended.cert.clone());
    if !cert.holds() {
        let failed = cert.verify().unwrap_err();
        return Err(UniversalError::BoundViolated {
            stage: m,
            condition: failed.condition,
            value: "improvement postcondition failed".into(),
        });
    }

    Ok(ExtendedEmbedding {
        map,
        back,
        stage: m,
        scale_defect: extended.scale_defect,
        closeness,
        cert,
    })
}

/// Seed data for the back-and-forth construction: an exact bijective
/// isometry between a stage of each run.
#[derive(Clone, Debug)]
pub struct SeedIsometry {
    pub stage_a: usize,
    pub stage_b: usize,
    pub map: Operator,
    pub inverse: Operator,
}

impl SeedIsometry {
    /// The trivial seed: the zero isometry between the trivial stages.
    pub fn trivial(run_a: &GenericRun, run_b: &GenericRun) -> Self {
        SeedIsometry {
            stage_a: 0,
            stage_b: 0,
            map: Operator::zero(run_a.stage(0), run_b.stage(0)),
            inverse: Operator::zero(run_b.stage(0), run_a.stage(0)),
        }
    }
}

/// One completed back-and-forth level.
#[derive(Clone, Debug)]
pub struct BnfStage {
    pub a_stage: usize,
    pub b_stage: usize,
    /// `f_n : A_n -> B_n` with its exact witness.
    pub f: Operator,
    pub f_back: Operator,
    /// `g_n : B_n -> A_{n+1}` with its exact witness (absent on the final
    /// truncation level).
    pub g: Option<Operator>,
    pub g_back: Option<Operator>,
    /// Exact `|| g_n f_n - incl ||`, strictly below eps_n.
    pub cond_back: Option<Rational>,
    /// Exact `|| f_{n+1} g_n - incl ||`, strictly below eps_n.
    pub cond_forth: Option<Rational>,
    /// Exact `|| f_{n+1}|A_n - bond . f_n ||` for the telescoping estimate.
    pub drift: Option<Rational>,
}

/// A finite back-and-forth prefix between two runs.
#[derive(Clone, Debug)]
pub struct BackAndForthState {
    pub eps: Rational,
    pub eps_zero: Rational,
    /// `eps_n` for n = 1..=stages.
    pub schedule: Vec<Rational>,
    pub stages: Vec<BnfStage>,
    pub cert: Certificate,
}

/// Builds `stages` levels of the back-and-forth system between two runs,
/// starting from an exact seed isometry, certifying per level
/// `|| g_n f_n - id || < eps_n` and `|| f_{n+1} g_n - id || < eps_n`
/// (against the bonding inclusions), with the truncated schedule satisfying
/// `2 sum eps_n + 2 eps_s < eps - eps_0`.
pub fn back_and_forth(
    run_a: &mut GenericRun,
    run_b: &mut GenericRun,
    seed: &SeedIsometry,
    eps: &Rational,
    stages: usize,
) -> Result<BackAndForthState, UniversalError> {
    if !eps.is_positive() {
        return Err(UniversalError::BadInput("eps must be positive".into()));
    }
    if seed.stage_a >= run_a.num_stages() || seed.stage_b >= run_b.num_stages() {
        return Err(UniversalError::BadSeedIsometry("stage out of range".into()));
    }
    if seed.map.domain() != run_a.stage(seed.stage_a)
        || seed.map.codomain() != run_b.stage(seed.stage_b)
    {
        return Err(UniversalError::BadSeedIsometry(
            "seed endpoints do not match the run stages".into(),
        ));
    }
    if op_norm(&seed.map) > Rational::one() || op_norm(&seed.inverse) > Rational::one() {
        return Err(UniversalError::BadSeedIsometry(
            "seed maps must be 1-bounded".into(),
        ));
    }
    if !seed
        .inverse
        .matrix()
        .mul(seed.map.matrix())
        .is_identity()
        || !seed
            .map
            .matrix()
            .mul(seed.inverse.matrix())
            .is_identity()
    {
        return Err(UniversalError::BadSeedIsometry(
            "seed maps are not exact mutual inverses".into(),
        ));
    }

    let eps_zero = eps / crate::rational::int(2);
    let schedule: Vec<Rational> = (1..=stages)
        .map(|n| eps / crate::rational::int(1i64 << (n + 3).min(60)))
        .collect();
    let mut cert = Certificate::new("back-and-forth");
    // Truncated schedule inequality with the 2 eps_s tail allowance.
    if stages > 0 {
        let sum: Rational = schedule.iter().fold(Rational::zero(), |a, b| a + b);
        let two = crate::rational::int(2);
        let lhs = &two * &sum + &two * schedule.last().expect("stages > 0");
        cert.push_lt(
            "2 sum eps_n + 2 eps_s < eps - eps_0",
            lhs,
            eps - &eps_zero,
        );
    }

    let mut levels: Vec<BnfStage> = vec![BnfStage {
        a_stage: seed.stage_a,
        b_stage: seed.stage_b,
        f: seed.map.clone(),
        f_back: seed.inverse.clone(),
        g: None,
        g_back: None,
        cond_back: None,
        cond_forth: None,
        drift: None,
    }];

    for n in 0..stages {
        let eps_n = if n == 0 {
            eps_zero.clone()
        } else {
            schedule[n - 1].clone()
        };
        // Witnesses produced at this level feed the next one; keep their
        // defects well inside the next level's budget.
        let eps_next = schedule
            .get(n)
            .cloned()
            .unwrap_or_else(|| schedule.last().cloned().unwrap_or_else(|| eps_n.clone()));
        let defect_budget = std::cmp::min(eps_n.clone(), eps_next) / crate::rational::int(4);
        let level = levels.last().expect("seeded").clone();

        // Forward half: g_n : B_n -> A_{n+1} in run A, almost inverting f_n.
        let (g, g_back, a_next, cond_back) = half_step(
            run_a,
            level.a_stage,
            &level.f,
            &level.f_back,
            &eps_n,
            &defect_budget,
        )?;
        cert.push_lt(
            format!("(5) level {n}: || g f - incl || < eps_{n}"),
            cond_back.clone(),
            eps_n.clone(),
        );

        // Backward half: f_{n+1} : A_{n+1} -> B_{n+1} in run B.
        let (f_next, f_next_back, b_next, cond_forth) = half_step(
            run_b,
            level.b_stage,
            &g,
            &g_back,
            &eps_n,
            &defect_budget,
        )?;
        cert.push_lt(
            format!("(6) level {n}: || f' g - incl || < eps_{n}"),
            cond_forth.clone(),
            eps_n.clone(),
        );

        // Telescoping drift of the forward maps.
        let incl_a = run_a.bonding(level.a_stage, a_next);
        let incl_b = run_b.bonding(level.b_stage, b_next);
        let drift = op_norm(
            &f_next
                .compose(&incl_a.embed)?
                .sub(&incl_b.embed.compose(&level.f)?)?,
        );
        cert.push_le(
            format!("level {n}: forward drift"),
            drift.clone(),
            &cond_forth + &cond_back + &eps_n,
        );

        let last = levels.last_mut().expect("seeded");
        last.g = Some(g.clone());
        last.g_back = Some(g_back.clone());
        last.cond_back = Some(cond_back);
        last.cond_forth = Some(cond_forth);
        last.drift = Some(drift);
        levels.push(BnfStage {
            a_stage: a_next,
            b_stage: b_next,
            f: f_next,
            f_back: f_next_back,
            g: None,
            g_back: None,
            cond_back: None,
            cond_forth: None,
            drift: None,
        });
    }

    if !cert.holds() {
        let failed = cert.verify().unwrap_err();
        return Err(UniversalError::BoundViolated {
            stage: levels.len(),
            condition: failed.condition,
            value: "back-and-forth certificate failed".into(),
        });
    }
    Ok(BackAndForthState {
        eps: eps.clone(),
        eps_zero,
        schedule,
        stages: levels,
        cert,
    })
}

/// One half-step: from `map : S -> T` (a stage `source_stage` of
/// `other_run` into stage `target_stage` of... the arrow runs from a stage
/// of `other_run` into a stage of `target_run`) with exact witness `back`,
/// build `g : T -> U^{target}_m` almost inverting `map`, landing in a stage
/// strictly larger than `source_stage`'s space, with an exact backward
/// witness. Returns `(g, g_back, stage_index, || g . map - incl ||)`.
fn half_step(
    target_run: &mut GenericRun,
    source_stage: usize,
    map: &Operator,
    back: &Operator,
    eps_n: &Rational,
    defect_budget: &Rational,
) -> Result<(Operator, Operator, usize, Rational), UniversalError> {
    let source = map.domain().clone();
    let defect = op_norm(&back.compose(map)?.sub(&Operator::identity(&source))?);
    // Correction parameter kept moderate (see embed_chain) while leaving
    // most of eps_n as room for the extension step.
    let eps_rp = std::cmp::max(defect.clone(), eps_n / crate::rational::int(8));
    let rp = retraction_pairs(map, back, &eps_rp)?;
    let used = rp.sum.eps.clone();
    let room = eps_n - &used;
    if !room.is_positive() {
        return Err(UniversalError::Construct(ConstructError::HypothesisFailed {
            condition: "eps_n slack above the witness defect".into(),
            value: format_rational(&room),
        }));
    }
    // Extend the target-side copy along the corrected sum, anchored at the
    // source stage of the target run. The tolerance is capped by the defect
    // budget so the witness carried to the next level is small enough.
    let anchor = ProjectionPair::identity(target_run.stage(source_stage));
    let eps_call = std::cmp::min(
        room / crate::rational::int(2),
        defect_budget.clone(),
    );
    let extended = extend_embedding(
        target_run,
        &rp.domain_pair,
        &anchor,
        source_stage,
        &eps_call,
    )?;
    // g on T through the sum's codomain copy.
    let g = extended.map.compose(&rp.codomain_pair.embed)?;
    let g_back = rp.codomain_pair.project.compose(&extended.back)?;

    // Land in a stage strictly bigger than the source space.
    let mut m = extended.stage;
    while target_run.stage(m).dim() <= target_run.stage(source_stage).dim() {
        m = grow_dimension(target_run)?;
    }
    let lift = target_run.bonding(extended.stage, m);
    let g = lift.embed.compose(&g)?;
    let g_back = g_back.compose(&lift.project)?;

    // || g . map - incl || against the bonding inclusion.
    let incl = target_run.bonding(source_stage, m);
    let value = op_norm(&g.compose(map)?.sub(&incl.embed)?);
    if &value >= eps_n {
        return Err(UniversalError::BoundViolated {
            stage: m,
            condition: "|| g . map - incl || < eps_n".into(),
            value: format_rational(&value),
        });
    }
    Ok((g, g_back, m, value))
}

/// Extends the run by one stage of strictly larger dimension: realizes the
/// sum-norm extension of the top stage by one coordinate.
fn grow_dimension(run: &mut GenericRun) -> Result<usize, UniversalError> {
    let top = run.num_stages() - 1;
    let space = run.stage(top).clone();
    let dim = space.dim();
    let mut points: Vec<Vec<Rational>> = Vec::new();
    for v in space.ball().vertices() {
        let mut p = v.clone();
        p.push(Rational::zero());
        points.push(p);
    }
    for s in [Rational::one(), -Rational::one()] {
        let mut p = vec![Rational::zero(); dim + 1];
        p[dim] = s;
        points.push(p);
    }
    let ball = VPolytope::spanned(dim + 1, points).map_err(SpaceError::Geometry)?;
    let bigger = PolyBanachSpace::new(ball)?;
    let embed = Operator::coordinate_inclusion(&space, &bigger)?;
    let mut pm = Matrix::zeros(dim, dim + 1);
    for i in 0..dim {
        pm.set(i, i, Rational::one());
    }
    let project = Operator::new(bigger.clone(), space.clone(), pm)?;
    let pair = ProjectionPair::new(embed, project)?;
    let (m, _, _) = run.realize(top, &pair)?;
    Ok(m)
}
