//! The four core constructions: the corrected sum of an almost isometry, the
//! exact retraction pairs it yields, the amalgamation pushout, and the two
//! rationalization passes that keep coefficients inside a denominator budget.
//!
//! Every construction returns a [`Certificate`] recording the exact rational
//! identities and inequalities it established.

use crate::arrows::{ArrowError, Certificate, OperatorCouple, ProjectionPair};
use crate::matrix::Matrix;
use crate::polytope::{convex_hull, GeometryError, VPolytope};
use crate::rational::{format_rational, pow2_inv, round_to_grid, Rational};
use crate::space::{op_norm, Operator, PolyBanachSpace, SpaceError};
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConstructError {
    #[error("epsilon must satisfy {requirement}, got {eps}")]
    InvalidEpsilon { requirement: String, eps: String },
    #[error(
        "map is not an eps-isometry for eps = {eps}: op_norm = {op}, lower bound = {lower} at witness {witness}"
    )]
    NotEpsIsometry {
        eps: String,
        op: String,
        lower: String,
        witness: String,
    },
    #[error("hypothesis failed: {condition} = {value}")]
    HypothesisFailed { condition: String, value: String },
    #[error("denominator budget {denominator} too coarse for eps = {eps}")]
    BudgetTooCoarse { denominator: u64, eps: String },
    #[error("domain mismatch: {context}")]
    DomainMismatch { context: String },
    #[error(transparent)]
    Arrow(#[from] ArrowError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Above this many candidate points, balls keep their spanning set instead
/// of the minimal vertex set; norms stay exact either way.
const MINIMIZE_LIMIT: usize = 64;

/// Hull of `points`, zeros dropped, minimized when small enough.
pub(crate) fn ball_from_points(
    dim: usize,
    points: Vec<Vec<Rational>>,
) -> Result<VPolytope, GeometryError> {
    if dim == 0 {
        return VPolytope::spanned(0, vec![vec![]]);
    }
    let nonzero: Vec<Vec<Rational>> = points
        .into_iter()
        .filter(|p| p.iter().any(|x| !x.is_zero()))
        .collect();
    if nonzero.len() <= MINIMIZE_LIMIT {
        convex_hull(dim, nonzero)
    } else {
        VPolytope::spanned(dim, nonzero)
    }
}

fn concat(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

/// The direct sum `X (+) Y` carrying the corrected norm for an almost
/// isometry `f: X -> Y`: both canonical embeddings are exactly isometric and
/// the embedded copies are `eps`-close along `f`.
#[derive(Clone, Debug)]
pub struct CorrectedSum {
    pub space: PolyBanachSpace,
    /// `i : X -> X (+) Y`, isometric.
    pub embed_domain: Operator,
    /// `j : Y -> X (+) Y`, isometric.
    pub embed_codomain: Operator,
    /// The map the sum corrects.
    pub map: Operator,
    pub eps: Rational,
    /// Exact value of `|| j . f - i ||`, at most `eps`.
    pub defect: Rational,
    pub cert: Certificate,
}

/// Checked entry point: requires `f` to be an exact `eps`-isometry.
pub fn corrected_sum(f: &Operator, eps: &Rational) -> Result<CorrectedSum, ConstructError> {
    if !eps.is_positive() {
        return Err(ConstructError::InvalidEpsilon {
            requirement: "eps > 0".into(),
            eps: format_rational(eps),
        });
    }
    let op = op_norm(f);
    let (lower, witness) = crate::space::lower_isometry_bound_with_witness(f)?;
    if op > Rational::one() || lower < Rational::one() - eps {
        return Err(ConstructError::NotEpsIsometry {
            eps: format_rational(eps),
            op: format_rational(&op),
            lower: format_rational(&lower),
            witness: crate::rational::format_point(&witness),
        });
    }
    corrected_sum_unchecked(f, eps)
}

/// Builds the sum without re-deriving the `eps`-isometry hypothesis; used by
/// [`retraction_pairs`], whose almost-inverse hypothesis already implies it.
pub(crate) fn corrected_sum_unchecked(
    f: &Operator,
    eps: &Rational,
) -> Result<CorrectedSum, ConstructError> {
    let x = f.domain().clone();
    let y = f.codomain().clone();
    let (dx, dy) = (x.dim(), y.dim());
    let dim = dx + dy;

    let mut points: Vec<Vec<Rational>> = Vec::new();
    let zero_x = vec![Rational::zero(); dx];
    let zero_y = vec![Rational::zero(); dy];
    for v in x.ball().vertices() {
        points.push(concat(v, &zero_y));
    }
    for u in y.ball().vertices() {
        points.push(concat(&zero_x, u));
    }
    let inv_eps = eps.recip();
    for v in x.ball().vertices() {
        let w: Vec<Rational> = v.iter().map(|c| c * &inv_eps).collect();
        let image: Vec<Rational> = f.apply(&w).iter().map(|c| -c).collect();
        points.push(concat(&w, &image));
    }
    let ball = ball_from_points(dim, points)?;
    let space = PolyBanachSpace::new(ball)?;

    let mut im = Matrix::zeros(dim, dx);
    for k in 0..dx {
        im.set(k, k, Rational::one());
    }
    let mut jm = Matrix::zeros(dim, dy);
    for k in 0..dy {
        jm.set(dx + k, k, Rational::one());
    }
    let i = Operator::new(x.clone(), space.clone(), im)?;
    let j = Operator::new(y.clone(), space.clone(), jm)?;

    let mut cert = Certificate::new("corrected sum");
    let i_norm = op_norm(&i);
    let j_norm = op_norm(&j);
    if x.is_trivial() {
        cert.push_eq("embed of trivial domain", i_norm, Rational::zero());
    } else {
        cert.push_eq("op_norm(i) = 1", i_norm, Rational::one());
    }
    if y.is_trivial() {
        cert.push_eq("embed of trivial codomain", j_norm, Rational::zero());
    } else {
        cert.push_eq("op_norm(j) = 1", j_norm, Rational::one());
    }
    let defect = op_norm(&j.compose(f)?.sub(&i)?);
    cert.push_le("||j . f - i|| <= eps", defect.clone(), eps.clone());

    Ok(CorrectedSum {
        space,
        embed_domain: i,
        embed_codomain: j,
        map: f.clone(),
        eps: eps.clone(),
        defect,
        cert,
    })
}

impl CorrectedSum {
    /// The unique 1-bounded factorization: given 1-bounded `k : X -> V` and
    /// `l : Y -> V` with `|| l . f - k || <= eps`, returns the operator `h`
    /// on the sum with `h . i = k` and `h . j = l`, certified 1-bounded.
    pub fn factor(
        &self,
        k: &Operator,
        l: &Operator,
    ) -> Result<(Operator, Certificate), ConstructError> {
        if k.domain() != self.map.domain()
            || l.domain() != self.map.codomain()
            || k.codomain() != l.codomain()
        {
            return Err(ConstructError::DomainMismatch {
                context: "factor requires k : X -> V and l : Y -> V".into(),
            });
        }
        for (name, t) in [("k", k), ("l", l)] {
            let n = op_norm(t);
            if n > Rational::one() {
                return Err(ConstructError::HypothesisFailed {
                    condition: format!("op_norm({name}) <= 1"),
                    value: format_rational(&n),
                });
            }
        }
        let hypothesis = op_norm(&l.compose(&self.map)?.sub(k)?);
        if hypothesis > self.eps {
            return Err(ConstructError::HypothesisFailed {
                condition: "|| l . f - k || <= eps".into(),
                value: format_rational(&hypothesis),
            });
        }
        let h = Operator::new(
            self.space.clone(),
            k.codomain().clone(),
            k.matrix().hconcat(l.matrix()),
        )?;
        let mut cert = Certificate::new("sum factorization");
        cert.push_matrix_eq(
            "h . i = k",
            h.matrix().mul(self.embed_domain.matrix()),
            k.matrix().clone(),
        );
        cert.push_matrix_eq(
            "h . j = l",
            h.matrix().mul(self.embed_codomain.matrix()),
            l.matrix().clone(),
        );
        cert.push_le("|| l . f - k || <= eps", hypothesis, self.eps.clone());
        cert.push_le("op_norm(h) <= 1", op_norm(&h), Rational::one());
        if !cert.holds() {
            let failed = cert.verify().unwrap_err();
            return Err(ConstructError::HypothesisFailed {
                condition: failed.condition,
                value: "factorization postcondition failed".into(),
            });
        }
        Ok((h, cert))
    }
}

/// Exact projection pairs obtained from an almost inverse.
#[derive(Clone, Debug)]
pub struct RetractionPairs {
    /// `X (+) Y` with the corrected norm.
    pub sum: CorrectedSum,
    /// `(i, P) : X -> W` with `P . j = backward`.
    pub domain_pair: ProjectionPair,
    /// `(j, Q) : Y -> W` with `Q . i = forward`.
    pub codomain_pair: ProjectionPair,
    /// Exact `|| backward . forward - id ||`.
    pub defect: Rational,
    pub cert: Certificate,
}

/// Given 1-bounded `forward : X -> Y`, `backward : Y -> X` with
/// `|| backward . forward - id || <= eps`, produces the corrected sum `W`
/// and exact pairs `(i, P)`, `(j, Q)` with `P i = id`, `Q j = id`,
/// `P j = backward`, `Q i = forward`. An `eps` of zero selects the fixed
/// floor 2^-20 for the sum construction (the correction set needs a
/// strictly positive parameter).
pub fn retraction_pairs(
    forward: &Operator,
    backward: &Operator,
    eps: &Rational,
) -> Result<RetractionPairs, ConstructError> {
    if eps.is_negative() {
        return Err(ConstructError::InvalidEpsilon {
            requirement: "eps >= 0".into(),
            eps: format_rational(eps),
        });
    }
    if forward.domain() != backward.codomain() || forward.codomain() != backward.domain() {
        return Err(ConstructError::DomainMismatch {
            context: "retraction pairs need forward : X -> Y, backward : Y -> X".into(),
        });
    }
    for (name, t) in [("forward", forward), ("backward", backward)] {
        let n = op_norm(t);
        if n > Rational::one() {
            return Err(ConstructError::HypothesisFailed {
                condition: format!("op_norm({name}) <= 1"),
                value: format_rational(&n),
            });
        }
    }
    let x = forward.domain().clone();
    let defect = op_norm(&backward.compose(forward)?.sub(&Operator::identity(&x))?);
    if &defect > eps {
        return Err(ConstructError::HypothesisFailed {
            condition: "|| backward . forward - id || <= eps".into(),
            value: format_rational(&defect),
        });
    }
    let eps_eff = if eps.is_zero() { pow2_inv(20) } else { eps.clone() };
    let sum = corrected_sum_unchecked(forward, &eps_eff)?;
    let (p, p_cert) = sum.factor(&Operator::identity(&x), backward)?;
    let (q, q_cert) = sum.factor(forward, &Operator::identity(forward.codomain()))?;
    let domain_pair = ProjectionPair::new(sum.embed_domain.clone(), p.clone())?;
    let codomain_pair = ProjectionPair::new(sum.embed_codomain.clone(), q.clone())?;

    let mut cert = Certificate::new("retraction pairs");
    cert.push_le(
        "|| backward . forward - id || <= eps",
        defect.clone(),
        eps_eff.clone(),
    );
    // The hypothesis makes forward an eps-isometry:
    // ||f x|| >= ||backward f x|| >= ||x|| - ||backward f x - x|| >= (1-eps)||x||.
    cert.push_le(
        "forward is an eps-isometry (derived lower bound)",
        Rational::one() - &eps_eff,
        Rational::one() - &defect,
    );
    cert.push_matrix_eq(
        "P . i = id",
        p.matrix().mul(sum.embed_domain.matrix()),
        Matrix::identity(x.dim()),
    );
    cert.push_matrix_eq(
        "Q . j = id",
        q.matrix().mul(sum.embed_codomain.matrix()),
        Matrix::identity(forward.codomain().dim()),
    );
    cert.push_matrix_eq(
        "P . j = backward",
        p.matrix().mul(sum.embed_codomain.matrix()),
        backward.matrix().clone(),
    );
    cert.push_matrix_eq(
        "Q . i = forward",
        q.matrix().mul(sum.embed_domain.matrix()),
        forward.matrix().clone(),
    );
    cert.absorb(sum.cert.clone());
    cert.absorb(p_cert);
    cert.absorb(q_cert);

    Ok(RetractionPairs {
        sum,
        domain_pair,
        codomain_pair,
        defect,
        cert,
    })
}

/// The amalgam of two pairs out of a common subspace.
#[derive(Clone, Debug)]
pub struct Pushout {
    pub space: PolyBanachSpace,
    /// `X -> V`.
    pub left: ProjectionPair,
    /// `Y -> V`.
    pub right: ProjectionPair,
    pub cert: Certificate,
}

/// Amalgamates `zx : Z -> X` and `zy : Z -> Y` over `Z`: the quotient of the
/// sum-normed `X (+) Y` by the antidiagonal copy of `Z`, with ball the image
/// of the sum ball under the quotient map. Output arrows satisfy the four
/// diagram identities exactly and are valid pairs.
///
/// When both embeds are coordinate inclusions the quotient is taken in
/// structured coordinates `(X, tail of Y)`, which keeps every coefficient of
/// the inputs; otherwise the kernel's canonical null-space coordinates are
/// used.
pub fn pushout(zx: &ProjectionPair, zy: &ProjectionPair) -> Result<Pushout, ConstructError> {
    if zx.domain() != zy.domain() {
        return Err(ConstructError::DomainMismatch {
            context: "pushout arrows must share their domain".into(),
        });
    }
    let zx_cert = zx.verify()?;
    let zy_cert = zy.verify()?;
    let dz = zx.domain().dim();
    let dx = zx.codomain().dim();
    let dy = zy.codomain().dim();
    let dv = dx + dy - dz;

    let structured = zx.embed.matrix().is_coordinate_inclusion()
        && zy.embed.matrix().is_coordinate_inclusion();

    // q : X (+) Y -> V, the quotient map with kernel { (i z, -j z) }.
    let q = if structured {
        let r = dy - dz;
        let mut q = Matrix::zeros(dv, dx + dy);
        for k in 0..dx {
            q.set(k, k, Rational::one());
        }
        for k in 0..dz {
            q.set(k, dx + k, Rational::one());
        }
        for k in 0..r {
            q.set(dx + k, dx + dz + k, Rational::one());
        }
        q
    } else {
        let diff = zx
            .embed
            .matrix()
            .vconcat(&zy.embed.matrix().scale(&-Rational::one()));
        let kernel_basis = diff.transpose().nullspace();
        let q = kernel_basis.transpose();
        assert_eq!(q.rows(), dv, "quotient dimension");
        q
    };

    // Split q into its X- and Y-column blocks for the canonical embeds.
    let mut left_embed_m = Matrix::zeros(dv, dx);
    let mut right_embed_m = Matrix::zeros(dv, dy);
    for i in 0..dv {
        for jcol in 0..dx {
            left_embed_m.set(i, jcol, q.get(i, jcol).clone());
        }
        for jcol in 0..dy {
            right_embed_m.set(i, jcol, q.get(i, dx + jcol).clone());
        }
    }

    // P'[(x,y)] = x + i Q y and Q'[(x,y)] = y + j P x, expressed on V.
    let b = Matrix::identity(dx).hconcat(&zx.embed.matrix().mul(zy.project.matrix()));
    let c = zy
        .embed
        .matrix()
        .mul(zx.project.matrix())
        .hconcat(&Matrix::identity(dy));
    let (left_proj_m, right_proj_m) = if structured {
        let r = dy - dz;
        let mut pad_tail = Matrix::zeros(dy, r);
        for k in 0..r {
            pad_tail.set(dz + k, k, Rational::one());
        }
        let lp = Matrix::identity(dx)
            .hconcat(&zx.embed.matrix().mul(zy.project.matrix()).mul(&pad_tail));
        let mut rp = Matrix::zeros(dy, dv);
        let jp = zy.embed.matrix().mul(zx.project.matrix());
        for i in 0..dy {
            for jcol in 0..dx {
                rp.set(i, jcol, jp.get(i, jcol).clone());
            }
        }
        for k in 0..r {
            rp.set(dz + k, dx + k, Rational::one());
        }
        (lp, rp)
    } else {
        let gram = q.mul(&q.transpose());
        let gram_inv = gram.inverse().expect("independent rows");
        let section = q.transpose().mul(&gram_inv);
        (b.mul(&section), c.mul(&section))
    };

    // Quotient ball: image of the sum ball under q.
    let mut points = Vec::new();
    let zero_y = vec![Rational::zero(); dy];
    let zero_x = vec![Rational::zero(); dx];
    for v in zx.codomain().ball().vertices() {
        points.push(q.apply(&concat(v, &zero_y)));
    }
    for u in zy.codomain().ball().vertices() {
        points.push(q.apply(&concat(&zero_x, u)));
    }
    let space = PolyBanachSpace::new(ball_from_points(dv, points)?)?;

    let left = ProjectionPair::new(
        Operator::new(zx.codomain().clone(), space.clone(), left_embed_m.clone())?,
        Operator::new(space.clone(), zx.codomain().clone(), left_proj_m.clone())?,
    )?;
    let right = ProjectionPair::new(
        Operator::new(zy.codomain().clone(), space.clone(), right_embed_m.clone())?,
        Operator::new(space.clone(), zy.codomain().clone(), right_proj_m.clone())?,
    )?;

    let mut cert = Certificate::new("amalgamation pushout");
    cert.push_matrix_eq(
        "i' . i = j' . j",
        left_embed_m.mul(zx.embed.matrix()),
        right_embed_m.mul(zy.embed.matrix()),
    );
    cert.push_matrix_eq(
        "P . P' = Q . Q'",
        zx.project.matrix().mul(&left_proj_m),
        zy.project.matrix().mul(&right_proj_m),
    );
    cert.push_matrix_eq(
        "j . P = Q' . i'",
        zy.embed.matrix().mul(zx.project.matrix()),
        right_proj_m.mul(&left_embed_m),
    );
    cert.push_matrix_eq(
        "i . Q = P' . j'",
        zx.embed.matrix().mul(zy.project.matrix()),
        left_proj_m.mul(&right_embed_m),
    );
    cert.push_matrix_eq(
        "P' . i' = id",
        left_proj_m.mul(&left_embed_m),
        Matrix::identity(dx),
    );
    cert.push_matrix_eq(
        "Q' . j' = id",
        right_proj_m.mul(&right_embed_m),
        Matrix::identity(dy),
    );
    // The projections factor through 1-bounded data of the inputs, which
    // bounds them on the quotient ball; the embeds are isometric by the
    // retraction argument once (P2) holds. Certified vertex-wise when small.
    if space.ball().num_vertices() <= MINIMIZE_LIMIT {
        cert.absorb(left.verify()?);
        cert.absorb(right.verify()?);
    }
    cert.absorb(zx_cert);
    cert.absorb(zy_cert);
    if !cert.holds() {
        let failed = cert.verify().unwrap_err();
        return Err(ConstructError::HypothesisFailed {
            condition: failed.condition,
            value: "pushout postcondition failed".into(),
        });
    }

    Ok(Pushout {
        space,
        left,
        right,
        cert,
    })
}

/// A budget-bounded rational replacement for a space.
#[derive(Clone, Debug)]
pub struct RationalizedSpace {
    pub space: PolyBanachSpace,
    /// Identity map `E -> V`, an `eps`-isometric embedding.
    pub forward: Operator,
    /// `(1 - eps) . identity : V -> E`, 1-bounded.
    pub backward: Operator,
    pub cert: Certificate,
}

/// Replaces the ball of `E` by one whose vertex coordinates have numerator
/// and denominator within `max_denominator`, sandwiched between the original
/// ball and its (1-eps)^-1 dilation. Exact LP checks decide feasibility; a
/// grid too coarse for the requested `eps` is an error.
pub fn rationalize_space(
    e: &PolyBanachSpace,
    eps: &Rational,
    max_denominator: u64,
) -> Result<RationalizedSpace, ConstructError> {
    if !eps.is_positive() || eps >= &Rational::one() {
        return Err(ConstructError::InvalidEpsilon {
            requirement: "0 < eps < 1".into(),
            eps: format_rational(eps),
        });
    }
    if e.is_trivial() {
        let v = PolyBanachSpace::trivial();
        let forward = Operator::zero(e, &v);
        let backward = Operator::zero(&v, e);
        let mut cert = Certificate::new("space rationalization");
        cert.push_le(
            "|| backward . forward - id || <= eps",
            Rational::zero(),
            eps.clone(),
        );
        return Ok(RationalizedSpace {
            space: v,
            forward,
            backward,
            cert,
        });
    }

    let one = Rational::one();
    let dilation = (Rational::one() - eps).recip();
    // Rounding ladder: plain nearest first, then nearest after a slight
    // inflation that the (1-eps) factor still absorbs.
    let inflate = (Rational::one() - eps / Rational::from_integer(2.into())).recip();
    let mut chosen: Option<(VPolytope, Rational, Rational)> = None;
    'attempt: for scale in [Rational::one(), inflate] {
        let mut points = Vec::new();
        for v in e.ball().vertices() {
            let u: Vec<Rational> = v
                .iter()
                .map(|x| round_to_grid(&(x * &scale), max_denominator))
                .collect();
            let neg: Vec<Rational> = u.iter().map(|x| -x).collect();
            points.push(u);
            points.push(neg);
        }
        let Ok(ball) = ball_from_points(e.dim(), points) else {
            continue 'attempt;
        };
        if ball.vertex_rank() != e.dim() {
            continue 'attempt;
        }
        let Ok(candidate) = PolyBanachSpace::new(ball.clone()) else {
            continue 'attempt;
        };
        // Original ball inside the candidate ball.
        let mut max_inner = Rational::zero();
        for v in e.ball().vertices() {
            let g = candidate.norm(v)?;
            if g > one {
                continue 'attempt;
            }
            if g > max_inner {
                max_inner = g;
            }
        }
        // Candidate ball inside the dilated original ball.
        let mut max_outer = Rational::zero();
        for u in ball.vertices() {
            let g = e.norm(u)?;
            if g > dilation {
                continue 'attempt;
            }
            if g > max_outer {
                max_outer = g;
            }
        }
        chosen = Some((ball, max_inner, max_outer));
        break;
    }
    let Some((ball, max_inner, max_outer)) = chosen else {
        return Err(ConstructError::BudgetTooCoarse {
            denominator: max_denominator,
            eps: format_rational(eps),
        });
    };

    let v = PolyBanachSpace::new(ball)?;
    let forward = Operator::new(e.clone(), v.clone(), Matrix::identity(e.dim()))?;
    let backward = Operator::new(v.clone(), e.clone(), Matrix::identity(e.dim()))?
        .scale(&(Rational::one() - eps));

    let mut cert = Certificate::new("space rationalization");
    cert.push_le("ball(E) inside ball(V)", max_inner, one.clone());
    cert.push_le("ball(V) inside (1-eps)^-1 ball(E)", max_outer, dilation);
    cert.push_le("op_norm(forward) <= 1", op_norm(&forward), one.clone());
    cert.push_le("op_norm(backward) <= 1", op_norm(&backward), one);
    let roundtrip = op_norm(&backward.compose(&forward)?.sub(&Operator::identity(e))?);
    cert.push_eq(
        "|| backward . forward - id || = eps",
        roundtrip,
        eps.clone(),
    );
    if !cert.holds() {
        let failed = cert.verify().unwrap_err();
        return Err(ConstructError::HypothesisFailed {
            condition: failed.condition,
            value: "rationalization postcondition failed".into(),
        });
    }

    Ok(RationalizedSpace {
        space: v,
        forward,
        backward,
        cert,
    })
}

/// A budget pass over the codomain of a pair, keeping the pair exact.
#[derive(Clone, Debug)]
pub struct RationalizedPair {
    /// `W`: the codomain carrier re-normed by `conv(G0 u e[ball(V)] u ...)`.
    pub space: PolyBanachSpace,
    /// `forward = (1+eps)^-1 id : E -> W`, `backward = id : W -> E`.
    pub couple: OperatorCouple,
    /// The input pair retargeted to `W`, still exactly valid.
    pub pair: ProjectionPair,
    /// Exact `|| forward . embed - pair.embed ||`; eps/(1+eps) on a
    /// nontrivial domain.
    pub defect: Rational,
    pub cert: Certificate,
}

/// Re-norms the codomain `E` of a valid pair `(e, P) : V -> E` with the ball
/// `conv(G0 u e[ball(V)] u preserved images)`, where `G0` is a grid rounding
/// of `ball(E)` kept inside `ball(E)`. The norm of `W` agrees with `E` on
/// the embedded copy of `V` (and on every preserved isometric image), so the
/// pair transfers exactly; `E` and `W` are related by the couple
/// `((1+eps)^-1 id, id)` with `P . T = Q` on the nose.
pub fn rationalize_pair(
    pair: &ProjectionPair,
    eps: &Rational,
    max_denominator: u64,
    preserved: &[&Operator],
) -> Result<RationalizedPair, ConstructError> {
    if !eps.is_positive() || eps >= &Rational::one() {
        return Err(ConstructError::InvalidEpsilon {
            requirement: "0 < eps < 1".into(),
            eps: format_rational(eps),
        });
    }
    let pair_cert = pair.verify()?;
    let e_space = pair.codomain().clone();
    let one = Rational::one();
    if e_space.is_trivial() {
        let couple = OperatorCouple::new(
            Operator::zero(&e_space, &e_space),
            Operator::zero(&e_space, &e_space),
        )?;
        let mut cert = Certificate::new("pair rationalization");
        cert.push_le("|| f . e - i || <= eps", Rational::zero(), eps.clone());
        return Ok(RationalizedPair {
            space: e_space.clone(),
            couple,
            pair: pair.clone(),
            defect: Rational::zero(),
            cert,
        });
    }

    for (idx, t) in preserved.iter().enumerate() {
        if t.codomain() != &e_space {
            return Err(ConstructError::DomainMismatch {
                context: format!("preserved operator {idx} does not land in the codomain"),
            });
        }
    }

    let shrink = (Rational::one() + eps / Rational::from_integer(2.into())).recip();
    let dilation = Rational::one() + eps;
    let mut kept: Option<(PolyBanachSpace, Rational)> = None;
    'attempt: for scale in [Rational::one(), shrink.clone()] {
        // G0: rounded vertices that stay inside ball(E).
        let mut points: Vec<Vec<Rational>> = Vec::new();
        for v in e_space.ball().vertices() {
            let u: Vec<Rational> = v
                .iter()
                .map(|x| round_to_grid(&(x * &scale), max_denominator))
                .collect();
            if e_space.norm(&u)? <= one {
                let neg: Vec<Rational> = u.iter().map(|x| -x).collect();
                points.push(u);
                points.push(neg);
            }
        }
        // Exact images the new norm must preserve.
        for v in pair.domain().ball().vertices() {
            points.push(pair.embed.apply(v));
        }
        for t in preserved {
            for v in t.domain().ball().vertices() {
                points.push(t.apply(v));
            }
        }
        let Ok(ball) = ball_from_points(e_space.dim(), points) else {
            continue 'attempt;
        };
        if ball.vertex_rank() != e_space.dim() {
            continue 'attempt;
        }
        let Ok(w) = PolyBanachSpace::new(ball) else {
            continue 'attempt;
        };
        // (1+eps)^-1 ball(E) must fit inside the new ball.
        let inv_dilation = dilation.recip();
        let mut max_inner = Rational::zero();
        for v in e_space.ball().vertices() {
            let shrunk: Vec<Rational> = v.iter().map(|x| x * &inv_dilation).collect();
            let g = w.norm(&shrunk)?;
            if g > one {
                continue 'attempt;
            }
            if g > max_inner {
                max_inner = g;
            }
        }
        kept = Some((w, max_inner));
        break;
    }
    let Some((w, max_inner)) = kept else {
        return Err(ConstructError::BudgetTooCoarse {
            denominator: max_denominator,
            eps: format_rational(eps),
        });
    };

    // All new-ball vertices stay inside ball(E).
    let mut max_outer = Rational::zero();
    for u in w.ball().vertices() {
        let g = e_space.norm(u)?;
        if g > max_outer {
            max_outer = g;
        }
    }
    if max_outer > one {
        return Err(ConstructError::BudgetTooCoarse {
            denominator: max_denominator,
            eps: format_rational(eps),
        });
    }

    let forward = Operator::new(e_space.clone(), w.clone(), Matrix::identity(e_space.dim()))?
        .scale(&dilation.recip());
    let backward = Operator::new(w.clone(), e_space.clone(), Matrix::identity(e_space.dim()))?;
    let couple = OperatorCouple::new(forward.clone(), backward.clone())?;

    let new_pair = ProjectionPair::new(
        pair.embed.with_codomain(&w)?,
        pair.project.with_domain(&w)?,
    )?;
    let new_pair_cert = new_pair.verify()?;

    let defect = op_norm(&forward.compose(&pair.embed)?.sub(&new_pair.embed)?);

    let mut cert = Certificate::new("pair rationalization");
    cert.push_matrix_eq(
        "P . T = Q",
        pair.project.matrix().mul(backward.matrix()),
        new_pair.project.matrix().clone(),
    );
    cert.push_le("|| f . e - i || <= eps", defect.clone(), eps.clone());
    if !pair.domain().is_trivial() {
        cert.push_eq(
            "|| f . e - i || = eps/(1+eps)",
            defect.clone(),
            eps / &dilation,
        );
    }
    cert.push_le("ball(W) inside ball(E)", max_outer, one.clone());
    cert.push_le("(1+eps)^-1 ball(E) inside ball(W)", max_inner, one.clone());
    cert.push_le("op_norm(f) <= 1", op_norm(&forward), one.clone());
    cert.push_le("op_norm(T) <= 1", op_norm(&backward), one);
    cert.absorb(pair_cert);
    cert.absorb(new_pair_cert);
    if !cert.holds() {
        let failed = cert.verify().unwrap_err();
        return Err(ConstructError::HypothesisFailed {
            condition: failed.condition,
            value: "rationalization postcondition failed".into(),
        });
    }

    Ok(RationalizedPair {
        space: w,
        couple,
        pair: new_pair,
        defect,
        cert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use crate::space::{is_isometric_embedding, lower_isometry_bound};

    fn line() -> PolyBanachSpace {
        PolyBanachSpace::linf(1)
    }

    #[test]
    fn corrected_sum_of_identity_on_line() {
        // f = id on the line, eps = 1/2: the norm of (1, -1) is 1/2, attained
        // at the correction witness w = 1, and the piecewise-linear infimand
        // 2|1-w| + |w|/2 confirms the value from breakpoint enumeration.
        let x = line();
        let f = Operator::identity(&x);
        let eps = rat(1, 2);
        let sum = corrected_sum(&f, &eps).unwrap();
        let infimand = |w: Rational| -> Rational {
            let two = int(2);
            two * num_traits::Signed::abs(&(int(1) - &w))
                + num_traits::Signed::abs(&w) * rat(1, 2)
        };
        let oracle = [int(0), int(1), int(2)]
            .into_iter()
            .map(infimand)
            .min()
            .unwrap();
        assert_eq!(oracle, rat(1, 2));
        assert_eq!(sum.space.norm(&[int(1), int(-1)]).unwrap(), oracle);
        // embedded copies keep their norms
        assert_eq!(sum.space.norm(&[rat(2, 3), int(0)]).unwrap(), rat(2, 3));
        assert_eq!(sum.space.norm(&[int(0), rat(-5, 7)]).unwrap(), rat(5, 7));
        // || j f - i || = 1/2 with witness w = -x in the infimum
        assert_eq!(sum.defect, rat(1, 2));
        assert!(sum.cert.holds());
        assert!(is_isometric_embedding(&sum.embed_domain).unwrap());
        assert!(is_isometric_embedding(&sum.embed_codomain).unwrap());
    }

    #[test]
    fn corrected_sum_rejects_non_isometry() {
        let x = line();
        let half = Operator::identity(&x).scale(&rat(1, 2));
        let err = corrected_sum(&half, &rat(1, 4)).unwrap_err();
        assert!(matches!(err, ConstructError::NotEpsIsometry { .. }));
        assert!(matches!(
            corrected_sum(&Operator::identity(&x), &int(0)).unwrap_err(),
            ConstructError::InvalidEpsilon { .. }
        ));
    }

    #[test]
    fn sum_norm_matches_infimum_via_decomposition() {
        // Reconstruct the correction witness w from the LP decomposition and
        // evaluate ||x - w|| + ||y + f(w)|| + eps ||w|| exactly.
        let x = PolyBanachSpace::linf(2);
        let f = Operator::new(
            x.clone(),
            x.clone(),
            Matrix::from_rows(vec![vec![int(1), int(0)], vec![rat(1, 4), rat(3, 4)]]),
        )
        .unwrap();
        let eps = rat(1, 2);
        let sum = corrected_sum(&f, &eps).unwrap();
        let samples = vec![
            vec![int(1), int(0), int(0), int(1)],
            vec![rat(1, 2), rat(-1, 3), rat(1, 5), int(0)],
            vec![int(0), int(0), int(1), int(-1)],
        ];
        for point in samples {
            let (norm, mu) = sum.space.norm_with_decomposition(&point).unwrap();
            // Correction vertices sit at indices where the vertex has a
            // nonzero X block and a Y block equal to -f applied to it.
            let mut w = vec![int(0); 2];
            for (idx, vert) in sum.space.ball().vertices().iter().enumerate() {
                let xb = &vert[..2];
                let yb = &vert[2..];
                let fx: Vec<Rational> = f.apply(xb).iter().map(|c| -c).collect();
                if fx == yb && xb.iter().any(|c| !c.is_zero()) {
                    for d in 0..2 {
                        w[d] = &w[d] + &mu[idx] * &xb[d];
                    }
                }
            }
            let xv = &point[..2];
            let yv = &point[2..];
            let x_minus_w: Vec<Rational> = xv.iter().zip(&w).map(|(a, b)| a - b).collect();
            let y_plus_fw: Vec<Rational> =
                yv.iter().zip(f.apply(&w)).map(|(a, b)| a + b).collect();
            let value = x.norm(&x_minus_w).unwrap()
                + x.norm(&y_plus_fw).unwrap()
                + eps.clone() * x.norm(&w).unwrap();
            assert_eq!(norm, value, "infimum formula mismatch at {point:?}");
        }
    }

    #[test]
    fn factor_identity_pair_gives_identity() {
        let x = line();
        let f = Operator::identity(&x);
        let sum = corrected_sum(&f, &rat(1, 2)).unwrap();
        let (h, cert) = sum
            .factor(&sum.embed_domain.clone(), &sum.embed_codomain.clone())
            .unwrap();
        assert!(h.matrix().is_identity());
        assert!(cert.holds());
    }

    #[test]
    fn factor_hypothesis_failure_reports_value() {
        let x = line();
        let f = Operator::identity(&x);
        let sum = corrected_sum(&f, &rat(1, 4)).unwrap();
        // l . f - k = -2 id has norm 2 > 1/4.
        let err = sum
            .factor(
                &Operator::identity(&x),
                &Operator::identity(&x).scale(&int(-1)),
            )
            .unwrap_err();
        assert!(matches!(err, ConstructError::HypothesisFailed { value, .. } if value == "2"));
    }

    #[test]
    fn retraction_pairs_identities() {
        let x = PolyBanachSpace::linf(2);
        let f = Operator::identity(&x);
        let t = Operator::identity(&x);
        let rp = retraction_pairs(&f, &t, &rat(1, 4)).unwrap();
        assert!(rp.cert.holds());
        assert!(rp.domain_pair.verify().unwrap().holds());
        assert!(rp.codomain_pair.verify().unwrap().holds());
        assert_eq!(rp.defect, int(0));
        // P . j = T and Q . i = f exactly
        assert_eq!(
            rp.domain_pair
                .project
                .matrix()
                .mul(rp.codomain_pair.embed.matrix()),
            t.matrix().clone()
        );
        assert_eq!(
            rp.codomain_pair
                .project
                .matrix()
                .mul(rp.domain_pair.embed.matrix()),
            f.matrix().clone()
        );
    }

    #[test]
    fn retraction_pairs_zero_eps_uses_floor() {
        let x = line();
        let rp = retraction_pairs(&Operator::identity(&x), &Operator::identity(&x), &int(0))
            .unwrap();
        assert!(rp.cert.holds());
        assert_eq!(rp.sum.eps, pow2_inv(20));
    }

    #[test]
    fn retraction_pairs_hypothesis_failure() {
        let x = line();
        let err = retraction_pairs(
            &Operator::identity(&x).scale(&rat(1, 2)),
            &Operator::identity(&x).scale(&rat(1, 2)),
            &rat(1, 4),
        )
        .unwrap_err();
        // || T f - id || = 3/4 > 1/4
        assert!(
            matches!(err, ConstructError::HypothesisFailed { value, .. } if value == "3/4")
        );
    }

    #[test]
    fn pushout_over_trivial_space_is_sum_ball() {
        let z = PolyBanachSpace::trivial();
        let x = line();
        let y = PolyBanachSpace::linf(2);
        let zx = ProjectionPair::new(Operator::zero(&z, &x), Operator::zero(&x, &z)).unwrap();
        let zy = ProjectionPair::new(Operator::zero(&z, &y), Operator::zero(&y, &z)).unwrap();
        let po = pushout(&zx, &zy).unwrap();
        assert_eq!(po.space.dim(), 3);
        assert!(po.cert.holds());
        // The ball is the hull of (ball(X) x 0) u (0 x ball(Y)): the sum
        // norm is ||x|| + ||y||.
        assert_eq!(
            po.space.norm(&[rat(1, 2), rat(1, 3), int(0)]).unwrap(),
            rat(1, 2) + rat(1, 3)
        );
        assert!(po.left.verify().unwrap().holds());
        assert!(po.right.verify().unwrap().holds());
    }

    #[test]
    fn pushout_of_identities_is_identity() {
        let z = PolyBanachSpace::linf(2);
        let id = ProjectionPair::identity(&z);
        let po = pushout(&id, &id).unwrap();
        assert_eq!(po.space.dim(), 2);
        assert!(po.left.embed.matrix().is_identity());
        assert!(po.right.embed.matrix().is_identity());
        assert!(po.left.project.matrix().is_identity());
        assert!(po.right.project.matrix().is_identity());
        assert_eq!(po.space.ball(), z.ball());
    }

    #[test]
    fn pushout_dimension_formula_on_coordinate_inclusions() {
        let z = line();
        let x = PolyBanachSpace::linf(2);
        let y = PolyBanachSpace::linf(3);
        let mk = |a: &PolyBanachSpace, b: &PolyBanachSpace| {
            let e = Operator::coordinate_inclusion(a, b).unwrap();
            let mut pm = Matrix::zeros(a.dim(), b.dim());
            for i in 0..a.dim() {
                pm.set(i, i, int(1));
            }
            ProjectionPair::new(e, Operator::new(b.clone(), a.clone(), pm).unwrap()).unwrap()
        };
        let zx = mk(&z, &x);
        let zy = mk(&z, &y);
        let po = pushout(&zx, &zy).unwrap();
        assert_eq!(po.space.dim(), 2 + 3 - 1);
        assert!(po.cert.holds());
        assert!(po.left.embed.matrix().is_coordinate_inclusion());
        // mismatched domains rejected
        let other = mk(&x, &y);
        assert!(matches!(
            pushout(&zx, &other).unwrap_err(),
            ConstructError::DomainMismatch { .. }
        ));
    }

    #[test]
    fn pushout_general_position_arrows() {
        // Z = line embedded into linf(2) along the second coordinate with a
        // sign flip: not a coordinate inclusion, exercises the null-space
        // coordinates.
        let z = line();
        let x = PolyBanachSpace::linf(2);
        let embed = Operator::new(
            z.clone(),
            x.clone(),
            Matrix::from_rows(vec![vec![int(0)], vec![int(-1)]]),
        )
        .unwrap();
        let project = Operator::new(
            x.clone(),
            z.clone(),
            Matrix::from_rows(vec![vec![int(0), int(-1)]]),
        )
        .unwrap();
        let zx = ProjectionPair::new(embed, project).unwrap();
        zx.verify().unwrap();
        let zy = ProjectionPair::new(
            Operator::coordinate_inclusion(&z, &x).unwrap(),
            Operator::new(
                x.clone(),
                z.clone(),
                Matrix::from_rows(vec![vec![int(1), int(0)]]),
            )
            .unwrap(),
        )
        .unwrap();
        let po = pushout(&zx, &zy).unwrap();
        assert_eq!(po.space.dim(), 3);
        assert!(po.cert.holds());
        assert!(po.left.verify().unwrap().holds());
        assert!(po.right.verify().unwrap().holds());
    }

    #[test]
    fn rationalize_space_on_budget_ball_is_scaling_only() {
        let e = PolyBanachSpace::linf(2);
        let r = rationalize_space(&e, &rat(1, 2), 2).unwrap();
        // Ball already on the grid: V = E, so the couple is the (1-eps)
        // scaling and || P e - id || = eps exactly.
        assert_eq!(r.space.ball(), e.ball());
        assert!(r.cert.holds());
        let roundtrip = op_norm(
            &r.backward
                .compose(&r.forward)
                .unwrap()
                .sub(&Operator::identity(&e))
                .unwrap(),
        );
        assert_eq!(roundtrip, rat(1, 2));
        // sandwich: (1/2) ball(E) inside ball(V) inside 2 ball(E)
        assert!(lower_isometry_bound(&r.forward).unwrap() >= rat(1, 2));
    }

    #[test]
    fn rationalize_space_rounds_large_denominators() {
        let ball = convex_hull(
            2,
            vec![
                vec![rat(101, 100), int(0)],
                vec![rat(-101, 100), int(0)],
                vec![int(0), rat(99, 100)],
                vec![int(0), rat(-99, 100)],
                vec![rat(101, 100), rat(99, 100)],
                vec![rat(-101, 100), rat(-99, 100)],
            ],
        )
        .unwrap();
        let e = PolyBanachSpace::new(ball).unwrap();
        let r = rationalize_space(&e, &rat(1, 4), 8).unwrap();
        assert!(r.cert.holds());
        for v in r.space.ball().vertices() {
            for c in v {
                assert!(crate::rational::magnitude_within(c, 8 * 2), "coord {c}");
                assert!(crate::rational::denominator_within(c, 8), "denominator {c}");
            }
        }
        // monotone: smaller eps gives a ball between the original and the
        // eps one (pointwise larger norms than the looser pass).
        let tighter = rationalize_space(&e, &rat(1, 8), 8).unwrap();
        for v in e.ball().vertices() {
            assert!(tighter.space.norm(v).unwrap() >= r.space.norm(v).unwrap() * rat(1, 1));
        }
    }

    #[test]
    fn rationalize_space_budget_too_coarse() {
        // A thin sliver ball cannot be captured on a unit grid with eps 1/8.
        let ball = convex_hull(
            2,
            vec![
                vec![int(1), rat(1, 16)],
                vec![int(-1), rat(-1, 16)],
                vec![int(1), rat(-1, 16)],
                vec![int(-1), rat(1, 16)],
            ],
        )
        .unwrap();
        let e = PolyBanachSpace::new(ball).unwrap();
        assert!(matches!(
            rationalize_space(&e, &rat(1, 8), 1).unwrap_err(),
            ConstructError::BudgetTooCoarse { .. }
        ));
    }

    #[test]
    fn rationalize_pair_identity_case() {
        let v = PolyBanachSpace::linf(2);
        let pair = ProjectionPair::identity(&v);
        let r = rationalize_pair(&pair, &rat(1, 2), 2, &[]).unwrap();
        assert!(r.cert.holds());
        // || f e - i || = eps/(1+eps) = (1/2)/(3/2) = 1/3 exactly.
        assert_eq!(r.defect, rat(1, 3));
        // The pair survives verbatim: W restricted to V is V.
        assert!(r.pair.verify().unwrap().holds());
        assert_eq!(r.space.ball(), v.ball());
    }

    #[test]
    fn rationalize_pair_preserves_embedded_norms() {
        // V = line inside E = scaled hexagon with off-grid vertices.
        let ball = convex_hull(
            2,
            vec![
                vec![int(1), int(0)],
                vec![int(-1), int(0)],
                vec![rat(33, 64), rat(65, 64)],
                vec![rat(-33, 64), rat(-65, 64)],
                vec![rat(-33, 64), rat(65, 64)],
                vec![rat(33, 64), rat(-65, 64)],
            ],
        )
        .unwrap();
        let e = PolyBanachSpace::new(ball).unwrap();
        let v = line();
        let embed = Operator::coordinate_inclusion(&v, &e).unwrap();
        assert!(is_isometric_embedding(&embed).unwrap());
        let project = Operator::new(
            e.clone(),
            v.clone(),
            Matrix::from_rows(vec![vec![int(1), int(0)]]),
        )
        .unwrap();
        let pair = ProjectionPair::new(embed, project).unwrap();
        pair.verify().unwrap();
        let r = rationalize_pair(&pair, &rat(1, 4), 4, &[]).unwrap();
        assert!(r.cert.holds());
        assert!(r.pair.verify().unwrap().holds());
        // norm on the embedded copy of V unchanged
        assert_eq!(r.space.norm(&[int(1), int(0)]).unwrap(), int(1));
        assert_eq!(
            r.space.norm(&[rat(1, 3), int(0)]).unwrap(),
            e.norm(&[rat(1, 3), int(0)]).unwrap()
        );
        // sandwich both ways
        for u in r.space.ball().vertices() {
            assert!(e.norm(u).unwrap() <= int(1));
        }
        for w in e.ball().vertices() {
            let shrunk: Vec<Rational> = w.iter().map(|c| c * rat(4, 5)).collect();
            assert!(r.space.norm(&shrunk).unwrap() <= int(1));
        }
    }

    #[test]
    fn rationalize_pair_rejects_invalid_pair() {
        let v = PolyBanachSpace::linf(2);
        let bad = ProjectionPair::new(
            Operator::identity(&v).scale(&rat(1, 2)),
            Operator::identity(&v),
        )
        .unwrap();
        assert!(matches!(
            rationalize_pair(&bad, &rat(1, 2), 2, &[]).unwrap_err(),
            ConstructError::Arrow(_)
        ));
    }
}
