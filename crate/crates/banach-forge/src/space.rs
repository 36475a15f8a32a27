//! Finite-dimensional spaces with polytope unit balls, the operators between
//! them, and the exact norm analytics every construction relies on.
//!
//! A space's norm is the Minkowski functional of its ball, computed as the LP
//! `min { sum(mu) : sum(mu_i v_i) = x, mu >= 0 }` over the ball vertices.
//! Operator norms maximize that over domain-ball vertices; the lower isometry
//! bound minimizes it over the facets of the domain ball. Only the latter
//! needs a facet description, and only of the (usually small) domain.

use crate::lp::{solve_lp, Constraint, LinearProgram, LpError, Sense};
use crate::matrix::Matrix;
use crate::polytope::{v_to_h, GeometryError, HPolytope, VPolytope};
use crate::rational::Rational;
use num_traits::{One, Zero};
use std::sync::{Arc, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpaceError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unit ball is not symmetric: missing mirror of a vertex")]
    NotSymmetric,
    #[error("unit ball is not full-dimensional (vertex rank {rank} < dim {dim})")]
    NotFullDimensional { rank: usize, dim: usize },
    #[error("geometry failure: {0}")]
    Geometry(#[from] GeometryError),
    #[error("operator shape {rows}x{cols} does not match codomain {codomain} x domain {domain}")]
    OperatorShape {
        rows: usize,
        cols: usize,
        domain: usize,
        codomain: usize,
    },
    #[error("spaces differ where equality is required: {context}")]
    SpaceMismatch { context: String },
    #[error("chain invalid: {0}")]
    ChainInvalid(String),
}

#[derive(Debug)]
struct SpaceInner {
    dim: usize,
    ball: VPolytope,
    dual: OnceLock<HPolytope>,
}

/// A finite-dimensional normed space whose closed unit ball is a symmetric
/// full-dimensional rational polytope. The trivial space has dimension zero
/// and the single empty point as its ball.
#[derive(Clone, Debug)]
pub struct PolyBanachSpace(Arc<SpaceInner>);

impl PartialEq for PolyBanachSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.ball == other.0.ball
    }
}
impl Eq for PolyBanachSpace {}

impl PolyBanachSpace {
    /// Builds a space from its unit ball, checking symmetry and
    /// full-dimensionality (rank of the vertex set equals the dimension,
    /// which for symmetric bodies puts the origin in the interior).
    pub fn new(ball: VPolytope) -> Result<Self, SpaceError> {
        if !ball.is_symmetric() {
            return Err(SpaceError::NotSymmetric);
        }
        let rank = ball.vertex_rank();
        if rank != ball.dim() {
            return Err(SpaceError::NotFullDimensional {
                rank,
                dim: ball.dim(),
            });
        }
        Ok(PolyBanachSpace(Arc::new(SpaceInner {
            dim: ball.dim(),
            ball,
            dual: OnceLock::new(),
        })))
    }

    /// The zero-dimensional space.
    pub fn trivial() -> Self {
        let ball = VPolytope::spanned(0, vec![vec![]]).expect("trivial ball");
        PolyBanachSpace(Arc::new(SpaceInner {
            dim: 0,
            ball,
            dual: OnceLock::new(),
        }))
    }

    /// Sup-norm space: the ball is the cube with vertices in {-1, 1}^n.
    pub fn linf(n: usize) -> Self {
        if n == 0 {
            return Self::trivial();
        }
        let mut vertices: Vec<Vec<Rational>> = vec![vec![]];
        for _ in 0..n {
            let mut next = Vec::new();
            for v in &vertices {
                for s in [Rational::one(), -Rational::one()] {
                    let mut w: Vec<Rational> = v.clone();
                    w.push(s);
                    next.push(w);
                }
            }
            vertices = next;
        }
        Self::new(VPolytope::spanned(n, vertices).expect("cube")).expect("cube ball")
    }

    /// Sum-norm space: the ball is the cross-polytope with vertices +-e_i.
    pub fn l1(n: usize) -> Self {
        if n == 0 {
            return Self::trivial();
        }
        let mut vertices = Vec::new();
        for i in 0..n {
            for s in [Rational::one(), -Rational::one()] {
                let mut v = vec![Rational::zero(); n];
                v[i] = s;
                vertices.push(v);
            }
        }
        Self::new(VPolytope::spanned(n, vertices).expect("cross")).expect("cross ball")
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn is_trivial(&self) -> bool {
        self.0.dim == 0
    }

    pub fn ball(&self) -> &VPolytope {
        &self.0.ball
    }

    /// Facet description of the ball, computed once and cached. The benign
    /// race of two threads computing it yields the same canonical value.
    pub fn dual_ball(&self) -> Result<&HPolytope, SpaceError> {
        if let Some(h) = self.0.dual.get() {
            return Ok(h);
        }
        let computed = v_to_h(&self.0.ball)?;
        Ok(self.0.dual.get_or_init(|| computed))
    }

    /// Minkowski functional of the ball: exact, zero iff `x` is zero.
    pub fn norm(&self, x: &[Rational]) -> Result<Rational, SpaceError> {
        Ok(self.norm_with_decomposition(x)?.0)
    }

    /// Norm together with the optimal conic coefficients over ball vertices.
    pub fn norm_with_decomposition(
        &self,
        x: &[Rational],
    ) -> Result<(Rational, Vec<Rational>), SpaceError> {
        if x.len() != self.0.dim {
            return Err(SpaceError::DimensionMismatch {
                expected: self.0.dim,
                got: x.len(),
            });
        }
        let verts = self.0.ball.vertices();
        let n = verts.len();
        let mut lp = LinearProgram::new(n, vec![Rational::one(); n], Sense::Minimize)
            .with_nonnegative(vec![true; n]);
        for d in 0..self.0.dim {
            let coeffs: Vec<Rational> = verts.iter().map(|v| v[d].clone()).collect();
            lp.push(Constraint::eq(coeffs, x[d].clone()));
        }
        match solve_lp(&lp) {
            Ok(sol) => Ok((sol.optimum, sol.witness)),
            Err(e) => unreachable!("gauge LP of a full-dimensional symmetric ball: {e}"),
        }
    }
}

/// A linear operator between two spaces, stored as an explicit matrix
/// (codomain dim x domain dim). Inclusions are matrices too, never implicit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Operator {
    domain: PolyBanachSpace,
    codomain: PolyBanachSpace,
    matrix: Matrix,
}

impl Operator {
    pub fn new(
        domain: PolyBanachSpace,
        codomain: PolyBanachSpace,
        matrix: Matrix,
    ) -> Result<Self, SpaceError> {
        if matrix.rows() != codomain.dim() || matrix.cols() != domain.dim() {
            return Err(SpaceError::OperatorShape {
                rows: matrix.rows(),
                cols: matrix.cols(),
                domain: domain.dim(),
                codomain: codomain.dim(),
            });
        }
        Ok(Operator {
            domain,
            codomain,
            matrix,
        })
    }

    pub fn identity(space: &PolyBanachSpace) -> Self {
        Operator {
            domain: space.clone(),
            codomain: space.clone(),
            matrix: Matrix::identity(space.dim()),
        }
    }

    pub fn zero(domain: &PolyBanachSpace, codomain: &PolyBanachSpace) -> Self {
        Operator {
            domain: domain.clone(),
            codomain: codomain.clone(),
            matrix: Matrix::zeros(codomain.dim(), domain.dim()),
        }
    }

    /// The inclusion of the first `domain.dim()` coordinates.
    pub fn coordinate_inclusion(
        domain: &PolyBanachSpace,
        codomain: &PolyBanachSpace,
    ) -> Result<Self, SpaceError> {
        let d = domain.dim();
        let c = codomain.dim();
        if d > c {
            return Err(SpaceError::OperatorShape {
                rows: c,
                cols: d,
                domain: d,
                codomain: c,
            });
        }
        let mut m = Matrix::zeros(c, d);
        for i in 0..d {
            m.set(i, i, Rational::one());
        }
        Operator::new(domain.clone(), codomain.clone(), m)
    }

    pub fn domain(&self) -> &PolyBanachSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &PolyBanachSpace {
        &self.codomain
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        self.matrix.apply(x)
    }

    /// `self` after `first`: returns `self . first`.
    pub fn compose(&self, first: &Operator) -> Result<Operator, SpaceError> {
        if self.domain != first.codomain {
            return Err(SpaceError::SpaceMismatch {
                context: "compose: codomain of first operator != domain of second".into(),
            });
        }
        Ok(Operator {
            domain: first.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.mul(&first.matrix),
        })
    }

    pub fn add(&self, other: &Operator) -> Result<Operator, SpaceError> {
        self.same_shape(other)?;
        Ok(Operator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.add(&other.matrix),
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator, SpaceError> {
        self.same_shape(other)?;
        Ok(Operator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.sub(&other.matrix),
        })
    }

    pub fn scale(&self, s: &Rational) -> Operator {
        Operator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.scale(s),
        }
    }

    fn same_shape(&self, other: &Operator) -> Result<(), SpaceError> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(SpaceError::SpaceMismatch {
                context: "operator arithmetic requires equal endpoints".into(),
            });
        }
        Ok(())
    }

    /// Retargets the codomain to a space of equal dimension but a different
    /// ball (used when a construction re-norms the carrier).
    pub fn with_codomain(&self, codomain: &PolyBanachSpace) -> Result<Operator, SpaceError> {
        Operator::new(self.domain.clone(), codomain.clone(), self.matrix.clone())
    }

    pub fn with_domain(&self, domain: &PolyBanachSpace) -> Result<Operator, SpaceError> {
        Operator::new(domain.clone(), self.codomain.clone(), self.matrix.clone())
    }
}

/// `max { ||T v|| : v vertex of the domain ball }`, which by convexity equals
/// the supremum over the whole ball. Exact. The identity on a space is
/// answered without solving (its norm is 1 on any nontrivial space).
pub fn op_norm(t: &Operator) -> Rational {
    if t.matrix.is_identity() && t.domain == t.codomain {
        return if t.domain.is_trivial() {
            Rational::zero()
        } else {
            Rational::one()
        };
    }
    let mut best = Rational::zero();
    for v in t.domain.ball().vertices() {
        let image = t.apply(v);
        let n = t
            .codomain
            .norm(&image)
            .expect("image dimension matches codomain");
        if n > best {
            best = n;
        }
    }
    best
}

/// `min { ||T x|| : ||x|| = 1 }`, exact, as the minimum over domain-ball
/// facets of a joint LP in (x, conic codomain coefficients). Returns 1 for
/// the trivial domain (the unit sphere is empty, so every bound holds).
pub fn lower_isometry_bound(t: &Operator) -> Result<Rational, SpaceError> {
    Ok(lower_isometry_bound_with_witness(t)?.0)
}

/// Lower isometry bound plus a unit vector attaining it (empty vector for
/// the trivial domain).
pub fn lower_isometry_bound_with_witness(
    t: &Operator,
) -> Result<(Rational, Vec<Rational>), SpaceError> {
    if t.domain.is_trivial() {
        return Ok((Rational::one(), vec![]));
    }
    let facets = t.domain.dual_ball()?.halfspaces().to_vec();
    let dim = t.domain.dim();
    let cod_verts = t.codomain.ball().vertices().to_vec();
    let k = cod_verts.len();
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    for facet in &facets {
        // Variables: x (free, dim) then mu (nonneg, k).
        // minimize sum(mu)  s.t.  T x - sum(mu_j w_j) = 0,
        //                         facet.normal . x = facet.offset,
        //                         all ball facet inequalities hold for x.
        let n = dim + k;
        let mut objective = vec![Rational::zero(); n];
        for j in 0..k {
            objective[dim + j] = Rational::one();
        }
        let mut nonneg = vec![false; n];
        for j in 0..k {
            nonneg[dim + j] = true;
        }
        let mut lp = LinearProgram::new(n, objective, Sense::Minimize).with_nonnegative(nonneg);
        for r in 0..t.codomain.dim() {
            let mut coeffs = vec![Rational::zero(); n];
            for c in 0..dim {
                coeffs[c] = t.matrix.get(r, c).clone();
            }
            for j in 0..k {
                coeffs[dim + j] = -cod_verts[j][r].clone();
            }
            lp.push(Constraint::eq(coeffs, Rational::zero()));
        }
        let mut on_facet = vec![Rational::zero(); n];
        on_facet[..dim].clone_from_slice(&facet.normal);
        lp.push(Constraint::eq(on_facet, facet.offset.clone()));
        for other in &facets {
            let mut coeffs = vec![Rational::zero(); n];
            coeffs[..dim].clone_from_slice(&other.normal);
            lp.push(Constraint::le(coeffs, other.offset.clone()));
        }
        match solve_lp(&lp) {
            Ok(sol) => {
                if best.as_ref().map_or(true, |(b, _)| sol.optimum < *b) {
                    let x = sol.witness[..dim].to_vec();
                    best = Some((sol.optimum, x));
                }
            }
            // A redundant facet description can make a facet LP infeasible;
            // such a facet contributes nothing to the sphere.
            Err(LpError::Infeasible) => continue,
            Err(e) => unreachable!("facet LP bounded by construction: {e}"),
        }
    }
    Ok(best.expect("full-dimensional ball has at least one facet"))
}

pub fn is_one_bounded(t: &Operator) -> bool {
    image_vertices_in_ball(t) || op_norm(t) <= Rational::one()
}

/// Syntactic 1-boundedness witness: every domain-ball vertex maps onto a
/// listed point of the codomain ball, whose norm is at most one by
/// definition of the gauge. Constructions that insert those images into the
/// ball make this hold by construction, avoiding one LP per vertex.
pub fn image_vertices_in_ball(t: &Operator) -> bool {
    t.domain
        .ball()
        .vertices()
        .iter()
        .all(|v| t.codomain.ball().vertices().binary_search(&t.apply(v)).is_ok())
}

/// `op_norm(T) <= 1` and `lower_isometry_bound(T) >= 1 - eps`.
pub fn is_eps_isometry(t: &Operator, eps: &Rational) -> Result<bool, SpaceError> {
    if !is_one_bounded(t) {
        return Ok(false);
    }
    Ok(lower_isometry_bound(t)? >= Rational::one() - eps)
}

pub fn is_isometric_embedding(t: &Operator) -> Result<bool, SpaceError> {
    is_eps_isometry(t, &Rational::zero())
}

/// An increasing chain of spaces with projection-compatible bonds. Stage 0 is
/// the trivial space and every bond embeds by a coordinate inclusion, so all
/// composite projections are exact matrix products of the stored ones.
#[derive(Clone, Debug)]
pub struct Chain {
    stages: Vec<PolyBanachSpace>,
    /// `bonds[i]` is (embed, project) between stages i and i+1.
    bonds: Vec<(Operator, Operator)>,
}

impl Chain {
    pub fn new(
        stages: Vec<PolyBanachSpace>,
        bonds: Vec<(Operator, Operator)>,
    ) -> Result<Self, SpaceError> {
        if stages.is_empty() {
            return Err(SpaceError::ChainInvalid("no stages".into()));
        }
        if !stages[0].is_trivial() {
            return Err(SpaceError::ChainInvalid(
                "stage 0 must be the trivial space".into(),
            ));
        }
        if bonds.len() + 1 != stages.len() {
            return Err(SpaceError::ChainInvalid(format!(
                "{} stages need {} bonds, got {}",
                stages.len(),
                stages.len() - 1,
                bonds.len()
            )));
        }
        for (i, (embed, project)) in bonds.iter().enumerate() {
            if embed.domain() != &stages[i] || embed.codomain() != &stages[i + 1] {
                return Err(SpaceError::ChainInvalid(format!(
                    "bond {i} embed endpoints do not match stages"
                )));
            }
            if project.domain() != &stages[i + 1] || project.codomain() != &stages[i] {
                return Err(SpaceError::ChainInvalid(format!(
                    "bond {i} projection endpoints do not match stages"
                )));
            }
            if !embed.matrix().is_coordinate_inclusion() {
                return Err(SpaceError::ChainInvalid(format!(
                    "bond {i} embed is not a coordinate inclusion"
                )));
            }
            if !project.matrix().mul(embed.matrix()).is_identity() {
                return Err(SpaceError::ChainInvalid(format!(
                    "bond {i} projection is not a left inverse of the embed"
                )));
            }
            if !is_one_bounded(embed) || !is_one_bounded(project) {
                return Err(SpaceError::ChainInvalid(format!(
                    "bond {i} operators are not 1-bounded"
                )));
            }
        }
        Ok(Chain { stages, bonds })
    }

    /// Builds the chain `{0} <= spaces[0] <= spaces[1] <= ...` with
    /// coordinate inclusions and coordinate projections, validating that
    /// those are 1-bounded for the given balls.
    pub fn coordinate_chain(spaces: Vec<PolyBanachSpace>) -> Result<Self, SpaceError> {
        let mut stages = vec![PolyBanachSpace::trivial()];
        stages.extend(spaces);
        let mut bonds = Vec::new();
        for w in stages.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.dim() > b.dim() {
                return Err(SpaceError::ChainInvalid(
                    "stage dimensions must be nondecreasing".into(),
                ));
            }
            let embed = Operator::coordinate_inclusion(a, b)?;
            let mut pm = Matrix::zeros(a.dim(), b.dim());
            for i in 0..a.dim() {
                pm.set(i, i, Rational::one());
            }
            let project = Operator::new(b.clone(), a.clone(), pm)?;
            bonds.push((embed, project));
        }
        Chain::new(stages, bonds)
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stage(&self, i: usize) -> &PolyBanachSpace {
        &self.stages[i]
    }

    pub fn stages(&self) -> &[PolyBanachSpace] {
        &self.stages
    }

    pub fn bond(&self, i: usize) -> &(Operator, Operator) {
        &self.bonds[i]
    }

    /// Composite embed from stage `from` up to stage `to`.
    pub fn embedding(&self, from: usize, to: usize) -> Operator {
        assert!(from <= to && to < self.stages.len());
        let mut e = Operator::identity(&self.stages[from]);
        for i in from..to {
            e = self.bonds[i].0.compose(&e).expect("chain shapes");
        }
        e
    }

    /// Composite projection from stage `from` down to stage `to`.
    pub fn projection(&self, from: usize, to: usize) -> Operator {
        assert!(to <= from && from < self.stages.len());
        let mut p = Operator::identity(&self.stages[from]);
        for i in (to..from).rev() {
            p = self.bonds[i].1.compose(&p).expect("chain shapes");
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::convex_hull;
    use crate::rational::{int, rat};

    fn hexagon_space() -> PolyBanachSpace {
        PolyBanachSpace::new(
            convex_hull(
                2,
                vec![
                    vec![int(1), int(0)],
                    vec![rat(1, 2), int(1)],
                    vec![rat(-1, 2), int(1)],
                    vec![int(-1), int(0)],
                    vec![rat(-1, 2), int(-1)],
                    vec![rat(1, 2), int(-1)],
                ],
            )
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn linf_norm_is_max_abs() {
        let s = PolyBanachSpace::linf(2);
        assert_eq!(s.norm(&[rat(1, 2), rat(1, 3)]).unwrap(), rat(1, 2));
        assert_eq!(s.norm(&[int(0), int(0)]).unwrap(), int(0));
        assert_eq!(s.norm(&[int(-3), int(2)]).unwrap(), int(3));
    }

    #[test]
    fn l1_norm_is_sum_abs() {
        let s = PolyBanachSpace::l1(3);
        assert_eq!(
            s.norm(&[rat(1, 2), rat(-1, 3), int(1)]).unwrap(),
            rat(1, 2) + rat(1, 3) + int(1)
        );
    }

    #[test]
    fn asymmetric_ball_rejected() {
        let ball = convex_hull(1, vec![vec![int(1)], vec![int(-2)]]).unwrap();
        assert_eq!(
            PolyBanachSpace::new(ball).unwrap_err(),
            SpaceError::NotSymmetric
        );
    }

    #[test]
    fn flat_ball_rejected() {
        let ball = convex_hull(2, vec![vec![int(1), int(0)], vec![int(-1), int(0)]]).unwrap();
        assert!(matches!(
            PolyBanachSpace::new(ball).unwrap_err(),
            SpaceError::NotFullDimensional { rank: 1, dim: 2 }
        ));
    }

    #[test]
    fn norm_dimension_mismatch() {
        let s = PolyBanachSpace::linf(2);
        assert!(matches!(
            s.norm(&[int(1)]).unwrap_err(),
            SpaceError::DimensionMismatch { .. }
        ));
    }

    #[test]
    fn norm_against_facet_oracle_on_hexagon() {
        // Independent route: ||x|| = max over facets of (normal.x)/offset.
        let s = hexagon_space();
        let dual = s.dual_ball().unwrap().clone();
        let facet_norm = |x: &[Rational]| -> Rational {
            dual.halfspaces()
                .iter()
                .map(|h| {
                    let num = h
                        .normal
                        .iter()
                        .zip(x)
                        .fold(int(0), |acc, (a, b)| acc + a * b);
                    num / &h.offset
                })
                .max()
                .unwrap()
        };
        let samples = vec![
            vec![int(1), int(0)],
            vec![rat(1, 2), rat(1, 2)],
            vec![rat(-3, 7), rat(5, 9)],
            vec![int(2), int(-3)],
            vec![int(0), int(0)],
        ];
        for x in samples {
            assert_eq!(s.norm(&x).unwrap(), facet_norm(&x), "at {x:?}");
        }
    }

    #[test]
    fn norm_axioms_on_samples() {
        let s = hexagon_space();
        let xs = vec![
            vec![rat(1, 3), rat(2, 5)],
            vec![int(-1), int(2)],
            vec![rat(7, 2), rat(-1, 4)],
        ];
        for x in &xs {
            let nx = s.norm(x).unwrap();
            // homogeneity
            let scaled: Vec<Rational> = x.iter().map(|v| v * rat(-3, 2)).collect();
            assert_eq!(s.norm(&scaled).unwrap(), nx.clone() * rat(3, 2));
            // definiteness
            assert_eq!(nx == int(0), x.iter().all(|v| v == &int(0)));
            for y in &xs {
                let sum: Vec<Rational> = x.iter().zip(y).map(|(a, b)| a + b).collect();
                assert!(s.norm(&sum).unwrap() <= nx.clone() + s.norm(y).unwrap());
            }
        }
    }

    #[test]
    fn op_norm_identity_and_zero() {
        let s = hexagon_space();
        assert_eq!(op_norm(&Operator::identity(&s)), int(1));
        assert_eq!(op_norm(&Operator::zero(&s, &s)), int(0));
    }

    #[test]
    fn op_norm_submultiplicative_and_sampling_lower_bound() {
        let s = hexagon_space();
        let t = Operator::new(
            s.clone(),
            s.clone(),
            Matrix::from_rows(vec![vec![rat(1, 2), rat(1, 3)], vec![int(0), rat(-2, 3)]]),
        )
        .unwrap();
        let u = Operator::new(
            s.clone(),
            s.clone(),
            Matrix::from_rows(vec![vec![int(1), int(1)], vec![rat(1, 5), int(0)]]),
        )
        .unwrap();
        let tu = t.compose(&u).unwrap();
        assert!(op_norm(&tu) <= op_norm(&t) * op_norm(&u));
        // Sampled boundary points never beat the exact value, and some domain
        // vertex attains it.
        let exact = op_norm(&t);
        let mut attained = false;
        for v in s.ball().vertices() {
            let n = s.norm(&t.apply(v)).unwrap();
            assert!(n <= exact);
            if n == exact {
                attained = true;
            }
        }
        assert!(attained);
    }

    #[test]
    fn lower_bound_identity_and_scaling() {
        let s = PolyBanachSpace::linf(2);
        let id = Operator::identity(&s);
        assert_eq!(lower_isometry_bound(&id).unwrap(), int(1));
        let half = id.scale(&rat(1, 2));
        assert_eq!(lower_isometry_bound(&half).unwrap(), rat(1, 2));
        assert!(lower_isometry_bound(&half).unwrap() <= op_norm(&half));
    }

    #[test]
    fn lower_bound_against_grid_oracle() {
        // Injective skew map on the hexagon space; the sphere minimum found
        // by the facet LPs can never exceed any sampled boundary value, and
        // a fine boundary walk comes back down to it.
        let s = hexagon_space();
        let t = Operator::new(
            s.clone(),
            s.clone(),
            Matrix::from_rows(vec![vec![rat(1, 2), rat(1, 8)], vec![int(0), rat(3, 4)]]),
        )
        .unwrap();
        let exact = lower_isometry_bound(&t).unwrap();
        // Walk each edge of the ball polygon with a fine rational grid.
        let verts = s.ball().vertices().to_vec();
        let edge_pairs: Vec<(Vec<Rational>, Vec<Rational>)> = vec![
            (verts[0].clone(), verts[1].clone()),
            (verts[0].clone(), verts[2].clone()),
            (verts[1].clone(), verts[3].clone()),
            (verts[2].clone(), verts[4].clone()),
            (verts[3].clone(), verts[5].clone()),
            (verts[4].clone(), verts[5].clone()),
        ];
        let mut sampled_min: Option<Rational> = None;
        for (a, b) in edge_pairs {
            // On the segment, check that both endpoints lie on the sphere
            // before trusting it as an edge.
            if s.norm(&a).unwrap() != int(1) || s.norm(&b).unwrap() != int(1) {
                continue;
            }
            for k in 0..=16i64 {
                let lam = rat(k, 16);
                let x: Vec<Rational> = a
                    .iter()
                    .zip(&b)
                    .map(|(p, q)| p * (int(1) - &lam) + q * &lam)
                    .collect();
                let nx = s.norm(&x).unwrap();
                if nx == int(0) {
                    continue;
                }
                let unit: Vec<Rational> = x.iter().map(|v| v / &nx).collect();
                let val = s.norm(&t.apply(&unit)).unwrap();
                assert!(val >= exact, "sample below exact minimum");
                if sampled_min.as_ref().map_or(true, |m| val < *m) {
                    sampled_min = Some(val);
                }
            }
        }
        let sampled = sampled_min.unwrap();
        // Grid resolution 1/16 on each edge brackets the true minimum.
        assert!(sampled >= exact && sampled - exact <= rat(1, 8));
    }

    #[test]
    fn eps_isometry_predicates() {
        let s = PolyBanachSpace::linf(2);
        let id = Operator::identity(&s);
        assert!(is_isometric_embedding(&id).unwrap());
        assert!(is_eps_isometry(&id, &rat(1, 4)).unwrap());
        let half = id.scale(&rat(1, 2));
        assert!(!is_eps_isometry(&half, &rat(1, 4)).unwrap());
        assert!(is_eps_isometry(&half, &rat(1, 2)).unwrap());
        // not 1-bounded -> false regardless of the lower bound
        let double = id.scale(&int(2));
        assert!(!is_eps_isometry(&double, &rat(1, 2)).unwrap());
    }

    #[test]
    fn trivial_domain_conventions() {
        let t = PolyBanachSpace::trivial();
        let s = PolyBanachSpace::linf(2);
        let z = Operator::zero(&t, &s);
        assert_eq!(op_norm(&z), int(0));
        assert_eq!(lower_isometry_bound(&z).unwrap(), int(1));
        assert!(is_isometric_embedding(&z).unwrap());
        assert_eq!(t.norm(&[]).unwrap(), int(0));
    }

    #[test]
    fn chain_projection_composition() {
        let chain = Chain::coordinate_chain(vec![
            PolyBanachSpace::linf(1),
            PolyBanachSpace::linf(2),
            PolyBanachSpace::linf(3),
        ])
        .unwrap();
        assert_eq!(chain.len(), 4);
        for k in 0..chain.len() {
            for m in k..chain.len() {
                for n in m..chain.len() {
                    let direct = chain.projection(n, k);
                    let composed = chain
                        .projection(m, k)
                        .compose(&chain.projection(n, m))
                        .unwrap();
                    assert_eq!(direct.matrix(), composed.matrix(), "P {n}->{m}->{k}");
                }
            }
        }
        let e = chain.embedding(1, 3);
        let p = chain.projection(3, 1);
        assert!(p.compose(&e).unwrap().matrix().is_identity());
    }

    #[test]
    fn coordinate_chain_rejects_shrinking_dims() {
        let err = Chain::coordinate_chain(vec![PolyBanachSpace::linf(2), PolyBanachSpace::linf(1)])
            .unwrap_err();
        assert!(matches!(err, SpaceError::ChainInvalid(_)));
    }
}
