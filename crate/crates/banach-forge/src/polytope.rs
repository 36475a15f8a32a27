//! Exact polytopes in vertex and halfspace representation.
//!
//! V-representation is primary. Conversions go through polar duality plus
//! incremental halfspace insertion, with redundancy eliminated by LP, so
//! round trips are exact. Intended for desk dimensions (<= ~10).

use crate::lp::{solve_lp, Constraint, LinearProgram, LpError, Sense};
use crate::matrix::Matrix;
use crate::rational::Rational;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("unbounded input")]
    UnboundedInput,
    #[error("infeasible (empty) input")]
    InfeasibleInput,
    #[error("degenerate input: polytope is not full-dimensional")]
    DegenerateInput,
}

/// A polytope as the convex hull of finitely many rational points.
///
/// Canonical form: vertices sorted lexicographically; after [`convex_hull`]
/// no vertex is a convex combination of the others, so polytope equality is
/// syntactic equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VPolytope {
    dim: usize,
    vertices: Vec<Vec<Rational>>,
}

/// `normal . x <= offset`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Halfspace {
    pub normal: Vec<Rational>,
    pub offset: Rational,
}

/// A bounded intersection of halfspaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HPolytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
}

fn check_dims(dim: usize, points: &[Vec<Rational>]) -> Result<(), GeometryError> {
    for p in points {
        if p.len() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
    }
    Ok(())
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

impl VPolytope {
    /// Deduplicated, sorted vertex list without redundancy elimination.
    /// Points that are convex combinations of others may remain; all norm
    /// computations stay exact regardless.
    pub fn spanned(dim: usize, points: Vec<Vec<Rational>>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyInput);
        }
        check_dims(dim, &points)?;
        let mut set: Vec<Vec<Rational>> = points;
        set.sort();
        set.dedup();
        Ok(VPolytope {
            dim,
            vertices: set,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<Rational>] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Exact membership test by LP feasibility.
    pub fn contains(&self, x: &[Rational]) -> Result<bool, GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(point_in_hull(x, &self.vertices))
    }

    /// Rank of the vertex set as vectors (full-dimensionality witness for
    /// symmetric bodies).
    pub fn vertex_rank(&self) -> usize {
        Matrix::from_rows_shaped(
            self.vertices.len(),
            self.dim,
            self.vertices.clone(),
        )
        .rank()
    }

    pub fn is_symmetric(&self) -> bool {
        self.vertices
            .iter()
            .all(|v| self.vertices.binary_search(&v.iter().map(|x| -x).collect()).is_ok())
    }

    /// Remove vertices that are convex combinations of the others.
    pub fn minimized(&self) -> VPolytope {
        let minimal = minimal_hull_points(self.vertices.clone());
        VPolytope {
            dim: self.dim,
            vertices: minimal,
        }
    }

    pub fn scale(&self, s: &Rational) -> VPolytope {
        let mut vertices: Vec<Vec<Rational>> = self
            .vertices
            .iter()
            .map(|v| v.iter().map(|x| x * s).collect())
            .collect();
        vertices.sort();
        vertices.dedup();
        VPolytope {
            dim: self.dim,
            vertices,
        }
    }
}

/// Feasibility LP: is `x` a convex combination of `points`?
fn point_in_hull(x: &[Rational], points: &[Vec<Rational>]) -> bool {
    let dim = x.len();
    let n = points.len();
    if n == 0 {
        return false;
    }
    let mut lp = LinearProgram::new(n, vec![Rational::zero(); n], Sense::Minimize)
        .with_nonnegative(vec![true; n]);
    for d in 0..dim {
        let coeffs: Vec<Rational> = points.iter().map(|p| p[d].clone()).collect();
        lp.push(Constraint::eq(coeffs, x[d].clone()));
    }
    lp.push(Constraint::eq(vec![Rational::one(); n], Rational::one()));
    solve_lp(&lp).is_ok()
}

fn minimal_hull_points(mut points: Vec<Vec<Rational>>) -> Vec<Vec<Rational>> {
    points.sort();
    points.dedup();
    let mut keep: Vec<bool> = vec![true; points.len()];
    for i in 0..points.len() {
        let others: Vec<Vec<Rational>> = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i && keep[j])
            .map(|(_, p)| p.clone())
            .collect();
        if !others.is_empty() && point_in_hull(&points[i], &others) {
            keep[i] = false;
        }
    }
    points
        .into_iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(p, _)| p)
        .collect()
}

/// The unique minimal vertex set with the same hull, sorted.
pub fn convex_hull(dim: usize, points: Vec<Vec<Rational>>) -> Result<VPolytope, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    check_dims(dim, &points)?;
    Ok(VPolytope {
        dim,
        vertices: minimal_hull_points(points),
    })
}

/// Exact image `{ T x : x in p }` as a polytope (hull of vertex images).
pub fn linear_image(p: &VPolytope, t: &Matrix) -> Result<VPolytope, GeometryError> {
    if t.cols() != p.dim {
        return Err(GeometryError::DimensionMismatch {
            expected: p.dim,
            got: t.cols(),
        });
    }
    convex_hull(
        t.rows(),
        p.vertices.iter().map(|v| t.apply(v)).collect(),
    )
}

/// Like [`linear_image`] but without redundancy elimination.
pub fn linear_image_spanned(p: &VPolytope, t: &Matrix) -> Result<VPolytope, GeometryError> {
    if t.cols() != p.dim {
        return Err(GeometryError::DimensionMismatch {
            expected: p.dim,
            got: t.cols(),
        });
    }
    VPolytope::spanned(
        t.rows(),
        p.vertices.iter().map(|v| t.apply(v)).collect(),
    )
}

impl HPolytope {
    pub fn new(dim: usize, halfspaces: Vec<Halfspace>) -> Result<Self, GeometryError> {
        for h in &halfspaces {
            if h.normal.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: h.normal.len(),
                });
            }
        }
        Ok(HPolytope { dim, halfspaces })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn contains(&self, x: &[Rational]) -> Result<bool, GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .halfspaces
            .iter()
            .all(|h| dot(&h.normal, x) <= h.offset))
    }

    /// Scale every halfspace to a primitive integer vector, drop exact
    /// duplicates and LP-redundant halfspaces, sort lexicographically.
    pub fn canonicalize(&self) -> HPolytope {
        let mut hs: Vec<Halfspace> = self.halfspaces.iter().map(canonical_halfspace).collect();
        hs.sort_by(|a, b| (&a.normal, &a.offset).cmp(&(&b.normal, &b.offset)));
        hs.dedup();
        // Remove halfspaces implied by the rest.
        let mut keep = vec![true; hs.len()];
        for i in 0..hs.len() {
            let rest: Vec<&Halfspace> = hs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i && keep[j])
                .map(|(_, h)| h)
                .collect();
            if rest.is_empty() {
                continue;
            }
            let mut lp = LinearProgram::new(self.dim, hs[i].normal.clone(), Sense::Maximize);
            for h in &rest {
                lp.push(Constraint::le(h.normal.clone(), h.offset.clone()));
            }
            match solve_lp(&lp) {
                Ok(sol) if sol.optimum <= hs[i].offset => keep[i] = false,
                _ => {}
            }
        }
        let hs: Vec<Halfspace> = hs
            .into_iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(h, _)| h)
            .collect();
        HPolytope {
            dim: self.dim,
            halfspaces: hs,
        }
    }
}

fn canonical_halfspace(h: &Halfspace) -> Halfspace {
    // Positive scaling to a primitive integer vector over (normal, offset).
    let mut denom_lcm = BigInt::one();
    let mut numer_gcd = BigInt::zero();
    let entries: Vec<&Rational> = h.normal.iter().chain(std::iter::once(&h.offset)).collect();
    for e in &entries {
        denom_lcm = denom_lcm.lcm(e.denom());
    }
    for e in &entries {
        let scaled = (*e * Rational::from_integer(denom_lcm.clone())).numer().clone();
        numer_gcd = numer_gcd.gcd(&scaled);
    }
    if numer_gcd.is_zero() {
        numer_gcd = BigInt::one();
    }
    let factor = Rational::new(denom_lcm, numer_gcd);
    Halfspace {
        normal: h.normal.iter().map(|x| x * &factor).collect(),
        offset: &h.offset * &factor,
    }
}

/// Vertex enumeration of a bounded halfspace system by incremental insertion
/// into a bounding box, pruning non-vertices by LP after every cut.
pub fn h_to_v(p: &HPolytope) -> Result<VPolytope, GeometryError> {
    let dim = p.dim;
    if dim == 0 {
        return VPolytope::spanned(0, vec![vec![]]);
    }
    // Coordinate bounds; also detects infeasible/unbounded systems.
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for d in 0..dim {
        let mut obj = vec![Rational::zero(); dim];
        obj[d] = Rational::one();
        for sense in [Sense::Minimize, Sense::Maximize] {
            let mut lp = LinearProgram::new(dim, obj.clone(), sense);
            for h in &p.halfspaces {
                lp.push(Constraint::le(h.normal.clone(), h.offset.clone()));
            }
            match solve_lp(&lp) {
                Ok(sol) => match sense {
                    Sense::Minimize => lo.push(sol.optimum),
                    Sense::Maximize => hi.push(sol.optimum),
                },
                Err(LpError::Infeasible) => return Err(GeometryError::InfeasibleInput),
                Err(LpError::Unbounded) => return Err(GeometryError::UnboundedInput),
            }
        }
    }

    // Box vertices containing the polytope.
    let mut current: Vec<Vec<Rational>> = vec![vec![]];
    for d in 0..dim {
        let mut next = Vec::new();
        for v in &current {
            let mut a = v.clone();
            a.push(lo[d].clone());
            next.push(a);
            if hi[d] != lo[d] {
                let mut b = v.clone();
                b.push(hi[d].clone());
                next.push(b);
            }
        }
        current = next;
    }
    current = minimal_hull_points(current);

    for h in &p.halfspaces {
        let mut inside = Vec::new();
        let mut on = Vec::new();
        let mut outside = Vec::new();
        for v in &current {
            let val = dot(&h.normal, v);
            if val < h.offset {
                inside.push(v.clone());
            } else if val == h.offset {
                on.push(v.clone());
            } else {
                outside.push(v.clone());
            }
        }
        if outside.is_empty() {
            continue;
        }
        let mut candidates = inside.clone();
        candidates.extend(on.iter().cloned());
        // Every new vertex lies on a segment from a strictly-inside point to
        // a strictly-outside point; spurious interior candidates are pruned
        // by the hull minimization below.
        for a in &inside {
            let va = dot(&h.normal, a);
            for b in &outside {
                let vb = dot(&h.normal, b);
                let t = (&h.offset - &va) / (&vb - &va);
                let point: Vec<Rational> = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| x + &t * (y - x))
                    .collect();
                candidates.push(point);
            }
        }
        if candidates.is_empty() {
            return Err(GeometryError::InfeasibleInput);
        }
        current = minimal_hull_points(candidates);
    }
    VPolytope::spanned(dim, current)
}

/// Facet enumeration of a full-dimensional polytope via polar duality around
/// the vertex centroid. The output is canonical and irredundant.
pub fn v_to_h(p: &VPolytope) -> Result<HPolytope, GeometryError> {
    let dim = p.dim;
    if dim == 0 {
        return HPolytope::new(0, vec![]);
    }
    let n = p.vertices.len();
    let centroid: Vec<Rational> = (0..dim)
        .map(|d| {
            p.vertices
                .iter()
                .fold(Rational::zero(), |acc, v| acc + &v[d])
                / Rational::from_integer(BigInt::from(n as i64))
        })
        .collect();
    let shifted: Vec<Vec<Rational>> = p
        .vertices
        .iter()
        .map(|v| v.iter().zip(&centroid).map(|(x, c)| x - c).collect())
        .collect();
    if Matrix::from_rows_shaped(n, dim, shifted.clone()).rank() != dim {
        return Err(GeometryError::DegenerateInput);
    }
    // Polar body of (p - centroid); its vertices are the facet normals.
    let polar_sys = HPolytope::new(
        dim,
        shifted
            .into_iter()
            .map(|normal| Halfspace {
                normal,
                offset: Rational::one(),
            })
            .collect(),
    )?;
    let poles = h_to_v(&polar_sys)?;
    let halfspaces = poles
        .vertices()
        .iter()
        .map(|u| Halfspace {
            offset: Rational::one() + dot(u, &centroid),
            normal: u.clone(),
        })
        .collect();
    Ok(HPolytope::new(dim, halfspaces)?.canonicalize())
}
