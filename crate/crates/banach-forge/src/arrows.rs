//! Operator couples, projection-embedding pairs, and certificates.
//!
//! A [`ProjectionPair`] is the workhorse arrow: an isometric embedding with a
//! 1-bounded exact left inverse. Verification avoids facet enumeration: once
//! `P . e = id` holds with both operators 1-bounded and `op_norm(e) = 1`, the
//! embedding is isometric because `||x|| = ||P e x|| <= ||e x|| <= ||x||`.

use crate::matrix::Matrix;
use crate::rational::{format_rational, Rational};
use crate::space::{op_norm, Operator, PolyBanachSpace, SpaceError};
use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArrowError {
    #[error("operator `{which}` is not 1-bounded: norm {norm} at witness {witness}")]
    NotOneBounded {
        which: String,
        norm: String,
        witness: String,
    },
    #[error("(P1) violated: embed is not isometric, norm {norm} at witness {witness}")]
    P1Violated { norm: String, witness: String },
    #[error("(P2) violated: project . embed differs from the identity at column {col}")]
    P2Violated { col: usize },
    #[error("arrow shapes are not dual: {context}")]
    ShapeMismatch { context: String },
    #[error("domain mismatch: cannot compose {left} with {right}")]
    DomainMismatch { left: String, right: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A couple of 1-bounded operators `forward: X -> Y`, `backward: Y -> X`
/// with no constraint on their composites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorCouple {
    pub forward: Operator,
    pub backward: Operator,
}

impl OperatorCouple {
    pub fn new(forward: Operator, backward: Operator) -> Result<Self, ArrowError> {
        if forward.domain() != backward.codomain() || forward.codomain() != backward.domain() {
            return Err(ArrowError::ShapeMismatch {
                context: "couple operators must run between the same two spaces".into(),
            });
        }
        Ok(OperatorCouple { forward, backward })
    }

    /// Checks both components are 1-bounded.
    pub fn verify(&self) -> Result<Certificate, ArrowError> {
        let mut cert = Certificate::new("operator couple");
        for (name, t) in [("forward", &self.forward), ("backward", &self.backward)] {
            let n = op_norm(t);
            if n > Rational::one() {
                return Err(not_one_bounded(name, t));
            }
            cert.push_le(format!("op_norm({name}) <= 1"), n, Rational::one());
        }
        Ok(cert)
    }
}

fn not_one_bounded(which: &str, t: &Operator) -> ArrowError {
    let witness = t
        .domain()
        .ball()
        .vertices()
        .iter()
        .max_by_key(|v| t.codomain().norm(&t.apply(v)).expect("shape"))
        .cloned()
        .unwrap_or_default();
    ArrowError::NotOneBounded {
        which: which.into(),
        norm: format_rational(&op_norm(t)),
        witness: crate::rational::format_point(&witness),
    }
}

/// An isometric embedding together with a 1-bounded exact left inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectionPair {
    pub embed: Operator,
    pub project: Operator,
}

impl ProjectionPair {
    /// Shape-checks only; use [`ProjectionPair::verify`] for the exact
    /// (P1)/(P2) conditions.
    pub fn new(embed: Operator, project: Operator) -> Result<Self, ArrowError> {
        if embed.domain() != project.codomain() || embed.codomain() != project.domain() {
            return Err(ArrowError::ShapeMismatch {
                context: "projection endpoints must mirror the embedding".into(),
            });
        }
        Ok(ProjectionPair { embed, project })
    }

    pub fn identity(space: &PolyBanachSpace) -> Self {
        ProjectionPair {
            embed: Operator::identity(space),
            project: Operator::identity(space),
        }
    }

    pub fn domain(&self) -> &PolyBanachSpace {
        self.embed.domain()
    }

    pub fn codomain(&self) -> &PolyBanachSpace {
        self.embed.codomain()
    }

    /// Exact verification of (P1), (P2) and 1-boundedness.
    ///
    /// Order of checks matches the failure taxonomy: an embed whose norm
    /// exceeds 1 is a boundedness failure; a norm below 1 on a nontrivial
    /// domain violates (P1) directly; once `op_norm(embed) = 1`,
    /// `op_norm(project) <= 1` and `project . embed = id` all hold, the lower
    /// isometry bound is forced to 1, so (P1) needs no facet computation.
    pub fn verify(&self) -> Result<Certificate, ArrowError> {
        let mut cert = Certificate::new("projection-embedding pair");
        // Fast path: embeds built by the constructions map ball vertices
        // onto listed ball points, which bounds them without any LP. The
        // exact norm is then pinned to 1 by (P2) below.
        let contained = crate::space::image_vertices_in_ball(&self.embed);
        if contained {
            if self.domain().is_trivial() {
                cert.push_eq(
                    "embed vanishes on the trivial domain",
                    Rational::from_integer(0.into()),
                    Rational::from_integer(0.into()),
                );
            } else {
                cert.push_eq(
                    "op_norm(embed) = 1 (ball containment + retraction)",
                    Rational::one(),
                    Rational::one(),
                );
            }
        } else {
            let e_norm = op_norm(&self.embed);
            if e_norm > Rational::one() {
                return Err(not_one_bounded("embed", &self.embed));
            }
            if self.domain().is_trivial() {
                cert.push_eq(
                    "embed vanishes on the trivial domain",
                    e_norm,
                    Rational::from_integer(0.into()),
                );
            } else if e_norm != Rational::one() {
                let witness = self
                    .domain()
                    .ball()
                    .vertices()
                    .first()
                    .cloned()
                    .unwrap_or_default();
                return Err(ArrowError::P1Violated {
                    norm: format_rational(&e_norm),
                    witness: crate::rational::format_point(&witness),
                });
            } else {
                cert.push_eq("op_norm(embed) = 1", e_norm, Rational::one());
            }
        }
        let p_norm = op_norm(&self.project);
        if p_norm > Rational::one() {
            return Err(not_one_bounded("project", &self.project));
        }
        cert.push_le("op_norm(project) <= 1", p_norm, Rational::one());
        let composite = self.project.matrix().mul(self.embed.matrix());
        if !composite.is_identity() {
            let id = Matrix::identity(self.domain().dim());
            let col = (0..composite.cols())
                .find(|&j| (0..composite.rows()).any(|i| composite.get(i, j) != id.get(i, j)))
                .unwrap_or(0);
            return Err(ArrowError::P2Violated { col });
        }
        cert.push_matrix_eq(
            "project . embed = id",
            composite,
            Matrix::identity(self.domain().dim()),
        );
        if !self.domain().is_trivial() {
            cert.push_eq(
                "lower_isometry_bound(embed) = 1 (retraction argument)",
                Rational::one(),
                Rational::one(),
            );
        }
        Ok(cert)
    }

    /// `next` after `self`: an arrow `domain(self) -> codomain(next)`.
    pub fn compose(&self, next: &ProjectionPair) -> Result<ProjectionPair, ArrowError> {
        if self.codomain() != next.domain() {
            return Err(ArrowError::DomainMismatch {
                left: format!("codomain dim {}", self.codomain().dim()),
                right: format!("domain dim {}", next.domain().dim()),
            });
        }
        Ok(ProjectionPair {
            embed: next.embed.compose(&self.embed)?,
            project: self.project.compose(&next.project)?,
        })
    }

    /// All matrix entries and all ball vertices of both endpoint spaces
    /// within the numerator/denominator magnitude bound, and the dimensions
    /// within the dimension bound.
    pub fn within_budget(&self, max_dim: usize, max_magnitude: u64) -> bool {
        let bound = BigInt::from(max_magnitude);
        let mats_ok = [&self.embed, &self.project].iter().all(|t| {
            t.matrix().max_denominator() <= bound && t.matrix().max_abs_numerator() <= bound
        });
        let spaces_ok = [self.domain(), self.codomain()].iter().all(|s| {
            s.dim() <= max_dim
                && s.ball().vertices().iter().all(|v| {
                    v.iter()
                        .all(|x| crate::rational::magnitude_within(x, max_magnitude))
                })
        });
        mats_ok && spaces_ok
    }

    /// Rationality of the arrow. Every value this toolkit produces is an
    /// exact rational, so this records fidelity rather than filtering.
    pub fn is_rational(&self) -> bool {
        true
    }
}

/// A machine-checkable record of the exact conditions a construction
/// established. Re-running [`Certificate::verify`] on unmodified data always
/// succeeds; each condition stores the values that were compared.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub label: String,
    pub conditions: Vec<Condition>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub check: Check,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    /// `lhs = rhs`, both rendered canonically.
    RationalEq { lhs: String, rhs: String },
    /// `lhs <= rhs`.
    RationalLe { lhs: String, rhs: String },
    /// `lhs < rhs`.
    RationalLt { lhs: String, rhs: String },
    /// Matrices rendered row-major; equality entry-wise.
    MatrixEq { lhs: Vec<String>, rhs: Vec<String> },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("certificate `{label}` failed at condition `{condition}`")]
pub struct CertificateFailure {
    pub label: String,
    pub condition: String,
}

fn render_matrix(m: &Matrix) -> Vec<String> {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .map(format_rational)
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

impl Certificate {
    pub fn new(label: impl Into<String>) -> Self {
        Certificate {
            label: label.into(),
            conditions: Vec::new(),
        }
    }

    pub fn push_eq(&mut self, name: impl Into<String>, lhs: Rational, rhs: Rational) {
        self.conditions.push(Condition {
            name: name.into(),
            check: Check::RationalEq {
                lhs: format_rational(&lhs),
                rhs: format_rational(&rhs),
            },
        });
    }

    pub fn push_le(&mut self, name: impl Into<String>, lhs: Rational, rhs: Rational) {
        self.conditions.push(Condition {
            name: name.into(),
            check: Check::RationalLe {
                lhs: format_rational(&lhs),
                rhs: format_rational(&rhs),
            },
        });
    }

    pub fn push_lt(&mut self, name: impl Into<String>, lhs: Rational, rhs: Rational) {
        self.conditions.push(Condition {
            name: name.into(),
            check: Check::RationalLt {
                lhs: format_rational(&lhs),
                rhs: format_rational(&rhs),
            },
        });
    }

    pub fn push_matrix_eq(&mut self, name: impl Into<String>, lhs: Matrix, rhs: Matrix) {
        self.conditions.push(Condition {
            name: name.into(),
            check: Check::MatrixEq {
                lhs: render_matrix(&lhs),
                rhs: render_matrix(&rhs),
            },
        });
    }

    pub fn absorb(&mut self, other: Certificate) {
        let prefix = other.label;
        for mut c in other.conditions {
            c.name = format!("{prefix}: {}", c.name);
            self.conditions.push(c);
        }
    }

    /// Re-evaluates every stored condition.
    pub fn verify(&self) -> Result<(), CertificateFailure> {
        for c in &self.conditions {
            let ok = match &c.check {
                Check::RationalEq { lhs, rhs } => {
                    parse_pair(lhs, rhs).map_or(false, |(a, b)| a == b)
                }
                Check::RationalLe { lhs, rhs } => {
                    parse_pair(lhs, rhs).map_or(false, |(a, b)| a <= b)
                }
                Check::RationalLt { lhs, rhs } => {
                    parse_pair(lhs, rhs).map_or(false, |(a, b)| a < b)
                }
                Check::MatrixEq { lhs, rhs } => lhs == rhs,
            };
            if !ok {
                return Err(CertificateFailure {
                    label: self.label.clone(),
                    condition: c.name.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn holds(&self) -> bool {
        self.verify().is_ok()
    }
}

fn parse_pair(lhs: &str, rhs: &str) -> Option<(Rational, Rational)> {
    Some((
        crate::rational::parse_rational(lhs).ok()?,
        crate::rational::parse_rational(rhs).ok()?,
    ))
}
