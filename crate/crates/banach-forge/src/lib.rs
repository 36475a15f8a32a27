//! Exact-arithmetic toolkit for finite-dimensional normed spaces whose unit
//! balls are rational polytopes.
//!
//! Everything is computed over arbitrary-precision rationals: the simplex
//! solver, polytope conversions, Minkowski-functional norms, operator norms,
//! the amalgamation and rationalization constructions, the budgeted generic
//! chain engine, and the embedding/back-and-forth ladders built on top of it.
//! No floating point is used anywhere; every inequality a construction claims
//! is recorded in a re-checkable [`Certificate`].

pub mod arrows;
pub mod construct;
pub mod fraisse;
pub mod lp;
pub mod manifest;
pub mod matrix;
pub mod polytope;
pub mod rational;
pub mod seeded;
pub mod space;
pub mod textio;
pub mod universal;

pub use arrows::{ArrowError, Certificate, Check, Condition, OperatorCouple, ProjectionPair};
pub use construct::{
    corrected_sum, pushout, rationalize_pair, rationalize_space, retraction_pairs, ConstructError,
    CorrectedSum, Pushout, RationalizedPair, RationalizedSpace, RetractionPairs,
};

pub use fraisse::{ComplexityBudget, FraisseError, GenericRun, Requirement};
pub use lp::{solve_lp, Constraint, LinearProgram, LpError, LpSolution, Relation, Sense};
pub use matrix::Matrix;
pub use polytope::{convex_hull, h_to_v, linear_image, v_to_h, GeometryError, HPolytope, Halfspace, VPolytope};
pub use rational::{format_rational, parse_rational, rat, Rational};
pub use space::{
    is_eps_isometry, is_isometric_embedding, is_one_bounded, lower_isometry_bound, op_norm, Chain,
    Operator, PolyBanachSpace, SpaceError,
};

pub use universal::{
    back_and_forth, embed_chain, extend_embedding, improve_embedding, ApproxEmbedding,
    BackAndForthState, EmbeddingLadder, ExtendedEmbedding, UniversalError,
};

