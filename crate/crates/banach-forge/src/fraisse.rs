//! Constructive generic-sequence engine.
//!
//! Builds finite prefixes of a generic chain in the budgeted rational
//! category: every arrow out of a stage is eventually realized so that its
//! composite with a realizing arrow is exactly the bonding arrow. The
//! existence argument by Baire category is replaced by a fair dovetailing
//! scheduler: epoch `k` enumerates, in canonical order, all arrows within
//! the ladder budget `k` out of every stage present when the epoch starts,
//! and realizes them FIFO by amalgamation; stages created during an epoch
//! join the next one.

use crate::arrows::{ArrowError, Certificate, ProjectionPair};
use crate::construct::{pushout, ConstructError};
use crate::matrix::Matrix;
use crate::polytope::convex_hull;
use crate::rational::{budget_grid, magnitude_within, Rational};
use crate::space::{
    is_isometric_embedding, op_norm, Operator, PolyBanachSpace, SpaceError,
};
use num_traits::One;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FraisseError {
    #[error("budget exhausted: {detail}")]
    BudgetExhausted { detail: String },
    #[error("stage {stage} out of range (run has {stages} stages)")]
    StageOutOfRange { stage: usize, stages: usize },
    #[error("arrow domain does not match stage {stage}")]
    ArrowDomainMismatch { stage: usize },
    #[error("ledger broken at entry {index}: {detail}")]
    LedgerBroken { index: usize, detail: String },
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Arrow(#[from] ArrowError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Complexity window of the enumeration: dimensions, coordinate magnitudes
/// (numerator and denominator alike), and ball vertex counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityBudget {
    pub max_dim: usize,
    pub max_denominator: u64,
    pub max_vertex_count: usize,
}

impl ComplexityBudget {
    pub fn new(max_dim: usize, max_denominator: u64, max_vertex_count: usize) -> Self {
        assert!(max_dim > 0 && max_denominator > 0 && max_vertex_count > 0);
        ComplexityBudget {
            max_dim,
            max_denominator,
            max_vertex_count,
        }
    }
}

/// Ladder rung for epoch `k`, clamped by the cap: dimensions grow linearly,
/// denominators exponentially.
pub fn budget_ladder(epoch: usize, cap: &ComplexityBudget) -> ComplexityBudget {
    let dim = (epoch + 1).min(cap.max_dim);
    let den = 1u64
        .checked_shl(epoch.min(62) as u32)
        .unwrap_or(u64::MAX)
        .min(cap.max_denominator);
    let verts = (2 * dim + 2).min(cap.max_vertex_count);
    ComplexityBudget {
        max_dim: dim,
        max_denominator: den,
        max_vertex_count: verts.max(2),
    }
}

/// A space presentation within a budget: dimension, vertex count and every
/// vertex coordinate inside the magnitude window.
pub fn space_within_budget(space: &PolyBanachSpace, budget: &ComplexityBudget) -> bool {
    space.dim() <= budget.max_dim
        && space.ball().num_vertices() <= budget.max_vertex_count.max(1)
        && space
            .ball()
            .vertices()
            .iter()
            .all(|v| v.iter().all(|c| magnitude_within(c, budget.max_denominator)))
}

/// Canonical dedup key of a requirement `(stage, arrow)`.
pub fn requirement_key(stage: usize, arrow: &ProjectionPair) -> String {
    let mut out = format!("stage {stage}\n");
    out.push_str(&crate::textio::render_space("cod", arrow.codomain()));
    out.push_str(&crate::textio::render_operator("embed", "dom", "cod", &arrow.embed));
    out.push_str(&crate::textio::render_operator(
        "project", "cod", "dom", &arrow.project,
    ));
    out
}

#[derive(Clone, Debug)]
pub enum RequirementStatus {
    Realized {
        /// The stage whose bonding arrow the composite equals.
        stage: usize,
        witness: ProjectionPair,
        cert: Certificate,
    },
}

/// A ledger entry: an arrow out of a stage together with its realization.
#[derive(Clone, Debug)]
pub struct Requirement {
    /// Epoch that enqueued the requirement.
    pub epoch: usize,
    /// The stage the arrow leaves from.
    pub stage: usize,
    /// `f : U_stage -> Y`.
    pub arrow: ProjectionPair,
    pub status: RequirementStatus,
}

/// Cursor into the canonical enumeration of one `(stage, epoch)` stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamCursor {
    pub stage: usize,
    pub epoch: usize,
    pub consumed: usize,
}

/// Bookkeeping for a completed epoch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochMark {
    pub epoch: usize,
    /// Stage count when the epoch's streams were seeded.
    pub stages_at_seed: usize,
    /// Stage count when the epoch drained.
    pub stages_at_completion: usize,
    pub ledger_len: usize,
}

/// A finite prefix of a generic sequence: stages, coordinate-inclusion
/// bonds, the requirement ledger, and the scheduler state.
#[derive(Clone, Debug)]
pub struct GenericRun {
    seed: u64,
    cap: ComplexityBudget,
    stages: Vec<PolyBanachSpace>,
    bonds: Vec<ProjectionPair>,
    ledger: Vec<Requirement>,
    epoch: usize,
    epoch_stages_at_seed: usize,
    epoch_marks: Vec<EpochMark>,
    queue: VecDeque<StreamCursor>,
    realized: BTreeSet<String>,
    steps_done: usize,
}

impl GenericRun {
    pub fn new(seed: u64, cap: ComplexityBudget) -> Self {
        let mut queue = VecDeque::new();
        queue.push_back(StreamCursor {
            stage: 0,
            epoch: 0,
            consumed: 0,
        });
        GenericRun {
            seed,
            cap,
            stages: vec![PolyBanachSpace::trivial()],
            bonds: Vec::new(),
            ledger: Vec::new(),
            epoch: 0,
            epoch_stages_at_seed: 1,
            epoch_marks: Vec::new(),
            queue,
            realized: BTreeSet::new(),
            steps_done: 0,
        }
    }

    /// Rebuilds a run from persisted parts (see the manifest module).
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        seed: u64,
        cap: ComplexityBudget,
        stages: Vec<PolyBanachSpace>,
        bonds: Vec<ProjectionPair>,
        ledger: Vec<Requirement>,
        epoch: usize,
        epoch_stages_at_seed: usize,
        epoch_marks: Vec<EpochMark>,
        queue: VecDeque<StreamCursor>,
        steps_done: usize,
    ) -> Self {
        let realized = ledger
            .iter()
            .map(|r| requirement_key(r.stage, &r.arrow))
            .collect();
        GenericRun {
            seed,
            cap,
            stages,
            bonds,
            ledger,
            epoch,
            epoch_stages_at_seed,
            epoch_marks,
            queue,
            realized,
            steps_done,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cap(&self) -> &ComplexityBudget {
        &self.cap
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, n: usize) -> &PolyBanachSpace {
        &self.stages[n]
    }

    pub fn stages(&self) -> &[PolyBanachSpace] {
        &self.stages
    }

    pub fn bonds(&self) -> &[ProjectionPair] {
        &self.bonds
    }

    pub fn ledger(&self) -> &[Requirement] {
        &self.ledger
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn epoch_stages_at_seed(&self) -> usize {
        self.epoch_stages_at_seed
    }

    pub fn epoch_marks(&self) -> &[EpochMark] {
        &self.epoch_marks
    }

    pub fn queue(&self) -> &VecDeque<StreamCursor> {
        &self.queue
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// Composite bonding arrow from stage `n` to stage `m`.
    pub fn bonding(&self, n: usize, m: usize) -> ProjectionPair {
        assert!(n <= m && m < self.stages.len(), "bonding range");
        let mut pair = ProjectionPair::identity(&self.stages[n]);
        for k in n..m {
            pair = pair.compose(&self.bonds[k]).expect("chain shapes");
        }
        pair
    }

    /// Exhaustive canonical enumeration of the arrows out of stage `n`
    /// within `budget`. Intended for audits at small budgets; the scheduler
    /// itself consumes the same enumeration lazily.
    pub fn enumerate_arrows(&self, n: usize, budget: &ComplexityBudget) -> Vec<ProjectionPair> {
        ArrowEnumerator::new(&self.stages[n], budget.clone()).collect()
    }

    /// Realizes `steps` requirements in FIFO order, each by amalgamation,
    /// appending one stage per step. Epochs advance when the queue drains.
    pub fn extend(&mut self, steps: usize) -> Result<(), FraisseError> {
        for _ in 0..steps {
            let (stream_epoch, stage, arrow) = self.next_requirement()?;
            self.realize_by_extension(stream_epoch, stage, &arrow)?;
            self.steps_done += 1;
        }
        Ok(())
    }

    fn next_requirement(&mut self) -> Result<(usize, usize, ProjectionPair), FraisseError> {
        loop {
            let Some(front) = self.queue.front().cloned() else {
                self.advance_epoch()?;
                continue;
            };
            let budget = budget_ladder(front.epoch, &self.cap);
            let mut it = ArrowEnumerator::new(&self.stages[front.stage], budget);
            // Deterministic re-positioning: skip what this stream consumed.
            for _ in 0..front.consumed {
                if it.next().is_none() {
                    break;
                }
            }
            let mut consumed = front.consumed;
            loop {
                match it.next() {
                    None => {
                        self.queue.pop_front();
                        break;
                    }
                    Some(arrow) => {
                        consumed += 1;
                        let key = requirement_key(front.stage, &arrow);
                        if self.realized.contains(&key) {
                            continue;
                        }
                        self.queue.front_mut().expect("front exists").consumed = consumed;
                        return Ok((front.epoch, front.stage, arrow));
                    }
                }
            }
        }
    }

    fn advance_epoch(&mut self) -> Result<(), FraisseError> {
        self.epoch_marks.push(EpochMark {
            epoch: self.epoch,
            stages_at_seed: self.epoch_stages_at_seed,
            stages_at_completion: self.stages.len(),
            ledger_len: self.ledger.len(),
        });
        let old_budget = budget_ladder(self.epoch, &self.cap);
        let next = self.epoch + 1;
        let next_budget = budget_ladder(next, &self.cap);
        if next_budget == old_budget && self.stages.len() == self.epoch_stages_at_seed {
            // Ladder saturated at the cap and no new stages: the enumeration
            // cannot yield anything unrealized.
            return Err(FraisseError::BudgetExhausted {
                detail: format!(
                    "epoch {} drained with ladder saturated at dim <= {}, magnitude <= {}",
                    self.epoch, self.cap.max_dim, self.cap.max_denominator
                ),
            });
        }
        self.epoch = next;
        self.epoch_stages_at_seed = self.stages.len();
        for stage in 0..self.stages.len() {
            self.queue.push_back(StreamCursor {
                stage,
                epoch: next,
                consumed: 0,
            });
        }
        Ok(())
    }

    /// Realizes an arrow by amalgamating its codomain with the current top
    /// stage over the arrow's domain stage, then applying the budget pass.
    /// The new stage and bonding arrow extend the run; the realizing arrow
    /// satisfies `g . f = bonding` as an exact matrix identity on both
    /// components.
    fn realize_by_extension(
        &mut self,
        epoch: usize,
        stage: usize,
        arrow: &ProjectionPair,
    ) -> Result<(usize, ProjectionPair), FraisseError> {
        let top = self.stages.len() - 1;
        let zx = self.bonding(stage, top);
        let po = pushout(&zx, arrow)?;

        // General-position arrows produce an amalgam in null-space
        // coordinates; rebase so the new bonding embed is the coordinate
        // inclusion the chain convention requires.
        let (amalgam, left, right) = if po.left.embed.matrix().is_coordinate_inclusion() {
            (po.space.clone(), po.left.clone(), po.right.clone())
        } else {
            rebase_amalgam(&po)?
        };

        let epoch_budget = budget_ladder(epoch, &self.cap);
        // Budget pass. Scheduler arrows are enumerated on the epoch grid and
        // their structured amalgams stay on it, so the pass is the identity;
        // arrows fed in from outside the grid are kept exact instead of
        // re-rounded, and the certificate records which happened.
        let pass_note = if space_within_budget(&amalgam, &epoch_budget) {
            "budget pass: identity on the epoch grid".to_string()
        } else {
            "budget pass skipped: arrow outside the epoch grid, kept exact".to_string()
        };
        let (new_space, new_bond, new_g) = (amalgam, left, right);

        // Certify the realization: g . f equals the new bonding arrow from
        // the requirement's stage, on both components.
        let bond_to_top = self.bonding(stage, top);
        let full_embed = new_bond.embed.matrix().mul(bond_to_top.embed.matrix());
        let full_project = bond_to_top.project.matrix().mul(new_bond.project.matrix());
        let g_f_embed = new_g.embed.matrix().mul(arrow.embed.matrix());
        let g_f_project = arrow.project.matrix().mul(new_g.project.matrix());
        let mut cert = Certificate::new(format!("requirement at stage {stage}"));
        cert.push_matrix_eq("g.embed . f.embed = bonding.embed", g_f_embed, full_embed);
        cert.push_matrix_eq(
            "f.project . g.project = bonding.project",
            g_f_project,
            full_project,
        );
        cert.push_matrix_eq(
            "bonding embed is a coordinate inclusion",
            new_bond.embed.matrix().clone(),
            coordinate_inclusion_matrix(new_space.dim(), self.stages[top].dim()),
        );
        cert.push_matrix_eq(
            "bond (P2)",
            new_bond.project.matrix().mul(new_bond.embed.matrix()),
            Matrix::identity(self.stages[top].dim()),
        );
        cert.push_matrix_eq(
            "g (P2)",
            new_g.project.matrix().mul(new_g.embed.matrix()),
            Matrix::identity(arrow.codomain().dim()),
        );
        cert.push_le(
            "op_norm(f.project) <= 1",
            op_norm(&arrow.project),
            Rational::one(),
        );
        if crate::space::image_vertices_in_ball(&new_g.embed) {
            cert.push_le(
                "op_norm(g.embed) <= 1 (ball containment)",
                Rational::one(),
                Rational::one(),
            );
        } else {
            cert.push_le(
                "op_norm(g.embed) <= 1",
                op_norm(&new_g.embed),
                Rational::one(),
            );
        }
        cert.conditions.push(crate::arrows::Condition {
            name: pass_note,
            check: crate::arrows::Check::RationalEq {
                lhs: "0".into(),
                rhs: "0".into(),
            },
        });
        cert.absorb(po.cert.clone());
        if !cert.holds() {
            let failed = cert.verify().unwrap_err();
            return Err(FraisseError::BudgetExhausted {
                detail: format!(
                    "stage {stage} requirement could not be realized exactly: {}",
                    failed.condition
                ),
            });
        }

        self.stages.push(new_space);
        self.bonds.push(new_bond);
        let m = self.stages.len() - 1;
        let key = requirement_key(stage, arrow);
        self.realized.insert(key);
        self.ledger.push(Requirement {
            epoch,
            stage,
            arrow: arrow.clone(),
            status: RequirementStatus::Realized {
                stage: m,
                witness: new_g.clone(),
                cert,
            },
        });
        Ok((m, new_g))
    }

    /// Realizes one arrow, preferring an existing stage: an arrow that *is*
    /// a bonding arrow is realized by the identity on its codomain stage,
    /// and the identity arrow by the next bonding arrow. Anything else
    /// extends the run.
    pub fn realize(
        &mut self,
        n: usize,
        f: &ProjectionPair,
    ) -> Result<(usize, ProjectionPair, Certificate), FraisseError> {
        if n >= self.stages.len() {
            return Err(FraisseError::StageOutOfRange {
                stage: n,
                stages: self.stages.len(),
            });
        }
        if f.domain() != &self.stages[n] {
            return Err(FraisseError::ArrowDomainMismatch { stage: n });
        }
        // f literally equal to a bonding arrow n -> m: realized by the
        // identity pair on U_m.
        for m in (n + 1)..self.stages.len() {
            let bond = self.bonding(n, m);
            if f.codomain() == &self.stages[m]
                && f.embed.matrix() == bond.embed.matrix()
                && f.project.matrix() == bond.project.matrix()
            {
                let g = ProjectionPair::identity(&self.stages[m]);
                let cert = self.realization_cert(n, m, f, &g);
                return Ok((m, g, cert));
            }
        }
        // The identity arrow: realized by the bonding arrow to the next
        // stage, when one exists.
        if f.codomain() == &self.stages[n]
            && f.embed.matrix().is_identity()
            && f.project.matrix().is_identity()
            && n + 1 < self.stages.len()
        {
            let g = self.bonding(n, n + 1);
            let cert = self.realization_cert(n, n + 1, f, &g);
            return Ok((n + 1, g, cert));
        }
        let epoch = self.epoch;
        let (m, g) = self.realize_by_extension(epoch, n, f)?;
        let cert = match &self.ledger.last().expect("just pushed").status {
            RequirementStatus::Realized { cert, .. } => cert.clone(),
        };
        Ok((m, g, cert))
    }

    fn realization_cert(
        &self,
        n: usize,
        m: usize,
        f: &ProjectionPair,
        g: &ProjectionPair,
    ) -> Certificate {
        let bond = self.bonding(n, m);
        let mut cert = Certificate::new(format!("realization {n} -> {m}"));
        cert.push_matrix_eq(
            "g.embed . f.embed = bonding.embed",
            g.embed.matrix().mul(f.embed.matrix()),
            bond.embed.matrix().clone(),
        );
        cert.push_matrix_eq(
            "f.project . g.project = bonding.project",
            f.project.matrix().mul(g.project.matrix()),
            bond.project.matrix().clone(),
        );
        cert
    }

    /// Re-verifies every ledger entry against the current stages: the
    /// stored certificate, the exact bonding identities, and validity of
    /// both arrows.
    pub fn verify_ledger(&self) -> Result<(), FraisseError> {
        for (index, req) in self.ledger.iter().enumerate() {
            let RequirementStatus::Realized { stage, witness, cert } = &req.status;
            cert.verify().map_err(|e| FraisseError::LedgerBroken {
                index,
                detail: e.to_string(),
            })?;
            let bond = self.bonding(req.stage, *stage);
            let ge = witness.embed.matrix().mul(req.arrow.embed.matrix());
            if &ge != bond.embed.matrix() {
                return Err(FraisseError::LedgerBroken {
                    index,
                    detail: "g . f embed differs from the bonding embed".into(),
                });
            }
            let gp = req.arrow.project.matrix().mul(witness.project.matrix());
            if &gp != bond.project.matrix() {
                return Err(FraisseError::LedgerBroken {
                    index,
                    detail: "f . g project differs from the bonding projection".into(),
                });
            }
            req.arrow.verify().map_err(|e| FraisseError::LedgerBroken {
                index,
                detail: format!("requirement arrow invalid: {e}"),
            })?;
        }
        Ok(())
    }

    /// Condition-(A) audit: realized/pending status for every enumerable
    /// arrow within `budget` out of every stage up to `stage_limit`.
    pub fn condition_a_report(
        &self,
        budget: &ComplexityBudget,
        stage_limit: usize,
    ) -> ConditionAReport {
        let mut per_stage = Vec::new();
        let mut realized = 0usize;
        let mut pending = Vec::new();
        for n in 0..stage_limit.min(self.stages.len()) {
            let arrows = self.enumerate_arrows(n, budget);
            let mut stage_realized = 0usize;
            for a in &arrows {
                if self.realized.contains(&requirement_key(n, a)) {
                    stage_realized += 1;
                } else {
                    pending.push((n, a.codomain().dim()));
                }
            }
            realized += stage_realized;
            per_stage.push(StageAudit {
                stage: n,
                total: arrows.len(),
                realized: stage_realized,
            });
        }
        ConditionAReport {
            budget: budget.clone(),
            realized,
            pending,
            per_stage,
        }
    }

    /// Audits one completed epoch: every arrow within the epoch's budget out
    /// of every stage present at the epoch seeding must be realized.
    pub fn audit_epoch(&self, epoch: usize) -> Option<ConditionAReport> {
        let mark = self.epoch_marks.iter().find(|m| m.epoch == epoch)?;
        let budget = budget_ladder(epoch, &self.cap);
        Some(self.condition_a_report(&budget, mark.stages_at_seed))
    }
}

fn coordinate_inclusion_matrix(rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..cols.min(rows) {
        m.set(i, i, Rational::one());
    }
    m
}

/// Change of basis making the left embed of a pushout the coordinate
/// inclusion: conjugates the ball and both arrows by the inverse of a basis
/// extension of the embed's columns. An isometric relabeling, so every
/// identity and norm is preserved.
fn rebase_amalgam(
    po: &crate::construct::Pushout,
) -> Result<(PolyBanachSpace, ProjectionPair, ProjectionPair), FraisseError> {
    let s = po.left.embed.matrix().extend_to_basis();
    let s_inv = s.inverse().expect("basis extension is invertible");
    let vertices: Vec<Vec<Rational>> = po
        .space
        .ball()
        .vertices()
        .iter()
        .map(|v| s_inv.apply(v))
        .collect();
    let ball = crate::polytope::VPolytope::spanned(po.space.dim(), vertices)
        .map_err(SpaceError::Geometry)?;
    let space = PolyBanachSpace::new(ball)?;
    let conj_pair = |pair: &ProjectionPair| -> Result<ProjectionPair, FraisseError> {
        let embed = Operator::new(
            pair.domain().clone(),
            space.clone(),
            s_inv.mul(pair.embed.matrix()),
        )?;
        let project = Operator::new(
            space.clone(),
            pair.domain().clone(),
            pair.project.matrix().mul(&s),
        )?;
        Ok(ProjectionPair::new(embed, project)?)
    };
    let left = conj_pair(&po.left)?;
    let right = conj_pair(&po.right)?;
    debug_assert!(left.embed.matrix().is_coordinate_inclusion());
    Ok((space, left, right))
}

#[derive(Clone, Debug)]
pub struct StageAudit {
    pub stage: usize,
    pub total: usize,
    pub realized: usize,
}

#[derive(Clone, Debug)]
pub struct ConditionAReport {
    pub budget: ComplexityBudget,
    pub realized: usize,
    /// Pending requirements as (stage, codomain dim).
    pub pending: Vec<(usize, usize)>,
    pub per_stage: Vec<StageAudit>,
}

impl ConditionAReport {
    pub fn total(&self) -> usize {
        self.realized + self.pending.len()
    }

    pub fn saturated(&self) -> bool {
        self.pending.is_empty()
    }
}

/// Lazy canonical enumeration of the budget arrows out of one stage: the
/// identity arrow (when the stage presentation itself is on the budget
/// grid), then for every codomain dimension, every canonical symmetric grid
/// ball admitting an isometric coordinate inclusion, with every 1-bounded
/// budget projection `[ I | R ]`.
struct ArrowEnumerator {
    space: PolyBanachSpace,
    budget: ComplexityBudget,
    grid: Vec<Rational>,
    state: EnumState,
}

enum EnumState {
    Identity,
    Balls {
        dim: usize,
        reps: Vec<Vec<Rational>>,
        /// Increasing index tuples into `reps`.
        combo: Vec<usize>,
        size: usize,
        current: Option<CurrentBall>,
        fresh: bool,
    },
    Done,
}

struct CurrentBall {
    codomain: PolyBanachSpace,
    /// Odometer over the free block of the projection, one digit per entry.
    digits: Vec<usize>,
    fresh: bool,
}

impl ArrowEnumerator {
    fn new(space: &PolyBanachSpace, budget: ComplexityBudget) -> Self {
        let grid = budget_grid(budget.max_denominator);
        ArrowEnumerator {
            space: space.clone(),
            budget,
            grid,
            state: EnumState::Identity,
        }
    }
}

/// Grid points lexicographically greater than their negation, i.e. first
/// nonzero coordinate positive; canonical pair representatives, sorted.
fn positive_reps(grid: &[Rational], dim: usize) -> Vec<Vec<Rational>> {
    let mut reps = Vec::new();
    let mut point = vec![0usize; dim];
    loop {
        let p: Vec<Rational> = point.iter().map(|&i| grid[i].clone()).collect();
        let neg: Vec<Rational> = p.iter().map(|x| -x).collect();
        if p > neg {
            reps.push(p);
        }
        // odometer
        let mut k = dim;
        loop {
            if k == 0 {
                reps.sort();
                return reps;
            }
            k -= 1;
            point[k] += 1;
            if point[k] < grid.len() {
                break;
            }
            point[k] = 0;
        }
    }
}

fn open_ball(
    space: &PolyBanachSpace,
    dim: usize,
    verts: Vec<Vec<Rational>>,
) -> Option<CurrentBall> {
    // Canonical-minimal check: the symmetric set must equal its hull.
    let mut all: Vec<Vec<Rational>> = Vec::with_capacity(verts.len() * 2);
    for v in &verts {
        all.push(v.clone());
        all.push(v.iter().map(|x| -x).collect());
    }
    all.sort();
    all.dedup();
    if all.len() != verts.len() * 2 {
        return None;
    }
    let hull = convex_hull(dim, all.clone()).ok()?;
    if hull.vertices() != all.as_slice() {
        return None;
    }
    if hull.vertex_rank() != dim {
        return None;
    }
    let codomain = PolyBanachSpace::new(hull).ok()?;
    let incl = Operator::coordinate_inclusion(space, &codomain).ok()?;
    if !is_isometric_embedding(&incl).ok()? {
        return None;
    }
    let free = space.dim() * (dim - space.dim());
    Some(CurrentBall {
        codomain,
        digits: vec![0usize; free],
        fresh: true,
    })
}

fn projection_candidate(
    space: &PolyBanachSpace,
    grid: &[Rational],
    ball: &CurrentBall,
) -> Option<ProjectionPair> {
    let dn = space.dim();
    let dy = ball.codomain.dim();
    let mut m = coordinate_inclusion_matrix(dn, dy);
    for (k, &digit) in ball.digits.iter().enumerate() {
        let row = k / (dy - dn);
        let col = dn + (k % (dy - dn));
        m.set(row, col, grid[digit].clone());
    }
    let project = Operator::new(ball.codomain.clone(), space.clone(), m).ok()?;
    if op_norm(&project) > Rational::one() {
        return None;
    }
    let embed = Operator::coordinate_inclusion(space, &ball.codomain).ok()?;
    ProjectionPair::new(embed, project).ok()
}

impl Iterator for ArrowEnumerator {
    type Item = ProjectionPair;

    fn next(&mut self) -> Option<ProjectionPair> {
        let space = self.space.clone();
        let budget = self.budget.clone();
        let grid = self.grid.clone();
        loop {
            match &mut self.state {
                EnumState::Identity => {
                    let dn = space.dim();
                    self.state = if dn < budget.max_dim {
                        EnumState::Balls {
                            dim: dn + 1,
                            reps: positive_reps(&grid, dn + 1),
                            combo: Vec::new(),
                            size: 1,
                            current: None,
                            fresh: true,
                        }
                    } else {
                        EnumState::Done
                    };
                    if space.dim() <= budget.max_dim && space_within_budget(&space, &budget) {
                        return Some(ProjectionPair::identity(&space));
                    }
                }
                EnumState::Done => return None,
                EnumState::Balls {
                    dim,
                    reps,
                    combo,
                    size,
                    current,
                    fresh,
                } => {
                    // Projection odometer inside the current ball.
                    if let Some(ball) = current {
                        if ball.fresh {
                            ball.fresh = false;
                        } else {
                            // advance digits
                            let mut k = ball.digits.len();
                            let mut rolled = true;
                            loop {
                                if k == 0 {
                                    break;
                                }
                                k -= 1;
                                ball.digits[k] += 1;
                                if ball.digits[k] < grid.len() {
                                    rolled = false;
                                    break;
                                }
                                ball.digits[k] = 0;
                            }
                            if rolled || ball.digits.is_empty() {
                                *current = None;
                                continue;
                            }
                        }
                        let candidate =
                            current.as_ref().and_then(|b| projection_candidate(&space, &grid, b));
                        if let Some(pair) = candidate {
                            return Some(pair);
                        }
                        continue;
                    }
                    // Advance the vertex-pair combination.
                    let max_pairs = (budget.max_vertex_count / 2).max(1);
                    if *fresh {
                        *fresh = false;
                        *combo = (0..*size).collect();
                        if reps.len() < *size {
                            combo.clear();
                        }
                    } else if !advance_combo(combo, reps.len()) {
                        combo.clear();
                    }
                    if combo.is_empty() {
                        // exhausted this size
                        *size += 1;
                        if *size > max_pairs {
                            if *dim < budget.max_dim {
                                *dim += 1;
                                *reps = positive_reps(&grid, *dim);
                                *size = 1;
                                *fresh = true;
                                *current = None;
                            } else {
                                self.state = EnumState::Done;
                            }
                            continue;
                        }
                        *combo = (0..*size).collect();
                        if reps.len() < *size {
                            combo.clear();
                            continue;
                        }
                    }
                    let verts: Vec<Vec<Rational>> =
                        combo.iter().map(|&i| reps[i].clone()).collect();
                    let dim_now = *dim;
                    if let Some(ball) = open_ball(&space, dim_now, verts) {
                        *current = Some(ball);
                    }
                }
            }
        }
    }
}

/// Next increasing index tuple; false when exhausted.
fn advance_combo(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    loop {
        if i == 0 {
            return false;
        }
        i -= 1;
        if combo[i] + (k - i) <= n {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            if combo[k - 1] < n {
                return true;
            }
        }
    }
}
