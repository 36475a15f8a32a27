//! Run persistence: a JSON manifest referencing canonical text files for
//! every space and operator, a content digest, crash-safe resume, and the
//! recompute-everything verifier.
//!
//! Rationals never appear as JSON numbers; every scalar is a canonical
//! `p/q` string inside the referenced text files or certificate records, so
//! a saved run reloads bit-identically.

use crate::arrows::{Certificate, ProjectionPair};
use crate::fraisse::{
    requirement_key, ComplexityBudget, EpochMark, GenericRun, Requirement, RequirementStatus,
    StreamCursor,
};
use crate::matrix::Matrix;
use crate::rational::Rational;
use crate::space::{is_one_bounded, op_norm, Operator, PolyBanachSpace};
use crate::textio::{self, Block, FormatError};
use num_traits::One;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MANIFEST_VERSION: &str = "1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("manifest invalid: {0}")]
    Invalid(String),
    #[error("run directory is locked: {0}")]
    Locked(PathBuf),
    #[error(transparent)]
    Space(#[from] crate::space::SpaceError),
    #[error(transparent)]
    Arrow(#[from] crate::arrows::ArrowError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairRef {
    pub embed: String,
    pub project: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerRef {
    pub epoch: usize,
    pub stage: usize,
    pub arrow_space: String,
    pub arrow: PairRef,
    pub realized_stage: usize,
    pub witness: PairRef,
    pub cert: Certificate,
}

/// The persisted shape of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub seed: u64,
    pub cap: ComplexityBudget,
    pub steps_done: usize,
    pub epoch: usize,
    pub epoch_stages_at_seed: usize,
    pub epoch_marks: Vec<EpochMark>,
    pub queue: Vec<StreamCursor>,
    pub stages: Vec<String>,
    pub bonds: Vec<PairRef>,
    pub ledger: Vec<LedgerRef>,
    pub digest: String,
}

/// Exclusive lock on a run directory, released on drop.
#[derive(Debug)]
pub struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    pub fn acquire(dir: &Path) -> Result<Self, ManifestError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(ManifestError::Locked(path))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn space_file(n: usize) -> String {
    format!("spaces/stage_{n:04}.space")
}

fn bond_file(n: usize, part: &str) -> String {
    format!("arrows/bond_{n:04}.{part}.op")
}

fn req_file(k: usize, which: &str, part: &str) -> String {
    format!("arrows/req_{k:04}_{which}.{part}.op")
}

fn req_space_file(k: usize) -> String {
    format!("spaces/req_{k:04}.space")
}

fn write_file(dir: &Path, rel: &str, contents: &str) -> Result<(), ManifestError> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn operator_text(name: &str, op: &Operator) -> String {
    textio::render_operator(name, "domain", "codomain", op)
}

/// Serializes the run into `dir`: one text file per space and operator plus
/// `manifest.json` carrying the scheduler state and the content digest. The
/// manifest is written last, through a temporary file.
pub fn save_run(dir: &Path, run: &GenericRun) -> Result<RunManifest, ManifestError> {
    fs::create_dir_all(dir)?;
    let mut stages = Vec::new();
    for (n, s) in run.stages().iter().enumerate() {
        let rel = space_file(n);
        write_file(dir, &rel, &textio::render_space(&format!("stage{n}"), s))?;
        stages.push(rel);
    }
    let mut bonds = Vec::new();
    for (n, b) in run.bonds().iter().enumerate() {
        let embed = bond_file(n, "embed");
        let project = bond_file(n, "project");
        write_file(dir, &embed, &operator_text(&format!("bond{n}.embed"), &b.embed))?;
        write_file(
            dir,
            &project,
            &operator_text(&format!("bond{n}.project"), &b.project),
        )?;
        bonds.push(PairRef { embed, project });
    }
    let mut ledger = Vec::new();
    for (k, req) in run.ledger().iter().enumerate() {
        let RequirementStatus::Realized {
            stage: realized_stage,
            witness,
            cert,
        } = &req.status;
        let arrow_space = req_space_file(k);
        write_file(
            dir,
            &arrow_space,
            &textio::render_space(&format!("req{k}"), req.arrow.codomain()),
        )?;
        let arrow = PairRef {
            embed: req_file(k, "f", "embed"),
            project: req_file(k, "f", "project"),
        };
        write_file(dir, &arrow.embed, &operator_text("f.embed", &req.arrow.embed))?;
        write_file(
            dir,
            &arrow.project,
            &operator_text("f.project", &req.arrow.project),
        )?;
        let witness_ref = PairRef {
            embed: req_file(k, "g", "embed"),
            project: req_file(k, "g", "project"),
        };
        write_file(dir, &witness_ref.embed, &operator_text("g.embed", &witness.embed))?;
        write_file(
            dir,
            &witness_ref.project,
            &operator_text("g.project", &witness.project),
        )?;
        ledger.push(LedgerRef {
            epoch: req.epoch,
            stage: req.stage,
            arrow_space,
            arrow,
            realized_stage: *realized_stage,
            witness: witness_ref,
            cert: cert.clone(),
        });
    }
    let mut manifest = RunManifest {
        version: MANIFEST_VERSION.to_string(),
        seed: run.seed(),
        cap: run.cap().clone(),
        steps_done: run.steps_done(),
        epoch: run.epoch(),
        epoch_stages_at_seed: run.epoch_stages_at_seed(),
        epoch_marks: run.epoch_marks().to_vec(),
        queue: run.queue().iter().cloned().collect(),
        stages,
        bonds,
        ledger,
        digest: String::new(),
    };
    manifest.digest = compute_digest(dir, &manifest)?;
    let text = serde_json::to_string_pretty(&manifest)?;
    let tmp = dir.join("manifest.json.tmp");
    fs::write(&tmp, &text)?;
    fs::rename(&tmp, dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Digest over every referenced file (name plus contents) and the manifest
/// body with an empty digest field.
pub fn compute_digest(dir: &Path, manifest: &RunManifest) -> Result<String, ManifestError> {
    let mut hasher = Sha256::new();
    let mut feed = |rel: &str| -> Result<(), ManifestError> {
        hasher.update(rel.as_bytes());
        hasher.update(b"\n");
        hasher.update(fs::read(dir.join(rel))?);
        hasher.update(b"\n");
        Ok(())
    };
    for rel in &manifest.stages {
        feed(rel)?;
    }
    for b in &manifest.bonds {
        feed(&b.embed)?;
        feed(&b.project)?;
    }
    for l in &manifest.ledger {
        feed(&l.arrow_space)?;
        feed(&l.arrow.embed)?;
        feed(&l.arrow.project)?;
        feed(&l.witness.embed)?;
        feed(&l.witness.project)?;
    }
    let mut body = manifest.clone();
    body.digest = String::new();
    hasher.update(serde_json::to_string(&body)?.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, ManifestError> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(ManifestError::Invalid(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    Ok(manifest)
}

fn load_space(dir: &Path, rel: &str) -> Result<PolyBanachSpace, ManifestError> {
    let text = fs::read_to_string(dir.join(rel))?;
    let (_, space) = textio::parse_space(&text)?;
    Ok(space)
}

fn load_operator(
    dir: &Path,
    rel: &str,
    domain: &PolyBanachSpace,
    codomain: &PolyBanachSpace,
) -> Result<Operator, ManifestError> {
    let text = fs::read_to_string(dir.join(rel))?;
    let blocks = textio::parse_blocks(&text)?;
    match blocks.as_slice() {
        [block @ Block::Operator { .. }] => Ok(textio::operator_from_block(block, domain, codomain)?),
        _ => Err(ManifestError::Invalid(format!(
            "{rel}: expected exactly one operator block"
        ))),
    }
}

/// Reloads a run. The digest is checked; a mismatch is an error here (use
/// [`verify_run`] for diagnostic reporting instead).
pub fn load_run(dir: &Path) -> Result<GenericRun, ManifestError> {
    let manifest = read_manifest(dir)?;
    let recomputed = compute_digest(dir, &manifest)?;
    if recomputed != manifest.digest {
        return Err(ManifestError::Invalid("digest mismatch".into()));
    }
    load_run_unchecked(dir, &manifest)
}

fn load_run_unchecked(dir: &Path, manifest: &RunManifest) -> Result<GenericRun, ManifestError> {
    let mut stages = Vec::new();
    for rel in &manifest.stages {
        stages.push(load_space(dir, rel)?);
    }
    if stages.is_empty() {
        return Err(ManifestError::Invalid("no stages".into()));
    }
    let mut bonds = Vec::new();
    for (n, b) in manifest.bonds.iter().enumerate() {
        let embed = load_operator(dir, &b.embed, &stages[n], &stages[n + 1])?;
        let project = load_operator(dir, &b.project, &stages[n + 1], &stages[n])?;
        bonds.push(ProjectionPair::new(embed, project)?);
    }
    let mut ledger = Vec::new();
    for l in &manifest.ledger {
        let codomain = load_space(dir, &l.arrow_space)?;
        let arrow = ProjectionPair::new(
            load_operator(dir, &l.arrow.embed, &stages[l.stage], &codomain)?,
            load_operator(dir, &l.arrow.project, &codomain, &stages[l.stage])?,
        )?;
        let witness = ProjectionPair::new(
            load_operator(dir, &l.witness.embed, &codomain, &stages[l.realized_stage])?,
            load_operator(dir, &l.witness.project, &stages[l.realized_stage], &codomain)?,
        )?;
        ledger.push(Requirement {
            epoch: l.epoch,
            stage: l.stage,
            arrow,
            status: RequirementStatus::Realized {
                stage: l.realized_stage,
                witness,
                cert: l.cert.clone(),
            },
        });
    }
    Ok(GenericRun::from_parts(
        manifest.seed,
        manifest.cap.clone(),
        stages,
        bonds,
        ledger,
        manifest.epoch,
        manifest.epoch_stages_at_seed,
        manifest.epoch_marks.clone(),
        manifest.queue.iter().cloned().collect::<VecDeque<_>>(),
        manifest.steps_done,
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyEntry {
    pub subject: String,
    pub condition: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerifyReport {
    pub entries: Vec<VerifyEntry>,
}

impl VerifyReport {
    fn push(&mut self, subject: &str, condition: &str, ok: bool, detail: String) {
        self.entries.push(VerifyEntry {
            subject: subject.to_string(),
            condition: condition.to_string(),
            ok,
            detail,
        });
    }

    pub fn ok(&self) -> bool {
        self.entries.iter().all(|e| e.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerifyEntry> {
        self.entries.iter().filter(|e| !e.ok)
    }
}

/// Recomputes every exact check of a persisted run from its primary data.
/// The digest is reported but does not stop the remaining checks, so a
/// corrupted file is named by the precise condition it breaks.
pub fn verify_run(dir: &Path) -> Result<VerifyReport, ManifestError> {
    let manifest = read_manifest(dir)?;
    let mut report = VerifyReport::default();
    let recomputed = compute_digest(dir, &manifest)?;
    report.push(
        "manifest",
        "content digest matches",
        recomputed == manifest.digest,
        recomputed,
    );

    let run = load_run_unchecked(dir, &manifest)?;

    for (n, s) in run.stages().iter().enumerate() {
        let subject = format!("stage {n}");
        report.push(
            &subject,
            "ball is symmetric",
            s.ball().is_symmetric(),
            format!("{} vertices", s.ball().num_vertices()),
        );
        report.push(
            &subject,
            "ball is full-dimensional",
            s.ball().vertex_rank() == s.dim(),
            format!("rank {} of dim {}", s.ball().vertex_rank(), s.dim()),
        );
        if n > 0 {
            report.push(
                &subject,
                "dimension nondecreasing",
                run.stage(n - 1).dim() <= s.dim(),
                format!("{} -> {}", run.stage(n - 1).dim(), s.dim()),
            );
        }
        if n == 0 {
            report.push(&subject, "stage 0 is trivial", s.is_trivial(), String::new());
        }
    }

    for (n, b) in run.bonds().iter().enumerate() {
        let subject = format!("bond {n}");
        report.push(
            &subject,
            "embed is a coordinate inclusion",
            b.embed.matrix().is_coordinate_inclusion(),
            String::new(),
        );
        report.push(
            &subject,
            "project . embed = id (P2)",
            b.project.matrix().mul(b.embed.matrix()).is_identity(),
            String::new(),
        );
        report.push(
            &subject,
            "embed is 1-bounded",
            is_one_bounded(&b.embed),
            crate::rational::format_rational(&op_norm(&b.embed)),
        );
        report.push(
            &subject,
            "project is 1-bounded",
            is_one_bounded(&b.project),
            crate::rational::format_rational(&op_norm(&b.project)),
        );
    }

    for (k, req) in run.ledger().iter().enumerate() {
        let subject = format!("requirement {k} (stage {})", req.stage);
        let RequirementStatus::Realized {
            stage: m,
            witness,
            cert,
        } = &req.status;
        report.push(
            &subject,
            "stored certificate re-verifies",
            cert.holds(),
            cert.verify().err().map(|e| e.to_string()).unwrap_or_default(),
        );
        if *m >= run.num_stages() || req.stage >= run.num_stages() {
            report.push(&subject, "stage indices in range", false, String::new());
            continue;
        }
        let bond = run.bonding(req.stage, *m);
        report.push(
            &subject,
            "g.embed . f.embed = bonding.embed",
            witness.embed.matrix().mul(req.arrow.embed.matrix()) == *bond.embed.matrix(),
            String::new(),
        );
        report.push(
            &subject,
            "f.project . g.project = bonding.project",
            req.arrow.project.matrix().mul(witness.project.matrix()) == *bond.project.matrix(),
            String::new(),
        );
        match req.arrow.verify() {
            Ok(_) => report.push(&subject, "requirement arrow is a valid pair", true, String::new()),
            Err(e) => report.push(
                &subject,
                "requirement arrow is a valid pair",
                false,
                e.to_string(),
            ),
        }
        // Cheap witness validity: exact left inverse and component bounds.
        report.push(
            &subject,
            "witness (P2)",
            witness.project.matrix().mul(witness.embed.matrix()).is_identity(),
            String::new(),
        );
        report.push(
            &subject,
            "witness embed is 1-bounded",
            is_one_bounded(&witness.embed),
            String::new(),
        );
        // Dedup keys must be unique in a well-formed ledger.
        let key = requirement_key(req.stage, &req.arrow);
        let dupes = run
            .ledger()
            .iter()
            .filter(|r| requirement_key(r.stage, &r.arrow) == key)
            .count();
        report.push(&subject, "requirement key unique", dupes == 1, String::new());
    }

    Ok(report)
}

/// Writes a serializable report (e.g. a ladder or back-and-forth record)
/// under `dir/reports/`, returning the relative path.
pub fn write_report<T: Serialize>(
    dir: &Path,
    name: &str,
    value: &T,
) -> Result<String, ManifestError> {
    let rel = format!("reports/{name}.json");
    let text = serde_json::to_string_pretty(value)?;
    write_file(dir, &rel, &text)?;
    Ok(rel)
}

/// Scaled-boundary membership check used by the norm command round trip:
/// `x / value` lies on the unit sphere when `value = ||x||`.
pub fn on_unit_sphere(space: &PolyBanachSpace, x: &[Rational], value: &Rational) -> bool {
    if value == &Rational::from_integer(0.into()) {
        return x.iter().all(|c| c == &Rational::from_integer(0.into()));
    }
    let scaled: Vec<Rational> = x.iter().map(|c| c / value).collect();
    match space.norm(&scaled) {
        Ok(n) => n == Rational::one(),
        Err(_) => false,
    }
}

/// Corrupts one matrix entry of one operator file for mutation testing:
/// adds 1 to the entry at a deterministic position derived from `seed`.
/// Returns the file and the position touched.
pub fn corrupt_one_entry(dir: &Path, seed: u64) -> Result<(String, usize, usize), ManifestError> {
    let manifest = read_manifest(dir)?;
    let mut files: Vec<String> = Vec::new();
    for b in &manifest.bonds {
        files.push(b.embed.clone());
        files.push(b.project.clone());
    }
    for l in &manifest.ledger {
        files.push(l.arrow.embed.clone());
        files.push(l.arrow.project.clone());
        files.push(l.witness.embed.clone());
        files.push(l.witness.project.clone());
    }
    // Keep only operator files with at least one entry.
    let mut gen = crate::seeded::SeededGen::new(seed);
    for _ in 0..files.len().max(1) * 4 {
        let rel = &files[gen.below(files.len() as u64) as usize];
        let text = fs::read_to_string(dir.join(rel))?;
        let blocks = textio::parse_blocks(&text)?;
        let Some(Block::Operator { rows, name, .. }) = blocks.first() else {
            continue;
        };
        if rows.is_empty() || rows[0].is_empty() {
            continue;
        }
        let r = gen.below(rows.len() as u64) as usize;
        let c = gen.below(rows[0].len() as u64) as usize;
        let mut new_rows = rows.clone();
        new_rows[r][c] = &new_rows[r][c] + Rational::one();
        let m = Matrix::from_rows_shaped(rows.len(), rows[0].len(), new_rows);
        let mut out = format!("operator {name} domain codomain\n");
        for i in 0..m.rows() {
            out.push_str("row");
            for v in m.row(i) {
                out.push(' ');
                out.push_str(&crate::rational::format_rational(v));
            }
            out.push('\n');
        }
        fs::write(dir.join(rel), out)?;
        return Ok((rel.clone(), r, c));
    }
    Err(ManifestError::Invalid(
        "no operator file with entries to corrupt".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraisse::ComplexityBudget;

    fn demo_run() -> GenericRun {
        let mut run = GenericRun::new(7, ComplexityBudget::new(2, 2, 6));
        run.extend(4).unwrap();
        run
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let run = demo_run();
        let manifest = save_run(dir.path(), &run).unwrap();
        assert!(!manifest.digest.is_empty());
        let back = load_run(dir.path()).unwrap();
        assert_eq!(back.num_stages(), run.num_stages());
        for (a, b) in back.stages().iter().zip(run.stages()) {
            assert_eq!(a.ball(), b.ball());
        }
        for (a, b) in back.bonds().iter().zip(run.bonds()) {
            assert_eq!(a.embed.matrix(), b.embed.matrix());
            assert_eq!(a.project.matrix(), b.project.matrix());
        }
        assert_eq!(back.queue(), run.queue());
        assert_eq!(back.steps_done(), run.steps_done());
        // resumed run continues identically to an uninterrupted one
        let mut resumed = back;
        resumed.extend(2).unwrap();
        let mut straight = GenericRun::new(7, ComplexityBudget::new(2, 2, 6));
        straight.extend(6).unwrap();
        for (a, b) in resumed.stages().iter().zip(straight.stages()) {
            assert_eq!(a.ball(), b.ball());
        }
    }

    #[test]
    fn byte_identical_reruns() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        save_run(dir_a.path(), &demo_run()).unwrap();
        save_run(dir_b.path(), &demo_run()).unwrap();
        let a = fs::read(dir_a.path().join(MANIFEST_FILE)).unwrap();
        let b = fs::read(dir_b.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn verify_clean_run_passes() {
        let dir = tempfile::tempdir().unwrap();
        save_run(dir.path(), &demo_run()).unwrap();
        let report = verify_run(dir.path()).unwrap();
        assert!(report.ok(), "failures: {:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn corrupted_entry_is_named() {
        let dir = tempfile::tempdir().unwrap();
        save_run(dir.path(), &demo_run()).unwrap();
        let (file, _, _) = corrupt_one_entry(dir.path(), 3).unwrap();
        let report = verify_run(dir.path()).unwrap();
        assert!(!report.ok());
        // The digest fails and at least one precise condition names the
        // broken structure.
        let failures: Vec<_> = report.failures().collect();
        assert!(failures.iter().any(|e| e.subject == "manifest"));
        assert!(
            failures.iter().any(|e| e.subject != "manifest"),
            "only the digest failed after corrupting {file}"
        );
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let guard = LockGuard::acquire(dir.path()).unwrap();
        assert!(matches!(
            LockGuard::acquire(dir.path()).unwrap_err(),
            ManifestError::Locked(_)
        ));
        drop(guard);
        LockGuard::acquire(dir.path()).unwrap();
    }
}
