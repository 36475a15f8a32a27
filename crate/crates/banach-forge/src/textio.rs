//! Canonical UTF-8 text formats for spaces, operators, pairs, and chains.
//!
//! Space file:
//! ```text
//! space <name> dim <d>
//! vertex <c1> ... <cd>
//! ```
//! Operator file:
//! ```text
//! operator <name> <domain-name> <codomain-name>
//! row <c1> ... <c_domdim>      (one per codomain coordinate)
//! ```
//! Every field is an integer or `p/q`; floats are not representable. A chain
//! file is a sequence of `space` blocks (in stage order, the trivial stage
//! omitted) followed by `operator` blocks named `bond<i>.embed` /
//! `bond<i>.project`. Writing then reading any value reproduces it exactly.

use crate::matrix::Matrix;
use crate::polytope::VPolytope;
use crate::rational::{format_rational, parse_rational, Rational};
use crate::space::{Chain, Operator, PolyBanachSpace};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Space(#[from] crate::space::SpaceError),
    #[error(transparent)]
    Geometry(#[from] crate::polytope::GeometryError),
    #[error(transparent)]
    Arrow(#[from] crate::arrows::ArrowError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_fields(line: &str, lineno: usize) -> Result<Vec<Rational>, FormatError> {
    line.split_whitespace()
        .map(|tok| {
            parse_rational(tok).map_err(|e| FormatError::Parse {
                line: lineno,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn render_space(name: &str, space: &PolyBanachSpace) -> String {
    let mut out = format!("space {name} dim {}\n", space.dim());
    for v in space.ball().vertices() {
        out.push_str("vertex");
        for c in v {
            out.push(' ');
            out.push_str(&format_rational(c));
        }
        out.push('\n');
    }
    out
}

pub fn render_operator(name: &str, domain: &str, codomain: &str, op: &Operator) -> String {
    let mut out = format!("operator {name} {domain} {codomain}\n");
    for i in 0..op.matrix().rows() {
        out.push_str("row");
        for c in op.matrix().row(i) {
            out.push(' ');
            out.push_str(&format_rational(c));
        }
        out.push('\n');
    }
    out
}

/// One parsed block of a text file.
#[derive(Debug, Clone)]
pub enum Block {
    Space {
        name: String,
        dim: usize,
        vertices: Vec<Vec<Rational>>,
    },
    Operator {
        name: String,
        domain: String,
        codomain: String,
        rows: Vec<Vec<Rational>>,
    },
}

pub fn parse_blocks(text: &str) -> Result<Vec<Block>, FormatError> {
    let mut blocks: Vec<Block> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("space") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| FormatError::Parse {
                        line: lineno,
                        message: "space needs a name".into(),
                    })?
                    .to_string();
                match (tokens.next(), tokens.next()) {
                    (Some("dim"), Some(d)) => {
                        let dim = d.parse::<usize>().map_err(|_| FormatError::Parse {
                            line: lineno,
                            message: format!("bad dimension `{d}`"),
                        })?;
                        blocks.push(Block::Space {
                            name,
                            dim,
                            vertices: Vec::new(),
                        });
                    }
                    _ => {
                        return Err(FormatError::Parse {
                            line: lineno,
                            message: "expected `space <name> dim <d>`".into(),
                        })
                    }
                }
            }
            Some("vertex") => {
                let fields = parse_fields(&line["vertex".len()..], lineno)?;
                match blocks.last_mut() {
                    Some(Block::Space { dim, vertices, .. }) => {
                        if fields.len() != *dim {
                            return Err(FormatError::Parse {
                                line: lineno,
                                message: format!(
                                    "vertex has {} fields, space dim is {dim}",
                                    fields.len()
                                ),
                            });
                        }
                        vertices.push(fields);
                    }
                    _ => {
                        return Err(FormatError::Parse {
                            line: lineno,
                            message: "vertex outside a space block".into(),
                        })
                    }
                }
            }
            Some("operator") => {
                let mut take = || {
                    tokens.next().map(str::to_string).ok_or(FormatError::Parse {
                        line: lineno,
                        message: "expected `operator <name> <domain> <codomain>`".into(),
                    })
                };
                let name = take()?;
                let domain = take()?;
                let codomain = take()?;
                blocks.push(Block::Operator {
                    name,
                    domain,
                    codomain,
                    rows: Vec::new(),
                });
            }
            Some("row") => {
                let fields = parse_fields(&line["row".len()..], lineno)?;
                match blocks.last_mut() {
                    Some(Block::Operator { rows, .. }) => rows.push(fields),
                    _ => {
                        return Err(FormatError::Parse {
                            line: lineno,
                            message: "row outside an operator block".into(),
                        })
                    }
                }
            }
            Some(other) => {
                return Err(FormatError::Parse {
                    line: lineno,
                    message: format!("unknown directive `{other}`"),
                })
            }
            None => unreachable!("blank lines skipped"),
        }
    }
    Ok(blocks)
}

/// Parses a single-space file into a space (ball taken verbatim, validated).
pub fn parse_space(text: &str) -> Result<(String, PolyBanachSpace), FormatError> {
    let blocks = parse_blocks(text)?;
    match blocks.as_slice() {
        [Block::Space {
            name,
            dim,
            vertices,
        }] => {
            let ball = if *dim == 0 {
                VPolytope::spanned(0, vec![vec![]])?
            } else {
                VPolytope::spanned(*dim, vertices.clone())?
            };
            Ok((name.clone(), PolyBanachSpace::new(ball)?))
        }
        _ => Err(FormatError::Shape(
            "expected exactly one space block".into(),
        )),
    }
}

pub fn operator_from_block(
    block: &Block,
    domain: &PolyBanachSpace,
    codomain: &PolyBanachSpace,
) -> Result<Operator, FormatError> {
    let Block::Operator { rows, name, .. } = block else {
        return Err(FormatError::Shape("expected an operator block".into()));
    };
    if rows.len() != codomain.dim() {
        return Err(FormatError::Shape(format!(
            "operator `{name}` has {} rows, codomain dim is {}",
            rows.len(),
            codomain.dim()
        )));
    }
    for r in rows {
        if r.len() != domain.dim() {
            return Err(FormatError::Shape(format!(
                "operator `{name}` row width {} != domain dim {}",
                r.len(),
                domain.dim()
            )));
        }
    }
    let m = Matrix::from_rows_shaped(codomain.dim(), domain.dim(), rows.clone());
    Ok(Operator::new(domain.clone(), codomain.clone(), m)?)
}

pub fn render_chain(chain: &Chain) -> String {
    let mut out = String::new();
    for (i, s) in chain.stages().iter().enumerate().skip(1) {
        out.push_str(&render_space(&format!("stage{i}"), s));
    }
    for i in 1..chain.len() - 1 {
        let (embed, project) = chain.bond(i);
        out.push_str(&render_operator(
            &format!("bond{i}.embed"),
            &format!("stage{i}"),
            &format!("stage{}", i + 1),
            embed,
        ));
        out.push_str(&render_operator(
            &format!("bond{i}.project"),
            &format!("stage{}", i + 1),
            &format!("stage{i}"),
            project,
        ));
    }
    out
}

/// Parses a chain file: trailing stages in order plus their bonds. The
/// leading trivial stage and its zero bond are implicit.
pub fn parse_chain(text: &str) -> Result<Chain, FormatError> {
    let blocks = parse_blocks(text)?;
    let mut spaces: Vec<(String, PolyBanachSpace)> = Vec::new();
    let mut operators: BTreeMap<String, Block> = BTreeMap::new();
    for b in &blocks {
        match b {
            Block::Space {
                name,
                dim,
                vertices,
            } => {
                let ball = VPolytope::spanned(*dim, vertices.clone())?;
                spaces.push((name.clone(), PolyBanachSpace::new(ball)?));
            }
            Block::Operator { name, .. } => {
                operators.insert(name.clone(), b.clone());
            }
        }
    }
    if spaces.is_empty() {
        return Err(FormatError::Shape("chain file has no stages".into()));
    }
    let mut stages = vec![PolyBanachSpace::trivial()];
    stages.extend(spaces.iter().map(|(_, s)| s.clone()));
    let mut bonds = Vec::new();
    // Implicit zero bond out of the trivial stage.
    bonds.push((
        Operator::zero(&stages[0], &stages[1]),
        Operator::zero(&stages[1], &stages[0]),
    ));
    for i in 1..stages.len() - 1 {
        let embed_key = format!("bond{i}.embed");
        let project_key = format!("bond{i}.project");
        let eb = operators.get(&embed_key).ok_or_else(|| {
            FormatError::Shape(format!("missing operator block `{embed_key}`"))
        })?;
        let pb = operators.get(&project_key).ok_or_else(|| {
            FormatError::Shape(format!("missing operator block `{project_key}`"))
        })?;
        bonds.push((
            operator_from_block(eb, &stages[i], &stages[i + 1])?,
            operator_from_block(pb, &stages[i + 1], &stages[i])?,
        ));
    }
    Ok(Chain::new(stages, bonds)?)
}
