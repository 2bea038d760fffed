//! Size-targeted random documents for a [`DtdGraph`].
//!
//! Every `1` child appears once, a `?` child with probability ½, and `*`
//! children zero to three times. To reach the requested size the generator
//! picks the element closest to the root that has a `*` child (the growth
//! node), emits the path down to it last among its siblings, and keeps
//! appending `*` subtrees under it until the document is large enough.
//! Children on recursive cycles are kept with a probability that halves per
//! level of recursion.
//!
//! Documents follow the flattened graph: children appear in declaration
//! order with the graph's cardinalities, which is what the shredder checks.
//! Choice groups are not enforced, so a `(a | b)` model may yield both.

use std::collections::VecDeque;

use quick_xml::escape::escape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dtd::{Cardinality, ContentKind, DefaultKind, DtdGraph, ElemId, GraphEdge};

/// Maximum number of recursive (cycle) edges on any root-to-leaf path.
pub const MAX_CYCLE_DEPTH: u32 = 64;

/// Accepted deviation from the requested size, as a fraction of it.
pub const SIZE_TOLERANCE: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerateError {
    #[error("target of {target} bytes is below the smallest document ({minimum} bytes)")]
    TargetTooSmall { target: usize, minimum: usize },
    #[error("could not reach {target} bytes (stopped at {reached}); the DTD has no repeatable child near the target size")]
    TargetUnreachable { target: usize, reached: usize },
    #[error("`{0}` requires itself recursively without an optional exit")]
    UnboundedRecursion(String),
}

const WORDS: &[&str] = &[
    "alpha", "archive", "beacon", "cedar", "delta", "detroit", "ember", "falcon", "granite",
    "harbor", "indigo", "juniper", "kepler", "lumen", "maple", "nebula", "orbit", "pioneer",
    "quartz", "raven", "summit", "tundra", "umber", "vertex", "willow", "xenon", "yarrow",
    "zephyr", "313", "2024", "wayne", "campus", "library", "physics", "ledger", "engine",
];

/// Tokens that exercise CSV quoting and XML escaping.
const AWKWARD: &[&str] = &[
    "a,b",
    "say \"hi\"",
    "R&D",
    "x<y",
    "O'Neil",
    "1,000",
    "\"q\"",
];

struct Gen<'g> {
    g: &'g DtdGraph,
    rng: ChaCha8Rng,
}

impl Gen<'_> {
    fn value(&mut self, minimal: bool, allow_newline: bool) -> String {
        if minimal {
            return WORDS[self.rng.random_range(0..WORDS.len())].to_string();
        }
        if self.rng.random_bool(0.05) {
            return String::new();
        }
        let n = self.rng.random_range(1..=4);
        let awkward = self
            .rng
            .random_bool(0.15)
            .then(|| self.rng.random_range(0..n));
        let newline_at = (allow_newline && n > 1 && self.rng.random_bool(0.1))
            .then(|| self.rng.random_range(1..n));
        let mut out = String::new();
        for i in 0..n {
            if i > 0 {
                out.push(if newline_at == Some(i) { '\n' } else { ' ' });
            }
            if awkward == Some(i) {
                out.push_str(AWKWARD[self.rng.random_range(0..AWKWARD.len())]);
            } else {
                out.push_str(WORDS[self.rng.random_range(0..WORDS.len())]);
            }
        }
        out
    }

    fn open_tag(&mut self, id: ElemId, minimal: bool, out: &mut String) {
        let node = self.g.node(id);
        out.push('<');
        out.push_str(&node.name);
        for attr in &node.attributes {
            let present = match attr.default {
                DefaultKind::Required => true,
                _ if minimal => false,
                DefaultKind::Implied => self.rng.random_bool(0.7),
                DefaultKind::Default(_) => self.rng.random_bool(0.5),
            };
            if present {
                let v = self.value(minimal, false);
                out.push(' ');
                out.push_str(&attr.name);
                out.push_str("=\"");
                out.push_str(&escape(v.as_str()));
                out.push('"');
            }
        }
    }

    /// Instances of `edge.child` to emit under a parent at recursion `depth`.
    fn child_count(
        &mut self,
        edge: &GraphEdge,
        depth: u32,
        minimal: bool,
    ) -> Result<usize, GenerateError> {
        let child_depth = depth + u32::from(edge.on_cycle);
        let keep = if edge.on_cycle {
            0.5f64.powi(child_depth as i32)
        } else {
            1.0
        };
        Ok(match edge.label {
            Cardinality::One if child_depth > MAX_CYCLE_DEPTH => {
                return Err(GenerateError::UnboundedRecursion(
                    self.g.name(edge.child).to_string(),
                ))
            }
            Cardinality::One => 1,
            _ if minimal || child_depth > MAX_CYCLE_DEPTH => 0,
            Cardinality::Optional => usize::from(self.rng.random_bool(0.5 * keep)),
            Cardinality::Many => {
                let n = self.rng.random_range(0..=3);
                (0..n).filter(|_| self.rng.random_bool(keep)).count()
            }
        })
    }

    /// Emits the children of `id`, skipping the edge to `skip`.
    fn children(
        &mut self,
        id: ElemId,
        depth: u32,
        minimal: bool,
        skip: Option<ElemId>,
        out: &mut String,
    ) -> Result<(), GenerateError> {
        let g = self.g;
        for edge in g.child_edges(id) {
            if Some(edge.child) == skip {
                continue;
            }
            for _ in 0..self.child_count(edge, depth, minimal)? {
                self.element(edge.child, depth + u32::from(edge.on_cycle), minimal, out)?;
            }
        }
        Ok(())
    }

    fn element(
        &mut self,
        id: ElemId,
        depth: u32,
        minimal: bool,
        out: &mut String,
    ) -> Result<(), GenerateError> {
        self.open_tag(id, minimal, out);
        let name = &self.g.node(id).name;
        match self.g.node(id).content {
            ContentKind::Empty => out.push_str("/>"),
            ContentKind::Text if !minimal && self.rng.random_bool(0.05) => out.push_str("/>"),
            ContentKind::Text => {
                let v = self.value(minimal, true);
                out.push('>');
                out.push_str(&escape(v.as_str()));
                close(name, out);
            }
            ContentKind::Mixed | ContentKind::Elements => {
                out.push('>');
                let mark = out.len();
                self.children(id, depth, minimal, None, out)?;
                if out.len() == mark {
                    out.pop();
                    out.push_str("/>");
                } else {
                    close(name, out);
                }
            }
        }
        Ok(())
    }

    /// Opening part of the document down to and including the growth node's
    /// regular children, plus the matching closing tags.
    fn skeleton(
        &mut self,
        path: &[ElemId],
        minimal: bool,
    ) -> Result<(String, String, u32), GenerateError> {
        let mut prefix = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let mut depth = 0;
        for (i, &id) in path.iter().enumerate() {
            if i > 0 {
                depth += u32::from(self.g.edge(path[i - 1], id).is_some_and(|e| e.on_cycle));
            }
            self.open_tag(id, minimal, &mut prefix);
            prefix.push('>');
            self.children(id, depth, minimal, path.get(i + 1).copied(), &mut prefix)?;
        }
        let mut suffix = String::new();
        for &id in path.iter().rev() {
            close(&self.g.node(id).name, &mut suffix);
        }
        suffix.push('\n');
        Ok((prefix, suffix, depth))
    }
}

fn close(name: &str, out: &mut String) {
    out.push_str("</");
    out.push_str(name);
    out.push('>');
}

/// Shortest path from the root to the nearest element with a `*` child.
fn growth_path(g: &DtdGraph) -> Option<Vec<ElemId>> {
    let mut pred: Vec<Option<ElemId>> = vec![None; g.len()];
    let mut seen = vec![false; g.len()];
    let mut queue = VecDeque::from([g.root()]);
    seen[g.root().0] = true;
    while let Some(id) = queue.pop_front() {
        if g.child_edges(id).any(|e| e.label == Cardinality::Many) {
            let mut path = vec![id];
            while let Some(p) = pred[path.last().unwrap().0] {
                path.push(p);
            }
            path.reverse();
            return Some(path);
        }
        for e in g.child_edges(id) {
            if !seen[e.child.0] {
                seen[e.child.0] = true;
                pred[e.child.0] = Some(id);
                queue.push_back(e.child);
            }
        }
    }
    None
}

/// Generates a document of roughly `target` bytes (within ±10%).
///
/// The same graph, target and seed always give the same document.
pub fn generate_document(g: &DtdGraph, target: usize, seed: u64) -> Result<String, GenerateError> {
    let mut gen = Gen {
        g,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let lower = (target as f64 * (1.0 - SIZE_TOLERANCE)).ceil() as usize;
    let upper = (target as f64 * (1.0 + SIZE_TOLERANCE)).floor() as usize;

    let growth = growth_path(g);
    let path = growth.clone().unwrap_or_else(|| vec![g.root()]);
    let (mut doc, suffix, depth) = {
        let (p, s, d) = gen.skeleton(&path, false)?;
        if p.len() + s.len() <= upper {
            (p, s, d)
        } else {
            let (p, s, d) = gen.skeleton(&path, true)?;
            if p.len() + s.len() > upper {
                return Err(GenerateError::TargetTooSmall {
                    target,
                    minimum: p.len() + s.len(),
                });
            }
            (p, s, d)
        }
    };

    if let Some(path) = growth {
        let node = *path.last().unwrap();
        let many: Vec<GraphEdge> = g
            .child_edges(node)
            .filter(|e| e.label == Cardinality::Many)
            .copied()
            .collect();
        let mut misses = 0;
        while doc.len() + suffix.len() < target && misses < 64 {
            let edge = many[gen.rng.random_range(0..many.len())];
            let child_depth = depth + u32::from(edge.on_cycle);
            if child_depth > MAX_CYCLE_DEPTH {
                break;
            }
            let mark = doc.len();
            gen.element(edge.child, child_depth, false, &mut doc)?;
            if doc.len() + suffix.len() > upper {
                doc.truncate(mark);
                gen.element(edge.child, child_depth, true, &mut doc)?;
                if doc.len() + suffix.len() > upper {
                    doc.truncate(mark);
                    misses += 1;
                }
            }
        }
    }

    doc.push_str(&suffix);
    if doc.len() < lower {
        return Err(GenerateError::TargetUnreachable {
            target,
            reached: doc.len(),
        });
    }
    Ok(doc)
}
