//! Breadth-first shredding of a [`DomTree`] into relational tuples.
//!
//! Queue `q` holds element instances that own a tuple (non-inlinable types);
//! for each one dequeued, queue `r` walks its descendants, folding inlinable
//! ones into the tuple and handing non-inlinable ones back to `q` with a
//! freshly generated EID. Every element other than the root passes through
//! `r` exactly once and every non-inlinable element through `q` exactly once,
//! so a run is linear in elements plus attributes.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::warn;
use thiserror::Error;

use crate::dom::{DomTree, NodeId};
use crate::dtd::{Cardinality, DtdGraph, ElemId};
use crate::emit::{Sink, SinkError};
use crate::schema::{RelationalSchema, Strategy};

#[derive(Debug, Error)]
pub enum ShredError {
    #[error("element `{0}` is not declared in the DTD")]
    UnknownElement(String),
    #[error("attribute `{attribute}` of `{element}` is not declared in the DTD")]
    UnknownAttribute { element: String, attribute: String },
    #[error("`{child}` may not appear inside `{parent}`")]
    UnexpectedChild { parent: String, child: String },
    #[error("document root is `{found}` but the schema is rooted at `{expected}`")]
    RootMismatch { expected: String, found: String },
    #[error("`{parent}` holds more than one `{child}`, but its table has a single `{child}` reference column")]
    DuplicateChild { parent: String, child: String },
    #[error("schema has no column for {0}")]
    MissingColumn(String),
    #[error(transparent)]
    Sink(#[from] SinkError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Null,
    Int(u64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// One row; `values` line up with the columns of the named table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tuple {
    pub table: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeRow {
    pub parent_id: u64,
    pub child_id: u64,
    pub parent_type: Arc<str>,
    pub child_type: Arc<str>,
}

impl EdgeRow {
    pub fn values(&self) -> Vec<Value> {
        vec![
            Value::Int(self.parent_id),
            Value::Int(self.child_id),
            Value::Text(self.parent_type.to_string()),
            Value::Text(self.child_type.to_string()),
        ]
    }
}

pub trait IdSource {
    fn gen_id(&mut self) -> u64;
}

/// Per-run counter: 1, 2, 3, …
#[derive(Debug, Clone)]
pub struct IdGenerator {
    next: u64,
}

impl IdGenerator {
    pub fn new() -> Self {
        IdGenerator { next: 1 }
    }
}

impl Default for IdGenerator {
    fn default() -> Self {
        Self::new()
    }
}

impl IdSource for IdGenerator {
    fn gen_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }
}

/// A generator shared between concurrent runs that need one global ID space.
#[derive(Debug)]
pub struct SharedIdGenerator(AtomicU64);

impl SharedIdGenerator {
    pub fn new() -> Self {
        SharedIdGenerator(AtomicU64::new(1))
    }
}

impl Default for SharedIdGenerator {
    fn default() -> Self {
        Self::new()
    }
}

impl IdSource for &SharedIdGenerator {
    fn gen_id(&mut self) -> u64 {
        self.0.fetch_add(1, Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShredStats {
    pub q_enqueues: u64,
    pub r_enqueues: u64,
    pub tuples_emitted: u64,
    /// Rows written to the edge table.
    pub edge_rows: u64,
    /// Parent links written into `parentID`/`parentType` columns.
    pub parent_links: u64,
    pub elapsed: Duration,
    pub warnings: Vec<String>,
}

/// Queue counters compared against counts taken directly from the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LemmaCheck {
    pub non_inlinable_instances: u64,
    pub element_count: u64,
    pub q_enqueues: u64,
    pub r_enqueues: u64,
}

impl LemmaCheck {
    /// Every non-inlinable instance went through `q` once.
    pub fn q_holds(&self) -> bool {
        self.q_enqueues == self.non_inlinable_instances
    }

    /// Every element except the root went through `r` once.
    pub fn r_holds(&self) -> bool {
        self.r_enqueues + 1 == self.element_count
    }

    pub fn holds(&self) -> bool {
        self.q_holds() && self.r_holds()
    }
}

pub fn check_lemmas(
    tree: &DomTree,
    g: &DtdGraph,
    schema: &RelationalSchema,
    stats: &ShredStats,
) -> LemmaCheck {
    let non_inlinable_instances = tree
        .nodes()
        .iter()
        .filter(|n| g.lookup(&n.name).is_some_and(|t| !schema.is_inlinable(t)))
        .count() as u64;
    LemmaCheck {
        non_inlinable_instances,
        element_count: tree.element_count() as u64,
        q_enqueues: stats.q_enqueues,
        r_enqueues: stats.r_enqueues,
    }
}

fn is_namespace_decl(attr: &str) -> bool {
    attr == "xmlns" || attr.starts_with("xmlns:")
}

/// Resolves every node's element type and rejects anything the DTD graph
/// does not allow, so a failing document produces no output at all.
fn resolve_types(
    tree: &DomTree,
    g: &DtdGraph,
    schema: &RelationalSchema,
) -> Result<Vec<ElemId>, ShredError> {
    let nodes = tree.nodes();
    let mut types = Vec::with_capacity(nodes.len());
    let mut last: Option<(&Arc<str>, ElemId)> = None;
    for node in nodes {
        let ty = match last {
            Some((name, ty)) if Arc::ptr_eq(name, &node.name) => ty,
            _ => g
                .lookup(&node.name)
                .ok_or_else(|| ShredError::UnknownElement(node.name.to_string()))?,
        };
        last = Some((&node.name, ty));
        types.push(ty);
    }
    let root_ty = types[tree.root().0];
    if root_ty != g.root() {
        return Err(ShredError::RootMismatch {
            expected: g.root_name().to_string(),
            found: g.name(root_ty).to_string(),
        });
    }
    for (i, node) in nodes.iter().enumerate() {
        let ty = types[i];
        if let Some(p) = node.parent {
            if g.edge(types[p.0], ty).is_none() {
                return Err(ShredError::UnexpectedChild {
                    parent: g.name(types[p.0]).to_string(),
                    child: node.name.to_string(),
                });
            }
        }
        let plan = schema.plan(ty);
        for (attr, _) in &node.attributes {
            if plan.attr_col(attr).is_none() && !is_namespace_decl(attr) {
                let declared = g.node(ty).attributes.iter().any(|a| &a.name == attr);
                return Err(if declared {
                    ShredError::MissingColumn(format!("attribute {}/@{attr}", node.name))
                } else {
                    ShredError::UnknownAttribute {
                        element: node.name.to_string(),
                        attribute: attr.clone(),
                    }
                });
            }
        }
    }
    Ok(types)
}

struct TupleBuf<'a> {
    values: Vec<Value>,
    warnings: &'a mut Vec<String>,
}

impl TupleBuf<'_> {
    fn set_inlined(&mut self, col: usize, value: Value, what: impl FnOnce() -> String) {
        if !self.values[col].is_null() {
            let msg = format!("{} repeated within one tuple; last occurrence wins", what());
            warn!("{msg}");
            self.warnings.push(msg);
        }
        self.values[col] = value;
    }

    fn attributes(
        &mut self,
        attrs: &[(String, String)],
        plan: &crate::schema::ElementPlan,
        elem: &str,
    ) {
        for (name, value) in attrs {
            if let Some(col) = plan.attr_col(name) {
                self.set_inlined(col, Value::Text(value.clone()), || {
                    format!("attribute {elem}/@{name}")
                });
            }
        }
    }

    fn ignored_text(&mut self, elem: &str, value: &Option<String>) {
        if value.as_deref().is_some_and(|v| !v.is_empty()) {
            let msg = format!("ignoring text content of non-leaf element `{elem}`");
            warn!("{msg}");
            self.warnings.push(msg);
        }
    }
}

/// Shreds `tree` into `sink` following the mapping in `schema`.
///
/// The tree's transient `eid`, `parent_eid` and `parent_node_type` fields are
/// reset and then filled in by this run.
pub fn xinsert<S, I>(
    tree: &mut DomTree,
    g: &DtdGraph,
    schema: &RelationalSchema,
    sink: &mut S,
    ids: &mut I,
) -> Result<ShredStats, ShredError>
where
    S: Sink + ?Sized,
    I: IdSource + ?Sized,
{
    let started = Instant::now();
    if schema.tables().is_empty() {
        return Err(ShredError::MissingColumn("any table (empty schema)".into()));
    }
    let types = resolve_types(tree, g, schema)?;
    tree.clear_transient();

    let mut stats = ShredStats::default();
    let mut q: VecDeque<NodeId> = VecDeque::new();
    let mut r: VecDeque<NodeId> = VecDeque::new();

    let root = tree.root();
    tree.node_mut(root).eid = Some(ids.gen_id());
    q.push_back(root);
    stats.q_enqueues += 1;

    while let Some(e) = q.pop_front() {
        let ety = types[e.0];
        let plan = schema.plan(ety);
        let table = &schema.tables()[plan.table];
        let (e_eid, e_name) = {
            let n = tree.node(e);
            (n.eid.expect("queued elements carry an EID"), n.name.clone())
        };

        let mut buf = TupleBuf {
            values: vec![Value::Null; table.columns.len()],
            warnings: &mut stats.warnings,
        };
        buf.values[0] = Value::Int(e_eid);
        if let Some(col) = plan.node_type_col {
            buf.values[col] = Value::Text(e_name.to_string());
        }
        {
            let node = tree.node(e);
            buf.attributes(&node.attributes, plan, &e_name);
            if g.is_leaf(ety) {
                if let (Some(col), Some(v)) = (plan.leaf_col, &node.value) {
                    buf.values[col] = Value::Text(v.clone());
                }
            } else {
                buf.ignored_text(&e_name, &node.value);
                r.clear();
                r.extend(node.children.iter().copied());
                stats.r_enqueues += node.children.len() as u64;
            }
        }

        while let Some(f) = r.pop_front() {
            let fty = types[f.0];
            let parent = tree.node(f).parent.expect("non-root element has a parent");
            let pty = types[parent.0];
            let edge = g.edge(pty, fty).expect("edges checked in resolve_types");
            if !schema.is_inlinable(fty) {
                let f_eid = ids.gen_id();
                {
                    let fnode = tree.node_mut(f);
                    fnode.eid = Some(f_eid);
                    fnode.parent_eid = Some(e_eid);
                    fnode.parent_node_type = Some(e_name.clone());
                }
                if edge.link_label() != Cardinality::Many {
                    let col = schema.plan(pty).fk_col(fty).ok_or_else(|| {
                        ShredError::MissingColumn(format!("{}/{} EID", g.name(pty), g.name(fty)))
                    })?;
                    if !buf.values[col].is_null() {
                        return Err(ShredError::DuplicateChild {
                            parent: g.name(pty).to_string(),
                            child: g.name(fty).to_string(),
                        });
                    }
                    buf.values[col] = Value::Int(f_eid);
                }
                q.push_back(f);
                stats.q_enqueues += 1;
            } else {
                let fplan = schema.plan(fty);
                let fnode = tree.node(f);
                buf.attributes(&fnode.attributes, fplan, &fnode.name);
                if g.is_leaf(fty) {
                    if let (Some(col), Some(v)) = (fplan.leaf_col, &fnode.value) {
                        buf.set_inlined(col, Value::Text(v.clone()), || {
                            format!("leaf `{}`", fnode.name)
                        });
                    }
                } else {
                    buf.ignored_text(&fnode.name, &fnode.value);
                    r.extend(fnode.children.iter().copied());
                    stats.r_enqueues += fnode.children.len() as u64;
                }
            }
        }

        let node = tree.node(e);
        let star_child = node.parent.is_some_and(|p| {
            g.edge(types[p.0], ety)
                .is_some_and(|edge| edge.link_label() == Cardinality::Many)
        });
        let link = star_child.then(|| {
            (
                node.parent_eid.expect("set when discovered"),
                node.parent_node_type.clone().expect("set when discovered"),
            )
        });

        if let (Strategy::Shared, Some((pid, ptype))) = (schema.strategy(), &link) {
            let (pid_col, ptype_col) = plan
                .parent_cols
                .ok_or_else(|| ShredError::MissingColumn(format!("parent link of `{e_name}`")))?;
            buf.values[pid_col] = Value::Int(*pid);
            buf.values[ptype_col] = Value::Text(ptype.to_string());
            stats.parent_links += 1;
        }

        let tuple = Tuple {
            table: table.name.clone(),
            values: buf.values,
        };
        sink.write_tuple(&tuple)?;
        stats.tuples_emitted += 1;

        if let (Strategy::DtdMap, Some((pid, ptype))) = (schema.strategy(), link) {
            sink.write_edge(&EdgeRow {
                parent_id: pid,
                child_id: e_eid,
                parent_type: ptype,
                child_type: e_name,
            })?;
            stats.edge_rows += 1;
        }
    }

    stats.elapsed = started.elapsed();
    Ok(stats)
}
