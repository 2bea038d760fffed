//! Inlining schema mapping: which element types get their own table, which
//! columns each table carries, and the element/attribute/leaf → column maps.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::dtd::{Cardinality, DtdGraph, ElemId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("could not find a free name for `{0}`")]
    NameCollisionUnresolvable(String),
}

/// How parent links of `*`-children are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// A global `Edge(parentID, childID, parentType, childType)` table.
    DtdMap,
    /// `parentID`/`parentType` columns in the child's own table.
    Shared,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dtdmap" => Ok(Strategy::DtdMap),
            "shared" => Ok(Strategy::Shared),
            other => Err(format!(
                "unknown strategy `{other}` (expected dtdmap or shared)"
            )),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::DtdMap => "dtdmap",
            Strategy::Shared => "shared",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Id,
    NodeType,
    ParentId,
    ParentType,
    XmlAttr,
    LeafValue,
    FkEid,
    ChildId,
    ChildType,
}

impl ColumnRole {
    pub fn is_integer(self) -> bool {
        matches!(
            self,
            ColumnRole::Id | ColumnRole::ParentId | ColumnRole::ChildId | ColumnRole::FkEid
        )
    }
}

/// What document item feeds a data column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSource {
    Attribute { element: String, attribute: String },
    Leaf { element: String },
    ForeignKey { parent: String, child: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub role: ColumnRole,
    pub source: Option<ColumnSource>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    /// Element types whose data lands in this table; the owning element first.
    pub hosts: Vec<String>,
}

impl TableDef {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    fn edge() -> TableDef {
        let col = |name: &str, role| ColumnDef {
            name: name.to_string(),
            role,
            source: None,
        };
        TableDef {
            name: EDGE_TABLE.to_string(),
            columns: vec![
                col("parentID", ColumnRole::ParentId),
                col("childID", ColumnRole::ChildId),
                col("parentType", ColumnRole::ParentType),
                col("childType", ColumnRole::ChildType),
            ],
            hosts: Vec::new(),
        }
    }
}

pub const EDGE_TABLE: &str = "Edge";

/// The element → table, attribute → column and leaf → column functions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappingTriple {
    pub sigma: BTreeMap<String, String>,
    /// Keyed by (element, attribute).
    pub theta: BTreeMap<(String, String), String>,
    pub delta: BTreeMap<String, String>,
    /// Column holding a single-valued child's EID, keyed by (parent, child).
    pub fk: BTreeMap<(String, String), String>,
}

/// Per-element-type instructions for the shredder, indexed by [`ElemId`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ElementPlan {
    pub table: usize,
    pub inlinable: bool,
    pub attr_cols: Vec<(String, usize)>,
    pub leaf_col: Option<usize>,
    pub node_type_col: Option<usize>,
    /// `(parentID, parentType)` under [`Strategy::Shared`].
    pub parent_cols: Option<(usize, usize)>,
    pub fk_cols: Vec<(ElemId, usize)>,
}

impl ElementPlan {
    pub fn attr_col(&self, name: &str) -> Option<usize> {
        self.attr_cols
            .iter()
            .find(|(a, _)| a == name)
            .map(|&(_, c)| c)
    }

    pub fn fk_col(&self, child: ElemId) -> Option<usize> {
        self.fk_cols
            .iter()
            .find(|(c, _)| *c == child)
            .map(|&(_, col)| col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationalSchema {
    strategy: Strategy,
    tables: Vec<TableDef>,
    edge_table: Option<usize>,
    mappings: MappingTriple,
    plans: Vec<ElementPlan>,
}

impl RelationalSchema {
    /// A schema with no tables at all.
    pub fn empty(strategy: Strategy) -> Self {
        RelationalSchema {
            strategy,
            tables: Vec::new(),
            edge_table: None,
            mappings: MappingTriple::default(),
            plans: Vec::new(),
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// All tables, element tables first and the edge table (if any) last.
    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn table_index(&self, name: &str) -> Option<usize> {
        self.tables.iter().position(|t| t.name == name)
    }

    pub fn edge_table(&self) -> Option<&TableDef> {
        self.edge_table.map(|i| &self.tables[i])
    }

    pub fn edge_table_index(&self) -> Option<usize> {
        self.edge_table
    }

    pub fn mappings(&self) -> &MappingTriple {
        &self.mappings
    }

    pub fn plan(&self, id: ElemId) -> &ElementPlan {
        &self.plans[id.0]
    }

    pub fn is_inlinable(&self, id: ElemId) -> bool {
        self.plans[id.0].inlinable
    }

    /// Human-readable listing of the mapping functions.
    pub fn mapping_report(&self) -> String {
        let m = &self.mappings;
        let mut out = String::new();
        let _ = writeln!(out, "strategy: {}", self.strategy);
        let _ = writeln!(out, "element -> table");
        for (e, t) in &m.sigma {
            let _ = writeln!(out, "  {e} -> {t}");
        }
        let _ = writeln!(out, "attribute -> column");
        for ((e, a), c) in &m.theta {
            let _ = writeln!(out, "  {e}/@{a} -> {}.{c}", m.sigma[e]);
        }
        let _ = writeln!(out, "leaf -> column");
        for (e, c) in &m.delta {
            let _ = writeln!(out, "  {e} -> {}.{c}", m.sigma[e]);
        }
        if !m.fk.is_empty() {
            let _ = writeln!(out, "child EID -> column");
            for ((p, c), col) in &m.fk {
                let _ = writeln!(out, "  {p}/{c} -> {}.{col}", m.sigma[p]);
            }
        }
        out
    }
}

/// An element type can share its parent's table when it has exactly one
/// parent type, that edge is `1` or `?`, and it is not on a cycle. The root
/// never qualifies.
pub fn is_inlinable(node: ElemId, g: &DtdGraph) -> bool {
    if node == g.root() || g.on_cycle(node) {
        return false;
    }
    let mut parents = g.parent_edges(node);
    match (parents.next(), parents.next()) {
        (Some(edge), None) => edge.link_label() != Cardinality::Many,
        _ => false,
    }
}

/// SQL keywords avoided as table or column names.
pub const SQL_RESERVED: &[&str] = &[
    "add",
    "all",
    "alter",
    "and",
    "any",
    "as",
    "asc",
    "between",
    "by",
    "case",
    "cast",
    "check",
    "column",
    "constraint",
    "create",
    "cross",
    "current",
    "date",
    "default",
    "delete",
    "desc",
    "distinct",
    "drop",
    "else",
    "end",
    "except",
    "exists",
    "false",
    "fetch",
    "for",
    "foreign",
    "from",
    "full",
    "grant",
    "group",
    "having",
    "in",
    "index",
    "inner",
    "insert",
    "intersect",
    "into",
    "is",
    "join",
    "key",
    "left",
    "like",
    "limit",
    "not",
    "null",
    "offset",
    "on",
    "or",
    "order",
    "outer",
    "primary",
    "references",
    "right",
    "row",
    "select",
    "set",
    "table",
    "then",
    "time",
    "timestamp",
    "to",
    "true",
    "union",
    "unique",
    "update",
    "user",
    "using",
    "values",
    "view",
    "when",
    "where",
    "with",
];

/// Returns `proposed` unless it is taken or reserved (ASCII case-insensitively),
/// in which case `<host>_<proposed>`, then `<host>_<proposed>_2`, `_3`, … .
pub fn resolve_name<S: AsRef<str>>(
    proposed: &str,
    host: &str,
    taken: &[S],
    reserved: &[&str],
) -> String {
    let free = |name: &str| {
        !taken.iter().any(|t| t.as_ref().eq_ignore_ascii_case(name))
            && !reserved.iter().any(|r| r.eq_ignore_ascii_case(name))
    };
    if free(proposed) {
        return proposed.to_string();
    }
    let prefixed = format!("{host}_{proposed}");
    if free(&prefixed) {
        return prefixed;
    }
    (2u64..)
        .map(|i| format!("{prefixed}_{i}"))
        .find(|n| free(n))
        .expect("unbounded suffix search")
}

fn capitalize(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct TableBuilder<'g> {
    g: &'g DtdGraph,
    table: usize,
    def: TableDef,
    host_name: String,
}

impl TableBuilder<'_> {
    fn push(&mut self, proposed: &str, role: ColumnRole, source: Option<ColumnSource>) -> usize {
        let taken: Vec<&str> = self.def.column_names().collect();
        let name = resolve_name(proposed, &self.host_name, &taken, SQL_RESERVED);
        self.def.columns.push(ColumnDef { name, role, source });
        self.def.columns.len() - 1
    }

    /// Adds columns for `elem` (the host itself or something inlined into it)
    /// and recurses through inlinable children in content-model order.
    fn fill(
        &mut self,
        elem: ElemId,
        host: ElemId,
        plans: &mut [ElementPlan],
        m: &mut MappingTriple,
    ) {
        let g = self.g;
        let node = g.node(elem);
        plans[elem.0].table = self.table;
        m.sigma.insert(node.name.clone(), self.def.name.clone());
        if elem != host {
            self.def.hosts.push(node.name.clone());
        }
        for attr in &node.attributes {
            let col = self.push(
                &attr.name,
                ColumnRole::XmlAttr,
                Some(ColumnSource::Attribute {
                    element: node.name.clone(),
                    attribute: attr.name.clone(),
                }),
            );
            m.theta.insert(
                (node.name.clone(), attr.name.clone()),
                self.def.columns[col].name.clone(),
            );
            plans[elem.0].attr_cols.push((attr.name.clone(), col));
        }
        if node.is_leaf() {
            let proposed = if elem == host {
                format!("{}_value", node.name)
            } else {
                node.name.clone()
            };
            let col = self.push(
                &proposed,
                ColumnRole::LeafValue,
                Some(ColumnSource::Leaf {
                    element: node.name.clone(),
                }),
            );
            m.delta
                .insert(node.name.clone(), self.def.columns[col].name.clone());
            plans[elem.0].leaf_col = Some(col);
        }
        for edge in g.child_edges(elem) {
            let child = edge.child;
            if plans[child.0].inlinable {
                self.fill(child, host, plans, m);
            } else if edge.link_label() != Cardinality::Many {
                let child_name = g.name(child);
                let col = self.push(
                    &format!("{child_name}_EID"),
                    ColumnRole::FkEid,
                    Some(ColumnSource::ForeignKey {
                        parent: node.name.clone(),
                        child: child_name.to_string(),
                    }),
                );
                m.fk.insert(
                    (node.name.clone(), child_name.to_string()),
                    self.def.columns[col].name.clone(),
                );
                plans[elem.0].fk_cols.push((child, col));
            }
        }
    }
}

/// Generates the relational schema and mapping functions for `g`.
pub fn map_schema(g: &DtdGraph, strategy: Strategy) -> Result<RelationalSchema, SchemaError> {
    let mut plans: Vec<ElementPlan> = g
        .ids()
        .map(|id| ElementPlan {
            inlinable: is_inlinable(id, g),
            ..ElementPlan::default()
        })
        .collect();
    let mut mappings = MappingTriple::default();
    let mut tables: Vec<TableDef> = Vec::new();
    let mut table_names: Vec<String> = Vec::new();
    if strategy == Strategy::DtdMap {
        table_names.push(EDGE_TABLE.to_string());
    }

    let hosts: Vec<ElemId> = g.ids().filter(|&id| !plans[id.0].inlinable).collect();
    for host in hosts {
        let node = g.node(host);
        let name = resolve_name(
            &capitalize(&node.name),
            &node.name,
            &table_names,
            SQL_RESERVED,
        );
        table_names.push(name.clone());
        let mut b = TableBuilder {
            g,
            table: tables.len(),
            def: TableDef {
                name,
                columns: Vec::new(),
                hosts: vec![node.name.clone()],
            },
            host_name: node.name.clone(),
        };
        b.push("ID", ColumnRole::Id, None);
        let starred = g
            .parent_edges(host)
            .any(|e| e.link_label() == Cardinality::Many);
        if strategy == Strategy::Shared && starred {
            let pid = b.push("parentID", ColumnRole::ParentId, None);
            let ptype = b.push("parentType", ColumnRole::ParentType, None);
            plans[host.0].parent_cols = Some((pid, ptype));
        }
        if host == g.root() || node.parents.len() > 1 {
            plans[host.0].node_type_col = Some(b.push("nodeType", ColumnRole::NodeType, None));
        }
        b.fill(host, host, &mut plans, &mut mappings);
        tables.push(b.def);
    }

    let edge_table = (strategy == Strategy::DtdMap).then(|| {
        tables.push(TableDef::edge());
        tables.len() - 1
    });

    Ok(RelationalSchema {
        strategy,
        tables,
        edge_table,
        mappings,
        plans,
    })
}

/// Quotes an identifier only when it is not a plain `[A-Za-z_][A-Za-z0-9_]*`.
pub fn sql_ident(name: &str) -> std::borrow::Cow<'_, str> {
    let plain = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        name.into()
    } else {
        format!("\"{}\"", name.replace('"', "\"\"")).into()
    }
}

/// One `CREATE TABLE` per line, in schema order.
pub fn emit_ddl(schema: &RelationalSchema) -> String {
    let mut out = String::new();
    for table in schema.tables() {
        let _ = write!(out, "CREATE TABLE {} (", sql_ident(&table.name));
        for (i, col) in table.columns.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let ty = if col.role.is_integer() {
                "INTEGER"
            } else {
                "TEXT"
            };
            let _ = write!(out, "{} {ty}", sql_ident(&col.name));
        }
        out.push_str(");\n");
    }
    out
}
