#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use xshred::dom::{load_document, DomTree};
use xshred::dtd::{parse_dtd, Cardinality, DtdGraph};
use xshred::emit::MemorySink;
use xshred::engine::{xinsert, IdGenerator, ShredStats, Value};
use xshred::schema::{map_schema, ColumnRole, ColumnSource, RelationalSchema, Strategy};

pub type Multiset = BTreeMap<(String, String), usize>;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn graph(dtd: &str) -> DtdGraph {
    let d = parse_dtd(dtd).unwrap();
    let root = d.infer_root().unwrap().to_string();
    d.graph(&root).unwrap()
}

/// A recursive document-style DTD small enough to inline in tests.
pub const SECTIONS_DTD: &str = "\
<!ELEMENT book (title, author+, chapter*)>
<!ATTLIST book isbn CDATA #REQUIRED lang CDATA \"en\">
<!ELEMENT title (#PCDATA)>
<!ELEMENT author (#PCDATA)>
<!ELEMENT chapter (title, (para | section | figure)*)>
<!ATTLIST chapter n CDATA #IMPLIED>
<!ELEMENT section (title?, (para | section)*)>
<!ATTLIST section id ID #IMPLIED>
<!ELEMENT para (#PCDATA | em | code)*>
<!ELEMENT em (#PCDATA)>
<!ELEMENT code (#PCDATA)>
<!ELEMENT figure EMPTY>
<!ATTLIST figure src CDATA #REQUIRED caption CDATA #IMPLIED>";

/// The DTDs used for randomized checks: acyclic data-centric ones and
/// depth-bounded recursive ones.
pub fn corpus() -> Vec<(&'static str, DtdGraph)> {
    vec![
        ("univ", graph(&fixture("univ.dtd"))),
        ("catalog", graph(&fixture("catalog.dtd"))),
        ("auction", graph(&fixture("auction.dtd"))),
        ("sections", graph(SECTIONS_DTD)),
    ]
}

pub struct Shredded {
    pub tree: DomTree,
    pub sink: MemorySink,
    pub stats: ShredStats,
}

pub fn shred(g: &DtdGraph, schema: &RelationalSchema, xml: &str) -> Shredded {
    let mut tree = load_document(xml).unwrap();
    let mut sink = MemorySink::default();
    let stats = xinsert(&mut tree, g, schema, &mut sink, &mut IdGenerator::new()).unwrap();
    Shredded { tree, sink, stats }
}

pub fn schema(g: &DtdGraph, strategy: Strategy) -> RelationalSchema {
    map_schema(g, strategy).unwrap()
}

/// (attribute name, value) and (leaf element name, value) pairs read straight
/// from the XML with a separate parser. Self-closing leaves carry no value;
/// `<x></x>` carries the empty string.
pub fn xml_values(g: &DtdGraph, xml: &str) -> Multiset {
    let doc = roxmltree::Document::parse(xml).unwrap();
    let mut out = Multiset::new();
    for n in doc.descendants().filter(|n| n.is_element()) {
        let name = n.tag_name().name();
        for a in n.attributes() {
            if a.name() != "xmlns" && a.namespace().is_none() {
                *out.entry((a.name().to_string(), a.value().to_string()))
                    .or_default() += 1;
            }
        }
        let leaf = g.lookup(name).is_some_and(|t| g.is_leaf(t));
        let self_closing = xml[n.range()].ends_with("/>");
        if leaf && !self_closing {
            let text: String = n
                .children()
                .filter(|c| c.is_text())
                .map(|c| c.text().unwrap())
                .collect();
            *out.entry((name.to_string(), text.trim().to_string()))
                .or_default() += 1;
        }
    }
    out
}

/// Non-NULL attribute and leaf-value cells of the emitted tuples, keyed by
/// the XML name they came from.
pub fn tuple_values(schema: &RelationalSchema, sink: &MemorySink) -> Multiset {
    let mut out = Multiset::new();
    for t in &sink.tuples {
        let def = schema.table(&t.table).unwrap();
        for (col, v) in def.columns.iter().zip(&t.values) {
            let name = match (&col.role, &col.source) {
                (ColumnRole::XmlAttr, Some(ColumnSource::Attribute { attribute, .. })) => attribute,
                (ColumnRole::LeafValue, Some(ColumnSource::Leaf { element })) => element,
                _ => continue,
            };
            if let Value::Text(s) = v {
                *out.entry((name.clone(), s.clone())).or_default() += 1;
            } else {
                assert!(v.is_null(), "non-text value in {}.{}", t.table, col.name);
            }
        }
    }
    out
}

/// Element instances whose incoming edge is declared `*`.
pub fn star_instances(g: &DtdGraph, tree: &DomTree) -> u64 {
    tree.nodes()
        .iter()
        .filter(|n| {
            n.parent.is_some_and(|p| {
                let parent = &tree.node(p).name;
                g.edge_label(Some(parent), &n.name).unwrap() == Some(Cardinality::Many)
            })
        })
        .count() as u64
}

/// child EID -> (parent EID, parent type) as recorded in the output: edge
/// rows, `parentID`/`parentType` columns, and `<child>_EID` columns.
pub fn linkage_from_output(
    schema: &RelationalSchema,
    sink: &MemorySink,
) -> HashMap<u64, (u64, String)> {
    let mut links = HashMap::new();
    let mut add = |child: u64, parent: u64, ty: String| {
        assert!(
            links.insert(child, (parent, ty)).is_none(),
            "element {child} linked twice"
        );
    };
    for e in &sink.edges {
        add(e.child_id, e.parent_id, e.parent_type.to_string());
    }
    for t in &sink.tuples {
        let def = schema.table(&t.table).unwrap();
        let id = match t.values[0] {
            Value::Int(i) => i,
            ref v => panic!("ID column holds {v:?}"),
        };
        let own_type = def
            .columns
            .iter()
            .position(|c| c.role == ColumnRole::NodeType)
            .map(|i| t.values[i].as_text().unwrap().to_string())
            .unwrap_or_else(|| def.hosts[0].clone());
        let pid = def
            .columns
            .iter()
            .position(|c| c.role == ColumnRole::ParentId);
        let pty = def
            .columns
            .iter()
            .position(|c| c.role == ColumnRole::ParentType);
        if let (Some(pid), Some(pty)) = (pid, pty) {
            if let Value::Int(p) = t.values[pid] {
                add(id, p, t.values[pty].as_text().unwrap().to_string());
            }
        }
        for (col, v) in def.columns.iter().zip(&t.values) {
            if col.role == ColumnRole::FkEid {
                if let Value::Int(child) = v {
                    add(*child, id, own_type.clone());
                }
            }
        }
    }
    links
}

/// The same relation computed from the tree: each non-inlinable instance
/// maps to its nearest non-inlinable ancestor.
pub fn linkage_from_tree(
    g: &DtdGraph,
    schema: &RelationalSchema,
    tree: &DomTree,
) -> HashMap<u64, (u64, String)> {
    let stored = |n: &xshred::dom::ElementNode| !schema.is_inlinable(g.lookup(&n.name).unwrap());
    let mut links = HashMap::new();
    for n in tree.nodes().iter().filter(|n| stored(n)) {
        let mut p = n.parent;
        while let Some(pid) = p {
            let pn = tree.node(pid);
            if stored(pn) {
                links.insert(n.eid.unwrap(), (pn.eid.unwrap(), pn.name.to_string()));
                break;
            }
            p = pn.parent;
        }
    }
    links
}

/// Sizes spread log-uniformly over `[lo, hi]`.
pub fn log_sizes(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    (0..count)
        .map(|i| {
            let t = if count == 1 {
                0.0
            } else {
                i as f64 / (count - 1) as f64
            };
            (a + (b - a) * t).exp().round() as usize
        })
        .collect()
}
