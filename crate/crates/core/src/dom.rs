//! Element-only document tree: text is folded into leaf values rather than
//! kept as nodes. The whole document is materialized in memory.

use std::collections::HashMap;
use std::sync::Arc;

use log::warn;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomError {
    #[error("malformed XML at byte {position}: {message}")]
    MalformedXml { position: u64, message: String },
    #[error("document has no root element")]
    EmptyDocument,
}

/// Index of an element in a [`DomTree`]; arena order is document order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementNode {
    pub name: Arc<str>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub attributes: Vec<(String, String)>,
    /// Trimmed text of a childless element; `None` for self-closing tags and
    /// for elements with element children.
    pub value: Option<String>,
    pub eid: Option<u64>,
    pub parent_eid: Option<u64>,
    pub parent_node_type: Option<Arc<str>>,
}

impl ElementNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomTree {
    nodes: Vec<ElementNode>,
    attr_count: usize,
    warnings: Vec<String>,
}

impl DomTree {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &ElementNode {
        &self.nodes[id.0]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut ElementNode {
        &mut self.nodes[id.0]
    }

    /// Elements in document order.
    pub fn nodes(&self) -> &[ElementNode] {
        &self.nodes
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn attr_count(&self) -> usize {
        self.attr_count
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Resets the per-run `eid`, `parent_eid` and `parent_node_type` fields.
    pub fn clear_transient(&mut self) {
        for n in &mut self.nodes {
            n.eid = None;
            n.parent_eid = None;
            n.parent_node_type = None;
        }
    }
}

/// `(elements, attributes)`; their sum is the input size `n` used by the benchmark.
pub fn node_count(t: &DomTree) -> (usize, usize) {
    (t.element_count(), t.attr_count())
}

struct Open {
    id: NodeId,
    text: String,
}

struct Builder {
    nodes: Vec<ElementNode>,
    names: HashMap<String, Arc<str>>,
    stack: Vec<Open>,
    attr_count: usize,
    warnings: Vec<String>,
    closed_root: bool,
}

impl Builder {
    fn intern(&mut self, name: &str) -> Arc<str> {
        if let Some(n) = self.names.get(name) {
            return n.clone();
        }
        let n: Arc<str> = Arc::from(name);
        self.names.insert(name.to_string(), n.clone());
        n
    }

    fn open(&mut self, start: &BytesStart<'_>, position: u64) -> Result<NodeId, DomError> {
        if self.closed_root || (self.stack.is_empty() && !self.nodes.is_empty()) {
            return Err(malformed(position, "more than one root element"));
        }
        let name = self.intern(start.name().into_inner());
        let mut attributes = Vec::new();
        for attr in start.attributes() {
            let attr = attr.map_err(|e| malformed(position, e.to_string()))?;
            let key = attr.key.into_inner().to_string();
            let value = attr
                .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                .map_err(|e| malformed(position, e.to_string()))?
                .into_owned();
            attributes.push((key, value));
        }
        self.attr_count += attributes.len();
        let id = NodeId(self.nodes.len());
        let parent = self.stack.last().map(|o| o.id);
        if let Some(p) = parent {
            self.nodes[p.0].children.push(id);
        }
        self.nodes.push(ElementNode {
            name,
            parent,
            children: Vec::new(),
            attributes,
            value: None,
            eid: None,
            parent_eid: None,
            parent_node_type: None,
        });
        Ok(id)
    }

    fn text(&mut self, s: &str, position: u64) -> Result<(), DomError> {
        match self.stack.last_mut() {
            Some(open) => open.text.push_str(s),
            None if s.trim().is_empty() => {}
            None => return Err(malformed(position, "text outside the root element")),
        }
        Ok(())
    }

    fn close(&mut self) {
        let Some(Open { id, text }) = self.stack.pop() else {
            return;
        };
        let node = &mut self.nodes[id.0];
        let trimmed = text.trim();
        if node.children.is_empty() {
            node.value = Some(trimmed.to_string());
        } else if !trimmed.is_empty() {
            let msg = format!(
                "dropping text content of `{}` because it also has element children",
                node.name
            );
            warn!("{msg}");
            self.warnings.push(msg);
        }
        if self.stack.is_empty() {
            self.closed_root = true;
        }
    }
}

fn malformed(position: u64, message: impl Into<String>) -> DomError {
    DomError::MalformedXml {
        position,
        message: message.into(),
    }
}

fn resolve_entity(name: &str) -> Option<&'static str> {
    Some(match name {
        "amp" => "&",
        "lt" => "<",
        "gt" => ">",
        "apos" => "'",
        "quot" => "\"",
        _ => return None,
    })
}

/// Parses a well-formed document into a [`DomTree`].
pub fn load_document(xml: &str) -> Result<DomTree, DomError> {
    let mut reader = Reader::from_str(xml);
    let mut b = Builder {
        nodes: Vec::new(),
        names: HashMap::new(),
        stack: Vec::new(),
        attr_count: 0,
        warnings: Vec::new(),
        closed_root: false,
    };
    loop {
        let position = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| malformed(reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(start) => {
                let id = b.open(&start, position)?;
                b.stack.push(Open {
                    id,
                    text: String::new(),
                });
            }
            Event::Empty(start) => {
                b.open(&start, position)?;
                if b.stack.is_empty() {
                    b.closed_root = true;
                }
            }
            Event::End(_) => b.close(),
            Event::Text(t) => b.text(&t.xml10_content(), position)?,
            Event::CData(c) => {
                b.text(&c.xml10_content(), position)?;
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(c)) => c.to_string(),
                    Ok(None) => {
                        let name = r.xml10_content();
                        resolve_entity(&name)
                            .ok_or_else(|| {
                                malformed(position, format!("undefined entity `&{name};`"))
                            })?
                            .to_string()
                    }
                    Err(e) => return Err(malformed(position, e.to_string())),
                };
                b.text(&resolved, position)?;
            }
            Event::Comment(_) | Event::PI(_) | Event::Decl(_) | Event::DocType(_) => {}
            Event::Eof => break,
        }
    }
    if !b.stack.is_empty() {
        let name = b.nodes[b.stack.last().unwrap().id.0].name.clone();
        return Err(malformed(
            xml.len() as u64,
            format!("unclosed element `{name}`"),
        ));
    }
    if b.nodes.is_empty() {
        return Err(DomError::EmptyDocument);
    }
    Ok(DomTree {
        nodes: b.nodes,
        attr_count: b.attr_count,
        warnings: b.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIV_XML: &str = include_str!("../tests/fixtures/univ.xml");

    #[test]
    fn leaf_with_attribute() {
        let t = load_document("<a x='1'>hi</a>").unwrap();
        let root = t.node(t.root());
        assert_eq!(&*root.name, "a");
        assert_eq!(root.attributes, vec![("x".to_string(), "1".to_string())]);
        assert_eq!(root.value.as_deref(), Some("hi"));
        assert!(root.children.is_empty());
        assert!(root.parent.is_none());
        assert!(root.eid.is_none());
    }

    #[test]
    fn stray_text_is_dropped_with_warning() {
        let t = load_document("<a><b/>stray<c/></a>").unwrap();
        assert_eq!(t.node(t.root()).value, None);
        assert_eq!(t.warnings().len(), 1);
        let t = load_document("<a>\n  <b/>\n</a>").unwrap();
        assert!(t.warnings().is_empty());
    }

    #[test]
    fn counts() {
        assert_eq!(node_count(&load_document("<a/>").unwrap()), (1, 0));
        assert_eq!(
            node_count(&load_document("<a x='1' y='2'/>").unwrap()),
            (1, 2)
        );
        assert_eq!(node_count(&load_document(UNIV_XML).unwrap()), (9, 7));
    }

    #[test]
    fn univ_tree_shape() {
        let t = load_document(UNIV_XML).unwrap();
        let names: Vec<&str> = t.nodes().iter().map(|n| &*n.name).collect();
        assert_eq!(
            names,
            ["univ", "college", "dep", "website", "college", "dep", "tel", "dep", "college"]
        );
        let root = t.node(t.root());
        assert_eq!(root.children.len(), 3);
        assert_eq!(root.value, None);
        assert_eq!(t.nodes()[3].value.as_deref(), Some("www.cs.wayne.edu"));
        assert_eq!(t.nodes()[7].attributes[0].1, "IE");
        assert_eq!(t.nodes()[7].value, None);
    }

    #[test]
    fn empty_vs_self_closing_vs_whitespace() {
        let t = load_document("<r><a/><b></b><c>  \n </c><d> x y </d></r>").unwrap();
        let v: Vec<Option<&str>> = t.nodes()[1..].iter().map(|n| n.value.as_deref()).collect();
        assert_eq!(v, [None, Some(""), Some(""), Some("x y")]);
    }

    #[test]
    fn references_cdata_comments() {
        let t = load_document(
            "<?xml version='1.0'?><!-- c --><r a='x &amp; &quot;y&quot;'>1 &lt; 2 &#x41;<![CDATA[<z>]]><?pi x?></r>",
        )
        .unwrap();
        let r = t.node(t.root());
        assert_eq!(r.attributes[0].1, "x & \"y\"");
        assert_eq!(r.value.as_deref(), Some("1 < 2 A<z>"));
    }

    #[test]
    fn errors() {
        assert_eq!(load_document(""), Err(DomError::EmptyDocument));
        assert_eq!(
            load_document("  <!-- only -->  "),
            Err(DomError::EmptyDocument)
        );
        for bad in [
            "<a>",
            "<a></b>",
            "<a/><b/>",
            "<a>&bogus;</a>",
            "text<a/>",
            "<a x='1' x='2'/>",
        ] {
            assert!(
                matches!(load_document(bad), Err(DomError::MalformedXml { .. })),
                "{bad} should be malformed"
            );
        }
    }

    #[test]
    fn parent_child_consistency_and_determinism() {
        let t = load_document(UNIV_XML).unwrap();
        for (i, n) in t.nodes().iter().enumerate() {
            for c in &n.children {
                assert_eq!(t.node(*c).parent, Some(NodeId(i)));
            }
            if let Some(p) = n.parent {
                assert!(t.node(p).children.contains(&NodeId(i)));
            }
            assert!(n.value.is_none() || n.children.is_empty());
        }
        assert_eq!(t, load_document(UNIV_XML).unwrap());
    }
}
