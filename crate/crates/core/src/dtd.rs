//! DTD declarations and the element-type graph derived from them.
//!
//! Only the internal-subset subset of DTD syntax that schema mapping needs is
//! accepted: `<!ELEMENT>` and `<!ATTLIST>` declarations, comments and
//! processing instructions, optionally wrapped in a `<!DOCTYPE name [ ... ]>`.
//! Entities, notations, conditional sections and external subsets are
//! rejected with [`DtdError::Unsupported`].

use std::collections::HashMap;
use std::fmt;

use log::warn;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DtdError {
    #[error("DTD syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("element `{0}` is declared more than once")]
    DuplicateElementDecl(String),
    #[error("unsupported DTD construct at line {line}, column {column}: {what}")]
    Unsupported {
        line: usize,
        column: usize,
        what: String,
    },
    #[error("element `{0}` is referenced but never declared")]
    UndeclaredElement(String),
    #[error("root element `{0}` is not declared")]
    MissingRoot(String),
    #[error("DTD declares no elements, so it has no root")]
    NoElements,
    #[error("no edge from `{parent}` to `{child}` in the DTD graph")]
    NoSuchEdge { parent: String, child: String },
}

/// Occurrence marker attached to a content particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Occurrence {
    Once,
    Optional,
    ZeroOrMore,
    OneOrMore,
}

impl Occurrence {
    fn suffix(self) -> &'static str {
        match self {
            Occurrence::Once => "",
            Occurrence::Optional => "?",
            Occurrence::ZeroOrMore => "*",
            Occurrence::OneOrMore => "+",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Particle {
    Name(String),
    Seq(Vec<ContentParticle>),
    Choice(Vec<ContentParticle>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentParticle {
    pub particle: Particle,
    pub occurrence: Occurrence,
}

impl fmt::Display for ContentParticle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.particle {
            Particle::Name(n) => write!(f, "{n}")?,
            Particle::Seq(items) | Particle::Choice(items) => {
                let sep = if matches!(self.particle, Particle::Seq(_)) {
                    ", "
                } else {
                    " | "
                };
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")?;
            }
        }
        f.write_str(self.occurrence.suffix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentModel {
    Empty,
    /// `(#PCDATA)`: text only.
    PcData,
    /// `(#PCDATA | a | b)*`
    Mixed(Vec<String>),
    Children(ContentParticle),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementDecl {
    pub name: String,
    pub content: ContentModel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DefaultKind {
    Required,
    Implied,
    /// A literal default, including `#FIXED` ones.
    Default(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeDef {
    pub name: String,
    pub default: DefaultKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttListDecl {
    pub element: String,
    pub attributes: Vec<AttributeDef>,
}

/// Result of [`parse_dtd`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dtd {
    pub elements: Vec<ElementDecl>,
    pub attlists: Vec<AttListDecl>,
    /// Name given in a surrounding `<!DOCTYPE name [...]>`, if any.
    pub doctype: Option<String>,
    pub warnings: Vec<String>,
}

impl Dtd {
    /// Picks a root when the caller did not name one: the DOCTYPE name if
    /// present, else the first declared element that no content model
    /// references, else the first declared element.
    pub fn infer_root(&self) -> Option<&str> {
        if let Some(name) = &self.doctype {
            return Some(name);
        }
        let mut referenced = std::collections::HashSet::new();
        for decl in &self.elements {
            for (child, _) in child_cardinalities(&decl.content) {
                referenced.insert(child);
            }
        }
        self.elements
            .iter()
            .find(|d| !referenced.contains(d.name.as_str()))
            .or_else(|| self.elements.first())
            .map(|d| d.name.as_str())
    }

    pub fn graph(&self, root: &str) -> Result<DtdGraph, DtdError> {
        build_graph(&self.elements, &self.attlists, root)
    }
}

/// Parses DTD text into element and attribute-list declarations.
pub fn parse_dtd(text: &str) -> Result<Dtd, DtdError> {
    Parser::new(text).parse()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    dtd: Dtd,
}

const UNSUPPORTED_DECLS: &[(&str, &str)] = &[
    ("<!ENTITY", "entity declarations"),
    ("<!NOTATION", "notation declarations"),
    ("<![", "conditional sections"),
];

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            dtd: Dtd::default(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let before = &self.src[..pos];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn syntax(&self, message: impl Into<String>) -> DtdError {
        let (line, column) = self.line_col(self.pos);
        DtdError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn unsupported(&self, what: impl Into<String>) -> DtdError {
        let (line, column) = self.line_col(self.pos);
        DtdError::Unsupported {
            line,
            column,
            what: what.into(),
        }
    }

    fn skip_ws(&mut self) -> bool {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
        self.pos > start
    }

    fn require_ws(&mut self) -> Result<(), DtdError> {
        if self.skip_ws() {
            Ok(())
        } else {
            Err(self.syntax("expected whitespace"))
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), DtdError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{s}`")))
        }
    }

    /// Consumes a keyword only when it is not followed by more name characters.
    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.rest().starts_with(kw)
            && !self.rest()[kw.len()..]
                .chars()
                .next()
                .is_some_and(is_name_char)
        {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn skip_past(&mut self, terminator: &str, what: &str) -> Result<(), DtdError> {
        match self.rest().find(terminator) {
            Some(i) => {
                self.pos += i + terminator.len();
                Ok(())
            }
            None => Err(self.syntax(format!("unterminated {what}"))),
        }
    }

    fn name(&mut self) -> Result<String, DtdError> {
        let start = self.pos;
        match self.peek() {
            Some(c) if is_name_start(c) => {
                self.bump();
            }
            _ => return Err(self.syntax("expected a name")),
        }
        while matches!(self.peek(), Some(c) if is_name_char(c)) {
            self.bump();
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn parse(mut self) -> Result<Dtd, DtdError> {
        let mut in_doctype = false;
        loop {
            self.skip_ws();
            if self.pos >= self.src.len() {
                break;
            }
            if self.eat("<!--") {
                self.skip_past("-->", "comment")?;
            } else if self.eat("<?") {
                self.skip_past("?>", "processing instruction")?;
            } else if self.eat_keyword("<!ELEMENT") {
                self.element_decl()?;
            } else if self.eat_keyword("<!ATTLIST") {
                self.attlist_decl()?;
            } else if self.rest().starts_with("<!DOCTYPE") {
                if in_doctype || self.dtd.doctype.is_some() {
                    return Err(self.syntax("nested or repeated DOCTYPE"));
                }
                self.pos += "<!DOCTYPE".len();
                self.doctype_open()?;
                in_doctype = true;
            } else if in_doctype && self.eat("]") {
                self.skip_ws();
                self.expect(">")?;
                in_doctype = false;
            } else if self.peek() == Some('%') {
                return Err(self.unsupported("parameter entity references"));
            } else if let Some((_, what)) = UNSUPPORTED_DECLS
                .iter()
                .find(|(prefix, _)| self.rest().starts_with(prefix))
            {
                return Err(self.unsupported(*what));
            } else if self.rest().starts_with("<!") {
                let (line, column) = self.line_col(self.pos);
                self.pos += 2;
                let kind: String = self
                    .rest()
                    .chars()
                    .take_while(|c| is_name_char(*c))
                    .collect();
                self.skip_markup()?;
                let msg = format!(
                    "skipping unknown declaration <!{kind} at line {line}, column {column}"
                );
                warn!("{msg}");
                self.dtd.warnings.push(msg);
            } else {
                return Err(self.syntax("expected a markup declaration"));
            }
        }
        if in_doctype {
            return Err(self.syntax("unterminated DOCTYPE internal subset"));
        }
        Ok(self.dtd)
    }

    /// Skips to the `>` that closes the current declaration, honoring quotes.
    fn skip_markup(&mut self) -> Result<(), DtdError> {
        let mut quote = None;
        while let Some(c) = self.bump() {
            match (quote, c) {
                (None, '"' | '\'') => quote = Some(c),
                (Some(q), c) if c == q => quote = None,
                (None, '>') => return Ok(()),
                _ => {}
            }
        }
        Err(self.syntax("unterminated declaration"))
    }

    fn doctype_open(&mut self) -> Result<(), DtdError> {
        self.require_ws()?;
        let name = self.name()?;
        self.skip_ws();
        if self.rest().starts_with("SYSTEM") || self.rest().starts_with("PUBLIC") {
            return Err(self.unsupported("external DTD subsets"));
        }
        self.expect("[")?;
        self.dtd.doctype = Some(name);
        Ok(())
    }

    fn element_decl(&mut self) -> Result<(), DtdError> {
        self.require_ws()?;
        let name = self.name()?;
        self.require_ws()?;
        let content = if self.eat_keyword("EMPTY") {
            ContentModel::Empty
        } else if self.rest().starts_with("ANY") {
            return Err(self.unsupported("ANY content models"));
        } else if self.eat("(") {
            self.skip_ws();
            if self.eat("#PCDATA") {
                self.mixed()?
            } else {
                let group = self.group()?;
                ContentModel::Children(group)
            }
        } else {
            return Err(self.syntax("expected EMPTY, ANY or `(`"));
        };
        self.skip_ws();
        self.expect(">")?;
        if self.dtd.elements.iter().any(|d| d.name == name) {
            return Err(DtdError::DuplicateElementDecl(name));
        }
        self.dtd.elements.push(ElementDecl { name, content });
        Ok(())
    }

    fn mixed(&mut self) -> Result<ContentModel, DtdError> {
        let mut names: Vec<String> = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(")") {
                break;
            }
            self.expect("|")?;
            self.skip_ws();
            let n = self.name()?;
            if !names.contains(&n) {
                names.push(n);
            }
        }
        let star = self.eat("*");
        if names.is_empty() {
            Ok(ContentModel::PcData)
        } else if !star {
            Err(self.syntax("mixed content with element names must end in `)*`"))
        } else {
            Ok(ContentModel::Mixed(names))
        }
    }

    /// Parses a group whose opening `(` has been consumed.
    fn group(&mut self) -> Result<ContentParticle, DtdError> {
        let mut items = vec![self.particle()?];
        let mut separator: Option<char> = None;
        loop {
            self.skip_ws();
            match self.bump() {
                Some(')') => break,
                Some(c @ (',' | '|')) => {
                    if separator.is_some_and(|s| s != c) {
                        return Err(self.syntax("cannot mix `,` and `|` in one group"));
                    }
                    separator = Some(c);
                    self.skip_ws();
                    items.push(self.particle()?);
                }
                _ => return Err(self.syntax("expected `,`, `|` or `)`")),
            }
        }
        let particle = if separator == Some('|') {
            Particle::Choice(items)
        } else {
            Particle::Seq(items)
        };
        Ok(ContentParticle {
            particle,
            occurrence: self.occurrence(),
        })
    }

    fn particle(&mut self) -> Result<ContentParticle, DtdError> {
        if self.eat("(") {
            self.skip_ws();
            self.group()
        } else {
            let name = self.name()?;
            Ok(ContentParticle {
                particle: Particle::Name(name),
                occurrence: self.occurrence(),
            })
        }
    }

    fn occurrence(&mut self) -> Occurrence {
        match self.peek() {
            Some('?') => {
                self.pos += 1;
                Occurrence::Optional
            }
            Some('*') => {
                self.pos += 1;
                Occurrence::ZeroOrMore
            }
            Some('+') => {
                self.pos += 1;
                Occurrence::OneOrMore
            }
            _ => Occurrence::Once,
        }
    }

    fn attlist_decl(&mut self) -> Result<(), DtdError> {
        self.require_ws()?;
        let element = self.name()?;
        let mut attributes: Vec<AttributeDef> = Vec::new();
        loop {
            let had_ws = self.skip_ws();
            if self.eat(">") {
                break;
            }
            if !had_ws {
                return Err(self.syntax("expected whitespace before attribute definition"));
            }
            let name = self.name()?;
            self.require_ws()?;
            self.att_type()?;
            self.require_ws()?;
            let default = if self.eat_keyword("#REQUIRED") {
                DefaultKind::Required
            } else if self.eat_keyword("#IMPLIED") {
                DefaultKind::Implied
            } else {
                if self.eat_keyword("#FIXED") {
                    self.require_ws()?;
                }
                DefaultKind::Default(self.quoted()?)
            };
            if attributes.iter().any(|a| a.name == name) {
                let msg = format!("attribute `{name}` of `{element}` declared twice; first wins");
                warn!("{msg}");
                self.dtd.warnings.push(msg);
            } else {
                attributes.push(AttributeDef { name, default });
            }
        }
        self.dtd.attlists.push(AttListDecl {
            element,
            attributes,
        });
        Ok(())
    }

    fn att_type(&mut self) -> Result<(), DtdError> {
        if self.peek() == Some('(') {
            return self.enumeration();
        }
        let kw = self.name()?;
        match kw.as_str() {
            "CDATA" | "ID" | "IDREF" | "IDREFS" | "ENTITY" | "ENTITIES" | "NMTOKEN"
            | "NMTOKENS" => Ok(()),
            "NOTATION" => {
                self.require_ws()?;
                self.enumeration()
            }
            other => Err(self.syntax(format!("unknown attribute type `{other}`"))),
        }
    }

    fn enumeration(&mut self) -> Result<(), DtdError> {
        self.expect("(")?;
        loop {
            self.skip_ws();
            let start = self.pos;
            while matches!(self.peek(), Some(c) if is_name_char(c)) {
                self.bump();
            }
            if self.pos == start {
                return Err(self.syntax("expected an enumeration token"));
            }
            self.skip_ws();
            match self.bump() {
                Some(')') => return Ok(()),
                Some('|') => {}
                _ => return Err(self.syntax("expected `|` or `)` in enumeration")),
            }
        }
    }

    fn quoted(&mut self) -> Result<String, DtdError> {
        let q = match self.peek() {
            Some(c @ ('"' | '\'')) => c,
            _ => return Err(self.syntax("expected a quoted default value")),
        };
        self.pos += 1;
        let end = self
            .rest()
            .find(q)
            .ok_or_else(|| self.syntax("unterminated attribute default"))?;
        let raw = &self.rest()[..end];
        let value = quick_xml::escape::unescape(raw)
            .map_err(|e| self.syntax(format!("bad reference in default value: {e}")))?
            .into_owned();
        self.pos += end + 1;
        Ok(value)
    }
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == ':'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | ':' | '-' | '.' | '\u{B7}')
}

/// Child cardinality after flattening a content model to one label per child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cardinality {
    One,
    Optional,
    Many,
}

impl Cardinality {
    pub fn symbol(self) -> char {
        match self {
            Cardinality::One => '1',
            Cardinality::Optional => '?',
            Cardinality::Many => '*',
        }
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// One label per distinct child, in order of first appearance.
///
/// A child is `Many` if it sits under `*`/`+` anywhere on its path or occurs
/// more than once; `Optional` if under `?` or inside a choice; else `One`.
pub fn child_cardinalities(content: &ContentModel) -> Vec<(&str, Cardinality)> {
    #[derive(Default)]
    struct Acc {
        count: usize,
        many: bool,
        optional: bool,
    }
    fn walk<'a>(
        cp: &'a ContentParticle,
        many: bool,
        optional: bool,
        order: &mut Vec<&'a str>,
        acc: &mut HashMap<&'a str, Acc>,
    ) {
        let many = many
            || matches!(
                cp.occurrence,
                Occurrence::ZeroOrMore | Occurrence::OneOrMore
            );
        let optional = optional || cp.occurrence == Occurrence::Optional;
        match &cp.particle {
            Particle::Name(n) => {
                let entry = acc.entry(n.as_str()).or_insert_with(|| {
                    order.push(n.as_str());
                    Acc::default()
                });
                entry.count += 1;
                entry.many |= many;
                entry.optional |= optional;
            }
            Particle::Seq(items) => {
                for item in items {
                    walk(item, many, optional, order, acc);
                }
            }
            Particle::Choice(items) => {
                let in_choice = optional || items.len() > 1;
                for item in items {
                    walk(item, many, in_choice, order, acc);
                }
            }
        }
    }

    match content {
        ContentModel::Empty | ContentModel::PcData => Vec::new(),
        ContentModel::Mixed(names) => names
            .iter()
            .map(|n| (n.as_str(), Cardinality::Many))
            .collect(),
        ContentModel::Children(cp) => {
            let mut order = Vec::new();
            let mut acc = HashMap::new();
            walk(cp, false, false, &mut order, &mut acc);
            order
                .into_iter()
                .map(|n| {
                    let a = &acc[n];
                    let label = if a.many || a.count > 1 {
                        Cardinality::Many
                    } else if a.optional {
                        Cardinality::Optional
                    } else {
                        Cardinality::One
                    };
                    (n, label)
                })
                .collect()
        }
    }
}

/// Index of an element type in a [`DtdGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElemId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentKind {
    Empty,
    Text,
    Mixed,
    Elements,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub name: String,
    pub content: ContentKind,
    pub attributes: Vec<AttributeDef>,
    /// Indexes into [`DtdGraph::edges`] of outgoing edges, in content-model order.
    pub children: Vec<usize>,
    /// Indexes into [`DtdGraph::edges`] of incoming edges.
    pub parents: Vec<usize>,
}

impl GraphNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.content, ContentKind::Empty | ContentKind::Text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphEdge {
    pub parent: ElemId,
    pub child: ElemId,
    pub label: Cardinality,
    /// Parent and child share a strongly connected component.
    pub on_cycle: bool,
}

impl GraphEdge {
    /// Label used for storage decisions: edges inside a recursive cycle always
    /// count as `Many`.
    pub fn link_label(&self) -> Cardinality {
        if self.on_cycle {
            Cardinality::Many
        } else {
            self.label
        }
    }
}

/// Element types with cardinality-labelled parent → child edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtdGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    index: HashMap<String, ElemId>,
    edge_index: HashMap<(ElemId, ElemId), usize>,
    on_cycle: Vec<bool>,
    root: ElemId,
}

/// Builds the DTD graph rooted at `root`.
pub fn build_graph(
    decls: &[ElementDecl],
    attlists: &[AttListDecl],
    root: &str,
) -> Result<DtdGraph, DtdError> {
    let mut index = HashMap::with_capacity(decls.len());
    for (i, decl) in decls.iter().enumerate() {
        if index.insert(decl.name.clone(), ElemId(i)).is_some() {
            return Err(DtdError::DuplicateElementDecl(decl.name.clone()));
        }
    }
    let root = *index
        .get(root)
        .ok_or_else(|| DtdError::MissingRoot(root.to_string()))?;

    let mut nodes: Vec<GraphNode> = decls
        .iter()
        .map(|d| GraphNode {
            name: d.name.clone(),
            content: match &d.content {
                ContentModel::Empty => ContentKind::Empty,
                ContentModel::PcData => ContentKind::Text,
                ContentModel::Mixed(_) => ContentKind::Mixed,
                ContentModel::Children(_) => ContentKind::Elements,
            },
            attributes: Vec::new(),
            children: Vec::new(),
            parents: Vec::new(),
        })
        .collect();

    for list in attlists {
        let Some(&id) = index.get(&list.element) else {
            warn!("ATTLIST for undeclared element `{}` ignored", list.element);
            continue;
        };
        let attrs = &mut nodes[id.0].attributes;
        for def in &list.attributes {
            if attrs.iter().any(|a| a.name == def.name) {
                warn!(
                    "attribute `{}` of `{}` declared twice; first wins",
                    def.name, list.element
                );
            } else {
                attrs.push(def.clone());
            }
        }
    }

    let mut edges = Vec::new();
    let mut edge_index = HashMap::new();
    for (i, decl) in decls.iter().enumerate() {
        for (child, label) in child_cardinalities(&decl.content) {
            let child = *index
                .get(child)
                .ok_or_else(|| DtdError::UndeclaredElement(child.to_string()))?;
            let e = edges.len();
            edges.push(GraphEdge {
                parent: ElemId(i),
                child,
                label,
                on_cycle: false,
            });
            edge_index.insert((ElemId(i), child), e);
            nodes[i].children.push(e);
            nodes[child.0].parents.push(e);
        }
    }

    let scc = strongly_connected(&nodes, &edges);
    let mut on_cycle = vec![false; nodes.len()];
    for edge in &mut edges {
        if scc[edge.parent.0] == scc[edge.child.0] {
            edge.on_cycle = true;
            on_cycle[edge.parent.0] = true;
            on_cycle[edge.child.0] = true;
        }
    }

    Ok(DtdGraph {
        nodes,
        edges,
        index,
        edge_index,
        on_cycle,
        root,
    })
}

/// Tarjan's algorithm; returns a component id per node.
fn strongly_connected(nodes: &[GraphNode], edges: &[GraphEdge]) -> Vec<usize> {
    struct State<'a> {
        nodes: &'a [GraphNode],
        edges: &'a [GraphEdge],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        comp: Vec<usize>,
        comps: usize,
    }
    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for &e in &s.nodes[v].children {
            let w = s.edges[e].child.0;
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            while let Some(w) = s.stack.pop() {
                s.on_stack[w] = false;
                s.comp[w] = s.comps;
                if w == v {
                    break;
                }
            }
            s.comps += 1;
        }
    }
    let n = nodes.len();
    let mut s = State {
        nodes,
        edges,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        comp: vec![0; n],
        comps: 0,
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.comp
}

impl DtdGraph {
    pub fn root(&self) -> ElemId {
        self.root
    }

    pub fn root_name(&self) -> &str {
        &self.nodes[self.root.0].name
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<ElemId> {
        self.index.get(name).copied()
    }

    pub fn node(&self, id: ElemId) -> &GraphNode {
        &self.nodes[id.0]
    }

    pub fn name(&self, id: ElemId) -> &str {
        &self.nodes[id.0].name
    }

    pub fn ids(&self) -> impl Iterator<Item = ElemId> + '_ {
        (0..self.nodes.len()).map(ElemId)
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn edge(&self, parent: ElemId, child: ElemId) -> Option<&GraphEdge> {
        self.edge_index
            .get(&(parent, child))
            .map(|&e| &self.edges[e])
    }

    pub fn child_edges(&self, id: ElemId) -> impl Iterator<Item = &GraphEdge> + '_ {
        self.nodes[id.0].children.iter().map(|&e| &self.edges[e])
    }

    pub fn parent_edges(&self, id: ElemId) -> impl Iterator<Item = &GraphEdge> + '_ {
        self.nodes[id.0].parents.iter().map(|&e| &self.edges[e])
    }

    pub fn is_leaf(&self, id: ElemId) -> bool {
        self.nodes[id.0].is_leaf()
    }

    /// Node lies on a cycle (including a self-loop).
    pub fn on_cycle(&self, id: ElemId) -> bool {
        self.on_cycle[id.0]
    }

    /// Declared label of the edge `parent → child`; `Ok(None)` stands for the
    /// missing edge above the root (`parent == None`).
    pub fn edge_label(
        &self,
        parent: Option<&str>,
        child: &str,
    ) -> Result<Option<Cardinality>, DtdError> {
        self.label_by_name(parent, child, |e| e.label)
    }

    /// Like [`edge_label`](Self::edge_label) but with cycle edges reported as `Many`.
    pub fn link_label(
        &self,
        parent: Option<&str>,
        child: &str,
    ) -> Result<Option<Cardinality>, DtdError> {
        self.label_by_name(parent, child, GraphEdge::link_label)
    }

    fn label_by_name(
        &self,
        parent: Option<&str>,
        child: &str,
        f: impl Fn(&GraphEdge) -> Cardinality,
    ) -> Result<Option<Cardinality>, DtdError> {
        let no_edge = || DtdError::NoSuchEdge {
            parent: parent.unwrap_or("NULL").to_string(),
            child: child.to_string(),
        };
        let c = self.lookup(child).ok_or_else(no_edge)?;
        match parent {
            None if c == self.root => Ok(None),
            None => Err(no_edge()),
            Some(p) => {
                let p = self.lookup(p).ok_or_else(no_edge)?;
                self.edge(p, c).map(|e| Some(f(e))).ok_or_else(no_edge)
            }
        }
    }
}
