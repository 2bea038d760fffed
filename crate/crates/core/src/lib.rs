//! Maps a DTD to a relational schema by inlining single-occurrence children
//! into their parent's table, then shreds conforming XML documents into
//! tuples in one linear breadth-first pass, writing CSV files or SQL scripts.
//!
//! Pipeline: [`dtd::parse_dtd`] → [`dtd::build_graph`] →
//! [`schema::map_schema`] → [`dom::load_document`] → [`engine::xinsert`]
//! into an [`emit`] sink.

pub mod bench;
pub mod dom;
pub mod dtd;
pub mod emit;
pub mod engine;
pub mod generate;
pub mod schema;
