//! Randomized checks over generated DTDs and documents.

mod common;

use common::*;
use proptest::prelude::*;
use xshred::dtd::{parse_dtd, DtdGraph};
use xshred::engine::check_lemmas;
use xshred::generate::generate_document;
use xshred::schema::{emit_ddl, map_schema, Strategy as Mapping};

#[derive(Debug, Clone)]
enum Kind {
    Text,
    Empty,
    Children {
        items: Vec<(usize, &'static str)>,
        choice: bool,
        outer: &'static str,
    },
}

fn kind(n: usize) -> impl Strategy<Value = Kind> {
    let occ = prop::sample::select(vec!["", "?", "*", "+"]);
    let items = prop::collection::vec((0..n, occ.clone()), 1..4);
    prop_oneof![
        3 => Just(Kind::Text),
        1 => Just(Kind::Empty),
        5 => (items, any::<bool>(), occ).prop_map(|(items, choice, outer)| Kind::Children { items, choice, outer }),
    ]
}

fn render(kinds: &[Kind], attrs: &[Vec<u8>]) -> String {
    let mut out = String::new();
    for (i, k) in kinds.iter().enumerate() {
        let content = match k {
            Kind::Text => "(#PCDATA)".to_string(),
            Kind::Empty => "EMPTY".to_string(),
            Kind::Children {
                items,
                choice,
                outer,
            } => {
                let sep = if *choice { " | " } else { ", " };
                let body: Vec<String> = items.iter().map(|(c, o)| format!("e{c}{o}")).collect();
                format!("({}){outer}", body.join(sep))
            }
        };
        out.push_str(&format!("<!ELEMENT e{i} {content}>\n"));
        if !attrs[i].is_empty() {
            out.push_str(&format!("<!ATTLIST e{i}"));
            for (j, d) in attrs[i].iter().enumerate() {
                let default = match d % 3 {
                    0 => "#REQUIRED",
                    1 => "#IMPLIED",
                    _ => "\"dflt\"",
                };
                out.push_str(&format!(" a{j} CDATA {default}"));
            }
            out.push_str(">\n");
        }
    }
    out
}

fn random_dtd() -> impl Strategy<Value = String> {
    (2usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(kind(n), n),
            prop::collection::vec(prop::collection::vec(any::<u8>(), 0..3), n),
        )
            .prop_map(|(kinds, attrs)| render(&kinds, &attrs))
    })
}

/// Some random DTDs admit no document of the requested size; those cases are skipped.
fn doc_for(g: &DtdGraph, size: usize, seed: u64) -> Option<String> {
    generate_document(g, size, seed).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn shredding_invariants(dtd in random_dtd(), size in 512usize..16_384, seed in any::<u64>()) {
        let g = parse_dtd(&dtd).unwrap().graph("e0").unwrap();
        let xml = doc_for(&g, size, seed);
        prop_assume!(xml.is_some());
        let xml = xml.unwrap();
        let expected_values = xml_values(&g, &xml);
        for strategy in [Mapping::DtdMap, Mapping::Shared] {
            let s = map_schema(&g, strategy).unwrap();
            let run = shred(&g, &s, &xml);

            let check = check_lemmas(&run.tree, &g, &s, &run.stats);
            prop_assert!(check.holds(), "{check:?}\n{dtd}");

            prop_assert_eq!(tuple_values(&s, &run.sink), expected_values.clone(), "{}", dtd);

            let from_output = linkage_from_output(&s, &run.sink);
            let from_tree = linkage_from_tree(&g, &s, &run.tree);
            prop_assert_eq!(from_output, from_tree, "{}", dtd);

            let links = match strategy {
                Mapping::DtdMap => run.stats.edge_rows,
                Mapping::Shared => run.stats.parent_links,
            };
            let cyclic_optional = g.edges().iter().any(|e| e.on_cycle && e.label != xshred::dtd::Cardinality::Many);
            if !cyclic_optional {
                prop_assert_eq!(links, star_instances(&g, &run.tree));
            }

            let again = shred(&g, &s, &xml);
            prop_assert_eq!(&again.sink.tuples, &run.sink.tuples);
            prop_assert_eq!(&again.sink.edges, &run.sink.edges);
        }
    }

    #[test]
    fn schema_is_stable_and_well_formed(dtd in random_dtd()) {
        let g = parse_dtd(&dtd).unwrap().graph("e0").unwrap();
        for strategy in [Mapping::DtdMap, Mapping::Shared] {
            let s = map_schema(&g, strategy).unwrap();
            prop_assert_eq!(emit_ddl(&s), emit_ddl(&map_schema(&g, strategy).unwrap()));
            let mut names: Vec<String> = s.tables().iter().map(|t| t.name.to_ascii_lowercase()).collect();
            let total = names.len();
            names.sort();
            names.dedup();
            prop_assert_eq!(names.len(), total);
            for t in s.tables() {
                prop_assert_eq!(t.columns[0].name.as_str(), if t.name == "Edge" { "parentID" } else { "ID" });
                let mut cols: Vec<String> = t.column_names().map(str::to_ascii_lowercase).collect();
                let n = cols.len();
                cols.sort();
                cols.dedup();
                prop_assert_eq!(cols.len(), n, "duplicate column in {}", t.name);
            }
            for id in g.ids() {
                let table = &s.tables()[s.plan(id).table];
                prop_assert!(table.hosts.iter().any(|h| h == g.name(id)));
            }
        }
    }

    #[test]
    fn generator_respects_size_and_seed(size in 2048usize..200_000, seed in any::<u64>()) {
        for (_, g) in corpus() {
            let a = generate_document(&g, size, seed).unwrap();
            prop_assert!((a.len() as f64 - size as f64).abs() <= size as f64 * 0.1);
            prop_assert_eq!(&a, &generate_document(&g, size, seed).unwrap());
        }
    }
}
