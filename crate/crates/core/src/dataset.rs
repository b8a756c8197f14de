//! Triple files, vocabularies, relation groups and the filtered-ranking index.
//!
//! Input files are UTF-8 text with one `head<TAB>relation<TAB>tail` triple
//! per line and no header, the layout WN18RR and FB15k-237 ship in.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// A raw triple as it appears in a split file.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NamedTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

/// Integer-encoded triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// Reads one split. Blank lines are skipped; every other line must have
/// exactly three tab-separated fields.
pub fn load_split(path: impl AsRef<Path>) -> Result<Vec<NamedTriple>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: format!(
                    "expected 3 non-empty tab-separated fields, found {}",
                    fields.len()
                ),
            });
        }
        out.push(NamedTriple {
            head: fields[0].to_owned(),
            relation: fields[1].to_owned(),
            tail: fields[2].to_owned(),
        });
    }
    Ok(out)
}

/// Dense, insertion-ordered name ↔ id map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    pub entities: Interner,
    pub relations: Interner,
}

impl Vocab {
    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleStore {
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl TripleStore {
    pub fn all(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

/// Vocabulary plus the three encoded splits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub vocab: Vocab,
    pub store: TripleStore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Dataset {
    pub fn load(
        train: impl AsRef<Path>,
        valid: impl AsRef<Path>,
        test: impl AsRef<Path>,
    ) -> Result<Self> {
        Ok(Self::from_named(
            &load_split(train)?,
            &load_split(valid)?,
            &load_split(test)?,
        ))
    }

    /// Ids are handed out in first-occurrence order over train, then valid,
    /// then test.
    pub fn from_named(train: &[NamedTriple], valid: &[NamedTriple], test: &[NamedTriple]) -> Self {
        let mut vocab = Vocab::default();
        let mut encode = |split: &[NamedTriple]| -> Vec<Triple> {
            split
                .iter()
                .map(|t| {
                    let head = vocab.entities.intern(&t.head);
                    let relation = vocab.relations.intern(&t.relation);
                    let tail = vocab.entities.intern(&t.tail);
                    Triple::new(head, relation, tail)
                })
                .collect()
        };
        let train = encode(train);
        let valid = encode(valid);
        let test = encode(test);
        Self {
            vocab,
            store: TripleStore { train, valid, test },
        }
    }

    /// Builds a dataset straight from integer triples; the vocabulary uses
    /// the decimal ids as names and spans `0..n_entities`, `0..n_relations`.
    pub fn from_ids(n_entities: usize, n_relations: usize, store: TripleStore) -> Result<Self> {
        for t in store.all() {
            if t.head >= n_entities || t.tail >= n_entities {
                return Err(Error::Index {
                    index: t.head.max(t.tail),
                    limit: n_entities,
                });
            }
            if t.relation >= n_relations {
                return Err(Error::Index {
                    index: t.relation,
                    limit: n_relations,
                });
            }
        }
        let mut vocab = Vocab::default();
        for e in 0..n_entities {
            vocab.entities.intern(&e.to_string());
        }
        for r in 0..n_relations {
            vocab.relations.intern(&r.to_string());
        }
        Ok(Self { vocab, store })
    }

    pub fn n_entities(&self) -> usize {
        self.vocab.n_entities()
    }

    pub fn n_relations(&self) -> usize {
        self.vocab.n_relations()
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            entities: self.n_entities(),
            relations: self.n_relations(),
            train: self.store.train.len(),
            valid: self.store.valid.len(),
            test: self.store.test.len(),
        }
    }
}

/// All training tuples sharing one relation, in their original order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationGroup {
    pub relation: usize,
    pub heads: Vec<usize>,
    pub tails: Vec<usize>,
}

impl RelationGroup {
    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }
}

/// Partitions triples by relation. One group per relation that occurs,
/// sorted by relation id; duplicates are kept.
pub fn group_by_relation(triples: &[Triple]) -> Vec<RelationGroup> {
    let mut by_rel: Vec<Option<RelationGroup>> = Vec::new();
    for t in triples {
        if t.relation >= by_rel.len() {
            by_rel.resize_with(t.relation + 1, || None);
        }
        let g = by_rel[t.relation].get_or_insert_with(|| RelationGroup {
            relation: t.relation,
            heads: Vec::new(),
            tails: Vec::new(),
        });
        g.heads.push(t.head);
        g.tails.push(t.tail);
    }
    by_rel.into_iter().flatten().collect()
}

/// Relation groups of the training split.
pub fn build_groups(store: &TripleStore) -> Vec<RelationGroup> {
    group_by_relation(&store.train)
}

/// Known-true answers over train ∪ valid ∪ test, for filtered ranking.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterIndex {
    tails: HashMap<(usize, usize), HashSet<usize>>,
    heads: HashMap<(usize, usize), HashSet<usize>>,
}

impl FilterIndex {
    /// An index with no known triples (raw, unfiltered ranking).
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut idx = Self::default();
        for t in triples {
            idx.insert(*t);
        }
        idx
    }

    pub fn insert(&mut self, t: Triple) {
        self.tails
            .entry((t.head, t.relation))
            .or_default()
            .insert(t.tail);
        self.heads
            .entry((t.relation, t.tail))
            .or_default()
            .insert(t.head);
    }

    /// True tails for `(head, relation)`.
    pub fn tails(&self, head: usize, relation: usize) -> Option<&HashSet<usize>> {
        self.tails.get(&(head, relation))
    }

    /// True heads for `(relation, tail)`.
    pub fn heads(&self, relation: usize, tail: usize) -> Option<&HashSet<usize>> {
        self.heads.get(&(relation, tail))
    }

    pub fn tail_keys(&self) -> usize {
        self.tails.len()
    }

    pub fn head_keys(&self) -> usize {
        self.heads.len()
    }
}

pub fn build_filter(store: &TripleStore) -> FilterIndex {
    FilterIndex::from_triples(store.all())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_a_line() {
        let f = write("a\tr\tb\n");
        let t = load_split(f.path()).unwrap();
        assert_eq!(
            t,
            vec![NamedTriple {
                head: "a".into(),
                relation: "r".into(),
                tail: "b".into()
            }]
        );
    }

    #[test]
    fn keeps_order_and_duplicates_and_skips_blank_lines() {
        let f = write("a\tr\tb\n\nc\tr\td\r\na\tr\tb\n");
        let t = load_split(f.path()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[1].head, "c");
        assert_eq!(t[1].tail, "d");
        assert_eq!(t[0], t[2]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = write("a\tr\tb\nbroken line\n");
        match load_split(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = write("a\tr\tb\tc\n");
        assert!(matches!(
            load_split(f.path()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_split("/definitely/not/here.txt"),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn ids_follow_first_occurrence_over_train_valid_test() {
        let nt = |h: &str, r: &str, t: &str| NamedTriple {
            head: h.into(),
            relation: r.into(),
            tail: t.into(),
        };
        let ds = Dataset::from_named(
            &[nt("x", "p", "y")],
            &[nt("z", "q", "x")],
            &[nt("w", "p", "w")],
        );
        assert_eq!(ds.vocab.entities.names(), &["x", "y", "z", "w"]);
        assert_eq!(ds.vocab.relations.names(), &["p", "q"]);
        assert_eq!(ds.store.valid, vec![Triple::new(2, 1, 0)]);
        assert_eq!(ds.store.test, vec![Triple::new(3, 0, 3)]);
        let s = ds.stats();
        assert_eq!(
            (s.entities, s.relations, s.train, s.valid, s.test),
            (4, 2, 1, 1, 1)
        );
    }

    #[test]
    fn groups_hand_example() {
        let store = TripleStore {
            train: vec![
                Triple::new(0, 0, 1),
                Triple::new(2, 0, 3),
                Triple::new(0, 1, 2),
            ],
            ..Default::default()
        };
        let g = build_groups(&store);
        assert_eq!(g.len(), 2);
        assert_eq!(
            (g[0].relation, &g[0].heads[..], &g[0].tails[..]),
            (0, &[0, 2][..], &[1, 3][..])
        );
        assert_eq!(
            (g[1].relation, &g[1].heads[..], &g[1].tails[..]),
            (1, &[0][..], &[2][..])
        );
    }

    #[test]
    fn filter_hand_example() {
        let store = TripleStore {
            train: vec![Triple::new(0, 0, 1)],
            test: vec![Triple::new(0, 0, 2)],
            ..Default::default()
        };
        let f = build_filter(&store);
        let tails = f.tails(0, 0).unwrap();
        assert_eq!(tails.len(), 2);
        assert!(tails.contains(&1) && tails.contains(&2));
        assert!(f.heads(0, 2).unwrap().contains(&0));
        assert!(f.tails(1, 0).is_none());
    }

    #[test]
    fn from_ids_checks_bounds() {
        let store = TripleStore {
            train: vec![Triple::new(0, 0, 5)],
            ..Default::default()
        };
        assert!(Dataset::from_ids(5, 1, store).is_err());
    }
}
