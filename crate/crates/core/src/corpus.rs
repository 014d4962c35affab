//! Corpus ingestion, sentence splitting and the three corpus views
//! (comments, sentences, generations).

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomposer::Decomposition;
use crate::error::{Error, Result};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    FdaComment,
    Tweet,
    StsItem,
    #[default]
    #[serde(other)]
    Other,
}

/// An utterance: a public comment, a tweet, or one side of an STS pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub source: Source,
    pub meta: BTreeMap<String, String>,
}

impl Document {
    /// Builds a document, normalizing the text. Fails if the text is blank.
    pub fn new(doc_id: impl Into<String>, text: &str, source: Source) -> Result<Self> {
        let text = normalize(text);
        if text.is_empty() {
            return Err(Error::invalid("document text is empty"));
        }
        Ok(Self {
            doc_id: doc_id.into(),
            text,
            source,
            meta: BTreeMap::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceUnit {
    pub parent_id: String,
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Comments,
    Sentences,
    Generations,
}

impl ViewKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::Comments => "comments",
            ViewKind::Sentences => "sentences",
            ViewKind::Generations => "generations",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewItem {
    #[serde(rename = "id")]
    pub item_id: String,
    pub text: String,
    pub parent_id: String,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusView {
    pub kind: ViewKind,
    pub items: Vec<ViewItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON object per line: `{"id", "text", "source"?, "meta"?}`.
    Jsonl,
    /// `id<TAB>text` per line, no header.
    Tsv,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    text: Option<String>,
    #[serde(default)]
    source: Source,
    #[serde(default)]
    meta: BTreeMap<String, String>,
}

/// Loads documents in file order. Blank lines are skipped.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc = match format {
            CorpusFormat::Jsonl => parse_jsonl_record(&line, line_no)?,
            CorpusFormat::Tsv => parse_tsv_record(&line, line_no)?,
        };
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateId(doc.doc_id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn parse_jsonl_record(line: &str, line_no: usize) -> Result<Document> {
    let malformed = |reason: String| Error::MalformedRecord {
        line: line_no,
        reason,
    };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let id = raw.id.ok_or_else(|| malformed("missing \"id\"".into()))?;
    let text = raw.text.ok_or_else(|| malformed("missing \"text\"".into()))?;
    let mut doc =
        Document::new(id, &text, raw.source).map_err(|_| malformed("empty \"text\"".into()))?;
    doc.meta = raw.meta;
    Ok(doc)
}

fn parse_tsv_record(line: &str, line_no: usize) -> Result<Document> {
    let (id, text) = line.split_once('\t').ok_or(Error::MalformedRecord {
        line: line_no,
        reason: "expected id<TAB>text".into(),
    })?;
    Document::new(id.trim(), text, Source::Other).map_err(|_| Error::MalformedRecord {
        line: line_no,
        reason: "empty text".into(),
    })
}

const ABBREVIATIONS: &[&str] = &[
    "u.s.", "u.k.", "d.c.", "e.g.", "i.e.", "dr.", "mr.", "mrs.", "ms.", "prof.", "sen.", "rep.",
    "gov.", "gen.", "st.", "jr.", "sr.", "vs.", "no.",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

fn suppresses_split(word: &str) -> bool {
    let lower = word
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // Single-letter initials such as "J." in "J. Cole".
    let mut chars = lower.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
}

/// Rule-based splitter: a boundary follows a run of `.`/`!`/`?` (plus closing
/// quotes or brackets) when the next non-space character is uppercase or the
/// text ends. Known abbreviations and single-letter initials do not split.
pub fn split_sentences(doc: &Document) -> Vec<SentenceUnit> {
    split_text(&doc.text)
        .into_iter()
        .enumerate()
        .map(|(index, text)| SentenceUnit {
            parent_id: doc.doc_id.clone(),
            index,
            text,
        })
        .collect()
}

pub(crate) fn split_text(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut units = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if !is_terminal(chars[i].1) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let boundary = if k == chars.len() {
            true
        } else if k > j && chars[k].1.is_uppercase() {
            let word_start = text[..end]
                .rfind(char::is_whitespace)
                .map_or(0, |p| p + 1)
                .max(start);
            !suppresses_split(&text[word_start..end])
        } else {
            false
        };
        if boundary {
            let unit = text[start..end].trim();
            if !unit.is_empty() {
                units.push(unit.to_string());
            }
            start = chars.get(k).map_or(text.len(), |&(b, _)| b);
        }
        i = j.max(i + 1);
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        units.push(tail.to_string());
    }
    units
}

impl CorpusView {
    pub fn comments(docs: &[Document]) -> Self {
        let items = docs
            .iter()
            .map(|d| ViewItem {
                item_id: d.doc_id.clone(),
                text: d.text.clone(),
                parent_id: d.doc_id.clone(),
                source: d.source,
                meta: d.meta.clone(),
            })
            .collect();
        Self {
            kind: ViewKind::Comments,
            items,
        }
    }

    pub fn sentences(docs: &[Document]) -> Self {
        let mut items = Vec::new();
        for doc in docs {
            for unit in split_sentences(doc) {
                items.push(ViewItem {
                    item_id: format!("{}#s{}", doc.doc_id, unit.index),
                    text: unit.text,
                    parent_id: doc.doc_id.clone(),
                    source: doc.source,
                    meta: doc.meta.clone(),
                });
            }
        }
        Self {
            kind: ViewKind::Sentences,
            items,
        }
    }

    /// One item per generation, in decomposition order. Sources and metadata
    /// are inherited from `docs` when the parent is present there.
    pub fn generations(docs: &[Document], decompositions: &[Decomposition]) -> Self {
        let by_id: BTreeMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
        let mut items = Vec::new();
        for dec in decompositions {
            let parent = by_id.get(dec.parent_id.as_str());
            for (g, text) in dec.generations.iter().enumerate() {
                items.push(ViewItem {
                    item_id: format!("{}#g{}", dec.parent_id, g),
                    text: text.clone(),
                    parent_id: dec.parent_id.clone(),
                    source: parent.map_or(Source::Other, |d| d.source),
                    meta: parent.map(|d| d.meta.clone()).unwrap_or_default(),
                });
            }
        }
        Self {
            kind: ViewKind::Generations,
            items,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.items.iter().map(|i| i.text.clone()).collect()
    }

    /// Uniform sample of `n` items without replacement, kept in view order.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<CorpusView> {
        if n == 0 {
            return Err(Error::invalid("subsample size must be positive"));
        }
        if n > self.items.len() {
            return Err(Error::invalid(format!(
                "cannot sample {n} items from a view of {}",
                self.items.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, self.items.len(), n).into_vec();
        idx.sort_unstable();
        Ok(CorpusView {
            kind: self.kind,
            items: idx.into_iter().map(|i| self.items[i].clone()).collect(),
        })
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for item in &self.items {
            let line = serde_json::to_string(item)?;
            writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
        }
        file.flush().map_err(|e| Error::io(path, e))
    }
}

/// Free-function form of [`CorpusView::subsample`].
pub fn subsample(view: &CorpusView, n: usize, seed: u64) -> Result<CorpusView> {
    view.subsample(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn doc(text: &str) -> Document {
        Document::new("d", text, Source::Other).unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_in_file_order() {
        let f = write_tmp(
            "{\"id\":\"a\",\"text\":\"one\"}\n{\"id\":\"b\",\"text\":\"two\",\"source\":\"tweet\"}\n{\"id\":\"c\",\"text\":\"  three   words \"}\n",
        );
        let docs = load_corpus(f.path(), CorpusFormat::Jsonl).unwrap();
        let ids: Vec<_> = docs.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(docs[1].source, Source::Tweet);
        assert_eq!(docs[2].text, "three words");
    }

    #[test]
    fn duplicate_id_is_named() {
        let f = write_tmp("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
        match load_corpus(f.path(), CorpusFormat::Jsonl) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_text_names_line() {
        let f = write_tmp("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\"}\n");
        match load_corpus(f.path(), CorpusFormat::Jsonl) {
            Err(Error::MalformedRecord { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("text"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tsv_format() {
        let f = write_tmp("x\tHello there\ny\tBye\n");
        let docs = load_corpus(f.path(), CorpusFormat::Tsv).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].text, "Hello there");
    }

    #[test]
    fn split_examples() {
        let units = split_sentences(&doc("Vaccines are new. They worry me."));
        assert_eq!(units.len(), 2);
        assert_eq!(units[1].text, "They worry me.");

        let units = split_sentences(&doc("No punctuation here"));
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].text, "No punctuation here");

        let units = split_sentences(&doc("Kids recover! Why mandate? See data."));
        let texts: Vec<_> = units.iter().map(|u| u.text.as_str()).collect();
        assert_eq!(texts, ["Kids recover!", "Why mandate?", "See data."]);
    }

    #[test]
    fn abbreviations_and_lowercase_do_not_split() {
        let texts = split_text("The U.S. Senate met with Dr. Smith today. it was fine. Then J. Cole left.");
        assert_eq!(
            texts,
            ["The U.S. Senate met with Dr. Smith today. it was fine.", "Then J. Cole left."]
        );
    }

    #[test]
    fn closing_quotes_stay_with_sentence() {
        let texts = split_text("He said \"stop.\" Then left?! Really.");
        assert_eq!(texts, ["He said \"stop.\"", "Then left?!", "Really."]);
    }

    #[test]
    fn subsample_contract() {
        let docs: Vec<_> = (0..10_000)
            .map(|i| Document::new(format!("d{i}"), "text", Source::Other).unwrap())
            .collect();
        let view = CorpusView::comments(&docs);
        let a = view.subsample(100, 1).unwrap();
        let b = view.subsample(100, 1).unwrap();
        let c = view.subsample(100, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        let ids = |v: &CorpusView| v.items.iter().map(|i| i.item_id.clone()).collect::<HashSet<_>>();
        assert_ne!(ids(&a), ids(&c));

        let full = view.subsample(view.len(), 9).unwrap();
        assert_eq!(ids(&full), ids(&view));
        assert!(view.subsample(10_001, 1).is_err());
    }

    #[test]
    fn derived_views_leave_comments_untouched() {
        let docs = vec![
            Document::new("a", "One. Two.", Source::FdaComment).unwrap(),
            Document::new("b", "Three", Source::FdaComment).unwrap(),
        ];
        let comments = CorpusView::comments(&docs);
        let before = comments.clone();
        let sentences = CorpusView::sentences(&docs);
        let decs = vec![Decomposition {
            parent_id: "a".into(),
            generations: vec!["G.".into()],
            request_fingerprint: "f".into(),
        }];
        let gens = CorpusView::generations(&docs, &decs);
        assert_eq!(comments, before);
        assert_eq!(sentences.len(), 3);
        assert_eq!(gens.items[0].item_id, "a#g0");
        assert!(comments.items.iter().all(|i| i.item_id == i.parent_id));
    }

    proptest! {
        #[test]
        fn splitting_is_a_partition(words in proptest::collection::vec("[A-Za-z]{1,6}[.!?]?", 1..30)) {
            let text = words.join(" ");
            let d = doc(&text);
            let units = split_sentences(&d);
            prop_assert!(units.iter().all(|u| !u.text.is_empty()));
            let joined = units.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(crate::text::collapse_whitespace(&joined), crate::text::collapse_whitespace(&d.text));
            prop_assert_eq!(split_sentences(&d), units);
        }

        #[test]
        fn subsample_is_subset(n in 1usize..50, seed in any::<u64>()) {
            let docs: Vec<_> = (0..50).map(|i| Document::new(format!("d{i}"), "t", Source::Other).unwrap()).collect();
            let view = CorpusView::comments(&docs);
            let s = view.subsample(n, seed).unwrap();
            prop_assert_eq!(s.len(), n);
            prop_assert!(s.items.iter().all(|i| view.items.contains(i)));
        }
    }
}
