//! Retrieval of corroborating passages for a predicted link.
//!
//! Documents are tokenized into lowercase alphanumeric runs and scored with
//! length-normalized tf–idf over the tokens of both entity names. A document
//! mentions an entity when it contains every token of that entity's name;
//! documents mentioning both entities are placed in a strictly higher tier
//! than documents mentioning one.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tokens kept on each side of the anchor token in a snippet.
pub const SNIPPET_RADIUS: usize = 15;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub body: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("document `{0}` has no indexable text")]
    EmptyDocument(String),
    #[error("index holds no documents")]
    EmptyIndex,
    #[error("entity name `{0}` has no searchable tokens")]
    EmptyName(String),
}

/// A token and its byte span in the source text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(Token {
                    text: text[s..i].to_lowercase(),
                    start: s,
                    end: i,
                });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: text[s..].to_lowercase(),
            start: s,
            end: text.len(),
        });
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: usize,
    pub tf: u32,
}

/// Inverted index over document bodies. Documents are held in `doc_id` order
/// and postings are sorted by document position.
#[derive(Clone, Debug, Default)]
pub struct CorpusIndex {
    docs: Vec<Document>,
    doc_lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
}

pub fn index_corpus(docs: impl IntoIterator<Item = Document>) -> Result<CorpusIndex, VerifyError> {
    let mut docs: Vec<Document> = docs.into_iter().collect();
    if docs.is_empty() {
        return Err(VerifyError::EmptyCorpus);
    }
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    for pair in docs.windows(2) {
        if pair[0].doc_id == pair[1].doc_id {
            return Err(VerifyError::DuplicateDocId(pair[0].doc_id.clone()));
        }
    }
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let tokens = tokenize(&doc.body);
        if tokens.is_empty() {
            return Err(VerifyError::EmptyDocument(doc.doc_id.clone()));
        }
        doc_lengths.push(tokens.len() as u32);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t.text).or_default() += 1;
        }
        for (term, tf) in counts {
            postings.entry(term).or_default().push(Posting { doc: d, tf });
        }
    }
    Ok(CorpusIndex {
        docs,
        doc_lengths,
        postings,
    })
}

impl CorpusIndex {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn doc_length(&self, doc: usize) -> u32 {
        self.doc_lengths[doc]
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn term_frequency(&self, term: &str, doc: usize) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&doc, |p| p.doc)
            .map(|i| list[i].tf)
            .unwrap_or(0)
    }

    /// `ln(1 + N / df)`; zero for unseen terms.
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.postings(term).len();
        if df == 0 {
            return 0.0;
        }
        (1.0 + self.docs.len() as f64 / df as f64).ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mentions {
    pub u_found: bool,
    pub v_found: bool,
}

impl Mentions {
    pub fn both(&self) -> bool {
        self.u_found && self.v_found
    }

    pub fn any(&self) -> bool {
        self.u_found || self.v_found
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub doc_id: String,
    pub title: String,
    pub snippet: String,
    /// Byte range of `snippet` within the document body.
    pub snippet_range: (usize, usize),
    pub score: f64,
    pub mentions: Mentions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictHint {
    BothMentioned,
    OneMentioned,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub link: (String, String),
    pub passages: Vec<Passage>,
    pub verdict_hint: VerdictHint,
}

fn name_terms(name: &str) -> Result<BTreeSet<String>, VerifyError> {
    let terms: BTreeSet<String> = tokenize(name).into_iter().map(|t| t.text).collect();
    if terms.is_empty() {
        return Err(VerifyError::EmptyName(name.to_string()));
    }
    Ok(terms)
}

/// Find passages that mention the two named entities.
pub fn verify_link(
    index: &CorpusIndex,
    name_u: &str,
    name_v: &str,
    top_k: usize,
) -> Result<VerificationResult, VerifyError> {
    if index.doc_count() == 0 {
        return Err(VerifyError::EmptyIndex);
    }
    let terms_u = name_terms(name_u)?;
    let terms_v = name_terms(name_v)?;
    let query: BTreeSet<&String> = terms_u.iter().chain(&terms_v).collect();
    let tier_bonus = 1.0 + query.iter().map(|t| index.idf(t)).sum::<f64>();

    let mut candidates: BTreeSet<usize> = BTreeSet::new();
    for t in &query {
        candidates.extend(index.postings(t).iter().map(|p| p.doc));
    }
    let mut hits: Vec<(f64, usize, Mentions)> = Vec::new();
    for d in candidates {
        let mentions = Mentions {
            u_found: terms_u.iter().all(|t| index.term_frequency(t, d) > 0),
            v_found: terms_v.iter().all(|t| index.term_frequency(t, d) > 0),
        };
        if !mentions.any() {
            continue;
        }
        let len = f64::from(index.doc_length(d));
        let base: f64 = query
            .iter()
            .map(|t| f64::from(index.term_frequency(t, d)) / len * index.idf(t))
            .sum();
        let tier = if mentions.both() { 2.0 } else { 1.0 };
        hits.push((tier * tier_bonus + base, d, mentions));
    }
    hits.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.cmp(&b.1))
    });
    hits.truncate(top_k);

    let verdict_hint = if hits.iter().any(|h| h.2.both()) {
        VerdictHint::BothMentioned
    } else if hits.is_empty() {
        VerdictHint::None
    } else {
        VerdictHint::OneMentioned
    };
    let passages = hits
        .into_iter()
        .map(|(score, d, mentions)| {
            let doc = &index.docs[d];
            let (start, end) = snippet_range(&doc.body, &terms_u, &terms_v);
            Passage {
                doc_id: doc.doc_id.clone(),
                title: doc.title.clone(),
                snippet: doc.body[start..end].to_string(),
                snippet_range: (start, end),
                score,
                mentions,
            }
        })
        .collect();
    Ok(VerificationResult {
        link: (name_u.to_string(), name_v.to_string()),
        passages,
        verdict_hint,
    })
}

/// Byte range of a window of `2·SNIPPET_RADIUS + 1` tokens centred on the
/// first name token whose window also holds a token of the other name, or on
/// the first name token when no such window exists.
pub fn snippet_range(
    body: &str,
    terms_u: &BTreeSet<String>,
    terms_v: &BTreeSet<String>,
) -> (usize, usize) {
    let tokens = tokenize(body);
    if tokens.is_empty() {
        return (0, 0);
    }
    let is_u: Vec<bool> = tokens.iter().map(|t| terms_u.contains(&t.text)).collect();
    let is_v: Vec<bool> = tokens.iter().map(|t| terms_v.contains(&t.text)).collect();
    let window = |i: usize| {
        (
            i.saturating_sub(SNIPPET_RADIUS),
            (i + SNIPPET_RADIUS).min(tokens.len() - 1),
        )
    };
    let mentions: Vec<usize> = (0..tokens.len()).filter(|&i| is_u[i] || is_v[i]).collect();
    let center = mentions
        .iter()
        .copied()
        .find(|&i| {
            let (lo, hi) = window(i);
            is_u[lo..=hi].contains(&true) && is_v[lo..=hi].contains(&true)
        })
        .or_else(|| mentions.first().copied())
        .unwrap_or(0);
    let (lo, hi) = window(center);
    (tokens[lo].start, tokens[hi].end)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, body: &str) -> Document {
        Document {
            doc_id: id.into(),
            title: String::new(),
            body: body.into(),
        }
    }

    #[test]
    fn tokenizer_lowercases_and_tracks_spans() {
        let toks = tokenize("Ann met Bob, in 2001!");
        let texts: Vec<&str> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["ann", "met", "bob", "in", "2001"]);
        assert_eq!((toks[2].start, toks[2].end), (8, 11));
    }

    #[test]
    fn single_doc_postings() {
        let idx = index_corpus([doc("d1", "Ann met Bob")]).unwrap();
        let terms: Vec<&str> = idx.terms().collect();
        assert_eq!(terms, ["ann", "bob", "met"]);
        for t in terms {
            assert_eq!(idx.postings(t), &[Posting { doc: 0, tf: 1 }]);
        }
    }

    #[test]
    fn shared_term_posting_list_sorted() {
        let idx = index_corpus([doc("b", "ann ann"), doc("a", "ann")]).unwrap();
        assert_eq!(
            idx.postings("ann"),
            &[Posting { doc: 0, tf: 1 }, Posting { doc: 1, tf: 2 }]
        );
        assert_eq!(idx.documents()[0].doc_id, "a");
    }

    #[test]
    fn corpus_errors() {
        assert_eq!(
            index_corpus(Vec::new()).unwrap_err(),
            VerifyError::EmptyCorpus
        );
        assert_eq!(
            index_corpus([doc("a", "x"), doc("a", "y")]).unwrap_err(),
            VerifyError::DuplicateDocId("a".into())
        );
        assert_eq!(
            index_corpus([doc("a", " -- ")]).unwrap_err(),
            VerifyError::EmptyDocument("a".into())
        );
        assert_eq!(
            verify_link(&CorpusIndex::default(), "a", "b", 3).unwrap_err(),
            VerifyError::EmptyIndex
        );
    }

    #[test]
    fn co_mention_ranks_first() {
        let idx = index_corpus([
            doc("1", "Ann and Bob married in 2001"),
            doc("2", "Ann visited Paris"),
        ])
        .unwrap();
        let r = verify_link(&idx, "Ann", "Bob", 5).unwrap();
        assert_eq!(r.verdict_hint, VerdictHint::BothMentioned);
        assert_eq!(r.passages[0].doc_id, "1");
        assert!(r.passages[0].mentions.both());
        assert_eq!(r.passages[1].doc_id, "2");
        assert!(r.passages[0].score > r.passages[1].score);
    }

    #[test]
    fn absent_names_give_no_passages() {
        let idx = index_corpus([doc("1", "Ann and Bob")]).unwrap();
        let r = verify_link(&idx, "Carol", "Dan", 5).unwrap();
        assert!(r.passages.is_empty());
        assert_eq!(r.verdict_hint, VerdictHint::None);
    }

    #[test]
    fn partial_name_is_not_a_mention() {
        let idx = index_corpus([doc("1", "Ann Smith was here"), doc("2", "Ann Lee and Bob")]).unwrap();
        let r = verify_link(&idx, "Ann Lee", "Bob", 5).unwrap();
        assert_eq!(r.passages.len(), 1);
        assert_eq!(r.passages[0].doc_id, "2");
    }

    #[test]
    fn snippet_is_windowed_verbatim() {
        let filler: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let body = format!("{} Ann, met  Bob! {}", filler.join(" "), filler.join(" "));
        let idx = index_corpus([doc("1", &body)]).unwrap();
        let r = verify_link(&idx, "Ann", "Bob", 1).unwrap();
        let p = &r.passages[0];
        assert_eq!(&body[p.snippet_range.0..p.snippet_range.1], p.snippet);
        assert_eq!(tokenize(&p.snippet).len(), 2 * SNIPPET_RADIUS + 1);
        assert!(p.snippet.contains("Ann, met  Bob!"));
    }

    #[test]
    fn empty_name_rejected() {
        let idx = index_corpus([doc("1", "x")]).unwrap();
        assert!(matches!(
            verify_link(&idx, "--", "x", 1),
            Err(VerifyError::EmptyName(_))
        ));
    }
}
