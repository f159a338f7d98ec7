//! Tokenization, Turkish-aware casing, suffix stemming, word shapes and TF-IDF.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Lowercases with Turkish dotted/dotless `i` rules.
pub fn turkish_lower(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            'I' => out.push('ı'),
            'İ' => out.push('i'),
            _ => out.extend(c.to_lowercase()),
        }
    }
    out
}

pub fn turkish_upper(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            'i' => out.push('İ'),
            'ı' => out.push('I'),
            _ => out.extend(c.to_uppercase()),
        }
    }
    out
}

/// First character uppercased, the rest lowercased.
pub fn turkish_title(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        None => String::new(),
        Some(first) => {
            let mut out = turkish_upper(&first.to_string());
            out.push_str(&turkish_lower(chars.as_str()));
            out
        }
    }
}

fn is_abbreviation(core: &[char]) -> bool {
    !core.is_empty()
        && core.len() <= 4
        && core.iter().all(|c| c.is_alphabetic())
        && core[0].is_uppercase()
}

/// Splits `text` on whitespace, detaching leading and trailing punctuation.
///
/// Interior punctuation stays attached (`no:12`). A trailing period stays on
/// short capitalized abbreviations (`Cad.`, `Sok.`).
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let push = |out: &mut Vec<Token>, s: usize, e: usize| {
        out.push(Token {
            surface: chars[s..e].iter().collect(),
            start: s,
            end: e,
        })
    };

    let mut lead = start;
    while lead < end && is_punct(chars[lead]) {
        push(out, lead, lead + 1);
        lead += 1;
    }
    if lead == end {
        return;
    }
    let mut trail = end;
    while trail > lead && is_punct(chars[trail - 1]) {
        trail -= 1;
    }
    let mut core_end = trail;
    if trail < end && chars[trail] == '.' && is_abbreviation(&chars[lead..trail]) {
        core_end = trail + 1;
    }
    push(out, lead, core_end);
    for p in core_end..end {
        push(out, p, p + 1);
    }
}

/// Inflectional suffixes, longest first.
pub const SUFFIXES: [&str; 26] = [
    "lardan", "lerden", "larda", "lerde", "ların", "lerin", "lar", "ler", "dan", "den", "tan",
    "ten", "da", "de", "ta", "te", "ın", "in", "un", "ün", "ı", "i", "u", "ü", "a", "e",
];
const MIN_STEM: usize = 3;
const MAX_PASSES: usize = 2;

/// Case-folds and strips up to two suffixes, never below three characters.
pub fn stem(token: &str) -> String {
    stem_with_passes(token).0
}

/// Stem plus the number of suffixes stripped.
pub fn stem_with_passes(token: &str) -> (String, usize) {
    let mut word = turkish_lower(token);
    let mut passes = 0;
    while passes < MAX_PASSES {
        let len = word.chars().count();
        let hit = SUFFIXES.iter().find(|suf| {
            word.ends_with(*suf) && len - suf.chars().count() >= MIN_STEM
        });
        match hit {
            Some(suf) => {
                word.truncate(word.len() - suf.len());
                passes += 1;
            }
            None => break,
        }
    }
    (word, passes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeClass {
    Upper,
    Title,
    Lower,
    Digit,
    Punct,
    Mixed,
}

impl ShapeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::Upper => "UPPER",
            ShapeClass::Title => "TITLE",
            ShapeClass::Lower => "LOWER",
            ShapeClass::Digit => "DIGIT",
            ShapeClass::Punct => "PUNCT",
            ShapeClass::Mixed => "MIXED",
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn shape_class(token: &str) -> ShapeClass {
    let chars: Vec<char> = token.chars().collect();
    if chars.iter().all(|c| c.is_numeric()) {
        return ShapeClass::Digit;
    }
    if chars.iter().all(|c| is_punct(*c)) {
        return ShapeClass::Punct;
    }
    if chars.iter().all(|c| c.is_alphabetic()) {
        if chars.iter().all(|c| c.is_uppercase()) {
            return ShapeClass::Upper;
        }
        if chars.iter().all(|c| c.is_lowercase()) {
            return ShapeClass::Lower;
        }
        if chars[0].is_uppercase() && chars[1..].iter().all(|c| c.is_lowercase()) {
            return ShapeClass::Title;
        }
    }
    ShapeClass::Mixed
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector<F> {
    entries: Vec<(usize, F)>,
}

impl<F: Scalar> SparseVector<F> {
    /// Sorts and merges duplicate indices.
    pub fn from_pairs(mut pairs: Vec<(usize, F)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut entries: Vec<(usize, F)> = Vec::with_capacity(pairs.len());
        for (i, w) in pairs {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += w,
                _ => entries.push((i, w)),
            }
        }
        SparseVector { entries }
    }

    pub fn entries(&self) -> &[(usize, F)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.1 == F::zero())
    }

    pub fn norm(&self) -> F {
        self.entries.iter().map(|e| e.1 * e.1).sum::<F>().sqrt()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|e| e.0)
    }

    pub fn dot_dense(&self, dense: &[F]) -> F {
        self.entries.iter().map(|&(i, w)| dense[i] * w).sum()
    }
}

/// Term-to-column map plus smoothed inverse document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfVectorizer<F> {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    idf: Vec<F>,
}

#[derive(Serialize, Deserialize)]
struct TfIdfDoc<F> {
    terms: Vec<String>,
    idf: Vec<F>,
}

impl<F: Scalar> TfIdfVectorizer<F> {
    /// Fits on tokenized documents, keeping case-folded terms with
    /// document frequency `>= min_df`. Columns follow sorted term order.
    pub fn fit<D, S>(corpus: &[D], min_df: usize) -> Result<Self>
    where
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        if corpus.is_empty() {
            return Err(Error::invalid("empty corpus"));
        }
        if min_df == 0 {
            return Err(Error::invalid("min_df must be >= 1"));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let mut seen: Vec<String> = doc.as_ref().iter().map(|t| turkish_lower(t.as_ref())).collect();
            seen.sort();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = F::of_usize(corpus.len());
        let (terms, idf): (Vec<String>, Vec<F>) = df
            .into_iter()
            .filter(|(_, c)| *c >= min_df)
            .map(|(t, c)| {
                let w = ((F::one() + n) / (F::one() + F::of_usize(c))).ln() + F::one();
                (t, w)
            })
            .unzip();
        if terms.is_empty() {
            return Err(Error::EmptyVocabulary { min_df });
        }
        Ok(Self::from_parts(terms, idf))
    }

    fn from_parts(terms: Vec<String>, idf: Vec<F>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfIdfVectorizer { terms, index, idf }
    }

    pub fn feature_size(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[F] {
        &self.idf
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.index.get(&turkish_lower(term)).copied()
    }

    /// Raw count times idf, without normalization.
    pub fn transform_raw<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector<F> {
        let pairs = doc
            .iter()
            .filter_map(|t| self.column(t.as_ref()))
            .map(|i| (i, self.idf[i]))
            .collect();
        SparseVector::from_pairs(pairs)
    }

    /// L2-normalized TF-IDF vector; out-of-vocabulary terms are dropped.
    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector<F> {
        let mut v = self.transform_raw(doc);
        let norm = v.norm();
        if norm > F::zero() {
            for e in &mut v.entries {
                e.1 = e.1 / norm;
            }
        }
        v
    }

    pub fn transform_text(&self, text: &str) -> SparseVector<F> {
        self.transform(&surfaces(&tokenize(text)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TfIdfDoc {
            terms: self.terms.clone(),
            idf: self.idf.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TfIdfDoc<F> = serde_json::from_str(s)?;
        if doc.terms.len() != doc.idf.len() {
            return Err(Error::LengthMismatch {
                expected: doc.terms.len(),
                got: doc.idf.len(),
            });
        }
        let v = Self::from_parts(doc.terms, doc.idf);
        if v.index.len() != v.terms.len() {
            return Err(Error::invalid("duplicate terms in vectorizer"));
        }
        Ok(v)
    }

    /// Hex SHA-256 of the persisted form.
    pub fn fingerprint(&self) -> String {
        let json = self.to_json().expect("vectorizer serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

pub fn surfaces(tokens: &[Token]) -> Vec<String> {
    tokens.iter().map(|t| t.surface.clone()).collect()
}
