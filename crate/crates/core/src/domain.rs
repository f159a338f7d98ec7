//! Shared data types and the BIO span encoding.
//!
//! All character offsets are counted in Unicode scalar values.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::textfeat::Token;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
}

impl Tweet {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("tweet id is empty"));
        }
        if self.text.is_empty() {
            return Err(Error::invalid(format!("tweet {} has empty text", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityTag {
    #[serde(rename = "PER")]
    Per,
    #[serde(rename = "CITY")]
    City,
    #[serde(rename = "ADDR")]
    Addr,
    #[serde(rename = "STATUS")]
    Status,
}

impl EntityTag {
    pub const ALL: [EntityTag; 4] = [EntityTag::Per, EntityTag::City, EntityTag::Addr, EntityTag::Status];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityTag::Per => "PER",
            EntityTag::City => "CITY",
            EntityTag::Addr => "ADDR",
            EntityTag::Status => "STATUS",
        }
    }
}

impl fmt::Display for EntityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntitySpan {
    pub tag: EntityTag,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl EntitySpan {
    /// Builds a span over `text[start, end)`, checking the offsets.
    pub fn from_text(text: &str, tag: EntityTag, start: usize, end: usize) -> Result<Self> {
        let surface = char_slice(text, start, end).ok_or_else(|| {
            Error::InvalidSpan(format!(
                "{tag}[{start},{end}) outside text of {} chars",
                text.chars().count()
            ))
        })?;
        if start >= end {
            return Err(Error::InvalidSpan(format!("{tag}[{start},{end}) is empty")));
        }
        Ok(EntitySpan {
            tag,
            start,
            end,
            surface: surface.to_string(),
        })
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for EntitySpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},{})", self.tag, self.start, self.end)
    }
}

/// Slice of `text` between two character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.nth(start)?;
    let b_end = if end == start {
        b_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[b_start..b_end])
}

/// Checks every span against `text`: offsets in range, surface matches, no overlaps.
pub fn validate_spans(text: &str, spans: &[EntitySpan]) -> Result<()> {
    for s in spans {
        if s.start >= s.end {
            return Err(Error::InvalidSpan(format!("{s} is empty")));
        }
        match char_slice(text, s.start, s.end) {
            None => {
                return Err(Error::InvalidSpan(format!(
                    "{s} exceeds text length {}",
                    text.chars().count()
                )))
            }
            Some(sl) if sl != s.surface => {
                return Err(Error::InvalidSpan(format!(
                    "{s} surface {:?} does not match text {:?}",
                    s.surface, sl
                )))
            }
            _ => {}
        }
    }
    check_disjoint(spans)
}

fn check_disjoint(spans: &[EntitySpan]) -> Result<()> {
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for w in sorted.windows(2) {
        if w[0].overlaps(w[1]) {
            return Err(Error::OverlappingSpans(w[0].to_string(), w[1].to_string()));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HelpLabel {
    CallForHelp,
    NotCallForHelp,
}

impl HelpLabel {
    pub fn is_positive(self) -> bool {
        self == HelpLabel::CallForHelp
    }

    /// `+1` for a call for help, `-1` otherwise.
    pub fn sign(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            -1.0
        }
    }
}

/// BIO label over the four entity tags. `O` has index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioLabel {
    O,
    B(EntityTag),
    I(EntityTag),
}

pub const NUM_LABELS: usize = 9;

impl BioLabel {
    pub const ALL: [BioLabel; NUM_LABELS] = [
        BioLabel::O,
        BioLabel::B(EntityTag::Per),
        BioLabel::I(EntityTag::Per),
        BioLabel::B(EntityTag::City),
        BioLabel::I(EntityTag::City),
        BioLabel::B(EntityTag::Addr),
        BioLabel::I(EntityTag::Addr),
        BioLabel::B(EntityTag::Status),
        BioLabel::I(EntityTag::Status),
    ];

    pub fn index(self) -> usize {
        let tag_base = |t: EntityTag| 1 + 2 * (t as usize);
        match self {
            BioLabel::O => 0,
            BioLabel::B(t) => tag_base(t),
            BioLabel::I(t) => tag_base(t) + 1,
        }
    }

    pub fn from_index(i: usize) -> Option<BioLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn tag(self) -> Option<EntityTag> {
        match self {
            BioLabel::O => None,
            BioLabel::B(t) | BioLabel::I(t) => Some(t),
        }
    }

    /// Whether `self` may directly follow `prev` (`None` = sequence start).
    pub fn may_follow(self, prev: Option<BioLabel>) -> bool {
        match self {
            BioLabel::I(t) => matches!(prev, Some(BioLabel::B(p)) | Some(BioLabel::I(p)) if p == t),
            _ => true,
        }
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioLabel::O => f.write_str("O"),
            BioLabel::B(t) => write!(f, "B-{t}"),
            BioLabel::I(t) => write!(f, "I-{t}"),
        }
    }
}

impl FromStr for BioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "O" {
            return Ok(BioLabel::O);
        }
        BioLabel::ALL
            .iter()
            .copied()
            .find(|l| l.to_string() == s)
            .ok_or_else(|| Error::invalid(format!("unknown BIO label {s:?}")))
    }
}

impl Serialize for BioLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BioLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn is_valid_bio(labels: &[BioLabel]) -> bool {
    let mut prev = None;
    labels.iter().all(|&l| {
        let ok = l.may_follow(prev);
        prev = Some(l);
        ok
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub tweet_id: String,
    pub label: HelpLabel,
    #[serde(default)]
    pub spans: Vec<EntitySpan>,
    pub annotator: String,
    pub created_at: DateTime<Utc>,
}

impl AnnotationRecord {
    pub fn validate_against(&self, text: &str) -> Result<()> {
        if self.label == HelpLabel::NotCallForHelp && !self.spans.is_empty() {
            return Err(Error::InvalidSpan(
                "NotCallForHelp annotations must not carry spans".into(),
            ));
        }
        validate_spans(text, &self.spans)
    }
}

/// One line of the labeled-data interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub tweet: Tweet,
    pub label: HelpLabel,
    #[serde(default)]
    pub spans: Vec<EntitySpan>,
}

impl LabeledTweet {
    pub fn validate(&self) -> Result<()> {
        self.tweet.validate()?;
        if self.label == HelpLabel::NotCallForHelp && !self.spans.is_empty() {
            return Err(Error::InvalidSpan(format!(
                "tweet {}: NotCallForHelp example carries spans",
                self.tweet.id
            )));
        }
        validate_spans(&self.tweet.text, &self.spans)
    }
}

/// Reads labeled JSON Lines. Any malformed or invalid line is an error.
pub fn read_labeled(path: impl AsRef<std::path::Path>) -> Result<Vec<LabeledTweet>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: LabeledTweet = serde_json::from_str(line)
            .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), n + 1)))?;
        ex.validate()
            .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(ex);
    }
    if out.is_empty() {
        return Err(Error::EmptyBatch {
            path: path.display().to_string(),
            skipped: 0,
        });
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<std::path::Path>, items: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = String::new();
    for it in items {
        buf.push_str(&serde_json::to_string(it)?);
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Encodes character spans as one BIO label per token.
///
/// A token partially covered by a span is labeled as part of it. A token
/// touching two spans belongs to the earlier one.
pub fn spans_to_bio(tokens: &[Token], spans: &[EntitySpan]) -> Result<Vec<BioLabel>> {
    check_disjoint(spans)?;
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| s.start);

    let mut labels = vec![BioLabel::O; tokens.len()];
    let mut claimed = vec![false; tokens.len()];
    for span in sorted {
        let mut first = true;
        for (i, tok) in tokens.iter().enumerate() {
            if claimed[i] || !(tok.start < span.end && span.start < tok.end) {
                continue;
            }
            labels[i] = if first {
                BioLabel::B(span.tag)
            } else {
                BioLabel::I(span.tag)
            };
            claimed[i] = true;
            first = false;
        }
    }
    Ok(labels)
}

/// Decodes BIO labels into spans. A stray `I-X` opens a new span.
pub fn bio_to_spans(text: &str, tokens: &[Token], labels: &[BioLabel]) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut open: Option<(EntityTag, usize, usize)> = None;
    let mut prev = None;

    let close = |open: &mut Option<(EntityTag, usize, usize)>, spans: &mut Vec<EntitySpan>| {
        if let Some((tag, start, end)) = open.take() {
            let surface = char_slice(text, start, end).unwrap_or_default().to_string();
            spans.push(EntitySpan {
                tag,
                start,
                end,
                surface,
            });
        }
    };

    for (tok, &label) in tokens.iter().zip(labels) {
        match label {
            BioLabel::O => close(&mut open, &mut spans),
            BioLabel::I(t) if label.may_follow(prev) => {
                if let Some(o) = open.as_mut() {
                    o.2 = tok.end;
                } else {
                    open = Some((t, tok.start, tok.end));
                }
            }
            BioLabel::B(t) | BioLabel::I(t) => {
                close(&mut open, &mut spans);
                open = Some((t, tok.start, tok.end));
            }
        }
        prev = Some(label);
    }
    close(&mut open, &mut spans);
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textfeat::tokenize;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> (String, Vec<Token>) {
        let text = words.join(" ");
        (text.clone(), tokenize(&text))
    }

    #[test]
    fn label_index_order() {
        for (i, l) in BioLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(BioLabel::from_index(i), Some(*l));
            assert_eq!(l.to_string().parse::<BioLabel>().unwrap(), *l);
        }
        assert_eq!(BioLabel::ALL[3].to_string(), "B-CITY");
    }

    #[test]
    fn char_slice_multibyte() {
        let t = "altında ışık";
        assert_eq!(char_slice(t, 0, 7), Some("altında"));
        assert_eq!(char_slice(t, 8, 12), Some("ışık"));
        assert_eq!(char_slice(t, 12, 12), Some(""));
        assert_eq!(char_slice(t, 8, 13), None);
    }

    #[test]
    fn spans_to_bio_examples() {
        let (text, t) = toks(&["Ali", "enkaz", "altında"]);
        let per = EntitySpan::from_text(&text, EntityTag::Per, 0, 3).unwrap();
        assert_eq!(
            spans_to_bio(&t, &[per]).unwrap(),
            vec![BioLabel::B(EntityTag::Per), BioLabel::O, BioLabel::O]
        );

        let (text, t) = toks(&["Atatürk", "Cad."]);
        let addr = EntitySpan::from_text(&text, EntityTag::Addr, 0, 12).unwrap();
        assert_eq!(
            spans_to_bio(&t, &[addr]).unwrap(),
            vec![BioLabel::B(EntityTag::Addr), BioLabel::I(EntityTag::Addr)]
        );

        assert_eq!(spans_to_bio(&t, &[]).unwrap(), vec![BioLabel::O; 2]);
    }

    #[test]
    fn partial_overlap_takes_whole_token() {
        let (text, t) = toks(&["Hatayda", "yardım"]);
        let city = EntitySpan::from_text(&text, EntityTag::City, 0, 5).unwrap();
        assert_eq!(
            spans_to_bio(&t, &[city]).unwrap(),
            vec![BioLabel::B(EntityTag::City), BioLabel::O]
        );
    }

    #[test]
    fn overlapping_spans_rejected() {
        let (text, t) = toks(&["Ali", "Veli"]);
        let a = EntitySpan::from_text(&text, EntityTag::Per, 0, 5).unwrap();
        let b = EntitySpan::from_text(&text, EntityTag::City, 4, 8).unwrap();
        assert!(matches!(spans_to_bio(&t, &[a, b]), Err(Error::OverlappingSpans(..))));
    }

    #[test]
    fn bio_to_spans_examples() {
        use BioLabel::*;
        use EntityTag::*;
        let (text, t) = toks(&["Hatay", "yardım"]);
        let s = bio_to_spans(&text, &t, &[B(City), O]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].surface, "Hatay");

        let (text, t) = toks(&["Ali", "Veli"]);
        let s = bio_to_spans(&text, &t, &[I(Per), I(Per)]);
        assert_eq!(s, vec![EntitySpan::from_text(&text, Per, 0, 8).unwrap()]);

        let (text, t) = toks(&["a", "b", "c"]);
        let s = bio_to_spans(&text, &t, &[B(Addr), I(Addr), B(Addr)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].surface, "a b");
        assert_eq!(s[1].surface, "c");
    }

    #[test]
    fn stray_inside_after_other_tag_opens_new_span() {
        use BioLabel::*;
        use EntityTag::*;
        let (text, t) = toks(&["a", "b"]);
        let s = bio_to_spans(&text, &t, &[B(Per), I(City)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].tag, City);
    }

    #[test]
    fn annotation_negative_with_spans_invalid() {
        let rec = AnnotationRecord {
            tweet_id: "1".into(),
            label: HelpLabel::NotCallForHelp,
            spans: vec![EntitySpan::from_text("abc", EntityTag::Per, 0, 3).unwrap()],
            annotator: "x".into(),
            created_at: Utc::now(),
        };
        assert!(rec.validate_against("abc").is_err());
    }

    fn label_strategy() -> impl Strategy<Value = BioLabel> {
        (0..NUM_LABELS).prop_map(|i| BioLabel::ALL[i])
    }

    proptest! {
        #[test]
        fn decoded_spans_never_overlap(labels in prop::collection::vec(label_strategy(), 1..12)) {
            let words: Vec<String> = (0..labels.len()).map(|i| format!("w{i}")).collect();
            let text = words.join(" ");
            let t = tokenize(&text);
            let spans = bio_to_spans(&text, &t, &labels);
            prop_assert!(check_disjoint(&spans).is_ok());
            prop_assert!(validate_spans(&text, &spans).is_ok());
            // re-encoding the repaired spans gives a valid sequence
            let bio = spans_to_bio(&t, &spans).unwrap();
            prop_assert!(is_valid_bio(&bio));
        }

        #[test]
        fn span_roundtrip(labels in prop::collection::vec(label_strategy(), 1..12)) {
            // any decoded span set is token-aligned; encode/decode must be exact
            let words: Vec<String> = (0..labels.len()).map(|i| format!("t{i}")).collect();
            let text = words.join(" ");
            let t = tokenize(&text);
            let spans = bio_to_spans(&text, &t, &labels);
            let bio = spans_to_bio(&t, &spans).unwrap();
            prop_assert!(is_valid_bio(&bio));
            prop_assert_eq!(bio_to_spans(&text, &t, &bio), spans);
        }
    }
}
