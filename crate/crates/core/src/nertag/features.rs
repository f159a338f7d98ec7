use crate::textfeat::{shape_class, stem, turkish_lower, ShapeClass, Token};

/// Feature strings firing at one token position. Always contains `bias`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector(pub Vec<String>);

impl FeatureVector {
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

fn flag(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

/// Stem, word shape (standing in for a part-of-speech tag) of the token and
/// its neighbours, the lowercased word, and casing indicators.
pub fn extract_features(tokens: &[Token], i: usize) -> FeatureVector {
    let tok = &tokens[i].surface;
    let shape = shape_class(tok);
    let prev = if i == 0 {
        "BOS"
    } else {
        shape_class(&tokens[i - 1].surface).as_str()
    };
    let next = if i + 1 == tokens.len() {
        "EOS"
    } else {
        shape_class(&tokens[i + 1].surface).as_str()
    };
    FeatureVector(vec![
        "bias".to_string(),
        format!("stem={}", stem(tok)),
        format!("shape={shape}"),
        format!("prev.shape={prev}"),
        format!("next.shape={next}"),
        format!("word={}", turkish_lower(tok)),
        format!("istitle={}", flag(shape == ShapeClass::Title)),
        format!("islower={}", flag(shape == ShapeClass::Lower)),
        format!("isupper={}", flag(shape == ShapeClass::Upper)),
    ])
}

pub fn sentence_features(tokens: &[Token]) -> Vec<FeatureVector> {
    (0..tokens.len()).map(|i| extract_features(tokens, i)).collect()
}
