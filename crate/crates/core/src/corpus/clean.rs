use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{CleanDocument, RawDocument};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleaningStep {
    /// Removes HTML/XML tags and decodes character entities.
    StripMarkup,
    /// Unicode canonical composition (NFC).
    UnicodeNormalize,
    Lowercase,
    /// Trims and collapses every whitespace run into one space.
    CollapseWhitespace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleaningPolicy {
    pub steps: Vec<CleaningStep>,
    /// Minimum cleaned length in characters.
    pub min_length: usize,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        Self {
            steps: vec![
                CleaningStep::StripMarkup,
                CleaningStep::UnicodeNormalize,
                CleaningStep::Lowercase,
                CleaningStep::CollapseWhitespace,
            ],
            min_length: 50,
        }
    }
}

impl CleaningPolicy {
    pub fn new(steps: Vec<CleaningStep>, min_length: usize) -> Result<Self> {
        let policy = Self { steps, min_length };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::contract("cleaning.steps must not be empty"));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if self.steps[..i].contains(step) {
                return Err(Error::contract(format!(
                    "cleaning.steps lists {step:?} more than once"
                )));
            }
        }
        if self.min_length < 1 {
            return Err(Error::contract("cleaning.min_length must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CleanOutcome {
    Kept(CleanDocument),
    Excluded(Exclusion),
}

impl CleanOutcome {
    pub fn kept(self) -> Option<CleanDocument> {
        match self {
            CleanOutcome::Kept(doc) => Some(doc),
            CleanOutcome::Excluded(_) => None,
        }
    }
}

/// Applies the policy steps in order.
///
/// The result always has its whitespace trimmed and collapsed, whether or not
/// the policy lists `collapse_whitespace`, so that every kept document satisfies
/// the cleaned-text invariants. Documents that end up empty or shorter than
/// `min_length` characters are excluded rather than failing.
pub fn clean_text(raw: &RawDocument, policy: &CleaningPolicy) -> Result<CleanOutcome> {
    policy.validate()?;
    let mut text = raw.text.clone();
    for step in &policy.steps {
        text = match step {
            CleaningStep::StripMarkup => strip_markup(&text),
            CleaningStep::UnicodeNormalize => text.nfc().collect(),
            CleaningStep::Lowercase => text.to_lowercase(),
            CleaningStep::CollapseWhitespace => collapse_whitespace(&text),
        };
    }
    let text = collapse_whitespace(&text);

    let chars = text.chars().count();
    let reason = if chars == 0 {
        Some("empty after cleaning".to_string())
    } else if chars < policy.min_length {
        Some(format!(
            "cleaned length {chars} below min_length {}",
            policy.min_length
        ))
    } else {
        None
    };
    Ok(match reason {
        Some(reason) => CleanOutcome::Excluded(Exclusion {
            id: raw.id.clone(),
            reason,
        }),
        None => CleanOutcome::Kept(CleanDocument::new(raw.id.clone(), text)?),
    })
}

/// Cleans documents in parallel. Output order follows input order.
pub fn clean_corpus(
    docs: &[RawDocument],
    policy: &CleaningPolicy,
) -> Result<(Vec<CleanDocument>, Vec<Exclusion>)> {
    policy.validate()?;
    let outcomes: Vec<CleanOutcome> = docs
        .par_iter()
        .map(|d| clean_text(d, policy))
        .collect::<Result<_>>()?;
    let mut kept = Vec::with_capacity(outcomes.len());
    let mut excluded = Vec::new();
    for outcome in outcomes {
        match outcome {
            CleanOutcome::Kept(doc) => kept.push(doc),
            CleanOutcome::Excluded(ex) => excluded.push(ex),
        }
    }
    Ok((kept, excluded))
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

// Tag removal and entity decoding are repeated until nothing changes, so
// escaped markup such as "&lt;b&gt;" cannot survive a first pass and be
// stripped by a second one.
fn strip_markup(text: &str) -> String {
    let mut current = text.to_string();
    for _ in 0..8 {
        let next = decode_entities(&strip_tags(&current));
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        let after = &rest[open + 1..];
        let starts_tag = after
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || matches!(c, '/' | '!' | '?'));
        match (starts_tag, after.find('>')) {
            (true, Some(close)) => {
                out.push_str(&rest[..open]);
                out.push(' ');
                rest = &after[close + 1..];
            }
            _ => {
                out.push_str(&rest[..=open]);
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let decoded = after
            .find(';')
            .filter(|&end| end <= 10)
            .and_then(|end| entity_char(&after[..end]).map(|c| (c, end)));
        match decoded {
            Some((c, end)) => {
                out.push(c);
                rest = &after[end + 1..];
            }
            None => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn entity_char(name: &str) -> Option<char> {
    match name {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ => {
            let code = if let Some(hex) = name.strip_prefix("#x").or(name.strip_prefix("#X")) {
                u32::from_str_radix(hex, 16).ok()?
            } else {
                name.strip_prefix('#')?.parse().ok()?
            };
            char::from_u32(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use CleaningStep::*;

    fn raw(text: &str) -> RawDocument {
        RawDocument {
            id: "d".into(),
            text: text.into(),
        }
    }

    fn kept_text(text: &str, steps: Vec<CleaningStep>) -> String {
        let policy = CleaningPolicy::new(steps, 1).unwrap();
        match clean_text(&raw(text), &policy).unwrap() {
            CleanOutcome::Kept(doc) => doc.text().to_string(),
            CleanOutcome::Excluded(ex) => panic!("excluded: {}", ex.reason),
        }
    }

    #[test]
    fn lowercase_and_collapse() {
        assert_eq!(
            kept_text("  Foo\tBAR ", vec![Lowercase, CollapseWhitespace]),
            "foo bar"
        );
    }

    #[test]
    fn strip_markup_keeps_accents() {
        assert_eq!(kept_text("<p>Olá</p>", vec![StripMarkup, Lowercase]), "olá");
    }

    #[test]
    fn markup_only_document_is_excluded() {
        let policy = CleaningPolicy::new(vec![StripMarkup], 1).unwrap();
        match clean_text(&raw("<br/>"), &policy).unwrap() {
            CleanOutcome::Excluded(ex) => {
                assert_eq!(ex.id, "d");
                assert!(ex.reason.contains("empty"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_document_is_excluded_with_length_reason() {
        let policy = CleaningPolicy::default();
        match clean_text(&raw("curto demais"), &policy).unwrap() {
            CleanOutcome::Excluded(ex) => assert!(ex.reason.contains("min_length 50")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn entities_decode_and_comparisons_survive() {
        assert_eq!(
            kept_text("a &lt; b &amp;&amp; c<br>d &#233;", vec![StripMarkup]),
            "a < b && c d é"
        );
        assert_eq!(kept_text("&lt;b&gt;x&lt;/b&gt;", vec![StripMarkup]), "x");
    }

    #[test]
    fn nfc_composes_decomposed_accents() {
        let decomposed = "a\u{0301}";
        assert_eq!(kept_text(decomposed, vec![UnicodeNormalize]), "\u{00e1}");
    }

    #[test]
    fn policy_rejects_repeats_and_empty_steps() {
        assert!(CleaningPolicy::new(vec![], 1).is_err());
        assert!(CleaningPolicy::new(vec![Lowercase, Lowercase], 1).is_err());
        assert!(CleaningPolicy::new(vec![Lowercase], 0).is_err());
    }

    #[test]
    fn corpus_cleaning_counts_exclusions_and_keeps_order() {
        let docs = vec![
            RawDocument {
                id: "a".into(),
                text: "x".repeat(60),
            },
            RawDocument {
                id: "b".into(),
                text: "<br/>".into(),
            },
            RawDocument {
                id: "c".into(),
                text: "y".repeat(60),
            },
        ];
        let (kept, excluded) = clean_corpus(&docs, &CleaningPolicy::default()).unwrap();
        let ids: Vec<_> = kept.iter().map(|d| d.id()).collect();
        assert_eq!(ids, ["a", "c"]);
        assert_eq!(excluded.len(), 1);
        assert_eq!(excluded[0].id, "b");
    }

    fn arb_policy() -> impl Strategy<Value = CleaningPolicy> {
        Just(vec![StripMarkup, UnicodeNormalize, Lowercase])
            .prop_shuffle()
            .prop_flat_map(|others| {
                (Just(others), 0usize..=3, 0usize..=3).prop_map(|(mut steps, keep, at)| {
                    steps.truncate(keep);
                    steps.insert(at.min(steps.len()), CollapseWhitespace);
                    CleaningPolicy {
                        steps,
                        min_length: 1,
                    }
                })
            })
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(text in "(\\PC|<[a-z/]{1,4}>|&[a-z#0-9]{1,5};|\\s){0,60}", policy in arb_policy()) {
            if let CleanOutcome::Kept(once) = clean_text(&raw(&text), &policy).unwrap() {
                let again = clean_text(&raw(once.text()), &policy).unwrap().kept().unwrap();
                prop_assert_eq!(again.text(), once.text());
            }
        }

        #[test]
        fn kept_text_has_canonical_whitespace(text in "\\PC{0,60}") {
            let policy = CleaningPolicy::new(vec![Lowercase], 1).unwrap();
            if let CleanOutcome::Kept(doc) = clean_text(&raw(&text), &policy).unwrap() {
                prop_assert_eq!(doc.text().trim(), doc.text());
                prop_assert!(!doc.text().contains("  "));
                let expected = super::super::word_tokenize(doc.text());
                prop_assert_eq!(doc.words(), expected.as_slice());
            }
        }
    }
}
