use super::schema::{AttributeSchema, FeatureSet};
use crate::{Error, Result};

/// Lowercase, strip punctuation, split into words. Multi-word lexemes such
/// as "left corner" are matched downstream over the token stream.
pub(crate) fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Canonical form used for deduplication and memoization: lowercased,
/// whitespace collapsed, trailing punctuation removed.
pub fn normalize_utterance(text: &str) -> String {
    let trimmed = text
        .trim()
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace());
    trimmed.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Extract the attribute-value mentions from free text.
///
/// Matching is lexicon-anchored and case-insensitive, with color words
/// disambiguated by syntactic context: after "floor is" / "wall is" they
/// name the floor or wall, adjacent to a size/shape word (or the word
/// "object", or after "object is" / "<shape> is") they name the object.
/// Unrecognized spans are ignored. Two different values for the same
/// attribute are a parse failure.
pub fn parse_utterance(schema: &AttributeSchema, text: &str) -> Result<FeatureSet> {
    let tokens = tokenize(text);
    let mut features = FeatureSet::empty(schema);
    let mut i = 0;
    while i < tokens.len() {
        let Some(bucket) = schema.by_first.get(&tokens[i]) else {
            i += 1;
            continue;
        };
        // Buckets are sorted longest-first; collect every entry sharing the
        // longest surface form that matches here.
        let mut matched: Vec<&super::schema::LexEntry> = Vec::new();
        let mut matched_len = 0;
        for &entry_idx in bucket {
            let entry = &schema.entries[entry_idx];
            if matched_len > 0 && entry.tokens.len() < matched_len {
                break;
            }
            if i + entry.tokens.len() <= tokens.len()
                && entry.tokens.iter().zip(&tokens[i..]).all(|(a, b)| a == b)
            {
                matched_len = entry.tokens.len();
                matched.push(entry);
            }
        }
        if matched.is_empty() {
            i += 1;
            continue;
        }

        let mut attrs: Vec<usize> = matched.iter().map(|e| e.attr).collect();
        attrs.dedup();
        let chosen: Option<&super::schema::LexEntry> = if attrs.len() == 1 {
            Some(matched[0])
        } else {
            disambiguate_color(schema, &tokens, i, matched_len, &matched)
        };

        if let Some(entry) = chosen {
            if let Err(existing) = features.try_set(entry.attr, entry.value) {
                let attr = &schema.attributes()[entry.attr];
                return Err(Error::ParseConflict {
                    attribute: attr.name.clone(),
                    first: attr.values[existing as usize].clone(),
                    second: attr.values[entry.value as usize].clone(),
                });
            }
        }
        i += matched_len;
    }
    Ok(features)
}

/// Pick the attribute for a color word shared across the color roles.
fn disambiguate_color<'a>(
    schema: &AttributeSchema,
    tokens: &[String],
    i: usize,
    matched_len: usize,
    matched: &[&'a super::schema::LexEntry],
) -> Option<&'a super::schema::LexEntry> {
    let roles = &schema.roles;
    let pick = |attr: Option<usize>| -> Option<&'a super::schema::LexEntry> {
        let attr = attr?;
        matched.iter().copied().find(|e| e.attr == attr)
    };

    // "the floor is purple" / "the wall is green" / "the object is red".
    if i >= 2 && tokens[i - 1] == "is" {
        let head = tokens[i - 2].as_str();
        if head == "floor" {
            if let Some(entry) = pick(roles.floor) {
                return Some(entry);
            }
        }
        if head == "wall" {
            if let Some(entry) = pick(roles.wall) {
                return Some(entry);
            }
        }
        if head == "object" || schema.object_context.contains(head) {
            if let Some(entry) = pick(roles.object_color) {
                return Some(entry);
            }
        }
    }
    // "the red small block", "a red object": a neighboring size/shape word
    // (or "object") marks the object noun phrase.
    let before = i.checked_sub(1).map(|j| tokens[j].as_str());
    let after = tokens.get(i + matched_len).map(String::as_str);
    for neighbor in [before, after].into_iter().flatten() {
        if schema.object_context.contains(neighbor) {
            if let Some(entry) = pick(roles.object_color) {
                return Some(entry);
            }
        }
    }
    None
}
