//! Response parsing: bullet lists from the proposer, yes/no verdicts from
//! the evaluator, and the final utterance of the baseline.

use regex::Regex;
use std::sync::OnceLock;

use crate::{Error, Result};

fn bullet_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*\u{2022}]|\d+[.)])\s*").unwrap())
}

/// Split a proposer response into at most `n` items: one per non-empty line,
/// with leading bullets (-, *, •) and numeric prefixes ("1.", "1)") removed.
/// Plain lines without bullets are accepted as items.
pub fn parse_bullet_list(text: &str, n: usize) -> Result<Vec<String>> {
    let mut items = Vec::new();
    for line in text.lines() {
        let stripped = bullet_re().replace(line, "");
        let item = stripped.trim();
        if !item.is_empty() {
            items.push(item.to_string());
            if items.len() == n {
                break;
            }
        }
    }
    if items.is_empty() {
        return Err(Error::EmptyProposal);
    }
    Ok(items)
}

/// Extract a yes/no verdict: the last non-empty line must be exactly
/// "yes" or "no" (modulo case and punctuation); failing that, scan the full
/// text for standalone yes/no tokens and accept only if one kind appears.
pub fn parse_yes_no(text: &str) -> Result<bool> {
    if let Some(line) = text.lines().rev().find(|l| !l.trim().is_empty()) {
        let bare: String = line
            .chars()
            .filter(|c| c.is_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        match bare.as_str() {
            "yes" => return Ok(true),
            "no" => return Ok(false),
            _ => {}
        }
    }

    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap());
    let mut saw_yes = false;
    let mut saw_no = false;
    for m in re.find_iter(text) {
        match m.as_str().to_lowercase().as_str() {
            "yes" => saw_yes = true,
            _ => saw_no = true,
        }
    }
    match (saw_yes, saw_no) {
        (true, false) => Ok(true),
        (false, true) => Ok(false),
        _ => Err(Error::AmbiguousAnswer(text.to_string())),
    }
}

/// Pull the final utterance out of a baseline response: the quoted string
/// after the last `Utterance:` marker, else the remainder of that line, else
/// the last non-empty line.
pub fn extract_final_utterance(response: &str) -> Result<String> {
    if response.trim().is_empty() {
        return Err(Error::EmptyResponse);
    }
    if let Some(idx) = response.rfind("Utterance:") {
        let tail = &response[idx + "Utterance:".len()..];
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| Regex::new(r#""([^"]+)""#).unwrap());
        if let Some(cap) = re.captures(tail) {
            return Ok(cap[1].to_string());
        }
        let line = tail.lines().next().unwrap_or("");
        let line = line.trim().trim_matches('"').trim_end_matches('.').trim();
        if !line.is_empty() {
            return Ok(line.to_string());
        }
    }
    response
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .map(str::to_string)
        .ok_or(Error::EmptyResponse)
}
