//! Rule-based keyword extraction and post-compression substitution.
//!
//! Keywords are the terms a summary must not lose: names (maximal runs of
//! capitalized words), numbers with their units, dates, and short quoted
//! spans. When a chunk's summary comes back far below its token budget the
//! keywords stand in for it, so downstream tasks keep the entities even if
//! the prose is gone.

use crate::backends::local::STOPWORDS;
use crate::chunker::Chunk;
use crate::text::TokenizerRef;
use serde::Serialize;
use std::collections::HashSet;

/// Summaries shorter than this fraction of their target are considered
/// truncated and replaced by their keyword terms.
pub const TRUNCATION_FLOOR: f64 = 0.3;

/// Longest quoted span, in words, still treated as a term.
const MAX_QUOTE_WORDS: usize = 10;

const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august",
    "september", "october", "november", "december",
];

const UNITS: &[&str] = &[
    "%", "percent", "kg", "km", "cm", "mm", "mi", "lb", "kb", "mb", "gb",
    "tb", "hz", "khz", "mhz", "ghz", "ms", "kwh", "mph", "million", "billion",
    "trillion", "tons", "miles", "years", "dollars", "euros",
];

#[derive(Debug, Clone, Serialize)]
pub struct KeywordSet {
    /// `original_index` of the chunk the terms came from.
    pub chunk_ref: usize,
    /// Deduplicated terms in first-occurrence order, each a verbatim
    /// substring of the chunk.
    pub terms: Vec<String>,
}

impl KeywordSet {
    pub fn empty(chunk_ref: usize) -> KeywordSet {
        KeywordSet {
            chunk_ref,
            terms: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn extract_keywords(chunk: &Chunk) -> KeywordSet {
    KeywordSet {
        chunk_ref: chunk.original_index,
        terms: extract_terms(&chunk.text),
    }
}

/// Replace a suspiciously short summary with its keyword terms joined by
/// "; ", capped at `target_len` tokens. Returns `None` when the summary is
/// long enough (or there are no keywords to fall back on).
pub fn substitute_if_truncated(
    compressed: &str,
    kw: &KeywordSet,
    target_len: usize,
    tokenizer: &TokenizerRef,
) -> Option<String> {
    if kw.is_empty() {
        return None;
    }
    let floor = (TRUNCATION_FLOOR * target_len as f64).ceil() as usize;
    if tokenizer.count(compressed) >= floor {
        return None;
    }
    let joined = kw.terms.join("; ");
    Some(tokenizer.truncate(&joined, target_len).to_string())
}

/// One non-whitespace token with its raw span and its "core" span, the raw
/// span minus leading and trailing punctuation.
#[derive(Debug, Clone, Copy)]
struct Word {
    start: usize,
    end: usize,
    core_start: usize,
    core_end: usize,
}

impl Word {
    fn core<'a>(&self, text: &'a str) -> &'a str {
        &text[self.core_start..self.core_end]
    }
}

pub fn extract_terms(text: &str) -> Vec<String> {
    let words = scan_words(text);
    let mut spans: Vec<(usize, usize)> = Vec::new();
    quoted_spans(text, &mut spans);
    capitalized_and_date_spans(text, &words, &mut spans);
    numeral_spans(text, &words, &mut spans);

    // First-occurrence order, longest span first at equal starts; spans
    // inside an accepted span are dropped (the quote or date already
    // carries them).
    spans.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut accepted: Vec<(usize, usize)> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut terms = Vec::new();
    for (s, e) in spans {
        if accepted.iter().any(|&(a, b)| a <= s && e <= b) {
            continue;
        }
        accepted.push((s, e));
        let term = &text[s..e];
        if term.is_empty() {
            continue;
        }
        if seen.insert(term.to_lowercase()) {
            terms.push(term.to_string());
        }
    }
    terms
}

fn scan_words(text: &str) -> Vec<Word> {
    let mut words = Vec::new();
    let bytes = text.char_indices().collect::<Vec<_>>();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].1.is_whitespace() {
            i += 1;
            continue;
        }
        let start = bytes[i].0;
        let mut j = i;
        while j < bytes.len() && !bytes[j].1.is_whitespace() {
            j += 1;
        }
        let end = if j < bytes.len() { bytes[j].0 } else { text.len() };
        let raw = &text[start..end];
        let trimmed_front = raw.trim_start_matches(|c: char| !c.is_alphanumeric());
        let core_start = start + (raw.len() - trimmed_front.len());
        let trimmed = trimmed_front.trim_end_matches(|c: char| !c.is_alphanumeric() && c != '%');
        let core_end = core_start + trimmed.len();
        words.push(Word {
            start,
            end,
            core_start,
            core_end,
        });
        i = j;
    }
    words
}

fn quoted_spans(text: &str, spans: &mut Vec<(usize, usize)>) {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let close = match c {
            '"' => '"',
            '\u{201c}' => '\u{201d}',
            _ => {
                i += 1;
                continue;
            }
        };
        if let Some(end) = chars[i + 1..].iter().find(|&&(_, ch)| ch == close) {
            let inner = &text[pos + c.len_utf8()..end.0];
            let n_words = inner.split_whitespace().count();
            if n_words > 0 && n_words <= MAX_QUOTE_WORDS {
                spans.push((pos, end.0 + close.len_utf8()));
            }
            let skip = chars[i + 1..]
                .iter()
                .position(|&(p, _)| p == end.0)
                .unwrap();
            i += skip + 2;
        } else {
            i += 1;
        }
    }
}

fn capitalized_and_date_spans(text: &str, words: &[Word], spans: &mut Vec<(usize, usize)>) {
    let is_cap = |w: &Word| {
        w.core(text)
            .chars()
            .next()
            .map(|c| c.is_uppercase())
            .unwrap_or(false)
    };
    // Trailing punctuation ends a run, so names never span commas,
    // semicolons, or sentence boundaries.
    let breaks_after = |w: &Word| w.core_end != w.end;
    let mut i = 0;
    while i < words.len() {
        if !is_cap(&words[i]) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i + 1 < words.len() && is_cap(&words[i + 1]) && !breaks_after(&words[i]) {
            i += 1;
        }
        let mut run_end = i;
        // A run ending in a month name pulls in a following day and year.
        let last_core = words[run_end].core(text).to_lowercase();
        if MONTHS.contains(&last_core.as_str()) {
            let mut k = run_end;
            if k + 1 < words.len() && is_plain_number(words[k + 1].core(text)) {
                k += 1;
                if k + 1 < words.len()
                    && is_plain_number(words[k + 1].core(text))
                    && words[k + 1].core(text).len() == 4
                {
                    k += 1;
                }
            }
            run_end = k;
        }
        let lone = run_end == run_start;
        if lone {
            let core = words[run_start].core(text);
            let skip = sentence_initial(text, words, run_start)
                && STOPWORDS.contains(&core.to_lowercase().as_str());
            if !skip && !core.is_empty() {
                spans.push((words[run_start].core_start, words[run_start].core_end));
            }
        } else {
            spans.push((words[run_start].core_start, words[run_end].core_end));
        }
        i = run_end + 1;
    }
}

fn numeral_spans(text: &str, words: &[Word], spans: &mut Vec<(usize, usize)>) {
    for (i, w) in words.iter().enumerate() {
        let core = w.core(text);
        if !is_numeral(core) {
            continue;
        }
        let mut end = w.core_end;
        if !core.ends_with('%') {
            if let Some(next) = words.get(i + 1) {
                if UNITS.contains(&next.core(text).to_lowercase().as_str()) {
                    end = next.core_end;
                }
            }
        }
        spans.push((w.core_start, end));
    }
}

fn is_plain_number(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
}

fn is_numeral(s: &str) -> bool {
    let body = s.strip_suffix('%').unwrap_or(s);
    !body.is_empty()
        && body.chars().any(|c| c.is_ascii_digit())
        && body.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

fn sentence_initial(text: &str, words: &[Word], i: usize) -> bool {
    if i == 0 {
        return true;
    }
    let prev = &words[i - 1];
    let raw = &text[prev.start..prev.end];
    raw.trim_end_matches(|c: char| matches!(c, ')' | ']' | '"' | '\'' | '\u{201d}'))
        .ends_with(['.', '!', '?'])
}
