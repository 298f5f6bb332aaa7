//! Rule-based sentence boundary detection.
//!
//! A terminal cluster (runs of `.`/`!`/`?` plus closing quotes or brackets)
//! ends a sentence when followed by whitespace or end of text. Lone periods
//! are guarded against abbreviations, single-letter initials and a lowercase
//! continuation word, so "Dr. Smith left. He returned." is two sentences and
//! "pi is 3.14" is one.

use super::{Segment, SegmentKind};

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g",
    "i.e", "fig", "eq", "no", "vol", "pp", "al", "inc", "ltd", "co", "corp",
    "dept", "approx", "cf", "ca", "u.s", "u.k", "a.m", "p.m",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'' | '\u{201d}' | '\u{2019}')
}

/// The word immediately before byte offset `end`, scanning back over
/// alphanumerics and interior dots ("e.g" for "e.g.", "U.S" for "U.S.").
fn word_before(text: &str, end: usize) -> &str {
    let head = &text[..end];
    let mut start = end;
    for (i, c) in head.char_indices().rev() {
        if c.is_alphanumeric() || c == '.' {
            start = i;
        } else {
            break;
        }
    }
    head[start..].trim_matches('.')
}

fn is_initial(word: &str) -> bool {
    let mut chars = word.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => c.is_uppercase(),
        _ => false,
    }
}

pub fn split_sentences(text: &str) -> Vec<Segment> {
    let mut segs: Vec<Segment> = Vec::new();
    if text.is_empty() {
        return segs;
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let mut seg_start = 0usize;
    let mut i = 0usize;
    while i < n {
        if !is_terminal(chars[i].1) {
            i += 1;
            continue;
        }
        let cluster_start = chars[i].0;
        let mut strong = chars[i].1 != '.';
        let mut j = i;
        while j + 1 < n && is_terminal(chars[j + 1].1) {
            j += 1;
            if chars[j].1 != '.' {
                strong = true;
            }
        }
        let mut k = j;
        while k + 1 < n && is_closer(chars[k + 1].1) {
            k += 1;
        }
        let mut w = k;
        while w + 1 < n && chars[w + 1].1.is_whitespace() {
            w += 1;
        }
        let at_end = w + 1 >= n;
        let mut boundary = at_end || w > k;
        if boundary && !strong {
            if i == j {
                let word = word_before(text, cluster_start);
                let lower = word.to_lowercase();
                if ABBREVIATIONS.contains(&lower.as_str()) || is_initial(word) {
                    boundary = false;
                }
            }
            if boundary && !at_end && chars[w + 1].1.is_lowercase() {
                boundary = false;
            }
        }
        if !boundary {
            i = k + 1;
            continue;
        }
        let text_end = chars[k].0 + chars[k].1.len_utf8();
        let sep_end = if at_end { text.len() } else { chars[w + 1].0 };
        segs.push(Segment {
            kind: SegmentKind::Sentence,
            text: text[seg_start..text_end].to_string(),
            trailing_separator: text[text_end..sep_end].to_string(),
            start_offset: seg_start,
        });
        seg_start = sep_end;
        i = w + 1;
    }
    if seg_start < text.len() {
        let rest = &text[seg_start..];
        let trimmed = rest.trim_end();
        if trimmed.is_empty() {
            match segs.last_mut() {
                Some(last) => last.trailing_separator.push_str(rest),
                None => segs.push(Segment {
                    kind: SegmentKind::Sentence,
                    text: rest.to_string(),
                    trailing_separator: String::new(),
                    start_offset: seg_start,
                }),
            }
        } else {
            segs.push(Segment {
                kind: SegmentKind::Sentence,
                text: trimmed.to_string(),
                trailing_separator: rest[trimmed.len()..].to_string(),
                start_offset: seg_start,
            });
        }
    }
    segs
}
