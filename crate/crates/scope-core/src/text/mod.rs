//! Text model: lossless section, paragraph and sentence segmentation.
//!
//! Every splitter records the separator it consumed, so concatenating
//! `text + trailing_separator` over the segments reproduces the parent
//! byte for byte. That property is what lets the pipeline reassemble
//! compressed chunks without inventing or losing whitespace.

mod sentences;
mod tokenizer;

pub use sentences::split_sentences;
pub use tokenizer::{count_tokens, default_tokenizer, Tokenizer, TokenizerRef, WordTokenizer};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Section,
    Paragraph,
    Sentence,
}

/// One piece of a parent text plus the separator that followed it.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub text: String,
    pub trailing_separator: String,
    /// Byte offset of this segment in the parent text.
    pub start_offset: usize,
}

impl Segment {
    /// Reassemble segments into the parent text.
    pub fn join(segments: &[Segment]) -> String {
        let mut out = String::new();
        for s in segments {
            out.push_str(&s.text);
            out.push_str(&s.trailing_separator);
        }
        out
    }
}

/// Split on blank-line runs (two or more consecutive newlines) and
/// markdown-style heading lines. Leading whitespace of the input stays on the
/// first segment so nothing is dropped.
pub fn split_sections(text: &str) -> Vec<Segment> {
    split_blocks(text, SegmentKind::Section, true)
}

/// Split on blank-line runs only.
pub fn split_paragraphs(text: &str) -> Vec<Segment> {
    split_blocks(text, SegmentKind::Paragraph, false)
}

fn is_heading(line: &str) -> bool {
    let trimmed = line.trim_start_matches(' ');
    if line.len() - trimmed.len() > 3 {
        return false;
    }
    let hashes = trimmed.bytes().take_while(|&b| b == b'#').count();
    (1..=6).contains(&hashes)
        && matches!(trimmed.as_bytes().get(hashes), Some(b' ') | Some(b'\t'))
}

/// Offsets (exclusive of 0 and len) where a new block starts.
fn block_starts(text: &str, headings: bool) -> Vec<usize> {
    let bytes = text.as_bytes();
    let mut starts = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\n' {
            let run_start = i;
            while i < bytes.len() && bytes[i] == b'\n' {
                i += 1;
            }
            if i - run_start >= 2 && i < bytes.len() {
                starts.push(i);
            }
        } else {
            i += 1;
        }
    }
    if headings {
        let mut line_start = 0;
        while line_start < text.len() {
            let line_end = text[line_start..]
                .find('\n')
                .map(|p| line_start + p)
                .unwrap_or(text.len());
            if line_start > 0 && is_heading(&text[line_start..line_end]) {
                starts.push(line_start);
            }
            line_start = line_end + 1;
        }
    }
    starts.sort_unstable();
    starts.dedup();
    starts
}

fn split_blocks(text: &str, kind: SegmentKind, headings: bool) -> Vec<Segment> {
    if text.is_empty() {
        return Vec::new();
    }
    let mut boundaries = block_starts(text, headings);
    boundaries.push(text.len());
    let mut segs: Vec<Segment> = Vec::new();
    let mut pending_start = 0usize;
    for end in boundaries {
        if end <= pending_start {
            continue;
        }
        let span = &text[pending_start..end];
        let trimmed = span.trim_end();
        if trimmed.is_empty() {
            // Whitespace-only span: glue onto the previous separator, or let
            // it ride into the next span when there is no previous segment.
            if let Some(last) = segs.last_mut() {
                last.trailing_separator.push_str(span);
                pending_start = end;
            }
            continue;
        }
        segs.push(Segment {
            kind,
            text: trimmed.to_string(),
            trailing_separator: span[trimmed.len()..].to_string(),
            start_offset: pending_start,
        });
        pending_start = end;
    }
    if segs.is_empty() {
        // Whitespace-only input: one degenerate segment keeps joins lossless.
        segs.push(Segment {
            kind,
            text: text.to_string(),
            trailing_separator: String::new(),
            start_offset: 0,
        });
    }
    segs
}
