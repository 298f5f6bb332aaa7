//! Token counting.
//!
//! The tokenizer is a swappable component because every length budget in the
//! pipeline is expressed in its units; the default [`WordTokenizer`] is also
//! what the bundled local summarizer uses internally, so generation budgets
//! and plan targets line up exactly.

use std::sync::Arc;

/// Shared tokenizer handle threaded through the pipeline.
pub type TokenizerRef = Arc<dyn Tokenizer>;

pub trait Tokenizer: Send + Sync {
    /// Number of tokens in `text`. Zero iff the text has no token characters
    /// (empty or all whitespace).
    fn count(&self, text: &str) -> usize;

    /// Byte length of the shortest prefix of `text` containing
    /// `min(max_tokens, count(text))` whole tokens. Trailing whitespace is
    /// never included, so re-counting the prefix gives back that number.
    fn prefix_bytes(&self, text: &str, max_tokens: usize) -> usize;

    /// Short identifier recorded in run reports.
    fn name(&self) -> &'static str;

    /// Prefix slice of `text` covering at most `max_tokens` tokens.
    fn truncate<'a>(&self, text: &'a str, max_tokens: usize) -> &'a str {
        &text[..self.prefix_bytes(text, max_tokens)]
    }
}

/// Counts maximal alphanumeric runs as one token each and every other
/// non-whitespace character as its own token. "hello world" is 2 tokens,
/// "世界!" is 3 (two ideographs plus the mark).
///
/// Counts are additive across pieces joined at whitespace, which is what the
/// exact-ratio contract of the stub pipeline relies on.
#[derive(Debug, Default, Clone, Copy)]
pub struct WordTokenizer;

impl WordTokenizer {
    fn is_word_char(c: char) -> bool {
        c.is_alphanumeric()
    }
}

impl Tokenizer for WordTokenizer {
    fn count(&self, text: &str) -> usize {
        let mut tokens = 0;
        let mut in_word = false;
        for c in text.chars() {
            if Self::is_word_char(c) {
                if !in_word {
                    tokens += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    tokens += 1;
                }
            }
        }
        tokens
    }

    fn prefix_bytes(&self, text: &str, max_tokens: usize) -> usize {
        if max_tokens == 0 {
            return 0;
        }
        let mut tokens = 0;
        let mut in_word = false;
        let mut end = 0;
        for (i, c) in text.char_indices() {
            if Self::is_word_char(c) {
                if !in_word {
                    if tokens == max_tokens {
                        return end;
                    }
                    tokens += 1;
                    in_word = true;
                }
                end = i + c.len_utf8();
            } else {
                in_word = false;
                if c.is_whitespace() {
                    continue;
                }
                if tokens == max_tokens {
                    return end;
                }
                tokens += 1;
                end = i + c.len_utf8();
            }
        }
        end
    }

    fn name(&self) -> &'static str {
        "word"
    }
}

/// Count under the crate default tokenizer.
pub fn count_tokens(tokenizer: &dyn Tokenizer, text: &str) -> usize {
    tokenizer.count(text)
}

/// The default tokenizer (the local summarizer's own).
pub fn default_tokenizer() -> TokenizerRef {
    Arc::new(WordTokenizer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_plain_words() {
        let t = WordTokenizer;
        assert_eq!(t.count("hello world"), 2);
        assert_eq!(t.count(""), 0);
        assert_eq!(t.count("   \n\t "), 0);
        assert_eq!(t.count("one"), 1);
    }

    #[test]
    fn punctuation_is_its_own_token() {
        let t = WordTokenizer;
        assert_eq!(t.count("wait, what?"), 4);
        assert_eq!(t.count("a.b"), 3);
        assert_eq!(t.count("don't"), 3);
    }

    #[test]
    fn count_is_zero_only_for_blank_text() {
        let t = WordTokenizer;
        assert!(t.count(".") > 0);
        assert!(t.count("~") > 0);
        assert_eq!(t.count(" \u{a0} "), 0);
    }

    #[test]
    fn truncate_cuts_at_token_boundaries() {
        let t = WordTokenizer;
        assert_eq!(t.truncate("alpha beta gamma", 2), "alpha beta");
        assert_eq!(t.truncate("alpha beta gamma", 0), "");
        assert_eq!(t.truncate("alpha beta", 10), "alpha beta");
        assert_eq!(t.truncate("a, b", 2), "a,");
        assert_eq!(t.count(t.truncate("alpha beta gamma", 2)), 2);
    }

    #[test]
    fn truncate_handles_multibyte_text() {
        let t = WordTokenizer;
        let s = "héllo wörld done";
        assert_eq!(t.truncate(s, 2), "héllo wörld");
        assert_eq!(t.count(t.truncate(s, 1)), 1);
    }

    #[test]
    fn doubling_nonempty_text_never_shrinks_count() {
        let t = WordTokenizer;
        for s in ["ab", "a b", " a", "x, y ", "..", "é"] {
            let doubled = format!("{s}{s}");
            assert!(t.count(&doubled) >= t.count(s), "failed for {s:?}");
        }
    }

    #[test]
    fn counts_add_up_across_whitespace_joins() {
        let t = WordTokenizer;
        let a = "first piece, done";
        let b = "second piece";
        let joined = format!("{a}\n\n{b}");
        assert_eq!(t.count(&joined), t.count(a) + t.count(b));
    }
}
