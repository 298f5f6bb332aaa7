//! Seeded synthetic documents for tests and benchmarks.
//!
//! Real corpora cannot ship with the crate, so tests build their own:
//! multi-section essays whose paragraphs cluster around topics (giving the
//! embedding backends real similarity structure to find), with names,
//! numbers, and dates sprinkled in for the keyword extractor. Everything is
//! driven by a ChaCha stream, so a seed pins a document byte for byte.

use crate::text::{Tokenizer, WordTokenizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GLUE: &[&str] = &[
    "the", "a", "of", "to", "and", "in", "for", "with", "under", "near",
    "from", "into", "while", "after", "between", "against", "through",
];

const CONTENT: &[&str] = &[
    "survey", "record", "harbor", "signal", "garden", "market", "stone",
    "river", "method", "pattern", "window", "measure", "archive", "bridge",
    "ledger", "furnace", "meadow", "channel", "lantern", "quarry", "orchard",
    "vessel", "compass", "granite", "timber", "current", "station", "village",
    "council", "report", "outline", "terrace", "basin", "ridge", "harvest",
    "winter", "summer", "journey", "account", "passage", "shelter", "milling",
    "trade", "craft", "route", "field", "works", "yield", "survey", "study",
];

const SYLLABLES: &[&str] = &[
    "bar", "den", "fol", "gam", "hil", "jor", "kan", "lum", "mer", "nor",
    "pol", "quin", "ras", "sel", "tor", "vin", "wex", "yul", "zan", "bril",
];

const UNITS: &[&str] = &["samples", "visits", "readings", "cases"];

/// A question planted into a synthetic essay, with its gold answer and the
/// sentence that carries it.
#[derive(Debug, Clone)]
pub struct PlantedFact {
    pub question: String,
    pub answer: String,
    pub sentence: String,
}

/// Deterministic essay of at least `target_tokens` tokens (overshooting by
/// at most one paragraph).
pub fn essay(seed: u64, target_tokens: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    paragraphs(&mut rng, target_tokens).join("\n\n")
}

/// Deterministic essay with one distinctive fact planted in a middle
/// paragraph.
pub fn essay_with_fact(seed: u64, target_tokens: usize) -> (String, PlantedFact) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paras = paragraphs(&mut rng, target_tokens);
    let entity = format!("{} {}", capitalize(&term(&mut rng)), capitalize(&term(&mut rng)));
    let number = rng.gen_range(3..900);
    let unit = UNITS[rng.gen_range(0..UNITS.len())];
    let year = rng.gen_range(1900..2025);
    let sentence =
        format!("The {entity} survey recorded {number} {unit} in {year}.");
    let fact = PlantedFact {
        question: format!("How many {unit} did the {entity} survey record in {year}?"),
        answer: format!("{number} {unit}"),
        sentence: sentence.clone(),
    };
    let slot = paras.len() / 2;
    let host = &mut paras[slot];
    host.push(' ');
    host.push_str(&sentence);
    (paras.join("\n\n"), fact)
}

/// `count` essays with token counts drawn uniformly from the given range.
pub fn corpus(seed: u64, count: usize, min_tokens: usize, max_tokens: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let target = rng.gen_range(min_tokens..=max_tokens);
            essay(seed.wrapping_add(1 + i as u64), target)
        })
        .collect()
}

fn paragraphs(rng: &mut ChaCha8Rng, target_tokens: usize) -> Vec<String> {
    let mut paras: Vec<String> = Vec::new();
    let mut tokens = 0usize;
    let mut topic = topic_terms(rng);
    let mut paras_in_topic = 0usize;
    let mut topic_budget = rng.gen_range(2..5);
    while tokens < target_tokens {
        if paras_in_topic >= topic_budget {
            topic = topic_terms(rng);
            paras_in_topic = 0;
            topic_budget = rng.gen_range(2..5);
            if rng.gen_bool(0.3) {
                let heading = format!("## {}", capitalize(&topic[0]));
                tokens += WordTokenizer.count(&heading);
                paras.push(heading);
            }
        }
        let para = paragraph(rng, &topic);
        tokens += WordTokenizer.count(&para);
        paras.push(para);
        paras_in_topic += 1;
    }
    paras
}

fn paragraph(rng: &mut ChaCha8Rng, topic: &[String]) -> String {
    let n = rng.gen_range(3..=7);
    (0..n)
        .map(|_| sentence(rng, topic))
        .collect::<Vec<_>>()
        .join(" ")
}

fn sentence(rng: &mut ChaCha8Rng, topic: &[String]) -> String {
    let n = rng.gen_range(8..=18);
    let mut words = Vec::with_capacity(n);
    for i in 0..n {
        let roll: f64 = rng.gen();
        let word = if roll < 0.45 {
            topic[rng.gen_range(0..topic.len())].clone()
        } else if roll < 0.80 {
            CONTENT[rng.gen_range(0..CONTENT.len())].to_string()
        } else if roll < 0.95 || i == 0 {
            GLUE[rng.gen_range(0..GLUE.len())].to_string()
        } else if rng.gen_bool(0.5) {
            rng.gen_range(1900..2025).to_string()
        } else {
            format!("{}%", rng.gen_range(1..100))
        };
        words.push(if i == 0 { capitalize(&word) } else { word });
    }
    let terminal = match rng.gen_range(0..20) {
        0 => "?",
        1 => "!",
        _ => ".",
    };
    format!("{}{}", words.join(" "), terminal)
}

fn topic_terms(rng: &mut ChaCha8Rng) -> Vec<String> {
    (0..12).map(|_| term(rng)).collect()
}

fn term(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..=3);
    (0..n)
        .map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())])
        .collect()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn essays_are_deterministic_per_seed() {
        assert_eq!(essay(7, 2000), essay(7, 2000));
        assert_ne!(essay(7, 2000), essay(8, 2000));
    }

    #[test]
    fn token_counts_land_near_target() {
        let tok = WordTokenizer;
        for seed in 0..5 {
            let text = essay(seed, 1500);
            let n = tok.count(&text);
            assert!(n >= 1500, "essay too short: {n}");
            assert!(n <= 1500 + 300, "essay overshot: {n}");
        }
    }

    #[test]
    fn corpus_sizes_stay_in_range() {
        let tok = WordTokenizer;
        for text in corpus(3, 8, 1000, 3000) {
            let n = tok.count(&text);
            assert!((1000..=3300).contains(&n), "corpus essay had {n} tokens");
        }
    }

    #[test]
    fn planted_fact_is_verbatim_and_answerable() {
        let (text, fact) = essay_with_fact(42, 2000);
        assert!(text.contains(&fact.sentence));
        assert!(fact.sentence.contains(&fact.answer));
        assert!(fact.question.ends_with('?'));
        // Same seed, same plant.
        let (text2, fact2) = essay_with_fact(42, 2000);
        assert_eq!(text, text2);
        assert_eq!(fact.question, fact2.question);
    }

    #[test]
    fn essays_have_paragraph_structure() {
        let text = essay(11, 3000);
        assert!(text.contains("\n\n"));
        assert!(!text.ends_with('\n'));
    }
}
