//! Downstream evaluation: compress each record's context, prompt an answer
//! model, and score predictions against references.
//!
//! The metrics are self-contained reimplementations of the standard
//! definitions: ROUGE-1/2/L/Lsum with the usual lowercase alphanumeric
//! tokenizer and no stemming (Lsum is the summary-level union-LCS variant
//! with token clipping, matching the google-research scorer), corpus BLEU
//! per Papineni et al. with up to 4-grams and brevity penalty, and SQuAD
//! token F1. Keeping them in-crate avoids a model-sized dependency for what
//! is a few hundred lines of counting.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backends::{
    cosine_similarity, embed_texts, summarize, BackendHandle, SummaryRequest,
};
use crate::error::{Result, ScopeError};
use crate::pipeline::{compress, RunConfig};

/// Lowercase, then split on anything that is not an ASCII letter or digit.
/// Shared by ROUGE and BLEU.
pub(crate) fn rouge_tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn f_measure(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_overlap(pred: &HashMap<&[String], usize>, refr: &HashMap<&[String], usize>) -> usize {
    pred.iter()
        .map(|(gram, count)| (*count).min(*refr.get(gram).unwrap_or(&0)))
        .sum()
}

fn rouge_n(pred: &[String], refr: &[String], n: usize) -> f64 {
    let pred_grams = ngram_counts(pred, n);
    let ref_grams = ngram_counts(refr, n);
    let pred_total: usize = pred_grams.values().sum();
    let ref_total: usize = ref_grams.values().sum();
    let inter = clipped_overlap(&pred_grams, &ref_grams) as f64;
    let p = if pred_total > 0 {
        inter / pred_total as f64
    } else {
        0.0
    };
    let r = if ref_total > 0 {
        inter / ref_total as f64
    } else {
        0.0
    };
    f_measure(p, r)
}

fn lcs_table(a: &[String], b: &[String]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t
}

fn rouge_l(pred: &[String], refr: &[String]) -> f64 {
    if pred.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let lcs = lcs_table(refr, pred)[refr.len()][pred.len()] as f64;
    f_measure(lcs / pred.len() as f64, lcs / refr.len() as f64)
}

/// Indices of `refr` tokens on one LCS backtrace against `cand`, stepping up
/// the reference side on ties.
fn lcs_ref_indices(refr: &[String], cand: &[String]) -> HashSet<usize> {
    let t = lcs_table(refr, cand);
    let mut ids = HashSet::new();
    let (mut i, mut j) = (refr.len(), cand.len());
    while i > 0 && j > 0 {
        if refr[i - 1] == cand[j - 1] {
            ids.insert(i - 1);
            i -= 1;
            j -= 1;
        } else if t[i - 1][j] >= t[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    ids
}

/// Summary-level ROUGE-L: sentences are newline-separated, each reference
/// sentence contributes the union of its LCS matches against every
/// prediction sentence, and hits are clipped by global token counts.
fn rouge_lsum(pred_text: &str, ref_text: &str) -> f64 {
    let split = |text: &str| -> Vec<Vec<String>> {
        text.split('\n')
            .map(rouge_tokenize)
            .filter(|s| !s.is_empty())
            .collect()
    };
    let pred_sents = split(pred_text);
    let ref_sents = split(ref_text);
    let pred_total: usize = pred_sents.iter().map(Vec::len).sum();
    let ref_total: usize = ref_sents.iter().map(Vec::len).sum();
    if pred_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let mut cnt_pred: HashMap<&str, i64> = HashMap::new();
    for tok in pred_sents.iter().flatten() {
        *cnt_pred.entry(tok).or_insert(0) += 1;
    }
    let mut cnt_ref: HashMap<&str, i64> = HashMap::new();
    for tok in ref_sents.iter().flatten() {
        *cnt_ref.entry(tok).or_insert(0) += 1;
    }
    let mut hits = 0usize;
    for refr in &ref_sents {
        let mut union: HashSet<usize> = HashSet::new();
        for cand in &pred_sents {
            union.extend(lcs_ref_indices(refr, cand));
        }
        for (idx, tok) in refr.iter().enumerate() {
            if !union.contains(&idx) {
                continue;
            }
            let c = cnt_pred.get_mut(tok.as_str()).expect("token was counted");
            let r = cnt_ref.get_mut(tok.as_str()).expect("token was counted");
            if *c > 0 && *r > 0 {
                hits += 1;
                *c -= 1;
                *r -= 1;
            }
        }
    }
    f_measure(
        hits as f64 / pred_total as f64,
        hits as f64 / ref_total as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RougeScores {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub rouge_lsum: f64,
}

pub fn rouge_scores(prediction: &str, reference: &str) -> RougeScores {
    let pred = rouge_tokenize(prediction);
    let refr = rouge_tokenize(reference);
    RougeScores {
        rouge1: rouge_n(&pred, &refr, 1),
        rouge2: rouge_n(&pred, &refr, 2),
        rouge_l: rouge_l(&pred, &refr),
        rouge_lsum: rouge_lsum(prediction, reference),
    }
}

/// Corpus BLEU on a 0..100 scale: clipped 1..4-gram counts pooled over the
/// corpus, geometric mean, brevity penalty. Returns 0.0 whenever any pooled
/// numerator or denominator is zero, so short corpora degrade to zero rather
/// than exploding.
pub fn corpus_bleu<P: AsRef<str>, R: AsRef<str>>(
    predictions: &[P],
    references: &[R],
) -> Result<f64> {
    if predictions.len() != references.len() {
        return Err(ScopeError::Input(format!(
            "corpus BLEU needs parallel lists, got {} predictions for {} references",
            predictions.len(),
            references.len()
        )));
    }
    let mut num = [0usize; 4];
    let mut den = [0usize; 4];
    let (mut pred_len, mut ref_len) = (0usize, 0usize);
    for (pred, refr) in predictions.iter().zip(references) {
        let pt = rouge_tokenize(pred.as_ref());
        let rt = rouge_tokenize(refr.as_ref());
        pred_len += pt.len();
        ref_len += rt.len();
        for n in 1..=4 {
            let pred_grams = ngram_counts(&pt, n);
            let ref_grams = ngram_counts(&rt, n);
            num[n - 1] += clipped_overlap(&pred_grams, &ref_grams);
            den[n - 1] += pred_grams.values().sum::<usize>();
        }
    }
    if pred_len == 0 || num.contains(&0) || den.contains(&0) {
        return Ok(0.0);
    }
    let log_p: f64 = (0..4)
        .map(|i| 0.25 * (num[i] as f64 / den[i] as f64).ln())
        .sum();
    let bp = if pred_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / pred_len as f64).exp()
    };
    Ok(100.0 * bp * log_p.exp())
}

/// SQuAD answer normalization: lowercase, strip ASCII punctuation, drop the
/// articles a/an/the, split on whitespace.
fn squad_tokens(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    stripped
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(String::from)
        .collect()
}

/// Bag-of-tokens F1 over normalized answers. Two empty answers count as a
/// perfect match; one empty answer scores zero.
pub fn token_f1(prediction: &str, reference: &str) -> f64 {
    let pred = squad_tokens(prediction);
    let refr = squad_tokens(reference);
    if pred.is_empty() || refr.is_empty() {
        return if pred == refr { 1.0 } else { 0.0 };
    }
    let mut remaining: HashMap<&str, usize> = HashMap::new();
    for tok in &refr {
        *remaining.entry(tok).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for tok in &pred {
        if let Some(count) = remaining.get_mut(tok.as_str()) {
            if *count > 0 {
                overlap += 1;
                *count -= 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    f_measure(
        overlap as f64 / pred.len() as f64,
        overlap as f64 / refr.len() as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Qa,
    Summarization,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Qa => "qa",
            TaskKind::Summarization => "summarization",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    pub reference: String,
    pub task: TaskKind,
}

/// Read a JSONL corpus. Blank lines are skipped; any malformed or incomplete
/// record aborts with its line number.
pub fn read_jsonl(path: &Path) -> Result<Vec<EvalRecord>> {
    let raw = fs::read_to_string(path)
        .map_err(|e| ScopeError::Input(format!("{}: {e}", path.display())))?;
    parse_jsonl(&raw)
}

pub fn parse_jsonl(raw: &str) -> Result<Vec<EvalRecord>> {
    let mut records = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let record: EvalRecord = serde_json::from_str(line)
            .map_err(|e| ScopeError::Input(format!("corpus line {lineno}: {e}")))?;
        validate_record(&record)
            .map_err(|detail| ScopeError::Input(format!("corpus line {lineno}: {detail}")))?;
        records.push(record);
    }
    Ok(records)
}

fn validate_record(record: &EvalRecord) -> std::result::Result<(), String> {
    if record.id.trim().is_empty() {
        return Err("empty id".into());
    }
    if record.context.trim().is_empty() {
        return Err(format!("record {:?} has an empty context", record.id));
    }
    if record.reference.trim().is_empty() {
        return Err(format!("record {:?} has an empty reference", record.id));
    }
    if record.task == TaskKind::Qa
        && record.question.as_deref().map_or(true, |q| q.trim().is_empty())
    {
        return Err(format!("qa record {:?} has no question", record.id));
    }
    Ok(())
}

/// Prompt templates with `{context}` and `{question}` placeholders.
/// Placeholder values are inserted verbatim and never rescanned.
#[derive(Debug, Clone)]
pub struct PromptTemplates {
    pub qa: String,
    pub summarization: String,
}

impl Default for PromptTemplates {
    fn default() -> PromptTemplates {
        PromptTemplates {
            qa: "Answer the question using only the context.\n\n\
                 Context: {context}\n\nQuestion: {question}\n\nAnswer:"
                .into(),
            summarization: "Summarize the following text.\n\n{context}\n\nSummary:".into(),
        }
    }
}

impl PromptTemplates {
    pub fn render(&self, record: &EvalRecord, context: &str) -> Result<String> {
        match record.task {
            TaskKind::Qa => {
                let question = record
                    .question
                    .as_deref()
                    .filter(|q| !q.trim().is_empty())
                    .ok_or_else(|| {
                        ScopeError::Input(format!("qa record {:?} has no question", record.id))
                    })?;
                Ok(fill(
                    &self.qa,
                    &[("context", context), ("question", question)],
                ))
            }
            TaskKind::Summarization => Ok(fill(&self.summarization, &[("context", context)])),
        }
    }
}

fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        if let Some(len) = rest[start..].find('}') {
            let key = &rest[start + 1..start + len];
            if let Some((_, value)) = vars.iter().find(|(k, _)| *k == key) {
                out.push_str(&rest[..start]);
                out.push_str(value);
                rest = &rest[start + len + 1..];
                continue;
            }
        }
        out.push_str(&rest[..=start]);
        rest = &rest[start + 1..];
    }
    out.push_str(rest);
    out
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Context compression applied before prompting.
    pub run: RunConfig,
    /// Model that answers the rendered prompt.
    pub llm: BackendHandle,
    pub templates: PromptTemplates,
    /// Token budget for each answer.
    pub answer_tokens: usize,
    /// Evaluate a seeded random subset of this size, keeping corpus order.
    pub sample: Option<usize>,
    pub seed: u64,
    /// Optional embedder adding an embedding-cosine column.
    pub semantic: Option<BackendHandle>,
}

impl EvalConfig {
    pub fn new(run: RunConfig, llm: BackendHandle) -> EvalConfig {
        EvalConfig {
            run,
            llm,
            templates: PromptTemplates::default(),
            answer_tokens: 64,
            sample: None,
            seed: 0,
            semantic: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RecordScore {
    pub id: String,
    pub task: TaskKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub token_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge: Option<RougeScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semantic_sim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub schema: &'static str,
    pub rho: f64,
    pub llm: String,
    pub evaluated: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_achieved_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_token_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rouge1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rouge2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rouge_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rouge_lsum: Option<f64>,
    /// Pooled over successful summarization records.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_bleu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_semantic_sim: Option<f64>,
    pub records: Vec<RecordScore>,
}

pub const EVAL_SCHEMA: &str = "scope-eval/1";

/// Evaluate a corpus. Per-record failures (compression, prompting, or the
/// answer model) are recorded on the row and excluded from the aggregates;
/// only configuration problems abort the run.
pub fn run_eval(corpus: &[EvalRecord], cfg: &EvalConfig) -> Result<MetricReport> {
    cfg.llm.summarizer()?;
    if let Some(handle) = &cfg.semantic {
        handle.embedder()?;
    }
    if cfg.answer_tokens == 0 {
        return Err(ScopeError::Config("answer budget of 0 tokens".into()));
    }

    let selected = select_records(corpus, cfg.sample, cfg.seed);
    let mut records = Vec::with_capacity(selected.len());
    let mut bleu_pred: Vec<String> = Vec::new();
    let mut bleu_ref: Vec<String> = Vec::new();
    let mut failed = 0usize;

    for record in selected {
        match eval_record(record, cfg) {
            Ok((score, prediction)) => {
                if record.task == TaskKind::Summarization {
                    bleu_pred.push(prediction);
                    bleu_ref.push(record.reference.clone());
                }
                records.push(score);
            }
            Err(err) => {
                failed += 1;
                records.push(RecordScore {
                    id: record.id.clone(),
                    task: record.task,
                    achieved_ratio: None,
                    token_f1: None,
                    rouge: None,
                    semantic_sim: None,
                    error: Some(err.to_string()),
                });
            }
        }
    }

    let collect = |get: &dyn Fn(&RecordScore) -> Option<f64>| -> Vec<f64> {
        records.iter().filter_map(get).collect()
    };
    let bleu = if bleu_pred.is_empty() {
        None
    } else {
        Some(corpus_bleu(&bleu_pred, &bleu_ref)?)
    };
    Ok(MetricReport {
        schema: EVAL_SCHEMA,
        rho: cfg.run.rho,
        llm: cfg.llm.spec.clone(),
        evaluated: records.len() - failed,
        failed,
        mean_achieved_ratio: mean(&collect(&|r| r.achieved_ratio)),
        mean_token_f1: mean(&collect(&|r| r.token_f1)),
        mean_rouge1: mean(&collect(&|r| r.rouge.map(|s| s.rouge1))),
        mean_rouge2: mean(&collect(&|r| r.rouge.map(|s| s.rouge2))),
        mean_rouge_l: mean(&collect(&|r| r.rouge.map(|s| s.rouge_l))),
        mean_rouge_lsum: mean(&collect(&|r| r.rouge.map(|s| s.rouge_lsum))),
        corpus_bleu: bleu,
        mean_semantic_sim: mean(&collect(&|r| r.semantic_sim)),
        records,
    })
}

fn eval_record(record: &EvalRecord, cfg: &EvalConfig) -> Result<(RecordScore, String)> {
    validate_record(record).map_err(ScopeError::Input)?;
    let mut run = cfg.run.clone();
    run.report_path = None;
    let compressed = compress(&record.context, &run)?;
    let prompt = cfg.templates.render(record, &compressed.compressed_text)?;
    let request = SummaryRequest {
        text: prompt,
        target_tokens: cfg.answer_tokens,
        min_tokens: 1,
        keywords: Vec::new(),
    };
    let prediction = summarize(&cfg.llm, &request)?;
    let semantic_sim = match &cfg.semantic {
        Some(handle) => Some(semantic_similarity(handle, &prediction, &record.reference)?),
        None => None,
    };
    let mut score = RecordScore {
        id: record.id.clone(),
        task: record.task,
        achieved_ratio: Some(compressed.achieved_ratio),
        token_f1: None,
        rouge: None,
        semantic_sim,
        error: None,
    };
    match record.task {
        TaskKind::Qa => score.token_f1 = Some(token_f1(&prediction, &record.reference)),
        TaskKind::Summarization => {
            score.rouge = Some(rouge_scores(&prediction, &record.reference));
        }
    }
    Ok((score, prediction))
}

fn semantic_similarity(handle: &BackendHandle, prediction: &str, reference: &str) -> Result<f64> {
    if rouge_tokenize(prediction).is_empty() || rouge_tokenize(reference).is_empty() {
        return Ok(0.0);
    }
    let vectors = embed_texts(handle, &[prediction.to_string(), reference.to_string()])?;
    match cosine_similarity(&vectors[0], &vectors[1]) {
        Ok(sim) => Ok(sim.clamp(0.0, 1.0)),
        Err(ScopeError::ZeroVector) => Ok(0.0),
        Err(e) => Err(e),
    }
}

fn select_records<'a>(
    corpus: &'a [EvalRecord],
    sample: Option<usize>,
    seed: u64,
) -> Vec<&'a EvalRecord> {
    let mut indexes: Vec<usize> = (0..corpus.len()).collect();
    if let Some(n) = sample {
        if n < indexes.len() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            indexes.shuffle(&mut rng);
            indexes.truncate(n);
            indexes.sort_unstable();
        }
    }
    indexes.into_iter().map(|i| &corpus[i]).collect()
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// One row per record; empty cells for scores the task does not produce.
pub fn write_csv<W: io::Write>(report: &MetricReport, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "id,task,achieved_ratio,token_f1,rouge1,rouge2,rouge_l,rouge_lsum,semantic_sim,error"
    )?;
    for row in &report.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&row.id),
            row.task.name(),
            csv_num(row.achieved_ratio),
            csv_num(row.token_f1),
            csv_num(row.rouge.map(|s| s.rouge1)),
            csv_num(row.rouge.map(|s| s.rouge2)),
            csv_num(row.rouge.map(|s| s.rouge_l)),
            csv_num(row.rouge.map(|s| s.rouge_lsum)),
            csv_num(row.semantic_sim),
            csv_field(row.error.as_deref().unwrap_or("")),
        )?;
    }
    Ok(())
}

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn csv_num(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}
