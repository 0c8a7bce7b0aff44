//! Intent classification by word-vector summation and cosine similarity.
//!
//! A sentence vector is the element-wise sum of the vectors of its
//! in-vocabulary tokens. An utterance takes the intent of the most similar
//! training utterance, provided that similarity reaches the threshold.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::Serialize;

use crate::ner::{recognize, substitute_placeholders, Entity, EntityType, Gazetteer, NowClock};

pub const DEFAULT_THRESHOLD: f64 = 0.70;
const TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NluError {
    #[error("vector file line {line}: {reason}")]
    Vectors { line: usize, reason: String },
    #[error("training data: {0}")]
    Training(String),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
}

/// Word -> vector lookup; words are stored lowercased.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    dimension: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl WordVectorTable {
    pub fn new(dimension: usize) -> Self {
        WordVectorTable {
            dimension,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, word: &str, vector: Vec<f64>) -> Result<(), NluError> {
        if vector.len() != self.dimension {
            return Err(NluError::Vectors {
                line: 0,
                reason: format!("{word} has {} components, expected {}", vector.len(), self.dimension),
            });
        }
        self.entries.insert(word.to_lowercase(), vector);
        Ok(())
    }

    /// Reads the plain-text format: a `V D` header, then `word x1 .. xD`.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, NluError> {
        let mut lines = reader.lines().enumerate();
        let bad = |line: usize, reason: String| NluError::Vectors { line, reason };
        let (_, header) = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?;
        let header = header.map_err(|e| bad(1, e.to_string()))?;
        let mut fields = header.split_whitespace();
        let parse = |s: Option<&str>| s.and_then(|v| v.parse::<usize>().ok());
        let (count, dimension) = match (parse(fields.next()), parse(fields.next())) {
            (Some(v), Some(d)) if d > 0 => (v, d),
            _ => return Err(bad(1, format!("header {header:?} is not `V D`"))),
        };
        let mut table = WordVectorTable::new(dimension);
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line.map_err(|e| bad(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().unwrap();
            let vector = parts
                .map(|x| x.parse::<f64>().map_err(|e| bad(line_no, format!("{x:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if vector.len() != dimension {
                return Err(bad(
                    line_no,
                    format!("{word} has {} components, expected {dimension}", vector.len()),
                ));
            }
            table.entries.insert(word.to_lowercase(), vector);
        }
        if table.entries.len() != count {
            return Err(bad(
                1,
                format!("header announces {count} words, found {}", table.entries.len()),
            ));
        }
        Ok(table)
    }

    pub fn write<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.entries.len(), self.dimension)?;
        let sorted: BTreeMap<&String, &Vec<f64>> = self.entries.iter().collect();
        for (word, vector) in sorted {
            write!(out, "{word}")?;
            for x in vector {
                write!(out, " {x:.6}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Copy with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        WordVectorTable {
            dimension: self.dimension,
            entries: self
                .entries
                .iter()
                .map(|(w, v)| (w.clone(), v.iter().map(|x| x * factor).collect()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceVector {
    pub components: Vec<f64>,
    pub contributing_tokens: usize,
    pub skipped_tokens: usize,
}

impl SentenceVector {
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|x| *x == 0.0)
    }
}

/// Sums the vectors of in-vocabulary tokens; unknown tokens are skipped.
pub fn embed<S: AsRef<str>>(tokens: &[S], table: &WordVectorTable) -> SentenceVector {
    let mut components = vec![0.0; table.dimension];
    let mut contributing_tokens = 0;
    let mut skipped_tokens = 0;
    for token in tokens {
        match table.get(&token.as_ref().to_lowercase()) {
            Some(v) => {
                for (acc, x) in components.iter_mut().zip(v) {
                    *acc += x;
                }
                contributing_tokens += 1;
            }
            None => skipped_tokens += 1,
        }
    }
    SentenceVector {
        components,
        contributing_tokens,
        skipped_tokens,
    }
}

pub fn cosine(a: &SentenceVector, b: &SentenceVector) -> Result<f64, NluError> {
    let dot: f64 = a.components.iter().zip(&b.components).map(|(x, y)| x * y).sum();
    let norm_a = a.components.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.components.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(NluError::ZeroVector);
    }
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// Lowercases, drops apostrophes, turns other punctuation into spaces and
/// splits on whitespace. Placeholder tokens survive unchanged.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| !matches!(c, '\'' | '’'))
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// Tokens of `utterance` with entity spans replaced by placeholders.
pub fn prepare(utterance: &str, entities: &[Entity]) -> Vec<String> {
    tokenize(&substitute_placeholders(utterance, entities))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingUtterance {
    pub intent_id: String,
    /// Placeholder-substituted template text.
    pub text: String,
    pub tokens: Vec<String>,
    #[serde(skip)]
    pub vector: SentenceVector,
}

/// Intent id -> templates. Entity slots are written `{placeholder}`, e.g.
/// `which commits fixed {issuekey}`.
pub type TrainingFile = BTreeMap<String, Vec<String>>;

pub fn read_training_file<R: BufRead>(reader: R) -> Result<TrainingFile, NluError> {
    serde_json::from_reader(reader).map_err(|e| NluError::Training(e.to_string()))
}

/// Converts `{placeholder}` slots to bare placeholder tokens and lets the
/// recognizer substitute closed-class words (statuses, commit kinds, ...).
fn normalize_template(template: &str) -> Result<String, NluError> {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| NluError::Training(format!("unclosed slot in {template:?}")))?;
        let slot = &rest[open + 1..open + close];
        let entity = EntityType::from_placeholder(slot)
            .ok_or_else(|| NluError::Training(format!("unknown slot {{{slot}}} in {template:?}")))?;
        out.push_str(&rest[..open]);
        out.push_str(entity.placeholder());
        rest = &rest[open + close + 1..];
    }
    out.push_str(rest);
    let entities = recognize(&out, &Gazetteer::default(), NowClock::system()).unwrap_or_default();
    Ok(substitute_placeholders(&out, &entities))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntentPrediction {
    pub intent_id: String,
    pub score: f64,
    pub best_match: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Classification {
    Intent(IntentPrediction),
    /// Below threshold or nothing in vocabulary. `nearest` is the best
    /// candidate, if any could be scored.
    Fallback { nearest: Option<IntentPrediction> },
}

impl Classification {
    pub fn intent(&self) -> Option<&IntentPrediction> {
        match self {
            Classification::Intent(p) => Some(p),
            Classification::Fallback { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntentClassifier {
    table: WordVectorTable,
    training: Vec<TrainingUtterance>,
    threshold: f64,
}

impl IntentClassifier {
    pub fn new(table: WordVectorTable, training: &TrainingFile, threshold: f64) -> Result<Self, NluError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(NluError::Training(format!("threshold {threshold} outside (0, 1]")));
        }
        let mut utterances = Vec::new();
        for (intent_id, templates) in training {
            for template in templates {
                let text = normalize_template(template)?;
                let tokens = tokenize(&text);
                let vector = embed(&tokens, &table);
                if vector.is_zero() {
                    return Err(NluError::Training(format!(
                        "template {template:?} of {intent_id} has no in-vocabulary token"
                    )));
                }
                utterances.push(TrainingUtterance {
                    intent_id: intent_id.clone(),
                    text: tokens.join(" "),
                    tokens,
                    vector,
                });
            }
        }
        if utterances.is_empty() {
            return Err(NluError::Training("no training utterances".into()));
        }
        Ok(IntentClassifier {
            table,
            training: utterances,
            threshold,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn table(&self) -> &WordVectorTable {
        &self.table
    }

    pub fn training(&self) -> &[TrainingUtterance] {
        &self.training
    }

    pub fn intents(&self) -> BTreeSet<&str> {
        self.training.iter().map(|t| t.intent_id.as_str()).collect()
    }

    /// Scores the utterance against every training utterance.
    pub fn classify(&self, utterance: &str, entities: &[Entity]) -> Classification {
        let tokens = prepare(utterance, entities);
        self.classify_tokens(&tokens)
    }

    pub fn classify_tokens(&self, tokens: &[String]) -> Classification {
        let query = embed(tokens, &self.table);
        if query.is_zero() {
            return Classification::Fallback { nearest: None };
        }
        let query_tokens: BTreeSet<&str> = tokens.iter().map(String::as_str).collect();
        let shared = |t: &TrainingUtterance| {
            t.tokens
                .iter()
                .map(String::as_str)
                .collect::<BTreeSet<_>>()
                .intersection(&query_tokens)
                .count()
        };

        // (score, shared tokens, utterance) for the best match of each intent
        let mut best: BTreeMap<&str, (f64, usize, &TrainingUtterance)> = BTreeMap::new();
        for t in &self.training {
            let Ok(score) = cosine(&query, &t.vector) else { continue };
            let overlap = shared(t);
            let entry = best.entry(&t.intent_id).or_insert((score, overlap, t));
            if score > entry.0 + TIE_EPSILON || ((score - entry.0).abs() <= TIE_EPSILON && overlap > entry.1) {
                *entry = (score, overlap, t);
            }
        }

        // BTreeMap iteration is by intent id, so a strict comparison keeps the
        // smallest id among full ties.
        let mut winner: Option<(f64, usize, &TrainingUtterance)> = None;
        for candidate in best.into_values() {
            let better = match winner {
                None => true,
                Some((score, overlap, _)) => {
                    candidate.0 > score + TIE_EPSILON
                        || ((candidate.0 - score).abs() <= TIE_EPSILON && candidate.1 > overlap)
                }
            };
            if better {
                winner = Some(candidate);
            }
        }
        let Some((score, _, matched)) = winner else {
            return Classification::Fallback { nearest: None };
        };
        let prediction = IntentPrediction {
            intent_id: matched.intent_id.clone(),
            score,
            best_match: matched.text.clone(),
        };
        if score < self.threshold {
            Classification::Fallback {
                nearest: Some(prediction),
            }
        } else {
            Classification::Intent(prediction)
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct NluReport {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Intent -> (correct, total).
    pub per_intent: BTreeMap<String, (usize, usize)>,
    /// Gold intent -> predicted intent (or "fallback") -> count.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
    pub misses: Vec<(String, String, String)>,
}

/// Top-1 accuracy over a held-out file of natural utterances.
pub fn evaluate_nlu(
    classifier: &IntentClassifier,
    heldout: &TrainingFile,
    gazetteer: &Gazetteer,
    clock: NowClock,
) -> NluReport {
    let mut report = NluReport::default();
    for (gold, utterances) in heldout {
        for utterance in utterances {
            let entities = recognize(utterance, gazetteer, clock).unwrap_or_default();
            let predicted = match classifier.classify(utterance, &entities) {
                Classification::Intent(p) => p.intent_id,
                Classification::Fallback { .. } => "fallback".to_string(),
            };
            let hit = predicted == *gold;
            report.total += 1;
            let slot = report.per_intent.entry(gold.clone()).or_default();
            slot.1 += 1;
            if hit {
                report.correct += 1;
                slot.0 += 1;
            } else {
                report.misses.push((gold.clone(), predicted.clone(), utterance.clone()));
            }
            *report
                .confusion
                .entry(gold.clone())
                .or_default()
                .entry(predicted)
                .or_default() += 1;
        }
    }
    report.accuracy = if report.total == 0 {
        0.0
    } else {
        report.correct as f64 / report.total as f64
    };
    report
}
