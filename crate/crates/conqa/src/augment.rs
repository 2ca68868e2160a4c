//! Symmetric and transitive example generation with answer relabeling, plus
//! deterministic sampling of the augmented pool.
//!
//! Symmetric rewrites flip a question's polarity three ways: replacing an
//! antonym-dictionary phrase, inserting a negation token at a template site,
//! or removing one. Transitive examples compose two cause-effect questions
//! that share an event into a third question. All offsets are character
//! offsets.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::data::{normalize_text, ConsistencyLink, Dataset, Example, Origin, TaskFormat};
use crate::lexicon::{AntonymLexicon, NegationTemplate, PatternToken};

/// The rewrite operation an augmented question was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOperation {
    AntonymReplace,
    AddNegation,
    RemoveNegation,
}

/// Which clause of the question an edit landed in. `Whole` covers questions
/// without recognizable cause/effect structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    Cause,
    Effect,
    Whole,
}

/// One applied edit: its operation, target clause, and edited character range
/// in the source question (empty range for insertions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditRecord {
    pub operation: EditOperation,
    pub clause: Clause,
    pub span: (usize, usize),
}

/// Augmented examples, the links tying them to their sources, and the edits
/// that produced each example (empty for transitive compositions).
#[derive(Debug, Clone, Default)]
pub struct AugmentationOutput {
    pub examples: Vec<Example>,
    pub links: Vec<ConsistencyLink>,
    pub edits: Vec<Vec<EditRecord>>,
}

impl AugmentationOutput {
    /// Wraps examples and links loaded from disk (no edit provenance).
    pub fn from_parts(examples: Vec<Example>, links: Vec<ConsistencyLink>) -> Self {
        let edits = vec![Vec::new(); examples.len()];
        AugmentationOutput {
            examples,
            links,
            edits,
        }
    }

    pub fn merge(mut self, other: AugmentationOutput) -> AugmentationOutput {
        self.examples.extend(other.examples);
        self.links.extend(other.links);
        self.edits.extend(other.edits);
        self
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("flip count must be 1 or 2, got {0}")]
    BadFlipCount(usize),
    #[error("choice relabeling needs exactly 2 candidates, got {0}")]
    NotTwoCandidates(usize),
}

/// A single text edit in character space.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Splice {
    start: usize,
    end: usize,
    insert: String,
}

fn apply_splices(text: &str, splices: &[&Splice]) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let mut ordered: Vec<&Splice> = splices.to_vec();
    ordered.sort_by_key(|s| std::cmp::Reverse(s.start));
    for s in ordered {
        let insert: Vec<char> = s.insert.chars().collect();
        chars.splice(s.start..s.end, insert);
    }
    chars.into_iter().collect()
}

#[derive(Debug, Clone)]
struct Rewrite {
    splice: Splice,
    record: EditRecord,
}

/// Character ranges of the cause and effect clauses within a question.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ClauseRegions {
    cause: (usize, usize),
    effect: (usize, usize),
}

/// Locates clause regions of an annotated example: first by the
/// `If {cause}, {effect}` surface pattern, then by finding the annotations
/// as substrings. Unannotated examples have no clause structure, so their
/// edits are never clause-targeted.
fn clause_regions(example: &Example) -> Option<ClauseRegions> {
    let (cause, effect) = match (&example.cause, &example.effect) {
        (Some(c), Some(e)) => (c, e),
        _ => return None,
    };
    let chars: Vec<char> = example.question.chars().collect();
    let lower: Vec<char> = chars
        .iter()
        .map(|c| c.to_lowercase().next().unwrap_or(*c))
        .collect();

    if lower.len() > 3 && lower[0] == 'i' && lower[1] == 'f' && lower[2] == ' ' {
        let comma = (3..lower.len().saturating_sub(1))
            .find(|&i| lower[i] == ',' && lower[i + 1] == ' ');
        if let Some(comma) = comma {
            return Some(ClauseRegions {
                cause: (3, comma),
                effect: (comma + 2, chars.len()),
            });
        }
    }

    let find = |needle: &str| -> Option<(usize, usize)> {
        let needle: Vec<char> = needle
            .chars()
            .map(|c| c.to_lowercase().next().unwrap_or(c))
            .collect();
        if needle.is_empty() || needle.len() > lower.len() {
            return None;
        }
        (0..=lower.len() - needle.len())
            .find(|&i| lower[i..i + needle.len()] == needle[..])
            .map(|i| (i, i + needle.len()))
    };
    let cause_span = find(cause)?;
    let effect_span = find(effect)?;
    let disjoint = cause_span.1 <= effect_span.0 || effect_span.1 <= cause_span.0;
    if disjoint {
        Some(ClauseRegions {
            cause: cause_span,
            effect: effect_span,
        })
    } else {
        None
    }
}

fn region_of(span: (usize, usize), regions: Option<ClauseRegions>) -> Clause {
    let Some(r) = regions else { return Clause::Whole };
    let inside = |(lo, hi): (usize, usize)| lo <= span.0 && span.1 <= hi;
    if inside(r.cause) {
        Clause::Cause
    } else if inside(r.effect) {
        Clause::Effect
    } else {
        Clause::Whole
    }
}

/// A word token (alphanumeric run) with character offsets.
#[derive(Debug, Clone)]
struct QToken {
    lower: String,
    start: usize,
    end: usize,
}

fn tokenize(text: &str) -> Vec<QToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_alphanumeric() {
            let start = i;
            let mut word = String::new();
            while i < chars.len() && chars[i].is_alphanumeric() {
                word.extend(chars[i].to_lowercase().next());
                i += 1;
            }
            tokens.push(QToken {
                lower: word,
                start,
                end: i,
            });
        } else {
            i += 1;
        }
    }
    tokens
}

/// Binding of one pattern token to question tokens.
#[derive(Debug, Clone, Copy)]
enum Binding {
    Token(usize),
    /// Wildcard binding: token index range `[start, end)`.
    Range(usize, usize),
}

impl Binding {
    fn last_token(&self) -> usize {
        match *self {
            Binding::Token(i) => i,
            Binding::Range(_, e) => e - 1,
        }
    }
}

/// Matches `pattern` starting at token `i`, wildcard non-greedy.
fn match_pattern_at(tokens: &[QToken], i: usize, pattern: &[PatternToken]) -> Option<Vec<Binding>> {
    let wildcard = pattern
        .iter()
        .position(|t| matches!(t, PatternToken::Wildcard))
        .expect("pattern has one wildcard");
    let prefix = &pattern[..wildcard];
    let suffix = &pattern[wildcard + 1..];

    if i + prefix.len() > tokens.len() {
        return None;
    }
    for (j, pat) in prefix.iter().enumerate() {
        let PatternToken::Word(w) = pat else { unreachable!() };
        if tokens[i + j].lower != *w {
            return None;
        }
    }
    let wild_start = i + prefix.len();
    let max_gap = tokens.len().checked_sub(wild_start + suffix.len())?;
    for gap in 1..=max_gap {
        let suf_start = wild_start + gap;
        let ok = suffix.iter().enumerate().all(|(k, pat)| {
            let PatternToken::Word(w) = pat else { unreachable!() };
            tokens[suf_start + k].lower == *w
        });
        if ok {
            let mut bindings = Vec::with_capacity(pattern.len());
            bindings.extend((0..prefix.len()).map(|j| Binding::Token(i + j)));
            bindings.push(Binding::Range(wild_start, suf_start));
            bindings.extend((0..suffix.len()).map(|k| Binding::Token(suf_start + k)));
            return Some(bindings);
        }
    }
    None
}

fn find_pattern(tokens: &[QToken], pattern: &[PatternToken]) -> Vec<Vec<Binding>> {
    (0..tokens.len())
        .filter_map(|i| match_pattern_at(tokens, i, pattern))
        .collect()
}

/// All single-edit rewrites of a question: one per antonym site, one per
/// negation-template site.
fn candidate_rewrites(
    question: &str,
    regions: Option<ClauseRegions>,
    lexicon: &AntonymLexicon,
) -> Vec<Rewrite> {
    let mut rewrites = Vec::new();

    for m in lexicon.match_spans(question) {
        let span = (m.start, m.end);
        rewrites.push(Rewrite {
            splice: Splice {
                start: m.start,
                end: m.end,
                insert: m.replacement,
            },
            record: EditRecord {
                operation: EditOperation::AntonymReplace,
                clause: region_of(span, regions),
                span,
            },
        });
    }

    let tokens = tokenize(question);
    for template in lexicon.templates() {
        rewrites.extend(add_negation_rewrites(&tokens, template, regions));
    }
    for template in lexicon.templates() {
        rewrites.extend(remove_negation_rewrites(&tokens, template, regions));
    }
    rewrites
}

fn add_negation_rewrites(
    tokens: &[QToken],
    template: &NegationTemplate,
    regions: Option<ClauseRegions>,
) -> Vec<Rewrite> {
    let mut rewrites = Vec::new();
    for bindings in find_pattern(tokens, &template.pattern) {
        // negated[..insert_index] aligns with pattern[..insert_index].
        let (splice, span) = if template.insert_index == 0 {
            let first = match bindings[0] {
                Binding::Token(i) => i,
                Binding::Range(s, _) => s,
            };
            if first > 0 && tokens[first - 1].lower == template.negation_word {
                continue;
            }
            let at = tokens[first].start;
            (
                Splice {
                    start: at,
                    end: at,
                    insert: format!("{} ", template.negation_word),
                },
                (at, at),
            )
        } else {
            let prev = bindings[template.insert_index - 1].last_token();
            if tokens
                .get(prev + 1)
                .is_some_and(|t| t.lower == template.negation_word)
            {
                continue;
            }
            let at = tokens[prev].end;
            (
                Splice {
                    start: at,
                    end: at,
                    insert: format!(" {}", template.negation_word),
                },
                (at, at),
            )
        };
        rewrites.push(Rewrite {
            record: EditRecord {
                operation: EditOperation::AddNegation,
                clause: region_of(span, regions),
                span,
            },
            splice,
        });
    }
    rewrites
}

fn remove_negation_rewrites(
    tokens: &[QToken],
    template: &NegationTemplate,
    regions: Option<ClauseRegions>,
) -> Vec<Rewrite> {
    let mut rewrites = Vec::new();
    for bindings in find_pattern(tokens, &template.negated) {
        let Binding::Token(neg) = bindings[template.insert_index] else {
            continue;
        };
        let (start, end) = if neg > 0 {
            (tokens[neg - 1].end, tokens[neg].end)
        } else if tokens.len() > 1 {
            (tokens[0].start, tokens[1].start)
        } else {
            continue;
        };
        let span = (start, end);
        rewrites.push(Rewrite {
            splice: Splice {
                start,
                end,
                insert: String::new(),
            },
            record: EditRecord {
                operation: EditOperation::RemoveNegation,
                clause: region_of(span, regions),
                span,
            },
        });
    }
    rewrites
}

/// One candidate rewrite per applicable site of the question: antonym
/// replacement, negation addition, negation removal. Empty when nothing
/// applies.
pub fn symmetric_transform(
    example: &Example,
    lexicon: &AntonymLexicon,
) -> Vec<(String, EditRecord)> {
    let regions = clause_regions(example);
    candidate_rewrites(&example.question, regions, lexicon)
        .into_iter()
        .map(|r| {
            (
                apply_splices(&example.question, &[&r.splice]),
                r.record,
            )
        })
        .collect()
}

/// Parity relabeling over the causal candidate set `["more","less","no effect"]`:
/// an odd flip count swaps more/less and keeps "no effect"; an even count
/// keeps the label.
pub fn relabel_classification(gold: usize, flips: usize) -> Result<usize, AugmentError> {
    if flips != 1 && flips != 2 {
        return Err(AugmentError::BadFlipCount(flips));
    }
    if flips.is_multiple_of(2) {
        return Ok(gold);
    }
    Ok(match gold {
        0 => 1,
        1 => 0,
        other => other,
    })
}

/// Two-candidate relabeling: the other index.
pub fn relabel_choice(example: &Example) -> Result<usize, AugmentError> {
    if example.candidates.len() != 2 {
        return Err(AugmentError::NotTwoCandidates(example.candidates.len()));
    }
    Ok(1 - example.gold)
}

/// Finds the two compared entities in a question by matching paragraph
/// titles. A title matches through its longest word-prefix that appears
/// word-bounded in the question; returns the two matched surfaces in
/// question order, or `None` unless exactly two distinct titles match.
pub fn extract_choice_candidates(
    question: &str,
    entity_titles: &[String],
) -> Option<(String, String)> {
    let chars: Vec<char> = question.chars().collect();
    let lower: Vec<char> = chars
        .iter()
        .map(|c| c.to_lowercase().next().unwrap_or(*c))
        .collect();

    let find_phrase = |phrase: &str| -> Option<(usize, usize)> {
        let needle: Vec<char> = phrase
            .chars()
            .map(|c| c.to_lowercase().next().unwrap_or(c))
            .collect();
        if needle.is_empty() || needle.len() > lower.len() {
            return None;
        }
        (0..=lower.len() - needle.len()).find_map(|i| {
            let end = i + needle.len();
            let hit = lower[i..end] == needle[..]
                && (i == 0 || !lower[i - 1].is_alphanumeric())
                && (end == lower.len() || !lower[end].is_alphanumeric());
            hit.then_some((i, end))
        })
    };

    let mut found: Vec<(usize, usize)> = Vec::new();
    for title in entity_titles {
        let words: Vec<&str> = title.split_whitespace().collect();
        let hit = (1..=words.len())
            .rev()
            .find_map(|n| find_phrase(&words[..n].join(" ")));
        match hit {
            Some(span) => found.push(span),
            None => continue,
        }
    }
    if found.len() != 2 {
        return None;
    }
    found.sort_by_key(|&(start, _)| start);
    let overlap = found[0].1 > found[1].0;
    if overlap {
        return None;
    }
    let surface = |(s, e): (usize, usize)| chars[s..e].iter().collect::<String>();
    Some((surface(found[0]), surface(found[1])))
}

/// Whether symmetric augmentation knows how to relabel this example.
enum RelabelRule {
    CausalClassification,
    TwoChoice,
}

fn relabel_rule(example: &Example) -> Option<RelabelRule> {
    match example.format {
        TaskFormat::Classification if example.has_wiqa_candidates() => {
            Some(RelabelRule::CausalClassification)
        }
        TaskFormat::Classification => None,
        TaskFormat::MultipleChoice if example.candidates.len() == 2 => Some(RelabelRule::TwoChoice),
        TaskFormat::MultipleChoice => None,
    }
}

/// Applies an antonym swap to a clause annotation, word-bounded and
/// case-insensitive; returns the text unchanged when the phrase is absent.
fn swap_in_annotation(text: &str, phrase: &str, replacement: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let lower: Vec<char> = chars
        .iter()
        .map(|c| c.to_lowercase().next().unwrap_or(*c))
        .collect();
    let needle: Vec<char> = phrase.chars().collect();
    if needle.is_empty() || needle.len() > lower.len() {
        return text.to_owned();
    }
    for i in 0..=lower.len() - needle.len() {
        let end = i + needle.len();
        let hit = lower[i..end] == needle[..]
            && (i == 0 || !lower[i - 1].is_alphanumeric())
            && (end == lower.len() || !lower[end].is_alphanumeric());
        if hit {
            let mut out = chars.clone();
            out.splice(i..end, replacement.chars());
            return out.into_iter().collect();
        }
    }
    text.to_owned()
}

/// Generates every symmetric variant of every example, with relabeled gold
/// answers and one link per variant. Causal classification examples with
/// edits in both clauses additionally get the combined two-flip variant.
pub fn make_symmetric(dataset: &Dataset, lexicon: &AntonymLexicon) -> AugmentationOutput {
    let mut out = AugmentationOutput::default();
    for example in &dataset.examples {
        let Some(rule) = relabel_rule(example) else {
            continue;
        };
        let regions = clause_regions(example);
        let rewrites = candidate_rewrites(&example.question, regions, lexicon);
        if rewrites.is_empty() {
            continue;
        }

        let mut variants: Vec<Vec<usize>> = (0..rewrites.len()).map(|i| vec![i]).collect();
        if matches!(rule, RelabelRule::CausalClassification) {
            let in_clause = |clause: Clause| {
                rewrites
                    .iter()
                    .enumerate()
                    .filter(move |(_, r)| r.record.clause == clause)
                    .map(|(i, _)| i)
            };
            for c in in_clause(Clause::Cause) {
                for e in in_clause(Clause::Effect) {
                    variants.push(vec![c, e]);
                }
            }
        }

        for (ordinal, variant) in variants.iter().enumerate() {
            let splices: Vec<&Splice> = variant.iter().map(|&i| &rewrites[i].splice).collect();
            let question = apply_splices(&example.question, &splices);
            let flips = variant.len();
            let gold = match rule {
                RelabelRule::CausalClassification => {
                    relabel_classification(example.gold, flips).expect("flips is 1 or 2")
                }
                RelabelRule::TwoChoice => relabel_choice(example).expect("two candidates"),
            };

            let mut cause = example.cause.clone();
            let mut effect = example.effect.clone();
            for &i in variant {
                let r = &rewrites[i];
                if r.record.operation != EditOperation::AntonymReplace {
                    continue;
                }
                let phrase: String = example
                    .question
                    .chars()
                    .skip(r.record.span.0)
                    .take(r.record.span.1 - r.record.span.0)
                    .flat_map(|c| c.to_lowercase().next())
                    .collect();
                let target = match r.record.clause {
                    Clause::Cause => &mut cause,
                    Clause::Effect => &mut effect,
                    Clause::Whole => continue,
                };
                if let Some(text) = target.as_ref() {
                    *target = Some(swap_in_annotation(text, &phrase, &r.splice.insert));
                }
            }

            let id = format!("{}#sym{}", example.id, ordinal);
            out.links.push(ConsistencyLink::symmetric(&example.id, &id));
            out.edits
                .push(variant.iter().map(|&i| rewrites[i].record.clone()).collect());
            out.examples.push(Example {
                id,
                format: example.format,
                paragraph: example.paragraph.clone(),
                question,
                candidates: example.candidates.clone(),
                gold,
                cause,
                effect,
                origin: Origin::SymAug,
            });
        }
    }
    out
}

fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// Composes the transitive question: the first question's cause with the
/// second question's effect phrasing (its surface after `If {cause}, `).
fn compose_question(cause1: &str, question2: &str, effect2: &str) -> String {
    let chars: Vec<char> = question2.chars().collect();
    let starts_if = chars.len() > 3
        && (chars[0] == 'I' || chars[0] == 'i')
        && (chars[1] == 'f' || chars[1] == 'F')
        && chars[2] == ' ';
    if starts_if {
        if let Some(comma) = (3..chars.len().saturating_sub(1))
            .find(|&i| chars[i] == ',' && chars[i + 1] == ' ')
        {
            let tail: String = chars[comma + 2..].iter().collect();
            return format!("If {cause1}, {tail}");
        }
    }
    format!("If {cause1}, {effect2}?")
}

/// Composes a transitive example for every ordered pair whose first question
/// has a positive causal answer and whose effect matches the second
/// question's cause over the same paragraph.
pub fn make_transitive(dataset: &Dataset) -> AugmentationOutput {
    let mut out = AugmentationOutput::default();
    let eligible = |ex: &Example| {
        ex.format == TaskFormat::Classification
            && ex.has_wiqa_candidates()
            && ex.cause.is_some()
            && ex.effect.is_some()
    };
    for x1 in &dataset.examples {
        if !eligible(x1) || x1.gold_text() != "more" {
            continue;
        }
        for x2 in &dataset.examples {
            if x1.id == x2.id || !eligible(x2) {
                continue;
            }
            if nfc(&x1.paragraph) != nfc(&x2.paragraph) {
                continue;
            }
            let e1 = normalize_text(x1.effect.as_ref().expect("eligible"));
            let c2 = normalize_text(x2.cause.as_ref().expect("eligible"));
            if e1 != c2 {
                continue;
            }
            let cause1 = x1.cause.as_ref().expect("eligible");
            let effect2 = x2.effect.as_ref().expect("eligible");
            let id = format!("{}+{}#trans", x1.id, x2.id);
            out.links
                .push(ConsistencyLink::transitive(&x1.id, &x2.id, &id));
            out.edits.push(Vec::new());
            out.examples.push(Example {
                id,
                format: TaskFormat::Classification,
                paragraph: x1.paragraph.clone(),
                question: compose_question(cause1, &x2.question, effect2),
                candidates: x1.candidates.clone(),
                gold: x2.gold,
                cause: Some(cause1.clone()),
                effect: Some(effect2.clone()),
                origin: Origin::TransAug,
            });
        }
    }
    out
}

/// Uniformly samples `floor(rate * N)` augmentation candidates once under
/// `seed`, then drops any candidate whose (question, paragraph) pair already
/// exists in `existing` (or earlier in the sample). Links of dropped
/// candidates are dropped with them. Pure in all four arguments.
pub fn sample_augmented(
    output: &AugmentationOutput,
    rate: f64,
    seed: u64,
    existing: &Dataset,
) -> AugmentationOutput {
    let rate = rate.clamp(0.0, 1.0);
    let n = output.examples.len();
    let take = (rate * n as f64).floor() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut selected: Vec<usize> = order.into_iter().take(take).collect();
    selected.sort_unstable();

    let mut seen: HashSet<(String, String)> = existing
        .examples
        .iter()
        .map(|ex| (normalize_text(&ex.question), normalize_text(&ex.paragraph)))
        .collect();

    let mut kept = AugmentationOutput::default();
    for idx in selected {
        let ex = &output.examples[idx];
        let key = (normalize_text(&ex.question), normalize_text(&ex.paragraph));
        if !seen.insert(key) {
            continue;
        }
        if let Some(link) = output
            .links
            .iter()
            .find(|l| l.members.last() == Some(&ex.id))
        {
            kept.links.push(link.clone());
        }
        kept.edits.push(output.edits[idx].clone());
        kept.examples.push(ex.clone());
    }
    kept
}
