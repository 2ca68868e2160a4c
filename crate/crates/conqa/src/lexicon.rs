//! The antonym dictionary and negation templates, plus polarity-phrase
//! matching in question text.
//!
//! The dictionary file is UTF-8 TSV, one unordered pair per line
//! (`phrase<TAB>antonym`, `#` comments allowed). Templates are lines of the
//! form `which * is => which * is not` with exactly one `*` wildcard per side;
//! the right side must be the left side with a single negation token inserted.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::data::normalize_text;

/// A token of a negation template pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternToken {
    Word(String),
    Wildcard,
}

impl fmt::Display for PatternToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternToken::Word(w) => f.write_str(w),
            PatternToken::Wildcard => f.write_str("*"),
        }
    }
}

/// A wildcard pattern pair implementing negation addition/removal. The
/// negated side differs from the plain side by exactly one inserted token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationTemplate {
    pub pattern: Vec<PatternToken>,
    pub negated: Vec<PatternToken>,
    /// Index in `negated` of the inserted negation token.
    pub insert_index: usize,
    pub negation_word: String,
}

/// The polarity dictionary: unordered antonym phrase pairs plus negation
/// templates. Immutable after load; lookups are pure.
#[derive(Debug, Clone, Default)]
pub struct AntonymLexicon {
    /// Bidirectional phrase -> antonym map (symmetric closure of the pairs).
    map: BTreeMap<String, String>,
    /// Phrases as char sequences, longest first, for span matching.
    phrases_by_len: Vec<Vec<char>>,
    templates: Vec<NegationTemplate>,
}

/// A polarity-phrase occurrence in a question. Offsets are character
/// positions; `text[start..end]` case-folds to `phrase`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseMatch {
    pub phrase: String,
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `phrase<TAB>antonym`, got \"{content}\"")]
    BadPairLine { line: usize, content: String },
    #[error("line {line}: phrase \"{phrase}\" is already mapped to \"{existing}\"")]
    Conflict {
        line: usize,
        phrase: String,
        existing: String,
    },
    #[error("line {line}: pair maps \"{phrase}\" to itself")]
    SelfPair { line: usize, phrase: String },
    #[error("line {line}: bad template \"{content}\": {reason}")]
    BadTemplate {
        line: usize,
        content: String,
        reason: String,
    },
}

fn parse_pattern(side: &str, line: usize, content: &str) -> Result<Vec<PatternToken>, LexiconError> {
    let tokens: Vec<PatternToken> = side
        .split_whitespace()
        .map(|tok| {
            if tok == "*" {
                PatternToken::Wildcard
            } else {
                PatternToken::Word(tok.to_lowercase())
            }
        })
        .collect();
    let wildcards = tokens
        .iter()
        .filter(|t| matches!(t, PatternToken::Wildcard))
        .count();
    if wildcards != 1 {
        return Err(LexiconError::BadTemplate {
            line,
            content: content.into(),
            reason: format!("expected exactly one `*`, found {wildcards}"),
        });
    }
    if tokens.len() < 2 {
        return Err(LexiconError::BadTemplate {
            line,
            content: content.into(),
            reason: "pattern needs at least one word besides `*`".into(),
        });
    }
    Ok(tokens)
}

/// Finds the unique position where `negated` inserts one word into `pattern`.
fn insertion_point(
    pattern: &[PatternToken],
    negated: &[PatternToken],
) -> Option<(usize, String)> {
    if negated.len() != pattern.len() + 1 {
        return None;
    }
    for at in 0..negated.len() {
        let word = match &negated[at] {
            PatternToken::Word(w) => w.clone(),
            PatternToken::Wildcard => continue,
        };
        let mut rebuilt: Vec<PatternToken> = Vec::with_capacity(negated.len() - 1);
        rebuilt.extend_from_slice(&negated[..at]);
        rebuilt.extend_from_slice(&negated[at + 1..]);
        if rebuilt == pattern {
            return Some((at, word));
        }
    }
    None
}

impl AntonymLexicon {
    /// Parses the dictionary and template texts. Entries are lowercased;
    /// duplicate or conflicting pairs are rejected.
    pub fn parse(antonyms_tsv: &str, templates: &str) -> Result<Self, LexiconError> {
        let mut lexicon = AntonymLexicon::default();
        for (lineno, raw) in antonyms_tsv.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (left, right) = line.split_once('\t').ok_or(LexiconError::BadPairLine {
                line: lineno + 1,
                content: line.into(),
            })?;
            let x = normalize_text(left);
            let y = normalize_text(right);
            if x.is_empty() || y.is_empty() {
                return Err(LexiconError::BadPairLine {
                    line: lineno + 1,
                    content: line.into(),
                });
            }
            if x == y {
                return Err(LexiconError::SelfPair {
                    line: lineno + 1,
                    phrase: x,
                });
            }
            for (phrase, partner) in [(&x, &y), (&y, &x)] {
                if let Some(existing) = lexicon.map.get(phrase) {
                    return Err(LexiconError::Conflict {
                        line: lineno + 1,
                        phrase: phrase.clone(),
                        existing: existing.clone(),
                    });
                }
                lexicon.map.insert(phrase.clone(), partner.clone());
            }
        }
        lexicon.phrases_by_len = lexicon.map.keys().map(|p| p.chars().collect()).collect();
        lexicon
            .phrases_by_len
            .sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));

        for (lineno, raw) in templates.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (left, right) = line.split_once("=>").ok_or(LexiconError::BadTemplate {
                line: lineno + 1,
                content: line.into(),
                reason: "missing `=>`".into(),
            })?;
            let pattern = parse_pattern(left.trim(), lineno + 1, line)?;
            let negated = parse_pattern(right.trim(), lineno + 1, line)?;
            let (insert_index, negation_word) =
                insertion_point(&pattern, &negated).ok_or(LexiconError::BadTemplate {
                    line: lineno + 1,
                    content: line.into(),
                    reason: "right side must be the left side with one token inserted".into(),
                })?;
            lexicon.templates.push(NegationTemplate {
                pattern,
                negated,
                insert_index,
                negation_word,
            });
        }
        Ok(lexicon)
    }

    /// The lexicon shipped with the crate: the published antonym pairs plus
    /// desk-scale additions, and the negation templates.
    pub fn builtin() -> Self {
        AntonymLexicon::parse(
            include_str!("../data/antonyms.tsv"),
            include_str!("../data/templates.txt"),
        )
        .expect("bundled lexicon is valid")
    }

    /// Partner phrase of `phrase`, if the pair is in the dictionary.
    /// Involutive where defined: `antonym_of(antonym_of(x)) == x`.
    pub fn antonym_of(&self, phrase: &str) -> Option<&str> {
        self.map.get(&normalize_text(phrase)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn templates(&self) -> &[NegationTemplate] {
        &self.templates
    }

    /// All polarity-phrase occurrences in `text`: case-insensitive,
    /// word-bounded, leftmost-longest, non-overlapping, sorted by start.
    pub fn match_spans(&self, text: &str) -> Vec<PhraseMatch> {
        let lowered: Vec<char> = text
            .chars()
            .map(|c| c.to_lowercase().next().unwrap_or(c))
            .collect();
        let char_boundary_ok = |start: usize, end: usize| {
            let before = start == 0 || !lowered[start - 1].is_alphanumeric();
            let after = end == lowered.len() || !lowered[end].is_alphanumeric();
            before && after
        };

        let mut matches = Vec::new();
        let mut i = 0;
        while i < lowered.len() {
            let mut hit: Option<&Vec<char>> = None;
            for phrase in &self.phrases_by_len {
                let end = i + phrase.len();
                if end > lowered.len() {
                    continue;
                }
                if lowered[i..end] == phrase[..] && char_boundary_ok(i, end) {
                    hit = Some(phrase);
                    break;
                }
            }
            match hit {
                Some(phrase) => {
                    let phrase_str: String = phrase.iter().collect();
                    let replacement = self.map[&phrase_str].clone();
                    matches.push(PhraseMatch {
                        phrase: phrase_str,
                        start: i,
                        end: i + phrase.len(),
                        replacement,
                    });
                    i += phrase.len();
                }
                None => i += 1,
            }
        }
        matches
    }
}

/// Loads the dictionary and (optionally) templates from disk.
pub fn load_lexicon(
    antonyms_path: &Path,
    templates_path: Option<&Path>,
) -> Result<AntonymLexicon, LexiconError> {
    let antonyms = fs::read_to_string(antonyms_path).map_err(|source| LexiconError::Io {
        path: antonyms_path.to_owned(),
        source,
    })?;
    let templates = match templates_path {
        Some(p) => fs::read_to_string(p).map_err(|source| LexiconError::Io {
            path: p.to_owned(),
            source,
        })?,
        None => String::new(),
    };
    AntonymLexicon::parse(&antonyms, &templates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> AntonymLexicon {
        AntonymLexicon::parse(
            "more\tless\nheat up\tcool down\nfaster\tslower\nlose weight\tgain weight\nlose\tfind\n",
            "which * is => which * is not\n",
        )
        .unwrap()
    }

    #[test]
    fn pair_lookup_works_both_directions() {
        let lex = sample();
        assert_eq!(lex.antonym_of("more"), Some("less"));
        assert_eq!(lex.antonym_of("less"), Some("more"));
        assert_eq!(lex.antonym_of("heat up"), Some("cool down"));
        assert_eq!(lex.antonym_of("cool down"), Some("heat up"));
    }

    #[test]
    fn missing_phrase_is_absent() {
        assert_eq!(sample().antonym_of("banana"), None);
    }

    #[test]
    fn antonym_of_is_involutive() {
        let lex = AntonymLexicon::builtin();
        for phrase in lex.phrases() {
            let partner = lex.antonym_of(phrase).expect("defined for all entries");
            assert_ne!(partner, phrase);
            assert_eq!(lex.antonym_of(partner), Some(phrase));
        }
    }

    #[test]
    fn published_pairs_are_in_builtin_lexicon() {
        let lex = AntonymLexicon::builtin();
        let published = [
            ("more", "less"),
            ("slowly", "quickly"),
            ("stronger", "weaker"),
            ("later", "earlier"),
            ("younger", "older"),
            ("increase", "decrease"),
            ("heat up", "cool down"),
            ("lose weight", "gain weight"),
            ("raise", "drop"),
            ("remove", "add"),
        ];
        for (x, y) in published {
            assert_eq!(lex.antonym_of(x), Some(y), "{x} <-> {y}");
            assert_eq!(lex.antonym_of(y), Some(x), "{y} <-> {x}");
        }
    }

    #[test]
    fn conflicting_pair_is_rejected() {
        let err = AntonymLexicon::parse("more\tless\nmore\tfewer\n", "").unwrap_err();
        match err {
            LexiconError::Conflict { phrase, .. } => assert_eq!(phrase, "more"),
            other => panic!("expected conflict, got {other}"),
        }
    }

    #[test]
    fn duplicate_pair_is_rejected() {
        assert!(AntonymLexicon::parse("more\tless\nless\tmore\n", "").is_err());
    }

    #[test]
    fn self_pair_is_rejected() {
        assert!(matches!(
            AntonymLexicon::parse("same\tsame\n", ""),
            Err(LexiconError::SelfPair { .. })
        ));
    }

    #[test]
    fn spans_match_multiword_and_single_word() {
        let lex = sample();
        let spans = lex.match_spans("will the water heat up faster");
        let phrases: Vec<&str> = spans.iter().map(|m| m.phrase.as_str()).collect();
        assert_eq!(phrases, vec!["heat up", "faster"]);
        assert_eq!(spans[0].replacement, "cool down");
        assert_eq!(spans[1].replacement, "slower");
    }

    #[test]
    fn adjacent_words_both_match() {
        let spans = sample().match_spans("more or less");
        let phrases: Vec<&str> = spans.iter().map(|m| m.phrase.as_str()).collect();
        assert_eq!(phrases, vec!["more", "less"]);
    }

    #[test]
    fn word_boundaries_prevent_substring_hits() {
        assert!(sample().match_spans("moreover").is_empty());
        assert!(sample().match_spans("lessons in biology").is_empty());
    }

    #[test]
    fn longest_phrase_wins_overlap() {
        let spans = sample().match_spans("did she lose weight quickly");
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].phrase, "lose weight");
        assert_eq!(spans[0].replacement, "gain weight");
    }

    #[test]
    fn matching_is_case_insensitive() {
        let spans = sample().match_spans("More snow means MORE ice");
        assert_eq!(spans.len(), 2);
        assert_eq!(spans[0].phrase, "more");
        assert_eq!(spans[0].start, 0);
        assert_eq!(spans[0].end, 4);
    }

    #[test]
    fn template_parses_insertion_point() {
        let lex = sample();
        let template = &lex.templates()[0];
        assert_eq!(template.negation_word, "not");
        assert_eq!(template.insert_index, 3);
        assert_eq!(template.pattern.len(), 3);
    }

    #[test]
    fn template_without_single_insertion_is_rejected() {
        assert!(AntonymLexicon::parse("", "which * is => that * is not\n").is_err());
        assert!(AntonymLexicon::parse("", "which * is => which * is not at all\n").is_err());
        assert!(AntonymLexicon::parse("", "which * is , which * is not\n").is_err());
    }

    /// Naive oracle: every window of the text, checked against every phrase.
    fn brute_force_spans(lex: &AntonymLexicon, text: &str) -> Vec<(usize, usize, String)> {
        let chars: Vec<char> = text
            .chars()
            .map(|c| c.to_lowercase().next().unwrap_or(c))
            .collect();
        let phrases: Vec<String> = lex.phrases().map(String::from).collect();
        let mut found = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            let mut best: Option<(usize, String)> = None;
            for phrase in &phrases {
                let pchars: Vec<char> = phrase.chars().collect();
                let end = pos + pchars.len();
                if end > chars.len() || chars[pos..end] != pchars[..] {
                    continue;
                }
                let left_ok = pos == 0 || !chars[pos - 1].is_alphanumeric();
                let right_ok = end == chars.len() || !chars[end].is_alphanumeric();
                if left_ok && right_ok {
                    let better = match &best {
                        Some((len, _)) => pchars.len() > *len,
                        None => true,
                    };
                    if better {
                        best = Some((pchars.len(), phrase.clone()));
                    }
                }
            }
            if let Some((len, phrase)) = best {
                found.push((pos, pos + len, phrase));
                pos += len;
            } else {
                pos += 1;
            }
        }
        found
    }

    #[test]
    fn matches_agree_with_brute_force_oracle() {
        let lex = sample();
        for text in [
            "will the water heat up faster",
            "more or less",
            "moreover the lessons",
            "did she lose weight or just lose",
            "LOSE WEIGHT fast, heat up later",
        ] {
            let expected = brute_force_spans(&lex, text);
            let got: Vec<(usize, usize, String)> = lex
                .match_spans(text)
                .into_iter()
                .map(|m| (m.start, m.end, m.phrase))
                .collect();
            assert_eq!(got, expected, "text: {text}");
        }
    }

    proptest! {
        // Spans never overlap and each span case-folds to its phrase.
        #[test]
        fn spans_are_nonoverlapping_and_faithful(words in prop::collection::vec(
            prop::sample::select(vec![
                "more", "less", "heat", "up", "heat up", "faster", "water",
                "moreover", "the", "lose weight", "lose", "banana",
            ]),
            0..12,
        )) {
            let text = words.join(" ");
            let lex = sample();
            let spans = lex.match_spans(&text);
            let chars: Vec<char> = text.chars().collect();
            let mut prev_end = 0;
            for m in &spans {
                prop_assert!(m.start >= prev_end, "overlap in {text}");
                let surface: String = chars[m.start..m.end].iter().collect();
                prop_assert_eq!(normalize_text(&surface), m.phrase.clone());
                prev_end = m.end;
            }
        }

        // Swapping every match and re-matching finds the partner phrases at
        // the same count.
        #[test]
        fn swap_all_preserves_match_count(words in prop::collection::vec(
            prop::sample::select(vec!["more", "less", "faster", "water", "heat up", "dry"]),
            1..10,
        )) {
            let text = words.join(" ");
            let lex = sample();
            let spans = lex.match_spans(&text);
            let mut swapped: Vec<char> = text.chars().collect();
            for m in spans.iter().rev() {
                let repl: Vec<char> = m.replacement.chars().collect();
                swapped.splice(m.start..m.end, repl);
            }
            let swapped: String = swapped.into_iter().collect();
            let new_spans = lex.match_spans(&swapped);
            prop_assert_eq!(new_spans.len(), spans.len());
            for (old, new) in spans.iter().zip(new_spans.iter()) {
                prop_assert_eq!(&new.phrase, &old.replacement);
            }
        }
    }
}
