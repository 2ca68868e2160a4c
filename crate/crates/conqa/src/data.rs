//! Dataset model shared by every other module, with lossless JSONL
//! serialization.
//!
//! An example file holds one JSON object per line:
//!
//! ```text
//! {"id": "q1", "format": "classification", "paragraph": "...", "question": "...",
//!  "candidates": ["more","less","no effect"], "gold": 0,
//!  "cause": null, "effect": null, "origin": "original"}
//! ```
//!
//! Links live in a separate JSONL file: `{"kind": "sym", "members": ["q1", "q1#sym0"]}`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Answer candidates for causal-effect classification questions, in their
/// fixed order.
pub const WIQA_CANDIDATES: [&str; 3] = ["more", "less", "no effect"];

/// How a question expects its answer: a class over a shared candidate set, or
/// a choice among per-example candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskFormat {
    #[serde(rename = "classification")]
    Classification,
    #[serde(rename = "choice")]
    MultipleChoice,
}

impl fmt::Display for TaskFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskFormat::Classification => f.write_str("classification"),
            TaskFormat::MultipleChoice => f.write_str("choice"),
        }
    }
}

/// Provenance of an example: drawn from the source data or produced by one of
/// the augmentation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "original")]
    Original,
    #[serde(rename = "sym_aug")]
    SymAug,
    #[serde(rename = "trans_aug")]
    TransAug,
}

/// One QA instance: a question over a paragraph with an ordered candidate set
/// and a gold answer index. Cause/effect clause annotations are carried when
/// the question states a causal relationship.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example {
    pub id: String,
    pub format: TaskFormat,
    pub paragraph: String,
    pub question: String,
    pub candidates: Vec<String>,
    pub gold: usize,
    pub cause: Option<String>,
    pub effect: Option<String>,
    pub origin: Origin,
}

impl Example {
    /// True when the candidates are exactly the causal classification set.
    pub fn has_wiqa_candidates(&self) -> bool {
        self.candidates.len() == WIQA_CANDIDATES.len()
            && self
                .candidates
                .iter()
                .zip(WIQA_CANDIDATES.iter())
                .all(|(c, w)| c == w)
    }

    /// Gold answer text.
    pub fn gold_text(&self) -> &str {
        &self.candidates[self.gold]
    }
}

/// The kind of logical rule a link encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    #[serde(rename = "sym")]
    Symmetric,
    #[serde(rename = "trans")]
    Transitive,
}

/// A typed edge connecting example IDs: `[original, sym]` for symmetric pairs
/// and `[q1, q2, q_trans]` for transitive triples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyLink {
    pub kind: LinkKind,
    pub members: Vec<String>,
}

impl ConsistencyLink {
    pub fn symmetric(original: impl Into<String>, sym: impl Into<String>) -> Self {
        ConsistencyLink {
            kind: LinkKind::Symmetric,
            members: vec![original.into(), sym.into()],
        }
    }

    pub fn transitive(
        q1: impl Into<String>,
        q2: impl Into<String>,
        q_trans: impl Into<String>,
    ) -> Self {
        ConsistencyLink {
            kind: LinkKind::Transitive,
            members: vec![q1.into(), q2.into(), q_trans.into()],
        }
    }

    /// Rendered identity used in diagnostics and audit reports.
    pub fn render(&self) -> String {
        let kind = match self.kind {
            LinkKind::Symmetric => "sym",
            LinkKind::Transitive => "trans",
        };
        format!("{}[{}]", kind, self.members.join(","))
    }
}

/// A set of examples plus the consistency links among them. Immutable after
/// construction; mutation happens by building a new dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub links: Vec<ConsistencyLink>,
}

/// One broken invariant, naming the offending example or link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Example ID or rendered link the rule failed on.
    pub subject: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate example id \"{id}\"")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("invalid dataset: {0}")]
    Invalid(Violation),
}

impl Dataset {
    /// Builds a dataset and rejects it on the first invariant violation.
    pub fn new(
        examples: Vec<Example>,
        links: Vec<ConsistencyLink>,
    ) -> Result<Dataset, DataError> {
        let dataset = Dataset { examples, links };
        match validate(&dataset).into_iter().next() {
            Some(v) => Err(DataError::Invalid(v)),
            None => Ok(dataset),
        }
    }

    /// Map from example ID to its index.
    pub fn id_index(&self) -> HashMap<&str, usize> {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, ex)| (ex.id.as_str(), i))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }
}

/// Canonical text form used wherever two texts are compared for identity:
/// Unicode NFC, then lowercased with whitespace collapsed to single spaces.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    let mut last_space = true;
    for c in nfc.chars() {
        if c.is_whitespace() {
            if !last_space {
                out.push(' ');
                last_space = true;
            }
        } else {
            for lc in c.to_lowercase() {
                out.push(lc);
            }
            last_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Paragraph identity across link members: byte equality after NFC.
fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// Checks every type invariant and returns one entry per broken rule.
/// An empty result means the dataset is valid.
pub fn validate(dataset: &Dataset) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut seen_ids: HashSet<&str> = HashSet::new();
    for ex in &dataset.examples {
        if !seen_ids.insert(ex.id.as_str()) {
            violations.push(Violation {
                subject: ex.id.clone(),
                rule: "example id is not unique".into(),
            });
        }
    }

    let mut global_classification: Option<(&str, &[String])> = None;
    for ex in &dataset.examples {
        if ex.candidates.len() < 2 {
            violations.push(Violation {
                subject: ex.id.clone(),
                rule: format!("needs at least 2 candidates, has {}", ex.candidates.len()),
            });
        }
        if ex.gold >= ex.candidates.len() {
            violations.push(Violation {
                subject: ex.id.clone(),
                rule: format!(
                    "gold index {} out of range for {} candidates",
                    ex.gold,
                    ex.candidates.len()
                ),
            });
        }
        let mut folded: HashSet<String> = HashSet::new();
        for cand in &ex.candidates {
            if !folded.insert(normalize_text(cand)) {
                violations.push(Violation {
                    subject: ex.id.clone(),
                    rule: format!("duplicate candidate \"{cand}\" after case-folding"),
                });
            }
        }
        if ex.cause.is_some() != ex.effect.is_some() {
            violations.push(Violation {
                subject: ex.id.clone(),
                rule: "cause and effect must both be present or both absent".into(),
            });
        }
        if ex.format == TaskFormat::Classification {
            // The causal candidate set is order-sensitive.
            let as_set: HashSet<String> =
                ex.candidates.iter().map(|c| normalize_text(c)).collect();
            let wiqa_set: HashSet<String> =
                WIQA_CANDIDATES.iter().map(|c| normalize_text(c)).collect();
            if as_set == wiqa_set && !ex.has_wiqa_candidates() {
                violations.push(Violation {
                    subject: ex.id.clone(),
                    rule: format!("classification candidates must be exactly {WIQA_CANDIDATES:?}"),
                });
            }
            match global_classification {
                None => global_classification = Some((&ex.id, &ex.candidates)),
                Some((_, cands)) => {
                    if cands != ex.candidates.as_slice() {
                        violations.push(Violation {
                            subject: ex.id.clone(),
                            rule: "classification examples must share one global candidate set"
                                .into(),
                        });
                    }
                }
            }
        }
    }

    let index = dataset.id_index();
    let mut seen_links: HashSet<(LinkKind, &[String])> = HashSet::new();
    for link in &dataset.links {
        if !seen_links.insert((link.kind, link.members.as_slice())) {
            violations.push(Violation {
                subject: link.render(),
                rule: "duplicate link".into(),
            });
        }
        let expected_len = match link.kind {
            LinkKind::Symmetric => 2,
            LinkKind::Transitive => 3,
        };
        if link.members.len() != expected_len {
            violations.push(Violation {
                subject: link.render(),
                rule: format!(
                    "{:?} link needs {} members, has {}",
                    link.kind,
                    expected_len,
                    link.members.len()
                ),
            });
            continue;
        }
        let mut paragraphs: Vec<&str> = Vec::new();
        let mut resolved = true;
        for member in &link.members {
            match index.get(member.as_str()) {
                Some(&i) => paragraphs.push(&dataset.examples[i].paragraph),
                None => {
                    violations.push(Violation {
                        subject: link.render(),
                        rule: format!("member \"{member}\" does not resolve to any example"),
                    });
                    resolved = false;
                }
            }
        }
        if resolved {
            let first = nfc(paragraphs[0]);
            if paragraphs.iter().any(|p| nfc(p) != first) {
                violations.push(Violation {
                    subject: link.render(),
                    rule: "link members do not share the same paragraph".into(),
                });
            }
        }
    }

    violations
}

/// Reads one `Example` per line. Blank lines are allowed and skipped.
pub fn load_examples(path: &Path) -> Result<Vec<Example>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut examples = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let example: Example =
            serde_json::from_str(line.trim()).map_err(|e| DataError::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        if seen.insert(example.id.clone(), lineno + 1).is_some() {
            return Err(DataError::DuplicateId {
                path: path.to_owned(),
                line: lineno + 1,
                id: example.id,
            });
        }
        examples.push(example);
    }
    Ok(examples)
}

/// Reads one `ConsistencyLink` per line.
pub fn load_links(path: &Path) -> Result<Vec<ConsistencyLink>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut links = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let link: ConsistencyLink =
            serde_json::from_str(line.trim()).map_err(|e| DataError::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message: e.to_string(),
            })?;
        links.push(link);
    }
    Ok(links)
}

/// Loads and validates a dataset. With `links_path = None` the dataset has no
/// links. Example ordering is preserved.
pub fn load_dataset(
    examples_path: &Path,
    links_path: Option<&Path>,
) -> Result<Dataset, DataError> {
    let examples = load_examples(examples_path)?;
    let links = match links_path {
        Some(p) => load_links(p)?,
        None => Vec::new(),
    };
    Dataset::new(examples, links)
}

/// Writes a dataset so that `load_dataset` restores it structurally intact.
pub fn save_dataset(
    dataset: &Dataset,
    examples_path: &Path,
    links_path: &Path,
) -> Result<(), DataError> {
    save_examples(&dataset.examples, examples_path)?;
    save_links(&dataset.links, links_path)?;
    Ok(())
}

pub fn save_examples(examples: &[Example], path: &Path) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for example in examples {
        let line = serde_json::to_string(example).expect("example serializes");
        writer.write_all(line.as_bytes()).map_err(io_err)?;
        writer.write_all(b"\n").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

pub fn save_links(links: &[ConsistencyLink], path: &Path) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_owned(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut writer = BufWriter::new(file);
    for link in links {
        let line = serde_json::to_string(link).expect("link serializes");
        writer.write_all(line.as_bytes()).map_err(io_err)?;
        writer.write_all(b"\n").map_err(io_err)?;
    }
    writer.flush().map_err(io_err)
}

/// Conventional sibling path for a links file: `data.jsonl` -> `data.links.jsonl`.
pub fn links_path_for(examples_path: &Path) -> PathBuf {
    let mut path = examples_path.to_owned();
    path.set_extension("links.jsonl");
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn classification_example(id: &str, question: &str, gold: usize) -> Example {
        Example {
            id: id.into(),
            format: TaskFormat::Classification,
            paragraph: "The salt water is heated.".into(),
            question: question.into(),
            candidates: WIQA_CANDIDATES.iter().map(|s| s.to_string()).collect(),
            gold,
            cause: None,
            effect: None,
            origin: Origin::Original,
        }
    }

    fn choice_example(id: &str) -> Example {
        Example {
            id: id.into(),
            format: TaskFormat::MultipleChoice,
            paragraph: "Supposed you were standing on the planet Earth and Mercury.".into(),
            question: "Which planet would the sun appear larger?".into(),
            candidates: vec!["Mercury".into(), "Earth".into()],
            gold: 0,
            cause: None,
            effect: None,
            origin: Origin::Original,
        }
    }

    #[test]
    fn loads_single_classification_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"x1","format":"classification","paragraph":"p","question":"q","candidates":["more","less","no effect"],"gold":0,"cause":null,"effect":null,"origin":"original"}
"#,
        )
        .unwrap();
        let dataset = load_dataset(&path, None).unwrap();
        assert_eq!(dataset.examples.len(), 1);
        assert!(dataset.links.is_empty());
    }

    #[test]
    fn duplicate_id_error_names_id_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.jsonl");
        let mk = |id: &str| {
            serde_json::to_string(&classification_example(id, "q", 0)).unwrap()
        };
        std::fs::write(&path, format!("{}\n{}\n{}\n", mk("x1"), mk("x2"), mk("x1"))).unwrap();
        let err = load_examples(&path).unwrap_err();
        match err {
            DataError::DuplicateId { id, line, .. } => {
                assert_eq!(id, "x1");
                assert_eq!(line, 3);
            }
            other => panic!("expected duplicate id error, got {other}"),
        }
    }

    #[test]
    fn loads_two_candidate_choice_example() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quarel.jsonl");
        let line = serde_json::to_string(&choice_example("qr1")).unwrap();
        std::fs::write(&path, format!("{line}\n")).unwrap();
        let dataset = load_dataset(&path, None).unwrap();
        assert_eq!(dataset.examples[0].gold_text(), "Mercury");
    }

    #[test]
    fn empty_dataset_saves_to_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let ex_path = dir.path().join("empty.jsonl");
        let link_path = dir.path().join("empty.links.jsonl");
        save_dataset(&Dataset::default(), &ex_path, &link_path).unwrap();
        assert_eq!(std::fs::read_to_string(&ex_path).unwrap(), "");
        let reloaded = load_dataset(&ex_path, Some(&link_path)).unwrap();
        assert!(reloaded.is_empty());
    }

    #[test]
    fn symmetric_link_round_trips() {
        let mut sym = classification_example("x1#sym0", "q sym", 1);
        sym.origin = Origin::SymAug;
        let dataset = Dataset::new(
            vec![classification_example("x1", "q", 0), sym],
            vec![ConsistencyLink::symmetric("x1", "x1#sym0")],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ex_path = dir.path().join("d.jsonl");
        let link_path = links_path_for(&ex_path);
        save_dataset(&dataset, &ex_path, &link_path).unwrap();
        let reloaded = load_dataset(&ex_path, Some(&link_path)).unwrap();
        assert_eq!(reloaded, dataset);
    }

    #[test]
    fn validate_accepts_valid_dataset() {
        let dataset = Dataset {
            examples: vec![classification_example("a", "q", 0)],
            links: vec![],
        };
        assert_eq!(validate(&dataset), vec![]);
    }

    #[test]
    fn validate_reports_unresolvable_member() {
        let dataset = Dataset {
            examples: vec![classification_example("a", "q", 0)],
            links: vec![ConsistencyLink::symmetric("a", "ghost")],
        };
        let violations = validate(&dataset);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].rule.contains("ghost"));
    }

    #[test]
    fn validate_reports_paragraph_mismatch() {
        let mut other = classification_example("b", "q2", 1);
        other.paragraph = "A different paragraph.".into();
        let dataset = Dataset {
            examples: vec![classification_example("a", "q", 0), other],
            links: vec![ConsistencyLink::symmetric("a", "b")],
        };
        let violations = validate(&dataset);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].rule.contains("paragraph"));
    }

    #[test]
    fn validate_reports_field_level_mutations() {
        let base = classification_example("a", "q", 0);

        let mut gold_oob = base.clone();
        gold_oob.gold = 5;
        assert!(!validate(&Dataset { examples: vec![gold_oob], links: vec![] }).is_empty());

        let mut dup_cand = base.clone();
        dup_cand.candidates = vec!["More".into(), "more".into()];
        assert!(!validate(&Dataset { examples: vec![dup_cand], links: vec![] }).is_empty());

        let mut lone_cause = base.clone();
        lone_cause.cause = Some("a tsunami happens".into());
        assert!(!validate(&Dataset { examples: vec![lone_cause], links: vec![] }).is_empty());

        let mut wrong_order = base.clone();
        wrong_order.candidates =
            vec!["less".into(), "more".into(), "no effect".into()];
        assert!(!validate(&Dataset { examples: vec![wrong_order], links: vec![] }).is_empty());

        let mut dup_link = Dataset {
            examples: vec![base.clone(), {
                let mut b = base.clone();
                b.id = "b".into();
                b
            }],
            links: vec![
                ConsistencyLink::symmetric("a", "b"),
                ConsistencyLink::symmetric("a", "b"),
            ],
        };
        assert!(!validate(&dup_link).is_empty());
        dup_link.links.pop();
        assert!(validate(&dup_link).is_empty());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let line = r#"{"id":"x","format":"classification","paragraph":"p","question":"q","candidates":["a","b"],"gold":0,"cause":null,"effect":null,"origin":"original","extra":1}"#;
        assert!(serde_json::from_str::<Example>(line).is_err());
    }

    #[test]
    fn normalize_collapses_case_and_whitespace() {
        assert_eq!(normalize_text("  Wood IS  more\tmoist "), "wood is more moist");
    }

    fn arb_example(id_hint: usize) -> impl Strategy<Value = Example> {
        let text = "[a-z ]{0,30}";
        (text.prop_map(String::from), 0usize..3, any::<bool>()).prop_map(
            move |(question, gold, with_clauses)| {
                let mut ex = classification_example(&format!("ex{id_hint}"), &question, gold);
                if with_clauses {
                    ex.cause = Some("more rain".into());
                    ex.effect = Some("more erosion".into());
                }
                ex
            },
        )
    }

    proptest! {
        // load . save is the identity on valid datasets.
        #[test]
        fn save_load_round_trip(examples in prop::collection::vec(arb_example(0), 0..6)) {
            let examples: Vec<Example> = examples
                .into_iter()
                .enumerate()
                .map(|(i, mut ex)| { ex.id = format!("ex{i}"); ex })
                .collect();
            let mut links = Vec::new();
            if examples.len() >= 2 {
                links.push(ConsistencyLink::symmetric(
                    examples[0].id.clone(),
                    examples[1].id.clone(),
                ));
            }
            let dataset = Dataset::new(examples, links).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let ex_path = dir.path().join("rt.jsonl");
            let link_path = links_path_for(&ex_path);
            save_dataset(&dataset, &ex_path, &link_path).unwrap();
            let reloaded = load_dataset(&ex_path, Some(&link_path)).unwrap();
            prop_assert_eq!(reloaded, dataset);
        }
    }
}
