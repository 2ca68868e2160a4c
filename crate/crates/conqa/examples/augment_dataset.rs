//! The three augmentation rules on canonical fixtures: antonym replacement,
//! negation addition, and transitive composition, each with answer
//! relabeling.
//!
//! ```bash
//! cargo run -p conqa --example augment_dataset
//! ```

use conqa::augment::{make_symmetric, make_transitive};
use conqa::data::{Dataset, Example, Origin, TaskFormat, WIQA_CANDIDATES};
use conqa::lexicon::AntonymLexicon;

fn show(tag: &str, source: &Example, produced: &Example) {
    println!("{tag}");
    println!("  q:     {}", source.question);
    println!("  a*:    {}", source.gold_text());
    println!("  q_aug: {}", produced.question);
    println!("  a*aug: {}", produced.gold_text());
    println!();
}

fn main() {
    let lexicon = AntonymLexicon::builtin();

    let quarel = Example {
        id: "quarel".into(),
        format: TaskFormat::MultipleChoice,
        paragraph: "Supposed you were standing on the planet Earth and Mercury. \
                    When you look up in the sky and see the sun,"
            .into(),
        question: "Which planet would the sun appear larger?".into(),
        candidates: vec!["Mercury".into(), "Earth".into()],
        gold: 0,
        cause: None,
        effect: None,
        origin: Origin::Original,
    };
    let out = make_symmetric(&Dataset::new(vec![quarel.clone()], vec![]).unwrap(), &lexicon);
    show("antonym replacement (two-choice)", &quarel, &out.examples[0]);

    let hotpot = Example {
        id: "hotpot".into(),
        format: TaskFormat::MultipleChoice,
        paragraph: "Golf Magazine is a monthly golf magazine owned by Time Inc. \
                    El Nuevo Cojo Ilustrado is an American Spanish language magazine."
            .into(),
        question: "El Nuevo Cojo and Golf Magazine, which one is owned by Time Inc?".into(),
        candidates: vec!["Golf Magazine".into(), "El Nuevo Cojo".into()],
        gold: 0,
        cause: None,
        effect: None,
        origin: Origin::Original,
    };
    let out = make_symmetric(&Dataset::new(vec![hotpot.clone()], vec![]).unwrap(), &lexicon);
    show("negation addition (two-choice)", &hotpot, &out.examples[0]);

    let wiqa = |id: &str, question: &str, cause: &str, effect: &str| Example {
        id: id.into(),
        format: TaskFormat::Classification,
        paragraph: "The rain seeps into the wood surface. When rain evaporates it leaves \
                    the wood."
            .into(),
        question: question.into(),
        candidates: WIQA_CANDIDATES.iter().map(|s| s.to_string()).collect(),
        gold: 0,
        cause: Some(cause.into()),
        effect: Some(effect.into()),
        origin: Origin::Original,
    };
    let q1 = wiqa(
        "q1",
        "If a tsunami happens, will wood be more moist?",
        "a tsunami happens",
        "wood is more moist",
    );
    let q2 = wiqa(
        "q2",
        "If wood is more moist, is more weathering occurring?",
        "wood is more moist",
        "more weathering occurring",
    );
    let dataset = Dataset::new(vec![q1.clone(), q2.clone()], vec![]).unwrap();
    let out = make_transitive(&dataset);
    println!("transitive composition (classification)");
    println!("  q1:      {}  [a*: {}]", q1.question, q1.gold_text());
    println!("  q2:      {}  [a*: {}]", q2.question, q2.gold_text());
    println!(
        "  q_trans: {}  [a*: {}]",
        out.examples[0].question,
        out.examples[0].gold_text()
    );
    println!("  link:    {}", out.links[0].render());

    // A classification question with antonym sites in both clauses yields
    // the cause-only, effect-only, and combined variants.
    let both = wiqa(
        "both",
        "If there is more rain, will there be more erosion?",
        "more rain",
        "more erosion",
    );
    let out = make_symmetric(&Dataset::new(vec![both.clone()], vec![]).unwrap(), &lexicon);
    println!("\nclause-level variants of: {}", both.question);
    for (example, edits) in out.examples.iter().zip(out.edits.iter()) {
        println!(
            "  {} edit(s): {}  [a*: {}]",
            edits.len(),
            example.question,
            example.gold_text()
        );
    }
}
