//! Polarity-phrase matching with the bundled antonym dictionary.
//!
//! ```bash
//! cargo run -p conqa --example lexicon_matching
//! ```

use conqa::lexicon::AntonymLexicon;

fn main() {
    let lexicon = AntonymLexicon::builtin();
    println!(
        "bundled dictionary: {} antonym pairs, {} negation templates\n",
        lexicon.len(),
        lexicon.templates().len()
    );

    for phrase in ["more", "heat up", "lose weight", "banana"] {
        match lexicon.antonym_of(phrase) {
            Some(partner) => println!("antonym_of({phrase:?}) = {partner:?}"),
            None => println!("antonym_of({phrase:?}) = (not in dictionary)"),
        }
    }
    println!();

    let questions = [
        "Will the water heat up faster in a thin pan?",
        "Which planet would the sun appear larger?",
        "If there is more rain, will the soil erode more or less quickly?",
        "Did she lose weight after training slowly?",
    ];
    for question in questions {
        println!("{question}");
        let chars: Vec<char> = question.chars().collect();
        for m in lexicon.match_spans(question) {
            let surface: String = chars[m.start..m.end].iter().collect();
            println!(
                "  [{:>2}..{:>2}] {:?} -> {:?}",
                m.start, m.end, surface, m.replacement
            );
        }
        println!();
    }
}
