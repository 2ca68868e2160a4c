//! Synthetic comparison-QA generator with planted logic.
//!
//! The classification world gives every noun a fixed direction: when a
//! process intensifies, each related noun rises or falls. A scene's
//! paragraph names a driver and states the direction of two effect nouns;
//! questions ask whether an effect goes up or down, phrased with a polarity
//! word from the bundled antonym dictionary, and labels follow the planted
//! directions exactly. Questions about nouns the paragraph never mentions
//! are labeled "no effect". Scenes may plant a symmetric partner (effect
//! polarity flipped, label relabeled) and a transitive triple
//! (driver -> event -> effect) with consistency links, so generated datasets
//! audit cleanly against their own gold labels.
//!
//! The choice world ranks entities globally along each adjective dimension;
//! paragraphs state one true comparison and questions ask for either end of
//! it.
//!
//! The training split draws the question's polarity wording so it agrees
//! with the planted direction with probability `bias` (the spurious surface
//! pattern a baseline exploits); the dev split is uniform. Everything is
//! deterministic under the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{ConsistencyLink, Dataset, Example, Origin, TaskFormat, WIQA_CANDIDATES};

/// Generator settings. `bias` and `train_sym_fraction` shape the training
/// split; `dev_sym_fraction` controls how densely the dev split is linked.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub train_size: usize,
    pub dev_size: usize,
    pub vocab_size: usize,
    pub seed: u64,
    pub format: TaskFormat,
    /// Probability that a training question's polarity wording agrees with
    /// the planted direction (so its answer is "more" / the stated end).
    /// Dev questions are drawn uniformly.
    pub bias: f64,
    /// Fraction of training base questions with a planted symmetric partner.
    pub train_sym_fraction: f64,
    /// Fraction of dev base questions with a planted symmetric partner.
    pub dev_sym_fraction: f64,
    /// Fraction of classification scenes that plant a transitive triple.
    pub trans_fraction: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            train_size: 2000,
            dev_size: 500,
            vocab_size: 30,
            seed: 0,
            format: TaskFormat::Classification,
            bias: 0.9,
            train_sym_fraction: 0.1,
            dev_sym_fraction: 0.75,
            trans_fraction: 0.4,
        }
    }
}

const NOUNS: [&str; 40] = [
    "rain", "erosion", "moisture", "heat", "steam", "salt", "wind", "soil", "sunlight", "ice",
    "snow", "runoff", "sediment", "algae", "oxygen", "rust", "friction", "pressure", "noise",
    "dust", "pollen", "bacteria", "mold", "smoke", "fog", "frost", "humidity", "shade", "growth",
    "decay", "waves", "current", "silt", "clay", "gravel", "foam", "vapor", "drift", "glare",
    "thaw",
];

const ENTITIES: [&str; 24] = [
    "falcon", "turtle", "cheetah", "snail", "oak", "fern", "granite", "chalk", "steel", "cork",
    "comet", "glacier", "rocket", "wagon", "eagle", "sloth", "shark", "jellyfish", "hare",
    "tortoise", "otter", "heron", "walrus", "finch",
];

/// Adjective pairs used by choice scenes; all are entries of the bundled
/// antonym dictionary so the augmenter can rewrite generated questions.
const CHOICE_ADJECTIVES: [(&str, &str); 6] = [
    ("faster", "slower"),
    ("stronger", "weaker"),
    ("larger", "smaller"),
    ("higher", "lower"),
    ("warmer", "cooler"),
    ("heavier", "lighter"),
];

fn vocab(base: &[&str], prefix: &str, size: usize) -> Vec<String> {
    (0..size.max(6))
        .map(|i| {
            base.get(i)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("{prefix}{i}"))
        })
        .collect()
}

fn pol_word(sign: i8) -> &'static str {
    if sign > 0 {
        "more"
    } else {
        "less"
    }
}

fn rand_sign(rng: &mut ChaCha8Rng) -> i8 {
    if rng.gen_bool(0.5) {
        1
    } else {
        -1
    }
}

struct SplitBuilder {
    prefix: char,
    counter: usize,
    examples: Vec<Example>,
    links: Vec<ConsistencyLink>,
}

impl SplitBuilder {
    fn new(prefix: char) -> Self {
        SplitBuilder {
            prefix,
            counter: 0,
            examples: Vec::new(),
            links: Vec::new(),
        }
    }

    fn next_id(&mut self) -> String {
        let id = format!("{}{:05}", self.prefix, self.counter);
        self.counter += 1;
        id
    }

    fn finish(mut self, size: usize) -> Dataset {
        self.examples.truncate(size);
        let ids: std::collections::HashSet<&str> =
            self.examples.iter().map(|e| e.id.as_str()).collect();
        self.links
            .retain(|l| l.members.iter().all(|m| ids.contains(m.as_str())));
        Dataset::new(self.examples, self.links).expect("generated dataset is valid")
    }
}

/// How the cause clause of a causal question is phrased.
#[derive(Debug, Clone)]
enum Cause {
    /// "If the amount of {noun} goes up, ..." -- intensifies the process.
    Driver(String),
    /// "If {noun} goes above normal, ..." -- the event "more {noun}".
    EventAbove(String),
}

#[derive(Debug, Clone)]
struct CausalQuestion {
    id: String,
    cause: Cause,
    effect_pol: i8,
    effect_noun: String,
    /// 0 = more, 1 = less, 2 = no effect.
    gold: usize,
}

fn push_causal(builder: &mut SplitBuilder, paragraph: &str, q: &CausalQuestion) {
    let (cause_text, cause_annotation) = match &q.cause {
        Cause::Driver(noun) => {
            let text = format!("the amount of {noun} goes up");
            (text.clone(), text)
        }
        Cause::EventAbove(noun) => (
            format!("{noun} goes above normal"),
            format!("more {noun}"),
        ),
    };
    let effect = format!("{} {}", pol_word(q.effect_pol), q.effect_noun);
    builder.examples.push(Example {
        id: q.id.clone(),
        format: TaskFormat::Classification,
        paragraph: paragraph.to_owned(),
        question: format!("If {cause_text}, will there be {effect}?"),
        candidates: WIQA_CANDIDATES.iter().map(|s| s.to_string()).collect(),
        gold: q.gold,
        cause: Some(cause_annotation),
        effect: Some(effect),
        origin: Origin::Original,
    });
}

/// Plants the effect-flipped partner of `base` and links the two.
fn plant_symmetric(builder: &mut SplitBuilder, paragraph: &str, base: &CausalQuestion) {
    let id = builder.next_id();
    let gold = match base.gold {
        0 => 1,
        1 => 0,
        other => other,
    };
    let partner = CausalQuestion {
        id: id.clone(),
        cause: base.cause.clone(),
        effect_pol: -base.effect_pol,
        effect_noun: base.effect_noun.clone(),
        gold,
    };
    push_causal(builder, paragraph, &partner);
    builder
        .links
        .push(ConsistencyLink::symmetric(&base.id, &id));
}

/// Effect polarity wording: agrees with the planted direction with
/// probability `bias`, otherwise uniform.
fn draw_pol(rng: &mut ChaCha8Rng, direction: i8, bias: f64) -> i8 {
    if rng.gen_bool(bias) {
        direction
    } else {
        rand_sign(rng)
    }
}

fn classification_split(
    config: &ToyConfig,
    polarity: &[i8],
    rng: &mut ChaCha8Rng,
    prefix: char,
    size: usize,
    bias: f64,
    sym_fraction: f64,
) -> Dataset {
    let nouns = vocab(&NOUNS, "factor", config.vocab_size);
    let positive: Vec<usize> = (0..nouns.len()).filter(|&i| polarity[i] > 0).collect();
    let mut builder = SplitBuilder::new(prefix);

    while builder.examples.len() < size {
        let plant_triple = rng.gen_bool(config.trans_fraction);

        // Driver a moves b and c; x never appears in the paragraph.
        // Transitive scenes need a middle noun that rises with the process
        // so the chained event reads "more {b}".
        let mut picks: Vec<usize> = Vec::new();
        while picks.len() < 4 {
            let candidate = if picks.len() == 1 && plant_triple {
                positive[rng.gen_range(0..positive.len())]
            } else {
                rng.gen_range(0..nouns.len())
            };
            if !picks.contains(&candidate) {
                picks.push(candidate);
            }
        }
        let (a, b, c, x) = (
            nouns[picks[0]].clone(),
            nouns[picks[1]].clone(),
            nouns[picks[2]].clone(),
            nouns[picks[3]].clone(),
        );
        let (wb, wc) = (polarity[picks[1]], polarity[picks[2]]);
        let paragraph = format!(
            "When the amount of {a} goes up, {} {b} follows and {} {c} follows.",
            pol_word(wb),
            pol_word(wc),
        );

        let mut scene: Vec<CausalQuestion> = Vec::new();

        // Question about b: forced to the planted direction when a triple
        // is planted (its answer must be "more" to compose).
        let pol_b = if plant_triple {
            wb
        } else {
            draw_pol(rng, wb, bias)
        };
        let q_b = CausalQuestion {
            id: builder.next_id(),
            cause: Cause::Driver(a.clone()),
            effect_pol: pol_b,
            effect_noun: b.clone(),
            gold: if pol_b == wb { 0 } else { 1 },
        };
        push_causal(&mut builder, &paragraph, &q_b);
        scene.push(q_b.clone());

        if plant_triple {
            // Event question: given "more b", where does c go?
            let pol_c = draw_pol(rng, wc, bias);
            let q2 = CausalQuestion {
                id: builder.next_id(),
                cause: Cause::EventAbove(b.clone()),
                effect_pol: pol_c,
                effect_noun: c.clone(),
                gold: if pol_c == wc { 0 } else { 1 },
            };
            push_causal(&mut builder, &paragraph, &q2);
            let q_trans = CausalQuestion {
                id: builder.next_id(),
                cause: Cause::Driver(a.clone()),
                effect_pol: pol_c,
                effect_noun: c.clone(),
                gold: q2.gold,
            };
            push_causal(&mut builder, &paragraph, &q_trans);
            builder
                .links
                .push(ConsistencyLink::transitive(&q_b.id, &q2.id, &q_trans.id));
            scene.push(q2);
        } else {
            let pol_c = draw_pol(rng, wc, bias);
            let q_c = CausalQuestion {
                id: builder.next_id(),
                cause: Cause::Driver(a.clone()),
                effect_pol: pol_c,
                effect_noun: c.clone(),
                gold: if pol_c == wc { 0 } else { 1 },
            };
            push_causal(&mut builder, &paragraph, &q_c);
            scene.push(q_c);
        }

        // A question about a noun the paragraph never mentions: "no effect".
        let q_x = CausalQuestion {
            id: builder.next_id(),
            cause: Cause::Driver(a.clone()),
            effect_pol: rand_sign(rng),
            effect_noun: x.clone(),
            gold: 2,
        };
        push_causal(&mut builder, &paragraph, &q_x);
        scene.push(q_x);

        for base in &scene {
            if rng.gen_bool(sym_fraction) {
                plant_symmetric(&mut builder, &paragraph, base);
            }
        }
    }
    builder.finish(size)
}

fn choice_split(
    config: &ToyConfig,
    ranks: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
    prefix: char,
    size: usize,
    bias: f64,
    sym_fraction: f64,
) -> Dataset {
    let entities = vocab(&ENTITIES, "entity", config.vocab_size);
    let mut builder = SplitBuilder::new(prefix);

    while builder.examples.len() < size {
        let dim = rng.gen_range(0..CHOICE_ADJECTIVES.len());
        let (adj, opposite) = CHOICE_ADJECTIVES[dim];
        let i = rng.gen_range(0..entities.len());
        let mut j = rng.gen_range(0..entities.len());
        while j == i {
            j = rng.gen_range(0..entities.len());
        }
        // The paragraph states the true comparison along this dimension.
        let (hi, lo) = if ranks[dim][i] > ranks[dim][j] {
            (entities[i].clone(), entities[j].clone())
        } else {
            (entities[j].clone(), entities[i].clone())
        };
        let paragraph = format!("The {hi} is {adj} than the {lo}.");
        let candidates = if rng.gen_bool(0.5) {
            vec![hi.clone(), lo.clone()]
        } else {
            vec![lo.clone(), hi.clone()]
        };

        let ask_stated = if rng.gen_bool(bias) {
            true
        } else {
            rng.gen_bool(0.5)
        };
        let adj_q = if ask_stated { adj } else { opposite };
        let winner = if adj_q == adj { &hi } else { &lo };
        let gold = candidates.iter().position(|c| c == winner).expect("winner listed");
        let id = builder.next_id();
        builder.examples.push(Example {
            id: id.clone(),
            format: TaskFormat::MultipleChoice,
            paragraph: paragraph.clone(),
            question: format!("Which one is {adj_q}?"),
            candidates: candidates.clone(),
            gold,
            cause: None,
            effect: None,
            origin: Origin::Original,
        });

        if rng.gen_bool(sym_fraction) {
            let flipped = if adj_q == adj { opposite } else { adj };
            let partner_id = builder.next_id();
            builder.examples.push(Example {
                id: partner_id.clone(),
                format: TaskFormat::MultipleChoice,
                paragraph,
                question: format!("Which one is {flipped}?"),
                candidates,
                gold: 1 - gold,
                cause: None,
                effect: None,
                origin: Origin::Original,
            });
            builder
                .links
                .push(ConsistencyLink::symmetric(&id, &partner_id));
        }
    }
    builder.finish(size)
}

/// Generates the train and held-out dev splits. Train uses `config.bias`;
/// dev draws polarity wording uniformly. The planted world (noun directions,
/// entity rankings) is shared by both splits.
pub fn generate(config: &ToyConfig) -> (Dataset, Dataset) {
    let mut world_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f0d_ab1e_c0de);
    let mut train_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut dev_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));

    match config.format {
        TaskFormat::Classification => {
            let n = config.vocab_size.max(6);
            let mut polarity: Vec<i8> = (0..n).map(|_| rand_sign(&mut world_rng)).collect();
            if !polarity.contains(&1) {
                polarity[0] = 1;
            }
            let train = classification_split(
                config,
                &polarity,
                &mut train_rng,
                't',
                config.train_size,
                config.bias,
                config.train_sym_fraction,
            );
            let dev = classification_split(
                config,
                &polarity,
                &mut dev_rng,
                'd',
                config.dev_size,
                0.0,
                config.dev_sym_fraction,
            );
            (train, dev)
        }
        TaskFormat::MultipleChoice => {
            let n = config.vocab_size.max(6);
            let ranks: Vec<Vec<usize>> = (0..CHOICE_ADJECTIVES.len())
                .map(|_| {
                    let mut order: Vec<usize> = (0..n).collect();
                    for i in (1..order.len()).rev() {
                        let j = world_rng.gen_range(0..=i);
                        order.swap(i, j);
                    }
                    order
                })
                .collect();
            let train = choice_split(
                config,
                &ranks,
                &mut train_rng,
                't',
                config.train_size,
                config.bias,
                config.train_sym_fraction,
            );
            let dev = choice_split(
                config,
                &ranks,
                &mut dev_rng,
                'd',
                config.dev_size,
                0.0,
                config.dev_sym_fraction,
            );
            (train, dev)
        }
    }
}
