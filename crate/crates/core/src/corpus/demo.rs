//! Synthetic case-law generator used by `--demo` and the test suites.
//!
//! Premise, conclusion and non-argument clauses draw from disjoint content
//! vocabularies, and every clause of an argument mentions that argument's
//! topic, so all three tasks are learnable without external data.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{detect_law_section, CaseType, Clause, Corpus, Document, Membership, Role};

const FACT_WORDS: &[&str] = &[
    "born", "lives", "lodged", "hearing", "police", "arrested", "registry", "submitted", "hospital",
    "municipal", "transferred", "summoned", "delivered", "received", "officer", "property",
];
const PREMISE_WORDS: &[&str] = &[
    "reiterates", "recalls", "observes", "established", "case-law", "principle", "requires",
    "guarantee", "margin", "appreciation", "proportionate", "necessary", "interference", "safeguards",
];
const CONCLUSION_WORDS: &[&str] = &[
    "accordingly", "therefore", "violation", "inadmissible", "manifestly", "ill-founded", "rejected",
    "finds", "concludes", "declares", "unanimously", "dismisses",
];
const TOPICS: &[&str] = &[
    "article-3", "article-5", "article-6", "article-8", "article-10", "article-13", "article-14",
    "protocol-1", "detention", "fairness", "privacy", "expression",
];

#[derive(Clone, Debug)]
pub struct DemoOptions {
    pub documents: usize,
    pub seed: u64,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions { documents: 12, seed: 0 }
    }
}

fn sentence(rng: &mut ChaCha8Rng, vocab: &[&str], topic: Option<&str>) -> String {
    let n = rng.random_range(5..=9);
    let mut words: Vec<&str> = vec!["the"];
    words.extend((0..n).map(|_| *vocab.choose(rng).expect("non-empty vocabulary")));
    if let Some(t) = topic {
        let at = rng.random_range(1..=words.len());
        words.insert(at, t);
    }
    let mut s = words.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s.push('.');
    s
}

pub fn demo_corpus(options: &DemoOptions) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let n = options.documents;
    // 20 of 42 documents are decisions; keep that ratio at any size.
    let decisions = (n * 20 + 21) / 42;
    let documents = (0..n)
        .map(|d| {
            let case_type = if d < decisions {
                CaseType::Decision
            } else {
                CaseType::Judgement
            };
            demo_document(&mut rng, &format!("demo-{d:03}"), case_type)
        })
        .collect();
    Corpus {
        documents,
        provenance: format!("synthetic demo corpus (documents={n}, seed={})", options.seed),
        warnings: Vec::new(),
    }
}

fn demo_document(rng: &mut ChaCha8Rng, document_id: &str, case_type: CaseType) -> Document {
    // (text, memberships)
    let mut raw: Vec<(String, Vec<Membership>)> = Vec::new();

    for _ in 0..rng.random_range(5..=8) {
        raw.push((sentence(rng, FACT_WORDS, None), vec![]));
    }
    let heading = if rng.random_bool(0.5) { "THE LAW" } else { "AS TO THE LAW" };
    raw.push((heading.to_string(), vec![]));

    let n_args = rng.random_range(3..=5);
    let mut topics: Vec<&str> = TOPICS.to_vec();
    topics.sort_by_key(|_| rng.random::<u32>());
    let mut previous_conclusion: Option<usize> = None;
    for a in 0..n_args {
        let argument_id = format!("{document_id}-A{a}");
        let topic = topics[a % topics.len()];
        // Occasionally the previous conclusion also supports this argument.
        if let Some(idx) = previous_conclusion.filter(|_| rng.random_bool(0.3)) {
            raw[idx].1.push(Membership {
                argument_id: argument_id.clone(),
                role: Role::Premise,
            });
        }
        for _ in 0..rng.random_range(2..=3) {
            raw.push((
                sentence(rng, PREMISE_WORDS, Some(topic)),
                vec![Membership {
                    argument_id: argument_id.clone(),
                    role: Role::Premise,
                }],
            ));
        }
        if rng.random_bool(0.4) {
            raw.push((sentence(rng, FACT_WORDS, None), vec![]));
        }
        raw.push((
            sentence(rng, CONCLUSION_WORDS, Some(topic)),
            vec![Membership {
                argument_id,
                role: Role::Conclusion,
            }],
        ));
        previous_conclusion = Some(raw.len() - 1);
    }
    raw.push((sentence(rng, FACT_WORDS, None), vec![]));

    let clauses = raw
        .into_iter()
        .enumerate()
        .map(|(i, (text, mut memberships))| {
            memberships.sort();
            Clause {
                clause_id: format!("{document_id}-c{i:03}"),
                document_id: document_id.to_string(),
                order_index: i,
                text,
                memberships,
            }
        })
        .collect();
    let mut doc = Document {
        document_id: document_id.to_string(),
        case_type,
        clauses,
        law_section_start: None,
    };
    doc.law_section_start = detect_law_section(&doc);
    doc
}
