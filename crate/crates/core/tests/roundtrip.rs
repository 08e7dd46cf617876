use proptest::prelude::*;
use skillweak::corpus::{bio_from_spans, parse_conll_str, spans_from_bio, write_conll};
use skillweak::embeddings::{EmbeddingStore, Pooling, StoreKey, StoreKind};
use skillweak::{BioTag, Dataset, PredSpan, Predictions, SentencePrediction, Sentence, Span, SpanLabel, Split, Token, Upos};

/// Sorted, non-overlapping spans inside `0..len`.
fn spans_strategy() -> impl Strategy<Value = (usize, Vec<Span>)> {
    (1usize..40).prop_flat_map(|len| {
        let cuts = proptest::collection::vec((any::<bool>(), 1usize..5, any::<bool>()), 0..len);
        (Just(len), cuts).prop_map(|(len, cuts)| {
            let mut spans = Vec::new();
            let mut pos = 0;
            for (take, width, knowledge) in cuts {
                if pos >= len {
                    break;
                }
                let end = (pos + width).min(len);
                if take {
                    let label = if knowledge { SpanLabel::Knowledge } else { SpanLabel::Skill };
                    spans.push(Span::new(pos, end, label));
                }
                pos = end;
            }
            (len, spans)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn spans_survive_bio(input in spans_strategy()) {
        let (len, spans) = input;
        let tags = bio_from_spans(&spans, len).unwrap();
        prop_assert_eq!(tags.len(), len);
        prop_assert_eq!(spans_from_bio(&tags), spans);
    }

    #[test]
    fn repaired_bio_survives_spans(raw in proptest::collection::vec(0u8..5, 0..30)) {
        let mut tags: Vec<BioTag> = raw
            .iter()
            .map(|r| match r {
                0 => BioTag::Outside,
                1 => BioTag::Begin(SpanLabel::Skill),
                2 => BioTag::Inside(SpanLabel::Skill),
                3 => BioTag::Begin(SpanLabel::Knowledge),
                _ => BioTag::Inside(SpanLabel::Knowledge),
            })
            .collect();
        skillweak::corpus::repair_bio(&mut tags);
        let spans = spans_from_bio(&tags);
        prop_assert_eq!(bio_from_spans(&spans, tags.len()).unwrap(), tags);
    }

    #[test]
    fn store_survives_disk(
        dim in 1usize..12,
        rows in proptest::collection::vec(proptest::collection::vec(-1e3f32..1e3, 12), 1..20),
        contextual in any::<bool>(),
    ) {
        let kind = if contextual { StoreKind::ContextualTokens } else { StoreKind::Phrase };
        let mut store = EmbeddingStore::new(dim, kind, Pooling::MeanSubword, "prop").unwrap();
        for (i, r) in rows.iter().enumerate() {
            let key = if contextual {
                StoreKey::Token { sid: format!("s{}", i / 3), tid: i % 3 }
            } else {
                StoreKey::Phrase(format!("phrase \"{i}\" é"))
            };
            store.push(key, &r[..dim]).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        store.write(dir.path()).unwrap();
        let back = EmbeddingStore::read(dir.path()).unwrap();
        prop_assert_eq!(back.meta(), store.meta());
        prop_assert_eq!(back.keys(), store.keys());
        let bits = |s: &EmbeddingStore| s.matrix().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&store));
    }
}

fn dataset_strategy() -> impl Strategy<Value = Dataset> {
    let word = "[a-zA-Z][a-zA-Z0-9#+.-]{0,7}";
    let sentence = (spans_strategy(), proptest::collection::vec(word, 40), proptest::collection::vec(0usize..17, 40));
    proptest::collection::vec(sentence, 1..6).prop_map(|sents| {
        let sentences = sents
            .into_iter()
            .enumerate()
            .map(|(i, ((len, spans), words, pos))| {
                let tags = bio_from_spans(&spans, len).unwrap();
                let tokens = tags
                    .into_iter()
                    .enumerate()
                    .map(|(j, t)| {
                        Token::new(words[j].clone())
                            .with_lemma(words[j].to_lowercase())
                            .with_upos(Upos::ALL[pos[j]])
                            .with_bio(t)
                    })
                    .collect();
                Sentence::new(format!("s{i}"), tokens)
            })
            .collect();
        Dataset::new("rt", Split::Dev, sentences).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conll_survives_writing(d in dataset_strategy()) {
        let back = parse_conll_str(&write_conll(&d), "mem", "rt", Split::Dev).unwrap();
        prop_assert_eq!(back.sentences, d.sentences);
    }

    #[test]
    fn predictions_survive_jsonl(d in dataset_strategy(), score in proptest::option::of(-1.0f64..1.0)) {
        let p = Predictions::new(
            "m",
            d.sentences
                .iter()
                .map(|s| SentencePrediction {
                    id: s.id.clone(),
                    spans: s
                        .gold_spans()
                        .into_iter()
                        .map(|sp| PredSpan { skill_id: Some("x".into()), score, ..PredSpan::from(sp) })
                        .collect(),
                })
                .collect(),
        );
        let back = Predictions::read_jsonl(p.to_jsonl_string().as_bytes(), "m").unwrap();
        prop_assert_eq!(back, p);
    }
}
