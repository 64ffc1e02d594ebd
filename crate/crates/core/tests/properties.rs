use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;

use forge::attention::{
    attend_with_weights, average_pool_embed, softmax, temporal_attention, temporal_attention_single, uniform_weights,
    Fixture,
};
use forge::dataset::{cap_duplicates, split, split_counts, Dataset};
use forge::generator::{generate, GenerationConfig};
use forge::jsonl::{read_jsonl, to_jsonl_string};
use forge::oracle;
use forge::sampler::sample_clip;
use forge::simulator::{simulate_batch, SimulatorConfig};
use forge::{
    Event, EventPattern, EventType, GameplaySession, Lexicon, MarioState, QaPair, Relation, Role, SemanticChunk,
    SplitName, StageType, StateInterval, Subset, TemplatePool,
};

fn short_config(duration_ms: u64) -> SimulatorConfig {
    SimulatorConfig {
        duration_ms,
        ..SimulatorConfig::default()
    }
}

fn jump_log() -> impl Strategy<Value = GameplaySession> {
    (prop::collection::btree_set(0u64..6000, 1..12), 0u64..6000).prop_map(|(times, throw_at)| {
        let mut events: Vec<Event> = times.into_iter().map(|t| Event::new(0, EventType::Jump, t)).collect();
        events.push(Event::new(0, EventType::Throw, throw_at).with(Role::Patient, "shell"));
        events.sort_by_key(|e| e.time_ms);
        for (i, e) in events.iter_mut().enumerate() {
            e.id = i as u64 + 1;
        }
        GameplaySession {
            id: 3,
            stage_type: StageType::new("cave"),
            duration_ms: 6000,
            events,
            states: vec![StateInterval::new(MarioState::Small, 0, 6000)],
        }
    })
}

fn qa_pairs() -> impl Strategy<Value = Vec<QaPair>> {
    let subset = prop_oneof![Just(Subset::NT), Just(Subset::ET), Just(Subset::HT)];
    prop::collection::vec((0usize..4, 0usize..3, subset), 0..120).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (q, a, subset))| QaPair {
                id: format!("x{i}"),
                q: format!("question {q}"),
                a: format!("answer {a}"),
                subset,
                qtype: forge::QuestionType::Counting,
                session: 1,
                clip: [0, 3000],
                template: "t".into(),
                chunk: SemanticChunk::counting(EventPattern::new(EventType::Jump), 1),
                split: None,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sessions_round_trip_through_jsonl(seed in any::<u64>()) {
        let sessions = simulate_batch(&short_config(15_000), seed, 2).unwrap();
        let text = to_jsonl_string(&sessions);
        let back: Vec<GameplaySession> = read_jsonl(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &sessions);
        prop_assert_eq!(to_jsonl_string(&back), text);
    }

    #[test]
    fn sampled_clips_hold_their_target(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let session = &simulate_batch(&short_config(12_000), seed, 1).unwrap()[0];
        prop_assume!(!session.events.is_empty());
        let target = &session.events[pick.index(session.events.len())];
        let clip = sample_clip(session, target, seed ^ 0x5eed).unwrap();
        prop_assert!((3000..=6000).contains(&clip.duration_ms()));
        prop_assert!(clip.contains(target.time_ms));
        prop_assert!(clip.end_ms <= session.duration_ms);
        prop_assert_eq!(clip, sample_clip(session, target, seed ^ 0x5eed).unwrap());
    }

    #[test]
    fn constraints_never_add_matches(session in jump_log(), relation in prop_oneof![
        Just(Relation::Before), Just(Relation::After), Just(Relation::When)
    ]) {
        let clip = forge::Clip { session_id: 3, start_ms: 0, end_ms: 6000, target_event_id: 1 };
        let open = SemanticChunk::counting(EventPattern::new(EventType::Jump), 1);
        let constrained = open.clone().constrained(relation, EventPattern::new(EventType::Throw).with(Role::Patient, "shell"));
        let all = oracle::surviving_events(&open, &clip, &session).unwrap();
        let kept = oracle::surviving_events(&constrained, &clip, &session).unwrap();
        prop_assert!(kept.len() <= all.len());
        prop_assert!(kept.iter().all(|e| all.iter().any(|a| a.id == e.id)));

        let throw = session.events.iter().find(|e| e.etype == EventType::Throw).unwrap().time_ms;
        let direct = session.events.iter().filter(|e| e.etype == EventType::Jump).filter(|e| match relation {
            Relation::Before => e.time_ms < throw,
            Relation::After => e.time_ms > throw,
            Relation::When => e.time_ms.abs_diff(throw) <= 250,
        }).count();
        let lexicon = Lexicon::default_mario();
        let answer = oracle::answer(&constrained, &clip, &session, &lexicon).unwrap();
        let direct = direct.to_string();
        prop_assert_eq!(answer.unique(), Some(direct.as_str()));
    }

    #[test]
    fn capping_is_bounded_and_idempotent(pairs in qa_pairs(), cap in 1usize..4, seed in any::<u64>()) {
        let capped = cap_duplicates(&pairs, cap, seed);
        let mut groups: HashMap<(&str, &str), usize> = HashMap::new();
        for e in &capped {
            *groups.entry((&e.q, &e.a)).or_default() += 1;
        }
        prop_assert!(groups.values().all(|&n| n <= cap));
        let mut before: HashMap<(&str, &str), usize> = HashMap::new();
        for e in &pairs {
            *before.entry((&e.q, &e.a)).or_default() += 1;
        }
        for (k, n) in &before {
            prop_assert_eq!(groups.get(k).copied().unwrap_or(0), (*n).min(cap));
        }
        // survivors keep their original relative order
        let positions: Vec<usize> = capped.iter().map(|e| pairs.iter().position(|p| p.id == e.id).unwrap()).collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(cap_duplicates(&capped, cap, seed.wrapping_add(1)), capped);
    }

    #[test]
    fn split_partitions_each_subset(pairs in qa_pairs(), seed in any::<u64>()) {
        let out = split(&Dataset::new(pairs.clone()), (0.6, 0.2, 0.2), seed).unwrap();
        prop_assert_eq!(out.examples.len(), pairs.len());
        let mut sizes: BTreeMap<(Subset, SplitName), usize> = BTreeMap::new();
        for e in &out.examples {
            let name = e.split.expect("every example is assigned");
            *sizes.entry((e.subset, name)).or_default() += 1;
        }
        for subset in Subset::ALL {
            let n = pairs.iter().filter(|e| e.subset == subset).count();
            let (tr, va, te) = split_counts(n, (0.6, 0.2, 0.2)).unwrap();
            prop_assert_eq!(tr + va + te, n);
            let got = |s| sizes.get(&(subset, s)).copied().unwrap_or(0);
            prop_assert_eq!((got(SplitName::Train), got(SplitName::Valid), got(SplitName::Test)), (tr, va, te));
        }
        prop_assert_eq!(split(&Dataset::new(pairs), (0.6, 0.2, 0.2), seed).unwrap(), out);
    }

    #[test]
    fn attention_weights_are_distributions(seed in any::<u64>()) {
        let f = Fixture::random_bounded(seed);
        let v = f.volume().unwrap();
        let q = f.question();
        let single = temporal_attention_single(&v, &q, &f.att).unwrap();
        let multi = temporal_attention(&v, &q, &f.att, f.dims.steps).unwrap();
        prop_assert_eq!(multi.alphas.len(), f.dims.steps);
        for a in single.alphas.iter().chain(&multi.alphas) {
            prop_assert_eq!(a.len(), f.dims.t);
            prop_assert!(a.iter().all(|&x| x >= 0.0));
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        let ap = average_pool_embed(&v);
        let uniform = attend_with_weights(&v, &uniform_weights(f.dims.t, f.dims.h, f.dims.w)).unwrap();
        prop_assert!(ap.iter().zip(&uniform).all(|(a, b)| (a - b).abs() <= 1e-9));
    }

    #[test]
    fn softmax_is_shift_invariant(xs in prop::collection::vec(-50.0f64..50.0, 1..10), c in -100.0f64..100.0) {
        let p = softmax(&xs);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let p2 = softmax(&shifted);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(p.iter().zip(&p2).all(|(a, b)| (a - b).abs() <= 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn generated_pairs_agree_with_the_oracle(seed in any::<u64>()) {
        let sessions = simulate_batch(&short_config(30_000), seed, 2).unwrap();
        let config = GenerationConfig { seed: seed.rotate_left(7), ..GenerationConfig::default() };
        let lexicon = Lexicon::default_mario();
        let pairs = generate(&sessions, &TemplatePool::default_pool(), &lexicon, &config).unwrap();
        let by_id: HashMap<u64, &GameplaySession> = sessions.iter().map(|s| (s.id, s)).collect();
        for qa in &pairs {
            let s = by_id[&qa.session];
            let clip = qa.clip();
            prop_assert!(clip.validate(s).is_ok());
            let answers = oracle::answer(&qa.chunk, &clip, s, &lexicon).unwrap();
            prop_assert_eq!(answers.unique(), Some(qa.a.as_str()), "{}", qa.q);
            prop_assert_eq!(qa.subset == Subset::NT, qa.chunk.constraint.is_none());
        }
    }
}
