//! Sample clips around targets and see how distractors decide NT / ET / HT.
//!
//! cargo run --example temporal_subsets

use forge::sampler::{classify_subset, find_distractors, sample_clip};
use forge::{
    Event, EventPattern, EventType, GameplaySession, MarioState, Relation, Role, SemanticChunk, StageType,
    StateInterval,
};

fn main() -> forge::Result<()> {
    let session = GameplaySession {
        id: 9,
        stage_type: StageType::new("castle"),
        duration_ms: 12_000,
        events: vec![
            Event::new(1, EventType::Eat, 1000).with(Role::Patient, "coin"),
            Event::new(2, EventType::Kill, 2000)
                .with(Role::Patient, "Goomba")
                .with(Role::Means, "stomping"),
            Event::new(3, EventType::Hit, 2500).with(Role::Patient, "item_block"),
            Event::new(4, EventType::Kill, 2900)
                .with(Role::Patient, "BuzzyBeetle")
                .with(Role::Means, "shell"),
            Event::new(5, EventType::Kill, 9000)
                .with(Role::Patient, "Lakitu")
                .with(Role::Means, "fireball"),
        ],
        states: vec![StateInterval::new(MarioState::FireForm, 0, 12_000)],
    };

    for (target_id, seed) in [(2, 1), (5, 2)] {
        let target = session.event(target_id).expect("target");
        let clip = sample_clip(&session, target, seed)?;
        let distractors = find_distractors(&clip, &session, target)?;
        println!(
            "target {target} in clip [{}, {}] ms: {} distractor(s)",
            clip.start_ms,
            clip.end_ms,
            distractors.len()
        );
        let open = SemanticChunk::event_centric(target, Role::Patient);
        println!("  unconstrained -> {}", classify_subset(&clip, &session, &open)?);
        for reference in &session.events {
            if reference.id == target.id || !clip.contains(reference.time_ms) {
                continue;
            }
            let relation = if reference.time_ms < target.time_ms {
                Relation::After
            } else {
                Relation::Before
            };
            let mut pattern = EventPattern::new(reference.etype);
            if let Some(p) = reference.arg(Role::Patient) {
                pattern = pattern.with(Role::Patient, p.as_str());
            }
            let chunk = open.clone().constrained(relation, pattern.clone());
            println!(
                "  {} {pattern} -> {}",
                relation.as_str(),
                classify_subset(&clip, &session, &chunk)?
            );
        }
    }
    Ok(())
}
