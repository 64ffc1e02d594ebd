//! Ask the brute-force oracle about a small hand-written log.
//!
//! cargo run --example oracle_queries

use forge::oracle::{answer, apply_constraint, match_events};
use forge::{
    Clip, Event, EventPattern, EventType, GameplaySession, Lexicon, MarioState, Predicate, Relation, Role,
    SemanticChunk, StageType, StateInterval, TemporalConstraint,
};

fn main() -> forge::Result<()> {
    let session = GameplaySession {
        id: 1,
        stage_type: StageType::new("cave"),
        duration_ms: 6000,
        events: vec![
            Event::new(1, EventType::Jump, 500),
            Event::new(2, EventType::Throw, 1000).with(Role::Patient, "shell"),
            Event::new(3, EventType::Jump, 1500),
            Event::new(4, EventType::Jump, 2000),
            Event::new(5, EventType::Kill, 3200)
                .with(Role::Patient, "PGoomba")
                .with(Role::Means, "stomping"),
        ],
        states: vec![
            StateInterval::new(MarioState::Small, 0, 2500),
            StateInterval::new(MarioState::Super, 2500, 6000),
        ],
    };
    let clip = Clip {
        session_id: 1,
        start_ms: 0,
        end_ms: 4000,
        target_event_id: 1,
    };
    let lexicon = Lexicon::default_mario();

    let jumps = match_events(&EventPattern::new(EventType::Jump), &clip, &session)?;
    let after_throw = TemporalConstraint {
        relation: Relation::After,
        reference: EventPattern::new(EventType::Throw).with(Role::Patient, "shell"),
    };
    let kept = apply_constraint(&jumps, &after_throw, &clip, &session)?;
    println!("jumps in clip: {}, after the shell throw: {}", jumps.len(), kept.len());

    let count = SemanticChunk::counting(EventPattern::new(EventType::Jump), 1);
    let constrained = count
        .clone()
        .constrained(Relation::After, after_throw.reference.clone());
    let kill = session.event(5).expect("kill event");
    let queries = [
        ("count(jump)", count),
        ("count(jump) after throw(shell)", constrained),
        ("kill(?, stomping)", SemanticChunk::event_centric(kill, Role::Patient)),
        ("kill(PGoomba, ?)", SemanticChunk::event_centric(kill, Role::Means)),
        ("stage", SemanticChunk::state(Predicate::StageType, 1)),
        (
            "mario_state over the clip",
            SemanticChunk::state(Predicate::MarioState, 1),
        ),
        (
            "mario_state when kill(PGoomba)",
            SemanticChunk::state(Predicate::MarioState, 1).constrained(
                Relation::When,
                EventPattern::new(EventType::Kill).with(Role::Patient, "PGoomba"),
            ),
        ),
    ];
    for (label, chunk) in queries {
        let answers = answer(&chunk, &clip, &session, &lexicon)?;
        let shown: Vec<&str> = answers.0.iter().map(String::as_str).collect();
        let verdict = if answers.len() == 1 { "unique" } else { "rejected" };
        println!("{label:<34} -> {shown:?} ({verdict})");
    }

    let ambiguous =
        SemanticChunk::state(Predicate::MarioState, 1).constrained(Relation::When, EventPattern::new(EventType::Jump));
    match answer(&ambiguous, &clip, &session, &lexicon) {
        Err(e) => println!("mario_state when jump -> {e}"),
        Ok(a) => println!("mario_state when jump -> {a:?}"),
    }
    Ok(())
}
