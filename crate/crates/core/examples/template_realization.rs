//! Realize one semantic chunk with every matching template, then parse the
//! questions back.
//!
//! cargo run --example template_realization

use forge::template::realize;
use forge::{
    Clip, Event, EventPattern, EventType, GameplaySession, Lexicon, MarioState, Relation, Role, SemanticChunk,
    StageType, StateInterval, TemplatePool,
};

fn main() -> forge::Result<()> {
    let session = GameplaySession {
        id: 1,
        stage_type: StageType::new("overground"),
        duration_ms: 5000,
        events: vec![
            Event::new(1, EventType::Hit, 800).with(Role::Patient, "coin_block"),
            Event::new(2, EventType::Kill, 1600)
                .with(Role::Patient, "Goomba")
                .with(Role::Means, "stomping"),
            Event::new(3, EventType::Kill, 2900)
                .with(Role::Patient, "Spiny")
                .with(Role::Means, "fireball"),
        ],
        states: vec![StateInterval::new(MarioState::Super, 0, 5000)],
    };
    let clip = Clip {
        session_id: 1,
        start_ms: 0,
        end_ms: 4000,
        target_event_id: 2,
    };
    let lexicon = Lexicon::default_mario();
    let pool = TemplatePool::default_pool();

    let chunk = SemanticChunk::event_centric(session.event(2).expect("kill"), Role::Patient).constrained(
        Relation::After,
        EventPattern::new(EventType::Hit).with(Role::Patient, "coin_block"),
    );
    println!("chunk signature: {}", chunk.signature());
    for template in pool.matching(&chunk.signature()) {
        let r = realize(template, &chunk, &clip, &session, &lexicon)?;
        println!("  [{}] {}  ->  {}", template.id, r.question, r.answer);
        let parsed = template
            .parse_question(&r.question, &lexicon)
            .expect("generated questions parse back");
        println!("      parsed args {:?}, relation {:?}", parsed.args, parsed.relation);
    }

    let missing = SemanticChunk::counting(EventPattern::new(EventType::Kill).with(Role::Location, "hill"), 2);
    match forge::template::select_template(&pool, &missing, 0) {
        Err(e) => println!("\n{e}"),
        Ok(t) => println!("\nunexpected template {}", t.id),
    }
    Ok(())
}
