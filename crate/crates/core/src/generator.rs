//! QA-pair generation: chunk formation around each target event, constraint
//! attachment, uniqueness filtering, template selection and realization.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunk::{EventPattern, Predicate, QuestionType, Relation, SemanticChunk, TEMPORAL_MARKERS};
use crate::dataset::SplitName;
use crate::error::{ForgeError, Result};
use crate::lexicon::Lexicon;
use crate::model::{events_in, Clip, Event, GameplaySession};
use crate::oracle;
use crate::rng::{mix_seed, SimRng};
use crate::sampler::{classify_subset, find_distractors, sample_clip, Subset};
use crate::template::{realize, select_template, TemplatePool};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub id: String,
    pub q: String,
    pub a: String,
    pub subset: Subset,
    pub qtype: QuestionType,
    pub session: u64,
    /// `[start_ms, end_ms]` of the clip.
    pub clip: [u64; 2],
    pub template: String,
    pub chunk: SemanticChunk,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitName>,
}

impl QaPair {
    pub fn clip(&self) -> Clip {
        Clip {
            session_id: self.session,
            start_ms: self.clip[0],
            end_ms: self.clip[1],
            target_event_id: self.chunk.target,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub seed: u64,
    /// Counting chunks kept per clip, drawn from all candidates.
    pub counting_per_clip: usize,
    /// State or stage chunks kept per clip.
    pub state_per_clip: usize,
    /// Constrained variants tried per base chunk.
    pub constrained_per_chunk: usize,
    /// Applied with `cap_duplicates` after generation when set.
    pub max_same_qa: Option<usize>,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            counting_per_clip: 1,
            state_per_clip: 1,
            constrained_per_chunk: 1,
            max_same_qa: None,
        }
    }
}

impl GenerationConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ForgeError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ForgeError::bad_config(path, &e))
    }
}

/// Unconstrained base chunks for a target inside its clip: one event-centric
/// chunk per argument role of the target, counting chunks for every event
/// type present in the clip (bare, and with each mandatory argument value
/// seen in the clip), and the Mario-state and stage probes.
pub fn form_chunks(
    target: &Event,
    clip: &Clip,
    session: &GameplaySession,
    lexicon: &Lexicon,
) -> Result<Vec<SemanticChunk>> {
    let mut out: Vec<SemanticChunk> = target
        .args
        .keys()
        .map(|&hole| SemanticChunk::event_centric(target, hole))
        .collect();

    let mut seen = BTreeSet::new();
    for event in events_in(clip, session)? {
        let bare = EventPattern::new(event.etype);
        if seen.insert(bare.clone()) {
            out.push(SemanticChunk::counting(bare, target.id));
        }
        let mandatory = lexicon.events.get(&event.etype).map(|s| &s.mandatory);
        for role in mandatory.into_iter().flatten() {
            if let Some(value) = event.arg(*role) {
                let pattern = EventPattern::new(event.etype).with(*role, value.as_str());
                if seen.insert(pattern.clone()) {
                    out.push(SemanticChunk::counting(pattern, target.id));
                }
            }
        }
    }

    out.push(SemanticChunk::state(Predicate::MarioState, target.id));
    out.push(SemanticChunk::state(Predicate::StageType, target.id));
    Ok(out)
}

/// Reference patterns that pick out exactly one clip event other than the
/// target, restricted to the roles the lexicon's clauses mention.
pub fn reference_candidates<'s>(
    target: &Event,
    clip: &Clip,
    session: &'s GameplaySession,
    lexicon: &Lexicon,
) -> Result<Vec<(EventPattern, &'s Event)>> {
    let events = events_in(clip, session)?;
    let mut out = Vec::new();
    for event in events.iter().filter(|e| e.id != target.id) {
        let Some(roles) = lexicon.clause_roles(event.etype) else {
            continue;
        };
        let mut pattern = EventPattern::new(event.etype);
        for role in roles {
            match event.arg(*role) {
                Some(v) => pattern = pattern.with(*role, v.as_str()),
                None => continue,
            }
        }
        if pattern.args.len() == roles.len() && events.iter().filter(|e| pattern.matches(e)).count() == 1 {
            out.push((pattern, event));
        }
    }
    Ok(out)
}

fn constrained_variants(
    base: &SemanticChunk,
    target: &Event,
    refs: &[(EventPattern, &Event)],
    rng: &mut SimRng,
    limit: usize,
) -> Vec<SemanticChunk> {
    let mut order: Vec<usize> = (0..refs.len()).collect();
    rng.shuffle(&mut order);
    let mut out = Vec::new();
    for i in order {
        if out.len() == limit {
            break;
        }
        let (pattern, event) = &refs[i];
        // a unique reference counted against itself always gives zero
        if base.qtype == QuestionType::Counting && base.pattern().as_ref() == Some(pattern) {
            continue;
        }
        let relation = match base.qtype {
            QuestionType::EventCentric => match target.time_ms.cmp(&event.time_ms) {
                std::cmp::Ordering::Less => Relation::Before,
                std::cmp::Ordering::Greater => Relation::After,
                std::cmp::Ordering::Equal => continue,
            },
            QuestionType::Counting => {
                if rng.chance(0.5) {
                    Relation::Before
                } else {
                    Relation::After
                }
            }
            QuestionType::State if base.predicate == Predicate::MarioState => Relation::When,
            QuestionType::State => continue,
        };
        out.push(base.clone().constrained(relation, pattern.clone()));
    }
    out
}

fn has_marker(question: &str) -> bool {
    question
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .any(|w| TEMPORAL_MARKERS.contains(&w))
}

/// Runs every acceptance check on one chunk and realizes it. `Ok(None)` means
/// the chunk was filtered out; errors are internal inconsistencies.
#[allow(clippy::too_many_arguments)]
fn emit(
    chunk: &SemanticChunk,
    target: &Event,
    clip: &Clip,
    session: &GameplaySession,
    pool: &TemplatePool,
    lexicon: &Lexicon,
    vocabulary: &BTreeSet<String>,
    seed: u64,
) -> Result<Option<(QaPair, Subset)>> {
    if !pool.covers(&chunk.signature()) {
        return Ok(None);
    }
    let answers = match oracle::answer(chunk, clip, session, lexicon) {
        Ok(a) => a,
        Err(ForgeError::AmbiguousReference(_) | ForgeError::DanglingReference(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let Some(answer) = answers.unique() else {
        return Ok(None);
    };
    if !vocabulary.contains(answer) {
        return Ok(None);
    }
    let subset = classify_subset(clip, session, chunk)?;
    if chunk.qtype == QuestionType::EventCentric {
        let distracted = !find_distractors(clip, session, target)?.is_empty();
        if distracted != (subset == Subset::HT) {
            return Ok(None);
        }
    }
    let template = select_template(pool, chunk, seed)?;
    let realized = realize(template, chunk, clip, session, lexicon)?;
    if realized.answer != answer {
        return Err(ForgeError::Integrity(format!(
            "session {} target {}: realized answer `{}` but oracle says `{answer}` for {:?}",
            session.id, target.id, realized.answer, chunk
        )));
    }
    if has_marker(&realized.question) != (subset != Subset::NT) {
        return Err(ForgeError::Integrity(format!(
            "temporal marker mismatch in `{}` ({subset})",
            realized.question
        )));
    }
    Ok(Some((
        QaPair {
            id: String::new(),
            q: realized.question,
            a: realized.answer,
            subset,
            qtype: chunk.qtype,
            session: session.id,
            clip: [clip.start_ms, clip.end_ms],
            template: template.id.clone(),
            chunk: chunk.clone(),
            split: None,
        },
        subset,
    )))
}

/// QA pairs for one target event.
pub fn generate_for_target(
    target: &Event,
    session: &GameplaySession,
    pool: &TemplatePool,
    lexicon: &Lexicon,
    config: &GenerationConfig,
    seed: u64,
) -> Result<Vec<QaPair>> {
    let vocabulary = lexicon.answer_vocabulary();
    let clip = sample_clip(session, target, mix_seed(seed, 0))?;
    let mut rng = SimRng::derive(seed, 1);

    let base = form_chunks(target, &clip, session, lexicon)?;
    let (mut counting, rest): (Vec<_>, Vec<_>) = base.into_iter().partition(|c| c.qtype == QuestionType::Counting);
    let (mut state, event): (Vec<_>, Vec<_>) = rest.into_iter().partition(|c| c.qtype == QuestionType::State);
    rng.shuffle(&mut counting);
    counting.truncate(config.counting_per_clip);
    rng.shuffle(&mut state);
    state.truncate(config.state_per_clip);

    let refs = reference_candidates(target, &clip, session, lexicon)?;
    let mut out = Vec::new();
    for chunk in event.iter().chain(&counting).chain(&state) {
        let mut variants = vec![chunk.clone()];
        variants.extend(constrained_variants(
            chunk,
            target,
            &refs,
            &mut rng,
            config.constrained_per_chunk,
        ));
        for variant in variants {
            let template_seed = rng.next_u64();
            if let Some((mut qa, _)) = emit(
                &variant,
                target,
                &clip,
                session,
                pool,
                lexicon,
                &vocabulary,
                template_seed,
            )? {
                qa.id = format!("{}-{}-{}", session.id, target.id, out.len());
                out.push(qa);
            }
        }
    }
    Ok(out)
}

/// QA pairs for every event of every session, in session then event order.
/// Sessions shorter than the minimum clip length contribute nothing.
pub fn generate(
    sessions: &[GameplaySession],
    pool: &TemplatePool,
    lexicon: &Lexicon,
    config: &GenerationConfig,
) -> Result<Vec<QaPair>> {
    let per_session: Vec<Result<Vec<QaPair>>> = sessions
        .par_iter()
        .map(|session| {
            if session.duration_ms < crate::model::MIN_CLIP_MS {
                return Ok(Vec::new());
            }
            lexicon.validate_session(session)?;
            let session_seed = mix_seed(config.seed, session.id);
            let mut out = Vec::new();
            for target in &session.events {
                let seed = mix_seed(session_seed, target.id);
                out.extend(generate_for_target(target, session, pool, lexicon, config, seed)?);
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for batch in per_session {
        all.extend(batch?);
    }
    if let Some(cap) = config.max_same_qa {
        all = crate::dataset::cap_duplicates(&all, cap, config.seed);
    }
    Ok(all)
}

/// Signatures the pool cannot realize among the chunks `generate` would
/// consider for these sessions.
pub fn coverage_gaps(sessions: &[GameplaySession], pool: &TemplatePool, lexicon: &Lexicon) -> Result<BTreeSet<String>> {
    let mut gaps = BTreeSet::new();
    for session in sessions.iter().filter(|s| s.duration_ms >= crate::model::MIN_CLIP_MS) {
        for target in &session.events {
            let clip = sample_clip(session, target, 0)?;
            for chunk in form_chunks(target, &clip, session, lexicon)? {
                for constrained in [false, true] {
                    if constrained && chunk.predicate == Predicate::StageType {
                        continue;
                    }
                    let mut sig = chunk.signature();
                    sig.constrained = constrained;
                    if !pool.covers(&sig) {
                        gaps.insert(sig.to_string());
                    }
                }
            }
        }
    }
    Ok(gaps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EventType, MarioState, Role, StageType, StateInterval};

    fn session() -> GameplaySession {
        GameplaySession {
            id: 3,
            stage_type: StageType::new("cave"),
            duration_ms: 8000,
            events: vec![
                Event::new(1, EventType::Hit, 400).with(Role::Patient, "coin_block"),
                Event::new(2, EventType::Jump, 900),
                Event::new(3, EventType::Kill, 1000)
                    .with(Role::Patient, "PGoomba")
                    .with(Role::Means, "stomping"),
                Event::new(4, EventType::Jump, 2100),
                Event::new(5, EventType::Kill, 2500)
                    .with(Role::Patient, "Goomba")
                    .with(Role::Means, "fireball"),
                Event::new(6, EventType::Shoot, 2400).with(Role::Means, "fireball"),
            ],
            states: vec![StateInterval::new(MarioState::FireForm, 0, 8000)],
        }
    }

    fn sorted(mut s: GameplaySession) -> GameplaySession {
        s.events.sort_by_key(|e| (e.time_ms, e.id));
        s
    }

    #[test]
    fn chunks_per_role() {
        let lex = Lexicon::default_mario();
        let s = sorted(session());
        let kill = s.event(3).unwrap();
        let clip = Clip {
            session_id: 3,
            start_ms: 0,
            end_ms: 3000,
            target_event_id: 3,
        };
        let chunks = form_chunks(kill, &clip, &s, &lex).unwrap();
        let holes: Vec<_> = chunks
            .iter()
            .filter(|c| c.qtype == QuestionType::EventCentric)
            .map(|c| c.hole.unwrap())
            .collect();
        assert_eq!(holes, vec![Role::Patient, Role::Means]);
        let jump = s.event(2).unwrap();
        let chunks = form_chunks(jump, &clip, &s, &lex).unwrap();
        assert!(chunks.iter().all(|c| c.qtype != QuestionType::EventCentric));
        assert!(chunks
            .iter()
            .any(|c| c.qtype == QuestionType::Counting
                && c.args.get(&Role::Means).is_some_and(|m| m.as_str() == "fireball")));
    }

    #[test]
    fn references_are_unique_in_clip() {
        let lex = Lexicon::default_mario();
        let s = sorted(session());
        let clip = Clip {
            session_id: 3,
            start_ms: 0,
            end_ms: 3000,
            target_event_id: 3,
        };
        let refs = reference_candidates(s.event(3).unwrap(), &clip, &s, &lex).unwrap();
        let kinds: Vec<String> = refs.iter().map(|(p, _)| p.to_string()).collect();
        // two jumps in the clip, so jump cannot be a reference
        assert!(!kinds.iter().any(|k| k.starts_with("jump")), "{kinds:?}");
        assert!(kinds.contains(&"kill(patient=Goomba)".to_owned()), "{kinds:?}");
    }

    #[test]
    fn generated_pairs_are_sound() {
        let lex = Lexicon::default_mario();
        let pool = TemplatePool::default_pool();
        let s = sorted(session());
        let pairs = generate(std::slice::from_ref(&s), &pool, &lex, &GenerationConfig::default()).unwrap();
        assert!(!pairs.is_empty());
        for qa in &pairs {
            let got = oracle::answer(&qa.chunk, &qa.clip(), &s, &lex).unwrap();
            assert_eq!(got.unique(), Some(qa.a.as_str()), "{qa:?}");
            assert_eq!(has_marker(&qa.q), qa.subset != Subset::NT, "{}", qa.q);
        }
        let again = generate(std::slice::from_ref(&s), &pool, &lex, &GenerationConfig::default()).unwrap();
        assert_eq!(pairs, again);
    }
}
