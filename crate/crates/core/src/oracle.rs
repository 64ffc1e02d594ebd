//! Brute-force answering of semantic chunks against a clip's event log.
//!
//! Every query scans the clip's events linearly. There is deliberately no
//! index: the oracle is the definition that generated answers are checked
//! against.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chunk::{EventPattern, Predicate, QuestionType, Relation, SemanticChunk, TemporalConstraint};
use crate::error::{ForgeError, Result};
use crate::lexicon::Lexicon;
use crate::model::{events_in, Clip, Event, GameplaySession};

/// Half-width of the `when` window for event references.
pub const WHEN_TOLERANCE_MS: u64 = 250;

/// Set of answer classes a chunk admits on a clip.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerSet(pub BTreeSet<String>);

impl AnswerSet {
    pub fn single(answer: impl Into<String>) -> Self {
        AnswerSet([answer.into()].into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The answer when the set is a singleton.
    pub fn unique(&self) -> Option<&str> {
        match self.0.len() {
            1 => self.0.iter().next().map(String::as_str),
            _ => None,
        }
    }

    pub fn contains(&self, answer: &str) -> bool {
        self.0.contains(answer)
    }
}

/// Clip events of the pattern's type whose arguments agree on every pinned
/// role.
pub fn match_events<'s>(pattern: &EventPattern, clip: &Clip, session: &'s GameplaySession) -> Result<Vec<&'s Event>> {
    Ok(events_in(clip, session)?
        .iter()
        .filter(|e| pattern.matches(e))
        .collect())
}

/// The single clip event the constraint's reference pattern picks out.
pub fn resolve_reference<'s>(
    constraint: &TemporalConstraint,
    clip: &Clip,
    session: &'s GameplaySession,
) -> Result<&'s Event> {
    let refs = match_events(&constraint.reference, clip, session)?;
    match refs.as_slice() {
        [only] => Ok(only),
        [] => Err(ForgeError::DanglingReference(constraint.reference.to_string())),
        _ => Err(ForgeError::AmbiguousReference(constraint.reference.to_string())),
    }
}

/// Keeps the candidates that satisfy the constraint. `before` and `after`
/// are strict; `when` keeps events within [`WHEN_TOLERANCE_MS`] of the
/// reference.
pub fn apply_constraint<'s>(
    candidates: &[&'s Event],
    constraint: &TemporalConstraint,
    clip: &Clip,
    session: &GameplaySession,
) -> Result<Vec<&'s Event>> {
    let reference = resolve_reference(constraint, clip, session)?.time_ms;
    Ok(candidates
        .iter()
        .copied()
        .filter(|e| match constraint.relation {
            Relation::Before => e.time_ms < reference,
            Relation::After => e.time_ms > reference,
            Relation::When => e.time_ms.abs_diff(reference) <= WHEN_TOLERANCE_MS,
        })
        .collect())
}

/// Events that survive the chunk's pattern and constraint.
pub fn surviving_events<'s>(
    chunk: &SemanticChunk,
    clip: &Clip,
    session: &'s GameplaySession,
) -> Result<Vec<&'s Event>> {
    let pattern = chunk
        .pattern()
        .ok_or_else(|| ForgeError::Consistency("chunk has no event pattern".into()))?;
    let mut matched = match_events(&pattern, clip, session)?;
    if let Some(hole) = chunk.hole {
        matched.retain(|e| e.args.contains_key(&hole));
    }
    match &chunk.constraint {
        Some(c) => apply_constraint(&matched, c, clip, session),
        None => Ok(matched),
    }
}

pub fn answer(chunk: &SemanticChunk, clip: &Clip, session: &GameplaySession, lexicon: &Lexicon) -> Result<AnswerSet> {
    chunk.check_well_formed()?;
    let mut out = BTreeSet::new();
    match (chunk.qtype, chunk.predicate) {
        (QuestionType::EventCentric, _) => {
            let hole = chunk.hole.expect("well-formed event chunk has a hole");
            for event in surviving_events(chunk, clip, session)? {
                out.insert(lexicon.answer_of(&event.args[&hole])?.to_owned());
            }
        }
        (QuestionType::Counting, _) => {
            out.insert(surviving_events(chunk, clip, session)?.len().to_string());
        }
        (QuestionType::State, Predicate::MarioState) => match &chunk.constraint {
            Some(c) => {
                let reference = resolve_reference(c, clip, session)?;
                out.insert(lexicon.state_answer(session.state_at(reference.time_ms)?)?.to_owned());
            }
            None => {
                for state in session.states_over(clip.start_ms, clip.end_ms) {
                    out.insert(lexicon.state_answer(state)?.to_owned());
                }
            }
        },
        (QuestionType::State, _) => {
            out.insert(lexicon.stage_answer(&session.stage_type)?.to_owned());
        }
    }
    Ok(AnswerSet(out))
}

/// Uniqueness check: the chunk has exactly one answer on this clip.
pub fn is_unique(chunk: &SemanticChunk, clip: &Clip, session: &GameplaySession, lexicon: &Lexicon) -> bool {
    answer(chunk, clip, session, lexicon).is_ok_and(|a| a.len() == 1)
}
