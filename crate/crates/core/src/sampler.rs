//! Clip sampling around target events, distractor detection and
//! temporal-difficulty subsets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chunk::{Predicate, QuestionType, SemanticChunk};
use crate::error::{ForgeError, Result};
use crate::model::{events_in, Clip, Event, GameplaySession, MAX_CLIP_MS, MIN_CLIP_MS};
use crate::oracle;
use crate::rng::SimRng;

/// No / easy / hard temporal relationship.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subset {
    NT,
    ET,
    HT,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::NT, Subset::ET, Subset::HT];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::NT => "NT",
            Subset::ET => "ET",
            Subset::HT => "HT",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subset {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NT" => Ok(Subset::NT),
            "ET" => Ok(Subset::ET),
            "HT" => Ok(Subset::HT),
            other => Err(ForgeError::Config(format!("unknown subset `{other}`"))),
        }
    }
}

/// Samples a 3-6 s clip containing `target`. The duration is uniform over
/// whole milliseconds in `[3000, min(6000, session)]`, then the start is
/// uniform over every position that keeps the target inside and the clip
/// within the session.
pub fn sample_clip(session: &GameplaySession, target: &Event, seed: u64) -> Result<Clip> {
    if session.duration_ms < MIN_CLIP_MS {
        return Err(ForgeError::Unsampleable {
            session: session.id,
            duration_ms: session.duration_ms,
        });
    }
    if session.event(target.id) != Some(target) {
        return Err(ForgeError::UnknownEvent {
            session: session.id,
            event: target.id,
        });
    }
    let mut rng = SimRng::new(seed);
    let duration = rng.range_inclusive(MIN_CLIP_MS, MAX_CLIP_MS.min(session.duration_ms));
    let t = target.time_ms;
    let lo = t.saturating_sub(duration);
    let hi = t.min(session.duration_ms - duration);
    let start = rng.range_inclusive(lo, hi);
    Ok(Clip {
        session_id: session.id,
        start_ms: start,
        end_ms: start + duration,
        target_event_id: target.id,
    })
}

/// In-clip events of the target's type other than the target itself,
/// whatever their arguments.
pub fn find_distractors<'s>(clip: &Clip, session: &'s GameplaySession, target: &Event) -> Result<Vec<&'s Event>> {
    Ok(events_in(clip, session)?
        .iter()
        .filter(|e| e.etype == target.etype && e.id != target.id)
        .collect())
}

/// Assigns a chunk to NT, ET or HT.
///
/// Unconstrained chunks are NT. A constrained chunk is HT when the constraint
/// is needed to disambiguate: for event-centric chunks, when the target has
/// type-level distractors in the clip; for counting chunks, when the
/// constraint strictly shrinks the counted set; for state chunks, when Mario
/// changes state inside the clip. Otherwise it is ET.
pub fn classify_subset(clip: &Clip, session: &GameplaySession, chunk: &SemanticChunk) -> Result<Subset> {
    chunk.check_well_formed()?;
    if clip.session_id != session.id {
        return Err(ForgeError::Consistency(format!(
            "clip of session {} used with session {}",
            clip.session_id, session.id
        )));
    }
    let target = session
        .event(chunk.target)
        .ok_or_else(|| ForgeError::Consistency(format!("target {} not in session {}", chunk.target, session.id)))?;
    if !clip.contains(target.time_ms) {
        return Err(ForgeError::Consistency(format!(
            "target {} at {} ms outside clip [{}, {}]",
            target.id, target.time_ms, clip.start_ms, clip.end_ms
        )));
    }
    if chunk.constraint.is_none() {
        return Ok(Subset::NT);
    }
    let hard = match (chunk.qtype, chunk.predicate) {
        (QuestionType::EventCentric, Predicate::Event(etype)) => {
            if target.etype != etype {
                return Err(ForgeError::Consistency(format!(
                    "target {} is a {} event, chunk asks about {etype}",
                    target.id, target.etype
                )));
            }
            !find_distractors(clip, session, target)?.is_empty()
        }
        (QuestionType::Counting, _) => {
            let constrained = oracle::surviving_events(chunk, clip, session)?.len();
            let open = SemanticChunk {
                constraint: None,
                ..chunk.clone()
            };
            let unconstrained = oracle::surviving_events(&open, clip, session)?.len();
            constrained != unconstrained
        }
        _ => session.states_over(clip.start_ms, clip.end_ms).len() > 1,
    };
    Ok(if hard { Subset::HT } else { Subset::ET })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{EventPattern, Relation};
    use crate::model::{EventType, MarioState, Role, StageType, StateInterval};

    fn session(events: Vec<Event>, duration_ms: u64) -> GameplaySession {
        GameplaySession {
            id: 1,
            stage_type: StageType::new("overground"),
            duration_ms,
            events,
            states: vec![StateInterval::new(MarioState::Small, 0, duration_ms)],
        }
    }

    fn kill(id: u64, t: u64, patient: &str, means: &str) -> Event {
        Event::new(id, EventType::Kill, t)
            .with(Role::Patient, patient)
            .with(Role::Means, means)
    }

    #[test]
    fn forced_window() {
        let s = session(vec![Event::new(1, EventType::Jump, 1200)], 3000);
        let clip = sample_clip(&s, &s.events[0], 9).unwrap();
        assert_eq!((clip.start_ms, clip.end_ms), (0, 3000));
    }

    #[test]
    fn clamped_at_zero() {
        let s = session(vec![Event::new(1, EventType::Jump, 0)], 20_000);
        for seed in 0..20 {
            assert_eq!(sample_clip(&s, &s.events[0], seed).unwrap().start_ms, 0);
        }
    }

    #[test]
    fn replayable() {
        let s = session(vec![Event::new(1, EventType::Jump, 7000)], 20_000);
        let a = sample_clip(&s, &s.events[0], 1234).unwrap();
        let b = sample_clip(&s, &s.events[0], 1234).unwrap();
        assert_eq!(a, b);
        a.validate(&s).unwrap();
    }

    #[test]
    fn too_short() {
        let s = session(vec![Event::new(1, EventType::Jump, 100)], 2999);
        assert!(matches!(
            sample_clip(&s, &s.events[0], 0),
            Err(ForgeError::Unsampleable { .. })
        ));
    }

    #[test]
    fn distractors() {
        let s = session(
            vec![
                kill(1, 500, "PGoomba", "stomping"),
                Event::new(2, EventType::Jump, 900),
                kill(3, 2000, "Goomba", "shell"),
            ],
            6000,
        );
        let clip = Clip {
            session_id: 1,
            start_ms: 0,
            end_ms: 5000,
            target_event_id: 1,
        };
        let d = find_distractors(&clip, &s, &s.events[0]).unwrap();
        assert_eq!(d.iter().map(|e| e.id).collect::<Vec<_>>(), vec![3]);
        assert!(find_distractors(&clip, &s, &s.events[1]).unwrap().is_empty());

        let jumps = session(
            vec![
                Event::new(1, EventType::Jump, 100),
                Event::new(2, EventType::Jump, 200),
                Event::new(3, EventType::Jump, 300),
            ],
            4000,
        );
        let clip = Clip {
            session_id: 1,
            start_ms: 0,
            end_ms: 3500,
            target_event_id: 2,
        };
        let d = find_distractors(&clip, &jumps, &jumps.events[1]).unwrap();
        assert_eq!(d.iter().map(|e| e.id).collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn subsets() {
        let s = session(
            vec![
                Event::new(1, EventType::Hit, 300).with(Role::Patient, "coin_block"),
                Event::new(2, EventType::Jump, 500),
                kill(3, 900, "PGoomba", "stomping"),
                Event::new(4, EventType::Throw, 1000).with(Role::Patient, "shell"),
                Event::new(5, EventType::Jump, 1500),
                Event::new(6, EventType::Jump, 2000),
            ],
            6000,
        );
        let clip = Clip {
            session_id: 1,
            start_ms: 0,
            end_ms: 4000,
            target_event_id: 3,
        };
        let open = SemanticChunk::event_centric(&s.events[2], Role::Patient);
        assert_eq!(classify_subset(&clip, &s, &open).unwrap(), Subset::NT);
        let easy = open.clone().constrained(
            Relation::After,
            EventPattern::new(EventType::Hit).with(Role::Patient, "coin_block"),
        );
        assert_eq!(classify_subset(&clip, &s, &easy).unwrap(), Subset::ET);

        let count = SemanticChunk::counting(EventPattern::new(EventType::Jump), 3).constrained(
            Relation::After,
            EventPattern::new(EventType::Throw).with(Role::Patient, "shell"),
        );
        assert_eq!(classify_subset(&clip, &s, &count).unwrap(), Subset::HT);
        let count_all = SemanticChunk::counting(EventPattern::new(EventType::Jump), 3)
            .constrained(Relation::After, EventPattern::new(EventType::Hit));
        assert_eq!(classify_subset(&clip, &s, &count_all).unwrap(), Subset::ET);

        let mut with_other_kill = s.clone();
        with_other_kill.events.push(kill(7, 3000, "Goomba", "fireball"));
        assert_eq!(classify_subset(&clip, &with_other_kill, &easy).unwrap(), Subset::HT);
    }

    #[test]
    fn subset_consistency_errors() {
        let s = session(vec![Event::new(1, EventType::Jump, 5000)], 6000);
        let clip = Clip {
            session_id: 1,
            start_ms: 0,
            end_ms: 3000,
            target_event_id: 1,
        };
        let chunk = SemanticChunk::counting(EventPattern::new(EventType::Jump), 1);
        assert!(matches!(
            classify_subset(&clip, &s, &chunk),
            Err(ForgeError::Consistency(_))
        ));
    }
}
