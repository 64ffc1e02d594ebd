//! Domain vocabulary shared by every stage of the pipeline.
//!
//! Time is integer milliseconds from session start. Mario-state intervals are
//! half-open `[start, end)`; clips are closed `[start_ms, end_ms]`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

pub const MIN_CLIP_MS: u64 = 3000;
pub const MAX_CLIP_MS: u64 = 6000;

macro_rules! closed_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ForgeError;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(ForgeError::Config(format!(
                        concat!("unknown ", stringify!($name), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

closed_enum!(
    /// The eleven gameplay event predicates.
    EventType {
        Kill => "kill",
        Die => "die",
        Jump => "jump",
        Hit => "hit",
        Break => "break",
        Appear => "appear",
        Shoot => "shoot",
        Throw => "throw",
        Kick => "kick",
        Hold => "hold",
        Eat => "eat",
    }
);

closed_enum!(
    /// Argument slots of an event. `means` covers instruments and manners
    /// (stomping, shell, fireball).
    Role {
        Agent => "agent",
        Patient => "patient",
        Means => "means",
        Location => "location",
    }
);

closed_enum!(
    MarioState {
        Small => "small",
        Super => "super",
        FireForm => "fire_form",
    }
);

/// Symbolic entity token such as `PGoomba`, `shell` or `coin_block`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(token: impl Into<String>) -> Self {
        EntityId(token.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    fn from(s: &str) -> Self {
        EntityId(s.to_owned())
    }
}

/// Stage kind token (`overground`, `cave`, `castle` in the default lexicon).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StageType(pub String);

impl StageType {
    pub fn new(token: impl Into<String>) -> Self {
        StageType(token.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type Args = BTreeMap<Role, EntityId>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub id: u64,
    #[serde(rename = "type")]
    pub etype: EventType,
    #[serde(rename = "t")]
    pub time_ms: u64,
    pub args: Args,
}

impl Event {
    pub fn new(id: u64, etype: EventType, time_ms: u64) -> Self {
        Self {
            id,
            etype,
            time_ms,
            args: Args::new(),
        }
    }

    pub fn with(mut self, role: Role, entity: impl Into<EntityId>) -> Self {
        self.args.insert(role, entity.into());
        self
    }

    pub fn arg(&self, role: Role) -> Option<&EntityId> {
        self.args.get(&role)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.etype)?;
        for (i, (role, entity)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{role}={entity}")?;
        }
        write!(f, ")@{}", self.time_ms)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateInterval {
    pub state: MarioState,
    #[serde(rename = "start")]
    pub start_ms: u64,
    #[serde(rename = "end")]
    pub end_ms: u64,
}

impl StateInterval {
    pub fn new(state: MarioState, start_ms: u64, end_ms: u64) -> Self {
        Self {
            state,
            start_ms,
            end_ms,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameplaySession {
    pub id: u64,
    pub stage_type: StageType,
    pub duration_ms: u64,
    pub events: Vec<Event>,
    pub states: Vec<StateInterval>,
}

impl GameplaySession {
    pub fn event(&self, id: u64) -> Option<&Event> {
        self.events.iter().find(|e| e.id == id)
    }

    /// Checks the invariants that need no lexicon: event ordering and id
    /// uniqueness, timestamps inside the session, and a state timeline that
    /// partitions `[0, duration_ms)`.
    pub fn validate_structure(&self) -> Result<()> {
        let fail = |message: String| ForgeError::Validation {
            session: self.id,
            message,
        };

        let mut ids = HashSet::with_capacity(self.events.len());
        for pair in self.events.windows(2) {
            if (pair[0].time_ms, pair[0].id) >= (pair[1].time_ms, pair[1].id) {
                return Err(fail(format!(
                    "events {} and {} are not sorted by (t, id)",
                    pair[0].id, pair[1].id
                )));
            }
        }
        for event in &self.events {
            if !ids.insert(event.id) {
                return Err(fail(format!("duplicate event id {}", event.id)));
            }
            if event.time_ms >= self.duration_ms {
                return Err(fail(format!(
                    "event {} at {} ms is outside the {} ms session",
                    event.id, event.time_ms, self.duration_ms
                )));
            }
        }

        let mut cursor = 0;
        for interval in &self.states {
            if interval.start_ms != cursor {
                return Err(fail(format!("state timeline has a gap or overlap at {} ms", cursor)));
            }
            if interval.end_ms <= interval.start_ms {
                return Err(fail(format!(
                    "empty state interval [{}, {})",
                    interval.start_ms, interval.end_ms
                )));
            }
            cursor = interval.end_ms;
        }
        if cursor != self.duration_ms {
            return Err(fail(format!(
                "state timeline ends at {} ms, session lasts {} ms",
                cursor, self.duration_ms
            )));
        }
        Ok(())
    }

    /// Mario's state at `t_ms`.
    pub fn state_at(&self, t_ms: u64) -> Result<MarioState> {
        if t_ms >= self.duration_ms {
            return Err(ForgeError::TimeOutOfRange {
                t_ms,
                duration_ms: self.duration_ms,
            });
        }
        let idx = self.states.partition_point(|s| s.end_ms <= t_ms);
        match self.states.get(idx) {
            Some(s) if s.start_ms <= t_ms => Ok(s.state),
            _ => Err(ForgeError::Validation {
                session: self.id,
                message: format!("no state interval covers {t_ms} ms"),
            }),
        }
    }

    /// Distinct states held at any instant of the closed window
    /// `[start_ms, end_ms]`, clipped to the session.
    pub fn states_over(&self, start_ms: u64, end_ms: u64) -> BTreeSet<MarioState> {
        self.states
            .iter()
            .filter(|s| s.start_ms <= end_ms && s.end_ms > start_ms)
            .map(|s| s.state)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clip {
    pub session_id: u64,
    pub start_ms: u64,
    pub end_ms: u64,
    pub target_event_id: u64,
}

impl Clip {
    pub fn duration_ms(&self) -> u64 {
        self.end_ms - self.start_ms
    }

    pub fn contains(&self, t_ms: u64) -> bool {
        self.start_ms <= t_ms && t_ms <= self.end_ms
    }

    /// Duration bounds, target containment and session bounds.
    pub fn validate(&self, session: &GameplaySession) -> Result<()> {
        if self.session_id != session.id {
            return Err(ForgeError::SessionMismatch {
                clip_session: self.session_id,
                session: session.id,
            });
        }
        let fail = |message: String| ForgeError::Validation {
            session: session.id,
            message,
        };
        if self.end_ms < self.start_ms || !(MIN_CLIP_MS..=MAX_CLIP_MS).contains(&self.duration_ms()) {
            return Err(fail(format!(
                "clip [{}, {}] is not 3-6 s long",
                self.start_ms, self.end_ms
            )));
        }
        if self.end_ms > session.duration_ms {
            return Err(fail(format!(
                "clip ends at {} ms past session end {} ms",
                self.end_ms, session.duration_ms
            )));
        }
        let target = session.event(self.target_event_id).ok_or(ForgeError::UnknownEvent {
            session: session.id,
            event: self.target_event_id,
        })?;
        if !self.contains(target.time_ms) {
            return Err(fail(format!(
                "target event {} at {} ms lies outside clip [{}, {}]",
                target.id, target.time_ms, self.start_ms, self.end_ms
            )));
        }
        Ok(())
    }
}

/// Events with `start_ms <= t <= end_ms`, as a contiguous slice of the
/// session's time-sorted event list.
pub fn events_in<'s>(clip: &Clip, session: &'s GameplaySession) -> Result<&'s [Event]> {
    if clip.session_id != session.id {
        return Err(ForgeError::SessionMismatch {
            clip_session: clip.session_id,
            session: session.id,
        });
    }
    let lo = session.events.partition_point(|e| e.time_ms < clip.start_ms);
    let hi = session.events.partition_point(|e| e.time_ms <= clip.end_ms);
    Ok(&session.events[lo..hi.max(lo)])
}

pub fn state_at(session: &GameplaySession, t_ms: u64) -> Result<MarioState> {
    session.state_at(t_ms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session_with(events: Vec<Event>, states: Vec<StateInterval>, duration_ms: u64) -> GameplaySession {
        GameplaySession {
            id: 1,
            stage_type: StageType::new("overground"),
            duration_ms,
            events,
            states,
        }
    }

    fn eight_events() -> GameplaySession {
        let times = [200, 900, 1500, 2100, 2600, 3300, 4100, 5200];
        let events = times
            .iter()
            .enumerate()
            .map(|(i, &t)| Event::new(i as u64 + 1, EventType::Jump, t))
            .collect();
        session_with(events, vec![StateInterval::new(MarioState::Small, 0, 6000)], 6000)
    }

    fn clip(start_ms: u64, end_ms: u64) -> Clip {
        Clip {
            session_id: 1,
            start_ms,
            end_ms,
            target_event_id: 1,
        }
    }

    #[test]
    fn events_in_full_window() {
        let s = eight_events();
        assert_eq!(events_in(&clip(0, 6000), &s).unwrap().len(), 8);
    }

    #[test]
    fn events_in_empty_window() {
        let s = eight_events();
        assert!(events_in(&clip(5300, 5900), &s).unwrap().is_empty());
    }

    #[test]
    fn events_in_partial_window() {
        // window [1500, 4100] covers the events at 1500, 2100, 2600, 3300, 4100
        let s = eight_events();
        let ids: Vec<u64> = events_in(&clip(1500, 4100), &s).unwrap().iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![3, 4, 5, 6, 7]);
    }

    #[test]
    fn events_in_rejects_foreign_clip() {
        let s = eight_events();
        let mut c = clip(0, 3000);
        c.session_id = 9;
        assert!(matches!(events_in(&c, &s), Err(ForgeError::SessionMismatch { .. })));
    }

    #[test]
    fn state_lookup() {
        let s = session_with(vec![], vec![StateInterval::new(MarioState::Small, 0, 10_000)], 10_000);
        assert_eq!(state_at(&s, 5000).unwrap(), MarioState::Small);

        let s = session_with(
            vec![],
            vec![
                StateInterval::new(MarioState::Small, 0, 4000),
                StateInterval::new(MarioState::FireForm, 4000, 10_000),
            ],
            10_000,
        );
        assert_eq!(state_at(&s, 4000).unwrap(), MarioState::FireForm);
        assert_eq!(state_at(&s, 3999).unwrap(), MarioState::Small);
        assert_eq!(state_at(&s, 4200).unwrap(), MarioState::FireForm);
        assert!(matches!(state_at(&s, 10_000), Err(ForgeError::TimeOutOfRange { .. })));
    }

    #[test]
    fn states_over_closed_window() {
        let s = session_with(
            vec![],
            vec![
                StateInterval::new(MarioState::Small, 0, 4000),
                StateInterval::new(MarioState::Super, 4000, 10_000),
            ],
            10_000,
        );
        assert_eq!(s.states_over(0, 3999).len(), 1);
        assert_eq!(s.states_over(0, 4000).len(), 2);
    }

    #[test]
    fn structure_validation() {
        let mut s = eight_events();
        assert!(s.validate_structure().is_ok());
        s.events.swap(0, 1);
        assert!(s.validate_structure().is_err());

        let mut s = eight_events();
        s.states = vec![StateInterval::new(MarioState::Small, 0, 5000)];
        assert!(s.validate_structure().is_err());

        let mut s = eight_events();
        s.events[7].time_ms = 6000;
        assert!(s.validate_structure().is_err());
    }

    #[test]
    fn unknown_event_type_rejected() {
        assert!("fly".parse::<EventType>().is_err());
        assert_eq!(EventType::ALL.len(), 11);
        let line = r#"{"id":1,"type":"fly","t":0,"args":{}}"#;
        assert!(serde_json::from_str::<Event>(line).is_err());
    }

    #[test]
    fn args_serialize_in_role_order() {
        let e = Event::new(1, EventType::Kill, 2500)
            .with(Role::Means, "stomping")
            .with(Role::Patient, "PGoomba");
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"id":1,"type":"kill","t":2500,"args":{"patient":"PGoomba","means":"stomping"}}"#
        );
    }
}
