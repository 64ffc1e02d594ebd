//! Semantic chunks: the machine-readable meaning of a question.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};
use crate::model::{Args, Event, EventType, Role};

/// An event type with some roles pinned; unlisted roles are wildcards.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EventPattern {
    #[serde(rename = "type")]
    pub etype: EventType,
    #[serde(default)]
    pub args: Args,
}

impl EventPattern {
    pub fn new(etype: EventType) -> Self {
        Self {
            etype,
            args: Args::new(),
        }
    }

    pub fn with(mut self, role: Role, entity: &str) -> Self {
        self.args.insert(role, entity.into());
        self
    }

    pub fn matches(&self, event: &Event) -> bool {
        event.etype == self.etype
            && self
                .args
                .iter()
                .all(|(role, entity)| event.args.get(role) == Some(entity))
    }
}

impl fmt::Display for EventPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.etype)?;
        for (i, (role, entity)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{role}={entity}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Before,
    After,
    When,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Before => "before",
            Relation::After => "after",
            Relation::When => "when",
        }
    }
}

/// Words that mark a temporal clause; never allowed in NT questions.
pub const TEMPORAL_MARKERS: [&str; 3] = ["before", "after", "when"];

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalConstraint {
    pub relation: Relation,
    pub reference: EventPattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    EventCentric,
    Counting,
    State,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] = [QuestionType::EventCentric, QuestionType::Counting, QuestionType::State];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::EventCentric => "event_centric",
            QuestionType::Counting => "counting",
            QuestionType::State => "state",
        }
    }
}

/// What a chunk asks about: an event predicate, or one of the two state
/// probes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Predicate {
    Event(EventType),
    MarioState,
    StageType,
}

impl Predicate {
    pub fn event_type(self) -> Option<EventType> {
        match self {
            Predicate::Event(e) => Some(e),
            _ => None,
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Event(e) => f.write_str(e.as_str()),
            Predicate::MarioState => f.write_str("mario_state"),
            Predicate::StageType => f.write_str("stage_type"),
        }
    }
}

impl FromStr for Predicate {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mario_state" => Ok(Predicate::MarioState),
            "stage_type" => Ok(Predicate::StageType),
            other => other.parse().map(Predicate::Event),
        }
    }
}

impl TryFrom<String> for Predicate {
    type Error = ForgeError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Predicate> for String {
    fn from(p: Predicate) -> String {
        p.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticChunk {
    pub qtype: QuestionType,
    pub predicate: Predicate,
    /// The eliminated role; only event-centric chunks have one.
    pub hole: Option<Role>,
    /// Pinned arguments. For counting chunks this is the count pattern.
    #[serde(default)]
    pub args: Args,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<TemporalConstraint>,
    /// Event the question was generated from.
    pub target: u64,
}

impl SemanticChunk {
    pub fn event_centric(target: &Event, hole: Role) -> Self {
        let mut args = target.args.clone();
        args.remove(&hole);
        Self {
            qtype: QuestionType::EventCentric,
            predicate: Predicate::Event(target.etype),
            hole: Some(hole),
            args,
            constraint: None,
            target: target.id,
        }
    }

    pub fn counting(pattern: EventPattern, target: u64) -> Self {
        Self {
            qtype: QuestionType::Counting,
            predicate: Predicate::Event(pattern.etype),
            hole: None,
            args: pattern.args,
            constraint: None,
            target,
        }
    }

    pub fn state(probe: Predicate, target: u64) -> Self {
        Self {
            qtype: QuestionType::State,
            predicate: probe,
            hole: None,
            args: Args::new(),
            constraint: None,
            target,
        }
    }

    pub fn constrained(mut self, relation: Relation, reference: EventPattern) -> Self {
        self.constraint = Some(TemporalConstraint { relation, reference });
        self
    }

    /// Pattern over clip events for event-centric and counting chunks.
    pub fn pattern(&self) -> Option<EventPattern> {
        self.predicate.event_type().map(|etype| EventPattern {
            etype,
            args: self.args.clone(),
        })
    }

    pub fn signature(&self) -> Signature {
        Signature {
            qtype: self.qtype,
            predicate: self.predicate,
            hole: self.hole,
            given: self.args.keys().copied().collect(),
            constrained: self.constraint.is_some(),
        }
    }

    pub fn check_well_formed(&self) -> Result<()> {
        let bad = |msg: &str| Err(ForgeError::Consistency(format!("{msg}: {self:?}")));
        match (self.qtype, self.predicate) {
            (QuestionType::EventCentric, Predicate::Event(_)) => match self.hole {
                Some(hole) if !self.args.contains_key(&hole) => Ok(()),
                Some(_) => bad("hole role is also pinned"),
                None => bad("event-centric chunk without a hole"),
            },
            (QuestionType::Counting, Predicate::Event(_)) => {
                if self.hole.is_some() {
                    bad("counting chunk with a hole")
                } else {
                    Ok(())
                }
            }
            (QuestionType::State, Predicate::MarioState) => {
                if self.hole.is_some() || !self.args.is_empty() {
                    bad("state chunk with arguments")
                } else if self.constraint.as_ref().is_some_and(|c| c.relation != Relation::When) {
                    bad("state chunk constraint must use `when`")
                } else {
                    Ok(())
                }
            }
            (QuestionType::State, Predicate::StageType) => {
                if self.hole.is_some() || !self.args.is_empty() || self.constraint.is_some() {
                    bad("stage chunk takes no arguments or constraint")
                } else {
                    Ok(())
                }
            }
            _ => bad("question type does not fit predicate"),
        }
    }
}

/// The part of a chunk a template has to agree with.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature {
    pub qtype: QuestionType,
    pub predicate: Predicate,
    pub hole: Option<Role>,
    pub given: BTreeSet<Role>,
    pub constrained: bool,
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.qtype.as_str(), self.predicate)?;
        if let Some(hole) = self.hole {
            write!(f, " hole={hole}")?;
        }
        let given: Vec<&str> = self.given.iter().map(|r| r.as_str()).collect();
        write!(f, " given=[{}]", given.join(","))?;
        if self.constrained {
            f.write_str(" constrained")?;
        }
        Ok(())
    }
}
