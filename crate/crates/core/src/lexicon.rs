//! Entity lexicon: answer classes, surface forms, event role schemas and
//! reference-event clause forms. Loaded from JSON; the default Mario-domain
//! lexicon ships in `assets/lexicon.json`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunk::EventPattern;
use crate::error::{ForgeError, Result};
use crate::model::{EntityId, EventType, GameplaySession, MarioState, Role, StageType};
use crate::surface::{indefinite, parse_surface, Segment};

const DEFAULT_LEXICON: &str = include_str!("../assets/lexicon.json");

fn default_max_count() -> u32 {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityEntry {
    /// Answer-class string, e.g. `Para Goomba`.
    pub answer: String,
    /// Noun used inside questions; defaults to `answer`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub kind: String,
    /// Named phrase forms such as `phrase` ("by stomping") or `plural`.
    #[serde(default)]
    pub forms: BTreeMap<String, String>,
}

impl EntityEntry {
    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.answer)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSchema {
    #[serde(default)]
    pub mandatory: Vec<Role>,
    #[serde(default)]
    pub optional: Vec<Role>,
    /// Clause forms (`gerund`, `past`, `present`, ...) used when an event of
    /// this type is the reference of a temporal constraint.
    #[serde(default)]
    pub clauses: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub entities: BTreeMap<EntityId, EntityEntry>,
    pub events: BTreeMap<EventType, EventSchema>,
    pub states: BTreeMap<MarioState, String>,
    pub stage_types: BTreeMap<StageType, String>,
    #[serde(default = "default_max_count")]
    pub max_count: u32,
    #[serde(skip)]
    clause_roles: HashMap<EventType, BTreeSet<Role>>,
}

impl Lexicon {
    pub fn default_mario() -> Self {
        Self::from_json_str(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ForgeError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut lexicon: Lexicon = serde_json::from_str(text).map_err(|e| ForgeError::json(e.line(), &e))?;
        lexicon.index()?;
        Ok(lexicon)
    }

    fn index(&mut self) -> Result<()> {
        let mut seen: HashMap<&str, &EntityId> = HashMap::new();
        for (id, entry) in &self.entities {
            if let Some(other) = seen.insert(entry.answer.as_str(), id) {
                return Err(ForgeError::Config(format!(
                    "entities `{other}` and `{id}` share answer class `{}`",
                    entry.answer
                )));
            }
        }

        self.clause_roles.clear();
        for (etype, schema) in &self.events {
            if let Some(role) = schema.mandatory.iter().find(|r| schema.optional.contains(r)) {
                return Err(ForgeError::Config(format!(
                    "{etype}: role `{role}` is both mandatory and optional"
                )));
            }
            let mut roles: Option<BTreeSet<Role>> = None;
            for (form, clause) in &schema.clauses {
                let mut here = BTreeSet::new();
                for seg in parse_surface(clause).map_err(ForgeError::Config)? {
                    if let Segment::Slot(parts) = seg {
                        let role: Role = parts[0].parse()?;
                        if !schema.mandatory.contains(&role) && !schema.optional.contains(&role) {
                            return Err(ForgeError::Config(format!(
                                "{etype} clause `{form}` uses undeclared role `{role}`"
                            )));
                        }
                        here.insert(role);
                    }
                }
                match &roles {
                    Some(r) if *r != here => {
                        return Err(ForgeError::Config(format!(
                            "{etype} clause forms mention different roles"
                        )))
                    }
                    _ => roles = Some(here),
                }
            }
            if let Some(r) = roles {
                self.clause_roles.insert(*etype, r);
            }
        }
        Ok(())
    }

    pub fn entity(&self, id: &EntityId) -> Result<&EntityEntry> {
        self.entities
            .get(id)
            .ok_or_else(|| ForgeError::Lexicon(format!("entity `{id}`")))
    }

    pub fn answer_of(&self, id: &EntityId) -> Result<&str> {
        Ok(&self.entity(id)?.answer)
    }

    pub fn state_answer(&self, state: MarioState) -> Result<&str> {
        self.states
            .get(&state)
            .map(String::as_str)
            .ok_or_else(|| ForgeError::Lexicon(format!("state `{state}`")))
    }

    pub fn stage_answer(&self, stage: &StageType) -> Result<&str> {
        self.stage_types
            .get(stage)
            .map(String::as_str)
            .ok_or_else(|| ForgeError::Lexicon(format!("stage type `{stage}`")))
    }

    pub fn count_answer(&self, count: usize) -> Option<String> {
        (count <= self.max_count as usize).then(|| count.to_string())
    }

    /// Surface form `form` of an entity. Built-in forms: `answer`, `name`,
    /// `indef` (article + name), `def` (the + name); anything else is looked
    /// up in the entity's `forms` table.
    pub fn entity_form(&self, id: &EntityId, form: &str) -> Result<String> {
        let entry = self.entity(id)?;
        let text = match form {
            "answer" => entry.answer.clone(),
            "name" => entry.name().to_owned(),
            "indef" => indefinite(entry.name()),
            "def" => format!("the {}", entry.name()),
            other => entry
                .forms
                .get(other)
                .cloned()
                .ok_or_else(|| ForgeError::Lexicon(format!("form `{other}` of entity `{id}`")))?,
        };
        Ok(text)
    }

    /// Roles a reference clause for `etype` mentions; `None` when the event
    /// type has no clause forms and so cannot serve as a reference.
    pub fn clause_roles(&self, etype: EventType) -> Option<&BTreeSet<Role>> {
        self.clause_roles.get(&etype)
    }

    /// Renders the reference event `pattern` in clause form `form`.
    pub fn clause(&self, pattern: &EventPattern, form: &str) -> Result<String> {
        let schema = self
            .events
            .get(&pattern.etype)
            .ok_or_else(|| ForgeError::Lexicon(format!("event type `{}`", pattern.etype)))?;
        let template = schema
            .clauses
            .get(form)
            .ok_or_else(|| ForgeError::Lexicon(format!("clause form `{form}` of `{}`", pattern.etype)))?;
        let mut out = String::new();
        for seg in parse_surface(template).map_err(ForgeError::Config)? {
            match seg {
                Segment::Literal(text) => out.push_str(&text),
                Segment::Slot(parts) => {
                    let role: Role = parts[0].parse()?;
                    let entity = pattern
                        .args
                        .get(&role)
                        .ok_or_else(|| ForgeError::Lexicon(format!("reference {pattern} lacks role `{role}`")))?;
                    let form = parts.get(1).map(String::as_str).unwrap_or("name");
                    out.push_str(&self.entity_form(entity, form)?);
                }
            }
        }
        Ok(out)
    }

    /// Every answer class: entity answers, states, stage types, and the
    /// counts `0..=max_count`.
    pub fn answer_vocabulary(&self) -> BTreeSet<String> {
        let mut vocab: BTreeSet<String> = self.entities.values().map(|e| e.answer.clone()).collect();
        vocab.extend(self.states.values().cloned());
        vocab.extend(self.stage_types.values().cloned());
        vocab.extend((0..=self.max_count).map(|n| n.to_string()));
        vocab
    }

    /// Lexicon-dependent session invariants: declared roles only, mandatory
    /// roles present, known entities and stage type.
    pub fn validate_session(&self, session: &GameplaySession) -> Result<()> {
        let fail = |message: String| ForgeError::Validation {
            session: session.id,
            message,
        };
        if !self.stage_types.contains_key(&session.stage_type) {
            return Err(fail(format!("unknown stage type `{}`", session.stage_type)));
        }
        for event in &session.events {
            let schema = self
                .events
                .get(&event.etype)
                .ok_or_else(|| fail(format!("event type `{}` has no schema", event.etype)))?;
            for role in &schema.mandatory {
                if !event.args.contains_key(role) {
                    return Err(fail(format!(
                        "event {} ({}) lacks mandatory role `{role}`",
                        event.id, event.etype
                    )));
                }
            }
            for (role, entity) in &event.args {
                if !schema.mandatory.contains(role) && !schema.optional.contains(role) {
                    return Err(fail(format!(
                        "event {} ({}) has undeclared role `{role}`",
                        event.id, event.etype
                    )));
                }
                if !self.entities.contains_key(entity) {
                    return Err(fail(format!("event {} uses unknown entity `{entity}`", event.id)));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Event, StateInterval};

    #[test]
    fn default_lexicon_has_57_answer_classes() {
        let lex = Lexicon::default_mario();
        assert_eq!(lex.answer_vocabulary().len(), 57);
        assert_eq!(lex.events.len(), EventType::ALL.len());
    }

    #[test]
    fn entity_forms() {
        let lex = Lexicon::default_mario();
        assert_eq!(lex.answer_of(&"PGoomba".into()).unwrap(), "Para Goomba");
        assert_eq!(lex.entity_form(&"stomping".into(), "phrase").unwrap(), "by stomping");
        assert_eq!(lex.entity_form(&"coin_block".into(), "indef").unwrap(), "a coin block");
        assert!(matches!(
            lex.entity_form(&"PGoomba".into(), "nonsense"),
            Err(ForgeError::Lexicon(_))
        ));
        assert!(lex.answer_of(&"Luigi".into()).is_err());
    }

    #[test]
    fn reference_clauses() {
        let lex = Lexicon::default_mario();
        let hit = EventPattern::new(EventType::Hit).with(Role::Patient, "coin_block");
        assert_eq!(lex.clause(&hit, "past").unwrap(), "Mario hit a coin block");
        let throw = EventPattern::new(EventType::Throw).with(Role::Patient, "shell");
        assert_eq!(lex.clause(&throw, "gerund").unwrap(), "throwing a shell");
        let appear = EventPattern::new(EventType::Appear).with(Role::Patient, "GKoopaParatroopa");
        assert_eq!(lex.clause(&appear, "past").unwrap(), "Green Koopa Paratroopa appeared");
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = Lexicon::from_json_str("{\n\"entities\": {},\n oops }").unwrap_err();
        assert!(matches!(err, ForgeError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn inconsistent_clause_roles_rejected() {
        let text = r#"{"entities":{},"states":{},"stage_types":{},
          "events":{"kill":{"mandatory":["patient","means"],
            "clauses":{"past":"Mario killed {patient}","gerund":"killing with {means}"}}}}"#;
        assert!(Lexicon::from_json_str(text).is_err());
    }

    #[test]
    fn session_validation() {
        let lex = Lexicon::default_mario();
        let mut session = GameplaySession {
            id: 4,
            stage_type: StageType::new("cave"),
            duration_ms: 5000,
            events: vec![Event::new(1, EventType::Kill, 100).with(Role::Patient, "Goomba")],
            states: vec![StateInterval::new(MarioState::Small, 0, 5000)],
        };
        let err = lex.validate_session(&session).unwrap_err();
        assert!(err.to_string().contains("session 4"), "{err}");
        session.events[0].args.insert(Role::Means, "stomping".into());
        assert!(lex.validate_session(&session).is_ok());
        session.stage_type = StageType::new("moon");
        assert!(lex.validate_session(&session).is_err());
    }
}
