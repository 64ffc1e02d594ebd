//! Question templates and linguistic realization.
//!
//! A template surface mixes literal text with two slot kinds:
//!
//! * `{arg:ROLE}` or `{arg:ROLE:FORM}` is filled with a surface form of the
//!   chunk's argument for `ROLE` (`phrase` when `FORM` is omitted);
//! * `{temporal_clause}` or `{temporal_clause:FORM}` is filled with the
//!   relation word and the reference event's clause (`past` by default).
//!
//! The roles named by `arg` slots are the template's given roles, and
//! together with the question type, predicate, hole and constraint flag they
//! form the signature a chunk must match.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::chunk::{Predicate, QuestionType, Relation, SemanticChunk, Signature, TEMPORAL_MARKERS};
use crate::error::{ForgeError, Result};
use crate::lexicon::Lexicon;
use crate::model::{events_in, Clip, EntityId, GameplaySession, Role};
use crate::rng::SimRng;
use crate::surface::{parse_surface, tidy, Segment};

const DEFAULT_TEMPLATES: &str = include_str!("../assets/templates.json");

#[derive(Clone, Debug, PartialEq, Eq)]
enum Piece {
    Text(String),
    Arg { role: Role, form: Option<String> },
    Temporal { form: Option<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub qtype: QuestionType,
    pub predicate: Predicate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hole: Option<Role>,
    #[serde(default)]
    pub constrained: bool,
    pub surface: String,
    #[serde(skip)]
    pieces: Vec<Piece>,
}

impl Template {
    pub fn new(
        id: &str,
        qtype: QuestionType,
        predicate: Predicate,
        hole: Option<Role>,
        constrained: bool,
        surface: &str,
    ) -> Result<Self> {
        let mut t = Template {
            id: id.to_owned(),
            qtype,
            predicate,
            hole,
            constrained,
            surface: surface.to_owned(),
            pieces: Vec::new(),
        };
        t.compile()?;
        Ok(t)
    }

    fn compile(&mut self) -> Result<()> {
        let fail = |msg: String| ForgeError::Config(format!("template `{}`: {msg}", self.id));
        let mut pieces = Vec::new();
        let mut temporal = 0;
        for seg in parse_surface(&self.surface).map_err(fail)? {
            match seg {
                Segment::Literal(text) => pieces.push(Piece::Text(text)),
                Segment::Slot(parts) => match (parts[0].as_str(), parts.len()) {
                    ("arg", 2 | 3) => {
                        let role: Role = parts[1].parse().map_err(|e: ForgeError| fail(e.to_string()))?;
                        if Some(role) == self.hole {
                            return Err(fail(format!("slot fills the hole role `{role}`")));
                        }
                        pieces.push(Piece::Arg {
                            role,
                            form: parts.get(2).cloned(),
                        });
                    }
                    ("temporal_clause", 1 | 2) => {
                        temporal += 1;
                        pieces.push(Piece::Temporal {
                            form: parts.get(1).cloned(),
                        });
                    }
                    _ => return Err(fail(format!("unknown slot `{{{}}}`", parts.join(":")))),
                },
            }
        }
        if self.constrained != (temporal == 1) || temporal > 1 {
            return Err(fail(format!(
                "constrained={} but {temporal} temporal clause slot(s)",
                self.constrained
            )));
        }
        if !self.constrained {
            let lower = self.surface.to_lowercase();
            if let Some(m) = lower
                .split(|c: char| !c.is_alphanumeric())
                .find(|w| TEMPORAL_MARKERS.contains(w))
            {
                return Err(fail(format!("unconstrained surface uses temporal marker `{m}`")));
            }
        }
        self.pieces = pieces;
        // the signature must describe a well-formed chunk
        let probe = SemanticChunk {
            qtype: self.qtype,
            predicate: self.predicate,
            hole: self.hole,
            args: self.given().into_iter().map(|r| (r, EntityId::new("_"))).collect(),
            constraint: None,
            target: 0,
        };
        probe.check_well_formed().map_err(|e| fail(e.to_string()))?;
        Ok(())
    }

    fn given(&self) -> BTreeSet<Role> {
        self.pieces
            .iter()
            .filter_map(|p| match p {
                Piece::Arg { role, .. } => Some(*role),
                _ => None,
            })
            .collect()
    }

    pub fn signature(&self) -> Signature {
        Signature {
            qtype: self.qtype,
            predicate: self.predicate,
            hole: self.hole,
            given: self.given(),
            constrained: self.constrained,
        }
    }

    /// Fills every slot from the chunk and applies the article, spacing and
    /// capitalisation post-rules.
    pub fn fill(&self, chunk: &SemanticChunk, lexicon: &Lexicon) -> Result<String> {
        if self.signature() != chunk.signature() {
            return Err(ForgeError::Consistency(format!(
                "template `{}` ({}) does not fit chunk {}",
                self.id,
                self.signature(),
                chunk.signature()
            )));
        }
        let mut text = String::new();
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => text.push_str(t),
                Piece::Arg { role, form } => {
                    let entity = &chunk.args[role];
                    text.push_str(&lexicon.entity_form(entity, form.as_deref().unwrap_or("phrase"))?);
                }
                Piece::Temporal { form } => {
                    let c = chunk.constraint.as_ref().expect("signature says constrained");
                    text.push_str(c.relation.as_str());
                    text.push(' ');
                    text.push_str(&lexicon.clause(&c.reference, form.as_deref().unwrap_or("past"))?);
                }
            }
        }
        Ok(tidy(&text))
    }

    /// Reads a question produced by this template back into the argument
    /// entities and temporal clause it realises. Each role maps to the set of
    /// entities whose form matches the captured text.
    pub fn parse_question(&self, question: &str, lexicon: &Lexicon) -> Option<ParsedQuestion> {
        let mut pattern = String::from("(?i)^\\s*");
        let mut captures: Vec<Option<(Role, String)>> = Vec::new();
        for piece in &self.pieces {
            match piece {
                Piece::Text(t) => {
                    let words: Vec<String> = t
                        .split_whitespace()
                        .map(|w| {
                            if w == "a" || w == "A" {
                                "an?".to_owned()
                            } else {
                                regex::escape(w)
                            }
                        })
                        .collect();
                    if t.starts_with(char::is_whitespace) {
                        pattern.push_str("\\s*");
                    }
                    pattern.push_str(&words.join("\\s+"));
                    if t.ends_with(char::is_whitespace) && !words.is_empty() {
                        pattern.push_str("\\s*");
                    }
                }
                Piece::Arg { role, form } => {
                    let form = form.as_deref().unwrap_or("phrase");
                    let mut options: Vec<String> = lexicon
                        .entities
                        .keys()
                        .filter_map(|id| lexicon.entity_form(id, form).ok())
                        .collect();
                    options.sort_by_key(|o| std::cmp::Reverse(o.len()));
                    options.dedup();
                    let alts: Vec<String> = options.iter().map(|o| regex::escape(o)).collect();
                    pattern.push_str(&format!("({})", alts.join("|")));
                    captures.push(Some((*role, form.to_owned())));
                }
                Piece::Temporal { .. } => {
                    pattern.push_str("(before|after|when)\\s+(.+?)");
                    captures.push(None);
                    captures.push(None);
                }
            }
        }
        pattern.push_str("\\s*$");
        let re = Regex::new(&pattern).ok()?;
        let caps = re.captures(question)?;

        let mut parsed = ParsedQuestion::default();
        let mut temporal_seen = false;
        for (i, slot) in captures.iter().enumerate() {
            let text = caps.get(i + 1)?.as_str();
            match slot {
                Some((role, form)) => {
                    let ids: BTreeSet<EntityId> = lexicon
                        .entities
                        .keys()
                        .filter(|id| {
                            lexicon
                                .entity_form(id, form)
                                .is_ok_and(|f| f.eq_ignore_ascii_case(text))
                        })
                        .cloned()
                        .collect();
                    parsed.args.entry(*role).or_default().extend(ids);
                }
                None if !temporal_seen => {
                    parsed.relation = match text.to_lowercase().as_str() {
                        "before" => Some(Relation::Before),
                        "after" => Some(Relation::After),
                        _ => Some(Relation::When),
                    };
                    temporal_seen = true;
                }
                None => parsed.clause = Some(text.to_owned()),
            }
        }
        Some(parsed)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedQuestion {
    pub args: BTreeMap<Role, BTreeSet<EntityId>>,
    pub relation: Option<Relation>,
    pub clause: Option<String>,
}

#[derive(Deserialize)]
struct PoolFile {
    templates: Vec<Template>,
}

#[derive(Clone, Debug)]
pub struct TemplatePool {
    templates: Vec<Template>,
    by_signature: HashMap<Signature, Vec<usize>>,
}

fn line_of(text: &str, needle: &str) -> usize {
    text.find(needle)
        .map(|at| text[..at].matches('\n').count() + 1)
        .unwrap_or(0)
}

impl TemplatePool {
    pub fn default_pool() -> Self {
        Self::from_json_str(DEFAULT_TEMPLATES).expect("bundled template pool is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ForgeError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: PoolFile = serde_json::from_str(text).map_err(|e| ForgeError::json(e.line(), &e))?;
        let mut seen = BTreeSet::new();
        let mut templates = Vec::with_capacity(file.templates.len());
        for mut t in file.templates {
            let line = line_of(text, &format!("\"{}\"", t.id));
            if !seen.insert(t.id.clone()) {
                return Err(ForgeError::Parse {
                    line,
                    message: format!("duplicate template id `{}`", t.id),
                });
            }
            t.compile().map_err(|e| ForgeError::Parse {
                line,
                message: e.to_string(),
            })?;
            templates.push(t);
        }
        Ok(Self::from_templates(templates))
    }

    pub fn from_templates(templates: Vec<Template>) -> Self {
        let mut by_signature: HashMap<Signature, Vec<usize>> = HashMap::new();
        for (i, t) in templates.iter().enumerate() {
            by_signature.entry(t.signature()).or_default().push(i);
        }
        Self {
            templates,
            by_signature,
        }
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }

    /// Templates for a signature, in file order.
    pub fn matching(&self, signature: &Signature) -> Vec<&Template> {
        self.by_signature
            .get(signature)
            .map(|idx| idx.iter().map(|&i| &self.templates[i]).collect())
            .unwrap_or_default()
    }

    pub fn covers(&self, signature: &Signature) -> bool {
        self.by_signature.contains_key(signature)
    }

    pub fn signatures(&self) -> impl Iterator<Item = &Signature> {
        self.by_signature.keys()
    }
}

/// Uniform seeded choice among the templates matching the chunk.
pub fn select_template<'p>(pool: &'p TemplatePool, chunk: &SemanticChunk, seed: u64) -> Result<&'p Template> {
    let signature = chunk.signature();
    let matches = pool.matching(&signature);
    if matches.is_empty() {
        return Err(ForgeError::Coverage(signature.to_string()));
    }
    let idx = SimRng::new(seed).below(matches.len() as u64) as usize;
    Ok(matches[idx])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Realization {
    pub question: String,
    pub answer: String,
}

/// Fills the template and realises the answer straight from the target
/// event, the clip's events or the session, without going through the
/// oracle.
pub fn realize(
    template: &Template,
    chunk: &SemanticChunk,
    clip: &Clip,
    session: &GameplaySession,
    lexicon: &Lexicon,
) -> Result<Realization> {
    let question = template.fill(chunk, lexicon)?;
    let answer = direct_answer(chunk, clip, session, lexicon)?;
    Ok(Realization { question, answer })
}

fn direct_answer(chunk: &SemanticChunk, clip: &Clip, session: &GameplaySession, lexicon: &Lexicon) -> Result<String> {
    let target = session.event(chunk.target).ok_or(ForgeError::UnknownEvent {
        session: session.id,
        event: chunk.target,
    })?;
    let events = events_in(clip, session)?;
    let reference_time = |chunk: &SemanticChunk| -> Result<Option<u64>> {
        let Some(c) = &chunk.constraint else {
            return Ok(None);
        };
        let mut found = events.iter().filter(|e| c.reference.matches(e));
        match (found.next(), found.next()) {
            (Some(e), None) => Ok(Some(e.time_ms)),
            (None, _) => Err(ForgeError::DanglingReference(c.reference.to_string())),
            _ => Err(ForgeError::AmbiguousReference(c.reference.to_string())),
        }
    };
    match chunk.predicate {
        Predicate::Event(etype) if chunk.qtype == QuestionType::EventCentric => {
            let hole = chunk.hole.ok_or_else(|| ForgeError::Consistency("no hole".into()))?;
            if target.etype != etype {
                return Err(ForgeError::Consistency(format!("target {} is not {etype}", target.id)));
            }
            let value = target
                .arg(hole)
                .ok_or_else(|| ForgeError::Consistency(format!("target {} has no `{hole}`", target.id)))?;
            Ok(lexicon.answer_of(value)?.to_owned())
        }
        Predicate::Event(etype) => {
            let at = reference_time(chunk)?;
            let count = events
                .iter()
                .filter(|e| e.etype == etype && chunk.args.iter().all(|(r, v)| e.arg(*r) == Some(v)))
                .filter(|e| match (chunk.constraint.as_ref().map(|c| c.relation), at) {
                    (Some(Relation::Before), Some(t)) => e.time_ms < t,
                    (Some(Relation::After), Some(t)) => e.time_ms > t,
                    (Some(Relation::When), Some(t)) => e.time_ms.abs_diff(t) <= crate::oracle::WHEN_TOLERANCE_MS,
                    _ => true,
                })
                .count();
            lexicon
                .count_answer(count)
                .ok_or_else(|| ForgeError::Lexicon(format!("count {count} above the answer cap")))
        }
        Predicate::MarioState => {
            let at = reference_time(chunk)?.unwrap_or(clip.start_ms);
            Ok(lexicon.state_answer(session.state_at(at)?)?.to_owned())
        }
        Predicate::StageType => Ok(lexicon.stage_answer(&session.stage_type)?.to_owned()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::EventPattern;
    use crate::model::{Event, EventType, MarioState, StageType, StateInterval};

    fn jump_throw_log() -> GameplaySession {
        GameplaySession {
            id: 1,
            stage_type: StageType::new("cave"),
            duration_ms: 6000,
            events: vec![
                Event::new(1, EventType::Jump, 500),
                Event::new(2, EventType::Throw, 1000).with(Role::Patient, "shell"),
                Event::new(3, EventType::Jump, 1500),
                Event::new(4, EventType::Jump, 2000),
                Event::new(5, EventType::Kill, 2500)
                    .with(Role::Patient, "PGoomba")
                    .with(Role::Means, "stomping"),
            ],
            states: vec![StateInterval::new(MarioState::Small, 0, 6000)],
        }
    }

    fn clip(target: u64) -> Clip {
        Clip {
            session_id: 1,
            start_ms: 0,
            end_ms: 5000,
            target_event_id: target,
        }
    }

    #[test]
    fn fills_stomp_question() {
        let lex = Lexicon::default_mario();
        let s = jump_throw_log();
        let t = Template::new(
            "t",
            QuestionType::EventCentric,
            Predicate::Event(EventType::Kill),
            Some(Role::Patient),
            false,
            "What enemy did Mario kill {arg:means}?",
        )
        .unwrap();
        let chunk = SemanticChunk::event_centric(s.event(5).unwrap(), Role::Patient);
        let r = realize(&t, &chunk, &clip(5), &s, &lex).unwrap();
        assert_eq!(r.question, "What enemy did Mario kill by stomping?");
        assert_eq!(r.answer, "Para Goomba");
    }

    #[test]
    fn fills_counting_question() {
        let lex = Lexicon::default_mario();
        let s = jump_throw_log();
        let t = Template::new(
            "t",
            QuestionType::Counting,
            Predicate::Event(EventType::Jump),
            None,
            true,
            "How many times did Mario jump {temporal_clause:gerund}?",
        )
        .unwrap();
        let chunk = SemanticChunk::counting(EventPattern::new(EventType::Jump), 1).constrained(
            Relation::After,
            EventPattern::new(EventType::Throw).with(Role::Patient, "shell"),
        );
        let r = realize(&t, &chunk, &clip(1), &s, &lex).unwrap();
        assert_eq!(r.question, "How many times did Mario jump after throwing a shell?");
        assert_eq!(r.answer, "2");
    }

    #[test]
    fn template_validation() {
        let bad = |constrained, surface| {
            Template::new(
                "bad",
                QuestionType::Counting,
                Predicate::Event(EventType::Jump),
                None,
                constrained,
                surface,
            )
        };
        assert!(bad(false, "How many times did Mario jump {temporal_clause}?").is_err());
        assert!(bad(true, "How many times did Mario jump?").is_err());
        assert!(bad(false, "How many times did Mario jump after that?").is_err());
        assert!(bad(false, "How many {bogus} jumps?").is_err());
        assert!(Template::new(
            "bad",
            QuestionType::EventCentric,
            Predicate::Event(EventType::Kill),
            Some(Role::Means),
            false,
            "What did Mario kill {arg:means}?",
        )
        .is_err());
    }

    #[test]
    fn pool_errors_name_the_line() {
        let text = "{\"templates\": [\n {\"id\": \"a\", \"qtype\": \"counting\", \"predicate\": \"jump\", \"surface\": \"How many jumps?\"},\n {\"id\": \"b\", \"qtype\": \"counting\", \"predicate\": \"jump\", \"surface\": \"How many jumps after {x}?\"}\n]}";
        let err = TemplatePool::from_json_str(text).unwrap_err();
        assert!(matches!(err, ForgeError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn selection() {
        let pool = TemplatePool::default_pool();
        let chunk = SemanticChunk::counting(EventPattern::new(EventType::Jump), 1);
        let first = select_template(&pool, &chunk, 17).unwrap();
        for _ in 0..5 {
            assert_eq!(select_template(&pool, &chunk, 17).unwrap().id, first.id);
        }
        let uncovered = SemanticChunk::counting(EventPattern::new(EventType::Kill).with(Role::Location, "hill"), 1);
        assert!(matches!(
            select_template(&pool, &uncovered, 1),
            Err(ForgeError::Coverage(_))
        ));
    }

    #[test]
    fn every_signature_has_two_realizations() {
        let pool = TemplatePool::default_pool();
        for sig in pool.signatures() {
            assert!(pool.matching(sig).len() >= 2, "{sig}");
        }
    }

    #[test]
    fn parse_recovers_arguments() {
        let lex = Lexicon::default_mario();
        let s = jump_throw_log();
        let pool = TemplatePool::default_pool();
        let chunk = SemanticChunk::event_centric(s.event(5).unwrap(), Role::Patient);
        for t in pool.matching(&chunk.signature()) {
            let q = t.fill(&chunk, &lex).unwrap();
            let parsed = t.parse_question(&q, &lex).unwrap_or_else(|| panic!("{} / {q}", t.id));
            assert!(parsed.args[&Role::Means].contains(&EntityId::new("stomping")));
        }
    }
}
