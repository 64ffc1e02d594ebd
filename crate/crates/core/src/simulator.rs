//! Synthetic gameplay sessions and event-log ingestion.
//!
//! Event times come from independent Poisson processes, one per event type.
//! Arguments are drawn from per-role categorical distributions. Causal
//! coupling (a stomp needs a jump just before it, shooting needs fire form)
//! is declared as [`CausalRule`]s in the config and enforced after sampling:
//! state rules drop violators, precedence rules insert the missing support
//! event, and a final pass drops anything still in violation.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunk::EventPattern;
use crate::error::{ForgeError, Result};
use crate::jsonl;
use crate::model::{Args, EntityId, Event, EventType, GameplaySession, MarioState, Role, StageType, StateInterval};
use crate::rng::{mix_seed, SimRng};

const DEFAULT_CONFIG: &str = include_str!("../assets/simulator.json");
const SUM_TOLERANCE: f64 = 1e-9;

fn always() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArgDistribution {
    /// Probability that the role is filled at all.
    #[serde(default = "always")]
    pub presence: f64,
    pub values: BTreeMap<EntityId, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CausalRule {
    /// Every `event` match needs a `requires` match strictly earlier and at
    /// most `within_ms` before it.
    PrecededBy {
        event: EventPattern,
        requires: EventPattern,
        within_ms: u64,
    },
    /// Every `event` match happens while Mario is in `state`.
    RequiresState { event: EventPattern, state: MarioState },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulatorConfig {
    pub duration_ms: u64,
    pub seed: u64,
    /// Events per minute.
    pub event_rates: BTreeMap<EventType, f64>,
    #[serde(default)]
    pub arguments: BTreeMap<EventType, BTreeMap<Role, ArgDistribution>>,
    #[serde(default)]
    pub state_change_rate_per_min: f64,
    pub state_weights: BTreeMap<MarioState, f64>,
    pub stage_types: BTreeMap<StageType, f64>,
    #[serde(default)]
    pub rules: Vec<CausalRule>,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("bundled simulator config is valid")
    }
}

fn check_distribution<K: std::fmt::Display>(what: &str, weights: &BTreeMap<K, f64>) -> Result<()> {
    if let Some((k, w)) = weights.iter().find(|(_, w)| !w.is_finite() || **w < 0.0) {
        return Err(ForgeError::Config(format!("{what}: weight of `{k}` is {w}")));
    }
    let total: f64 = weights.values().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(ForgeError::Config(format!(
            "{what}: weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

impl SimulatorConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ForgeError::io(path, e))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| ForgeError::bad_config(path, &e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (etype, rate) in &self.event_rates {
            if !rate.is_finite() || *rate < 0.0 {
                return Err(ForgeError::Config(format!("rate of `{etype}` is {rate}")));
            }
        }
        if !self.state_change_rate_per_min.is_finite() || self.state_change_rate_per_min < 0.0 {
            return Err(ForgeError::Config("negative state change rate".into()));
        }
        for (etype, roles) in &self.arguments {
            for (role, dist) in roles {
                if !(0.0..=1.0).contains(&dist.presence) {
                    return Err(ForgeError::Config(format!(
                        "{etype}.{role}: presence {} outside [0, 1]",
                        dist.presence
                    )));
                }
                check_distribution(&format!("{etype}.{role}"), &dist.values)?;
            }
        }
        check_distribution("state_weights", &self.state_weights)?;
        check_distribution("stage_types", &self.stage_types)?;
        Ok(())
    }

    /// Same config with only `etype` enabled, at `rate` events per minute.
    pub fn only(mut self, etype: EventType, rate: f64) -> Self {
        self.event_rates = [(etype, rate)].into_iter().collect();
        self
    }
}

fn pick<'a, K>(rng: &mut SimRng, weights: &'a BTreeMap<K, f64>) -> &'a K {
    let w: Vec<f64> = weights.values().copied().collect();
    let idx = rng.weighted_index(&w);
    weights.keys().nth(idx).expect("index within map")
}

fn sample_args(rng: &mut SimRng, config: &SimulatorConfig, etype: EventType, pinned: &Args) -> Args {
    let mut args = pinned.clone();
    if let Some(roles) = config.arguments.get(&etype) {
        for (role, dist) in roles {
            if pinned.contains_key(role) {
                continue;
            }
            if dist.presence < 1.0 && !rng.chance(dist.presence) {
                continue;
            }
            args.insert(*role, pick(rng, &dist.values).clone());
        }
    }
    args
}

fn sample_timeline(rng: &mut SimRng, config: &SimulatorConfig) -> Vec<StateInterval> {
    let duration = config.duration_ms;
    if duration == 0 {
        return Vec::new();
    }
    let mut current = *pick(rng, &config.state_weights);
    let mut start = 0;
    let mut intervals = Vec::new();
    if config.state_change_rate_per_min > 0.0 {
        let rate = config.state_change_rate_per_min / 60_000.0;
        let mut t = 0.0;
        loop {
            t += rng.exponential(rate);
            if t >= duration as f64 {
                break;
            }
            let at = t as u64;
            let others: BTreeMap<MarioState, f64> = config
                .state_weights
                .iter()
                .filter(|(s, w)| **s != current && **w > 0.0)
                .map(|(s, w)| (*s, *w))
                .collect();
            if at == start || others.is_empty() {
                continue;
            }
            intervals.push(StateInterval::new(current, start, at));
            current = *pick(rng, &others);
            start = at;
        }
    }
    intervals.push(StateInterval::new(current, start, duration));
    intervals
}

fn state_in(timeline: &[StateInterval], t_ms: u64) -> Option<MarioState> {
    let idx = timeline.partition_point(|s| s.end_ms <= t_ms);
    timeline.get(idx).filter(|s| s.start_ms <= t_ms).map(|s| s.state)
}

/// Index of the first rule each event violates, if any. `events` must be
/// sorted by time.
fn violations(events: &[Event], timeline: &[StateInterval], rules: &[CausalRule]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, event) in events.iter().enumerate() {
        for (r, rule) in rules.iter().enumerate() {
            let ok = match rule {
                CausalRule::RequiresState { event: pat, state } => {
                    !pat.matches(event) || state_in(timeline, event.time_ms) == Some(*state)
                }
                CausalRule::PrecededBy {
                    event: pat,
                    requires,
                    within_ms,
                } => {
                    !pat.matches(event)
                        || events[..i]
                            .iter()
                            .rev()
                            .skip_while(|e| e.time_ms >= event.time_ms)
                            .take_while(|e| event.time_ms - e.time_ms <= *within_ms)
                            .any(|e| requires.matches(e))
                }
            };
            if !ok {
                out.push((i, r));
                break;
            }
        }
    }
    out
}

/// A rule broken by an event of a session.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleViolation {
    pub event_id: u64,
    pub rule_index: usize,
}

/// Scans a session once and reports every event that breaks a rule.
pub fn check_rules(session: &GameplaySession, rules: &[CausalRule]) -> Vec<RuleViolation> {
    violations(&session.events, &session.states, rules)
        .into_iter()
        .map(|(i, rule_index)| RuleViolation {
            event_id: session.events[i].id,
            rule_index,
        })
        .collect()
}

/// Generates one session; a pure function of `config` (including its seed).
/// The session id is 0; batch callers renumber.
pub fn simulate_session(config: &SimulatorConfig) -> Result<GameplaySession> {
    config.validate()?;
    let mut rng = SimRng::new(config.seed);
    let duration = config.duration_ms;

    let stage_type = pick(&mut rng, &config.stage_types).clone();
    let states = sample_timeline(&mut rng, config);

    // (time, sequence) orders events until final ids are assigned
    let mut seq = 0u64;
    let mut events: Vec<Event> = Vec::new();
    for etype in EventType::ALL {
        let rate = config.event_rates.get(etype).copied().unwrap_or(0.0);
        if rate <= 0.0 || duration == 0 {
            continue;
        }
        let per_ms = rate / 60_000.0;
        let mut t = 0.0;
        loop {
            t += rng.exponential(per_ms);
            if t >= duration as f64 {
                break;
            }
            let mut event = Event::new(seq, *etype, t as u64);
            event.args = sample_args(&mut rng, config, *etype, &Args::new());
            events.push(event);
            seq += 1;
        }
    }
    events.sort_by_key(|e| (e.time_ms, e.id));

    // state preconditions cannot be repaired by insertion
    let state_rules: Vec<CausalRule> = config
        .rules
        .iter()
        .filter(|r| matches!(r, CausalRule::RequiresState { .. }))
        .cloned()
        .collect();
    let dropped: HashSet<usize> = violations(&events, &states, &state_rules)
        .into_iter()
        .map(|(i, _)| i)
        .collect();
    events = events
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !dropped.contains(i))
        .map(|(_, e)| e)
        .collect();

    for rule in &config.rules {
        let CausalRule::PrecededBy {
            event: _,
            requires,
            within_ms,
        } = rule
        else {
            continue;
        };
        let single = std::slice::from_ref(rule);
        let mut inserted = Vec::new();
        for (i, _) in violations(&events, &states, single) {
            let t = events[i].time_ms;
            if t == 0 {
                continue;
            }
            let lo = t.saturating_sub(*within_ms);
            let at = rng.range_inclusive(lo, t - 1);
            let mut support = Event::new(seq, requires.etype, at);
            support.args = sample_args(&mut rng, config, requires.etype, &requires.args);
            inserted.push(support);
            seq += 1;
        }
        events.extend(inserted);
        events.sort_by_key(|e| (e.time_ms, e.id));
    }

    loop {
        let bad: HashSet<usize> = violations(&events, &states, &config.rules)
            .into_iter()
            .map(|(i, _)| i)
            .collect();
        if bad.is_empty() {
            break;
        }
        events = events
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !bad.contains(i))
            .map(|(_, e)| e)
            .collect();
    }

    for (i, event) in events.iter_mut().enumerate() {
        event.id = i as u64 + 1;
    }

    Ok(GameplaySession {
        id: 0,
        stage_type,
        duration_ms: duration,
        events,
        states,
    })
}

/// `count` sessions with ids `1..=count`; session `i` uses seed
/// `mix_seed(seed, i)`. Runs in parallel, output order is by id.
pub fn simulate_batch(config: &SimulatorConfig, seed: u64, count: usize) -> Result<Vec<GameplaySession>> {
    config.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let cfg = SimulatorConfig {
                seed: mix_seed(seed, i as u64),
                ..config.clone()
            };
            let mut session = simulate_session(&cfg)?;
            session.id = i as u64 + 1;
            Ok(session)
        })
        .collect()
}

/// Reads a session JSONL file and checks every structural invariant.
pub fn ingest_log(path: impl AsRef<Path>) -> Result<Vec<GameplaySession>> {
    let sessions: Vec<GameplaySession> = jsonl::read_jsonl_file(path)?;
    check_sessions(&sessions)?;
    Ok(sessions)
}

pub fn parse_sessions(text: &str) -> Result<Vec<GameplaySession>> {
    let sessions: Vec<GameplaySession> = jsonl::read_jsonl(text.as_bytes())?;
    check_sessions(&sessions)?;
    Ok(sessions)
}

fn check_sessions(sessions: &[GameplaySession]) -> Result<()> {
    let mut ids = HashSet::new();
    for session in sessions {
        session.validate_structure()?;
        if !ids.insert(session.id) {
            return Err(ForgeError::Validation {
                session: session.id,
                message: "duplicate session id".into(),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Lexicon;
    use crate::model::{events_in, Clip};

    fn short(duration_ms: u64) -> SimulatorConfig {
        SimulatorConfig {
            duration_ms,
            ..SimulatorConfig::default()
        }
    }

    #[test]
    fn zero_duration_has_no_events() {
        let s = simulate_session(&short(0)).unwrap();
        assert!(s.events.is_empty());
        assert!(s.states.is_empty());
        assert!(s.validate_structure().is_ok());
    }

    #[test]
    fn only_jumps() {
        let cfg = short(30_000).only(EventType::Jump, 60.0);
        let s = simulate_session(&cfg).unwrap();
        assert!(!s.events.is_empty());
        assert!(s.events.iter().all(|e| e.etype == EventType::Jump));
    }

    #[test]
    fn default_config_is_sound() {
        let lex = Lexicon::default_mario();
        let cfg = SimulatorConfig::default();
        for seed in 0..10 {
            let s = simulate_session(&SimulatorConfig { seed, ..cfg.clone() }).unwrap();
            s.validate_structure().unwrap();
            lex.validate_session(&s).unwrap();
            assert!(check_rules(&s, &cfg.rules).is_empty());
        }
    }

    #[test]
    fn replays_byte_identically() {
        let cfg = SimulatorConfig::default();
        let a = serde_json::to_string(&simulate_session(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&simulate_session(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn event_rate_matches_config() {
        // rules off so the configured rates are the realised rates
        let cfg = SimulatorConfig {
            rules: Vec::new(),
            ..SimulatorConfig::default()
        };
        let per_min: f64 = cfg.event_rates.values().sum();
        let expected = per_min * 4.5 / 60.0;
        let sessions = simulate_batch(&cfg, 42, 40).unwrap();
        let mut rng = SimRng::new(5);
        let mut total = 0usize;
        let mut n = 0usize;
        for s in &sessions {
            for _ in 0..50 {
                let start = rng.range_inclusive(0, s.duration_ms - 4500);
                let clip = Clip {
                    session_id: s.id,
                    start_ms: start,
                    end_ms: start + 4500,
                    target_event_id: 0,
                };
                total += events_in(&clip, s).unwrap().len();
                n += 1;
            }
        }
        let mean = total as f64 / n as f64;
        assert!((mean - expected).abs() <= 0.1 * expected, "mean {mean} vs {expected}");
    }

    #[test]
    fn rejects_bad_distribution() {
        let mut cfg = SimulatorConfig::default();
        cfg.state_weights.insert(MarioState::Small, 0.9);
        assert!(matches!(simulate_session(&cfg), Err(ForgeError::Config(_))));
        let mut cfg = SimulatorConfig::default();
        cfg.event_rates.insert(EventType::Jump, -1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rule_checker_flags_violations() {
        let rules = SimulatorConfig::default().rules;
        let session = GameplaySession {
            id: 3,
            stage_type: StageType::new("cave"),
            duration_ms: 5000,
            events: vec![
                Event::new(1, EventType::Jump, 100),
                Event::new(2, EventType::Kill, 700)
                    .with(Role::Patient, "Goomba")
                    .with(Role::Means, "stomping"),
                Event::new(3, EventType::Shoot, 800).with(Role::Means, "fireball"),
            ],
            states: vec![StateInterval::new(MarioState::Small, 0, 5000)],
        };
        let v = check_rules(&session, &rules);
        assert_eq!(
            v,
            vec![
                RuleViolation {
                    event_id: 2,
                    rule_index: 0
                },
                RuleViolation {
                    event_id: 3,
                    rule_index: 1
                },
            ]
        );
    }

    #[test]
    fn ingest_reports_line_of_unknown_type() {
        let good = serde_json::to_string(&simulate_session(&short(5000)).unwrap()).unwrap();
        let bad = r#"{"id":2,"stage_type":"cave","duration_ms":100,"events":[{"id":1,"type":"fly","t":5,"args":{}}],"states":[{"state":"small","start":0,"end":100}]}"#;
        let err = parse_sessions(&format!("{good}\n{bad}\n")).unwrap_err();
        assert!(matches!(err, ForgeError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn ingest_reports_invalid_session() {
        let bad = r#"{"id":7,"stage_type":"cave","duration_ms":100,"events":[{"id":1,"type":"jump","t":500,"args":{}}],"states":[{"state":"small","start":0,"end":100}]}"#;
        let err = parse_sessions(bad).unwrap_err();
        assert!(matches!(err, ForgeError::Validation { session: 7, .. }), "{err}");
    }
}
