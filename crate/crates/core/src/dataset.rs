//! Duplicate capping, per-subset splitting, statistics and oracle replay
//! over generated datasets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chunk::TEMPORAL_MARKERS;
use crate::error::{ForgeError, Result};
use crate::generator::QaPair;
use crate::jsonl;
use crate::lexicon::Lexicon;
use crate::model::{events_in, GameplaySession};
use crate::oracle;
use crate::rng::SimRng;
use crate::sampler::{classify_subset, Subset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Valid, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<QaPair>,
}

impl Dataset {
    pub fn new(examples: Vec<QaPair>) -> Self {
        Self { examples }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::new(jsonl::read_jsonl_file(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        jsonl::write_jsonl_file(path, &self.examples)
    }

    pub fn to_jsonl(&self) -> String {
        jsonl::to_jsonl_string(&self.examples)
    }

    pub fn in_split(&self, split: SplitName) -> impl Iterator<Item = &QaPair> {
        self.examples.iter().filter(move |e| e.split == Some(split))
    }

    pub fn get(&self, id: &str) -> Option<&QaPair> {
        self.examples.iter().find(|e| e.id == id)
    }
}

/// Keeps at most `max_count` examples per identical (question, answer) pair.
/// Survivors of an over-full group are a seeded uniform sample; the output
/// keeps input order.
pub fn cap_duplicates(examples: &[QaPair], max_count: usize, seed: u64) -> Vec<QaPair> {
    assert!(max_count >= 1, "max_count must be at least 1");
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index: HashMap<(&str, &str), usize> = HashMap::new();
    for (i, e) in examples.iter().enumerate() {
        let g = *index.entry((e.q.as_str(), e.a.as_str())).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let mut rng = SimRng::new(seed);
    let mut keep = vec![true; examples.len()];
    for group in groups.iter_mut().filter(|g| g.len() > max_count) {
        rng.shuffle(group);
        for &i in &group[max_count..] {
            keep[i] = false;
        }
    }
    examples
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(e, _)| e.clone())
        .collect()
}

/// Train/valid/test sizes for `n` examples: train is `floor(r_train * n)` and
/// valid takes its share of the remainder rounded up.
pub fn split_counts(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (r_train, r_valid, r_test) = ratios;
    if [r_train, r_valid, r_test].iter().any(|r| !(0.0..=1.0).contains(r))
        || ((r_train + r_valid + r_test) - 1.0).abs() > 1e-9
    {
        return Err(ForgeError::Config(format!(
            "split ratios {ratios:?} must be in [0,1] and sum to 1"
        )));
    }
    let train = ((r_train * n as f64) + 1e-9).floor() as usize;
    let rest = n - train;
    let valid = if r_valid + r_test == 0.0 {
        0
    } else {
        ((r_valid / (r_valid + r_test) * rest as f64) - 1e-9).ceil().max(0.0) as usize
    };
    Ok((train, valid.min(rest), rest - valid.min(rest)))
}

/// Assigns every example a split, shuffling each subset independently.
pub fn split(dataset: &Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<Dataset> {
    let mut out = dataset.clone();
    for (k, subset) in Subset::ALL.iter().enumerate() {
        let mut members: Vec<usize> = out
            .examples
            .iter()
            .enumerate()
            .filter(|(_, e)| e.subset == *subset)
            .map(|(i, _)| i)
            .collect();
        let (train, valid, _) = split_counts(members.len(), ratios)?;
        SimRng::derive(seed, k as u64).shuffle(&mut members);
        for (rank, i) in members.into_iter().enumerate() {
            out.examples[i].split = Some(if rank < train {
                SplitName::Train
            } else if rank < train + valid {
                SplitName::Valid
            } else {
                SplitName::Test
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub total: usize,
    pub unique_qa: usize,
    pub by_qtype: BTreeMap<String, usize>,
    pub by_event_type: BTreeMap<String, usize>,
    pub by_answer: BTreeMap<String, usize>,
    pub by_split: BTreeMap<String, usize>,
    pub question_vocabulary: usize,
    /// `None` when no sessions were supplied or the subset is empty.
    pub mean_events_per_clip: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total: usize,
    pub unique_qa: usize,
    pub mean_events_per_clip: Option<f64>,
    pub subsets: BTreeMap<String, SubsetStats>,
    /// Sessions whose examples land in more than one split.
    pub sessions_across_splits: usize,
}

fn words(question: &str) -> impl Iterator<Item = String> + '_ {
    question
        .split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '-'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

/// Distribution counts per subset. With sessions, every example's session
/// must resolve and mean events per clip is filled in.
pub fn compute_stats(dataset: &Dataset, sessions: Option<&[GameplaySession]>) -> Result<StatsReport> {
    let by_id: Option<HashMap<u64, &GameplaySession>> = sessions.map(|s| s.iter().map(|s| (s.id, s)).collect());
    let mut report = StatsReport::default();
    let mut all_unique = BTreeSet::new();
    let mut all_events = 0usize;
    let mut vocab: BTreeMap<Subset, BTreeSet<String>> = BTreeMap::new();
    let mut unique: BTreeMap<Subset, BTreeSet<(&str, &str)>> = BTreeMap::new();
    let mut events: BTreeMap<Subset, usize> = BTreeMap::new();
    let mut session_splits: BTreeMap<u64, BTreeSet<SplitName>> = BTreeMap::new();

    for subset in Subset::ALL {
        report.subsets.insert(subset.to_string(), SubsetStats::default());
    }
    for e in &dataset.examples {
        let stats = report.subsets.get_mut(e.subset.as_str()).expect("all subsets present");
        stats.total += 1;
        *stats.by_qtype.entry(e.qtype.as_str().to_owned()).or_default() += 1;
        *stats.by_event_type.entry(e.chunk.predicate.to_string()).or_default() += 1;
        *stats.by_answer.entry(e.a.clone()).or_default() += 1;
        if let Some(split) = e.split {
            *stats.by_split.entry(split.as_str().to_owned()).or_default() += 1;
            session_splits.entry(e.session).or_default().insert(split);
        }
        vocab.entry(e.subset).or_default().extend(words(&e.q));
        unique.entry(e.subset).or_default().insert((&e.q, &e.a));
        all_unique.insert((&e.q, &e.a));
        if let Some(by_id) = &by_id {
            let session = by_id.get(&e.session).ok_or_else(|| {
                ForgeError::Integrity(format!("example {} names unknown session {}", e.id, e.session))
            })?;
            let n = events_in(&e.clip(), session)?.len();
            *events.entry(e.subset).or_default() += n;
            all_events += n;
        }
    }
    for subset in Subset::ALL {
        let stats = report.subsets.get_mut(subset.as_str()).expect("all subsets present");
        stats.question_vocabulary = vocab.get(&subset).map_or(0, BTreeSet::len);
        stats.unique_qa = unique.get(&subset).map_or(0, BTreeSet::len);
        if by_id.is_some() && stats.total > 0 {
            stats.mean_events_per_clip = Some(events.get(&subset).copied().unwrap_or(0) as f64 / stats.total as f64);
        }
        report.total += stats.total;
    }
    report.unique_qa = all_unique.len();
    if by_id.is_some() && report.total > 0 {
        report.mean_events_per_clip = Some(all_events as f64 / report.total as f64);
    }
    report.sessions_across_splits = session_splits.values().filter(|s| s.len() > 1).count();
    Ok(report)
}

impl StatsReport {
    /// Long-format CSV: `subset,field,key,value`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| ForgeError::Config(format!("csv: {e}"));
        w.write_record(["subset", "field", "key", "value"]).map_err(csv_err)?;
        for (subset, s) in &self.subsets {
            let scalars = [
                ("total", s.total.to_string()),
                ("unique_qa", s.unique_qa.to_string()),
                ("question_vocabulary", s.question_vocabulary.to_string()),
                (
                    "mean_events_per_clip",
                    s.mean_events_per_clip.map(|m| format!("{m:.4}")).unwrap_or_default(),
                ),
            ];
            for (field, value) in scalars {
                w.write_record([subset.as_str(), field, "", value.as_str()])
                    .map_err(csv_err)?;
            }
            for (field, map) in [
                ("qtype", &s.by_qtype),
                ("event_type", &s.by_event_type),
                ("answer", &s.by_answer),
                ("split", &s.by_split),
            ] {
                for (key, count) in map {
                    w.write_record([subset.as_str(), field, key.as_str(), &count.to_string()])
                        .map_err(csv_err)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| ForgeError::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub id: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_example(e: &QaPair, session: &GameplaySession, lexicon: &Lexicon) -> Result<Option<String>> {
    let clip = e.clip();
    clip.validate(session)?;
    let answers = oracle::answer(&e.chunk, &clip, session, lexicon)?;
    if answers.unique() != Some(e.a.as_str()) {
        let got: Vec<&str> = answers.0.iter().map(String::as_str).collect();
        return Ok(Some(format!("oracle answers {got:?}, dataset says `{}`", e.a)));
    }
    let subset = classify_subset(&clip, session, &e.chunk)?;
    if subset != e.subset {
        return Ok(Some(format!(
            "subset recomputes as {subset}, dataset says {}",
            e.subset
        )));
    }
    if e.qtype != e.chunk.qtype {
        return Ok(Some("qtype disagrees with chunk".into()));
    }
    let marked = words(&e.q).any(|w| TEMPORAL_MARKERS.contains(&w.as_str()));
    if marked != (e.subset != Subset::NT) {
        return Ok(Some("temporal marker presence disagrees with subset".into()));
    }
    Ok(None)
}

/// Replays the oracle over every example.
pub fn validate_dataset(dataset: &Dataset, sessions: &[GameplaySession], lexicon: &Lexicon) -> ValidationReport {
    let by_id: HashMap<u64, &GameplaySession> = sessions.iter().map(|s| (s.id, s)).collect();
    let mut report = ValidationReport::default();
    for e in &dataset.examples {
        report.checked += 1;
        let problem = match by_id.get(&e.session) {
            None => Some(format!("unknown session {}", e.session)),
            Some(session) => check_example(e, session, lexicon).unwrap_or_else(|err| Some(err.to_string())),
        };
        if let Some(message) = problem {
            report.violations.push(Violation {
                id: e.id.clone(),
                message,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{EventPattern, QuestionType, SemanticChunk};
    use crate::model::EventType;

    fn qa(id: usize, q: &str, a: &str, subset: Subset) -> QaPair {
        QaPair {
            id: id.to_string(),
            q: q.into(),
            a: a.into(),
            subset,
            qtype: QuestionType::Counting,
            session: 1,
            clip: [0, 3000],
            template: "t".into(),
            chunk: SemanticChunk::counting(EventPattern::new(EventType::Jump), 1),
            split: None,
        }
    }

    #[test]
    fn large_subset_split_counts() {
        let r = (0.6, 0.2, 0.2);
        assert_eq!(split_counts(78_297, r).unwrap(), (46_978, 15_660, 15_659));
        assert_eq!(split_counts(64_619, r).unwrap(), (38_771, 12_924, 12_924));
        assert_eq!(split_counts(44_841, r).unwrap(), (26_904, 8_969, 8_968));
        assert_eq!(split_counts(5, r).unwrap(), (3, 1, 1));
        assert_eq!(split_counts(0, r).unwrap(), (0, 0, 0));
        assert!(split_counts(10, (0.5, 0.5, 0.5)).is_err());
    }

    #[test]
    fn cap() {
        let distinct: Vec<_> = (0..5).map(|i| qa(i, &format!("q{i}"), "1", Subset::NT)).collect();
        assert_eq!(cap_duplicates(&distinct, 1, 3), distinct);
        let copies: Vec<_> = (0..10).map(|i| qa(i, "q", "1", Subset::NT)).collect();
        let kept = cap_duplicates(&copies, 3, 3);
        assert_eq!(kept.len(), 3);
        assert!(kept
            .windows(2)
            .all(|w| w[0].id.parse::<usize>().unwrap() < w[1].id.parse::<usize>().unwrap()));
        assert_eq!(kept, cap_duplicates(&copies, 3, 3));
        assert_eq!(cap_duplicates(&kept, 3, 99), kept);
    }

    #[test]
    fn split_partitions_each_subset() {
        let mut ex = Vec::new();
        for i in 0..23 {
            ex.push(qa(i, &format!("q{i}"), "1", Subset::ALL[i % 3]));
        }
        let ds = split(&Dataset::new(ex), (0.6, 0.2, 0.2), 11).unwrap();
        for subset in Subset::ALL {
            let members: Vec<_> = ds.examples.iter().filter(|e| e.subset == subset).collect();
            let (tr, va, te) = split_counts(members.len(), (0.6, 0.2, 0.2)).unwrap();
            let count = |s| members.iter().filter(|e| e.split == Some(s)).count();
            assert_eq!(
                (count(SplitName::Train), count(SplitName::Valid), count(SplitName::Test)),
                (tr, va, te)
            );
        }
        assert_eq!(ds, split(&ds, (0.6, 0.2, 0.2), 11).unwrap());
    }

    #[test]
    fn empty_stats() {
        let r = compute_stats(&Dataset::default(), Some(&[])).unwrap();
        assert_eq!(r.total, 0);
        assert_eq!(r.unique_qa, 0);
        assert!(r
            .subsets
            .values()
            .all(|s| s.total == 0 && s.mean_events_per_clip.is_none()));
        assert!(r.to_csv().unwrap().starts_with("subset,field,key,value\n"));
    }

    #[test]
    fn dangling_session_in_stats() {
        let ds = Dataset::new(vec![qa(0, "q", "1", Subset::NT)]);
        assert!(matches!(compute_stats(&ds, Some(&[])), Err(ForgeError::Integrity(_))));
        assert_eq!(compute_stats(&ds, None).unwrap().total, 1);
    }
}
