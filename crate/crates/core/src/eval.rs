//! Accuracy over the test split and the two trivial baselines.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitName};
use crate::error::{ForgeError, Result};
use crate::sampler::Subset;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub answer: String,
}

/// Correct and total counts; `accuracy` is `None` when `total` is zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub correct: usize,
    pub total: usize,
    pub accuracy: Option<f64>,
}

impl Cell {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += usize::from(correct);
    }

    fn finish(&mut self) {
        self.accuracy = (self.total > 0).then(|| self.correct as f64 / self.total as f64);
    }
}

/// Columns are `NT`, `ET`, `HT` and `ALL`.
pub type Row = BTreeMap<String, Cell>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub overall: Row,
    pub by_qtype: BTreeMap<String, Row>,
    /// Test examples without a prediction; they count as wrong.
    pub missing: Vec<String>,
}

impl AccuracyReport {
    /// False when the test split is empty, in which case every accuracy is
    /// undefined.
    pub fn is_defined(&self) -> bool {
        self.overall.get("ALL").is_some_and(|c| c.accuracy.is_some())
    }
}

fn empty_row() -> Row {
    Subset::ALL
        .iter()
        .map(|s| s.to_string())
        .chain(["ALL".to_owned()])
        .map(|k| (k, Cell::default()))
        .collect()
}

/// Exact-class accuracy on the test split, per subset, per question type and
/// micro-averaged overall.
pub fn accuracy(predictions: &[Prediction], dataset: &Dataset) -> Result<AccuracyReport> {
    let by_id: HashMap<&str, &crate::generator::QaPair> = dataset.examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut predicted: HashMap<&str, &str> = HashMap::new();
    for p in predictions {
        let example = by_id
            .get(p.id.as_str())
            .ok_or_else(|| ForgeError::Integrity(format!("prediction for unknown example `{}`", p.id)))?;
        if example.split != Some(SplitName::Test) {
            return Err(ForgeError::Integrity(format!(
                "prediction for `{}`, which is not a test example",
                p.id
            )));
        }
        if predicted.insert(&p.id, &p.answer).is_some() {
            return Err(ForgeError::Integrity(format!("two predictions for `{}`", p.id)));
        }
    }

    let mut report = AccuracyReport {
        overall: empty_row(),
        ..Default::default()
    };
    for e in dataset.in_split(SplitName::Test) {
        let correct = match predicted.get(e.id.as_str()) {
            Some(answer) => *answer == e.a,
            None => {
                report.missing.push(e.id.clone());
                false
            }
        };
        let row = report
            .by_qtype
            .entry(e.qtype.as_str().to_owned())
            .or_insert_with(empty_row);
        for r in [&mut report.overall, row] {
            r.get_mut(e.subset.as_str()).expect("subset column").add(correct);
            r.get_mut("ALL").expect("ALL column").add(correct);
        }
    }
    for row in std::iter::once(&mut report.overall).chain(report.by_qtype.values_mut()) {
        row.values_mut().for_each(Cell::finish);
    }
    Ok(report)
}

/// Most frequent train answer of each subset, ties broken by the
/// lexicographically smallest answer.
pub fn modal_train_answers(dataset: &Dataset) -> Result<BTreeMap<Subset, String>> {
    let mut counts: BTreeMap<Subset, BTreeMap<&str, usize>> = BTreeMap::new();
    for e in dataset.in_split(SplitName::Train) {
        *counts.entry(e.subset).or_default().entry(&e.a).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(ForgeError::Empty("the train split is empty".into()));
    }
    Ok(counts
        .into_iter()
        .map(|(subset, c)| {
            // on equal counts the smaller answer compares greater
            let (answer, _) = c
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
                .expect("non-empty subset");
            (subset, answer.to_owned())
        })
        .collect())
}

/// Predicts the subset's modal train answer for every test example.
pub fn most_frequent_baseline(dataset: &Dataset) -> Result<Vec<Prediction>> {
    let modal = modal_train_answers(dataset)?;
    dataset
        .in_split(SplitName::Test)
        .map(|e| {
            let answer = modal
                .get(&e.subset)
                .ok_or_else(|| ForgeError::Empty(format!("subset {} has test but no train examples", e.subset)))?;
            Ok(Prediction {
                id: e.id.clone(),
                answer: answer.clone(),
            })
        })
        .collect()
}

/// Expected accuracy of a uniform guess over the answers occurring in each
/// subset's test split: `1 / |support|`. Subsets without test examples are
/// left out.
pub fn random_guess_expectation(dataset: &Dataset) -> Result<BTreeMap<Subset, f64>> {
    let mut support: BTreeMap<Subset, BTreeSet<&str>> = BTreeMap::new();
    for e in dataset.in_split(SplitName::Test) {
        support.entry(e.subset).or_default().insert(&e.a);
    }
    if support.is_empty() {
        return Err(ForgeError::Empty("the test split is empty".into()));
    }
    Ok(support.into_iter().map(|(s, a)| (s, 1.0 / a.len() as f64)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{EventPattern, QuestionType, SemanticChunk};
    use crate::generator::QaPair;
    use crate::model::EventType;

    fn qa(id: usize, a: &str, subset: Subset, split: SplitName) -> QaPair {
        QaPair {
            id: format!("e{id}"),
            q: "How many times did Mario jump?".into(),
            a: a.into(),
            subset,
            qtype: QuestionType::Counting,
            session: 1,
            clip: [0, 3000],
            template: "t".into(),
            chunk: SemanticChunk::counting(EventPattern::new(EventType::Jump), 1),
            split: Some(split),
        }
    }

    fn pred(id: usize, answer: &str) -> Prediction {
        Prediction {
            id: format!("e{id}"),
            answer: answer.into(),
        }
    }

    #[test]
    fn seven_of_ten() {
        let ds = Dataset::new((0..10).map(|i| qa(i, "2", Subset::ET, SplitName::Test)).collect());
        let preds: Vec<_> = (0..10).map(|i| pred(i, if i < 7 { "2" } else { "3" })).collect();
        let r = accuracy(&preds, &ds).unwrap();
        assert_eq!(r.overall["ALL"].accuracy, Some(0.7));
        assert_eq!(r.overall["ET"].accuracy, Some(0.7));
        assert_eq!(r.overall["NT"].accuracy, None);
        assert_eq!(r.by_qtype["counting"]["ALL"].correct, 7);
    }

    #[test]
    fn missing_and_unknown() {
        let ds = Dataset::new(vec![
            qa(0, "2", Subset::NT, SplitName::Test),
            qa(1, "2", Subset::NT, SplitName::Test),
            qa(2, "2", Subset::NT, SplitName::Train),
        ]);
        let r = accuracy(&[pred(0, "2")], &ds).unwrap();
        assert_eq!(r.missing, vec!["e1".to_owned()]);
        assert_eq!(r.overall["ALL"].accuracy, Some(0.5));
        assert!(matches!(accuracy(&[pred(9, "2")], &ds), Err(ForgeError::Integrity(_))));
        assert!(matches!(accuracy(&[pred(2, "2")], &ds), Err(ForgeError::Integrity(_))));
    }

    #[test]
    fn empty_test_is_undefined() {
        let ds = Dataset::new(vec![qa(0, "2", Subset::NT, SplitName::Train)]);
        let r = accuracy(&[], &ds).unwrap();
        assert!(!r.is_defined());
        assert!(random_guess_expectation(&ds).is_err());
    }

    #[test]
    fn baselines() {
        let mut ex = vec![
            qa(0, "Goomba", Subset::NT, SplitName::Train),
            qa(1, "Spiny", Subset::NT, SplitName::Train),
            qa(2, "Goomba", Subset::NT, SplitName::Test),
            qa(3, "Coin", Subset::NT, SplitName::Test),
        ];
        let ds = Dataset::new(ex.clone());
        // tie between Goomba and Spiny goes to Goomba
        assert_eq!(modal_train_answers(&ds).unwrap()[&Subset::NT], "Goomba");
        let r = accuracy(&most_frequent_baseline(&ds).unwrap(), &ds).unwrap();
        assert_eq!(r.overall["NT"].accuracy, Some(0.5));
        assert_eq!(random_guess_expectation(&ds).unwrap()[&Subset::NT], 0.5);

        ex.retain(|e| e.split == Some(SplitName::Test));
        assert!(most_frequent_baseline(&Dataset::new(ex)).is_err());
    }
}
