use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::ingest::InteractionRecord;

/// Name of the optional duration field. Record features with this name are
/// never admitted unless the space was built with duration enabled.
pub const DURATION_FIELD: &str = "duration";

/// One-hot categorical encoding: each field owns a contiguous block of indices
/// whose first slot is the field's out-of-vocabulary index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SpaceRepr", into = "SpaceRepr")]
pub struct FeatureSpace {
    fields: Vec<String>,
    vocab: Vec<Vec<String>>,
    include_duration: bool,
    offsets: Vec<usize>,
    lookup: Vec<HashMap<String, usize>>,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    fields: Vec<String>,
    vocab: Vec<Vec<String>>,
    include_duration: bool,
}

impl From<SpaceRepr> for FeatureSpace {
    fn from(r: SpaceRepr) -> Self {
        FeatureSpace::from_parts(r.fields, r.vocab, r.include_duration)
    }
}

impl From<FeatureSpace> for SpaceRepr {
    fn from(s: FeatureSpace) -> Self {
        SpaceRepr {
            fields: s.fields,
            vocab: s.vocab,
            include_duration: s.include_duration,
        }
    }
}

fn duration_value(d: f64) -> String {
    format!("{}", d.floor() as i64)
}

impl FeatureSpace {
    fn from_parts(fields: Vec<String>, vocab: Vec<Vec<String>>, include_duration: bool) -> Self {
        let mut offsets = Vec::with_capacity(fields.len());
        let mut next = 0;
        for v in &vocab {
            offsets.push(next);
            next += v.len() + 1;
        }
        let lookup = vocab
            .iter()
            .map(|v| v.iter().enumerate().map(|(i, s)| (s.clone(), i + 1)).collect())
            .collect();
        Self {
            fields,
            vocab,
            include_duration,
            offsets,
            lookup,
        }
    }

    /// Builds the vocabulary from training records, in first-seen order.
    pub fn fit(records: &[InteractionRecord], include_duration: bool) -> Self {
        let mut fields = vec!["user".to_string(), "video".to_string()];
        if records.iter().any(|r| !r.producer_id.is_empty()) {
            fields.push("producer".into());
        }
        let mut seen = HashSet::new();
        for r in records {
            for (name, _) in &r.features {
                if name != DURATION_FIELD
                    && !fields.contains(name)
                    && seen.insert(name.clone())
                {
                    fields.push(name.clone());
                }
            }
        }
        if include_duration {
            fields.push(DURATION_FIELD.into());
        }
        let mut space = Self::from_parts(fields.clone(), vec![Vec::new(); fields.len()], include_duration);
        let mut vocab: Vec<Vec<String>> = vec![Vec::new(); fields.len()];
        let mut known: Vec<HashSet<String>> = vec![HashSet::new(); fields.len()];
        for r in records {
            for (f, value) in space.raw_values(r).into_iter().enumerate() {
                if let Some(v) = value {
                    if known[f].insert(v.clone()) {
                        vocab[f].push(v);
                    }
                }
            }
        }
        space = Self::from_parts(fields, vocab, include_duration);
        space
    }

    fn raw_values(&self, r: &InteractionRecord) -> Vec<Option<String>> {
        self.fields
            .iter()
            .map(|f| match f.as_str() {
                "user" => Some(r.user_id.clone()),
                "video" => Some(r.video_id.clone()),
                "producer" => Some(r.producer_id.clone()).filter(|p| !p.is_empty()),
                DURATION_FIELD if self.include_duration => Some(duration_value(r.duration)),
                name => r
                    .features
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, v)| v.clone()),
            })
            .collect()
    }

    /// One active index per field.
    pub fn encode(&self, r: &InteractionRecord) -> Vec<usize> {
        self.raw_values(r)
            .into_iter()
            .enumerate()
            .map(|(f, value)| {
                let slot = value
                    .and_then(|v| self.lookup[f].get(&v).copied())
                    .unwrap_or(0);
                self.offsets[f] + slot
            })
            .collect()
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn num_features(&self) -> usize {
        self.vocab.iter().map(|v| v.len() + 1).sum()
    }

    pub fn include_duration(&self) -> bool {
        self.include_duration
    }
}
