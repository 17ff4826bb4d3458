use crate::anchor::SeriesSet;
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::nn::{Sample, Sequence};

/// Model-ready inputs with their user ids and 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub samples: Vec<Sample>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn from_series(set: &SeriesSet) -> Self {
        let mut d = Dataset::empty();
        for s in &set.series {
            d.ids.push(s.user_id.clone());
            d.samples.push(Sample::Sequence(Sequence::new(s.channels, s.values.clone())));
            d.labels.push(s.label.index());
        }
        d
    }

    /// Rows restricted to `ids`, in that order.
    pub fn from_features(rows: &[FeatureVector], ids: &[String]) -> Result<Self> {
        let mut d = Dataset::empty();
        for r in rows {
            d.ids.push(r.user_id.clone());
            d.samples.push(Sample::Features(r.project(ids)?));
            d.labels.push(r.label.index());
        }
        Ok(d)
    }

    fn empty() -> Self {
        Dataset {
            ids: Vec::new(),
            samples: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label.index()).count()
    }

    pub(crate) fn require_both_classes(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty(what.to_string()));
        }
        if self.count(Label::Condition) == 0 || self.count(Label::Control) == 0 {
            return Err(Error::SingleClass(what.to_string()));
        }
        Ok(())
    }
}
