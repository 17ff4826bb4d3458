//! Statistical and temporal features of scalar series, and random-forest
//! feature selection.

mod catalog;
mod forest;
mod select;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::anchor::SimilaritySeries;
use crate::corpus::Label;
use crate::error::{Error, Result};

pub use catalog::{catalog, compute_catalog, FeatureDef, CATALOG_SIZE};
pub use forest::{ForestConfig, RandomForest};
pub use select::{
    load_features, load_selection, rank_by_gini, read_features, save_features, save_selection,
    select_top_k, write_features, RankedFeature, SelectionConfig, SelectionReport, DEFAULT_TOP_K,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub user_id: String,
    pub label: Label,
    #[serde(rename = "features")]
    pub values: BTreeMap<String, f64>,
}

impl FeatureVector {
    pub fn get(&self, id: &str) -> Option<f64> {
        self.values.get(id).copied()
    }

    /// Values for `ids` in that order.
    pub fn project(&self, ids: &[String]) -> Result<Vec<f64>> {
        ids.iter()
            .map(|id| {
                self.get(id)
                    .ok_or_else(|| Error::Shape(format!("user `{}` lacks feature `{id}`", self.user_id)))
            })
            .collect()
    }
}

/// One value per catalog entry for a scalar series.
pub fn extract_features(series: &SimilaritySeries) -> Result<FeatureVector> {
    if series.channels != 1 {
        return Err(Error::Shape(format!(
            "feature extraction needs a scalar series, user `{}` has {} channels",
            series.user_id, series.channels
        )));
    }
    if series.values.is_empty() {
        return Err(Error::EmptyUser(series.user_id.clone()));
    }
    let values = catalog()
        .iter()
        .zip(compute_catalog(&series.values))
        .map(|(def, v)| (def.id.to_string(), v))
        .collect();
    Ok(FeatureVector {
        user_id: series.user_id.clone(),
        label: series.label,
        values,
    })
}
