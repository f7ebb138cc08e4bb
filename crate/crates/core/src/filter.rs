//! Intersection filter: keeps the rows with at least one membership inside
//! the band `[0.5 − μ/2, 0.5 + μ/2]`.

use serde::{Deserialize, Serialize};

use crate::dataset::DataMatrix;
use crate::error::{Error, Result};
use crate::fcm::MembershipMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterRange {
    pub mu: f64,
    pub lo: f64,
    pub hi: f64,
}

impl FilterRange {
    /// Inclusive on both ends.
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn keeps(&self, memberships: &[f64]) -> bool {
        memberships.iter().any(|&u| self.contains(u))
    }
}

pub fn make_range(mu: f64) -> Result<FilterRange> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::config("mu", format!("must lie in [0, 1], got {mu}")));
    }
    Ok(FilterRange {
        mu,
        lo: 0.5 - mu / 2.0,
        hi: 0.5 + mu / 2.0,
    })
}

/// Rows kept by the filter, in their original order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilteredSelection {
    pub kept_indices: Vec<usize>,
    pub kept_memberships: MembershipMatrix,
    #[serde(skip)]
    pub kept_data: DataMatrix,
}

impl FilteredSelection {
    pub fn len(&self) -> usize {
        self.kept_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_indices.is_empty()
    }
}

pub fn apply_filter(
    memberships: &MembershipMatrix,
    data: &DataMatrix,
    range: &FilterRange,
) -> Result<FilteredSelection> {
    if memberships.rows() != data.rows() {
        return Err(Error::Input(format!(
            "{} membership rows but {} data rows",
            memberships.rows(),
            data.rows()
        )));
    }
    let kept_indices: Vec<usize> = (0..memberships.rows())
        .filter(|&i| range.keeps(memberships.row(i)))
        .collect();
    Ok(FilteredSelection {
        kept_memberships: memberships.select_rows(&kept_indices),
        kept_data: data.select_rows(&kept_indices),
        kept_indices,
    })
}
