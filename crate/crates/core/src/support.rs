//! Feature index sets.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UoiError};

/// Sorted, duplicate-free set of feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Support(Vec<usize>);

impl Support {
    pub fn empty() -> Self {
        Support(Vec::new())
    }

    /// Sorts and deduplicates `indices`, rejecting any index `>= p`.
    pub fn new(mut indices: Vec<usize>, p: usize) -> Result<Self> {
        if let Some(bad) = indices.iter().find(|&&i| i >= p) {
            return Err(UoiError::invalid(format!(
                "support index {bad} out of range for {p} features"
            )));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Support(indices))
    }

    pub fn from_nonzeros(values: &[f64]) -> Self {
        Support(
            values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect(),
        )
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset(&self, other: &Support) -> bool {
        self.0.iter().all(|i| other.contains(*i))
    }

    pub fn intersection(&self, other: &Support) -> Support {
        Support(self.0.iter().copied().filter(|i| other.contains(*i)).collect())
    }

    pub fn union(&self, other: &Support) -> Support {
        let mut out = self.0.clone();
        out.extend_from_slice(&other.0);
        out.sort_unstable();
        out.dedup();
        Support(out)
    }

    /// Elements in exactly one of the two sets.
    pub fn symmetric_difference_len(&self, other: &Support) -> usize {
        let shared = self.intersection(other).len();
        self.len() + other.len() - 2 * shared
    }
}

impl FromIterator<usize> for Support {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Support(v)
    }
}

/// One candidate support per regularization value, in grid order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SupportFamily {
    pub per_lambda: Vec<Support>,
}

impl SupportFamily {
    pub fn len(&self) -> usize {
        self.per_lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_lambda.is_empty()
    }

    pub fn all_empty(&self) -> bool {
        self.per_lambda.iter().all(Support::is_empty)
    }

    /// Distinct supports in first-appearance order, plus for every grid index
    /// the position of its support in that list.
    pub fn deduplicated(&self) -> (Vec<Support>, Vec<usize>) {
        let mut unique: Vec<Support> = Vec::new();
        let mut slot = Vec::with_capacity(self.per_lambda.len());
        for s in &self.per_lambda {
            match unique.iter().position(|u| u == s) {
                Some(i) => slot.push(i),
                None => {
                    slot.push(unique.len());
                    unique.push(s.clone());
                }
            }
        }
        (unique, slot)
    }
}

/// Intersection of every support in the list.
pub fn intersect_supports(supports: &[Support]) -> Result<Support> {
    let (first, rest) = supports
        .split_first()
        .ok_or_else(|| UoiError::invalid("cannot intersect an empty list of supports"))?;
    Ok(rest.iter().fold(first.clone(), |acc, s| acc.intersection(s)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[usize]) -> Support {
        v.iter().copied().collect()
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(intersect_supports(&[s(&[1, 2, 3]), s(&[2, 3, 4])]).unwrap(), s(&[2, 3]));
        let same = vec![s(&[0, 5, 7]); 4];
        assert_eq!(intersect_supports(&same).unwrap(), s(&[0, 5, 7]));
        assert!(intersect_supports(&[s(&[1, 2]), Support::empty(), s(&[2])])
            .unwrap()
            .is_empty());
        assert!(intersect_supports(&[]).is_err());
    }

    #[test]
    fn new_validates_range_and_sorts() {
        assert_eq!(Support::new(vec![3, 1, 3], 4).unwrap().indices(), &[1, 3]);
        assert!(Support::new(vec![4], 4).is_err());
    }

    #[test]
    fn family_deduplication_keeps_first_order() {
        let fam = SupportFamily {
            per_lambda: vec![s(&[]), s(&[1]), s(&[1]), s(&[1, 2]), s(&[])],
        };
        let (unique, slot) = fam.deduplicated();
        assert_eq!(unique, vec![s(&[]), s(&[1]), s(&[1, 2])]);
        assert_eq!(slot, vec![0, 1, 1, 2, 0]);
    }
}
