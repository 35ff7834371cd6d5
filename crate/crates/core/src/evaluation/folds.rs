//! Subject-level fold planning with group coverage in every test fold.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{Group, GroupAssignment};
use crate::seed::rng_for;

pub const DEFAULT_MAX_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: BTreeMap<String, usize>,
    pub iteration_seed: u64,
}

impl FoldPlan {
    pub fn test_subjects(&self, fold: usize) -> Vec<String> {
        self.assignments.iter().filter(|(_, &f)| f == fold).map(|(s, _)| s.clone()).collect()
    }

    pub fn train_subjects(&self, fold: usize) -> Vec<String> {
        self.assignments.iter().filter(|(_, &f)| f != fold).map(|(s, _)| s.clone()).collect()
    }

    /// Every test fold holds at least one subject of each group of each attribute.
    pub fn covers(&self, groups: &[GroupAssignment]) -> bool {
        groups.iter().all(|ga| {
            let mut seen = vec![[false; 2]; self.k];
            for (s, &f) in &self.assignments {
                if let Some(g) = ga.membership.get(s) {
                    seen[f][g.index()] = true;
                }
            }
            seen.iter().all(|s| s[0] && s[1])
        })
    }
}

/// Shuffle subjects inside each joint-group cell, then deal cells round-robin
/// into `k` folds; retry with derived seeds until every fold is covered.
pub fn plan_folds(subjects: &[String], groups: &[GroupAssignment], k: usize, seed: u64, max_retries: usize) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config("at least two folds are required".into()));
    }
    let mut cells: BTreeMap<Vec<Group>, Vec<String>> = BTreeMap::new();
    for s in subjects {
        let key = groups.iter().map(|g| g.group_of(s)).collect::<Result<Vec<_>>>()?;
        cells.entry(key).or_default().push(s.clone());
    }
    for v in cells.values_mut() {
        v.sort();
        v.dedup();
    }
    let n_subjects: usize = cells.values().map(Vec::len).sum();
    // each group needs at least k subjects to appear in k disjoint folds
    let infeasible = n_subjects < k
        || (0..groups.len()).any(|a| {
            [Group::G0, Group::G1].iter().any(|&g| {
                cells.iter().filter(|(key, _)| key[a] == g).map(|(_, v)| v.len()).sum::<usize>() < k
            })
        });
    if infeasible {
        return Err(Error::InfeasibleCoverage { k });
    }
    let cells: Vec<Vec<String>> = cells.into_values().collect();
    for attempt in 0..=max_retries {
        let mut rng = rng_for(seed, &[attempt as u64]);
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.shuffle(&mut rng);
        let mut assignments = BTreeMap::new();
        let mut counter = 0usize;
        for &c in &order {
            let mut members = cells[c].clone();
            members.shuffle(&mut rng);
            for s in members {
                assignments.insert(s, counter % k);
                counter += 1;
            }
        }
        let plan = FoldPlan {
            k,
            assignments,
            iteration_seed: seed,
        };
        if plan.covers(groups) {
            return Ok(plan);
        }
    }
    Err(Error::InfeasibleCoverage { k })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::fairness::ProtectedAttribute;

    fn assignment(attr: ProtectedAttribute, groups: &[(String, Group)]) -> GroupAssignment {
        GroupAssignment::new(attr, groups.iter().cloned().collect(), None)
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{i:02}")).collect()
    }

    #[test]
    fn seven_male_three_female_three_folds() {
        let s = ids(10);
        let sex: Vec<(String, Group)> = s.iter().enumerate().map(|(i, id)| (id.clone(), if i < 3 { Group::G0 } else { Group::G1 })).collect();
        let age: Vec<(String, Group)> = s.iter().enumerate().map(|(i, id)| (id.clone(), if i % 2 == 0 { Group::G0 } else { Group::G1 })).collect();
        let groups = vec![assignment(ProtectedAttribute::Sex, &sex), assignment(ProtectedAttribute::Age, &age)];
        for seed in 0..20 {
            let plan = plan_folds(&s, &groups, 3, seed, DEFAULT_MAX_RETRIES).unwrap();
            assert!(plan.covers(&groups));
            for f in 0..3 {
                assert!(plan.test_subjects(f).iter().any(|x| sex.iter().any(|(id, g)| id == x && *g == Group::G0)));
            }
            assert_eq!(plan, plan_folds(&s, &groups, 3, seed, DEFAULT_MAX_RETRIES).unwrap());
        }
    }

    #[test]
    fn too_few_subjects() {
        let s = ids(2);
        let g = assignment(ProtectedAttribute::Sex, &[(s[0].clone(), Group::G0), (s[1].clone(), Group::G1)]);
        assert!(matches!(plan_folds(&s, &[g], 5, 0, 10), Err(Error::InfeasibleCoverage { k: 5 })));
    }

    proptest! {
        #[test]
        fn folds_partition_subjects(n in 6usize..30, k in 2usize..4, seed in 0u64..1000, bits in prop::collection::vec(any::<bool>(), 30)) {
            let s = ids(n);
            let g: Vec<(String, Group)> = s.iter().enumerate().map(|(i, id)| (id.clone(), if bits[i] { Group::G1 } else { Group::G0 })).collect();
            let ga = assignment(ProtectedAttribute::Sex, &g);
            match plan_folds(&s, std::slice::from_ref(&ga), k, seed, DEFAULT_MAX_RETRIES) {
                Ok(plan) => {
                    prop_assert_eq!(plan.assignments.len(), n);
                    for f in 0..k {
                        let test = plan.test_subjects(f);
                        let train = plan.train_subjects(f);
                        prop_assert!(test.iter().all(|t| !train.contains(t)));
                        prop_assert_eq!(test.len() + train.len(), n);
                    }
                    prop_assert!(plan.covers(std::slice::from_ref(&ga)));
                }
                Err(Error::InfeasibleCoverage { .. }) => {
                    let (n0, n1) = ga.sizes();
                    prop_assert!(n0 < k || n1 < k);
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
