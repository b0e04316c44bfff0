use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{HarnessError, ManifestEntry, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    /// Ten random 80/20 partitions of the content groups.
    RandomByContent82x10,
    /// One fold per content group, which forms the test set.
    LeaveOneContentOut,
}

impl std::str::FromStr for SplitKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random82" | "random_by_content82x10" => Ok(SplitKind::RandomByContent82x10),
            "loco" | "leave_one_content_out" => Ok(SplitKind::LeaveOneContentOut),
            other => Err(format!("unknown split kind {other:?}, expected random82 or loco")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub test_groups: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

const RANDOM_FOLDS: usize = 10;

/// Builds folds over content groups, so that all entries of a group land
/// on the same side. Entry order within each side follows the manifest.
pub fn make_splits(manifest: &[ManifestEntry], kind: SplitKind, seed: u64) -> Result<SplitPlan> {
    let mut groups: Vec<&str> = Vec::new();
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    for e in manifest {
        group_of.entry(&e.content_group).or_insert_with(|| {
            groups.push(&e.content_group);
            groups.len() - 1
        });
    }
    let g = groups.len();
    if g < 2 {
        return Err(HarnessError::TooFewGroups(g));
    }
    let fold_from = |is_test: &[bool]| {
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for e in manifest {
            if is_test[group_of[e.content_group.as_str()]] {
                test.push(e.id.clone());
            } else {
                train.push(e.id.clone());
            }
        }
        let test_groups = (0..g).filter(|&i| is_test[i]).map(|i| groups[i].to_string()).collect();
        Fold { train, test, test_groups }
    };
    let folds = match kind {
        SplitKind::LeaveOneContentOut => (0..g)
            .map(|held| fold_from(&(0..g).map(|i| i == held).collect::<Vec<_>>()))
            .collect(),
        SplitKind::RandomByContent82x10 => {
            let n_train = ((0.8 * g as f64).round() as usize).clamp(1, g - 1);
            let mut rng = Rng::new(seed);
            (0..RANDOM_FOLDS)
                .map(|_| {
                    let mut order: Vec<usize> = (0..g).collect();
                    rng.shuffle(&mut order);
                    let mut is_test = vec![false; g];
                    for &i in &order[n_train..] {
                        is_test[i] = true;
                    }
                    fold_from(&is_test)
                })
                .collect()
        }
    };
    Ok(SplitPlan { kind, seed, folds })
}
