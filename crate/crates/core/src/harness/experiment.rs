//! Cross-validated experiments, reports and significance comparison.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    build_cache, make_splits, predict_entry, train_fold, ExperimentConfig, HarnessError, ManifestEntry, Result,
    SplitKind, SplitPlan,
};
use crate::metrics::{significance_matrix, Criteria, SignificanceMatrix};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// The 3D residual network trained per fold.
    Network,
    /// Predicts each test entry's own MOS.
    Oracle,
    /// Predicts the fold's mean training MOS for every test entry.
    Constant,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Network => "network",
            ModelKind::Oracle => "oracle",
            ModelKind::Constant => "constant",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "network" => Ok(ModelKind::Network),
            "oracle" => Ok(ModelKind::Oracle),
            "constant" => Ok(ModelKind::Constant),
            other => Err(format!("unknown model {other:?}, expected network, oracle or constant")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub fold: usize,
    pub id: String,
    pub predicted: f64,
    pub mos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_count: usize,
    pub test_groups: Vec<String>,
    pub criteria: Criteria,
    /// Per-epoch mean training loss; empty for models without training.
    pub loss_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub plan: SplitPlan,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldReport>,
    /// Arithmetic mean of the per-fold criteria.
    pub mean: Criteria,
    pub predictions: Vec<SamplePrediction>,
    pub wall_clock_seconds: f64,
}

impl EvalReport {
    pub fn fold_srcc(&self) -> Vec<f64> {
        self.folds.iter().map(|f| f.criteria.srcc).collect()
    }

    /// Equality ignoring the wall-clock field.
    pub fn same_results(&self, other: &EvalReport) -> bool {
        EvalReport { wall_clock_seconds: 0.0, ..self.clone() } == EvalReport { wall_clock_seconds: 0.0, ..other.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-fold and mean criteria as CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,test_groups,srcc,plcc,krcc,rmse\n");
        let row = |label: &str, groups: &str, c: &Criteria| {
            format!("{label},{groups},{:?},{:?},{:?},{:?}\n", c.srcc, c.plcc, c.krcc, c.rmse)
        };
        for f in &self.folds {
            out.push_str(&row(&f.fold.to_string(), &f.test_groups.join(" "), &f.criteria));
        }
        out.push_str(&row("mean", "", &self.mean));
        out
    }

    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("fold,id,predicted,mos\n");
        for p in &self.predictions {
            out.push_str(&format!("{},{},{:?},{:?}\n", p.fold, p.id, p.predicted, p.mos));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("model {}  split {:?}  seed {}\n", self.model, self.plan.kind, self.seed);
        out.push_str("fold     SRCC     PLCC     KRCC       RMSE\n");
        let line = |label: String, c: &Criteria| {
            format!("{label:<6} {:>7.4}  {:>7.4}  {:>7.4}  {:>9.4}\n", c.srcc, c.plcc, c.krcc, c.rmse)
        };
        for f in &self.folds {
            out.push_str(&line(f.fold.to_string(), &f.criteria));
        }
        out.push_str(&line("mean".into(), &self.mean));
        out
    }
}

fn mean_criteria(folds: &[FoldReport]) -> Criteria {
    let n = folds.len() as f64;
    let avg = |f: fn(&Criteria) -> f64| folds.iter().map(|r| f(&r.criteria)).sum::<f64>() / n;
    Criteria { srcc: avg(|c| c.srcc), plcc: avg(|c| c.plcc), krcc: avg(|c| c.krcc), rmse: avg(|c| c.rmse) }
}

/// Splits the manifest, then for each fold trains (network model only),
/// predicts the test entries and scores them. Correlations of a constant
/// prediction vector are scored as 0.
pub fn run_experiment(
    manifest: &[ManifestEntry],
    kind: SplitKind,
    config: &ExperimentConfig,
    seed: u64,
    model: ModelKind,
) -> Result<EvalReport> {
    if config.deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        return pool.install(|| run_inner(manifest, kind, config, seed, model));
    }
    run_inner(manifest, kind, config, seed, model)
}

fn run_inner(
    manifest: &[ManifestEntry],
    kind: SplitKind,
    config: &ExperimentConfig,
    seed: u64,
    model: ModelKind,
) -> Result<EvalReport> {
    let started = Instant::now();
    config.validate()?;
    let plan = make_splits(manifest, kind, seed)?;
    let by_id: HashMap<&str, &ManifestEntry> = manifest.iter().map(|e| (e.id.as_str(), e)).collect();
    let lookup = |ids: &[String]| {
        ids.iter()
            .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| HarnessError::UnknownId(id.clone())))
            .collect::<Result<Vec<_>>>()
    };
    let cache = match model {
        ModelKind::Network => Some(build_cache(manifest, &config.capture, config.resolved_cache_dir())?.0),
        _ => None,
    };
    // Training seeds are a stream separate from the split shuffle.
    let mut seeds = Rng::new(seed ^ 0x7f4a_7c15_9e37_79b9);
    let mut folds = Vec::with_capacity(plan.folds.len());
    let mut predictions = Vec::new();
    for (k, fold) in plan.folds.iter().enumerate() {
        let train = lookup(&fold.train)?;
        let test = lookup(&fold.test)?;
        let fold_seed = seeds.fork_seed();
        let (predicted, loss_curve) = match model {
            ModelKind::Oracle => (test.iter().map(|e| e.mos).collect::<Vec<_>>(), Vec::new()),
            ModelKind::Constant => {
                let m = train.iter().map(|e| e.mos).sum::<f64>() / train.len() as f64;
                (vec![m; test.len()], Vec::new())
            }
            ModelKind::Network => {
                let cache = cache.as_ref().expect("cache built for network model");
                let outcome = train_fold(&train, cache, config, fold_seed)?;
                let p = test
                    .iter()
                    .map(|e| predict_entry(&outcome.model, e, cache, config))
                    .collect::<Result<Vec<_>>>()?;
                (p, outcome.loss_curve)
            }
        };
        let labels: Vec<f64> = test.iter().map(|e| e.mos).collect();
        let criteria = Criteria::compute_lenient(&predicted, &labels)?;
        for (e, &p) in test.iter().zip(&predicted) {
            predictions.push(SamplePrediction { fold: k, id: e.id.clone(), predicted: p, mos: e.mos });
        }
        folds.push(FoldReport {
            fold: k,
            train_count: train.len(),
            test_groups: fold.test_groups.clone(),
            criteria,
            loss_curve,
        });
    }
    Ok(EvalReport {
        model: model.name().into(),
        mean: mean_criteria(&folds),
        plan,
        seed,
        config: config.clone(),
        folds,
        predictions,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Welch t-tests between every pair of reports on their per-fold SRCC.
/// All reports must share one split plan. Duplicate model names are
/// disambiguated with their position.
pub fn compare_models(reports: &[EvalReport], alpha: f64) -> Result<SignificanceMatrix> {
    if let Some(first) = reports.first() {
        if reports.iter().any(|r| r.plan != first.plan) {
            return Err(HarnessError::SplitMismatch);
        }
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for r in reports {
        *seen.entry(&r.model).or_default() += 1;
    }
    let named: Vec<(String, Vec<f64>)> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let name = if seen[r.model.as_str()] > 1 { format!("{}#{i}", r.model) } else { r.model.clone() };
            (name, r.fold_srcc())
        })
        .collect();
    Ok(significance_matrix(&named, alpha)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Verdict, DEFAULT_ALPHA};

    fn manifest() -> Vec<ManifestEntry> {
        (0..12)
            .map(|i| ManifestEntry {
                id: format!("e{i}"),
                cloud_path: "unused.ply".into(),
                mos: ((i * 7) % 12) as f64 + 0.5 * (i % 3) as f64,
                content_group: format!("g{}", i % 4),
                distortion: String::new(),
            })
            .collect()
    }

    #[test]
    fn oracle_is_perfect_on_every_fold() {
        let r = run_experiment(&manifest(), SplitKind::LeaveOneContentOut, &ExperimentConfig::desk(), 3, ModelKind::Oracle)
            .unwrap();
        assert_eq!(r.folds.len(), 4);
        for f in &r.folds {
            let c = f.criteria;
            assert!((c.srcc - 1.0).abs() < 1e-12 && (c.plcc - 1.0).abs() < 1e-12 && (c.krcc - 1.0).abs() < 1e-12);
            assert_eq!(c.rmse, 0.0);
        }
        assert_eq!(r.predictions.len(), 12);
    }

    #[test]
    fn averaging_identity() {
        let r = run_experiment(&manifest(), SplitKind::RandomByContent82x10, &ExperimentConfig::desk(), 9, ModelKind::Constant)
            .unwrap();
        let n = r.folds.len() as f64;
        let rmse = r.folds.iter().map(|f| f.criteria.rmse).sum::<f64>() / n;
        assert!((r.mean.rmse - rmse).abs() < 1e-12);
        assert_eq!(r.mean.srcc, 0.0);
    }

    #[test]
    fn comparison_and_mismatch() {
        let m = manifest();
        let cfg = ExperimentConfig::desk();
        let oracle = run_experiment(&m, SplitKind::LeaveOneContentOut, &cfg, 1, ModelKind::Oracle).unwrap();
        let constant = run_experiment(&m, SplitKind::LeaveOneContentOut, &cfg, 1, ModelKind::Constant).unwrap();
        let mat = compare_models(&[oracle.clone(), constant.clone()], DEFAULT_ALPHA).unwrap();
        assert_eq!(mat.cells[0][1].verdict, Verdict::RowBetter);
        assert_eq!(mat.cells[1][0].verdict, Verdict::RowWorse);
        let selfmat = compare_models(&[oracle.clone(), oracle.clone()], DEFAULT_ALPHA).unwrap();
        assert_eq!(selfmat.cells[0][1].verdict, Verdict::Indistinguishable);
        assert_eq!(selfmat.models, vec!["oracle#0", "oracle#1"]);
        let other = run_experiment(&m, SplitKind::RandomByContent82x10, &cfg, 1, ModelKind::Constant).unwrap();
        assert!(matches!(compare_models(&[oracle, other], DEFAULT_ALPHA), Err(HarnessError::SplitMismatch)));
    }

    #[test]
    fn report_serialization() {
        let r = run_experiment(&manifest(), SplitKind::LeaveOneContentOut, &ExperimentConfig::desk(), 2, ModelKind::Oracle)
            .unwrap();
        let back = EvalReport::from_json(&r.to_json()).unwrap();
        assert!(back.same_results(&r));
        assert_eq!(r.to_csv().lines().count(), 1 + 4 + 1);
        assert_eq!(r.predictions_csv().lines().count(), 13);
        assert!(r.to_text().contains("mean"));
    }
}
