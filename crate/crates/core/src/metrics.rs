//! Correlation and error criteria between predicted and subjective scores,
//! and the pairwise significance test over per-split SRCC samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("inputs have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("input is constant")]
    ConstantInput,
    #[error("every pair is tied in at least one input")]
    AllTied,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("each sample list needs at least 2 values, got {0}")]
    TooFewSamples(usize),
}

pub type Result<T> = std::result::Result<T, MetricError>;

pub const DEFAULT_ALPHA: f64 = 0.05;

fn check_pair(x: &[f64], y: &[f64], min_len: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min_len {
        return Err(MetricError::TooShort { needed: min_len, got: x.len() });
    }
    if !x.iter().chain(y).all(|v| v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && v[order[j]] == v[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson linear correlation.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    pearson_unchecked(x, y)
}

/// Spearman rank correlation: Pearson on average ranks.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    pearson_unchecked(&average_ranks(x), &average_ranks(y))
}

/// Kendall tau-b: `(C − D) / sqrt((n0 − n1)(n0 − n2))` where `n1`, `n2` count
/// pairs tied in `x` and `y` respectively.
pub fn krcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap();
            let dy = y[i].partial_cmp(&y[j]).unwrap();
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {
                    tie_x += 1;
                    tie_y += 1;
                }
                (Equal, _) => tie_x += 1,
                (_, Equal) => tie_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = ((n0 - tie_x) as f64) * ((n0 - tie_y) as f64);
    if denom == 0.0 {
        return Err(MetricError::AllTied);
    }
    Ok(((concordant - discordant) as f64 / denom.sqrt()).clamp(-1.0, 1.0))
}

pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 1)?;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / x.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub srcc: f64,
    pub plcc: f64,
    pub krcc: f64,
    pub rmse: f64,
}

impl Criteria {
    pub fn compute(predicted: &[f64], labels: &[f64]) -> Result<Self> {
        Ok(Self {
            srcc: srcc(predicted, labels)?,
            plcc: plcc(predicted, labels)?,
            krcc: krcc(predicted, labels)?,
            rmse: rmse(predicted, labels)?,
        })
    }

    /// Like [`Criteria::compute`], but a constant input scores 0 on the
    /// three correlations instead of failing.
    pub fn compute_lenient(predicted: &[f64], labels: &[f64]) -> Result<Self> {
        let or_zero = |r: Result<f64>| match r {
            Err(MetricError::ConstantInput | MetricError::AllTied) => Ok(0.0),
            other => other,
        };
        Ok(Self {
            srcc: or_zero(srcc(predicted, labels))?,
            plcc: or_zero(plcc(predicted, labels))?,
            krcc: or_zero(krcc(predicted, labels))?,
            rmse: rmse(predicted, labels)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    RowBetter,
    RowWorse,
    Indistinguishable,
}

impl Verdict {
    pub fn mirror(self) -> Self {
        match self {
            Verdict::RowBetter => Verdict::RowWorse,
            Verdict::RowWorse => Verdict::RowBetter,
            Verdict::Indistinguishable => Verdict::Indistinguishable,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Verdict::RowBetter => '+',
            Verdict::RowWorse => '-',
            Verdict::Indistinguishable => '=',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceVerdict {
    pub verdict: Verdict,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Two-sided Welch t-test of `a` against `b`. With both sample variances
/// zero, equal means give `t = 0, p = 1` and different means give an
/// infinite `t` with `p = 0`.
pub fn ttest_srcc(a: &[f64], b: &[f64], alpha: f64) -> Result<SignificanceVerdict> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(MetricError::TooFewSamples(s.len()));
        }
        if !s.iter().all(|v| v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
    }
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (sample_var(a) / a.len() as f64, sample_var(b) / b.len() as f64);
    let se2 = qa + qb;
    let (t, df, p) = if se2 == 0.0 {
        let df = (a.len() + b.len() - 2) as f64;
        if ma == mb {
            (0.0, df, 1.0)
        } else {
            ((ma - mb).signum() * f64::INFINITY, df, 0.0)
        }
    } else {
        let t = (ma - mb) / se2.sqrt();
        let df = se2 * se2 / (qa * qa / (a.len() - 1) as f64 + qb * qb / (b.len() - 1) as f64);
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (t, df, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    let verdict = if p < alpha && ma > mb {
        Verdict::RowBetter
    } else if p < alpha && ma < mb {
        Verdict::RowWorse
    } else {
        Verdict::Indistinguishable
    };
    Ok(SignificanceVerdict { verdict, t, df, p_value: p })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub models: Vec<String>,
    /// `cells[r][c]` compares row model `r` against column model `c`.
    pub cells: Vec<Vec<SignificanceVerdict>>,
}

/// Pairwise Welch tests between every ordered pair of models.
pub fn significance_matrix(per_model_srcc: &[(String, Vec<f64>)], alpha: f64) -> Result<SignificanceMatrix> {
    let n = per_model_srcc.len();
    let mut cells = Vec::with_capacity(n);
    for (r, (_, a)) in per_model_srcc.iter().enumerate() {
        let mut row = Vec::with_capacity(n);
        for (c, (_, b)) in per_model_srcc.iter().enumerate() {
            if r == c {
                row.push(SignificanceVerdict { verdict: Verdict::Indistinguishable, t: 0.0, df: f64::NAN, p_value: 1.0 });
            } else {
                row.push(ttest_srcc(a, b, alpha)?);
            }
        }
        cells.push(row);
    }
    Ok(SignificanceMatrix { models: per_model_srcc.iter().map(|(m, _)| m.clone()).collect(), cells })
}

impl SignificanceMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for m in &self.models {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for (m, row) in self.models.iter().zip(&self.cells) {
            out.push_str(m);
            for cell in row {
                out.push_str(&format!(",{:?}", cell.verdict));
            }
            out.push('\n');
        }
        out
    }

    /// Grid of `+` (row better), `-` (row worse) and `=` symbols.
    pub fn to_text(&self) -> String {
        let width = self.models.iter().map(|m| m.len()).max().unwrap_or(0);
        let mut out = format!("{:width$}", "");
        for c in 0..self.models.len() {
            out.push_str(&format!(" {c:>3}"));
        }
        out.push('\n');
        for (r, (m, row)) in self.models.iter().zip(&self.cells).enumerate() {
            out.push_str(&format!("{m:width$}"));
            for cell in row {
                out.push_str(&format!(" {:>3}", cell.verdict.symbol()));
            }
            out.push_str(&format!("   [{r}]\n"));
        }
        out
    }
}
