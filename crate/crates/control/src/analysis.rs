//! Listener-rating normalization and the regressions used to check that
//! rated affect follows the generator's settings.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stimuli::Manifest;

pub const RATING_MIN: u8 = 1;
pub const RATING_MAX: u8 = 9;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("rating {0} outside {RATING_MIN}..={RATING_MAX}")]
    RatingOutOfRange(u8),
    #[error("regression needs equal-length inputs (got {0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("regression needs at least {needed} observations (got {got})")]
    TooFew { needed: usize, got: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("predictor has no variance")]
    Degenerate,
    #[error("predictors are collinear")]
    RankDeficient,
    #[error("ratings file: {0}")]
    Csv(String),
    #[error("stimulus '{0}' is not in the manifest")]
    UnknownStimulus(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub participant_id: String,
    pub stimulus_id: String,
    pub rated_valence: u8,
    pub rated_arousal: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// `(r - min) / (max - min)`, onto `[0, 1]`.
    #[default]
    Range,
    /// `r / (max - min)`, the form without the offset; 9 maps to 1.125.
    Literal,
}

pub fn normalize_value(r: u8, mode: NormalizeMode) -> Result<f64, AnalysisError> {
    if !(RATING_MIN..=RATING_MAX).contains(&r) {
        return Err(AnalysisError::RatingOutOfRange(r));
    }
    let span = (RATING_MAX - RATING_MIN) as f64;
    Ok(match mode {
        NormalizeMode::Range => (r - RATING_MIN) as f64 / span,
        NormalizeMode::Literal => r as f64 / span,
    })
}

/// Normalized (valence, arousal) of one record.
pub fn normalize_rating(r: &RatingRecord, mode: NormalizeMode) -> Result<(f64, f64), AnalysisError> {
    Ok((normalize_value(r.rated_valence, mode)?, normalize_value(r.rated_arousal, mode)?))
}

/// Reads `participant_id,stimulus_id,rated_valence,rated_arousal` records.
pub fn read_ratings<R: Read>(reader: R) -> Result<Vec<RatingRecord>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let rec: RatingRecord = row.map_err(|e| AnalysisError::Csv(e.to_string()))?;
        normalize_rating(&rec, NormalizeMode::Range)?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub f_statistic: f64,
    pub df_regression: usize,
    pub df_residual: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn f_ratio(ss_reg: f64, df_reg: f64, ss_res: f64, df_res: f64) -> f64 {
    if ss_reg == 0.0 {
        0.0
    } else if ss_res == 0.0 {
        f64::INFINITY
    } else {
        (ss_reg / df_reg) / (ss_res / df_res)
    }
}

/// Ordinary least squares of `ratings` on `settings`.
pub fn fit_affect_regression(settings: &[f64], ratings: &[f64]) -> Result<RegressionResult, AnalysisError> {
    if settings.len() != ratings.len() {
        return Err(AnalysisError::LengthMismatch(settings.len(), ratings.len()));
    }
    let n = settings.len();
    if n < 3 {
        return Err(AnalysisError::TooFew { needed: 3, got: n });
    }
    if settings.iter().chain(ratings).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let (mx, my) = (mean(settings), mean(ratings));
    let sxx: f64 = settings.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Degenerate);
    }
    let sxy: f64 = settings.iter().zip(ratings).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ratings.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = settings
        .iter()
        .zip(ratings)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_reg = (ss_tot - ss_res).max(0.0);
    let r_squared = if ss_tot == 0.0 { 0.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(RegressionResult {
        slope,
        intercept,
        r_squared,
        f_statistic: f_ratio(ss_reg, 1.0, ss_res, (n - 2) as f64),
        df_regression: 1,
        df_residual: n - 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultipleRegressionResult {
    pub intercept: f64,
    pub valence_coefficient: f64,
    pub arousal_coefficient: f64,
    pub r_squared: f64,
    /// Overall F on (2, n - 3) degrees of freedom.
    pub f_statistic: f64,
    /// Partial F of each coefficient on (1, n - 3) degrees of freedom.
    pub valence_f: f64,
    pub arousal_f: f64,
    pub df_residual: usize,
}

/// OLS of `ratings` on valence and arousal settings with an intercept.
pub fn fit_multiple_regression(
    valence: &[f64],
    arousal: &[f64],
    ratings: &[f64],
) -> Result<MultipleRegressionResult, AnalysisError> {
    if valence.len() != ratings.len() {
        return Err(AnalysisError::LengthMismatch(valence.len(), ratings.len()));
    }
    if arousal.len() != ratings.len() {
        return Err(AnalysisError::LengthMismatch(arousal.len(), ratings.len()));
    }
    let n = ratings.len();
    if n < 4 {
        return Err(AnalysisError::TooFew { needed: 4, got: n });
    }
    if valence.iter().chain(arousal).chain(ratings).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFinite);
    }
    let (mv, ma, my) = (mean(valence), mean(arousal), mean(ratings));
    let mut svv = 0.0;
    let mut saa = 0.0;
    let mut sva = 0.0;
    let mut svy = 0.0;
    let mut say = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..n {
        let (dv, da, dy) = (valence[i] - mv, arousal[i] - ma, ratings[i] - my);
        svv += dv * dv;
        saa += da * da;
        sva += dv * da;
        svy += dv * dy;
        say += da * dy;
        ss_tot += dy * dy;
    }
    let det = svv * saa - sva * sva;
    if svv == 0.0 || saa == 0.0 || det <= 1e-12 * svv * saa {
        return Err(AnalysisError::RankDeficient);
    }
    let bv = (saa * svy - sva * say) / det;
    let ba = (svv * say - sva * svy) / det;
    let intercept = my - bv * mv - ba * ma;
    let ss_res: f64 = (0..n)
        .map(|i| (ratings[i] - intercept - bv * valence[i] - ba * arousal[i]).powi(2))
        .sum();
    let ss_reg = (ss_tot - ss_res).max(0.0);
    let df_res = (n - 3) as f64;
    let partial = |b: f64, inv_jj: f64| {
        if b == 0.0 {
            0.0
        } else if ss_res == 0.0 {
            f64::INFINITY
        } else {
            b * b / (ss_res / df_res * inv_jj)
        }
    };
    Ok(MultipleRegressionResult {
        intercept,
        valence_coefficient: bv,
        arousal_coefficient: ba,
        r_squared: if ss_tot == 0.0 { 0.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) },
        f_statistic: f_ratio(ss_reg, 2.0, ss_res, df_res),
        valence_f: partial(bv, saa / det),
        arousal_f: partial(ba, svv / det),
        df_residual: n - 3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMeans {
    pub settings: Vec<f64>,
    pub mean_ratings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub mode: NormalizeMode,
    pub ratings: usize,
    pub participants: usize,
    /// Mean rated valence per distinct valence setting, and its fit.
    pub valence_levels: LevelMeans,
    pub valence: RegressionResult,
    pub arousal_levels: LevelMeans,
    pub arousal: RegressionResult,
    /// Mean ratings per (valence, arousal) point regressed on both settings.
    pub valence_on_both: MultipleRegressionResult,
    pub arousal_on_both: MultipleRegressionResult,
}

/// Float keys for grouping settings; settings come from a manifest so exact
/// equality is the right notion.
fn key(x: f64) -> u64 {
    x.to_bits()
}

fn level_means(pairs: &[(f64, f64)]) -> LevelMeans {
    let mut groups: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for &(setting, rating) in pairs {
        let g = groups.entry(key(setting)).or_insert((setting, 0.0, 0));
        g.1 += rating;
        g.2 += 1;
    }
    let mut rows: Vec<(f64, f64)> = groups.values().map(|(s, sum, n)| (*s, sum / *n as f64)).collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    LevelMeans {
        settings: rows.iter().map(|r| r.0).collect(),
        mean_ratings: rows.iter().map(|r| r.1).collect(),
    }
}

#[derive(Default)]
struct PointSums {
    valence: f64,
    arousal: f64,
    rated_valence: f64,
    rated_arousal: f64,
    n: usize,
}

/// Joins ratings to stimulus settings through the manifest and runs every fit.
pub fn analyze(records: &[RatingRecord], manifest: &Manifest, mode: NormalizeMode) -> Result<AnalysisReport, AnalysisError> {
    let points: BTreeMap<&str, (f64, f64)> = manifest
        .stimuli
        .iter()
        .map(|s| (s.stimulus_id.as_str(), (s.valence, s.arousal)))
        .collect();
    let mut val_pairs = Vec::new();
    let mut aro_pairs = Vec::new();
    let mut by_point: BTreeMap<(u64, u64), PointSums> = BTreeMap::new();
    let mut participants = std::collections::BTreeSet::new();
    for r in records {
        let &(v, a) = points
            .get(r.stimulus_id.as_str())
            .ok_or_else(|| AnalysisError::UnknownStimulus(r.stimulus_id.clone()))?;
        let (rv, ra) = normalize_rating(r, mode)?;
        participants.insert(r.participant_id.as_str());
        val_pairs.push((v, rv));
        aro_pairs.push((a, ra));
        let e = by_point.entry((key(v), key(a))).or_insert_with(|| PointSums {
            valence: v,
            arousal: a,
            ..PointSums::default()
        });
        e.rated_valence += rv;
        e.rated_arousal += ra;
        e.n += 1;
    }
    let valence_levels = level_means(&val_pairs);
    let arousal_levels = level_means(&aro_pairs);
    let valence = fit_affect_regression(&valence_levels.settings, &valence_levels.mean_ratings)?;
    let arousal = fit_affect_regression(&arousal_levels.settings, &arousal_levels.mean_ratings)?;

    let pts: Vec<_> = by_point.values().collect();
    let vs: Vec<f64> = pts.iter().map(|p| p.valence).collect();
    let as_: Vec<f64> = pts.iter().map(|p| p.arousal).collect();
    let mean_v: Vec<f64> = pts.iter().map(|p| p.rated_valence / p.n as f64).collect();
    let mean_a: Vec<f64> = pts.iter().map(|p| p.rated_arousal / p.n as f64).collect();
    Ok(AnalysisReport {
        mode,
        ratings: records.len(),
        participants: participants.len(),
        valence_levels,
        valence,
        arousal_levels,
        arousal,
        valence_on_both: fit_multiple_regression(&vs, &as_, &mean_v)?,
        arousal_on_both: fit_multiple_regression(&vs, &as_, &mean_a)?,
    })
}
