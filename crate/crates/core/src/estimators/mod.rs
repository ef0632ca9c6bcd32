//! Detection and localization: exhaustive joint search, successive space
//! removal (SSR) and successive interference cancellation (SIC).

mod joint;
mod sic;
mod ssr;
mod threshold;

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{FootprintMask, Position2D};
use crate::likelihood::{FieldPlan, LikelihoodError};

pub use joint::{joint_peak, joint_search, JointSearch, MAX_JOINT_TARGETS, MAX_JOINT_TUPLES};
pub use sic::{sic_modified_term, sic_run, sic_threshold};
pub use ssr::ssr_run;
pub use threshold::{calibrate_threshold, empirical_threshold, ThresholdConfig, MIN_CALIBRATION_TRIALS};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("false-alarm probability {0} must lie strictly between 0 and 1")]
    InvalidPfa(f64),
    #[error("calibration needs at least {min} trials, got {got}")]
    TooFewTrials { got: usize, min: usize },
    #[error("joint search limited to small G (at most {max}), got {got}")]
    JointTooLarge { got: usize, max: usize },
    #[error("joint search over {tuples} tuples exceeds the limit of {max}")]
    TooManyTuples { tuples: u128, max: u128 },
    #[error("g_max must be at least 1")]
    ZeroGMax,
    #[error("path weights must be nonnegative with a positive sum")]
    BadWeights,
    #[error("malformed report: {0}")]
    Parse(String),
    #[error("threshold file: {0}")]
    ThresholdFile(String),
    #[error(transparent)]
    Likelihood(#[from] LikelihoodError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Joint,
    Ssr,
    Sic,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Joint => "joint",
            Algorithm::Ssr => "ssr",
            Algorithm::Sic => "sic",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = EstimatorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "joint" => Ok(Algorithm::Joint),
            "ssr" => Ok(Algorithm::Ssr),
            "sic" => Ok(Algorithm::Sic),
            other => Err(EstimatorError::Parse(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub algorithm: Algorithm,
    pub g_max: usize,
    /// SIC stops at the first rejected candidate.
    pub early_stop: bool,
}

impl EstimatorConfig {
    pub fn new(algorithm: Algorithm, g_max: usize) -> Result<Self, EstimatorError> {
        if g_max == 0 {
            return Err(EstimatorError::ZeroGMax);
        }
        Ok(Self { algorithm, g_max, early_stop: true })
    }
}

/// Source of range-bin footprints for declared cells.
pub trait Footprints {
    fn footprint(&self, cell: usize) -> FootprintMask;
}

impl Footprints for FieldPlan {
    fn footprint(&self, cell: usize) -> FootprintMask {
        FieldPlan::footprint(self, cell)
    }
}

/// Precomputed footprints, one per cell.
impl Footprints for [FootprintMask] {
    fn footprint(&self, cell: usize) -> FootprintMask {
        self[cell].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// 1-based iteration at which the location was declared.
    pub iteration: usize,
    pub cell: usize,
    pub location: Position2D,
    pub objective: f64,
    pub threshold: f64,
    pub footprint: FootprintMask,
    /// Single-target coefficient estimate per path.
    pub alpha: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub algorithm: Algorithm,
    pub detections: Vec<Detection>,
    pub lambda_prime: f64,
    /// Sum of the declared objective values.
    pub accumulated_objective: f64,
}

impl DetectionReport {
    pub fn g_hat(&self) -> usize {
        self.detections.len()
    }

    pub fn locations(&self) -> Vec<Position2D> {
        self.detections.iter().map(|d| d.location).collect()
    }

    /// Structured text: a comment header then `iteration,x_m,y_m,objective,threshold` rows.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# algorithm={} g_hat={} lambda_prime={} accumulated={}",
            self.algorithm,
            self.g_hat(),
            self.lambda_prime,
            self.accumulated_objective
        );
        s.push_str("iteration,x_m,y_m,objective,threshold\n");
        for d in &self.detections {
            let _ = writeln!(s, "{},{},{},{},{}", d.iteration, d.location.x, d.location.y, d.objective, d.threshold);
        }
        s
    }
}

/// A report row read back from [`DetectionReport::to_text`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub iteration: usize,
    pub location: Position2D,
    pub objective: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub algorithm: Algorithm,
    pub lambda_prime: f64,
    pub accumulated_objective: f64,
    pub rows: Vec<ReportRow>,
}

pub fn parse_report(text: &str) -> Result<ParsedReport, EstimatorError> {
    let bad = |m: &str| EstimatorError::Parse(m.to_string());
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty report"))?;
    let fields = header.strip_prefix("# ").ok_or_else(|| bad("missing header"))?;
    let mut algorithm = None;
    let mut lambda_prime = None;
    let mut accumulated = None;
    let mut g_hat = None;
    for kv in fields.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad("header field without '='"))?;
        let num = || v.parse::<f64>().map_err(|_| bad(&format!("bad number in {k}")));
        match k {
            "algorithm" => algorithm = Some(v.parse()?),
            "lambda_prime" => lambda_prime = Some(num()?),
            "accumulated" => accumulated = Some(num()?),
            "g_hat" => g_hat = Some(v.parse::<usize>().map_err(|_| bad("bad g_hat"))?),
            _ => return Err(bad(&format!("unknown header field {k}"))),
        }
    }
    if lines.next() != Some("iteration,x_m,y_m,objective,threshold") {
        return Err(bad("missing column header"));
    }
    // later '#' lines are free-form annotations
    let rows = lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            if v.len() != 5 {
                return Err(bad(&format!("expected 5 fields in {l:?}")));
            }
            let f = |i: usize| v[i].parse::<f64>().map_err(|_| bad(&format!("bad number {:?}", v[i])));
            Ok(ReportRow {
                iteration: v[0].parse().map_err(|_| bad("bad iteration"))?,
                location: Position2D::new(f(1)?, f(2)?),
                objective: f(3)?,
                threshold: f(4)?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if g_hat != Some(rows.len()) {
        return Err(bad("g_hat does not match the number of rows"));
    }
    Ok(ParsedReport {
        algorithm: algorithm.ok_or_else(|| bad("missing algorithm"))?,
        lambda_prime: lambda_prime.ok_or_else(|| bad("missing lambda_prime"))?,
        accumulated_objective: accumulated.ok_or_else(|| bad("missing accumulated"))?,
        rows,
    })
}

fn detection_at(
    field: &crate::likelihood::ObjectiveField,
    iteration: usize,
    cell: usize,
    objective: f64,
    threshold: f64,
    footprint: FootprintMask,
) -> Detection {
    Detection {
        iteration,
        cell,
        location: field.grid().center(cell),
        objective,
        threshold,
        footprint,
        alpha: (0..field.path_count()).map(|p| field.alpha_hat(p, cell)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_text_round_trip() {
        let fp = FootprintMask { per_path: vec![], union: vec![] };
        let d = |i: usize, x: f64| Detection {
            iteration: i,
            cell: 0,
            location: Position2D::new(x, 13_500.0),
            objective: 123.456 + x,
            threshold: 40.25,
            footprint: fp.clone(),
            alpha: vec![],
        };
        let r = DetectionReport {
            algorithm: Algorithm::Sic,
            detections: vec![d(1, 15_000.0), d(3, 17_050.0)],
            lambda_prime: 40.25,
            accumulated_objective: 1e4 / 3.0,
        };
        let parsed = parse_report(&r.to_text()).unwrap();
        assert_eq!(parsed.algorithm, Algorithm::Sic);
        assert_eq!(parsed.accumulated_objective, 1e4 / 3.0);
        assert_eq!(parsed.rows.len(), 2);
        assert_eq!(parsed.rows[1].iteration, 3);
        assert_eq!(parsed.rows[1].location, Position2D::new(17_050.0, 13_500.0));
        assert_eq!(parsed.rows[1].objective, 123.456 + 17_050.0);
    }

    #[test]
    fn report_parse_rejects_count_mismatch() {
        let text = "# algorithm=ssr g_hat=2 lambda_prime=1 accumulated=0\niteration,x_m,y_m,objective,threshold\n1,0,0,5,1\n";
        assert!(parse_report(text).is_err());
    }

    #[test]
    fn algorithm_names() {
        for a in [Algorithm::Joint, Algorithm::Ssr, Algorithm::Sic] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("clean".parse::<Algorithm>().is_err());
    }
}
