use crate::likelihood::ObjectiveField;

use super::{detection_at, Algorithm, DetectionReport, EstimatorConfig, Footprints, ThresholdConfig};

/// Successive space removal.
///
/// Candidates start as every cell whose objective exceeds `lambda_prime`;
/// each iteration declares the best remaining candidate and strikes every
/// cell in its range-bin footprint from the candidate set.
pub fn ssr_run<F: Footprints + ?Sized>(
    field: &ObjectiveField,
    footprints: &F,
    thresholds: &ThresholdConfig,
    config: &EstimatorConfig,
) -> DetectionReport {
    let lambda = thresholds.lambda_prime;
    let mut candidates: Vec<bool> = field.combined().iter().map(|&v| v > lambda).collect();
    let mut detections = Vec::new();
    let mut accumulated = 0.0;
    for g in 1..=config.g_max {
        let Some(cell) = field.argmax(Some(&candidates)) else {
            break;
        };
        let objective = field.combined()[cell];
        let fp = footprints.footprint(cell);
        for (c, hit) in candidates.iter_mut().zip(&fp.union) {
            *c &= !hit;
        }
        accumulated += objective;
        detections.push(detection_at(field, g, cell, objective, lambda, fp));
    }
    DetectionReport {
        algorithm: Algorithm::Ssr,
        detections,
        lambda_prime: lambda,
        accumulated_objective: accumulated,
    }
}
