use crate::geometry::FootprintMask;
use crate::likelihood::ObjectiveField;

use super::{detection_at, Algorithm, DetectionReport, EstimatorConfig, Footprints, ThresholdConfig};

/// Cells and paths whose likelihood the new detection removes: its per-path
/// footprint minus whatever earlier detections already subtracted.
pub fn sic_modified_term(field: &ObjectiveField, footprint: &FootprintMask) -> Vec<Vec<bool>> {
    footprint
        .per_path
        .iter()
        .enumerate()
        .map(|(p, row)| {
            row.iter()
                .enumerate()
                .map(|(c, &m)| m && !field.is_cancelled(p, c))
                .collect()
        })
        .collect()
}

/// `lambda' * (remaining path weight at cell) / (total path weight)`.
pub fn sic_threshold(field: &ObjectiveField, cell: usize, thresholds: &ThresholdConfig) -> f64 {
    let total = thresholds.weight_sum();
    let cancelled: f64 = (0..field.path_count())
        .filter(|&p| field.is_cancelled(p, cell))
        .map(|p| thresholds.path_weights[p])
        .sum();
    thresholds.lambda_prime * (total - cancelled) / total
}

/// Successive interference cancellation.
///
/// Each iteration takes the argmax of the current objective over the whole
/// grid, tests it against the threshold scaled to the paths still present
/// there, then subtracts its footprint's per-path likelihoods. A rejected
/// candidate's cancellation is kept.
pub fn sic_run<F: Footprints + ?Sized>(
    field: &mut ObjectiveField,
    footprints: &F,
    thresholds: &ThresholdConfig,
    config: &EstimatorConfig,
) -> DetectionReport {
    let mut detections = Vec::new();
    let mut accumulated = 0.0;
    for g in 1..=config.g_max {
        let Some(cell) = field.argmax(None) else {
            break;
        };
        let objective = field.combined()[cell];
        let threshold = sic_threshold(field, cell, thresholds);
        let fp = footprints.footprint(cell);
        let term = sic_modified_term(field, &fp);
        let accepted = objective >= threshold;
        let detection = accepted.then(|| detection_at(field, g, cell, objective, threshold, fp));
        field.cancel(&term);
        match detection {
            Some(d) => {
                accumulated += objective;
                detections.push(d);
            }
            None if config.early_stop => break,
            None => {}
        }
    }
    DetectionReport {
        algorithm: Algorithm::Sic,
        detections,
        lambda_prime: thresholds.lambda_prime,
        accumulated_objective: accumulated,
    }
}
