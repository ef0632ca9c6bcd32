use nalgebra::DVector;
use num_complex::Complex64;

use crate::likelihood::{alpha_mle_joint, FieldPlan, GramMatrix, ObjectiveField, ObservationModel};
use crate::signal::SteeringVector;

use super::{Algorithm, Detection, DetectionReport, EstimatorError};

/// Largest target count the exhaustive search accepts.
pub const MAX_JOINT_TARGETS: usize = 3;
/// Largest number of cell tuples the exhaustive search will visit.
pub const MAX_JOINT_TUPLES: u128 = 50_000_000;

/// Outcome of an exhaustive search over unordered cell tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSearch {
    /// Best tuple in ascending cell order and its summed concentrated log-likelihood.
    pub best: Option<(Vec<usize>, f64)>,
    /// Tuples skipped because two delays on some path are closer than one sample.
    pub excluded: usize,
    pub evaluated: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

struct Context<'a> {
    plan: &'a FieldPlan,
    field: &'a ObjectiveField,
    /// `replicas[path][cell]`
    replicas: Vec<Vec<SteeringVector>>,
}

impl Context<'_> {
    fn cross(&self, path: usize, cell: usize) -> Complex64 {
        self.field.alpha_hat(path, cell) * self.plan.norm(path, cell)
    }

    fn singular(&self, cells: &[usize]) -> bool {
        (0..self.plan.path_count()).any(|p| {
            cells.iter().enumerate().any(|(i, &a)| {
                cells[i + 1..]
                    .iter()
                    .any(|&b| (self.plan.delay_samples(p, a) - self.plan.delay_samples(p, b)).abs() < 1.0)
            })
        })
    }

    /// Summed concentrated log-likelihood and per-path coefficients, or `None` if singular.
    fn evaluate(&self, cells: &[usize]) -> Option<(f64, Vec<DVector<Complex64>>)> {
        let mut total = 0.0;
        let mut alphas = Vec::with_capacity(self.plan.path_count());
        for p in 0..self.plan.path_count() {
            let reps: Vec<SteeringVector> = cells.iter().map(|&c| self.replicas[p][c].clone()).collect();
            let delays: Vec<f64> = cells.iter().map(|&c| self.plan.delay_samples(p, c)).collect();
            let gram = GramMatrix::from_replicas(&reps, &delays);
            let cross = DVector::from_iterator(cells.len(), cells.iter().map(|&c| self.cross(p, c)));
            let alpha = alpha_mle_joint(&gram, &cross).ok()?;
            total += crate::likelihood::concentrated(&cross, &alpha);
            alphas.push(alpha);
        }
        Some((total, alphas))
    }
}

/// Exhaustive maximization of the joint likelihood over `g`-tuples of cells.
pub fn joint_peak(
    model: &ObservationModel,
    plan: &FieldPlan,
    field: &ObjectiveField,
    g: usize,
) -> Result<JointSearch, EstimatorError> {
    if g == 0 || g > MAX_JOINT_TARGETS {
        return Err(EstimatorError::JointTooLarge { got: g, max: MAX_JOINT_TARGETS });
    }
    let n = field.cell_count();
    if g == 1 {
        return Ok(JointSearch {
            best: field.argmax(None).map(|c| (vec![c], field.combined()[c])),
            excluded: 0,
            evaluated: n,
        });
    }
    let tuples = if g > n { 0 } else { binomial(n, g) };
    if tuples > MAX_JOINT_TUPLES {
        return Err(EstimatorError::TooManyTuples { tuples, max: MAX_JOINT_TUPLES });
    }
    let grid = plan.grid();
    let replicas = (0..plan.path_count())
        .map(|p| {
            (0..n)
                .map(|c| model.whitened_replica(p, &grid.center(c)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(crate::likelihood::LikelihoodError::from)?;
    let ctx = Context { plan, field, replicas };

    let mut out = JointSearch { best: None, excluded: 0, evaluated: 0 };
    let mut visit = |cells: &[usize]| {
        if ctx.singular(cells) {
            out.excluded += 1;
            return;
        }
        match ctx.evaluate(cells) {
            None => out.excluded += 1,
            Some((v, _)) => {
                out.evaluated += 1;
                if out.best.as_ref().is_none_or(|(_, b)| v > *b) {
                    out.best = Some((cells.to_vec(), v));
                }
            }
        }
    };
    for i in 0..n {
        for j in (i + 1)..n {
            if g == 2 {
                visit(&[i, j]);
            } else {
                for k in (j + 1)..n {
                    visit(&[i, j, k]);
                }
            }
        }
    }
    Ok(out)
}

/// Declare the best `g`-tuple when its summed log-likelihood reaches `lambda`.
pub fn joint_search(
    model: &ObservationModel,
    plan: &FieldPlan,
    field: &ObjectiveField,
    g: usize,
    lambda: f64,
) -> Result<DetectionReport, EstimatorError> {
    let search = joint_peak(model, plan, field, g)?;
    let mut detections = Vec::new();
    let mut accumulated = 0.0;
    if let Some((cells, value)) = search.best.filter(|(_, v)| *v >= lambda) {
        let alphas: Vec<Vec<Complex64>> = if g == 1 {
            vec![(0..plan.path_count()).map(|p| field.alpha_hat(p, cells[0])).collect()]
        } else {
            // re-evaluate the winner for its coefficients
            let grid = plan.grid();
            let per_path = (0..plan.path_count())
                .map(|p| {
                    let reps = cells
                        .iter()
                        .map(|&c| model.whitened_replica(p, &grid.center(c)))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(crate::likelihood::LikelihoodError::from)?;
                    let delays: Vec<f64> = cells.iter().map(|&c| plan.delay_samples(p, c)).collect();
                    let gram = GramMatrix::from_replicas(&reps, &delays);
                    let cross = DVector::from_iterator(
                        cells.len(),
                        cells.iter().map(|&c| field.alpha_hat(p, c) * plan.norm(p, c)),
                    );
                    Ok(alpha_mle_joint(&gram, &cross)?)
                })
                .collect::<Result<Vec<_>, EstimatorError>>()?;
            (0..cells.len()).map(|i| per_path.iter().map(|a| a[i]).collect()).collect()
        };
        accumulated = value;
        for (i, (&cell, alpha)) in cells.iter().zip(alphas).enumerate() {
            detections.push(Detection {
                iteration: i + 1,
                cell,
                location: plan.grid().center(cell),
                objective: value,
                threshold: lambda,
                footprint: plan.footprint(cell),
                alpha,
            });
        }
    }
    Ok(DetectionReport {
        algorithm: Algorithm::Joint,
        detections,
        lambda_prime: lambda,
        accumulated_objective: accumulated,
    })
}
