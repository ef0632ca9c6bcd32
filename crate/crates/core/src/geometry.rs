//! Antenna/target geometry, bistatic delays, separability and range-bin footprints.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::likelihood::Grid;

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("antenna layout needs at least one transmitter and one receiver")]
    EmptyLayout,
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("duplicate {kind} position at index {index}")]
    DuplicateAntenna { kind: &'static str, index: usize },
    #[error("target {index} at ({x}, {y}) lies outside the search region")]
    TargetOutsideRegion { index: usize, x: f64, y: f64 },
    #[error("target {index} has non-positive relative amplitude {value}")]
    BadAmplitude { index: usize, value: f64 },
    #[error("target {index} carries {got} path coefficients, layout has {expected} paths")]
    AlphaCount { index: usize, got: usize, expected: usize },
    #[error("degenerate region: [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    BadRegion {
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },
}

/// A point in the surveillance plane, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// One transmit-receive path: receiver `rx` (l) listening to transmitter `tx` (k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathId {
    pub rx: usize,
    pub tx: usize,
}

impl std::fmt::Display for PathId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "rx{}-tx{}", self.rx, self.tx)
    }
}

/// Transmitter and receiver positions. Paths are enumerated receiver-major:
/// `index = rx * N + tx`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaLayout {
    tx: Vec<Position2D>,
    rx: Vec<Position2D>,
}

impl AntennaLayout {
    pub fn new(tx: Vec<Position2D>, rx: Vec<Position2D>) -> Result<Self, GeometryError> {
        if tx.is_empty() || rx.is_empty() {
            return Err(GeometryError::EmptyLayout);
        }
        for (kind, list) in [("transmitter", &tx), ("receiver", &rx)] {
            if list.iter().any(|p| !p.is_finite()) {
                return Err(GeometryError::NonFinite(kind));
            }
            for (i, p) in list.iter().enumerate() {
                if list[..i].iter().any(|q| q == p) {
                    return Err(GeometryError::DuplicateAntenna { kind, index: i });
                }
            }
        }
        Ok(Self { tx, rx })
    }

    /// Every antenna both transmits and receives.
    pub fn transceivers(sites: Vec<Position2D>) -> Result<Self, GeometryError> {
        Self::new(sites.clone(), sites)
    }

    pub fn tx(&self) -> &[Position2D] {
        &self.tx
    }

    pub fn rx(&self) -> &[Position2D] {
        &self.rx
    }

    pub fn path_count(&self) -> usize {
        self.tx.len() * self.rx.len()
    }

    pub fn path(&self, index: usize) -> PathId {
        PathId {
            rx: index / self.tx.len(),
            tx: index % self.tx.len(),
        }
    }

    pub fn path_index(&self, path: PathId) -> usize {
        path.rx * self.tx.len() + path.tx
    }

    pub fn paths(&self) -> impl Iterator<Item = PathId> + '_ {
        (0..self.path_count()).map(|i| self.path(i))
    }

    /// Bistatic delay of a scatterer at `pos` over `path`.
    pub fn delay(&self, pos: &Position2D, path: PathId) -> f64 {
        bistatic_delay(pos, &self.tx[path.tx], &self.rx[path.rx])
    }
}

/// Axis-aligned rectangle, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self, GeometryError> {
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite())
            && x_max > x_min
            && y_max > y_min;
        if !ok {
            return Err(GeometryError::BadRegion {
                x_min,
                x_max,
                y_min,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn contains(&self, p: &Position2D) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Ground truth for one static target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTruth {
    pub position: Position2D,
    /// Relative square modulus of the reflection coefficient.
    pub amplitude_sq: f64,
    /// Complex reflection coefficient per path, in layout path order.
    pub per_path_alpha: Vec<Complex64>,
}

impl TargetTruth {
    /// Target with unit coefficients on every path.
    pub fn unit(position: Position2D, paths: usize) -> Self {
        Self {
            position,
            amplitude_sq: 1.0,
            per_path_alpha: vec![Complex64::new(1.0, 0.0); paths],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub layout: AntennaLayout,
    pub targets: Vec<TargetTruth>,
    pub region: Region,
}

impl Scene {
    pub fn new(
        layout: AntennaLayout,
        targets: Vec<TargetTruth>,
        region: Region,
    ) -> Result<Self, GeometryError> {
        for (index, t) in targets.iter().enumerate() {
            if !region.contains(&t.position) {
                return Err(GeometryError::TargetOutsideRegion {
                    index,
                    x: t.position.x,
                    y: t.position.y,
                });
            }
            if !(t.amplitude_sq > 0.0) || !t.amplitude_sq.is_finite() {
                return Err(GeometryError::BadAmplitude {
                    index,
                    value: t.amplitude_sq,
                });
            }
            if t.per_path_alpha.len() != layout.path_count() {
                return Err(GeometryError::AlphaCount {
                    index,
                    got: t.per_path_alpha.len(),
                    expected: layout.path_count(),
                });
            }
            if t.per_path_alpha.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
                return Err(GeometryError::NonFinite("reflection coefficient"));
            }
        }
        Ok(Self {
            layout,
            targets,
            region,
        })
    }

    /// Same layout and region with only target `index` kept.
    pub fn isolate(&self, index: usize) -> Scene {
        Scene {
            layout: self.layout.clone(),
            targets: vec![self.targets[index].clone()],
            region: self.region,
        }
    }

    /// Same layout and region, no targets.
    pub fn empty(&self) -> Scene {
        Scene {
            layout: self.layout.clone(),
            targets: Vec::new(),
            region: self.region,
        }
    }
}

/// Propagation delay transmitter -> target -> receiver, seconds.
pub fn bistatic_delay(target: &Position2D, tx: &Position2D, rx: &Position2D) -> f64 {
    (target.distance(tx) + target.distance(rx)) / SPEED_OF_LIGHT
}

/// Two echoes are separable on a path when their delays differ by strictly
/// more than the waveform correlation width.
pub fn pair_separable(tau_g: f64, tau_j: f64, tau_c: f64) -> bool {
    (tau_g - tau_j).abs() > tau_c
}

/// Range-bin index of a delay: `floor(tau / tau_c)`.
pub fn bin_index(delay: f64, tau_c: f64) -> i64 {
    (delay / tau_c).floor() as i64
}

/// True when `theta` falls within one range bin of `theta_hat` on the path `tx -> rx`.
pub fn bin_membership(
    theta: &Position2D,
    theta_hat: &Position2D,
    tx: &Position2D,
    rx: &Position2D,
    tau_c: f64,
) -> bool {
    let b = bin_index(bistatic_delay(theta, tx, rx), tau_c);
    let b_hat = bin_index(bistatic_delay(theta_hat, tx, rx), tau_c);
    (b - b_hat).abs() <= 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetClass {
    Isolated,
    PartiallySeparable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneClass {
    CompletelyIsolated,
    Mixed,
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparabilityReport {
    /// `separable[g][j][path]`, symmetric in (g, j); the diagonal is all false.
    pub separable: Vec<Vec<Vec<bool>>>,
    pub classes: Vec<TargetClass>,
    pub scene_class: SceneClass,
}

impl SeparabilityReport {
    pub fn is_separable(&self, g: usize, j: usize, path: usize) -> bool {
        self.separable[g][j][path]
    }

    /// Paths on which targets `g` and `j` share a range bin.
    pub fn inseparable_paths(&self, g: usize, j: usize) -> Vec<usize> {
        (0..self.separable[g][j].len())
            .filter(|&p| !self.separable[g][j][p])
            .collect()
    }
}

pub fn classify_scene(scene: &Scene, tau_c: f64) -> SeparabilityReport {
    let layout = &scene.layout;
    let n_paths = layout.path_count();
    let g_count = scene.targets.len();
    let delays: Vec<Vec<f64>> = scene
        .targets
        .iter()
        .map(|t| layout.paths().map(|p| layout.delay(&t.position, p)).collect())
        .collect();

    let mut separable = vec![vec![vec![false; n_paths]; g_count]; g_count];
    for g in 0..g_count {
        for j in (g + 1)..g_count {
            for p in 0..n_paths {
                let s = pair_separable(delays[g][p], delays[j][p], tau_c);
                separable[g][j][p] = s;
                separable[j][g][p] = s;
            }
        }
    }

    let classes: Vec<TargetClass> = (0..g_count)
        .map(|g| {
            let isolated = (0..g_count)
                .filter(|&j| j != g)
                .all(|j| separable[g][j].iter().all(|&s| s));
            if isolated {
                TargetClass::Isolated
            } else {
                TargetClass::PartiallySeparable
            }
        })
        .collect();

    let scene_class = if g_count == 0 {
        SceneClass::Empty
    } else if classes.iter().all(|c| *c == TargetClass::Isolated) {
        SceneClass::CompletelyIsolated
    } else {
        SceneClass::Mixed
    };

    SeparabilityReport {
        separable,
        classes,
        scene_class,
    }
}

/// Cells sharing a range bin (within the one-bin margin) with a declared location.
#[derive(Debug, Clone, PartialEq)]
pub struct FootprintMask {
    /// `per_path[path][cell]`
    pub per_path: Vec<Vec<bool>>,
    /// Union over all paths.
    pub union: Vec<bool>,
}

impl FootprintMask {
    pub fn contains(&self, cell: usize) -> bool {
        self.union[cell]
    }
}

/// Reference footprint evaluation straight from the geometry.
pub fn footprint(
    theta_hat: &Position2D,
    grid: &Grid,
    layout: &AntennaLayout,
    tau_c: f64,
) -> FootprintMask {
    let n_cells = grid.cell_count();
    let mut per_path = Vec::with_capacity(layout.path_count());
    let mut union = vec![false; n_cells];
    for path in layout.paths() {
        let tx = &layout.tx()[path.tx];
        let rx = &layout.rx()[path.rx];
        let mask: Vec<bool> = (0..n_cells)
            .map(|c| bin_membership(&grid.center(c), theta_hat, tx, rx, tau_c))
            .collect();
        for (u, m) in union.iter_mut().zip(&mask) {
            *u |= *m;
        }
        per_path.push(mask);
    }
    FootprintMask { per_path, union }
}
