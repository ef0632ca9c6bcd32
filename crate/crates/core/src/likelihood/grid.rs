use crate::geometry::{Position2D, Region};

use super::LikelihoodError;

/// Square cells tiling a region, indexed row-major: `cell = iy * nx + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    region: Region,
    cell_size: f64,
    nx: usize,
    ny: usize,
}

impl Grid {
    pub fn new(region: Region, cell_size: f64) -> Result<Self, LikelihoodError> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(LikelihoodError::BadGrid(format!("cell size {cell_size} must be positive")));
        }
        let fit = |extent: f64, axis: &str| {
            let n = (extent / cell_size).round();
            if n < 1.0 || (n * cell_size - extent).abs() > 1e-6 * cell_size {
                Err(LikelihoodError::BadGrid(format!(
                    "{axis} extent {extent} m is not a whole number of {cell_size} m cells"
                )))
            } else {
                Ok(n as usize)
            }
        };
        let nx = fit(region.width(), "x")?;
        let ny = fit(region.height(), "y")?;
        Ok(Self { region, cell_size, nx, ny })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn center(&self, cell: usize) -> Position2D {
        let (ix, iy) = self.coords(cell);
        Position2D::new(
            self.region.x_min + (ix as f64 + 0.5) * self.cell_size,
            self.region.y_min + (iy as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing `p`; points on the far edges belong to the last cell.
    pub fn cell_of(&self, p: &Position2D) -> Option<usize> {
        if !self.region.contains(p) {
            return None;
        }
        let ix = (((p.x - self.region.x_min) / self.cell_size).floor() as usize).min(self.nx - 1);
        let iy = (((p.y - self.region.y_min) / self.cell_size).floor() as usize).min(self.ny - 1);
        Some(self.index(ix, iy))
    }

    /// Chebyshev distance between two cells, in cells.
    pub fn cell_distance(&self, a: usize, b: usize) -> usize {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx).max(ay.abs_diff(by))
    }
}
