//! Uniform Cartesian grids covering the computational domain.
//!
//! A discrete function holds one value per interior cell and is identically
//! zero on every other point of space. Cell membership is decided by the
//! cell center alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported domain shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    /// An open interval, `dim = 1`.
    Interval,
    /// An axis-aligned rectangle, `dim = 2`.
    Rectangle,
    /// The largest disk centered in the bounding box, `dim = 2`.
    Disk,
}

impl Shape {
    pub fn dim(self) -> usize {
        match self {
            Shape::Interval => 1,
            Shape::Rectangle | Shape::Disk => 2,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "interval" => Ok(Shape::Interval),
            "rectangle" => Ok(Shape::Rectangle),
            "disk" => Ok(Shape::Disk),
            other => Err(Error::Domain(format!("unsupported shape `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
}

impl DomainSpec {
    pub fn interval(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            shape: Shape::Interval,
            lo: vec![lo],
            hi: vec![hi],
            cells: vec![n],
        }
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2], n: [usize; 2]) -> Self {
        Self {
            shape: Shape::Rectangle,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            cells: n.to_vec(),
        }
    }

    pub fn disk(lo: [f64; 2], hi: [f64; 2], n: [usize; 2]) -> Self {
        Self {
            shape: Shape::Disk,
            ..Self::rectangle(lo, hi, n)
        }
    }
}

/// A uniform grid over a bounded open set, restricted to its interior cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Shape,
    dim: usize,
    box_lo: Vec<f64>,
    box_hi: Vec<f64>,
    cells_per_axis: Vec<usize>,
    h: f64,
    interior_mask: Vec<bool>,
    cell_centers: Vec<Vec<f64>>,
    lattice: Vec<Vec<i64>>,
}

const SPACING_RTOL: f64 = 1e-12;

/// Builds the grid described by `spec`.
///
/// Box cells are enumerated in row-major order (last axis fastest); interior
/// cells keep that order.
pub fn build_grid(spec: &DomainSpec) -> Result<Domain> {
    let dim = spec.shape.dim();
    if spec.lo.len() != dim || spec.hi.len() != dim || spec.cells.len() != dim {
        return Err(Error::Domain(format!(
            "shape {:?} needs {dim} coordinates and resolutions per corner",
            spec.shape
        )));
    }
    for d in 0..dim {
        if !(spec.lo[d].is_finite() && spec.hi[d].is_finite()) || spec.lo[d] >= spec.hi[d] {
            return Err(Error::Domain(format!(
                "degenerate box on axis {d}: lo = {}, hi = {}",
                spec.lo[d], spec.hi[d]
            )));
        }
        if spec.cells[d] < 2 {
            return Err(Error::Domain(format!(
                "resolution {} on axis {d} is below 2",
                spec.cells[d]
            )));
        }
    }

    let spacings: Vec<f64> = (0..dim)
        .map(|d| (spec.hi[d] - spec.lo[d]) / spec.cells[d] as f64)
        .collect();
    let h = spacings[0];
    if spacings
        .iter()
        .any(|&hd| ((hd - h) / h).abs() > SPACING_RTOL)
    {
        return Err(Error::Domain(format!(
            "axes must share one grid spacing, got {spacings:?}"
        )));
    }

    let total: usize = spec.cells.iter().product();
    let mut interior_mask = Vec::with_capacity(total);
    let mut cell_centers = Vec::new();
    let mut lattice = Vec::new();

    let center_of_box: Vec<f64> = (0..dim).map(|d| 0.5 * (spec.lo[d] + spec.hi[d])).collect();
    let radius = (0..dim)
        .map(|d| 0.5 * (spec.hi[d] - spec.lo[d]))
        .fold(f64::INFINITY, f64::min);

    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let x: Vec<f64> = (0..dim)
            .map(|d| spec.lo[d] + (idx[d] as f64 + 0.5) * h)
            .collect();
        let inside = match spec.shape {
            Shape::Interval | Shape::Rectangle => true,
            Shape::Disk => {
                let r2: f64 = x
                    .iter()
                    .zip(&center_of_box)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                r2.sqrt() < radius
            }
        };
        interior_mask.push(inside);
        if inside {
            cell_centers.push(x);
            lattice.push(idx.iter().map(|&i| i as i64).collect());
        }
        // advance the row-major multi-index, last axis fastest
        for d in (0..dim).rev() {
            idx[d] += 1;
            if idx[d] < spec.cells[d] {
                break;
            }
            idx[d] = 0;
        }
    }

    if cell_centers.len() < 2 {
        return Err(Error::Domain(format!(
            "only {} interior cells; at least 2 are required",
            cell_centers.len()
        )));
    }

    Ok(Domain {
        shape: spec.shape,
        dim,
        box_lo: spec.lo.clone(),
        box_hi: spec.hi.clone(),
        cells_per_axis: spec.cells.clone(),
        h,
        interior_mask,
        cell_centers,
        lattice,
    })
}

impl Domain {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn box_lo(&self) -> &[f64] {
        &self.box_lo
    }

    pub fn box_hi(&self) -> &[f64] {
        &self.box_hi
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells_per_axis
    }

    /// Grid spacing, shared by all axes.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// One flag per box cell in row-major order.
    pub fn interior_mask(&self) -> &[bool] {
        &self.interior_mask
    }

    pub fn num_cells(&self) -> usize {
        self.cell_centers.len()
    }

    pub fn cell_centers(&self) -> &[Vec<f64>] {
        &self.cell_centers
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.cell_centers[i]
    }

    /// Integer grid coordinates of interior cell `i`.
    pub fn lattice_index(&self, i: usize) -> &[i64] {
        &self.lattice[i]
    }

    /// Euclidean diameter of the bounding box.
    pub fn box_diameter(&self) -> f64 {
        self.box_lo
            .iter()
            .zip(&self.box_hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn box_volume(&self) -> f64 {
        self.box_lo
            .iter()
            .zip(&self.box_hi)
            .map(|(a, b)| b - a)
            .product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_four_cells() {
        let d = build_grid(&DomainSpec::interval(0.0, 1.0, 4)).unwrap();
        assert_eq!(d.num_cells(), 4);
        assert_eq!(d.h(), 0.25);
        assert_eq!(d.cell_volume(), 0.25);
        let xs: Vec<f64> = d.cell_centers().iter().map(|c| c[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn unit_square_three_per_axis() {
        let d = build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 1.0], [3, 3])).unwrap();
        assert_eq!(d.num_cells(), 9);
        assert!((d.cell_volume() - 1.0 / 9.0).abs() < 1e-15);
        // row-major: last axis fastest
        assert_eq!(d.lattice_index(1), &[0, 1]);
        assert_eq!(d.lattice_index(3), &[1, 0]);
    }

    #[test]
    fn disk_count_matches_enumeration() {
        let n = 8;
        let d = build_grid(&DomainSpec::disk([0.0, 0.0], [1.0, 1.0], [n, n])).unwrap();
        let mut expected = 0;
        for i in 0..n {
            for j in 0..n {
                let x = (i as f64 + 0.5) / n as f64 - 0.5;
                let y = (j as f64 + 0.5) / n as f64 - 0.5;
                if (x * x + y * y).sqrt() < 0.5 {
                    expected += 1;
                }
            }
        }
        assert_eq!(d.num_cells(), expected);
        assert_eq!(d.interior_mask().iter().filter(|&&b| b).count(), expected);
        assert!(d.num_cells() as f64 * d.cell_volume() <= d.box_volume());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_grid(&DomainSpec::interval(0.0, 1.0, 1)).is_err());
        assert!(build_grid(&DomainSpec::interval(1.0, 1.0, 4)).is_err());
        assert!(build_grid(&DomainSpec::rectangle([0.0, 0.0], [1.0, 2.0], [4, 4])).is_err());
        let mismatched = DomainSpec {
            shape: Shape::Interval,
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
            cells: vec![4, 4],
        };
        assert!(build_grid(&mismatched).is_err());
        assert!(Shape::parse("annulus").is_err());
    }

    #[test]
    fn enumeration_is_deterministic() {
        let spec = DomainSpec::disk([-1.0, -1.0], [1.0, 1.0], [12, 12]);
        assert_eq!(build_grid(&spec).unwrap(), build_grid(&spec).unwrap());
    }
}
