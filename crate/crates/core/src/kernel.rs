//! Discrete Gagliardo seminorm on piecewise-constant grid functions.
//!
//! For interior cells `i != j` the pair weight is
//! `w_ij = ∫_{cell_i} ∫_{cell_j} |x - y|^{-(N + ps)} dy dx`, and the exterior
//! coefficient is `k_i = 2 ∫_{Ω^c} |x_i - y|^{-(N + ps)} dy` evaluated at the
//! cell center. With these,
//!
//! `Φ(u) = Σ_{i≠j} w_ij |u_i - u_j|^p + Σ_i k_i |u_i|^p · vol`.
//!
//! Pair weights only depend on the integer offset between two cells, so every
//! distinct offset is integrated once on the unit lattice and rescaled by
//! `h^{2N - (N+ps)}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;

use crate::domain::{Domain, Shape};
use crate::error::{Error, Result};

/// Symmetric pair weights plus exterior tail coefficients over interior cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalKernel {
    s: f64,
    p: f64,
    dim: usize,
    exponent: f64,
    cell_volume: f64,
    n: usize,
    weights: Vec<f64>,
    exterior: Vec<f64>,
}

impl FractionalKernel {
    /// Builds a kernel from raw parts without checking any invariant.
    ///
    /// Used for synthetic kernels in tests and fault injection; assembled
    /// kernels come from [`assemble_kernel`].
    pub fn from_raw(
        s: f64,
        p: f64,
        dim: usize,
        cell_volume: f64,
        weights: Vec<f64>,
        exterior: Vec<f64>,
    ) -> Result<Self> {
        let n = exterior.len();
        if weights.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                got: weights.len(),
            });
        }
        Ok(Self {
            s,
            p,
            dim,
            exponent: dim as f64 + p * s,
            cell_volume,
            n,
            weights,
            exterior,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `N + p·s`.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn num_cells(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// Row-major `n × n` pair weights.
    pub fn pair_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exterior_coeff(&self) -> &[f64] {
        &self.exterior
    }

    /// Adds `delta` to the single entry `w_ij`, breaking symmetry.
    ///
    /// Test hook for exercising the symmetry check.
    pub fn inject_asymmetry(&mut self, i: usize, j: usize, delta: f64) {
        self.weights[i * self.n + j] += delta;
    }

    /// Largest `|w_ij - w_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.weight(i, j) - self.weight(j, i)).abs());
            }
        }
        worst
    }

    /// Checks symmetry, strict positivity off the diagonal, a zero diagonal,
    /// positive exterior coefficients and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.symmetry_defect() != 0.0 {
            return Err(Error::Parameter(format!(
                "kernel is not symmetric (defect {:e})",
                self.symmetry_defect()
            )));
        }
        for i in 0..self.n {
            if self.weight(i, i) != 0.0 {
                return Err(Error::Parameter(format!("nonzero diagonal at {i}")));
            }
            for j in 0..self.n {
                let w = self.weight(i, j);
                if !w.is_finite() {
                    return Err(Error::NonFinite(format!("pair weight ({i}, {j})")));
                }
                if i != j && w <= 0.0 {
                    return Err(Error::Parameter(format!(
                        "pair weight ({i}, {j}) = {w} is not positive"
                    )));
                }
            }
            let k = self.exterior[i];
            if !k.is_finite() {
                return Err(Error::NonFinite(format!("exterior coefficient {i}")));
            }
            if k <= 0.0 {
                return Err(Error::Parameter(format!(
                    "exterior coefficient {i} = {k} is not positive"
                )));
            }
        }
        Ok(())
    }

    /// Writes the kernel as CSV: one row per cell with the pair weights
    /// followed by the exterior coefficient.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.n).map(|j| format!("w_{j}")).collect();
        header.push("exterior".to_string());
        wtr.write_record(&header)?;
        for i in 0..self.n {
            let mut rec: Vec<String> = self.row(i).iter().map(|w| format!("{w:e}")).collect();
            rec.push(format!("{:e}", self.exterior[i]));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn check_parameters(domain: &Domain, s: f64, p: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("s = {s} must lie in (0, 1)")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Parameter(format!("p = {p} must exceed 1")));
    }
    if p * s >= domain.dim() as f64 {
        return Err(Error::Parameter(format!(
            "p·s = {} must be below the dimension {}",
            p * s,
            domain.dim()
        )));
    }
    // Face-adjacent cells make the Gagliardo energy of a cell indicator
    // diverge unless p·s < 1, in every dimension.
    if p * s >= 1.0 {
        return Err(Error::NonFinite(format!(
            "pair quadrature: p·s = {} >= 1 gives piecewise-constant functions infinite energy",
            p * s
        )));
    }
    Ok(())
}

/// Assembles the kernel for `(domain, s, p)`.
pub fn assemble_kernel(domain: &Domain, s: f64, p: f64) -> Result<FractionalKernel> {
    check_parameters(domain, s, p)?;
    let dim = domain.dim();
    let n = domain.num_cells();
    let alpha = dim as f64 + p * s;
    let h = domain.h();
    let scale = h.powf(2.0 * dim as f64 - alpha);

    let near = NearField::new(dim, alpha);

    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let li = domain.lattice_index(i);
            (i + 1..n)
                .map(|j| {
                    let lj = domain.lattice_index(j);
                    let offset: Vec<i64> = li.iter().zip(lj).map(|(a, b)| b - a).collect();
                    scale * near.unit_pair_integral(&offset)
                })
                .collect()
        })
        .collect();

    let mut weights = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (k, &w) in row.iter().enumerate() {
            let j = i + 1 + k;
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }

    let exterior = exterior_coefficients(domain, s, p)?;

    let kernel = FractionalKernel {
        s,
        p,
        dim,
        exponent: alpha,
        cell_volume: domain.cell_volume(),
        n,
        weights,
        exterior,
    };
    if let Some(bad) = kernel.weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::NonFinite(format!("pair weight {bad}")));
    }
    Ok(kernel)
}

/// Exterior coefficient `k_i = 2 ∫_{Ω^c} |x_i - y|^{-(N+ps)} dy` of one cell.
pub fn exterior_tail(domain: &Domain, s: f64, p: f64, cell_index: usize) -> Result<f64> {
    check_parameters(domain, s, p)?;
    if cell_index >= domain.num_cells() {
        return Err(Error::Parameter(format!(
            "cell index {cell_index} out of range ({} cells)",
            domain.num_cells()
        )));
    }
    match domain.shape() {
        Shape::Interval => Ok(interval_tail(domain, p * s, cell_index)),
        _ => {
            let lattice = LatticeTail::new(domain, s, p);
            finite_tail(lattice.tail(domain, cell_index))
        }
    }
}

fn exterior_coefficients(domain: &Domain, s: f64, p: f64) -> Result<Vec<f64>> {
    let n = domain.num_cells();
    match domain.shape() {
        Shape::Interval => (0..n)
            .map(|i| finite_tail(interval_tail(domain, p * s, i)))
            .collect(),
        _ => {
            let lattice = LatticeTail::new(domain, s, p);
            (0..n)
                .into_par_iter()
                .map(|i| finite_tail(lattice.tail(domain, i)))
                .collect()
        }
    }
}

fn finite_tail(k: f64) -> Result<f64> {
    if k.is_finite() && k > 0.0 {
        Ok(k)
    } else {
        Err(Error::NonFinite(format!("exterior tail {k}")))
    }
}

/// Closed form on an interval `(a, b)`:
/// `2/(ps) · [(x - a)^{-ps} + (b - x)^{-ps}]`.
fn interval_tail(domain: &Domain, ps: f64, i: usize) -> f64 {
    let x = domain.center(i)[0];
    let a = domain.box_lo()[0];
    let b = domain.box_hi()[0];
    2.0 / ps * ((x - a).powf(-ps) + (b - x).powf(-ps))
}

/// `2 ∫_{|y| > R} |y|^{-(2+ps)} dy` in the plane.
pub fn radial_tail_2d(ps: f64, radius: f64) -> f64 {
    2.0 * 2.0 * PI / ps * radius.powf(-ps)
}

/// Exterior coefficients in 2D via the lattice of cells with the grid's
/// spacing out to `R = 4·diam(box)`, plus the analytic tail beyond `R`.
///
/// The exterior part of the ball around a cell center equals the full ball
/// minus the interior cells, so the ball sum is computed once for the lattice.
struct LatticeTail {
    h: f64,
    alpha: f64,
    radius: f64,
    ball_sum: f64,
    near: HashMap<Vec<i64>, f64>,
}

impl LatticeTail {
    fn new(domain: &Domain, s: f64, p: f64) -> Self {
        let dim = domain.dim();
        let h = domain.h();
        let alpha = dim as f64 + p * s;
        let radius = 4.0 * domain.box_diameter();
        let reach = (radius / h).ceil() as i64;
        let r2 = (radius / h) * (radius / h);

        let mut near = HashMap::new();
        for a in 0..=2i64 {
            for b in 0..=a {
                if a == 0 && b == 0 {
                    continue;
                }
                let key = vec![a, b];
                if (a * a + b * b) as f64 <= 4.0 {
                    near.insert(key, point_box_gl(&[a as f64, b as f64], alpha));
                }
            }
        }

        let mut tail = Self {
            h,
            alpha,
            radius,
            ball_sum: 0.0,
            near,
        };
        let mut sum = 0.0;
        for a in -reach..=reach {
            for b in -reach..=reach {
                if (a == 0 && b == 0) || ((a * a + b * b) as f64) > r2 {
                    continue;
                }
                sum += tail.cell_integral(&[a, b]);
            }
        }
        tail.ball_sum = sum;
        tail
    }

    /// `∫_{cell at offset o} |x_center - y|^{-α} dy`.
    fn cell_integral(&self, offset: &[i64]) -> f64 {
        let dim = offset.len() as i32;
        let key = canonical(offset);
        let unit = match self.near.get(&key) {
            Some(&v) => v,
            None => {
                let d2: i64 = offset.iter().map(|o| o * o).sum();
                (d2 as f64).powf(-0.5 * self.alpha)
            }
        };
        unit * self.h.powf(dim as f64 - self.alpha)
    }

    fn tail(&self, domain: &Domain, i: usize) -> f64 {
        let li = domain.lattice_index(i);
        let r2 = (self.radius / self.h) * (self.radius / self.h);
        let mut interior = 0.0;
        for j in 0..domain.num_cells() {
            if j == i {
                continue;
            }
            let offset: Vec<i64> = domain
                .lattice_index(j)
                .iter()
                .zip(li)
                .map(|(b, a)| b - a)
                .collect();
            let d2: i64 = offset.iter().map(|o| o * o).sum();
            if d2 as f64 <= r2 {
                interior += self.cell_integral(&offset);
            }
        }
        let ps = self.alpha - 2.0;
        2.0 * (self.ball_sum - interior) + radial_tail_2d(ps, self.radius)
    }
}

/// Sorted absolute offset; integrals over unit cells are invariant under
/// reflections and axis permutations of the lattice.
fn canonical(offset: &[i64]) -> Vec<i64> {
    let mut key: Vec<i64> = offset.iter().map(|o| o.abs()).collect();
    key.sort_unstable_by(|a, b| b.cmp(a));
    key
}

// Six-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 6] = [
    -0.932_469_514_203_152,
    -0.661_209_386_466_264_5,
    -0.238_619_186_083_196_9,
    0.238_619_186_083_196_9,
    0.661_209_386_466_264_5,
    0.932_469_514_203_152,
];
const GL_WEIGHTS: [f64; 6] = [
    0.171_324_492_379_170_4,
    0.360_761_573_048_138_6,
    0.467_913_934_572_691,
    0.467_913_934_572_691,
    0.360_761_573_048_138_6,
    0.171_324_492_379_170_4,
];

/// Tensor Gauss-Legendre points on the box `[0, side]^dim`, with each axis
/// split into `sub` panels.
fn gl_points(dim: usize, side: f64, sub: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let panel = side / sub as f64;
    let mut axis_x = Vec::new();
    let mut axis_w = Vec::new();
    for c in 0..sub {
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            axis_x.push((c as f64 + 0.5 * (x + 1.0)) * panel);
            axis_w.push(0.5 * w * panel);
        }
    }
    let m = axis_x.len();
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    match dim {
        1 => {
            for a in 0..m {
                pts.push(vec![axis_x[a]]);
                wts.push(axis_w[a]);
            }
        }
        _ => {
            for a in 0..m {
                for b in 0..m {
                    pts.push(vec![axis_x[a], axis_x[b]]);
                    wts.push(axis_w[a] * axis_w[b]);
                }
            }
        }
    }
    (pts, wts)
}

/// `∫_{[0,side]^N} ∫_{shift + [0,side]^N} |x - y|^{-α} dy dx` for
/// non-touching boxes.
fn gl_box_pair(shift: &[f64], side: f64, alpha: f64) -> f64 {
    let dim = shift.len();
    let (pts, wts) = gl_points(dim, side, 2);
    let mut total = 0.0;
    for (x, wx) in pts.iter().zip(&wts) {
        let mut inner = 0.0;
        for (y, wy) in pts.iter().zip(&wts) {
            let d2: f64 = (0..dim)
                .map(|d| {
                    let t = y[d] + shift[d] - x[d];
                    t * t
                })
                .sum();
            inner += wy * d2.powf(-0.5 * alpha);
        }
        total += wx * inner;
    }
    total
}

/// `∫_{cell at offset o} |y|^{-α} dy` on the unit lattice, for a point at
/// the origin (a cell center).
fn point_box_gl(offset: &[f64], alpha: f64) -> f64 {
    let dim = offset.len();
    let (pts, wts) = gl_points(dim, 1.0, 4);
    pts.iter()
        .zip(&wts)
        .map(|(y, w)| {
            let d2: f64 = (0..dim)
                .map(|d| {
                    let t = y[d] - 0.5 + offset[d];
                    t * t
                })
                .sum();
            w * d2.powf(-0.5 * alpha)
        })
        .sum()
}

/// Unit-lattice pair integrals for cells at short range.
///
/// Touching cells (offset in `{-1,0,1}^N`) carry an integrable singularity on
/// the shared face, edge or corner. Splitting both unit cells into `2^N`
/// children produces child pairs that are again touching (same integral,
/// rescaled by `2^{-(2N-α)}`) or separated (smooth integrand, Gauss-Legendre).
/// Solving the resulting triangular system gives the touching integrals
/// exactly up to the smooth quadrature error.
struct NearField {
    alpha: f64,
    touching: Vec<f64>,
    separated: HashMap<Vec<i64>, f64>,
}

impl NearField {
    fn new(dim: usize, alpha: f64) -> Self {
        let ratio = 2f64.powf(-(2.0 * dim as f64 - alpha));
        // touching[k] for k nonzero offset components, k = 1..=dim
        let mut touching = vec![0.0; dim + 1];
        for k in (1..=dim).rev() {
            let parent: Vec<i64> = (0..dim).map(|d| i64::from(d < k)).collect();
            let mut smooth = 0.0;
            let mut coarser = 0.0;
            let mut self_count = 0usize;
            for a in 0..(1usize << dim) {
                for b in 0..(1usize << dim) {
                    let ab: Vec<i64> = (0..dim).map(|d| ((a >> d) & 1) as i64).collect();
                    let bb: Vec<i64> = (0..dim).map(|d| ((b >> d) & 1) as i64).collect();
                    let child: Vec<i64> = (0..dim).map(|d| 2 * parent[d] + bb[d] - ab[d]).collect();
                    if child.iter().all(|c| c.abs() <= 1) {
                        let j = child.iter().filter(|&&c| c != 0).count();
                        if j == k {
                            self_count += 1;
                        } else {
                            coarser += touching[j];
                        }
                    } else {
                        let shift: Vec<f64> = child.iter().map(|&c| 0.5 * c as f64).collect();
                        smooth += gl_box_pair(&shift, 0.5, alpha);
                    }
                }
            }
            touching[k] = (smooth + ratio * coarser) / (1.0 - ratio * self_count as f64);
        }

        let mut separated = HashMap::new();
        let reach = 2i64;
        let mut offsets = vec![vec![]];
        for _ in 0..dim {
            offsets = offsets
                .into_iter()
                .flat_map(|o: Vec<i64>| {
                    (0..=reach).map(move |c| {
                        let mut o = o.clone();
                        o.push(c);
                        o
                    })
                })
                .collect();
        }
        for o in offsets {
            let key = canonical(&o);
            let d2: i64 = o.iter().map(|c| c * c).sum();
            let touching_offset = o.iter().all(|c| c.abs() <= 1);
            if !touching_offset && d2 <= 4 && !separated.contains_key(&key) {
                let shift: Vec<f64> = key.iter().map(|&c| c as f64).collect();
                separated.insert(key, gl_box_pair(&shift, 1.0, alpha));
            }
        }

        Self {
            alpha,
            touching,
            separated,
        }
    }

    fn unit_pair_integral(&self, offset: &[i64]) -> f64 {
        if offset.iter().all(|c| c.abs() <= 1) {
            let k = offset.iter().filter(|&&c| c != 0).count();
            return self.touching[k];
        }
        let key = canonical(offset);
        if let Some(&v) = self.separated.get(&key) {
            return v;
        }
        // midpoint rule for center distance > 2h
        let d2: i64 = offset.iter().map(|c| c * c).sum();
        (d2 as f64).powf(-0.5 * self.alpha)
    }
}
