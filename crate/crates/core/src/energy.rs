//! Energy functionals `Φ` and `Ψ_m`, their gradients, and the eigen-residual.
//!
//! Double sums run over ordered pairs `(i, j)`, `i != j`, so each unordered
//! pair contributes twice, as in the double integral over `ℝ^N × ℝ^N`.
//! Inner sums are evaluated in fixed index order.

use std::ops::{Deref, DerefMut};
use std::path::Path;

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::kernel::FractionalKernel;

/// One value per interior cell; zero outside the domain.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridFunction(Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &GridFunction) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, t: f64) -> GridFunction {
        Self(self.0.iter().map(|v| t * v).collect())
    }

    /// `self + t · other`.
    pub fn add_scaled(&self, t: f64, other: &GridFunction) -> GridFunction {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + t * b)
                .collect(),
        )
    }

    /// `a · self + b · other`.
    pub fn combine(&self, a: f64, b: f64, other: &GridFunction) -> GridFunction {
        Self(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        self.add_scaled(-1.0, other)
    }

    pub fn abs(&self) -> GridFunction {
        Self(self.0.iter().map(|v| v.abs()).collect())
    }

    /// `max(u, 0)`.
    pub fn positive_part(&self) -> GridFunction {
        Self(self.0.iter().map(|v| v.max(0.0)).collect())
    }

    /// `max(-u, 0)`.
    pub fn negative_part(&self) -> GridFunction {
        Self(self.0.iter().map(|v| (-v).max(0.0)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// Takes both strictly positive and strictly negative values.
    pub fn is_nodal(&self) -> bool {
        self.0.iter().any(|&v| v > 0.0) && self.0.iter().any(|&v| v < 0.0)
    }

    /// Flips the sign so that the entry of largest magnitude is positive
    /// (lowest index among ties).
    pub fn with_sign_convention(mut self) -> GridFunction {
        let mut best = 0usize;
        for (i, v) in self.0.iter().enumerate() {
            if v.abs() > self.0[best].abs() {
                best = i;
            }
        }
        if self.0.get(best).is_some_and(|&v| v < 0.0) {
            for v in &mut self.0 {
                *v = -*v;
            }
        }
        self
    }
}

impl Deref for GridFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GridFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// Per-cell values of a sign-indefinite weight `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    values: Vec<f64>,
    cell_volume: f64,
    positive_mass: f64,
}

impl WeightField {
    /// Wraps explicit values, requiring finiteness and positive mass on the
    /// set `{m > 0}`.
    pub fn new(values: Vec<f64>, cell_volume: f64) -> Result<Self> {
        let field = Self::new_unchecked(values, cell_volume)?;
        if field.positive_mass <= 0.0 {
            return Err(Error::Weight(
                "m must be positive on a set of positive measure (positive mass is zero)".into(),
            ));
        }
        Ok(field)
    }

    /// Like [`WeightField::new`] but accepts weights without positive mass,
    /// e.g. the positive part of a weight used as a measure.
    pub fn new_unchecked(values: Vec<f64>, cell_volume: f64) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Weight(format!("value at cell {i} is not finite")));
        }
        if !(cell_volume > 0.0 && cell_volume.is_finite()) {
            return Err(Error::Weight(format!(
                "cell volume {cell_volume} must be positive"
            )));
        }
        let positive_mass = values.iter().filter(|&&v| v > 0.0).sum::<f64>() * cell_volume;
        Ok(Self {
            values,
            cell_volume,
            positive_mass,
        })
    }

    pub fn constant(domain: &Domain, value: f64) -> Result<Self> {
        Self::new(vec![value; domain.num_cells()], domain.cell_volume())
    }

    /// `below` where the cell center's `axis` coordinate is below `threshold`,
    /// `above` elsewhere.
    pub fn step(
        domain: &Domain,
        axis: usize,
        threshold: f64,
        below: f64,
        above: f64,
    ) -> Result<Self> {
        if axis >= domain.dim() {
            return Err(Error::Weight(format!(
                "step axis {axis} exceeds dimension {}",
                domain.dim()
            )));
        }
        let values = domain
            .cell_centers()
            .iter()
            .map(|x| if x[axis] < threshold { below } else { above })
            .collect();
        Self::new(values, domain.cell_volume())
    }

    /// `c·|x - x0|^{-α} + offset` at cell centers.
    ///
    /// Requires `α < p·s`, the integrability condition for `m ∈ L^{N/(ps)}`.
    pub fn singular(
        domain: &Domain,
        s: f64,
        p: f64,
        c: f64,
        center: &[f64],
        alpha: f64,
        offset: f64,
    ) -> Result<Self> {
        if center.len() != domain.dim() {
            return Err(Error::Weight(format!(
                "singular center has {} coordinates, domain has dimension {}",
                center.len(),
                domain.dim()
            )));
        }
        if !(alpha >= 0.0 && alpha < p * s) {
            return Err(Error::Weight(format!(
                "singular exponent alpha = {alpha} violates the integrability guard \
                 0 <= alpha < p·s = {} (m must lie in L^(N/ps))",
                p * s
            )));
        }
        let values = domain
            .cell_centers()
            .iter()
            .map(|x| {
                let r = x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                c * r.powf(-alpha) + offset
            })
            .collect();
        Self::new(values, domain.cell_volume())
    }

    /// Reads one value per interior cell, in enumeration order. The value is
    /// the last field of each record; a non-numeric first record is taken as
    /// a header.
    pub fn from_csv(domain: &Domain, path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = rec.iter().next_back().unwrap_or("");
            match field.parse::<f64>() {
                Ok(v) => values.push(v),
                Err(_) if row == 0 => continue,
                Err(_) => {
                    return Err(Error::Weight(format!(
                        "row {row}: `{field}` is not a number"
                    )))
                }
            }
        }
        if values.len() != domain.num_cells() {
            return Err(Error::SizeMismatch {
                expected: domain.num_cells(),
                got: values.len(),
            });
        }
        Self::new(values, domain.cell_volume())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// `Σ_{m_i > 0} m_i · vol`.
    pub fn positive_mass(&self) -> f64 {
        self.positive_mass
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(
            self.values.iter().map(|v| t * v).collect(),
            self.cell_volume,
        )
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &WeightField) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }

    /// Pointwise `self < other`.
    pub fn lt(&self, other: &WeightField) -> bool {
        self.values.len() == other.values.len()
            && self.values.iter().zip(&other.values).all(|(a, b)| a < b)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}

/// `|t|^p`.
#[inline]
pub(crate) fn pow_abs(t: f64, p: f64) -> f64 {
    if p == 2.0 {
        t * t
    } else if p == 3.0 {
        let a = t.abs();
        a * a * a
    } else if p == 1.5 {
        let a = t.abs();
        a * a.sqrt()
    } else {
        t.abs().powf(p)
    }
}

/// `|t|^{p-2} t`, continued by 0 at `t = 0`.
#[inline]
pub(crate) fn signed_pow(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if p == 2.0 {
        t
    } else if p == 3.0 {
        t.abs() * t
    } else if p == 1.5 {
        t / t.abs().sqrt()
    } else {
        t.abs().powf(p - 2.0) * t
    }
}

/// `Φ(u) = Σ_{i≠j} w_ij |u_i - u_j|^p + Σ_i k_i |u_i|^p · vol`.
pub fn gagliardo_energy(kernel: &FractionalKernel, p: f64, u: &GridFunction) -> Result<f64> {
    let n = kernel.num_cells();
    check_len(n, u.len())?;
    let vol = kernel.cell_volume();
    let ext = kernel.exterior_coeff();
    let mut pairs = 0.0;
    for i in 0..n {
        let row = kernel.row(i);
        let ui = u[i];
        let mut acc = 0.0;
        for j in i + 1..n {
            acc += row[j] * pow_abs(ui - u[j], p);
        }
        pairs += acc;
    }
    let tail: f64 = (0..n).map(|i| ext[i] * pow_abs(u[i], p)).sum::<f64>() * vol;
    Ok(2.0 * pairs + tail)
}

/// Gradient of [`gagliardo_energy`]:
/// `2p Σ_{j≠i} w_ij |u_i-u_j|^{p-2}(u_i-u_j) + p k_i |u_i|^{p-2} u_i · vol`.
pub fn gagliardo_gradient(
    kernel: &FractionalKernel,
    p: f64,
    u: &GridFunction,
) -> Result<GridFunction> {
    let n = kernel.num_cells();
    check_len(n, u.len())?;
    if p <= 1.0 {
        return Err(Error::Parameter(format!("gradient needs p > 1, got {p}")));
    }
    let vol = kernel.cell_volume();
    let ext = kernel.exterior_coeff();
    let mut g = vec![0.0; n];
    for i in 0..n {
        let row = kernel.row(i);
        let ui = u[i];
        let mut gi = 0.0;
        for j in i + 1..n {
            let t = row[j] * signed_pow(ui - u[j], p);
            gi += t;
            g[j] -= t;
        }
        g[i] += gi;
    }
    for i in 0..n {
        g[i] = 2.0 * p * g[i] + p * ext[i] * signed_pow(u[i], p) * vol;
    }
    Ok(GridFunction(g))
}

/// `Ψ_m(u) = Σ_i m_i |u_i|^p · vol`.
pub fn weighted_lp_energy(weight: &WeightField, p: f64, u: &GridFunction) -> Result<f64> {
    check_len(weight.len(), u.len())?;
    let sum: f64 = weight
        .values()
        .iter()
        .zip(u.iter())
        .map(|(m, v)| m * pow_abs(*v, p))
        .sum();
    Ok(sum * weight.cell_volume())
}

/// `p · m_i |u_i|^{p-2} u_i · vol`.
pub fn weighted_lp_gradient(
    weight: &WeightField,
    p: f64,
    u: &GridFunction,
) -> Result<GridFunction> {
    check_len(weight.len(), u.len())?;
    if p <= 1.0 {
        return Err(Error::Parameter(format!("gradient needs p > 1, got {p}")));
    }
    let vol = weight.cell_volume();
    Ok(GridFunction(
        weight
            .values()
            .iter()
            .zip(u.iter())
            .map(|(m, v)| p * m * signed_pow(*v, p) * vol)
            .collect(),
    ))
}

/// `‖Φ'(u) - λ Ψ'_m(u)‖ / ‖Φ'(u)‖` in the Euclidean norm.
pub fn residual_norm(
    kernel: &FractionalKernel,
    weight: &WeightField,
    p: f64,
    lambda: f64,
    u: &GridFunction,
) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let gphi = gagliardo_gradient(kernel, p, u)?;
    let gpsi = weighted_lp_gradient(weight, p, u)?;
    let denom = gphi.norm();
    let num = gphi.add_scaled(-lambda, &gpsi).norm();
    Ok(num / denom)
}
