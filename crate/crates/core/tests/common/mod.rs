#![allow(dead_code)]

use fracp::domain::build_grid;
use fracp::{assemble_kernel, Domain, DomainSpec, FractionalKernel, GridFunction, WeightField};
use nalgebra::{DMatrix, DVector};

pub fn interval(n: usize) -> Domain {
    build_grid(&DomainSpec::interval(0.0, 1.0, n)).unwrap()
}

/// The largest `s` used for exponent `p`: 0.4 where `0.4·p < 1`, else 0.3.
pub fn s_for(p: f64) -> f64 {
    if 0.4 * p < 1.0 {
        0.4
    } else {
        0.3
    }
}

pub fn kernel(d: &Domain, p: f64) -> FractionalKernel {
    assemble_kernel(d, s_for(p), p).unwrap()
}

/// Constant 1, a sign-changing step, and a singular weight with
/// `α = 0.3·ps` centered inside the domain.
pub fn standard_weights(d: &Domain, s: f64, p: f64) -> Vec<(&'static str, WeightField)> {
    vec![
        ("constant", WeightField::constant(d, 1.0).unwrap()),
        ("step", WeightField::step(d, 0, 0.6, 1.0, -0.5).unwrap()),
        (
            "singular",
            WeightField::singular(d, s, p, 1.0, &[0.3], 0.3 * p * s, 0.0).unwrap(),
        ),
    ]
}

pub fn from_fn(d: &Domain, f: impl Fn(f64) -> f64) -> WeightField {
    let v = d.cell_centers().iter().map(|x| f(x[0])).collect();
    WeightField::new(v, d.cell_volume()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `Φ` written directly from the ordered-pair sum, independent of the
/// library's energy code.
pub fn direct_energy(k: &FractionalKernel, p: f64, u: &[f64]) -> f64 {
    let n = u.len();
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pairs += k.weight(i, j) * (u[i] - u[j]).abs().powf(p);
            }
        }
    }
    let tail: f64 = (0..n)
        .map(|i| k.exterior_coeff()[i] * u[i].abs().powf(p))
        .sum();
    pairs + tail * k.cell_volume()
}

/// Dense `p = 2` stiffness `A` with `Φ(u) = uᵀAu`, assembled entrywise.
pub fn dense_stiffness(k: &FractionalKernel) -> DMatrix<f64> {
    let n = k.num_cells();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let off: f64 = (0..n)
                .filter(|&l| l != i)
                .map(|l| k.weight(i, l) + k.weight(l, i))
                .sum();
            off + k.exterior_coeff()[i] * k.cell_volume()
        } else {
            -(k.weight(i, j) + k.weight(j, i))
        }
    })
}

/// `(uᵀAu / uᵀMu, ‖Au - λMu‖ / ‖Au‖)` for the dense `p = 2` pencil.
pub fn dense_rayleigh(k: &FractionalKernel, m: &WeightField, u: &GridFunction) -> (f64, f64) {
    let a = dense_stiffness(k);
    let x = DVector::from_column_slice(u.values());
    let mx = DVector::from_iterator(
        x.len(),
        x.iter()
            .zip(m.values())
            .map(|(v, w)| v * w * m.cell_volume()),
    );
    let ax = &a * &x;
    let lambda = x.dot(&ax) / x.dot(&mx);
    (lambda, (&ax - lambda * &mx).norm() / ax.norm())
}
