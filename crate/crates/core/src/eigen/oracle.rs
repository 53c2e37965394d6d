use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{check_sizes, EigenPair};
use crate::energy::{residual_norm, weighted_lp_energy, GridFunction, WeightField};
use crate::error::{Error, Result};
use crate::kernel::FractionalKernel;

/// Residual below which an oracle pair counts as exact.
const ORACLE_TOL: f64 = 1e-10;
/// Eigenvalues `μ` of the reduced pencil below this fraction of the largest
/// `|μ|` are treated as zero.
const MU_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpectrum {
    /// Ascending positive eigenvalues with `Ψ_m`-normalized eigenfunctions.
    pub pairs: Vec<EigenPair>,
    /// Fewer positive eigenvalues exist than were requested.
    pub truncated: bool,
}

/// Matrix of the quadratic form `Φ` at `p = 2`: `2(D - W) + diag(k·vol)`.
fn stiffness(kernel: &FractionalKernel) -> DMatrix<f64> {
    let vol = kernel.cell_volume();
    let diag: Vec<f64> = kernel.exterior_coeff().iter().map(|k| k * vol).collect();
    weighted_laplacian(kernel, |_, _| 1.0, &diag)
}

/// `2(D - W) + diag(extra)` for the pair weights `w_ij · scale(i, j)`.
pub(crate) fn weighted_laplacian(
    kernel: &FractionalKernel,
    scale: impl Fn(usize, usize) -> f64,
    extra: &[f64],
) -> DMatrix<f64> {
    let n = kernel.num_cells();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let row = kernel.row(i);
        for j in i + 1..n {
            let w = 2.0 * row[j] * scale(i, j);
            a[(i, j)] = -w;
            a[(j, i)] = -w;
            a[(i, i)] += w;
            a[(j, j)] += w;
        }
        a[(i, i)] += extra[i];
    }
    a
}

/// Positive eigenvalues `λ` of the pencil `A x = λ diag(d) x`, ascending, for
/// symmetric positive definite `A`.
///
/// `A = L Lᵀ` reduces the pencil to the symmetric matrix `L⁻¹ diag(d) L⁻ᵀ`,
/// whose positive eigenvalues `μ` give `λ = 1/μ`.
pub(crate) fn positive_pencil(a: DMatrix<f64>, d: &[f64]) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = d.len();
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let mut c = DMatrix::<f64>::from_diagonal(&DVector::from_column_slice(d));
    // C = L⁻¹ D L⁻ᵀ, built as two triangular solves
    if !l.solve_lower_triangular_mut(&mut c) {
        return Err(Error::NotPositiveDefinite);
    }
    let mut ct = c.transpose();
    if !l.solve_lower_triangular_mut(&mut ct) {
        return Err(Error::NotPositiveDefinite);
    }
    let c = (&ct + ct.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);

    let mu_max = eig.eigenvalues.iter().fold(0.0f64, |a, &m| a.max(m.abs()));
    let mut order: Vec<usize> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > MU_CUTOFF * mu_max)
        .collect();
    // largest μ first means smallest λ first
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let lt = l.transpose();
    order
        .into_iter()
        .map(|k| {
            let y = eig.eigenvectors.column(k).into_owned();
            let x = lt
                .solve_upper_triangular(&y)
                .ok_or(Error::NotPositiveDefinite)?;
            Ok((1.0 / eig.eigenvalues[k], x.iter().copied().collect()))
        })
        .collect()
}

/// Exact positive spectrum of the linear pencil `A u = λ M u`, where `A` is the
/// `p = 2` energy matrix and `M = diag(m·vol)` may be indefinite.
pub fn p2_oracle_spectrum(
    kernel: &FractionalKernel,
    weight: &WeightField,
    count: usize,
) -> Result<OracleSpectrum> {
    if kernel.p() != 2.0 {
        return Err(Error::Parameter(format!(
            "the exact solver needs a kernel assembled with p = 2, got p = {}",
            kernel.p()
        )));
    }
    if count == 0 {
        return Err(Error::Parameter(
            "eigenvalue count must be at least 1".into(),
        ));
    }
    check_sizes(kernel, weight)?;

    let d: Vec<f64> = weight
        .values()
        .iter()
        .map(|&m| m * weight.cell_volume())
        .collect();
    let mut modes = positive_pencil(stiffness(kernel), &d)?;
    let truncated = modes.len() < count;
    modes.truncate(count);

    let mut pairs = Vec::with_capacity(modes.len());
    for (lambda, x) in modes {
        let u = GridFunction::new(x);
        let psi = weighted_lp_energy(weight, 2.0, &u)?;
        let u = u.scaled(psi.powf(-0.5)).with_sign_convention();
        let residual = residual_norm(kernel, weight, 2.0, lambda, &u)?;
        pairs.push(EigenPair {
            lambda,
            u,
            residual,
            iterations: 0,
            converged: residual < ORACLE_TOL,
        });
    }
    Ok(OracleSpectrum { pairs, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};
    use crate::energy::gagliardo_energy;
    use crate::kernel::assemble_kernel;

    #[test]
    fn constant_weight_spectrum() {
        let d = build_grid(&DomainSpec::interval(0.0, 1.0, 32)).unwrap();
        let k = assemble_kernel(&d, 0.4, 2.0).unwrap();
        let m = WeightField::constant(&d, 1.0).unwrap();
        let spec = p2_oracle_spectrum(&k, &m, 5).unwrap();
        assert!(!spec.truncated);
        assert_eq!(spec.pairs.len(), 5);
        for w in spec.pairs.windows(2) {
            assert!(w[0].lambda < w[1].lambda);
        }
        for e in &spec.pairs {
            assert!(e.lambda > 0.0);
            assert!(e.residual < 1e-10, "residual {:e}", e.residual);
            let phi = gagliardo_energy(&k, 2.0, &e.u).unwrap();
            assert!((phi - e.lambda).abs() < 1e-10 * e.lambda);
        }
        assert!(spec.pairs[0].u.iter().all(|&v| v > 0.0));
        assert!(spec.pairs[1].u.is_nodal());
    }

    #[test]
    fn indefinite_weight_is_truncated() {
        let d = build_grid(&DomainSpec::interval(0.0, 1.0, 16)).unwrap();
        let k = assemble_kernel(&d, 0.4, 2.0).unwrap();
        let m = WeightField::step(&d, 0, 0.5, 1.0, -1.0).unwrap();
        let spec = p2_oracle_spectrum(&k, &m, 16).unwrap();
        assert!(spec.truncated);
        assert_eq!(spec.pairs.len(), 8);
        assert!(spec.pairs[0].u.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn rejects_other_exponents() {
        let d = build_grid(&DomainSpec::interval(0.0, 1.0, 8)).unwrap();
        let k = assemble_kernel(&d, 0.3, 3.0).unwrap();
        let m = WeightField::constant(&d, 1.0).unwrap();
        assert!(p2_oracle_spectrum(&k, &m, 1).is_err());
    }
}
