//! Spectral abscissa, Hurwitz tests and the continuous Lyapunov equation
//! `Acᵀ P + P Ac = -Q`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::blockmat::{expand_scaling_diag, BlockScaling, PartitionedMatrix};
use crate::error::{Error, Result};

/// Default Hurwitz margin used by every caller that does not pass one.
pub const DEFAULT_HURWITZ_TOL: f64 = 1e-9;

/// Residual bound relative to `‖Q‖_F` expected of well-conditioned solves.
pub const LYAPUNOV_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Largest real part over all eigenvalues.
    pub abscissa: f64,
    /// Distance of the abscissa below zero (positive when Hurwitz).
    pub margin: f64,
    /// Eigenvalues as `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
}

impl SpectralReport {
    pub fn is_hurwitz(&self, tol: f64) -> bool {
        self.abscissa < -tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSolution {
    pub p: DMatrix<f64>,
    /// `‖Acᵀ P + P Ac + Q‖_F`
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormKind {
    #[default]
    #[serde(rename = "spectral")]
    Spectral,
    #[serde(rename = "one-norm")]
    One,
}

impl NormKind {
    pub fn eval(self, m: &DMatrix<f64>) -> f64 {
        match self {
            NormKind::Spectral => spectral_norm(m),
            NormKind::One => one_norm(m),
        }
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Induced 1-norm: largest absolute column sum.
pub fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn lambda_min_sym(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().min()
}

pub fn lambda_max_sym(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().max()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            context: "eigenvalues of non-square matrix",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 10_000 * m.nrows())
        .ok_or(Error::EigenFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<SpectralReport> {
    let eigs = eigenvalues(m)?;
    let abscissa = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectralReport {
        abscissa,
        margin: -abscissa,
        eigenvalues: eigs.iter().map(|z| [z.re, z.im]).collect(),
    })
}

pub fn is_hurwitz(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(spectral_abscissa(m)?.is_hurwitz(tol))
}

/// Spectral abscissa of `D A`, evaluated on the similar matrix
/// `D^{1/2} A D^{1/2}` which stays balanced under extreme scalings.
pub fn scaled_abscissa(a: &PartitionedMatrix, d: &BlockScaling) -> Result<f64> {
    let root = expand_scaling_diag(d, a.partition())?.map(f64::sqrt);
    let n = a.dim();
    let m = DMatrix::from_fn(n, n, |i, j| root[i] * a.data()[(i, j)] * root[j]);
    Ok(spectral_abscissa(&m)?.abscissa)
}

/// Hurwitz test for `D A` with a margin proportional to the smallest scaling
/// entry, so the verdict is invariant under `d -> c d`.
pub fn is_hurwitz_scaled(a: &PartitionedMatrix, d: &BlockScaling, tol: f64) -> Result<bool> {
    Ok(scaled_abscissa(a, d)? < -tol * d.min())
}

/// Solves `Acᵀ P + P Ac = -Q` through the vectorized Kronecker system,
/// with one step of iterative refinement.
pub fn solve_lyapunov(ac: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LyapunovSolution> {
    let n = ac.nrows();
    if ac.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "Lyapunov matrix must be square",
            expected: n,
            got: ac.ncols(),
        });
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "Q dimension vs A",
            expected: n,
            got: q.nrows(),
        });
    }
    if ac.iter().chain(q.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let at = ac.transpose();
    let eye = DMatrix::<f64>::identity(n, n);
    // column-major vec: vec(AᵀP) = (I ⊗ Aᵀ) vec P, vec(PA) = (Aᵀ ⊗ I) vec P
    let kron = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());

    let lu = kron.clone().full_piv_lu();
    let diag = lu.u().diagonal().map(f64::abs);
    let (pmax, pmin) = (diag.max(), diag.min());
    if !(pmin > pmax * 1e-14 * (n * n) as f64) {
        return Err(Error::NoUniqueSolution);
    }
    let mut x = lu.solve(&rhs).ok_or(Error::NoUniqueSolution)?;
    let r = &rhs - &kron * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let p = DMatrix::from_column_slice(n, n, x.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    let residual_norm = lyapunov_residual(ac, &p, q);
    Ok(LyapunovSolution { p, residual_norm })
}

/// `‖Acᵀ P + P Ac + Q‖_F`
pub fn lyapunov_residual(ac: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (ac.transpose() * p + p * ac + q).norm()
}

/// Solves `Aᵀ D P + P D A = -Q` for `D = expand_scaling(d)`, after checking
/// that `D A` is Hurwitz.
pub fn solve_scaled_lyapunov(
    a: &PartitionedMatrix,
    d: &BlockScaling,
    q: &DMatrix<f64>,
) -> Result<LyapunovSolution> {
    solve_scaled_lyapunov_tol(a, d, q, DEFAULT_HURWITZ_TOL)
}

pub fn solve_scaled_lyapunov_tol(
    a: &PartitionedMatrix,
    d: &BlockScaling,
    q: &DMatrix<f64>,
    tol: f64,
) -> Result<LyapunovSolution> {
    let abscissa = scaled_abscissa(a, d)?;
    if !(abscissa < -tol * d.min()) {
        return Err(Error::NotStabilized { abscissa });
    }
    let diag = expand_scaling_diag(d, a.partition())?;
    let da = DMatrix::from_fn(a.dim(), a.dim(), |i, j| diag[i] * a.data()[(i, j)]);
    solve_lyapunov(&da, q)
}

/// `‖P_D D‖` for the scaled Lyapunov solution.
pub fn scaled_product_norm(
    a: &PartitionedMatrix,
    d: &BlockScaling,
    q: &DMatrix<f64>,
    norm: NormKind,
    tol: f64,
) -> Result<f64> {
    let sol = solve_scaled_lyapunov_tol(a, d, q, tol)?;
    let diag = expand_scaling_diag(d, a.partition())?;
    let pd = DMatrix::from_fn(a.dim(), a.dim(), |i, j| sol.p[(i, j)] * diag[j]);
    Ok(norm.eval(&pd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockmat::{expand_scaling, Partition};

    fn a_eps(eps: f64) -> PartitionedMatrix {
        PartitionedMatrix::from_rows(&[vec![eps, 1.0], vec![-1.0, -2.0]], vec![1, 1]).unwrap()
    }

    fn plant_a() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            3,
            3,
            &[-10.0, 0.0, 10.0, -100.0, -10.0, 100.0, 100.0, 10.0, -110.0],
        )
    }

    #[test]
    fn abscissa_of_negative_identity() {
        let r = spectral_abscissa(&(-DMatrix::<f64>::identity(3, 3))).unwrap();
        assert!((r.abscissa + 1.0).abs() < 1e-14);
        assert_eq!(r.eigenvalues.len(), 3);
    }

    #[test]
    fn example_plant_is_stable() {
        assert!(spectral_abscissa(&plant_a()).unwrap().abscissa < 0.0);
    }

    #[test]
    fn strongly_scaled_edge_matrix_is_unstable() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![300.0, 1.0]));
        let m = d * a_eps(0.01).data();
        assert!((m.trace() - 1.0).abs() < 1e-12);
        assert!(spectral_abscissa(&m).unwrap().abscissa > 0.0);
    }

    #[test]
    fn hurwitz_cases() {
        assert!(is_hurwitz(&(-DMatrix::<f64>::identity(2, 2)), DEFAULT_HURWITZ_TOL).unwrap());
        assert!(!is_hurwitz(&DMatrix::<f64>::zeros(2, 2), DEFAULT_HURWITZ_TOL).unwrap());
        assert!(is_hurwitz(a_eps(0.0).data(), DEFAULT_HURWITZ_TOL).unwrap());
        let mut bad = DMatrix::<f64>::identity(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert_eq!(spectral_abscissa(&bad), Err(Error::NonFinite));
    }

    #[test]
    fn scaled_abscissa_matches_direct_product() {
        let a = a_eps(-1.0);
        let d = BlockScaling::new(vec![3.0, 0.2]).unwrap();
        let direct = expand_scaling(&d, a.partition()).unwrap() * a.data();
        let s = scaled_abscissa(&a, &d).unwrap();
        assert!((s - spectral_abscissa(&direct).unwrap().abscissa).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_negative_identity() {
        let n = 4;
        let sol = solve_lyapunov(
            &(-DMatrix::<f64>::identity(n, n)),
            &(DMatrix::identity(n, n) * 2.0),
        )
        .unwrap();
        assert!((&sol.p - DMatrix::<f64>::identity(n, n)).norm() < 1e-14);
        assert!(sol.residual_norm < 1e-14);
    }

    #[test]
    fn lyapunov_singular_pairing() {
        // eigenvalues 1 and -1 sum to zero
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(
            solve_lyapunov(&a, &DMatrix::identity(2, 2)),
            Err(Error::NoUniqueSolution)
        );
    }

    /// Closed form of P_D for the 2x2 edge family with Q = I.
    fn closed_form_pd(d1: f64, d2: f64, eps: f64) -> DMatrix<f64> {
        let f = d1 * eps * (4.0 * eps - 2.0) + d2 * (4.0 - 8.0 * eps);
        DMatrix::from_row_slice(
            2,
            2,
            &[
                (d1 * (1.0 - 2.0 * eps) + 5.0 * d2) / d1,
                eps + 2.0,
                eps + 2.0,
                (d1 * (eps * eps + 1.0) + d2 * (1.0 - 2.0 * eps)) / d2,
            ],
        ) / f
    }

    #[test]
    fn scaled_solution_matches_closed_form() {
        for &eps in &[0.0, -1.0, -0.3] {
            for &(d1, d2) in &[(1.0, 1.0), (10.0, 1.0), (0.1, 3.0)] {
                let d = BlockScaling::new(vec![d1, d2]).unwrap();
                let sol = solve_scaled_lyapunov(&a_eps(eps), &d, &DMatrix::identity(2, 2)).unwrap();
                let expect = closed_form_pd(d1, d2, eps);
                assert!(
                    (&sol.p - &expect).norm() < 1e-12 * expect.norm(),
                    "eps={eps} d=({d1},{d2})"
                );
            }
        }
    }

    #[test]
    fn scaled_one_norm_at_identity_scaling() {
        let v = scaled_product_norm(
            &a_eps(-1.0),
            &BlockScaling::ones(2),
            &DMatrix::identity(2, 2),
            NormKind::One,
            DEFAULT_HURWITZ_TOL,
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        for &d1 in &[1.0, 10.0, 100.0] {
            let d = BlockScaling::new(vec![d1, 1.0]).unwrap();
            let v = scaled_product_norm(
                &a_eps(0.0),
                &d,
                &DMatrix::identity(2, 2),
                NormKind::One,
                DEFAULT_HURWITZ_TOL,
            )
            .unwrap();
            assert!(((v - (3.0 * d1 + 5.0) / 4.0) / v).abs() < 1e-12);
        }
    }

    #[test]
    fn unstabilized_scaling_is_rejected() {
        let d = BlockScaling::new(vec![1000.0, 1.0]).unwrap();
        let err = solve_scaled_lyapunov(&a_eps(0.01), &d, &DMatrix::identity(2, 2)).unwrap_err();
        match err {
            Error::NotStabilized { abscissa } => assert!(abscissa > 0.0),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn norms() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -4.0, 2.0, 1.0]);
        assert_eq!(one_norm(&m), 5.0);
        let s = spectral_norm(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            3.0, -7.0,
        ])));
        assert!((s - 7.0).abs() < 1e-14);
        assert_eq!(Partition::scalar(2).unwrap().total(), 2);
    }
}
