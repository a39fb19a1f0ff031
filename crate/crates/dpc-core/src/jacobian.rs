//! Sensitivity of the chain output to the control signals.
//!
//! For `S_out = M_m ⋯ M_1 S_in` with `M_i = R(r̂_i, g_i φ_i)`, differentiating
//! a single rotation gives `∂M_i/∂θ_i = K_i M_i` (with `K_i` the cross-product
//! matrix of `r̂_i`), so the `i`-th column of the 3×m output Jacobian is
//!
//! ```text
//! J_i = g_i · (M_m ⋯ M_{i+1}) (r̂_i × S⁽ⁱ⁾),
//! ```
//!
//! where `S⁽ⁱ⁾` is the state after stage `i`. Each column is the image under
//! a rotation of a vector orthogonal to `S⁽ⁱ⁾`, hence orthogonal to `S_out`;
//! the Jacobian therefore has rank at most 2 and `sqrt(det(J Jᵀ))` vanishes
//! identically for every chain and operating point.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3, Vector4};

use crate::error::Error;
use crate::stokes::{ControlVector, DpcChain, StokesVector};
use crate::Result;

/// Default relative rank threshold: singular values at or below
/// `DEFAULT_RANK_TOLERANCE × σ_max` are treated as zero.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-9;

/// Default central-difference step for [`fd_jacobian`].
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// The 3×m Jacobian `∂S_out/∂φ`; column `i` corresponds to stage `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix(DMatrix<f64>);

impl JacobianMatrix {
    /// Builds a Jacobian from its columns (one per stage, at least one).
    pub fn from_columns(cols: &[Vector3<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::EmptyChain);
        }
        let mut m = DMatrix::zeros(3, cols.len());
        for (i, c) in cols.iter().enumerate() {
            m.set_column(i, c);
        }
        Ok(Self(m))
    }

    /// Wraps an explicit 3×m matrix.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != 3 {
            return Err(Error::LengthMismatch {
                expected: 3,
                got: m.nrows(),
            });
        }
        if m.ncols() == 0 {
            return Err(Error::EmptyChain);
        }
        Ok(Self(m))
    }

    /// Number of stages (columns) `m`.
    pub fn stage_count(&self) -> usize {
        self.0.ncols()
    }

    /// Column `i` as a 3-vector.
    pub fn column(&self, i: usize) -> Vector3<f64> {
        Vector3::from_column_slice(self.0.column(i).as_slice())
    }

    /// The underlying 3×m matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Evaluates the analytic Jacobian at `(phi, s_in)`.
///
/// Runs one forward pass, then a backward sweep accumulating the suffix
/// product `M_m ⋯ M_{i+1}` while emitting `g_i · suffix · (r̂_i × S⁽ⁱ⁾)` for
/// each stage, so the cost is linear in the stage count.
pub fn analytic_jacobian(
    chain: &DpcChain,
    phi: &ControlVector,
    s_in: &StokesVector,
) -> Result<JacobianMatrix> {
    let pass = chain.forward(phi, s_in)?;
    let m = chain.len();
    let mut cols = vec![Vector3::zeros(); m];
    let mut suffix: Matrix3<f64> = Matrix3::identity();
    for i in (0..m).rev() {
        let stage = &chain.stages()[i];
        let s_i = pass.after_stage()[i].vector();
        cols[i] = suffix * stage.axis().vector().cross(&s_i) * stage.gain();
        suffix *= stage.rotation(phi[i]).matrix();
    }
    JacobianMatrix::from_columns(&cols)
}

/// Central-difference Jacobian: column `i` is
/// `(S_out(φ + h e_i) − S_out(φ − h e_i)) / 2h`.
///
/// Used as an independent cross-check of [`analytic_jacobian`]; `step` must
/// be positive and finite.
pub fn fd_jacobian(
    chain: &DpcChain,
    phi: &ControlVector,
    s_in: &StokesVector,
    step: f64,
) -> Result<JacobianMatrix> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let m = chain.len();
    if phi.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: phi.len(),
        });
    }
    let mut cols = Vec::with_capacity(m);
    for i in 0..m {
        let mut hi = phi.to_vec();
        let mut lo = hi.clone();
        hi[i] += step;
        lo[i] -= step;
        let out_hi = chain
            .forward(&ControlVector::from_vec(hi), s_in)?
            .output()
            .vector();
        let out_lo = chain
            .forward(&ControlVector::from_vec(lo), s_in)?
            .output()
            .vector();
        cols.push((out_hi - out_lo) / (2.0 * step));
    }
    JacobianMatrix::from_columns(&cols)
}

/// Spectral diagnostics of a Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianDiagnostics {
    /// Singular values in descending order (`min(3, m)` of them).
    pub singular_values: Vec<f64>,
    /// Count of singular values above `rank_tolerance × σ_max`.
    pub numerical_rank: usize,
    /// `sqrt(det(J Jᵀ))`: the product of the three singular values when
    /// `m ≥ 3`, and exactly 0 when `m < 3` (J Jᵀ is then rank deficient).
    pub manipulability: f64,
}

/// Computes singular values, numerical rank, and manipulability.
pub fn diagnostics(j: &JacobianMatrix, rank_tolerance: f64) -> Result<JacobianDiagnostics> {
    check_rank_tolerance(rank_tolerance)?;
    let sv = crate::svd::jacobi_svd(j.matrix()).sigma;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let threshold = rank_tolerance * sigma_max;
    let numerical_rank = sv.iter().filter(|&&s| s > threshold).count();
    let manipulability = if j.stage_count() >= 3 {
        sv.iter().product()
    } else {
        0.0
    };
    Ok(JacobianDiagnostics {
        singular_values: sv,
        numerical_rank,
        manipulability,
    })
}

fn check_rank_tolerance(tol: f64) -> Result<()> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "rank tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// An orthonormal basis of the null space of `j` (any k×m system), returned
/// as an m×(m − rank) matrix `N` with `j · N ≈ 0`.
///
/// The basis is read off the full right factor of the decomposition: the
/// trailing columns, beyond the numerical rank, span the orthogonal
/// complement of the row space and are exactly orthonormal by construction.
pub fn null_space_basis(j: &DMatrix<f64>, rank_tolerance: f64) -> Result<DMatrix<f64>> {
    check_rank_tolerance(rank_tolerance)?;
    let m = j.ncols();
    if m == 0 || j.nrows() == 0 {
        return Err(Error::LengthMismatch {
            expected: 1,
            got: 0,
        });
    }
    let svd = crate::svd::jacobi_svd(j);
    let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
    let threshold = rank_tolerance * sigma_max;
    let rank = svd.sigma.iter().filter(|&&s| s > threshold).count();
    Ok(svd.v.columns(rank, m - rank).into_owned())
}

/// The signed-minor null vector of a 3×4 Jacobian:
/// `Δ_i = (−1)^{i+1} det(J with column i removed)` (1-based `i`).
///
/// This is the generalized cross product of the three rows, so `J Δ = 0`
/// always; for chain Jacobians (rank ≤ 2) every 3×3 minor vanishes and the
/// vector itself is numerically zero — a useful rank witness.
pub fn minor_null_vector(j: &JacobianMatrix) -> Result<Vector4<f64>> {
    if j.stage_count() != 4 {
        return Err(Error::InvalidConfig(format!(
            "minor-based null vector needs a 3x4 Jacobian, got 3x{}",
            j.stage_count()
        )));
    }
    let mut delta = Vector4::zeros();
    for skip in 0..4 {
        let mut cols = Vec::with_capacity(3);
        for c in 0..4 {
            if c != skip {
                cols.push(j.column(c));
            }
        }
        let minor = Matrix3::from_columns(&cols);
        let sign = if skip % 2 == 0 { 1.0 } else { -1.0 };
        delta[skip] = sign * minor.determinant();
    }
    Ok(delta)
}

/// A selection of output rows defining a reduced control task.
///
/// Rows are 1-based coordinates of Stokes space (1 → s₁, 2 → s₂, 3 → s₃),
/// stored sorted and duplicate-free so the projected system keeps the row
/// order of the full Jacobian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskProjection {
    rows: Vec<usize>,
}

impl TaskProjection {
    /// The full three-row task.
    pub fn full() -> Self {
        Self {
            rows: vec![1, 2, 3],
        }
    }

    /// Builds a projection from 1-based row indices; the set must be
    /// nonempty, within `{1, 2, 3}`, and free of duplicates.
    pub fn new(rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidProjection(
                "at least one output row must be selected".into(),
            ));
        }
        let mut sorted = rows.to_vec();
        sorted.sort_unstable();
        for &r in &sorted {
            if !(1..=3).contains(&r) {
                return Err(Error::InvalidProjection(format!(
                    "row index {r} out of range 1..=3"
                )));
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidProjection("duplicate row index".into()));
        }
        Ok(Self { rows: sorted })
    }

    /// The selected 1-based rows, ascending.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Number of selected rows `k`.
    pub fn dimension(&self) -> usize {
        self.rows.len()
    }

    pub fn is_full(&self) -> bool {
        self.rows.len() == 3
    }
}

/// Restricts the Jacobian and an output-error vector to the task's rows,
/// yielding the k×m system actually handed to a solver.
pub fn project_task(
    j: &JacobianMatrix,
    error: &Vector3<f64>,
    task: &TaskProjection,
) -> (DMatrix<f64>, DVector<f64>) {
    let k = task.dimension();
    let m = j.stage_count();
    let mut jt = DMatrix::zeros(k, m);
    let mut et = DVector::zeros(k);
    for (out_row, &r) in task.rows().iter().enumerate() {
        for c in 0..m {
            jt[(out_row, c)] = j.matrix()[(r - 1, c)];
        }
        et[out_row] = error[r - 1];
    }
    (jt, et)
}
