//! Rate-control solvers: map an output error `ΔS` (and, for the null-space
//! aware methods, the current control vector `φ`) to a control update `Δφ`.
//!
//! All functions operate on the task-projected system — a k×m matrix and
//! k-vector as produced by [`crate::jacobian::project_task`] — and are pure:
//! no solver mutates its inputs, and failures are reported as typed errors
//! so a control loop can hold its last output instead of stepping on garbage.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::jacobian::{null_space_basis, DEFAULT_RANK_TOLERANCE};
use crate::stokes::ControlVector;
use crate::Result;

/// Default damping / regularization weight `λ`.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// Default null-space step size `μ`.
pub const DEFAULT_MU: f64 = 0.1;

/// The available update rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverMethod {
    /// `Δφ = J⁻¹ ΔS` (square J; fails on singular J — which includes every
    /// full three-row chain Jacobian, since those have rank ≤ 2).
    DirectInverse,
    /// `Δφ = Jᵀ ΔS` (gradient direction; never fails).
    Transpose,
    /// `Δφ = (J + λI)⁻¹ ΔS` (square J).
    Damped,
    /// `Δφ = Jᵀ (J Jᵀ + λI)⁻¹ ΔS` (any shape; λ > 0 keeps it nonsingular).
    RegularizedLs,
    /// `Δφ = J⁺ ΔS` via singular value decomposition (minimum-norm
    /// least-squares solution).
    PseudoInverse,
    /// `Δφ = J⁺ ΔS − μ (I − J⁺J) φ`, optionally gated by a threshold on
    /// `max|φᵢ|`: null-space descent toward small control signals.
    GradientProjection,
    /// Square extended system `[J; Nᵀ] Δφ = [ΔS; −Nᵀφ]` for full-row-rank
    /// k×m tasks with k < m.
    ExtendedJacobian,
}

/// A solver selection plus its numeric parameters.
///
/// `lambda` is used by [`SolverMethod::Damped`] and
/// [`SolverMethod::RegularizedLs`]; `mu` and `nullspace_threshold` by
/// [`SolverMethod::GradientProjection`]; `rank_tolerance` by every method
/// that inspects singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub lambda: f64,
    pub mu: f64,
    pub rank_tolerance: f64,
    /// When set, the gradient-projection null-space term engages only while
    /// `max|φᵢ|` exceeds this bound.
    pub nullspace_threshold: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::PseudoInverse,
            lambda: DEFAULT_LAMBDA,
            mu: DEFAULT_MU,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            nullspace_threshold: None,
        }
    }
}

impl SolverConfig {
    /// A configuration for `method` with default parameters.
    pub fn new(method: SolverMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    /// Checks the parameter ranges: `λ ≥ 0` (strictly positive for the
    /// damped and regularized methods), `0 < μ < 1` for gradient projection,
    /// `rank_tolerance > 0`, and a positive threshold when one is set.
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if matches!(
            self.method,
            SolverMethod::Damped | SolverMethod::RegularizedLs
        ) && self.lambda == 0.0
        {
            return Err(Error::InvalidConfig(
                "lambda must be positive for the damped and regularized methods".into(),
            ));
        }
        if self.method == SolverMethod::GradientProjection && !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mu must lie in (0, 1), got {}",
                self.mu
            )));
        }
        if !self.rank_tolerance.is_finite() || self.rank_tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "rank tolerance must be positive, got {}",
                self.rank_tolerance
            )));
        }
        if let Some(th) = self.nullspace_threshold {
            if !th.is_finite() || th <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "null-space threshold must be positive, got {th}"
                )));
            }
        }
        Ok(())
    }

    /// Runs the configured method on the (task-projected) system.
    ///
    /// `phi` is the full current control vector (length = columns of `j`);
    /// only the null-space aware methods read it.
    pub fn solve(
        &self,
        j: &DMatrix<f64>,
        ds: &DVector<f64>,
        phi: &ControlVector,
    ) -> Result<SolveResult> {
        self.validate()?;
        match self.method {
            SolverMethod::DirectInverse => solve_direct(j, ds, self.rank_tolerance),
            SolverMethod::Transpose => solve_transpose(j, ds),
            SolverMethod::Damped => solve_damped(j, ds, self.lambda),
            SolverMethod::RegularizedLs => solve_regularized(j, ds, self.lambda),
            SolverMethod::PseudoInverse => solve_pinv(j, ds, self.rank_tolerance),
            SolverMethod::GradientProjection => solve_gradient_projection(
                j,
                ds,
                phi,
                self.mu,
                self.rank_tolerance,
                self.nullspace_threshold,
            ),
            SolverMethod::ExtendedJacobian => solve_extended(j, ds, phi, self.rank_tolerance),
        }
    }
}

/// Numerical diagnostics attached to every solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverFlags {
    /// Whether the decomposition found less than full rank (singular values
    /// truncated, or — for exact methods — a singularity detected).
    pub rank_deficient: bool,
    /// Achieved residual `‖J Δφ − ΔS‖` over the task rows.
    pub residual_norm: f64,
    /// Condition number of the matrix actually inverted, when the method
    /// computes one (`σ_max / σ_min` of the kept spectrum).
    pub condition: Option<f64>,
}

/// A control update plus bookkeeping about how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// The update `Δφ`, one entry per chain stage.
    pub delta_phi: ControlVector,
    /// Whether a null-space term contributed to `delta_phi`.
    pub nullspace_active: bool,
    pub flags: SolverFlags,
}

fn check_rhs(j: &DMatrix<f64>, ds: &DVector<f64>) -> Result<()> {
    if ds.len() != j.nrows() {
        return Err(Error::LengthMismatch {
            expected: j.nrows(),
            got: ds.len(),
        });
    }
    Ok(())
}

fn check_square(j: &DMatrix<f64>, context: &'static str) -> Result<()> {
    if j.nrows() != j.ncols() {
        return Err(Error::NotSquare {
            context,
            rows: j.nrows(),
            cols: j.ncols(),
        });
    }
    Ok(())
}

fn check_phi(j: &DMatrix<f64>, phi: &ControlVector) -> Result<()> {
    if phi.len() != j.ncols() {
        return Err(Error::LengthMismatch {
            expected: j.ncols(),
            got: phi.len(),
        });
    }
    Ok(())
}

fn residual_norm(j: &DMatrix<f64>, delta: &DVector<f64>, ds: &DVector<f64>) -> f64 {
    (j * delta - ds).norm()
}

/// `Δφ = J⁻¹ ΔS` for square `J`.
///
/// Singularity is judged at `rank_tolerance` relative to the largest
/// singular value. Every full three-row chain Jacobian is singular by
/// construction (rank ≤ 2), so on those this method always errors.
pub fn solve_direct(
    j: &DMatrix<f64>,
    ds: &DVector<f64>,
    rank_tolerance: f64,
) -> Result<SolveResult> {
    check_square(j, "direct inverse")?;
    check_rhs(j, ds)?;
    let sv = crate::svd::jacobi_svd(j).sigma;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    if sigma_min <= rank_tolerance * sigma_max || sigma_max == 0.0 {
        return Err(Error::Singular {
            context: "direct inverse",
        });
    }
    let delta = j.clone().lu().solve(ds).ok_or(Error::Singular {
        context: "direct inverse",
    })?;
    Ok(SolveResult {
        flags: SolverFlags {
            rank_deficient: false,
            residual_norm: residual_norm(j, &delta, ds),
            condition: Some(sigma_max / sigma_min),
        },
        delta_phi: ControlVector::from_dvector(delta),
        nullspace_active: false,
    })
}

/// `Δφ = Jᵀ ΔS`: steps along the task-space gradient. Never fails.
pub fn solve_transpose(j: &DMatrix<f64>, ds: &DVector<f64>) -> Result<SolveResult> {
    check_rhs(j, ds)?;
    let delta = j.transpose() * ds;
    Ok(SolveResult {
        flags: SolverFlags {
            rank_deficient: false,
            residual_norm: residual_norm(j, &delta, ds),
            condition: None,
        },
        delta_phi: ControlVector::from_dvector(delta),
        nullspace_active: false,
    })
}

/// `Δφ = (J + λI)⁻¹ ΔS` for square `J` and `λ > 0`.
///
/// The additive damping keeps the system solvable at the rank-2 operating
/// points where the plain inverse fails; errors only if `J + λI` itself is
/// singular.
pub fn solve_damped(j: &DMatrix<f64>, ds: &DVector<f64>, lambda: f64) -> Result<SolveResult> {
    check_square(j, "damped inverse")?;
    check_rhs(j, ds)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "damping weight must be positive, got {lambda}"
        )));
    }
    let n = j.nrows();
    let a = j + DMatrix::<f64>::identity(n, n) * lambda;
    let delta = a.lu().solve(ds).ok_or(Error::Singular {
        context: "damped inverse",
    })?;
    Ok(SolveResult {
        flags: SolverFlags {
            rank_deficient: false,
            residual_norm: residual_norm(j, &delta, ds),
            condition: None,
        },
        delta_phi: ControlVector::from_dvector(delta),
        nullspace_active: false,
    })
}

/// `Δφ = Jᵀ (J Jᵀ + λI)⁻¹ ΔS` for any k×m system and `λ > 0`.
///
/// At `λ = 1` this minimizes `‖JΔφ − ΔS‖² + ‖Δφ‖²`; since `J Jᵀ + λI` is
/// symmetric positive definite the solve cannot fail.
pub fn solve_regularized(j: &DMatrix<f64>, ds: &DVector<f64>, lambda: f64) -> Result<SolveResult> {
    check_rhs(j, ds)?;
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "regularization weight must be positive, got {lambda}"
        )));
    }
    let k = j.nrows();
    let gram = j * j.transpose() + DMatrix::<f64>::identity(k, k) * lambda;
    let chol = gram.cholesky().ok_or(Error::Singular {
        context: "regularized least squares",
    })?;
    let delta = j.transpose() * chol.solve(ds);
    Ok(SolveResult {
        flags: SolverFlags {
            rank_deficient: false,
            residual_norm: residual_norm(j, &delta, ds),
            condition: None,
        },
        delta_phi: ControlVector::from_dvector(delta),
        nullspace_active: false,
    })
}

/// The truncated-SVD pieces shared by the pseudo-inverse based methods.
struct PinvParts {
    /// `J⁺` (m×k), with singular values at or below the threshold zeroed.
    pinv: DMatrix<f64>,
    /// `J⁺J` (m×m), the orthogonal projector onto the row space; built only
    /// on request.
    projector: Option<DMatrix<f64>>,
    rank: usize,
    sigma_max: f64,
    sigma_min_kept: f64,
}

impl PinvParts {
    fn compute(j: &DMatrix<f64>, rank_tolerance: f64, want_projector: bool) -> Result<Self> {
        if !rank_tolerance.is_finite() || rank_tolerance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "rank tolerance must be positive, got {rank_tolerance}"
            )));
        }
        let (k, m) = (j.nrows(), j.ncols());
        let svd = crate::svd::jacobi_svd(j);
        let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
        let threshold = rank_tolerance * sigma_max;

        let mut pinv = DMatrix::zeros(m, k);
        let mut projector = want_projector.then(|| DMatrix::zeros(m, m));
        let mut rank = 0;
        let mut sigma_min_kept = f64::INFINITY;
        for (i, &s) in svd.sigma.iter().enumerate() {
            if s <= threshold {
                continue;
            }
            rank += 1;
            sigma_min_kept = sigma_min_kept.min(s);
            let vi = svd.v.column(i);
            let ui = svd.u.column(i);
            pinv += vi * ui.transpose() / s;
            if let Some(p) = projector.as_mut() {
                *p += vi * vi.transpose();
            }
        }
        if rank == 0 {
            sigma_min_kept = 0.0;
        }
        Ok(Self {
            pinv,
            projector,
            rank,
            sigma_max,
            sigma_min_kept,
        })
    }

    fn flags(&self, j: &DMatrix<f64>, delta: &DVector<f64>, ds: &DVector<f64>) -> SolverFlags {
        SolverFlags {
            rank_deficient: self.rank < j.nrows().min(j.ncols()),
            residual_norm: residual_norm(j, delta, ds),
            condition: (self.rank > 0).then(|| self.sigma_max / self.sigma_min_kept),
        }
    }
}

/// `Δφ = J⁺ ΔS` with `J⁺` from the singular value decomposition.
///
/// Singular values at or below `rank_tolerance × σ_max` are treated as zero,
/// so the result is always defined: among all `Δφ` minimizing `‖JΔφ − ΔS‖`
/// it returns the one of minimum norm.
pub fn solve_pinv(j: &DMatrix<f64>, ds: &DVector<f64>, rank_tolerance: f64) -> Result<SolveResult> {
    check_rhs(j, ds)?;
    let parts = PinvParts::compute(j, rank_tolerance, false)?;
    let delta = &parts.pinv * ds;
    Ok(SolveResult {
        flags: parts.flags(j, &delta, ds),
        delta_phi: ControlVector::from_dvector(delta),
        nullspace_active: false,
    })
}

/// `Δφ = J⁺ ΔS − μ (I − J⁺J) φ`: the pseudo-inverse step plus null-space
/// descent on `H(φ) = ‖φ‖²`, which drives the control signals toward the
/// smallest vector realizing the same output.
///
/// When `threshold` is set the null-space term engages only while
/// `max|φᵢ|` exceeds it; otherwise the update is exactly the pseudo-inverse
/// step and `nullspace_active` is false. The null-space term never moves the
/// output to first order, since `J (I − J⁺J) = 0`.
pub fn solve_gradient_projection(
    j: &DMatrix<f64>,
    ds: &DVector<f64>,
    phi: &ControlVector,
    mu: f64,
    rank_tolerance: f64,
    threshold: Option<f64>,
) -> Result<SolveResult> {
    check_rhs(j, ds)?;
    check_phi(j, phi)?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "mu must lie in (0, 1), got {mu}"
        )));
    }
    if let Some(th) = threshold {
        if !th.is_finite() || th <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "null-space threshold must be positive, got {th}"
            )));
        }
    }
    let engage = threshold.is_none_or(|th| phi.max_abs() > th);
    let parts = PinvParts::compute(j, rank_tolerance, engage)?;
    let mut delta = &parts.pinv * ds;
    if engage {
        let p = parts.projector.as_ref().expect("projector was requested");
        let phi_v = phi.as_dvector();
        delta -= (phi_v - p * phi_v) * mu;
    }
    Ok(SolveResult {
        flags: parts.flags(j, &delta, ds),
        delta_phi: ControlVector::from_dvector(delta),
        nullspace_active: engage,
    })
}

/// Solves the square extended system
///
/// ```text
/// [ J_task ]        [ ΔS_task ]
/// [   Nᵀ   ] Δφ  =  [ −Nᵀ φ   ]
/// ```
///
/// where `N` spans the null space of the k×m task Jacobian (k < m, full row
/// rank required). The lower block performs a full Newton step of the
/// norm-reduction objective `H(φ) = ‖φ‖²` inside the null space while the
/// upper block enforces the task exactly.
///
/// Errors with a rank error when `J_task` is not full row rank — which is
/// always the case for the full three-row task on a chain Jacobian, whose
/// rank cannot exceed 2 — and with a singularity error if the assembled
/// square matrix cannot be factored.
pub fn solve_extended(
    j_task: &DMatrix<f64>,
    ds_task: &DVector<f64>,
    phi: &ControlVector,
    rank_tolerance: f64,
) -> Result<SolveResult> {
    let (k, m) = (j_task.nrows(), j_task.ncols());
    if k >= m {
        return Err(Error::InvalidConfig(format!(
            "extended Jacobian needs strictly fewer task rows than stages, got {k}x{m}"
        )));
    }
    check_rhs(j_task, ds_task)?;
    check_phi(j_task, phi)?;
    if !rank_tolerance.is_finite() || rank_tolerance <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "rank tolerance must be positive, got {rank_tolerance}"
        )));
    }

    let sv = crate::svd::jacobi_svd(j_task).sigma;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let rank = sv
        .iter()
        .filter(|&&s| s > rank_tolerance * sigma_max)
        .count();
    if rank < k {
        return Err(Error::RankDeficient { rank, required: k });
    }

    let n = null_space_basis(j_task, rank_tolerance)?;
    debug_assert_eq!(n.ncols(), m - k);

    let mut j_e = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for r in 0..k {
        for c in 0..m {
            j_e[(r, c)] = j_task[(r, c)];
        }
        rhs[r] = ds_task[r];
    }
    let nt_phi = n.transpose() * phi.as_dvector();
    for r in 0..(m - k) {
        for c in 0..m {
            j_e[(k + r, c)] = n[(c, r)];
        }
        rhs[k + r] = -nt_phi[r];
    }

    let sv_e = crate::svd::jacobi_svd(&j_e).sigma;
    let e_max = sv_e.first().copied().unwrap_or(0.0);
    let e_min = sv_e.last().copied().unwrap_or(0.0);

    let delta = j_e.clone().lu().solve(&rhs).ok_or(Error::Singular {
        context: "extended Jacobian",
    })?;
    Ok(SolveResult {
        flags: SolverFlags {
            rank_deficient: false,
            residual_norm: residual_norm(j_task, &delta, ds_task),
            condition: (e_min > 0.0).then_some(e_max / e_min),
        },
        delta_phi: ControlVector::from_dvector(delta),
        nullspace_active: true,
    })
}
