//! Stokes-space primitives: points on the Poincaré sphere, rotations of the
//! sphere, and controllable waveplate chains.
//!
//! Conventions used throughout the crate:
//!
//! - Polarization states are the reduced Stokes vector `[s1, s2, s3]`,
//!   normalized to unit length (fully polarized light).
//! - A waveplate with eigenaxis `r̂` and retardation `θ` acts on the sphere as
//!   the right-handed rotation by `θ` about `r̂`.
//! - A chain applies stage 1 first: `S_out = M_m ⋯ M_2 M_1 S_in`.
//! - Retardation is driven linearly by a control signal, `θ_i = g_i φ_i`.

use nalgebra::{DVector, Matrix3, Vector3};
use std::fmt;
use std::ops::{Index, Mul};

use crate::error::Error;
use crate::Result;

/// Norm at or below which a vector is considered degenerate and cannot be
/// normalized onto the sphere.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Tolerance used when validating rotation matrices and unit vectors.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// A fully polarized state of polarization: a unit vector of the reduced
/// Stokes parameters, i.e. a point on the Poincaré sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesVector(Vector3<f64>);

impl StokesVector {
    /// Normalizes `v` onto the sphere.
    ///
    /// Errors with [`Error::DegenerateVector`] when `‖v‖ ≤ 1e-12`; no
    /// preferred direction is invented for degenerate input.
    pub fn normalize(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n <= DEGENERATE_NORM {
            return Err(Error::DegenerateVector { norm: n });
        }
        Ok(Self(v / n))
    }

    /// Builds a state from raw components, normalizing them onto the sphere.
    pub fn new(s1: f64, s2: f64, s3: f64) -> Result<Self> {
        Self::normalize(Vector3::new(s1, s2, s3))
    }

    /// Re-normalizes a vector already known to be within rounding error of
    /// unit length (e.g. the image of a unit vector under a rotation).
    pub(crate) fn renormalized(v: Vector3<f64>) -> Self {
        let n = v.norm();
        debug_assert!(
            n > DEGENERATE_NORM,
            "renormalized() given a degenerate vector"
        );
        Self(v / n)
    }

    /// The underlying `[s1, s2, s3]` vector.
    pub fn vector(&self) -> Vector3<f64> {
        self.0
    }

    pub fn s1(&self) -> f64 {
        self.0.x
    }

    pub fn s2(&self) -> f64 {
        self.0.y
    }

    pub fn s3(&self) -> f64 {
        self.0.z
    }

    /// Inner product with another state (cosine of the sphere angle).
    pub fn dot(&self, other: &StokesVector) -> f64 {
        self.0.dot(&other.0)
    }
}

impl fmt::Display for StokesVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.6}, {:.6}, {:.6}]", self.0.x, self.0.y, self.0.z)
    }
}

/// A unit rotation axis on the Poincaré sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisVector(Vector3<f64>);

impl AxisVector {
    /// Normalizes `v` into a unit axis; degenerate input is rejected.
    pub fn normalize(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n <= DEGENERATE_NORM {
            return Err(Error::DegenerateVector { norm: n });
        }
        Ok(Self(v / n))
    }

    /// Builds a unit axis from raw components.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::normalize(Vector3::new(x, y, z))
    }

    /// The S₁ axis `[1, 0, 0]`.
    pub fn s1() -> Self {
        Self(Vector3::new(1.0, 0.0, 0.0))
    }

    /// The S₂ axis `[0, 1, 0]`.
    pub fn s2() -> Self {
        Self(Vector3::new(0.0, 1.0, 0.0))
    }

    /// The S₃ axis `[0, 0, 1]`.
    pub fn s3() -> Self {
        Self(Vector3::new(0.0, 0.0, 1.0))
    }

    /// The underlying unit vector.
    pub fn vector(&self) -> Vector3<f64> {
        self.0
    }

    /// The skew-symmetric cross-product matrix of this axis.
    pub fn cross_matrix(&self) -> Matrix3<f64> {
        cross_matrix(&self.0)
    }
}

/// The skew-symmetric matrix `K` with `K v = r × v` for all `v`.
pub fn cross_matrix(r: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -r.z, r.y, //
        r.z, 0.0, -r.x, //
        -r.y, r.x, 0.0,
    )
}

/// The three coordinate axes of Stokes space, for chains built from
/// elemental (axis-aligned) waveplates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StokesAxis {
    S1,
    S2,
    S3,
}

impl StokesAxis {
    /// The corresponding unit axis vector.
    pub fn axis(&self) -> AxisVector {
        match self {
            StokesAxis::S1 => AxisVector::s1(),
            StokesAxis::S2 => AxisVector::s2(),
            StokesAxis::S3 => AxisVector::s3(),
        }
    }

    /// 1-based coordinate index (S₁ → 1, S₂ → 2, S₃ → 3).
    pub fn index(&self) -> usize {
        match self {
            StokesAxis::S1 => 1,
            StokesAxis::S2 => 2,
            StokesAxis::S3 => 3,
        }
    }
}

/// A proper rotation of the Poincaré sphere (orthogonal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    /// The identity rotation.
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates `m` as a proper rotation: `‖MᵀM − I‖ ≤ 1e-9` and
    /// `|det M − 1| ≤ 1e-9`.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        let det = (m.determinant() - 1.0).abs();
        let defect = ortho.max(det);
        if !defect.is_finite() || defect > ROTATION_TOLERANCE {
            return Err(Error::NotARotation { defect });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is a rotation by construction (products and
    /// exponentials of rotations).
    pub(crate) fn new_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// The underlying 3×3 matrix.
    pub fn matrix(&self) -> Matrix3<f64> {
        self.0
    }

    /// Applies the rotation to a state and re-normalizes the result, so that
    /// long cascades cannot drift off the sphere.
    pub fn apply(&self, s: &StokesVector) -> StokesVector {
        StokesVector::renormalized(self.0 * s.vector())
    }

    /// The inverse rotation (transpose).
    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;

    /// Composition: `(a * b).apply(s) == a.apply(&b.apply(s))` up to
    /// re-normalization.
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

/// Rotation by `theta` (radians, right-hand rule) about the unit axis `r̂`:
/// `M = I + sin θ · K + (1 − cos θ) · K²` with `K` the cross-product matrix
/// of `r̂`.
pub fn rodrigues(axis: &AxisVector, theta: f64) -> RotationMatrix {
    let k = axis.cross_matrix();
    let (s, c) = theta.sin_cos();
    RotationMatrix::new_unchecked(Matrix3::identity() + k * s + (k * k) * (1.0 - c))
}

/// Rotation by `theta` about one of the coordinate axes:
///
/// ```text
/// R₁ = [1  0  0 ]   R₂ = [ c  0  s]   R₃ = [c -s  0]
///      [0  c -s ]        [ 0  1  0]        [s  c  0]
///      [0  s  c ]        [-s  0  c]        [0  0  1]
/// ```
///
/// with `c = cos θ`, `s = sin θ`. Identical to [`rodrigues`] with the
/// corresponding basis vector as axis.
pub fn elemental(axis: StokesAxis, theta: f64) -> RotationMatrix {
    let (s, c) = theta.sin_cos();
    let m = match axis {
        StokesAxis::S1 => Matrix3::new(
            1.0, 0.0, 0.0, //
            0.0, c, -s, //
            0.0, s, c,
        ),
        StokesAxis::S2 => Matrix3::new(
            c, 0.0, s, //
            0.0, 1.0, 0.0, //
            -s, 0.0, c,
        ),
        StokesAxis::S3 => Matrix3::new(
            c, -s, 0.0, //
            s, c, 0.0, //
            0.0, 0.0, 1.0,
        ),
    };
    RotationMatrix::new_unchecked(m)
}

/// One controllable waveplate stage: a fixed rotation axis, a linear
/// actuation gain `θ = gain · φ`, and an advisory control-signal range.
///
/// The range is a soft bound used for diagnostics (e.g. duty-cycle and
/// boundedness statistics); the model never clips `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveplateStage {
    axis: AxisVector,
    gain: f64,
    signal_range: (f64, f64),
}

impl WaveplateStage {
    /// Default advisory signal range.
    pub const DEFAULT_SIGNAL_RANGE: (f64, f64) = (-1.0, 1.0);

    /// Builds a stage. The gain must be finite and nonzero (a zero-gain stage
    /// is uncontrollable) and the range nonempty (`lo ≤ hi`).
    pub fn new(axis: AxisVector, gain: f64, signal_range: (f64, f64)) -> Result<Self> {
        if !gain.is_finite() || gain == 0.0 {
            return Err(Error::InvalidStage(format!(
                "gain must be finite and nonzero, got {gain}"
            )));
        }
        // Ordered comparison so NaN endpoints are rejected along with empty
        // ranges.
        let range_ok = signal_range.0 <= signal_range.1;
        if !range_ok {
            return Err(Error::InvalidStage(format!(
                "signal range [{}, {}] is empty",
                signal_range.0, signal_range.1
            )));
        }
        Ok(Self {
            axis,
            gain,
            signal_range,
        })
    }

    /// An axis-aligned stage with the default signal range.
    pub fn elemental(axis: StokesAxis, gain: f64) -> Result<Self> {
        Self::new(axis.axis(), gain, Self::DEFAULT_SIGNAL_RANGE)
    }

    pub fn axis(&self) -> AxisVector {
        self.axis
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn signal_range(&self) -> (f64, f64) {
        self.signal_range
    }

    /// The rotation produced by control signal `phi`: `R(r̂, gain · phi)`.
    pub fn rotation(&self, phi: f64) -> RotationMatrix {
        rodrigues(&self.axis, self.gain * phi)
    }

    /// Whether `phi` lies inside the advisory signal range.
    pub fn within_range(&self, phi: f64) -> bool {
        self.signal_range.0 <= phi && phi <= self.signal_range.1
    }
}

/// Control signals, one per chain stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector(DVector<f64>);

impl ControlVector {
    /// The all-zero control vector for an `m`-stage chain.
    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(m))
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(DVector::from_vec(v))
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self(DVector::from_column_slice(v))
    }

    pub(crate) fn from_dvector(v: DVector<f64>) -> Self {
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    /// Largest `|φ_i|`; 0 for an empty vector.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    /// Adds an update `Δφ` in place.
    pub fn add(&mut self, delta: &DVector<f64>) -> Result<()> {
        if delta.len() != self.0.len() {
            return Err(Error::LengthMismatch {
                expected: self.0.len(),
                got: delta.len(),
            });
        }
        self.0 += delta;
        Ok(())
    }
}

impl Index<usize> for ControlVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// An ordered cascade of waveplate stages; stage 1 is nearest the input and
/// is applied first: `S_out = M_m ⋯ M_1 S_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpcChain {
    stages: Vec<WaveplateStage>,
}

impl DpcChain {
    /// Builds a chain from at least one stage.
    pub fn new(stages: Vec<WaveplateStage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::EmptyChain);
        }
        Ok(Self { stages })
    }

    /// A chain of axis-aligned stages sharing one gain, e.g.
    /// `DpcChain::elemental(&[S1, S3, S1], PI)`.
    pub fn elemental(axes: &[StokesAxis], gain: f64) -> Result<Self> {
        let stages = axes
            .iter()
            .map(|&a| WaveplateStage::elemental(a, gain))
            .collect::<Result<Vec<_>>>()?;
        Self::new(stages)
    }

    /// Number of stages `m`.
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn stages(&self) -> &[WaveplateStage] {
        &self.stages
    }

    fn check_phi(&self, phi: &ControlVector) -> Result<()> {
        if phi.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: phi.len(),
            });
        }
        Ok(())
    }

    /// Propagates `s_in` through every stage in order, re-normalizing after
    /// each stage, and records all intermediate states.
    pub fn forward(&self, phi: &ControlVector, s_in: &StokesVector) -> Result<ForwardPass> {
        self.check_phi(phi)?;
        let mut after_stage = Vec::with_capacity(self.len());
        let mut s = *s_in;
        for (stage, &p) in self.stages.iter().zip(phi.as_slice()) {
            s = stage.rotation(p).apply(&s);
            after_stage.push(s);
        }
        Ok(ForwardPass {
            s_in: *s_in,
            after_stage,
        })
    }

    /// The composite rotation `M_m ⋯ M_1` at the given control signals.
    pub fn composite(&self, phi: &ControlVector) -> Result<RotationMatrix> {
        self.check_phi(phi)?;
        let mut m = Matrix3::identity();
        for (stage, &p) in self.stages.iter().zip(phi.as_slice()) {
            m = stage.rotation(p).matrix() * m;
        }
        Ok(RotationMatrix::new_unchecked(m))
    }
}

/// States produced by one forward propagation: the input and the state after
/// each stage (the last entry is the chain output).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    s_in: StokesVector,
    after_stage: Vec<StokesVector>,
}

impl ForwardPass {
    pub fn input(&self) -> StokesVector {
        self.s_in
    }

    /// State after stage `i` (0-based); length equals the stage count.
    pub fn after_stage(&self) -> &[StokesVector] {
        &self.after_stage
    }

    /// The chain output.
    pub fn output(&self) -> StokesVector {
        *self
            .after_stage
            .last()
            .expect("chains have at least one stage")
    }
}
