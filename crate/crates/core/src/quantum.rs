//! Finite-dimensional pure states and projectors, with the retrodiction
//! rules for a single intermediate observation between pre- and
//! postselection.
//!
//! All comparisons use the absolute tolerance [`TOLERANCE`].

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::formulas::RetrodictionInputs;

pub type C64 = Complex<f64>;

pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state has norm {0}, expected 1")]
    NotNormalized(f64),
    #[error("zero vector cannot be normalized")]
    ZeroVector,
    #[error("matrix is not a Hermitian idempotent")]
    NonProjector,
    #[error("basis is not orthonormal and complete")]
    BasisNotOrthonormal,
    #[error("index {index} out of range for {len} basis states")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("denominator vanishes: the postselected state is unreachable")]
    ZeroDenominator,
    #[error("slit separation {separation} must exceed half the wavelength {wavelength}")]
    GeometryInfeasible { separation: f64, wavelength: f64 },
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QState {
    amplitudes: DVector<C64>,
}

impl QState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self, QuantumError> {
        let amplitudes = DVector::from_vec(amplitudes);
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(Self { amplitudes })
    }

    /// Rescale to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self, QuantumError> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(QuantumError::ZeroVector);
        }
        Ok(Self {
            amplitudes: v.unscale(norm),
        })
    }

    /// Real amplitudes, rescaled to unit norm.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self, QuantumError> {
        Self::normalized(amplitudes.iter().map(|&x| c(x, 0.0)).collect())
    }

    /// The `j`-th standard basis vector.
    pub fn basis(dim: usize, j: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[j] = c(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn standard_basis(dim: usize) -> Vec<QState> {
        (0..dim).map(|j| Self::basis(dim, j)).collect()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amplitudes.as_slice()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QState) -> Result<C64, QuantumError> {
        same_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DMatrix<C64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

fn same_dim(expected: usize, found: usize) -> Result<(), QuantumError> {
    if expected == found {
        Ok(())
    } else {
        Err(QuantumError::DimensionMismatch { expected, found })
    }
}

/// A Hermitian idempotent matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: DMatrix<C64>,
}

impl Projector {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self, QuantumError> {
        if !matrix.is_square() {
            return Err(QuantumError::NonProjector);
        }
        let hermitian = max_abs(&(&matrix - matrix.adjoint())) <= TOLERANCE;
        let idempotent = max_abs(&(&matrix * &matrix - &matrix)) <= TOLERANCE;
        if !(hermitian && idempotent) {
            return Err(QuantumError::NonProjector);
        }
        Ok(Self { matrix })
    }

    pub fn onto(state: &QState) -> Self {
        Self {
            matrix: state.density(),
        }
    }

    /// Projector onto the span of orthonormal `states`.
    pub fn onto_span(states: &[&QState]) -> Result<Self, QuantumError> {
        let dim = states.first().map_or(0, |s| s.dim());
        let mut m = DMatrix::zeros(dim, dim);
        for s in states {
            same_dim(dim, s.dim())?;
            m += s.density();
        }
        Self::new(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn rank(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn apply(&self, state: &QState) -> Result<DVector<C64>, QuantumError> {
        same_dim(self.dim(), state.dim())?;
        Ok(&self.matrix * &state.amplitudes)
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `𝟙 − Π`.
pub fn complement_projector(p: &Projector) -> Result<Projector, QuantumError> {
    Projector::new(DMatrix::identity(p.dim(), p.dim()) - &p.matrix)
}

/// `|⟨v|s⟩|²`.
pub fn born_probability(s: &QState, v: &QState) -> Result<f64, QuantumError> {
    Ok(v.inner(s)?.norm_sqr())
}

/// `Tr(ρ Π_p Π_q Π_p)` with `ρ = |s⟩⟨s|`: probability of `p` and then `q`.
pub fn sandwich_probability(s: &QState, p: &Projector, q: &Projector) -> Result<f64, QuantumError> {
    same_dim(s.dim(), p.dim())?;
    same_dim(s.dim(), q.dim())?;
    // Re-validate: callers may hold matrices built through `new` on another dim.
    Projector::new(p.matrix.clone())?;
    Projector::new(q.matrix.clone())?;
    let value = (s.density() * &p.matrix * &q.matrix * &p.matrix).trace();
    debug_assert!(value.im.abs() <= TOLERANCE);
    Ok(value.re)
}

fn check_basis(s: &QState, basis: &[QState], j: usize, q: &QState) -> Result<(), QuantumError> {
    let d = s.dim();
    same_dim(d, q.dim())?;
    if basis.len() != d {
        return Err(QuantumError::BasisNotOrthonormal);
    }
    for (a, u) in basis.iter().enumerate() {
        same_dim(d, u.dim())?;
        for (b, v) in basis.iter().enumerate().skip(a) {
            let expected = if a == b { 1.0 } else { 0.0 };
            if (u.inner(v)? - c(expected, 0.0)).norm() > TOLERANCE {
                return Err(QuantumError::BasisNotOrthonormal);
            }
        }
    }
    if j >= d {
        return Err(QuantumError::IndexOutOfRange { index: j, len: d });
    }
    Ok(())
}

/// `⟨q|p_t⟩⟨p_t|s⟩` for every basis state.
fn path_amplitudes(s: &QState, basis: &[QState], q: &QState) -> Result<Vec<C64>, QuantumError> {
    basis.iter().map(|p| Ok(q.inner(p)? * p.inner(s)?)).collect()
}

/// Retrodicted probability of `p_j` for a complete intermediate observation
/// in `basis`, between preselection `s` and postselection `q`.
pub fn abl_complete(s: &QState, basis: &[QState], j: usize, q: &QState) -> Result<f64, QuantumError> {
    check_basis(s, basis, j, q)?;
    let paths = path_amplitudes(s, basis, q)?;
    let denominator: f64 = paths.iter().map(|a| a.norm_sqr()).sum();
    if denominator <= TOLERANCE * TOLERANCE {
        return Err(QuantumError::ZeroDenominator);
    }
    Ok(paths[j].norm_sqr() / denominator)
}

/// Retrodicted probability of `p_j` for the partial observation "`p_j` or
/// not": the other paths add coherently.
pub fn abl_partial(s: &QState, basis: &[QState], j: usize, q: &QState) -> Result<f64, QuantumError> {
    check_basis(s, basis, j, q)?;
    let paths = path_amplitudes(s, basis, q)?;
    let hit = paths[j].norm_sqr();
    let rest: C64 = paths.iter().enumerate().filter(|(t, _)| *t != j).map(|(_, a)| *a).sum();
    let denominator = hit + rest.norm_sqr();
    if denominator <= TOLERANCE * TOLERANCE {
        return Err(QuantumError::ZeroDenominator);
    }
    Ok(hit / denominator)
}

/// Born-rule inputs for the partial retrodiction formula, via the sandwich
/// formula with `Π_j` and its complement `𝟙 − Π_j`.
pub fn partial_inputs(
    s: &QState,
    basis: &[QState],
    j: usize,
    q: &QState,
) -> Result<RetrodictionInputs<f64>, QuantumError> {
    check_basis(s, basis, j, q)?;
    let hit = Projector::onto(&basis[j]);
    let miss = complement_projector(&hit)?;
    let post = Projector::onto(q);
    let identity = Projector::identity(s.dim());
    let prior_j = sandwich_probability(s, &identity, &hit)?;
    let prior_neg = sandwich_probability(s, &identity, &miss)?;
    let conditional = |joint: f64, prior: f64| if prior > 0.0 { joint / prior } else { 0.0 };
    Ok(RetrodictionInputs::new(
        conditional(sandwich_probability(s, &hit, &post)?, prior_j),
        prior_j,
        conditional(sandwich_probability(s, &miss, &post)?, prior_neg),
        prior_neg,
    ))
}

/// Born-rule likelihoods `|⟨q|p_t⟩|²` and priors `|⟨p_t|s⟩|²`.
pub fn complete_inputs(s: &QState, basis: &[QState], q: &QState) -> Result<(Vec<f64>, Vec<f64>), QuantumError> {
    check_basis(s, basis, 0, q)?;
    let likelihoods = basis.iter().map(|p| born_probability(p, q)).collect::<Result<_, _>>()?;
    let priors = basis.iter().map(|p| born_probability(s, p)).collect::<Result<_, _>>()?;
    Ok((likelihoods, priors))
}

/// Whether `⟨q|p_1⟩⟨p_1|s⟩ = ⟨q|p_2⟩⟨p_2|s⟩ = −⟨q|p_3⟩⟨p_3|s⟩`, compared as
/// raw complex products.
pub fn threebox_condition_check(s: &QState, q: &QState, basis: &[QState]) -> Result<bool, QuantumError> {
    same_dim(3, s.dim())?;
    same_dim(3, q.dim())?;
    same_dim(3, basis.len())?;
    check_basis(s, basis, 0, q)?;
    let paths = path_amplitudes(s, basis, q)?;
    Ok((paths[0] - paths[1]).norm() <= TOLERANCE && (paths[1] + paths[2]).norm() <= TOLERANCE)
}

/// Preselected and postselected states of the three-box experiment:
/// `(1, 1, 1)/√3` and `(1, 1, −1)/√3`.
pub fn three_box_states() -> (QState, QState) {
    (
        QState::from_real(&[1.0, 1.0, 1.0]).expect("nonzero"),
        QState::from_real(&[1.0, 1.0, -1.0]).expect("nonzero"),
    )
}

/// Three equally spaced slits (1 and 2 outside, 3 in the middle) and an
/// on-axis detector at distance `distance` from slit 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitGeometry {
    pub separation: f64,
    pub wavelength: f64,
    pub distance: f64,
}

impl SlitGeometry {
    /// Path lengths from slits 1, 2 and 3 to the detector.
    pub fn path_lengths(&self) -> [f64; 3] {
        let outer = self.distance.hypot(self.separation);
        [outer, outer, self.distance]
    }

    /// `e^{ikr}` for each slit.
    pub fn phases(&self) -> [C64; 3] {
        let k = 2.0 * PI / self.wavelength;
        self.path_lengths().map(|r| C64::from_polar(1.0, k * r))
    }

    /// `e^{ikr_i} + e^{ikr_j}`.
    pub fn pair_amplitude(&self, i: usize, j: usize) -> C64 {
        let p = self.phases();
        p[i] + p[j]
    }

    /// Per-slit amplitudes at the detector, `/√3` and with the global phase
    /// fixed so slit 1 is real and positive.
    pub fn detector_amplitudes(&self) -> [C64; 3] {
        let p = self.phases();
        let reference = p[0].conj();
        p.map(|z| z * reference / 3f64.sqrt())
    }

    /// Path difference minus half a wavelength, relative to the wavelength.
    pub fn half_wave_residual(&self) -> f64 {
        let [outer, _, inner] = self.path_lengths();
        ((outer - inner) - self.wavelength / 2.0) / self.wavelength
    }
}

/// Detector distance `L = a²/λ − λ/4`, the positive solution of
/// `√(L² + a²) − L = λ/2`.
pub fn three_slit_design(separation: f64, wavelength: f64) -> Result<SlitGeometry, QuantumError> {
    if !(wavelength > 0.0 && separation > wavelength / 2.0) {
        return Err(QuantumError::GeometryInfeasible { separation, wavelength });
    }
    let geometry = SlitGeometry {
        separation,
        wavelength,
        distance: separation * separation / wavelength - wavelength / 4.0,
    };
    debug_assert!(geometry.half_wave_residual().abs() <= TOLERANCE);
    Ok(geometry)
}

/// The preselected `|a⟩ = (|x₁⟩ + |x₂⟩)/√2` and postselected
/// `|b⟩ = (|x₂⟩ + |x₃⟩)/√2`.
pub fn aad_states() -> (QState, QState) {
    (
        QState::from_real(&[1.0, 1.0, 0.0]).expect("nonzero"),
        QState::from_real(&[0.0, 1.0, 1.0]).expect("nonzero"),
    )
}

/// `|q₁⟩ = α|x₁⟩ + β|x₃⟩`, `|q₂⟩ = |x₂⟩`, `|q₃⟩ = β*|x₁⟩ − α*|x₃⟩`.
pub fn aad_q_basis(alpha: C64, beta: C64) -> Result<Vec<QState>, QuantumError> {
    let zero = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    Ok(vec![
        QState::new(vec![alpha, zero, beta])?,
        QState::new(vec![zero, one, zero])?,
        QState::new(vec![beta.conj(), zero, -alpha.conj()])?,
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AadReport {
    pub q_basis: Vec<QState>,
    /// Partial observation "`q₂` or not".
    pub partial_result: f64,
    /// Complete observation of `Q`.
    pub complete_result: f64,
    pub x_partial: f64,
    pub x_complete: f64,
}

pub fn aad_analysis(alpha: C64, beta: C64) -> Result<AadReport, QuantumError> {
    let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if (norm - 1.0).abs() > TOLERANCE {
        return Err(QuantumError::NotNormalized(norm));
    }
    let (a, b) = aad_states();
    let q_basis = aad_q_basis(alpha, beta)?;
    let x_basis = QState::standard_basis(3);
    Ok(AadReport {
        partial_result: abl_partial(&a, &q_basis, 1, &b)?,
        complete_result: abl_complete(&a, &q_basis, 1, &b)?,
        x_partial: abl_partial(&a, &x_basis, 1, &b)?,
        x_complete: abl_complete(&a, &x_basis, 1, &b)?,
        q_basis,
    })
}

/// `(1/√2, 1/√2)`.
pub fn balanced_pair() -> (C64, C64) {
    (c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0))
}

/// Haar-random state: independent standard complex Gaussians, normalized.
pub fn random_state(dim: usize, rng: &mut impl Rng) -> QState {
    loop {
        let v: Vec<C64> = (0..dim)
            .map(|_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(s) = QState::normalized(v) {
            return s;
        }
    }
}

/// Haar-random orthonormal basis by Gram–Schmidt on random states.
pub fn random_basis(dim: usize, rng: &mut impl Rng) -> Vec<QState> {
    let mut out: Vec<DVector<C64>> = Vec::with_capacity(dim);
    while out.len() < dim {
        let mut v = random_state(dim, rng).amplitudes;
        for u in &out {
            let proj = u.dotc(&v);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            out.push(v.unscale(norm));
        }
    }
    out.into_iter().map(|amplitudes| QState { amplitudes }).collect()
}
