//! Measurement models and deterministic generators.
//!
//! The model is `y = diag(B h₀) A x₀ + w` with `A ∈ ℂ^{L×N}`, `B ∈ ℂ^{L×k}`,
//! a dense `h₀ ∈ ℂᵏ` and an `n`-sparse `x₀ ∈ ℂᴺ`. Every generator is a pure
//! function of its arguments and seed.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::{CMatrix, CVector};

/// Problem sizes `(L, N, k, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    /// Number of measurements `L`.
    #[serde(rename = "L")]
    pub measurements: usize,
    /// Signal length `N`.
    #[serde(rename = "N")]
    pub signal_len: usize,
    /// Dimension `k` of the calibration subspace.
    #[serde(rename = "k")]
    pub subspace_dim: usize,
    /// Sparsity `n` of the signal.
    #[serde(rename = "n")]
    pub sparsity: usize,
}

impl Dimensions {
    pub fn new(measurements: usize, signal_len: usize, subspace_dim: usize, sparsity: usize) -> Result<Self> {
        let dims = Dimensions {
            measurements,
            signal_len,
            subspace_dim,
            sparsity,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        let Dimensions {
            measurements: l,
            signal_len: n_sig,
            subspace_dim: k,
            sparsity: n,
        } = *self;
        if l == 0 || n_sig == 0 {
            return Err(Error::InvalidDimensions(format!("L={l}, N={n_sig} must be positive")));
        }
        if k == 0 || k > l {
            return Err(Error::InvalidDimensions(format!("need 1 <= k <= L, got k={k}, L={l}")));
        }
        if n == 0 || n > n_sig {
            return Err(Error::InvalidDimensions(format!("need 1 <= n <= N, got n={n}, N={n_sig}")));
        }
        Ok(())
    }

    /// Number of lifted unknowns `kN`.
    pub fn lifted_len(&self) -> usize {
        self.subspace_dim * self.signal_len
    }
}

/// Sorted, distinct column indices of the nonzero entries of `x₀`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    /// Builds a support set over `[0, len)`. Indices are sorted; duplicates
    /// and out-of-range entries are rejected.
    pub fn new(mut indices: Vec<usize>, len: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!("duplicate support index {}", w[0])));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= len) {
            return Err(Error::IndexOutOfRange { index: bad, len });
        }
        Ok(SupportSet { indices })
    }

    /// The full index set `[0, len)`.
    pub fn full(len: usize) -> Self {
        SupportSet {
            indices: (0..len).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Lifted support `{(i, j) : j ∈ Ω_x}` as vec indices `j·k + i`.
    pub fn lifted(&self, k: usize) -> Vec<usize> {
        self.indices
            .iter()
            .flat_map(|&j| (0..k).map(move |i| j * k + i))
            .collect()
    }
}

/// Distribution of the nonzero entries of `h` and `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entries {
    /// iid `N(0, 1)` real values.
    #[default]
    Real,
    /// iid circularly-symmetric complex Gaussian with unit variance
    /// (real and imaginary parts each `N(0, 1/2)`).
    Complex,
}

/// How the sensing matrix `A` was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixKind {
    Gaussian,
    Fourier,
    CircularArray {
        grid_degrees: Vec<f64>,
        spacing_wavelengths: f64,
    },
    Custom,
}

impl MatrixKind {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixKind::Gaussian => "gaussian",
            MatrixKind::Fourier => "fourier",
            MatrixKind::CircularArray { .. } => "circular_array",
            MatrixKind::Custom => "custom",
        }
    }
}

/// How the subspace matrix `B` was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Dft,
    Custom,
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn draw_entry<R: Rng>(rng: &mut R, entries: Entries) -> Complex64 {
    match entries {
        Entries::Real => Complex64::new(standard_normal(rng), 0.0),
        Entries::Complex => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            Complex64::new(s * standard_normal(rng), s * standard_normal(rng))
        }
    }
}

/// `exp(−2πi·num/den)` with the phase reduced modulo `den` first.
fn unit_root(num: usize, den: usize) -> Complex64 {
    let r = (num % den) as f64 / den as f64;
    Complex64::from_polar(1.0, -2.0 * PI * r)
}

/// iid standard real Gaussian `L×N` matrix stored as complex.
pub fn gen_gaussian_a(dims: &Dimensions, seed: u64) -> CMatrix {
    let mut rng = seed::rng(seed);
    // Row-major fill so that the draw order does not depend on storage.
    let mut a = DMatrix::zeros(dims.measurements, dims.signal_len);
    for l in 0..dims.measurements {
        for j in 0..dims.signal_len {
            a[(l, j)] = Complex64::new(standard_normal(&mut rng), 0.0);
        }
    }
    a
}

/// Random partial Fourier matrix: `L` rows drawn uniformly with replacement
/// from the unnormalized `N×N` DFT matrix `F_{r,c} = exp(−2πi·r·c/N)`.
pub fn gen_fourier_a(dims: &Dimensions, seed: u64) -> CMatrix {
    let rows = fourier_rows(dims, seed);
    let n = dims.signal_len;
    DMatrix::from_fn(dims.measurements, n, |l, c| unit_root(rows[l] * c, n))
}

/// Row indices of the DFT selected by [`gen_fourier_a`] for this seed.
pub fn fourier_rows(dims: &Dimensions, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    (0..dims.measurements)
        .map(|_| rng.random_range(0..dims.signal_len))
        .collect()
}

/// First `k` columns of the unitary `L×L` DFT matrix:
/// `B_{l,j} = L^{−1/2} exp(−2πi·l·j/L)`.
pub fn gen_dft_b(l: usize, k: usize) -> Result<CMatrix> {
    if l == 0 || k == 0 || k > l {
        return Err(Error::InvalidDimensions(format!("need 1 <= k <= L, got k={k}, L={l}")));
    }
    let scale = 1.0 / (l as f64).sqrt();
    Ok(DMatrix::from_fn(l, k, |row, col| unit_root(row * col, l) * scale))
}

/// Array manifold of a uniform circular array with `L` elements whose
/// neighbours are `spacing` wavelengths apart. Column `t` is the steering
/// vector for bearing `grid_degrees[t]`:
/// `exp(−2πi⟨v(θ), u_j⟩)` with `v(θ) = [sin θ, cos θ]` and
/// `u_j = r·[sin(2πj/L), cos(2πj/L)]`, `r = spacing / (2 sin(π/L))`.
pub fn gen_circular_array_a(l: usize, grid_degrees: &[f64], spacing: f64) -> Result<CMatrix> {
    if l < 2 {
        return Err(Error::InvalidDimensions(format!("circular array needs L >= 2, got {l}")));
    }
    if grid_degrees.is_empty() {
        return Err(Error::InvalidParameter("empty angle grid".into()));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!("spacing must be positive, got {spacing}")));
    }
    let radius = spacing / (2.0 * (PI / l as f64).sin());
    Ok(DMatrix::from_fn(l, grid_degrees.len(), |j, t| {
        let theta = grid_degrees[t].to_radians();
        let phi = 2.0 * PI * j as f64 / l as f64;
        let proj = radius * (theta.sin() * phi.sin() + theta.cos() * phi.cos());
        Complex64::from_polar(1.0, -2.0 * PI * proj)
    }))
}

/// `n`-sparse vector of length `len` with a uniformly random support.
pub fn gen_sparse_x(len: usize, n: usize, seed: u64, entries: Entries) -> Result<(CVector, SupportSet)> {
    if n > len {
        return Err(Error::InvalidDimensions(format!("sparsity {n} exceeds length {len}")));
    }
    let mut rng = seed::rng(seed);
    let support = SupportSet::new(index::sample(&mut rng, len, n).into_vec(), len)?;
    let mut x = DVector::zeros(len);
    for &j in support.indices() {
        x[j] = draw_entry(&mut rng, entries);
        // A Gaussian draw of exactly zero would shrink the support.
        while x[j] == Complex64::new(0.0, 0.0) {
            x[j] = draw_entry(&mut rng, entries);
        }
    }
    Ok((x, support))
}

/// Dense Gaussian vector of length `k`.
pub fn gen_dense_h(k: usize, seed: u64, entries: Entries) -> CVector {
    let mut rng = seed::rng(seed);
    DVector::from_fn(k, |_, _| draw_entry(&mut rng, entries))
}

/// `y_l = (B h₀)_l · (a_lᵀ x₀) + w_l`.
pub fn measure(a: &CMatrix, b: &CMatrix, h0: &CVector, x0: &CVector, w: Option<&CVector>) -> Result<CVector> {
    let l = a.nrows();
    if b.nrows() != l {
        return Err(Error::shape(format!("B with {l} rows"), format!("{} rows", b.nrows())));
    }
    if h0.len() != b.ncols() {
        return Err(Error::shape(format!("h0 of length {}", b.ncols()), format!("{}", h0.len())));
    }
    if x0.len() != a.ncols() {
        return Err(Error::shape(format!("x0 of length {}", a.ncols()), format!("{}", x0.len())));
    }
    let gains = b * h0;
    let mut y = (a * x0).component_mul(&gains);
    if let Some(w) = w {
        if w.len() != l {
            return Err(Error::shape(format!("w of length {l}"), format!("{}", w.len())));
        }
        y += w;
    }
    Ok(y)
}

/// Additive noise scaled to a target SNR.
#[derive(Debug, Clone)]
pub struct NoisyMeasurement {
    pub y: CVector,
    pub w: CVector,
    /// Per-entry noise standard deviation.
    pub sigma: f64,
    /// Noise-ball radius `(L + √(4L))^{1/2} σ`.
    pub eta: f64,
}

/// `η/σ` factor for `L` complex measurements.
pub fn eta_factor(l: usize) -> f64 {
    let l = l as f64;
    (l + (4.0 * l).sqrt()).sqrt()
}

/// Adds circularly-symmetric complex Gaussian noise so that
/// `E‖w‖² = ‖X₀‖²_F · 10^{−snr_db/10}`. `snr_db = +∞` is noiseless.
pub fn add_noise_snr(y_clean: &CVector, snr_db: f64, x0_frob: f64, seed: u64) -> Result<NoisyMeasurement> {
    let l = y_clean.len();
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("invalid SNR {snr_db} dB")));
    }
    if snr_db == f64::INFINITY {
        return Ok(NoisyMeasurement {
            y: y_clean.clone(),
            w: DVector::zeros(l),
            sigma: 0.0,
            eta: 0.0,
        });
    }
    let noise_energy = x0_frob * x0_frob * 10f64.powf(-snr_db / 10.0);
    let sigma = (noise_energy / l as f64).sqrt();
    let mut rng = seed::rng(seed);
    let w = DVector::from_fn(l, |_, _| draw_entry(&mut rng, Entries::Complex) * sigma);
    Ok(NoisyMeasurement {
        y: y_clean + &w,
        w,
        sigma,
        eta: eta_factor(l) * sigma,
    })
}

/// Recipe for [`ProblemInstance::generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub dims: Dimensions,
    pub matrix: MatrixKind,
    #[serde(default)]
    pub h_entries: Entries,
    #[serde(default)]
    pub x_entries: Entries,
    /// Target SNR in dB; `None` is noiseless.
    #[serde(default)]
    pub snr_db: Option<f64>,
}

impl InstanceConfig {
    pub fn noiseless(dims: Dimensions, matrix: MatrixKind) -> Self {
        InstanceConfig {
            dims,
            matrix,
            h_entries: Entries::Real,
            x_entries: Entries::Real,
            snr_db: None,
        }
    }
}

/// Provenance of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub seed: Option<u64>,
    pub matrix: MatrixKind,
    pub basis: BasisKind,
    pub snr_db: Option<f64>,
    pub sigma: f64,
}

/// The tuple `(A, B, h₀, x₀, w, y, η)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub dims: Dimensions,
    pub meta: InstanceMeta,
    #[serde(with = "crate::serde_complex::matrix")]
    pub a: CMatrix,
    #[serde(with = "crate::serde_complex::matrix")]
    pub b: CMatrix,
    #[serde(with = "crate::serde_complex::vector")]
    pub h0: CVector,
    #[serde(with = "crate::serde_complex::vector")]
    pub x0: CVector,
    pub support: SupportSet,
    #[serde(with = "crate::serde_complex::vector")]
    pub w: CVector,
    #[serde(with = "crate::serde_complex::vector")]
    pub y: CVector,
    pub eta: f64,
}

// Stream tags for sub-seed derivation.
const STREAM_A: u64 = 1;
const STREAM_H: u64 = 2;
const STREAM_X: u64 = 3;
const STREAM_W: u64 = 4;

impl ProblemInstance {
    /// Draws an instance with `B` = first `k` unitary DFT columns.
    pub fn generate(cfg: &InstanceConfig, seed: u64) -> Result<Self> {
        let dims = cfg.dims;
        dims.validate()?;
        let a = match &cfg.matrix {
            MatrixKind::Gaussian => gen_gaussian_a(&dims, seed::mix(seed, &[STREAM_A])),
            MatrixKind::Fourier => gen_fourier_a(&dims, seed::mix(seed, &[STREAM_A])),
            MatrixKind::CircularArray {
                grid_degrees,
                spacing_wavelengths,
            } => {
                if grid_degrees.len() != dims.signal_len {
                    return Err(Error::shape(
                        format!("angle grid of length N={}", dims.signal_len),
                        format!("{}", grid_degrees.len()),
                    ));
                }
                gen_circular_array_a(dims.measurements, grid_degrees, *spacing_wavelengths)?
            }
            MatrixKind::Custom => {
                return Err(Error::InvalidParameter("cannot generate a custom matrix".into()));
            }
        };
        let b = gen_dft_b(dims.measurements, dims.subspace_dim)?;
        let h0 = gen_dense_h(dims.subspace_dim, seed::mix(seed, &[STREAM_H]), cfg.h_entries);
        let (x0, support) = gen_sparse_x(dims.signal_len, dims.sparsity, seed::mix(seed, &[STREAM_X]), cfg.x_entries)?;
        let y_clean = measure(&a, &b, &h0, &x0, None)?;
        let x0_frob = h0.norm() * x0.norm();
        let noisy = add_noise_snr(&y_clean, cfg.snr_db.unwrap_or(f64::INFINITY), x0_frob, seed::mix(seed, &[STREAM_W]))?;
        Ok(ProblemInstance {
            dims,
            meta: InstanceMeta {
                seed: Some(seed),
                matrix: cfg.matrix.clone(),
                basis: BasisKind::Dft,
                snr_db: cfg.snr_db,
                sigma: noisy.sigma,
            },
            a,
            b,
            h0,
            x0,
            support,
            w: noisy.w,
            y: noisy.y,
            eta: noisy.eta,
        })
    }

    /// Assembles an instance from explicit parts; `y` is computed.
    pub fn from_parts(a: CMatrix, b: CMatrix, h0: CVector, x0: CVector, w: Option<CVector>, eta: f64) -> Result<Self> {
        let support_idx: Vec<usize> = x0
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(j, _)| j)
            .collect();
        let dims = Dimensions::new(a.nrows(), a.ncols(), b.ncols(), support_idx.len().max(1))?;
        let support = SupportSet::new(support_idx, a.ncols())?;
        let w = w.unwrap_or_else(|| DVector::zeros(a.nrows()));
        if !(eta >= 0.0) {
            return Err(Error::InvalidParameter(format!("eta must be nonnegative, got {eta}")));
        }
        let y = measure(&a, &b, &h0, &x0, Some(&w))?;
        Ok(ProblemInstance {
            dims,
            meta: InstanceMeta {
                seed: None,
                matrix: MatrixKind::Custom,
                basis: BasisKind::Custom,
                snr_db: None,
                sigma: 0.0,
            },
            a,
            b,
            h0,
            x0,
            support,
            w,
            y,
            eta,
        })
    }

    /// `X₀ = h₀ x₀ᵀ` (k×N).
    pub fn x0_matrix(&self) -> CMatrix {
        &self.h0 * self.x0.transpose()
    }

    pub fn is_noiseless(&self) -> bool {
        self.eta == 0.0 && self.w.iter().all(|z| z.norm_sqr() == 0.0)
    }

    /// Shape consistency of all stored arrays.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dims;
        d.validate()?;
        let check = |what: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                Err(Error::shape(format!("{what} {want:?}"), format!("{got:?}")))
            } else {
                Ok(())
            }
        };
        check("A", self.a.shape(), (d.measurements, d.signal_len))?;
        check("B", self.b.shape(), (d.measurements, d.subspace_dim))?;
        check("h0", (self.h0.len(), 1), (d.subspace_dim, 1))?;
        check("x0", (self.x0.len(), 1), (d.signal_len, 1))?;
        check("w", (self.w.len(), 1), (d.measurements, 1))?;
        check("y", (self.y.len(), 1), (d.measurements, 1))?;
        if let Some(&j) = self.support.indices().iter().find(|&&j| j >= d.signal_len) {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: d.signal_len,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let inst = Self::from_json(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        inst.validate()?;
        Ok(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(l: usize, n_sig: usize, k: usize, n: usize) -> Dimensions {
        Dimensions::new(l, n_sig, k, n).unwrap()
    }

    #[test]
    fn dimensions_reject_bad_values() {
        assert!(Dimensions::new(0, 4, 1, 1).is_err());
        assert!(Dimensions::new(4, 4, 5, 1).is_err());
        assert!(Dimensions::new(4, 4, 1, 5).is_err());
        assert!(Dimensions::new(4, 4, 1, 0).is_err());
        assert!(Dimensions::new(4, 4, 4, 4).is_ok());
    }

    #[test]
    fn support_set_validation() {
        let s = SupportSet::new(vec![5, 1, 3], 6).unwrap();
        assert_eq!(s.indices(), &[1, 3, 5]);
        assert!(SupportSet::new(vec![1, 1], 6).is_err());
        assert!(matches!(SupportSet::new(vec![6], 6), Err(Error::IndexOutOfRange { .. })));
        assert_eq!(s.lifted(2), vec![2, 3, 6, 7, 10, 11]);
    }

    #[test]
    fn gaussian_a_is_deterministic() {
        let d = dims(2, 3, 1, 1);
        assert_eq!(gen_gaussian_a(&d, 11), gen_gaussian_a(&d, 11));
        assert_ne!(gen_gaussian_a(&d, 11), gen_gaussian_a(&d, 12));
    }

    #[test]
    fn gaussian_a_moments() {
        let d = dims(128, 256, 1, 1);
        let a = gen_gaussian_a(&d, 3);
        let count = (128 * 256) as f64;
        let mean = a.iter().map(|z| z.re).sum::<f64>() / count;
        let var = a.iter().map(|z| (z.re - mean).powi(2)).sum::<f64>() / count;
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "var {var}");
        assert!(a.iter().all(|z| z.im == 0.0));
        let root_l = 128f64.sqrt();
        for c in a.column_iter() {
            let norm = c.norm();
            assert!((root_l - 4.0..=root_l + 4.0).contains(&norm), "column norm {norm}");
        }
    }

    #[test]
    fn fourier_a_rows() {
        let d = dims(8, 16, 1, 1);
        let a = gen_fourier_a(&d, 5);
        assert!(a.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        for row in a.row_iter() {
            let energy: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            assert!((energy - 16.0).abs() < 1e-12);
        }
        let rows = fourier_rows(&d, 5);
        for (l, &r) in rows.iter().enumerate() {
            for c in 0..16 {
                let expected = Complex64::from_polar(1.0, -2.0 * PI * (r * c) as f64 / 16.0);
                assert!((a[(l, c)] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_rows_are_isotropic_on_average() {
        // E[a a*] = I_N for a row a of the partial DFT, up to Monte-Carlo error.
        let n_sig = 16;
        let draws = 10_000;
        let d = dims(draws, n_sig, 1, 1);
        let a = gen_fourier_a(&d, 77);
        let mut acc = DMatrix::<Complex64>::zeros(n_sig, n_sig);
        for row in a.row_iter() {
            let col = row.transpose();
            acc += &col * col.adjoint();
        }
        acc /= Complex64::new(draws as f64, 0.0);
        let eye = DMatrix::<Complex64>::identity(n_sig, n_sig);
        let worst = (acc - eye).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst <= 0.1, "max entry deviation {worst}");
    }

    #[test]
    fn dft_b_closed_forms() {
        let b = gen_dft_b(4, 1).unwrap();
        for l in 0..4 {
            assert!((b[(l, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let b = gen_dft_b(4, 2).unwrap();
        let expected = [
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, -0.5),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.0, 0.5),
        ];
        for l in 0..4 {
            assert!((b[(l, 1)] - expected[l]).norm() < 1e-15);
        }
        assert!(gen_dft_b(4, 5).is_err());
    }

    #[test]
    fn dft_b_is_orthonormal_and_flat() {
        for &(l, k) in &[(1, 1), (7, 3), (64, 4), (128, 15), (512, 512)] {
            let b = gen_dft_b(l, k).unwrap();
            let gram = b.adjoint() * &b;
            let dev = crate::linalg::hermitian_spectral_norm(&(gram - DMatrix::identity(k, k)));
            assert!(dev <= 1e-12, "L={l} k={k}: {dev}");
            let mu_max = b.iter().map(|z| z.norm()).fold(0.0, f64::max) * (l as f64).sqrt();
            assert!((mu_max - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_array_manifold() {
        let l = 16;
        let grid: Vec<f64> = (-90..90).map(f64::from).collect();
        let a = gen_circular_array_a(l, &grid, 0.5).unwrap();
        for c in a.column_iter() {
            assert!((c.norm() - (l as f64).sqrt()).abs() < 1e-12);
        }
        // θ = 0 has v = [0, 1].
        let t0 = grid.iter().position(|&t| t == 0.0).unwrap();
        let radius = 0.5 / (2.0 * (PI / l as f64).sin());
        for j in 0..l {
            let expected = Complex64::from_polar(1.0, -2.0 * PI * radius * (2.0 * PI * j as f64 / l as f64).cos());
            assert!((a[(j, t0)] - expected).norm() < 1e-12);
        }
        assert!(gen_circular_array_a(1, &grid, 0.5).is_err());
        assert!(gen_circular_array_a(4, &[], 0.5).is_err());
        assert!(gen_circular_array_a(4, &grid, 0.0).is_err());
    }

    #[test]
    fn circular_array_grid_is_nondegenerate() {
        let grid: Vec<f64> = (-90..90).map(f64::from).collect();
        let a = gen_circular_array_a(64, &grid, 0.5).unwrap();
        let gram = a.adjoint() * &a;
        for i in 0..grid.len() {
            for j in 0..i {
                assert!(gram[(i, j)].norm() < 64.0 - 1e-6, "columns {i},{j} collinear");
            }
        }
    }

    #[test]
    fn sparse_x_support_and_determinism() {
        let (x, s) = gen_sparse_x(20, 4, 9, Entries::Real).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(x.iter().filter(|z| z.norm() > 0.0).count(), 4);
        for &j in s.indices() {
            assert!(x[j].norm() > 0.0);
            assert_eq!(x[j].im, 0.0);
        }
        let (x2, s2) = gen_sparse_x(20, 4, 9, Entries::Real).unwrap();
        assert_eq!((x, s), (x2, s2));
        let (dense, all) = gen_sparse_x(6, 6, 1, Entries::Complex).unwrap();
        assert_eq!(all, SupportSet::full(6));
        assert!(dense.iter().all(|z| z.im != 0.0));
        assert!(gen_sparse_x(3, 4, 0, Entries::Real).is_err());
    }

    #[test]
    fn measure_special_cases() {
        let d = dims(3, 4, 3, 2);
        let a = gen_gaussian_a(&d, 1);
        let b = DMatrix::<Complex64>::identity(3, 3);
        let h = DVector::from_element(3, Complex64::new(1.0, 0.0));
        let (x, _) = gen_sparse_x(4, 2, 2, Entries::Complex).unwrap();
        let y = measure(&a, &b, &h, &x, None).unwrap();
        assert!((y - &a * &x).norm() < 1e-14);

        let w = DVector::from_fn(3, |i, _| Complex64::new(i as f64, 1.0));
        let zero = DVector::zeros(4);
        assert_eq!(measure(&a, &b, &h, &zero, Some(&w)).unwrap(), w);
        assert!(measure(&a, &b, &DVector::zeros(2), &x, None).is_err());
    }

    #[test]
    fn measure_matches_scalar_loop() {
        let d = dims(3, 4, 2, 2);
        let a = gen_fourier_a(&d, 4);
        let b = DMatrix::from_fn(3, 2, |i, j| Complex64::new(i as f64 - 0.5, j as f64 + 0.25));
        let h = gen_dense_h(2, 5, Entries::Complex);
        let (x, _) = gen_sparse_x(4, 2, 6, Entries::Complex).unwrap();
        let y = measure(&a, &b, &h, &x, None).unwrap();
        for l in 0..3 {
            let mut gain = Complex64::new(0.0, 0.0);
            for i in 0..2 {
                gain += b[(l, i)] * h[i];
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..4 {
                acc += gain * a[(l, j)] * x[j];
            }
            assert!((y[l] - acc).norm() <= 1e-12 * acc.norm().max(1.0));
        }
    }

    #[test]
    fn noise_scaling() {
        let y = DVector::from_element(128, Complex64::new(1.0, 0.0));
        let clean = add_noise_snr(&y, f64::INFINITY, 3.0, 1).unwrap();
        assert_eq!(clean.eta, 0.0);
        assert_eq!(clean.y, y);
        assert!(clean.w.iter().all(|z| z.norm() == 0.0));

        // √(128 + √512) = √150.6274…
        assert!((eta_factor(128) - 12.27303).abs() < 1e-5);

        let frob = 5.0f64;
        let target = 20.0;
        let mut mean_db = 0.0;
        for s in 0..100 {
            let noisy = add_noise_snr(&y, target, frob, s).unwrap();
            assert!((noisy.eta / noisy.sigma - eta_factor(128)).abs() < 1e-12);
            let realized = 10.0 * (frob * frob / noisy.w.norm_squared()).log10();
            assert!((realized - target).abs() <= 2.0);
            mean_db += realized / 100.0;
        }
        assert!((mean_db - target).abs() <= 1.0, "mean realized SNR {mean_db}");
        assert!(add_noise_snr(&y, f64::NAN, 1.0, 0).is_err());
    }

    #[test]
    fn generated_instance_invariants() {
        let cfg = InstanceConfig {
            snr_db: Some(30.0),
            ..InstanceConfig::noiseless(dims(16, 32, 2, 3), MatrixKind::Fourier)
        };
        let inst = ProblemInstance::generate(&cfg, 42).unwrap();
        inst.validate().unwrap();
        assert_eq!(inst.support.len(), 3);
        assert!(inst.w.norm() > 0.0);
        let y = measure(&inst.a, &inst.b, &inst.h0, &inst.x0, Some(&inst.w)).unwrap();
        assert!((y - &inst.y).norm() <= 1e-12 * inst.y.norm());
        assert_eq!(ProblemInstance::generate(&cfg, 42).unwrap(), inst);

        let clean = ProblemInstance::generate(&InstanceConfig::noiseless(dims(16, 32, 2, 3), MatrixKind::Gaussian), 1).unwrap();
        assert!(clean.is_noiseless());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let cfg = InstanceConfig {
            snr_db: Some(10.0),
            h_entries: Entries::Complex,
            x_entries: Entries::Complex,
            ..InstanceConfig::noiseless(dims(8, 12, 3, 2), MatrixKind::Fourier)
        };
        let inst = ProblemInstance::generate(&cfg, 7).unwrap();
        let back = ProblemInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);
        for (p, q) in inst.y.iter().zip(back.y.iter()) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
    }
}
