//! Numerical checks of the sufficient conditions for exact recovery: local
//! isometry on the support, the least-squares dual certificate and the
//! golfing-scheme inexact certificate.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifting::{self, LiftedOperator};
use crate::linalg;
use crate::problem::{MatrixKind, ProblemInstance, SupportSet};
use crate::{CMatrix, CVector};

/// `α` used for the Gaussian operator-norm bound.
pub const GAUSSIAN_BOUND_ALPHA: f64 = 1.0;

/// How row indices are grouped into golfing blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLayout {
    /// `Γ_p = {pQ, …, (p+1)Q − 1}`.
    Contiguous,
    /// `Γ_p = {p, p + P, p + 2P, …}`. With DFT `B` and `k ≤ Q` every block is
    /// exactly tight.
    #[default]
    Interleaved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub layout: BlockLayout,
    pub block_size: usize,
    pub blocks: Vec<Vec<usize>>,
    /// `‖T_p − (Q/L)I_k‖` with `T_p = Σ_{l∈Γ_p} b_l b_l*`.
    pub deviations: Vec<f64>,
    /// Whether every deviation is below `Q/(4L)`.
    pub within_bound: bool,
}

impl BlockPartition {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().copied().fold(0.0, f64::max)
    }
}

/// Splits the rows of `B` into blocks of size `q` with the default layout.
pub fn partition_blocks(b: &CMatrix, q: usize) -> Result<BlockPartition> {
    partition_blocks_with(b, q, BlockLayout::default())
}

pub fn partition_blocks_with(b: &CMatrix, q: usize, layout: BlockLayout) -> Result<BlockPartition> {
    let l = b.nrows();
    if q == 0 || l == 0 || !l.is_multiple_of(q) {
        return Err(Error::InvalidParameter(format!("block size {q} must divide L = {l}")));
    }
    let p = l / q;
    let blocks: Vec<Vec<usize>> = (0..p)
        .map(|i| match layout {
            BlockLayout::Contiguous => (i * q..(i + 1) * q).collect(),
            BlockLayout::Interleaved => (0..q).map(|m| i + m * p).collect(),
        })
        .collect();
    let k = b.ncols();
    let target = q as f64 / l as f64;
    let deviations: Vec<f64> = blocks
        .iter()
        .map(|rows| {
            let sub = DMatrix::from_fn(rows.len(), k, |r, c| b[(rows[r], c)]);
            // Σ b_l b_l* with b_l the conjugated rows of B.
            let mut t = sub.adjoint() * &sub;
            for i in 0..k {
                t[(i, i)] -= Complex64::new(target, 0.0);
            }
            linalg::hermitian_spectral_norm(&t)
        })
        .collect();
    let within_bound = deviations.iter().all(|&d| d < target / 4.0);
    Ok(BlockPartition {
        layout,
        block_size: q,
        blocks,
        deviations,
        within_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    LeastSquares,
    Golfing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub method: CertificateMethod,
    /// `‖Φ_Ω*Φ_Ω − I‖`.
    pub delta: f64,
    /// Measured `‖Φ‖`.
    pub gamma: f64,
    /// High-probability bound on `‖Φ‖` for the matrix family, when known.
    pub gamma_bound: Option<f64>,
    /// `δ ≤ 1/2`, and `γ ≤ gamma_bound` when a bound is known.
    pub cond1_pass: bool,
    /// `‖q_Ω − vec(sgn(X₀))‖` (equivalently `‖W_P‖_F` for golfing).
    pub q_on_support_err: f64,
    /// `‖q_{Ω⊥}‖_∞`.
    pub q_off_support_inf: f64,
    /// `q_on_support_err ≤ 1/(4√2γ)` and `q_off_support_inf ≤ 1/2`.
    pub cond2_pass: bool,
    /// `‖W_p‖_F` for `p = 0..P` (golfing only).
    pub w_norm_trace: Vec<f64>,
    /// `‖Φ_{p,Ω}*Φ_{p,Ω} − (Q/L)I‖` per golfing block.
    pub block_restricted_deviation: Vec<f64>,
    /// `‖p‖` with `q = Φ*p`.
    pub p_norm: f64,
    /// `‖p‖ ≤ √(2kn)`.
    pub p_norm_within_bound: bool,
    /// The restricted Gram matrix could not be inverted; the report then
    /// describes the trivial certificate `Y = 0`.
    pub gram_singular: bool,
    /// `cond1_pass ∧ cond2_pass`.
    pub passed: bool,
}

impl CertificateReport {
    /// Threshold on the support error from the second condition.
    pub fn support_threshold(&self) -> f64 {
        cond2_threshold(self.gamma)
    }

    /// Attaches an operator-norm bound and re-evaluates the first condition.
    pub fn with_gamma_bound(mut self, bound: Option<f64>) -> Self {
        self.gamma_bound = bound;
        self.cond1_pass = self.cond1_from_fields();
        self.passed = self.cond1_pass && self.cond2_pass;
        self
    }

    pub fn cond1_from_fields(&self) -> bool {
        self.delta <= 0.5 && self.gamma_bound.is_none_or(|b| self.gamma <= b)
    }

    /// Recomputes `cond2_pass` from the raw fields.
    pub fn cond2_from_fields(&self) -> bool {
        self.q_on_support_err <= self.support_threshold() && self.q_off_support_inf <= 0.5
    }

    /// `‖W_p‖_F / ‖W_{p−1}‖_F` for each golfing step.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.w_norm_trace.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

fn cond2_threshold(gamma: f64) -> f64 {
    1.0 / (4.0 * 2f64.sqrt() * gamma)
}

/// `‖Φ_Ω*Φ_Ω − I_{kn}‖`.
pub fn check_local_isometry(op: &LiftedOperator, omega: &SupportSet) -> Result<f64> {
    if omega.is_empty() {
        return Err(Error::InvalidParameter("support must be nonempty".into()));
    }
    lifting::local_isometry_defect(op, omega)
}

/// Smallest `P` with `2^{−P}√(kn) ≤ 1/(4√2γ)` as solved for `P`:
/// `⌈log₂(4√(2kn)·γ)⌉`.
pub fn golfing_rounds(kn: usize, gamma: f64) -> usize {
    let v = (4.0 * (2.0 * kn as f64).sqrt() * gamma).log2();
    v.ceil().max(1.0) as usize
}

/// Smallest divisor `Q` of `l` with `Q·rounds ≥ l`, i.e. the tightest
/// block size that still leaves at most `rounds` blocks.
pub fn golfing_block_size(l: usize, rounds: usize) -> usize {
    let rounds = rounds.max(1);
    (1..=l).find(|q| l.is_multiple_of(*q) && q * rounds >= l).unwrap_or(l)
}

/// `vec(sgn(X₀))` on the lifted support, in the column order of
/// [`SupportSet::lifted`].
fn support_signs(sgn_x0: &CMatrix, columns: &[usize], k: usize) -> CVector {
    CVector::from_iterator(columns.len(), columns.iter().map(|&c| linalg::sgn(sgn_x0[(c % k, c / k)])))
}

fn check_sign_shape(op: &LiftedOperator, sgn_x0: &CMatrix) -> Result<()> {
    let want = (op.subspace_dim(), op.signal_len());
    if sgn_x0.shape() != want {
        return Err(Error::shape(format!("{want:?}"), format!("{:?}", sgn_x0.shape())));
    }
    Ok(())
}

fn off_support_inf(q: &[Complex64], columns: &[usize]) -> f64 {
    let mut on = vec![false; q.len()];
    columns.iter().for_each(|&c| on[c] = true);
    q.iter()
        .zip(on)
        .filter(|(_, s)| !s)
        .map(|(z, _)| z.norm())
        .fold(0.0, f64::max)
}

struct Base {
    delta: f64,
    gamma: f64,
    kn: usize,
}

fn base(op: &LiftedOperator, omega: &SupportSet, restricted: &CMatrix) -> Base {
    let mut gram = restricted.adjoint() * restricted;
    for i in 0..gram.nrows() {
        gram[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    Base {
        delta: linalg::hermitian_spectral_norm(&gram),
        gamma: linalg::spectral_norm(op.phi()),
        kn: op.subspace_dim() * omega.len(),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    method: CertificateMethod,
    b: &Base,
    on_err: f64,
    off_inf: f64,
    p_norm: f64,
    gram_singular: bool,
    w_norm_trace: Vec<f64>,
    block_restricted_deviation: Vec<f64>,
) -> CertificateReport {
    let cond1_pass = b.delta <= 0.5;
    let cond2_pass = on_err <= cond2_threshold(b.gamma) && off_inf <= 0.5;
    CertificateReport {
        method,
        delta: b.delta,
        gamma: b.gamma,
        gamma_bound: None,
        cond1_pass,
        q_on_support_err: on_err,
        q_off_support_inf: off_inf,
        cond2_pass,
        w_norm_trace,
        block_restricted_deviation,
        p_norm,
        p_norm_within_bound: p_norm <= (2.0 * b.kn as f64).sqrt(),
        gram_singular,
        passed: cond1_pass && cond2_pass,
    }
}

/// Least-squares certificate `p = Φ_Ω(Φ_Ω*Φ_Ω)^{−1}vec(sgn(X₀))`, `q = Φ*p`.
pub fn exact_dual_certificate(op: &LiftedOperator, omega: &SupportSet, sgn_x0: &CMatrix) -> Result<CertificateReport> {
    check_sign_shape(op, sgn_x0)?;
    if omega.is_empty() {
        return Err(Error::InvalidParameter("support must be nonempty".into()));
    }
    let restricted = op.restrict(omega)?;
    let b = base(op, omega, &restricted.phi);
    let signs = support_signs(sgn_x0, &restricted.columns, op.subspace_dim());
    let gram = restricted.gram();
    let chol = (b.delta < 1.0).then(|| nalgebra::Cholesky::new(gram)).flatten();
    let Some(chol) = chol else {
        return Ok(finish(CertificateMethod::LeastSquares, &b, signs.norm(), 0.0, 0.0, true, Vec::new(), Vec::new()));
    };
    let p = &restricted.phi * chol.solve(&signs);
    let q = op.adjoint(p.as_slice());
    let on = linalg::gather(q.as_slice(), &restricted.columns);
    let on_err = (on - &signs).norm();
    let off = off_support_inf(q.as_slice(), &restricted.columns);
    Ok(finish(CertificateMethod::LeastSquares, &b, on_err, off, p.norm(), false, Vec::new(), Vec::new()))
}

/// Golfing iteration `Y_p = Y_{p−1} + (L/Q)Φ_p*Φ_p(sgn(X₀) − Y_{p−1,Ω})` over
/// the blocks of `partition`, where `Φ_p` keeps the rows in `Γ_p`.
pub fn golfing_certificate(op: &LiftedOperator, omega: &SupportSet, sgn_x0: &CMatrix, partition: &BlockPartition) -> Result<CertificateReport> {
    check_sign_shape(op, sgn_x0)?;
    if omega.is_empty() {
        return Err(Error::InvalidParameter("support must be nonempty".into()));
    }
    let l = op.measurements();
    let q = partition.block_size;
    let mut seen = vec![false; l];
    for &r in partition.blocks.iter().flatten() {
        if r >= l || seen[r] {
            return Err(Error::InvalidParameter("partition does not match the operator's rows".into()));
        }
        seen[r] = true;
    }
    if partition.blocks.iter().any(|b| b.len() != q) || partition.blocks.len() * q != l {
        return Err(Error::InvalidParameter(format!("partition must cover L = {l} rows in blocks of {q}")));
    }
    let restricted = op.restrict(omega)?;
    let b = base(op, omega, &restricted.phi);
    let signs = support_signs(sgn_x0, &restricted.columns, op.subspace_dim());
    let gain = l as f64 / q as f64;
    let target = q as f64 / l as f64;

    let n = op.lifted_len();
    let mut y = CVector::zeros(n);
    let mut p_vec = CVector::zeros(l);
    let mut w = -signs.clone();
    let mut trace = vec![w.norm()];
    let mut block_dev = Vec::with_capacity(partition.blocks.len());
    for rows in &partition.blocks {
        let phi_p = DMatrix::from_fn(rows.len(), n, |r, c| op.phi()[(rows[r], c)]);
        let phi_p_omega = linalg::select_columns(&phi_p, &restricted.columns);
        let mut g = phi_p_omega.adjoint() * &phi_p_omega;
        for i in 0..g.nrows() {
            g[(i, i)] -= Complex64::new(target, 0.0);
        }
        block_dev.push(linalg::hermitian_spectral_norm(&g));
        // Residual sgn − Y_{p−1,Ω} = −W_{p−1}, pushed through Φ_p then Φ_p*.
        let coeff = (&phi_p_omega * &w) * Complex64::new(-gain, 0.0);
        for (r, &row) in rows.iter().enumerate() {
            p_vec[row] += coeff[r];
        }
        y += phi_p.adjoint() * &coeff;
        w = linalg::gather(y.as_slice(), &restricted.columns) - &signs;
        trace.push(w.norm());
    }
    let off = off_support_inf(y.as_slice(), &restricted.columns);
    Ok(finish(CertificateMethod::Golfing, &b, w.norm(), off, p_vec.norm(), false, trace, block_dev))
}

/// Options for [`certify_instance_with`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Also run the golfing scheme with this block size.
    pub golfing_block: Option<usize>,
    pub layout: BlockLayout,
}

/// Full check of an instance: geometry, least-squares certificate and, on
/// request, the golfing certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCertificate {
    pub geometry: lifting::GeometryScalars,
    pub least_squares: CertificateReport,
    pub golfing: Option<CertificateReport>,
    pub partition: Option<BlockPartition>,
    /// The least-squares report passes both conditions.
    pub passed: bool,
}

/// High-probability bound on `‖Φ‖` for the instance's matrix family.
pub fn gamma_bound_for(instance: &ProblemInstance) -> Option<f64> {
    let d = &instance.dims;
    match instance.meta.matrix {
        MatrixKind::Fourier => Some(lifting::gamma_bound_fourier(d.signal_len, d.subspace_dim)),
        MatrixKind::Gaussian => Some(lifting::gamma_bound_gaussian(d.signal_len, d.measurements, GAUSSIAN_BOUND_ALPHA)),
        _ => None,
    }
}

pub fn certify_instance(op: &LiftedOperator, instance: &ProblemInstance) -> Result<CertificateReport> {
    Ok(certify_instance_with(op, instance, &CertifyOptions::default())?.least_squares)
}

pub fn certify_instance_with(op: &LiftedOperator, instance: &ProblemInstance, opts: &CertifyOptions) -> Result<InstanceCertificate> {
    let x0 = instance.x0_matrix();
    if x0.shape() != (op.subspace_dim(), op.signal_len()) {
        return Err(Error::shape(
            format!("{}x{}", op.subspace_dim(), op.signal_len()),
            format!("{}x{}", x0.nrows(), x0.ncols()),
        ));
    }
    let sgn = x0.map(linalg::sgn);
    let geometry = lifting::geometry_scalars(op, &instance.b, &instance.support)?;
    let bound = gamma_bound_for(instance);
    let least_squares = exact_dual_certificate(op, &instance.support, &sgn)?.with_gamma_bound(bound);
    let (golfing, partition) = match opts.golfing_block {
        Some(q) => {
            let part = partition_blocks_with(&instance.b, q, opts.layout)?;
            let rep = golfing_certificate(op, &instance.support, &sgn, &part)?.with_gamma_bound(bound);
            (Some(rep), Some(part))
        }
        None => (None, None),
    };
    Ok(InstanceCertificate {
        geometry,
        passed: least_squares.passed,
        least_squares,
        golfing,
        partition,
    })
}
