#![allow(dead_code)]

use sparselift::lifting::LiftedOperator;
use sparselift::problem::{gen_dft_b, gen_gaussian_a, gen_sparse_x, measure, Dimensions, Entries};
use sparselift::{CMatrix, CVector, Complex64};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Real `k = 1` instance: `Φ = A/√L`, `y = Φx₀` with `x₀` `n`-sparse real.
pub fn real_k1_instance(l: usize, n_len: usize, n: usize, seed: u64) -> (LiftedOperator, CVector, CVector) {
    let dims = Dimensions::new(l, n_len, 1, n).unwrap();
    let a = gen_gaussian_a(&dims, seed);
    let b = gen_dft_b(l, 1).unwrap();
    let (x0, _) = gen_sparse_x(n_len, n, seed ^ 0x5eed, Entries::Real).unwrap();
    let h0 = CVector::from_element(1, c(1.0, 0.0));
    let y = measure(&a, &b, &h0, &x0, None).unwrap();
    (LiftedOperator::build(&a, &b).unwrap(), y, x0)
}

/// Minimum of `‖v‖₁` over `Φv = y` by enumerating every basic solution: all
/// `L`-column subsets with an invertible square system. Real data only.
pub fn lp_vertex_oracle(phi: &CMatrix, y: &CVector) -> f64 {
    let (l, n) = phi.shape();
    let real = phi.map(|z| z.re);
    let yr = y.map(|z| z.re);
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..l).collect();
    loop {
        let sub = nalgebra::DMatrix::from_fn(l, l, |r, c| real[(r, idx[c])]);
        if let Some(inv) = sub.clone().try_inverse() {
            if sub.determinant().abs() > 1e-12 {
                let v = inv * &yr;
                best = best.min(v.iter().map(|x| x.abs()).sum());
            }
        }
        // next combination
        let mut i = l;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < n - l + i {
                idx[i] += 1;
                for j in i + 1..l {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}
