use proptest::prelude::*;
use rand::Rng;

use sparselift::certify::{self, BlockLayout, CertifyOptions};
use sparselift::experiments::{self, ExperimentConfig, ExperimentKind, MatrixFamily};
use sparselift::lifting::{apply_adjoint, apply_lift, LiftedOperator};
use sparselift::problem::{
    gen_dft_b, gen_fourier_a, gen_gaussian_a, measure, Dimensions, InstanceConfig, MatrixKind, ProblemInstance,
};
use sparselift::solvers::{solve_bp, solve_bpdn, SolverOptions};
use sparselift::{seed, CMatrix, CVector, Complex64};

fn random_matrix(rows: usize, cols: usize, s: u64) -> CMatrix {
    let mut rng = seed::rng(s);
    CMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_vector(len: usize, s: u64) -> CVector {
    CVector::from_column_slice(random_matrix(len, 1, s).as_slice())
}

fn instance(matrix: MatrixKind, l: usize, n_len: usize, k: usize, n: usize, s: u64) -> (ProblemInstance, LiftedOperator) {
    let cfg = InstanceConfig::noiseless(Dimensions::new(l, n_len, k, n).unwrap(), matrix);
    let inst = ProblemInstance::generate(&cfg, s).unwrap();
    let op = LiftedOperator::build(&inst.a, &inst.b).unwrap();
    (inst, op)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(l in 1usize..10, n_len in 1usize..10, k in 1usize..6, s in any::<u64>()) {
        let a = random_matrix(l, n_len, s);
        let b = random_matrix(l, k, s ^ 1);
        let x = random_matrix(k, n_len, s ^ 2);
        let u = random_vector(l, s ^ 3);
        let lhs = apply_lift(&a, &b, &x).unwrap().dotc(&u);
        let rhs = x.dotc(&apply_adjoint(&a, &b, &u).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * x.norm() * u.norm());
    }

    #[test]
    fn measurement_matches_scalar_loop(l in 1usize..=8, n_len in 1usize..=8, k in 1usize..=8, s in any::<u64>()) {
        let a = random_matrix(l, n_len, s);
        let b = random_matrix(l, k, s ^ 1);
        let h = random_vector(k, s ^ 2);
        let x = random_vector(n_len, s ^ 3);
        let y = measure(&a, &b, &h, &x, None).unwrap();
        let mut want = CVector::zeros(l);
        for r in 0..l {
            let mut bh = Complex64::new(0.0, 0.0);
            for i in 0..k {
                bh += b[(r, i)] * h[i];
            }
            let mut ax = Complex64::new(0.0, 0.0);
            for j in 0..n_len {
                ax += a[(r, j)] * x[j];
            }
            want[r] = bh * ax;
        }
        prop_assert!((&y - &want).norm() <= 1e-12 * want.norm());
    }

    #[test]
    fn lifted_columns_follow_layout(l in 1usize..8, n_len in 1usize..8, k in 1usize..5, s in any::<u64>()) {
        let a = random_matrix(l, n_len, s);
        let b = random_matrix(l, k, s ^ 1);
        let op = LiftedOperator::build(&a, &b).unwrap();
        for j in 0..n_len {
            for i in 0..k {
                let c = op.column_index(i, j);
                prop_assert_eq!(c, j * k + i);
                for r in 0..l {
                    let want = b[(r, i)] * a[(r, j)];
                    prop_assert!((op.phi()[(r, c)] - want).norm() <= 1e-14 * (1.0 + want.norm()));
                }
            }
        }
    }

    #[test]
    fn dft_basis_is_orthonormal(l in 1usize..=512, frac in 0.0f64..1.0) {
        let k = 1 + ((l - 1) as f64 * frac) as usize;
        let b = gen_dft_b(l, k).unwrap();
        let mut g = b.adjoint() * &b;
        for i in 0..k {
            g[(i, i)] -= Complex64::new(1.0, 0.0);
        }
        prop_assert!(g.norm() <= 1e-10);
    }

    #[test]
    fn fourier_rows_are_unit_modulus(l in 1usize..40, n_len in 1usize..40, s in any::<u64>()) {
        let dims = Dimensions::new(l, n_len, 1, 1).unwrap();
        let a = gen_fourier_a(&dims, s);
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn generators_are_pure(l in 1usize..20, n_len in 1usize..20, s in any::<u64>()) {
        let dims = Dimensions::new(l, n_len, 1, 1).unwrap();
        prop_assert_eq!(gen_gaussian_a(&dims, s), gen_gaussian_a(&dims, s));
        prop_assert_eq!(gen_fourier_a(&dims, s), gen_fourier_a(&dims, s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cond2_flag_matches_fields(gauss in any::<bool>(), k in 1usize..4, n in 1usize..4, s in 0u64..10_000) {
        let matrix = if gauss { MatrixKind::Gaussian } else { MatrixKind::Fourier };
        let (inst, op) = instance(matrix, 32, 48, k, n, s);
        let opts = CertifyOptions { golfing_block: Some(8), layout: BlockLayout::Contiguous };
        let c = certify::certify_instance_with(&op, &inst, &opts).unwrap();
        for rep in [&c.least_squares, c.golfing.as_ref().unwrap()] {
            prop_assert_eq!(rep.cond2_pass, rep.cond2_from_fields());
            prop_assert_eq!(rep.cond1_pass, rep.cond1_from_fields());
            prop_assert_eq!(rep.passed, rep.cond1_pass && rep.cond2_pass);
        }
    }

    // A golfing step contracts by at most (L/Q)·deviation, so a block within
    // Q/(2L) at least halves ‖W‖.
    #[test]
    fn golfing_contracts_on_tight_blocks(
        gauss in any::<bool>(),
        interleaved in any::<bool>(),
        q_exp in 2u32..6,
        k in 1usize..4,
        n in 1usize..4,
        s in 0u64..10_000,
    ) {
        let matrix = if gauss { MatrixKind::Gaussian } else { MatrixKind::Fourier };
        let (inst, op) = instance(matrix, 64, 96, k, n, s);
        let q = 1usize << q_exp;
        let layout = if interleaved { BlockLayout::Interleaved } else { BlockLayout::Contiguous };
        let opts = CertifyOptions { golfing_block: Some(q), layout };
        let rep = certify::certify_instance_with(&op, &inst, &opts).unwrap().golfing.unwrap();
        let bound = q as f64 / (2.0 * 64.0);
        for (p, &dev) in rep.block_restricted_deviation.iter().enumerate() {
            let (before, after) = (rep.w_norm_trace[p], rep.w_norm_trace[p + 1]);
            prop_assert!(after <= (64.0 / q as f64) * dev * before + 1e-12);
            if dev <= bound {
                prop_assert!(after <= 0.5 * before + 1e-12);
            }
        }
    }

    #[test]
    fn bp_is_feasible_at_convergence(k in 1usize..3, n in 1usize..3, s in 0u64..10_000) {
        let (inst, op) = instance(MatrixKind::Gaussian, 24, 32, k, n, s);
        let opts = SolverOptions::noiseless();
        let sol = solve_bp(&op, &inst.y, &opts).unwrap();
        if sol.converged {
            let r = (op.apply(sol.v_hat.as_slice()) - &inst.y).norm();
            prop_assert!(r <= opts.tol_primal * (1.0 + inst.y.norm()) + 1e-12);
        }
    }

    #[test]
    fn bpdn_stays_in_noise_ball(k in 1usize..3, n in 1usize..3, snr in 10.0f64..40.0, s in 0u64..10_000) {
        let mut cfg = InstanceConfig::noiseless(Dimensions::new(24, 32, k, n).unwrap(), MatrixKind::Fourier);
        cfg.snr_db = Some(snr);
        let inst = ProblemInstance::generate(&cfg, s).unwrap();
        let op = LiftedOperator::build(&inst.a, &inst.b).unwrap();
        let opts = SolverOptions::noisy();
        let sol = solve_bpdn(&op, &inst.y, inst.eta, &opts).unwrap();
        if sol.converged {
            let r = (op.apply(sol.v_hat.as_slice()) - &inst.y).norm();
            prop_assert!(r <= inst.eta + opts.tol_primal * (1.0 + inst.y.norm()) + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn success_is_threshold_on_rel_error(threshold in 1e-6f64..0.5, base in any::<u64>()) {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::PhaseTransition, false);
        cfg.base_seed = base;
        cfg.trials = 2;
        cfg.measurements = 16;
        cfg.signal_len = 24;
        cfg.k_values = vec![1, 2];
        cfg.n_values = vec![1, 3];
        cfg.matrices = vec![MatrixFamily::Gaussian];
        cfg.success_threshold = threshold;
        cfg.solver_options.max_iters = 300;
        let records = experiments::run(&cfg).unwrap();
        prop_assert_eq!(records.len(), 8);
        for r in &records {
            prop_assert_eq!(r.success, r.rel_error <= threshold);
        }
        let again = experiments::run(&cfg).unwrap();
        for (a, b) in records.iter().zip(&again) {
            prop_assert_eq!(a.seed, b.seed);
            prop_assert_eq!(a.rel_error.to_bits(), b.rel_error.to_bits());
        }
    }
}
