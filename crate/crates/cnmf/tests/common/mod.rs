//! Shared fixtures for the integration suites: an independent PRNG, naive
//! dense linear algebra, full-matrix reference implementations of the
//! compressed objectives and their multiplicative/gradient updates, and a
//! plain Jacobi eigensolver. Everything here deliberately materializes the
//! large matrices the library avoids, so the factored code paths are
//! checked against straight-line arithmetic.

#![allow(dead_code)] // each integration binary uses a different subset

use cnmf::objectives::FactorPair;
use cnmf::sketching::{
    compress_one_sided, compress_two_sided, rangefinder_sketch, sample_gaussian_sketch,
    sample_orthonormal_sketch, shift_sigma, shift_sigma_regularized, Side,
};
use cnmf::solvers::{
    build_problem_one_sided_orthogonal, build_problem_one_sided_ridge, build_problem_two_sided,
    SketchedMUProblem,
};
use cnmf::DenseMatrix;

// ---------------------------------------------------------------------
// Independent PRNG (SplitMix64), separate from the library's generator.
// ---------------------------------------------------------------------

pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.wrapping_add(0x9E37_79B9_7F4A_7C15))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn usize_in(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() as usize) % (hi - lo + 1)
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = (self.uniform()).max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Entrywise uniform [0.1, 1.1) matrix — strictly positive.
    pub fn positive_matrix(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| self.uniform_in(0.1, 1.1))
    }
}

// ---------------------------------------------------------------------
// Naive dense linear algebra (triple loops, no library products).
// ---------------------------------------------------------------------

pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows(), "oracle matmul shape");
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for t in 0..a.cols() {
                s += a.get(i, t) * b.get(t, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

pub fn naive_transpose(a: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(a.cols(), a.rows(), |i, j| a.get(j, i))
}

pub fn naive_add(a: &DenseMatrix, b: &DenseMatrix, beta: f64) -> DenseMatrix {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) + beta * b.get(i, j))
}

pub fn frob_norm(a: &DenseMatrix) -> f64 {
    a.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ‖a − b‖_F / max(‖b‖_F, 1).
pub fn rel_frob_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
    let mut diff = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        diff += (x - y) * (x - y);
    }
    diff.sqrt() / frob_norm(b).max(1.0)
}

pub fn materialize(f: &FactorPair) -> DenseMatrix {
    naive_matmul(f.u(), &naive_transpose(f.v()))
}

fn identity(n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

fn ones_outer(n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |_, _| 1.0)
}

// ---------------------------------------------------------------------
// Dense reference problem: f(U,V) = constant − 2⟨C, UVᵀ⟩
//   + Tr[(UVᵀ)ᵀ·H_left·(UVᵀ)] + Tr[(UVᵀ)·H_right·(UVᵀ)ᵀ].
// All three compressed objectives reduce to this form once their Gram
// matrices are materialized.
// ---------------------------------------------------------------------

pub struct DenseQuadratic {
    /// m×m combined left Gram (zero matrix when absent).
    pub h_left: DenseMatrix,
    /// n×n combined right Gram (zero matrix when absent).
    pub h_right: DenseMatrix,
    /// m×n combined cross matrix.
    pub c: DenseMatrix,
    pub constant: f64,
}

impl DenseQuadratic {
    pub fn objective(&self, f: &FactorPair) -> f64 {
        let m = materialize(f);
        let mut cross = 0.0;
        for (x, y) in self.c.data().iter().zip(m.data()) {
            cross += x * y;
        }
        let hm = naive_matmul(&self.h_left, &m);
        let mut quad_left = 0.0;
        for (x, y) in m.data().iter().zip(hm.data()) {
            quad_left += x * y;
        }
        let mh = naive_matmul(&m, &self.h_right);
        let mut quad_right = 0.0;
        for (x, y) in m.data().iter().zip(mh.data()) {
            quad_right += x * y;
        }
        self.constant - 2.0 * cross + quad_left + quad_right
    }

    fn numerator_u(&self, v: &DenseMatrix) -> DenseMatrix {
        naive_matmul(&self.c, v)
    }

    fn denominator_u(&self, u: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
        // H_left·U·(VᵀV) + U·(Vᵀ·H_right·V)
        let gv = naive_matmul(&naive_transpose(v), v);
        let left = naive_matmul(&naive_matmul(&self.h_left, u), &gv);
        let vh = naive_matmul(&naive_transpose(v), &naive_matmul(&self.h_right, v));
        naive_add(&left, &naive_matmul(u, &vh), 1.0)
    }

    fn numerator_v(&self, u: &DenseMatrix) -> DenseMatrix {
        naive_matmul(&naive_transpose(&self.c), u)
    }

    fn denominator_v(&self, u: &DenseMatrix, v: &DenseMatrix) -> DenseMatrix {
        // V·(Uᵀ·H_left·U) + H_right·V·(UᵀU)
        let uh = naive_matmul(&naive_transpose(u), &naive_matmul(&self.h_left, u));
        let left = naive_matmul(v, &uh);
        let gu = naive_matmul(&naive_transpose(u), u);
        naive_add(&left, &naive_matmul(&naive_matmul(&self.h_right, v), &gu), 1.0)
    }

    /// ∇_U f = 2(D_U − N_U) evaluated at (U, V).
    pub fn gradient_u(&self, f: &FactorPair) -> DenseMatrix {
        let d = self.denominator_u(f.u(), f.v());
        let n = self.numerator_u(f.v());
        DenseMatrix::from_fn(d.rows(), d.cols(), |i, j| 2.0 * (d.get(i, j) - n.get(i, j)))
    }

    /// ∇_V f = 2(D_V − N_V) evaluated at (U, V).
    pub fn gradient_v(&self, f: &FactorPair) -> DenseMatrix {
        let d = self.denominator_v(f.u(), f.v());
        let n = self.numerator_v(f.u());
        DenseMatrix::from_fn(d.rows(), d.cols(), |i, j| 2.0 * (d.get(i, j) - n.get(i, j)))
    }

    fn guarded_sweep(target: &mut DenseMatrix, num: &DenseMatrix, den: &DenseMatrix, coeff: f64) {
        let mean = den.data().iter().sum::<f64>() / den.data().len() as f64;
        let guard = if mean > 0.0 { coeff * mean } else { coeff };
        for i in 0..target.rows() {
            for j in 0..target.cols() {
                let value = target.get(i, j) * num.get(i, j) / (den.get(i, j) + guard);
                target.set(i, j, value.max(0.0));
            }
        }
    }

    /// One multiplicative step mirroring the library's order: the U sweep
    /// uses the old V, the V sweep the updated U; each sweep's denominator
    /// guard is `coeff` times the mean denominator entry.
    pub fn mu_step(&self, f: &FactorPair, guard_coeff: f64) -> (DenseMatrix, DenseMatrix) {
        let mut u = f.u().clone();
        let v_old = f.v().clone();
        let num_u = self.numerator_u(&v_old);
        let den_u = self.denominator_u(&u, &v_old);
        Self::guarded_sweep(&mut u, &num_u, &den_u, guard_coeff);

        let mut v = v_old.clone();
        let num_v = self.numerator_v(&u);
        let den_v = self.denominator_v(&u, &v);
        Self::guarded_sweep(&mut v, &num_v, &den_v, guard_coeff);
        (u, v)
    }

    /// One projected-gradient step with both factors moved from the same
    /// (U, V) point, mirroring the library.
    pub fn pgd_step(&self, f: &FactorPair, alpha: f64) -> (DenseMatrix, DenseMatrix) {
        let gu = self.gradient_u(f);
        let gv = self.gradient_v(f);
        let u = DenseMatrix::from_fn(gu.rows(), gu.cols(), |i, j| {
            (f.u().get(i, j) - 0.5 * alpha * gu.get(i, j)).max(0.0)
        });
        let v = DenseMatrix::from_fn(gv.rows(), gv.cols(), |i, j| {
            (f.v().get(i, j) - 0.5 * alpha * gv.get(i, j)).max(0.0)
        });
        (u, v)
    }
}

/// Dense reference for the orthonormal-rows objective
/// ‖A(X−UVᵀ)‖² + λ‖(I−AᵀA)UVᵀ‖² + σ‖1ᵀ(X−UVᵀ)‖².
pub fn dense_orthogonal_problem(
    a: &DenseMatrix, // k×m with orthonormal rows
    x: &DenseMatrix,
    lambda: f64,
    sigma: f64,
) -> DenseQuadratic {
    let m = x.rows();
    let ata = naive_matmul(&naive_transpose(a), a);
    // (1−λ)AᵀA + λI + σ11ᵀ; the projector complement is idempotent for
    // orthonormal rows, so its quadratic form folds into the Gram.
    let mut h_left = DenseMatrix::from_fn(m, m, |i, j| (1.0 - lambda) * ata.get(i, j));
    h_left = naive_add(&h_left, &identity(m), lambda);
    h_left = naive_add(&h_left, &ones_outer(m), sigma);
    let s1 = naive_add(&ata, &ones_outer(m), sigma);
    let c = naive_matmul(&s1, x);
    let ax = naive_matmul(a, x);
    let col_sums: f64 = (0..x.cols())
        .map(|j| {
            let s: f64 = (0..m).map(|i| x.get(i, j)).sum();
            s * s
        })
        .sum();
    DenseQuadratic {
        h_left,
        h_right: DenseMatrix::zeros(x.cols(), x.cols()),
        c,
        constant: frob_norm(&ax).powi(2) + sigma * col_sums,
    }
}

/// Dense reference for the ridge objective
/// ‖A(X−UVᵀ)‖² + λ‖UVᵀ‖² + σ‖1ᵀ(X−UVᵀ)‖².
pub fn dense_ridge_problem(
    a: &DenseMatrix, // k×m
    x: &DenseMatrix,
    lambda: f64,
    sigma: f64,
) -> DenseQuadratic {
    let m = x.rows();
    let ata = naive_matmul(&naive_transpose(a), a);
    let s1 = naive_add(&ata, &ones_outer(m), sigma);
    let h_left = naive_add(&s1, &identity(m), lambda);
    let c = naive_matmul(&s1, x);
    let ax = naive_matmul(a, x);
    let col_sums: f64 = (0..x.cols())
        .map(|j| {
            let s: f64 = (0..m).map(|i| x.get(i, j)).sum();
            s * s
        })
        .sum();
    DenseQuadratic {
        h_left,
        h_right: DenseMatrix::zeros(x.cols(), x.cols()),
        c,
        constant: frob_norm(&ax).powi(2) + sigma * col_sums,
    }
}

/// Dense reference for the two-sided objective
/// ‖A1(X−UVᵀ)‖² + ‖(X−UVᵀ)A2‖² + λ1‖P⊥_{Q1}UVᵀ‖² + λ2‖UVᵀP⊥_{Q2}‖²
/// + σ1‖1ᵀ(X−UVᵀ)‖² + σ2‖(X−UVᵀ)1‖².
#[allow(clippy::too_many_arguments)]
pub fn dense_two_sided_problem(
    a1: &DenseMatrix, // k1×m
    a2: &DenseMatrix, // n×k2
    x: &DenseMatrix,
    q1: &DenseMatrix, // m×k1' orthonormal columns
    q2: &DenseMatrix, // n×k2' orthonormal columns
    lambda1: f64,
    lambda2: f64,
    sigma1: f64,
    sigma2: f64,
) -> DenseQuadratic {
    let (m, n) = (x.rows(), x.cols());
    let s1 = naive_add(
        &naive_matmul(&naive_transpose(a1), a1),
        &ones_outer(m),
        sigma1,
    );
    let s2 = naive_add(&naive_matmul(a2, &naive_transpose(a2)), &ones_outer(n), sigma2);
    let p1 = naive_add(&identity(m), &naive_matmul(q1, &naive_transpose(q1)), -1.0);
    let p2 = naive_add(&identity(n), &naive_matmul(q2, &naive_transpose(q2)), -1.0);
    let h_left = naive_add(&s1, &p1, lambda1);
    let h_right = naive_add(&s2, &p2, lambda2);
    let c = naive_add(&naive_matmul(&s1, x), &naive_matmul(x, &s2), 1.0);
    let a1x = naive_matmul(a1, x);
    let xa2 = naive_matmul(x, a2);
    let col_sq: f64 = (0..n)
        .map(|j| {
            let s: f64 = (0..m).map(|i| x.get(i, j)).sum();
            s * s
        })
        .sum();
    let row_sq: f64 = (0..m)
        .map(|i| {
            let s: f64 = (0..n).map(|j| x.get(i, j)).sum();
            s * s
        })
        .sum();
    DenseQuadratic {
        h_left,
        h_right,
        c,
        constant: frob_norm(&a1x).powi(2)
            + frob_norm(&xa2).powi(2)
            + sigma1 * col_sq
            + sigma2 * row_sq,
    }
}

// ---------------------------------------------------------------------
// Randomized instances pairing a library problem with its dense oracle.
// ---------------------------------------------------------------------

pub struct Instance {
    pub x: DenseMatrix,
    pub problem: SketchedMUProblem,
    pub oracle: DenseQuadratic,
    pub r: usize,
    pub label: &'static str,
}

/// Builds a random certified instance. `kind % 3` selects the builder:
/// 0 = one-sided orthonormal (orthonormal or rangefinder sketch),
/// 1 = one-sided ridge (Gaussian sketch), 2 = two-sided (Gaussian pair).
pub fn random_instance(kind: u8, seed: u64) -> Instance {
    let mut rng = TestRng::new(seed ^ 0xACCE_55ED);
    let m = rng.usize_in(8, 40);
    let n = rng.usize_in(8, 40);
    let r = rng.usize_in(1, 5);
    let k = rng.usize_in(2, 10.min(m.min(n)));
    let x = rng.positive_matrix(m, n);
    match kind % 3 {
        0 => {
            let lambda = rng.uniform();
            let a = if seed % 2 == 0 {
                sample_orthonormal_sketch(k, m, seed, Side::Left).unwrap()
            } else {
                rangefinder_sketch(&x, k, seed, Side::Left).unwrap()
            };
            let record = compress_one_sided(&x, &a).unwrap();
            let sigma = shift_sigma(&record.a).value;
            let problem = build_problem_one_sided_orthogonal(&record, r, lambda, sigma).unwrap();
            let oracle = dense_orthogonal_problem(&record.a.matrix, &x, lambda, sigma);
            Instance {
                x,
                problem,
                oracle,
                r,
                label: "one_sided_orthogonal",
            }
        }
        1 => {
            let lambda = rng.uniform_in(0.0, 2.0);
            let a = sample_gaussian_sketch(k, m, seed, None, Side::Left).unwrap();
            let record = compress_one_sided(&x, &a).unwrap();
            let sigma = shift_sigma(&record.a).value;
            let problem = build_problem_one_sided_ridge(&record, r, lambda, sigma).unwrap();
            let oracle = dense_ridge_problem(&record.a.matrix, &x, lambda, sigma);
            Instance {
                x,
                problem,
                oracle,
                r,
                label: "one_sided_ridge",
            }
        }
        _ => {
            let lambda1 = rng.uniform();
            let lambda2 = rng.uniform();
            let a1 = sample_gaussian_sketch(k, m, seed, None, Side::Left).unwrap();
            let a2 = sample_gaussian_sketch(k, n, seed.wrapping_add(1), None, Side::Right).unwrap();
            let record = compress_two_sided(&x, &a1, &a2).unwrap();
            let sigma1 = shift_sigma_regularized(&record.a1, lambda1, &record.q1)
                .unwrap()
                .value;
            let sigma2 = shift_sigma_regularized(&record.a2, lambda2, &record.q2)
                .unwrap()
                .value;
            let problem =
                build_problem_two_sided(&record, r, lambda1, lambda2, sigma1, sigma2).unwrap();
            let oracle = dense_two_sided_problem(
                &record.a1.matrix,
                &record.a2.matrix,
                &x,
                &record.q1,
                &record.q2,
                lambda1,
                lambda2,
                sigma1,
                sigma2,
            );
            Instance {
                x,
                problem,
                oracle,
                r,
                label: "two_sided",
            }
        }
    }
}

/// Random strictly positive factors for an instance.
pub fn random_factors(m: usize, n: usize, r: usize, seed: u64) -> FactorPair {
    let mut rng = TestRng::new(seed ^ 0xFAC7_0125);
    FactorPair::new(rng.positive_matrix(m, r), rng.positive_matrix(n, r)).unwrap()
}

// ---------------------------------------------------------------------
// Cyclic Jacobi eigensolver for symmetric matrices (oracle for singular
// values: σ(A) = √eig(AAᵀ)).
// ---------------------------------------------------------------------

pub fn sym_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
    assert_eq!(a.rows(), a.cols(), "oracle eigensolver needs a square matrix");
    let n = a.rows();
    let mut m: Vec<f64> = a.data().to_vec();
    let idx = |i: usize, j: usize| i * n + j;
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().max(1e-300);
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[idx(i, j)] * m[idx(i, j)];
            }
        }
        if off <= 1e-28 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m[idx(i, p)];
                    let aiq = m[idx(i, q)];
                    m[idx(i, p)] = c * aip - s * aiq;
                    m[idx(i, q)] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = m[idx(p, j)];
                    let aqj = m[idx(q, j)];
                    m[idx(p, j)] = c * apj - s * aqj;
                    m[idx(q, j)] = s * apj + c * aqj;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[idx(i, i)]).collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigs
}

// ---------------------------------------------------------------------
// Orthonormal test fixtures.
// ---------------------------------------------------------------------

/// Random matrix with exactly orthonormal columns (requires rows >= cols),
/// built by modified Gram–Schmidt with one re-orthogonalization pass.
/// Useful for constructing matrices with prescribed singular values.
pub fn orthonormal_columns(rows: usize, cols: usize, rng: &mut TestRng) -> DenseMatrix {
    assert!(rows >= cols, "orthonormal columns need rows >= cols");
    let mut q = vec![vec![0.0f64; rows]; cols];
    for col in q.iter_mut() {
        for v in col.iter_mut() {
            *v = rng.normal();
        }
    }
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let proj: f64 = (0..rows).map(|t| q[i][t] * q[j][t]).sum();
                for t in 0..rows {
                    q[j][t] -= proj * q[i][t];
                }
            }
        }
        let norm: f64 = (0..rows).map(|t| q[j][t] * q[j][t]).sum::<f64>().sqrt();
        assert!(norm > 1e-8, "degenerate draw in orthonormal_columns");
        for t in 0..rows {
            q[j][t] /= norm;
        }
    }
    DenseMatrix::from_fn(rows, cols, |i, j| q[j][i])
}
