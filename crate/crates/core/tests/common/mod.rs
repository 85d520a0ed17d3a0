//! Dense-matrix oracles shared by the integration tests. Each one works on
//! explicit `2^N x 2^N` matrices and shares no code with the library's
//! simulators beyond the model and schedule types.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use ringanneal::{RingModel, Schedule};

pub type CMatrix = DMatrix<Complex64>;

/// Coupling list in site order, rebuilt from the ring definition.
pub fn oracle_couplings(n: usize, j_r: f64, j_l: f64, j: f64) -> Vec<f64> {
    (1..=n)
        .map(|site| {
            if site == n {
                -j_r
            } else if site == (n - 1) / 2 || site == (n + 1) / 2 {
                j_l
            } else {
                j
            }
        })
        .collect()
}

/// Spin of site `s` (1-based) in basis state `x`: bit 0 is `+1`.
pub fn spin(x: usize, s: usize) -> f64 {
    if (x >> (s - 1)) & 1 == 0 { 1.0 } else { -1.0 }
}

pub fn brute_energy(couplings: &[f64], x: usize) -> f64 {
    let n = couplings.len();
    -(1..=n)
        .map(|s| couplings[s - 1] * spin(x, s) * spin(x, s % n + 1))
        .sum::<f64>()
}

/// Real symmetric `(1 - A) H_d + A H_p` as a dense matrix.
pub fn dense_hamiltonian(couplings: &[f64], a: f64) -> DMatrix<f64> {
    let n = couplings.len();
    let dim = 1usize << n;
    let mut h = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        h[(x, x)] = a * brute_energy(couplings, x);
        for q in 0..n {
            h[(x ^ (1 << q), x)] -= 1.0 - a;
        }
    }
    h
}

pub fn plus_state(n: usize) -> DVector<Complex64> {
    let dim = 1usize << n;
    DVector::from_element(dim, Complex64::new((dim as f64).powf(-0.5), 0.0))
}

/// `exp(-i h t) psi` through the eigendecomposition of real symmetric `h`.
pub fn apply_exp(h: &DMatrix<f64>, t: f64, psi: &DVector<Complex64>) -> DVector<Complex64> {
    let eig = h.clone().symmetric_eigen();
    let v = eig.eigenvectors.map(|r| Complex64::new(r, 0.0));
    let mut c = v.adjoint() * psi;
    for (k, ck) in c.iter_mut().enumerate() {
        *ck *= Complex64::from_polar(1.0, -eig.eigenvalues[k] * t);
    }
    v * c
}

/// Time-ordered propagator of `H(A(t))` by `steps` exponential-midpoint
/// steps; returns the final state.
pub fn exact_evolve(couplings: &[f64], schedule: &Schedule, steps: usize) -> DVector<Complex64> {
    let n = couplings.len();
    let h = schedule.total_time() / steps as f64;
    let mut psi = plus_state(n);
    for s in 0..steps {
        let a = schedule.value_at((s as f64 + 0.5) * h);
        psi = apply_exp(&dense_hamiltonian(couplings, a), h, &psi);
    }
    psi
}

pub fn problem_energy(couplings: &[f64], psi: &DVector<Complex64>) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(x, a)| a.norm_sqr() * brute_energy(couplings, x))
        .sum()
}

/// Final `<H_p>` of the exact propagator.
pub fn exact_energy(model: &RingModel, schedule: &Schedule, steps: usize) -> f64 {
    problem_energy(model.couplings(), &exact_evolve(model.couplings(), schedule, steps))
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

fn pauli_x() -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

fn pauli_z() -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[l, o, o, -l])
}

/// `op` on site `s` (1-based) of `n`; site 1 is the least significant bit.
pub fn site_operator(n: usize, s: usize, op: &CMatrix) -> CMatrix {
    let id = CMatrix::identity(2, 2);
    let mut m = CMatrix::identity(1, 1);
    for site in (1..=n).rev() {
        m = kron(&m, if site == s { op } else { &id });
    }
    m
}

pub fn dense_driver(n: usize) -> CMatrix {
    let mut h = CMatrix::zeros(1 << n, 1 << n);
    for s in 1..=n {
        h -= site_operator(n, s, &pauli_x());
    }
    h
}

pub fn dense_problem(couplings: &[f64]) -> CMatrix {
    let n = couplings.len();
    let mut h = CMatrix::zeros(1 << n, 1 << n);
    for s in 1..=n {
        let zz = site_operator(n, s, &pauli_z()) * site_operator(n, s % n + 1, &pauli_z());
        h -= zz * Complex64::new(couplings[s - 1], 0.0);
    }
    h
}

/// Dimension of the real Lie algebra generated by `i H_d` and `i H_p`,
/// computed with dense commutators and Gram-Schmidt rank tests in the
/// Frobenius inner product of the real vector space of anti-Hermitian
/// matrices.
pub fn dense_lie_dimension(couplings: &[f64], tol: f64) -> usize {
    let n = couplings.len();
    let i = Complex64::new(0.0, 1.0);
    let gens = [dense_driver(n) * i, dense_problem(couplings) * i];
    let to_real = |m: &CMatrix| -> Vec<f64> { m.iter().flat_map(|c| [c.re, c.im]).collect() };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut mats: Vec<CMatrix> = Vec::new();
    let try_add = |m: CMatrix, basis: &mut Vec<Vec<f64>>, mats: &mut Vec<CMatrix>| {
        let mut v = to_real(&m);
        let scale = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if scale < tol {
            return;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm / scale > tol {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
            mats.push(m.map(|c| c / scale));
        }
    };
    for g in gens.iter() {
        try_add(g.clone(), &mut basis, &mut mats);
    }
    let mut next = 0;
    while next < mats.len() {
        let a = mats[next].clone();
        for j in 0..mats.len() {
            let b = mats[j].clone();
            try_add(&a * &b - &b * &a, &mut basis, &mut mats);
        }
        next += 1;
    }
    mats.len()
}
