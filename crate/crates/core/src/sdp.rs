//! The semi-nonnegativity program
//!
//! ```text
//!   min y   s.t.  y·I + Σ_k x_k (V_k ⊕ Ψ(V_k)) ⪰ 0,   Σ_k x_k Tr(V_k) = 1
//! ```
//!
//! over a Hermitian orthonormal basis `{V_k}`. Writing `X = Σ x_k V_k`, the
//! optimum is `y* = −sup { λ_min(X ⊕ Ψ(X)) : X = X†, Tr X = 1 }`, and
//!
//! * `y* < 0`  iff some `X ≻ 0` has `Ψ(X) ≻ 0` (semi-positive),
//! * `y* = 0`  on the semi-nonnegative boundary,
//! * `y* > 0`  iff no density matrix is mapped to a positive semidefinite one.
//!
//! The concave objective is maximized by a primal log-barrier method on
//! `(x, t)` with the LMI `X ⊕ Ψ(X) − t·I ≻ 0`; the affine constraint is
//! removed by parametrizing `X = I/n + Σ_{k≥2} x_k V_k`. Any feasible `t`
//! satisfies `X ⪰ t·I`, so the iterates stay in a compact set and the
//! supremum is attained.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atlas;
use crate::error::{Error, Result};
use crate::linalg::{self, c, direct_sum, eigh, identity, matrix_unit, r, trace, ComplexMatrix, Tolerances};
use crate::map::QuantumMap;

/// Orthonormal Hermitian basis of `n×n` matrices (generalized Gell-Mann).
#[derive(Clone, Debug)]
pub struct HermitianBasis {
    pub dim: usize,
    pub elements: Vec<ComplexMatrix>,
}

/// Order: `I/√n`; then for each pair `j < k` the symmetric `(E_jk + E_kj)/√2`
/// followed by `−i(E_jk − E_kj)/√2`; then the traceless diagonals
/// `(Σ_{j<l} E_jj − l·E_ll)/√(l(l+1))` for `l = 1..n−1`.
pub fn hermitian_basis(n: usize) -> HermitianBasis {
    assert!(n >= 1, "basis dimension must be positive");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements = vec![identity(n) * r(1.0 / (n as f64).sqrt())];
    for j in 0..n {
        for k in (j + 1)..n {
            elements.push((matrix_unit(n, j, k) + matrix_unit(n, k, j)) * r(s));
            elements.push((matrix_unit(n, j, k) - matrix_unit(n, k, j)) * c(0.0, -s));
        }
    }
    for l in 1..n {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut d = linalg::zeros(n, n);
        for j in 0..l {
            d[(j, j)] = r(norm);
        }
        d[(l, l)] = r(-(l as f64) * norm);
        elements.push(d);
    }
    HermitianBasis { dim: n, elements }
}

impl HermitianBasis {
    /// Real coordinates of a Hermitian matrix.
    pub fn coordinates(&self, x: &ComplexMatrix) -> Vec<f64> {
        self.elements.iter().map(|v| trace(&(v * x)).re).collect()
    }

    pub fn combine(&self, coords: &[f64]) -> ComplexMatrix {
        let mut out = linalg::zeros(self.dim, self.dim);
        for (v, &x) in self.elements.iter().zip(coords) {
            out += v * r(x);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Converged,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSettings {
    /// Number of independent starting points (the first is always `I/n`).
    pub restarts: usize,
    /// Newton-iteration budget per start.
    pub max_iters: usize,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_iters: 5000,
        }
    }
}

const NORM_CAP: f64 = 1e6;

#[derive(Clone, Debug, Serialize)]
pub struct SdpResult {
    pub y_star: f64,
    /// Coordinates of the witness in [`hermitian_basis`], length `n²`.
    pub x: Vec<f64>,
    /// `X = Σ x_k V_k`, trace one.
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub witness_state: ComplexMatrix,
    pub status: SdpStatus,
    /// `λ_min(X)` and `λ_min(Ψ(X))` recomputed at the witness.
    pub lambda_min_state: f64,
    pub lambda_min_image: f64,
    /// Spread of the optimal values over the restarts.
    pub restart_spread: f64,
    pub iterations: usize,
}

/// `f(X) = λ_min(X ⊕ Ψ(X))`.
pub fn sn_objective(map: &QuantumMap, x: &ComplexMatrix) -> Result<f64> {
    let img = map.apply(x)?;
    Ok(eigh(&linalg::hermitian_part(&direct_sum(x, &img))).min())
}

/// Solves the program for an HPTP map.
pub fn solve_sn_program(map: &QuantumMap, settings: &SdpSettings, tol: &Tolerances) -> Result<SdpResult> {
    map.require_hptp(tol)?;
    solve_feasibility(map, settings, tol)
}

/// Same program without the trace-preservation precondition; used for duals,
/// which are unital rather than trace-preserving.
pub fn solve_feasibility(map: &QuantumMap, settings: &SdpSettings, tol: &Tolerances) -> Result<SdpResult> {
    if !map.is_hp(tol) {
        return Err(Error::NonHptpInput(format!(
            "Choi matrix not Hermitian (defect {:.3e})",
            linalg::hermiticity_defect(map.choi())
        )));
    }
    let problem = Problem::new(map);
    let restarts = settings.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|k| problem.solve_from(problem.start(k), settings.max_iters, tol.sdp_tol))
        .collect();
    let spread = {
        let (lo, hi) = runs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), run| (lo.min(run.value), hi.max(run.value)));
        hi - lo
    };
    // argmax, lowest restart index on ties
    let best = runs
        .iter()
        .enumerate()
        .fold(None::<(usize, &Run)>, |acc, (k, run)| match acc {
            Some((_, b)) if b.value >= run.value => acc,
            _ => Some((k, run)),
        })
        .map(|(_, run)| run.clone())
        .expect("at least one restart");
    let iterations = runs.iter().map(|run| run.iterations).sum();

    let witness = problem.state(&best.coords);
    let image = map.apply(&witness)?;
    let basis = &problem.basis;
    let mut x = vec![1.0 / (problem.n as f64).sqrt()];
    x.extend_from_slice(&best.coords);
    debug_assert_eq!(x.len(), basis.elements.len());
    Ok(SdpResult {
        y_star: -best.value,
        x,
        lambda_min_state: eigh(&witness).min(),
        lambda_min_image: eigh(&linalg::hermitian_part(&image)).min(),
        witness_state: witness,
        status: if runs.iter().all(|run| run.converged) {
            SdpStatus::Converged
        } else {
            SdpStatus::IterationLimit
        },
        restart_spread: spread,
        iterations,
    })
}

#[derive(Clone, Debug)]
struct Run {
    coords: Vec<f64>,
    value: f64,
    converged: bool,
    iterations: usize,
}

struct Problem {
    n: usize,
    size: usize,
    basis: HermitianBasis,
    /// `(I/n) ⊕ Ψ(I/n)`.
    offset: ComplexMatrix,
    /// `V_k ⊕ Ψ(V_k)` for the traceless basis elements.
    directions: Vec<ComplexMatrix>,
}

impl Problem {
    fn new(map: &QuantumMap) -> Self {
        let n = map.dim_in();
        let basis = hermitian_basis(n);
        let lift = |v: &ComplexMatrix| {
            let img = linalg::hermitian_part(&map.apply(v).expect("basis matches input dimension"));
            direct_sum(v, &img)
        };
        let offset = lift(&(identity(n) * r(1.0 / n as f64)));
        let directions = basis.elements[1..].iter().map(lift).collect();
        Self {
            n,
            size: n + map.dim_out(),
            basis,
            offset,
            directions,
        }
    }

    fn state(&self, coords: &[f64]) -> ComplexMatrix {
        let mut x = identity(self.n) * r(1.0 / self.n as f64);
        for (v, &w) in self.basis.elements[1..].iter().zip(coords) {
            x += v * r(w);
        }
        linalg::hermitian_part(&x)
    }

    fn lifted(&self, coords: &[f64]) -> ComplexMatrix {
        let mut f = self.offset.clone();
        for (a, &w) in self.directions.iter().zip(coords) {
            f += a * r(w);
        }
        linalg::hermitian_part(&f)
    }

    fn objective(&self, coords: &[f64]) -> f64 {
        eigh(&self.lifted(coords)).min()
    }

    /// Start 0 is `I/n`; start `k > 0` mixes `I/n` half-and-half with a seeded
    /// random density matrix.
    fn start(&self, k: usize) -> Vec<f64> {
        if k == 0 || self.n == 1 {
            return vec![0.0; self.directions.len()];
        }
        let rho = atlas::random_density(self.n, 0x5d9_0000 + k as u64);
        let mixed = identity(self.n) * r(0.5 / self.n as f64) + rho * r(0.5);
        self.basis.coordinates(&mixed)[1..].to_vec()
    }

    /// Barrier value `−t − μ·log det(F)`, or `None` when `F` is not positive definite.
    fn barrier(&self, coords: &[f64], t: f64, mu: f64) -> Option<(f64, ComplexMatrix)> {
        let f = self.lifted(coords) - identity(self.size) * r(t);
        let chol = f.clone().cholesky()?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum();
        if !logdet.is_finite() {
            return None;
        }
        Some((-t - mu * logdet, chol.inverse()))
    }

    fn solve_from(&self, mut coords: Vec<f64>, max_iters: usize, sdp_tol: f64) -> Run {
        let dim = self.directions.len();
        let mut t = self.objective(&coords) - 1.0;
        let size = self.size as f64;
        let mu_final = (1e-2 * sdp_tol).min(1e-9) / size;
        let mut mu = 1.0;
        let mut iterations = 0;
        let mut converged = true;

        'outer: loop {
            loop {
                if iterations >= max_iters {
                    converged = false;
                    break 'outer;
                }
                iterations += 1;
                let Some((phi, finv)) = self.barrier(&coords, t, mu) else {
                    converged = false;
                    break 'outer;
                };
                // gradient and Hessian in (x_2.., t)
                let mut grads = Vec::with_capacity(dim + 1);
                let mut products = Vec::with_capacity(dim + 1);
                for a in &self.directions {
                    let b = &finv * a;
                    grads.push(-mu * trace(&b).re);
                    products.push(b);
                }
                grads.push(-1.0 + mu * trace(&finv).re);
                products.push(-finv.clone());
                let k = dim + 1;
                let mut hess = DMatrix::<f64>::zeros(k, k);
                for i in 0..k {
                    for j in i..k {
                        let h = mu * trace_of_product(&products[i], &products[j]);
                        hess[(i, j)] = h;
                        hess[(j, i)] = h;
                    }
                }
                let g = nalgebra::DVector::from_vec(grads);
                let step = match hess.clone().cholesky() {
                    Some(ch) => -ch.solve(&g),
                    None => match hess.lu().solve(&(-&g)) {
                        Some(s) => s,
                        None => break,
                    },
                };
                let decrement = -g.dot(&step);
                if !(decrement.is_finite()) || decrement / 2.0 <= 1e-12 {
                    break;
                }
                let mut s = 1.0;
                let mut accepted = false;
                for _ in 0..80 {
                    let trial: Vec<f64> = (0..dim).map(|i| coords[i] + s * step[i]).collect();
                    let t_trial = t + s * step[dim];
                    if let Some((phi_trial, _)) = self.barrier(&trial, t_trial, mu) {
                        if phi_trial <= phi - 0.25 * s * decrement {
                            coords = trial;
                            t = t_trial;
                            accepted = true;
                            break;
                        }
                    }
                    s *= 0.5;
                }
                if !accepted {
                    break;
                }
                if coords.iter().any(|w| w.abs() > NORM_CAP) {
                    converged = false;
                    break 'outer;
                }
            }
            if mu <= mu_final {
                break;
            }
            mu = (mu * 0.2).max(mu_final);
        }
        Run {
            value: self.objective(&coords),
            coords,
            converged,
            iterations,
        }
    }
}

fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, max_abs_diff};
    use proptest::prelude::*;

    fn solve(map: &QuantumMap) -> SdpResult {
        solve_sn_program(map, &SdpSettings::default(), &Tolerances::default()).unwrap()
    }

    #[test]
    fn basis_small_cases() {
        let b1 = hermitian_basis(1);
        assert_eq!(b1.elements, vec![identity(1)]);
        let b2 = hermitian_basis(2);
        let s = r(std::f64::consts::FRAC_1_SQRT_2);
        let want = [identity(2), linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z()];
        for (got, w) in b2.elements.iter().zip(want.iter()) {
            assert!(max_abs_diff(got, &(w * s)) < 1e-15);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        for n in 1..=4 {
            let b = hermitian_basis(n);
            assert_eq!(b.elements.len(), n * n);
            for (j, vj) in b.elements.iter().enumerate() {
                assert!(linalg::is_hermitian(vj, 0.0));
                if j > 0 {
                    assert!(trace(vj).norm() < 1e-15);
                }
                for (k, vk) in b.elements.iter().enumerate() {
                    let g = trace(&(vj * vk));
                    let want = if j == k { 1.0 } else { 0.0 };
                    assert!((g - r(want)).norm() < 1e-12, "n={n} ({j},{k})");
                }
            }
            let h = linalg::hermitian_part(&atlas::random_density(n, 3));
            assert!(max_abs_diff(&b.combine(&b.coordinates(&h)), &h) < 1e-12);
        }
    }

    #[test]
    fn identity_map_reaches_one_over_n() {
        for n in 1..=3 {
            let res = solve(&QuantumMap::identity(n));
            assert!(res.y_star <= -1.0 / n as f64 + 1e-7, "n={n}: {}", res.y_star);
            assert_eq!(res.status, SdpStatus::Converged);
            assert!((trace(&res.witness_state) - r(1.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn example2_sits_on_the_boundary() {
        let res = solve(&atlas::example2_psi());
        assert!(res.y_star.abs() <= 1e-6, "y* = {}", res.y_star);
        // the witness approaches |0><0|
        assert!((res.witness_state[(0, 0)].re - 1.0).abs() < 1e-3);
    }

    #[test]
    fn indefinite_replacement_value_is_one() {
        let ups = atlas::indefinite_replacement(2, &diag_real(&[2.0, -1.0])).unwrap();
        let res = solve(&ups);
        // f(X) ≤ λ_min(D) = −1 for every X and f(I/2) = −1
        assert!((res.y_star - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_rank_cptp_is_strictly_negative() {
        let dep = atlas::depolarizing(3, 0.4).unwrap();
        assert!(solve(&dep).y_star < -0.1);
        for seed in 0..5 {
            assert!(solve(&atlas::random_cptp(2, 3, seed)).y_star < 0.0);
        }
    }

    #[test]
    fn rejects_non_hptp() {
        let err = solve_sn_program(
            &QuantumMap::identity(2).scaled(2.0),
            &SdpSettings::default(),
            &Tolerances::default(),
        );
        assert!(matches!(err, Err(Error::NonHptpInput(_))));
        // the feasibility entry point only needs HP
        assert!(solve_feasibility(
            &QuantumMap::identity(2).scaled(2.0),
            &SdpSettings::default(),
            &Tolerances::default()
        )
        .is_ok());
    }

    #[test]
    fn iteration_limit_is_reported() {
        let settings = SdpSettings {
            restarts: 1,
            max_iters: 3,
        };
        let res = solve_sn_program(&atlas::random_cptp(2, 2, 1), &settings, &Tolerances::default()).unwrap();
        assert_eq!(res.status, SdpStatus::IterationLimit);
        assert!(res.y_star.is_finite());
    }

    #[test]
    fn solver_is_deterministic() {
        let psi = atlas::random_hptp(3, 2, 17);
        let a = solve(&psi);
        let b = solve(&psi);
        assert_eq!(a.y_star, b.y_star);
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn certificate_soundness() {
        for seed in 0..20 {
            let psi = atlas::random_hptp(2, 2, seed);
            let res = solve(&psi);
            // y* = −λ_min(X ⊕ Ψ(X)) exactly at the returned point
            let f = sn_objective(&psi, &res.witness_state).unwrap();
            assert!((res.y_star + f).abs() < 1e-12);
            if res.y_star < -Tolerances::default().sdp_tol {
                assert!(res.lambda_min_state > 0.0 && res.lambda_min_image > 0.0);
            }
            assert!(res.restart_spread < 1e-7, "restarts disagree: {}", res.restart_spread);
        }
    }

    /// Brute force over a grid of the Bloch ball: max over states of
    /// min(λ_min(ρ), λ_min(Ψ(ρ))).
    fn bloch_grid_sup(map: &QuantumMap, steps: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let h = 2.0 / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let (x, y, z) = (-1.0 + h * i as f64, -1.0 + h * j as f64, -1.0 + h * k as f64);
                    if x * x + y * y + z * z > 1.0 {
                        continue;
                    }
                    let rho = (identity(2) + linalg::pauli_x() * r(x) + linalg::pauli_y() * r(y) + linalg::pauli_z() * r(z))
                        * r(0.5);
                    best = best.max(sn_objective(map, &rho).unwrap());
                }
            }
        }
        best
    }

    #[test]
    fn agrees_with_bloch_grid_on_qubits() {
        // the optimum over trace-one X is never worse than over states
        for seed in 0..6 {
            let psi = atlas::random_hptp(2, 2, seed);
            let res = solve(&psi);
            let grid = bloch_grid_sup(&psi, 24);
            assert!(-res.y_star >= grid - 1e-9, "seed {seed}");
            if res.y_star <= 0.0 {
                // a state attains the optimum, so the grid gets close
                assert!(-res.y_star - grid < 0.15, "seed {seed}: {} vs {grid}", -res.y_star);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn objective_is_concave(seed in 0u64..100_000, lam in 0.0f64..1.0) {
            let psi = atlas::random_hptp(2, 3, seed);
            let basis = hermitian_basis(2);
            let mut g = atlas::rng(seed ^ 0xabc);
            let mut rand_trace_one = || {
                use rand::Rng;
                let mut coords: Vec<f64> = (0..4).map(|_| g.random_range(-1.0..1.0)).collect();
                coords[0] = std::f64::consts::FRAC_1_SQRT_2;
                basis.combine(&coords)
            };
            let (x1, x2) = (rand_trace_one(), rand_trace_one());
            let mid = &x1 * r(lam) + &x2 * r(1.0 - lam);
            let lhs = sn_objective(&psi, &mid).unwrap();
            let rhs = lam * sn_objective(&psi, &x1).unwrap() + (1.0 - lam) * sn_objective(&psi, &x2).unwrap();
            prop_assert!(lhs >= rhs - 1e-9);
        }
    }
}
