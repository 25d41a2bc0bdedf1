//! Named maps and seeded random generators.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; complex
//! Gaussian entries are `(a + ib)/√2` with `a, b` standard normal, drawn in
//! row-major order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, diag_real, hermitian_fn, hermitian_part, identity, kron, matrix_unit, r, trace, ComplexMatrix,
    Tolerances,
};
use crate::map::QuantumMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        c(a * s, b * s)
    })
}

pub fn transpose(n: usize) -> QuantumMap {
    QuantumMap::from_linear_fn(n, n, |x| x.transpose())
}

fn check_example1_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= 1.0 / 3.0 + 1e-12) {
        return Err(Error::ParameterOutOfRange(format!(
            "lambda must lie in (0, 1/3], got {lambda}"
        )));
    }
    Ok(())
}

/// `x ↦ λx + (1−λ)Tr(x)I/2` on a qubit.
pub fn example1_phi(lambda: f64) -> Result<QuantumMap> {
    check_example1_lambda(lambda)?;
    Ok(QuantumMap::from_linear_fn(2, 2, |x| {
        x * r(lambda) + identity(2) * (trace(x) * r((1.0 - lambda) / 2.0))
    }))
}

/// `x ↦ λxᵀ + (1−λ)Tr(x)I/2` on a qubit.
pub fn example1_xi(lambda: f64) -> Result<QuantumMap> {
    check_example1_lambda(lambda)?;
    Ok(QuantumMap::from_linear_fn(2, 2, |x| {
        x.transpose() * r(lambda) + identity(2) * (trace(x) * r((1.0 - lambda) / 2.0))
    }))
}

/// `[[a, b], [c, d]] ↦ [[a + 2d, b], [c, −d]]`.
pub fn example2_psi() -> QuantumMap {
    QuantumMap::from_linear_fn(2, 2, |x| {
        let mut y = x.clone();
        y[(0, 0)] = x[(0, 0)] + x[(1, 1)] * r(2.0);
        y[(1, 1)] = -x[(1, 1)];
        y
    })
}

/// Kraus pair `{|0><0|, |0><1|}`: every state goes to `|0><0|`.
pub fn example2_phi() -> QuantumMap {
    crate::map::SignedKrausRep::from_kraus(vec![matrix_unit(2, 0, 0), matrix_unit(2, 0, 1)])
        .expect("fixed operators")
        .to_map()
}

/// `x ↦ Tr(x)σ` for a density matrix `σ`.
pub fn replacement(dim_in: usize, sigma: &ComplexMatrix) -> Result<QuantumMap> {
    let tol = Tolerances::default();
    if !sigma.is_square() || !linalg::is_psd(sigma, &tol)? || (trace(sigma) - r(1.0)).norm() > tol.eq_tol {
        return Err(Error::ParameterOutOfRange("replacement state must be a density matrix".into()));
    }
    Ok(QuantumMap::replacement(dim_in, sigma))
}

/// `x ↦ Tr(x)D` for a Hermitian, trace-one, indefinite `D`.
pub fn indefinite_replacement(dim_in: usize, d: &ComplexMatrix) -> Result<QuantumMap> {
    let tol = Tolerances::default();
    let e = linalg::eig_hermitian(d, tol.eq_tol)
        .map_err(|_| Error::ParameterOutOfRange("D must be Hermitian".into()))?;
    if (trace(d) - r(1.0)).norm() > tol.eq_tol {
        return Err(Error::ParameterOutOfRange("D must have unit trace".into()));
    }
    if e.min() >= -tol.eig_tol {
        return Err(Error::ParameterOutOfRange("D must be indefinite".into()));
    }
    Ok(QuantumMap::replacement(dim_in, d))
}

/// `x ↦ (1−p)x + p·Tr(x)I/n`.
pub fn depolarizing(n: usize, p: f64) -> Result<QuantumMap> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ParameterOutOfRange(format!("depolarizing p must lie in [0, 1], got {p}")));
    }
    Ok(QuantumMap::from_linear_fn(n, n, |x| {
        x * r(1.0 - p) + identity(n) * (trace(x) * r(p / n as f64))
    }))
}

fn padded_z(n: usize) -> ComplexMatrix {
    let mut d = vec![0.0; n];
    d[0] = std::f64::consts::FRAC_1_SQRT_2;
    d[1] = -std::f64::consts::FRAC_1_SQRT_2;
    diag_real(&d)
}

/// `Ψ_k = Ψ_TP + k·Ψ_TA` with `Ψ_TP(X) = Tr(X) I/m` and
/// `Ψ_TA(X) = Tr(Z₁X) Z₂`, `Z₁ = Z₂ = diag(1, −1, 0, …)/√2`.
pub fn unbounded_family(n: usize, m: usize, k: f64) -> Result<QuantumMap> {
    if n < 2 || m < 2 {
        return Err(Error::ParameterOutOfRange("unbounded family needs n, m ≥ 2".into()));
    }
    let (z1, z2) = (padded_z(n), padded_z(m));
    let sigma = identity(m) * r(1.0 / m as f64);
    Ok(QuantumMap::from_linear_fn(n, m, |x| {
        &sigma * trace(x) + &z2 * (trace(&(&z1 * x)) * r(k))
    }))
}

/// `X ↦ Tr(X)E₁₁ + Tr(E₂₂X)(E₁₁ − E₂₂)`: semi-nonnegative but not semi-positive
/// even after range reduction.
pub fn not_spr_example(n: usize, m: usize) -> Result<QuantumMap> {
    if n < 2 || m < 2 {
        return Err(Error::ParameterOutOfRange("needs n, m ≥ 2".into()));
    }
    let e11 = matrix_unit(m, 0, 0);
    let diff = &e11 - matrix_unit(m, 1, 1);
    Ok(QuantumMap::from_linear_fn(n, m, |x| &e11 * trace(x) + &diff * x[(1, 1)]))
}

/// `Γ_ε(X) = Tr(X)(E₁₁ + εZ)` with `Z = diag(1, −1, 0, …)`; never semi-nonnegative
/// for `ε ∈ (0, 1)`.
pub fn gamma_eps(n: usize, m: usize, eps: f64) -> Result<QuantumMap> {
    if m < 2 || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("needs m ≥ 2 and ε ∈ (0,1), got m={m}, ε={eps}")));
    }
    let mut z = vec![0.0; m];
    z[0] = 1.0;
    z[1] = -1.0;
    let d = matrix_unit(m, 0, 0) + diag_real(&z) * r(eps);
    Ok(QuantumMap::replacement(n, &d))
}

/// `Φ_ε(X) = (1−ε)Tr(X)E₁₁ + ε·Tr(X)I/m`; positive and semi-positive for `ε ∈ (0, 1)`.
pub fn phi_eps(n: usize, m: usize, eps: f64) -> Result<QuantumMap> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::ParameterOutOfRange(format!("ε must lie in (0,1), got {eps}")));
    }
    let d = matrix_unit(m, 0, 0) * r(1.0 - eps) + identity(m) * r(eps / m as f64);
    Ok(QuantumMap::replacement(n, &d))
}

pub fn random_density(n: usize, seed: u64) -> ComplexMatrix {
    let mut g = rng(seed);
    let a = gaussian_matrix(&mut g, n, n);
    let rho = &a * a.adjoint();
    let t = trace(&rho);
    hermitian_part(&(rho / t))
}

pub fn random_unitary(n: usize, seed: u64) -> ComplexMatrix {
    let mut g = rng(seed);
    let a = gaussian_matrix(&mut g, n, n);
    let qr = a.qr();
    let (q, rr) = (qr.q(), qr.r());
    // fix column phases so the distribution does not depend on QR sign choices
    let phases = ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j && rr[(i, i)].norm() > 0.0 {
            rr[(i, i)] / r(rr[(i, i)].norm())
        } else if i == j {
            r(1.0)
        } else {
            r(0.0)
        }
    });
    q * phases
}

/// Choi `G G†` conditioned on the input marginal so that `Tr_out J = I`.
pub fn random_cptp(n: usize, m: usize, seed: u64) -> QuantumMap {
    let mut g = rng(seed);
    let a = gaussian_matrix(&mut g, n * m, n * m);
    let j0 = &a * a.adjoint();
    let marginal = linalg::partial_trace(&j0, m, n, linalg::Factor::First).expect("square");
    let inv_sqrt = hermitian_fn(&marginal, |v| 1.0 / v.sqrt());
    let cond = kron(&identity(m), &inv_sqrt);
    let choi = hermitian_part(&(&cond * j0 * &cond));
    QuantumMap::from_choi(n, m, choi).expect("shape")
}

/// Amplitude of the Hermitian noise in [`random_hptp`]; large enough that
/// both sides of the SP / dual-SN dichotomy show up in a modest sample.
const HPTP_SPREAD: f64 = 3.0;

/// Gaussian Hermitian Choi, projected onto `{Tr_out J = I}` by removing
/// `I_m/m ⊗ (Tr_out J₀ − I)`.
pub fn random_hptp(n: usize, m: usize, seed: u64) -> QuantumMap {
    let mut g = rng(seed);
    let a = gaussian_matrix(&mut g, n * m, n * m);
    let j0 = hermitian_part(&a) * r(HPTP_SPREAD / ((n * m) as f64).sqrt());
    let marginal = linalg::partial_trace(&j0, m, n, linalg::Factor::First).expect("square");
    let fix = kron(&(identity(m) * r(1.0 / m as f64)), &(marginal - identity(n)));
    QuantumMap::from_choi(n, m, hermitian_part(&(j0 - fix))).expect("shape")
}

/// `Ξ ∘ Φ⁻¹` with `Ξ` random CPTP and `Φ` a random CPTP map mixed half-and-half
/// with the identity.
pub fn random_sp(n: usize, seed: u64) -> QuantumMap {
    let mut g = rng(seed);
    let xi = random_cptp(n, n, g.random());
    let phi = random_cptp(n, n, g.random())
        .mix(0.5, &QuantumMap::identity(n))
        .expect("same dims");
    let inv = phi.inverse(&Tolerances::default()).expect("mixing with identity keeps Φ invertible");
    xi.compose(&inv).expect("dims agree")
}

/// A registered map name plus scalar parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapRecipe {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub dims: (usize, usize),
    #[serde(default)]
    pub seed: u64,
}

pub const RECIPES: &[&str] = &[
    "identity",
    "transpose",
    "example1-phi",
    "example1-xi",
    "example2-psi",
    "example2-phi",
    "replacement",
    "indefinite-replacement",
    "depolarizing",
    "unbounded-family",
    "not-spr",
    "gamma-eps",
    "phi-eps",
    "random-cptp",
    "random-hptp",
    "random-sp",
];

impl MapRecipe {
    pub fn new(name: &str, n: usize, m: usize) -> Self {
        Self {
            name: name.to_string(),
            parameters: BTreeMap::new(),
            dims: (n, m),
            seed: 0,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.parameters.get(key).copied().unwrap_or(default)
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.parameters
            .get(key)
            .copied()
            .ok_or_else(|| Error::ParameterOutOfRange(format!("recipe `{}` needs parameter `{key}`", self.name)))
    }
}

fn qubit_only(recipe: &MapRecipe) -> Result<()> {
    if recipe.dims != (2, 2) {
        return Err(Error::ParameterOutOfRange(format!(
            "recipe `{}` is defined on qubits only",
            recipe.name
        )));
    }
    Ok(())
}

/// Resolves a recipe. Parameters: `lambda` (example1-*), `p` (depolarizing),
/// `k` (unbounded-family), `eps` (gamma-eps, phi-eps), `q` (replacement state
/// `diag(q, 1−q, 0, …)`, default 1), `d` (indefinite-replacement
/// `diag(d, 1−d, 0, …)`, default 2).
pub fn named_map(recipe: &MapRecipe) -> Result<QuantumMap> {
    let (n, m) = recipe.dims;
    if n == 0 || m == 0 {
        return Err(Error::ParameterOutOfRange("dimensions must be positive".into()));
    }
    let square = || {
        if n != m {
            Err(Error::ParameterOutOfRange(format!("recipe `{}` needs n = m", recipe.name)))
        } else {
            Ok(())
        }
    };
    let two_level = |v: f64| {
        let mut d = vec![0.0; m];
        d[0] = v;
        if m > 1 {
            d[1] = 1.0 - v;
        }
        diag_real(&d)
    };
    match recipe.name.replace('_', "-").as_str() {
        "identity" => {
            square()?;
            Ok(QuantumMap::identity(n))
        }
        "transpose" => {
            square()?;
            Ok(transpose(n))
        }
        "example1-phi" => {
            qubit_only(recipe)?;
            example1_phi(recipe.required("lambda")?)
        }
        "example1-xi" => {
            qubit_only(recipe)?;
            example1_xi(recipe.required("lambda")?)
        }
        "example2-psi" => {
            qubit_only(recipe)?;
            Ok(example2_psi())
        }
        "example2-phi" => {
            qubit_only(recipe)?;
            Ok(example2_phi())
        }
        "replacement" => {
            let q = recipe.param("q", 1.0);
            if !(0.0..=1.0).contains(&q) || (m == 1 && q != 1.0) {
                return Err(Error::ParameterOutOfRange(format!("q must lie in [0, 1], got {q}")));
            }
            replacement(n, &two_level(q))
        }
        "indefinite-replacement" => {
            if m < 2 {
                return Err(Error::ParameterOutOfRange("indefinite replacement needs m ≥ 2".into()));
            }
            indefinite_replacement(n, &two_level(recipe.param("d", 2.0)))
        }
        "depolarizing" => {
            square()?;
            depolarizing(n, recipe.required("p")?)
        }
        "unbounded-family" => unbounded_family(n, m, recipe.required("k")?),
        "not-spr" => not_spr_example(n, m),
        "gamma-eps" => gamma_eps(n, m, recipe.required("eps")?),
        "phi-eps" => phi_eps(n, m, recipe.required("eps")?),
        "random-cptp" => Ok(random_cptp(n, m, recipe.seed)),
        "random-hptp" => Ok(random_hptp(n, m, recipe.seed)),
        "random-sp" => {
            square()?;
            Ok(random_sp(n, recipe.seed))
        }
        other => Err(Error::UnknownRecipe(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_hermitian, max_abs_diff};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn choi_spectrum(map: &QuantumMap) -> Vec<f64> {
        eig_hermitian(map.choi(), 1e-12).unwrap().values
    }

    #[test]
    fn example1_xi_spectrum() {
        // (1+λ)/2 three times and (1−3λ)/2
        for lam in [0.1, 0.25, 1.0 / 3.0] {
            let s = choi_spectrum(&example1_xi(lam).unwrap());
            let hi = (1.0 + lam) / 2.0;
            for v in &s[..3] {
                assert!((v - hi).abs() < 1e-12);
            }
            assert!((s[3] - (1.0 - 3.0 * lam) / 2.0).abs() < 1e-12);
        }
        let s = choi_spectrum(&example1_xi(1.0 / 3.0).unwrap());
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-12 && s[3].abs() < 1e-12);
    }

    #[test]
    fn example1_phi_spectrum() {
        // (1−λ)/2 three times and (1+3λ)/2
        let lam = 0.2;
        let s = choi_spectrum(&example1_phi(lam).unwrap());
        assert!((s[0] - (1.0 + 3.0 * lam) / 2.0).abs() < 1e-12);
        for v in &s[1..] {
            assert!((v - (1.0 - lam) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn example1_identity_transpose_factorization() {
        for lam in [0.1, 0.2, 1.0 / 3.0] {
            let xi = example1_xi(lam).unwrap();
            let inv = example1_phi(lam).unwrap().inverse(&tol()).unwrap();
            assert!(xi.compose(&inv).unwrap().distance(&transpose(2)) <= 1e-9);
        }
    }

    #[test]
    fn example1_range_checks() {
        assert!(matches!(example1_xi(0.5), Err(Error::ParameterOutOfRange(_))));
        assert!(matches!(example1_phi(0.0), Err(Error::ParameterOutOfRange(_))));
    }

    #[test]
    fn example2_on_maximally_mixed() {
        let out = example2_psi().apply(&(identity(2) * r(0.5))).unwrap();
        assert!(max_abs_diff(&out, &diag_real(&[1.5, -0.5])) < 1e-15);
        assert!(example2_psi().is_hptp(&tol()));
    }

    #[test]
    fn indefinite_replacement_is_hptp() {
        let ups = indefinite_replacement(2, &diag_real(&[2.0, -1.0])).unwrap();
        assert!(ups.is_hptp(&tol()));
        assert!(indefinite_replacement(2, &diag_real(&[0.5, 0.5])).is_err());
        assert!(indefinite_replacement(2, &diag_real(&[2.0, 1.0])).is_err());
    }

    #[test]
    fn generators_are_valid_and_deterministic() {
        for seed in 0..20 {
            for (n, m) in [(1, 2), (2, 2), (2, 3), (3, 3)] {
                let cp = random_cptp(n, m, seed);
                assert!(cp.is_cp(&tol()).unwrap() && cp.is_tp(&tol()));
                let hp = random_hptp(n, m, seed);
                assert!(hp.is_hp(&tol()) && hp.is_tp(&tol()));
                assert_eq!(cp, random_cptp(n, m, seed));
                assert_eq!(hp, random_hptp(n, m, seed));
            }
            let sp = random_sp(2, seed);
            assert!(sp.is_hptp(&tol()));
            assert_eq!(sp, random_sp(2, seed));
            let rho = random_density(3, seed);
            assert!(linalg::is_psd(&rho, &tol()).unwrap());
            assert!((trace(&rho) - r(1.0)).norm() < 1e-12);
            assert!(linalg::unitarity_defect(&random_unitary(3, seed)) < 1e-12);
        }
    }

    #[test]
    fn golden_random_cptp_seed_42() {
        let golden: serde_json::Value =
            serde_json::from_str(include_str!("../tests/data/random_cptp_2x2_seed42.json")).unwrap();
        let want = crate::io::map_from_json_value(&golden).unwrap();
        assert!(random_cptp(2, 2, 42).distance(&want) < 1e-12);
    }

    #[test]
    fn unbounded_family_grows() {
        let norms: Vec<f64> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&k| unbounded_family(2, 2, k).unwrap().choi().norm())
            .collect();
        assert!(norms[0] < norms[1] && norms[1] < norms[2]);
        assert!(norms[2] > 40.0);
        for k in [1.0, 10.0, 100.0] {
            let psi = unbounded_family(2, 2, k).unwrap();
            assert!(psi.is_hptp(&tol()));
            assert!(max_abs_diff(&psi.apply(&(identity(2) * r(0.5))).unwrap(), &(identity(2) * r(0.5))) < 1e-12);
        }
    }

    #[test]
    fn recipes_resolve() {
        let xi = named_map(&MapRecipe::new("example1-xi", 2, 2).with("lambda", 0.25)).unwrap();
        assert!(xi.distance(&example1_xi(0.25).unwrap()) < 1e-15);
        assert!(matches!(
            named_map(&MapRecipe::new("no-such-map", 2, 2)),
            Err(Error::UnknownRecipe(_))
        ));
        assert!(matches!(
            named_map(&MapRecipe::new("example1-xi", 2, 2)),
            Err(Error::ParameterOutOfRange(_))
        ));
        assert!(matches!(
            named_map(&MapRecipe::new("example1-xi", 2, 2).with("lambda", 0.9)),
            Err(Error::ParameterOutOfRange(_))
        ));
        for name in RECIPES {
            let recipe = MapRecipe::new(name, 2, 2)
                .with("lambda", 0.2)
                .with("p", 0.3)
                .with("k", 2.0)
                .with("eps", 0.5)
                .with_seed(3);
            let map = named_map(&recipe).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(map.is_hptp(&tol()), "{name} should be HPTP");
        }
    }
}
