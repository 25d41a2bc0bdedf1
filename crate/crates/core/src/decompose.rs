//! Writing non-physical maps in terms of physical ones.
//!
//! * SP maps factor as `Ψ = Ξ∘Φ⁻¹` with `Φ(x) = λx + (1−λ)Tr(x)ρ` and
//!   `Ξ = Ψ∘Φ`, both CPTP ([`sp_decompose`]).
//! * SN maps satisfy `Ψ∘Φ = Ξ` with the replacement channels
//!   `Φ(x) = Tr(x)ρ`, `Ξ(x) = Tr(x)Ψ(ρ)` ([`sn_decompose`]).
//! * Every HPTP map is the midpoint of two SP maps ([`convex_split`]).

use serde::Serialize;

use crate::classify::{self, ClassifyConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, eigh, identity, kron, max_abs_diff, r, trace, ComplexMatrix, Tolerances};
use crate::map::QuantumMap;

#[derive(Clone, Debug, Serialize)]
pub struct SpDecomposition {
    #[serde(serialize_with = "ser_map")]
    pub phi: QuantumMap,
    #[serde(serialize_with = "ser_map")]
    pub xi: QuantumMap,
    pub lambda: f64,
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub rho: ComplexMatrix,
}

#[derive(Clone, Debug, Serialize)]
pub struct SnDecomposition {
    #[serde(serialize_with = "ser_map")]
    pub phi: QuantumMap,
    #[serde(serialize_with = "ser_map")]
    pub xi: QuantumMap,
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub rho: ComplexMatrix,
}

fn ser_map<S: serde::Serializer>(m: &QuantumMap, s: S) -> std::result::Result<S::Ok, S::Error> {
    crate::io::map_to_json(m).serialize(s)
}

/// `x ↦ λx + (1−λ)Tr(x)ρ`.
pub fn affine_contraction(lambda: f64, rho: &ComplexMatrix) -> QuantumMap {
    let n = rho.nrows();
    let choi = QuantumMap::identity(n).choi() * r(lambda) + kron(rho, &identity(n)) * r(1.0 - lambda);
    QuantumMap::from_choi(n, n, choi).expect("square")
}

/// Choi matrix of `Ξ_λ = λΨ + (1−λ)Tr(·)Ψ(ρ)`.
fn xi_lambda_choi(psi: &QuantumMap, image: &ComplexMatrix, lambda: f64) -> ComplexMatrix {
    psi.choi() * r(lambda) + kron(image, &identity(psi.dim_in())) * r(1.0 - lambda)
}

fn check_density(rho: &ComplexMatrix, n: usize, tol: &Tolerances) -> Result<()> {
    if rho.shape() != (n, n) {
        return Err(Error::InvalidAnchor(format!("anchor must be {n}x{n}")));
    }
    let defect = linalg::hermiticity_defect(rho);
    if defect > tol.eq_tol {
        return Err(Error::InvalidAnchor(format!("anchor not Hermitian (defect {defect:.3e})")));
    }
    let t = trace(rho);
    if (t - r(1.0)).norm() > tol.eq_tol {
        return Err(Error::InvalidAnchor(format!("anchor has trace {}", t.re)));
    }
    Ok(())
}

/// Strictly positive anchor from a semi-positivity witness: eigenvalues
/// clipped at `eig_tol`, renormalized, then mixed 1% with `I/n`. The mixing is
/// dropped if it would destroy positivity of the image.
fn anchor_from_witness(psi: &QuantumMap, x: &ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix> {
    let n = x.nrows();
    let clipped = linalg::hermitian_fn(&linalg::hermitian_part(x), |v| v.max(tol.eig_tol));
    let clipped = &clipped * r(1.0 / trace(&clipped).re);
    let mixed = &clipped * r(0.99) + identity(n) * r(0.01 / n as f64);
    for candidate in [mixed, clipped] {
        if eigh(&linalg::hermitian_part(&psi.apply(&candidate)?)).min() > tol.eig_tol {
            return Ok(candidate);
        }
    }
    Err(Error::InvalidAnchor("witness does not map to a strictly positive state".into()))
}

/// Factorizes an SP map as `Ξ∘Φ⁻¹`. With an anchor `ρ`, both `ρ` and `Ψ(ρ)`
/// must be positive definite; without one, the SDP witness is used. `λ` is
/// the largest value in `(0, 1]` for which `Ξ_λ` is CP, to within 1e-12.
pub fn sp_decompose(psi: &QuantumMap, rho: Option<&ComplexMatrix>, cfg: &ClassifyConfig) -> Result<SpDecomposition> {
    let tol = &cfg.tol;
    psi.require_hptp(tol)?;
    let n = psi.dim_in();
    if psi.dim_out() != n {
        return Err(Error::DimensionMismatch(format!(
            "Ξ∘Φ⁻¹ needs a square map, got {n}->{}",
            psi.dim_out()
        )));
    }
    let rho = match rho {
        Some(rho) => {
            check_density(rho, n, tol)?;
            let rho = linalg::hermitian_part(rho);
            if eigh(&rho).min() <= tol.eig_tol {
                return Err(Error::InvalidAnchor("anchor is not positive definite".into()));
            }
            if eigh(&linalg::hermitian_part(&psi.apply(&rho)?)).min() <= tol.eig_tol {
                return Err(Error::InvalidAnchor("image of the anchor is not positive definite".into()));
            }
            rho
        }
        None => {
            let sp = classify::is_sp(psi, cfg)?;
            if !sp.holds {
                return Err(Error::NotSp { y_star: sp.y_star });
            }
            anchor_from_witness(psi, &sp.sdp.witness_state, tol)?
        }
    };
    let image = linalg::hermitian_part(&psi.apply(&rho)?);
    let psd = |lambda: f64| eigh(&linalg::hermitian_part(&xi_lambda_choi(psi, &image, lambda))).min() >= 0.0;
    let lambda = if psd(1.0) {
        1.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if psd(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    if lambda <= 0.0 {
        return Err(Error::InvalidAnchor("no positive λ keeps Ξ_λ completely positive".into()));
    }
    let phi = affine_contraction(lambda, &rho);
    let xi = QuantumMap::from_choi(n, n, xi_lambda_choi(psi, &image, lambda))?;
    let d = SpDecomposition { phi, xi, lambda, rho };
    let report = verify_sp_decomposition(&d, psi, tol)?;
    if !report.passed {
        return Err(Error::VerificationFailed(format!(
            "Ξ∘Φ⁻¹ residual {:.3e}, Ψ∘Φ residual {:.3e}",
            report.residual, report.composition_residual
        )));
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpVerification {
    /// `max |J(Ξ∘Φ⁻¹) − J(Ψ)|`.
    pub residual: f64,
    /// `max |J(Ψ∘Φ) − J(Ξ)|`.
    pub composition_residual: f64,
    pub phi_cp: bool,
    pub phi_tp: bool,
    pub xi_cp: bool,
    pub xi_tp: bool,
    pub xi_choi_min_eigenvalue: f64,
    pub passed: bool,
}

pub fn verify_sp_decomposition(d: &SpDecomposition, target: &QuantumMap, tol: &Tolerances) -> Result<SpVerification> {
    let phi_inv = d.phi.inverse(tol)?;
    let residual = max_abs_diff(d.xi.compose(&phi_inv)?.choi(), target.choi());
    let composition_residual = max_abs_diff(target.compose(&d.phi)?.choi(), d.xi.choi());
    let min_eig = |m: &QuantumMap| eigh(&linalg::hermitian_part(m.choi())).min();
    let xi_min = min_eig(&d.xi);
    let hermitian = |m: &QuantumMap| linalg::hermiticity_defect(m.choi()) <= tol.eq_tol;
    let phi_cp = hermitian(&d.phi) && min_eig(&d.phi) >= -tol.eig_tol;
    let xi_cp = hermitian(&d.xi) && xi_min >= -tol.eig_tol;
    let (phi_tp, xi_tp) = (d.phi.is_tp(tol), d.xi.is_tp(tol));
    Ok(SpVerification {
        residual,
        composition_residual,
        phi_cp,
        phi_tp,
        xi_cp,
        xi_tp,
        xi_choi_min_eigenvalue: xi_min,
        passed: residual <= tol.eq_tol
            && composition_residual <= tol.eq_tol
            && phi_cp
            && phi_tp
            && xi_cp
            && xi_tp,
    })
}

/// `Ψ∘Φ = Ξ` with `Φ = Tr(·)ρ`, `Ξ = Tr(·)Ψ(ρ)`; `ρ` defaults to the SN witness.
pub fn sn_decompose(psi: &QuantumMap, rho: Option<&ComplexMatrix>, cfg: &ClassifyConfig) -> Result<SnDecomposition> {
    let tol = &cfg.tol;
    psi.require_hptp(tol)?;
    let n = psi.dim_in();
    let rho = match rho {
        Some(rho) => {
            check_density(rho, n, tol)?;
            let rho = linalg::hermitian_part(rho);
            if eigh(&rho).min() < -tol.eig_tol {
                return Err(Error::InvalidAnchor("anchor is not positive semidefinite".into()));
            }
            rho
        }
        None => {
            let sn = classify::is_sn(psi, cfg)?;
            match sn.witness {
                Some(w) if sn.holds => w,
                _ => return Err(Error::NotSn { y_star: sn.y_star }),
            }
        }
    };
    let image = linalg::hermitian_part(&psi.apply(&rho)?);
    let lowest = eigh(&image).min();
    if lowest < -tol.eig_tol {
        return Err(Error::NotSn { y_star: -lowest });
    }
    let phi = QuantumMap::replacement(n, &rho);
    let xi = QuantumMap::replacement(n, &image);
    let residual = max_abs_diff(psi.compose(&phi)?.choi(), xi.choi());
    debug_assert!(residual <= tol.eq_tol.max(1e-12), "composition residual {residual}");
    Ok(SnDecomposition { phi, xi, rho })
}

/// Two SP maps whose average is `Ψ`.
///
/// With `H₁ = I/n`, `H₂ = (I + G/2)/n`, `G = diag(1, −1, 0, …)`, a target
/// `ρ = I_m/m` and coordinates `c₁, c₂` of `x` along `H₁, H₂` (the remaining
/// basis directions being trace-orthogonal to both),
///
/// ```text
///   Ψ₁ = Ψ + c₁·(ρ − Ψ(H₁)) + c₂·(Ψ(H₂) − ρ)
///   Ψ₂ = Ψ + c₁·(Ψ(H₁) − ρ) + c₂·(ρ − Ψ(H₂))
/// ```
///
/// so `Ψ₁(H₁) = Ψ₂(H₂) = ρ`, which makes both semi-positive.
pub fn convex_split(psi: &QuantumMap, tol: &Tolerances) -> Result<(QuantumMap, QuantumMap)> {
    psi.require_hptp(tol)?;
    let (n, m) = (psi.dim_in(), psi.dim_out());
    if n < 2 {
        return Err(Error::UnsupportedForm("convex split needs input dimension at least 2".into()));
    }
    let mut g = linalg::zeros(n, n);
    g[(0, 0)] = r(1.0);
    g[(1, 1)] = r(-1.0);
    let h1 = identity(n) * r(1.0 / n as f64);
    let h2 = (identity(n) + &g * r(0.5)) * r(1.0 / n as f64);
    // dual functionals from the inverse Gram matrix of (H₁, H₂)
    let ip = |a: &ComplexMatrix, b: &ComplexMatrix| trace(&(a * b)).re;
    let (g11, g12, g22) = (ip(&h1, &h1), ip(&h1, &h2), ip(&h2, &h2));
    let det = g11 * g22 - g12 * g12;
    let f1 = (&h1 * r(g22) - &h2 * r(g12)) * r(1.0 / det);
    let f2 = (&h2 * r(g11) - &h1 * r(g12)) * r(1.0 / det);
    let target = identity(m) * r(1.0 / m as f64);
    let d1 = &target - psi.apply(&h1)?;
    let d2 = psi.apply(&h2)? - &target;
    let correction = QuantumMap::from_linear_fn(n, m, |x| {
        &d1 * trace(&(&f1 * x)) + &d2 * trace(&(&f2 * x))
    });
    let psi1 = psi.linear_combination(1.0, &correction, 1.0)?;
    let psi2 = psi.linear_combination(1.0, &correction, -1.0)?;
    Ok((psi1, psi2))
}

/// Volume fraction `λ^(n²−1)` of the state space covered by
/// `Range(Φ) ∩ D` for `Φ(x) = λx + (1−λ)Tr(x)ρ`.
pub fn coverage_ratio(d: &SpDecomposition, tol: &Tolerances) -> Result<f64> {
    let n = d.phi.dim_in();
    let expected = affine_contraction(d.lambda, &d.rho);
    if d.phi.dim_out() != n || max_abs_diff(expected.choi(), d.phi.choi()) > tol.eq_tol {
        return Err(Error::UnsupportedForm("Φ is not of the form λx + (1−λ)Tr(x)ρ".into()));
    }
    Ok(d.lambda.powi((n * n - 1) as i32))
}

/// Sampled estimate of the same fraction for qubits: points of the Bloch ball
/// are tested for membership in `Φ(D)` by checking that `Φ⁻¹(σ)` is positive
/// semidefinite. Points come from a Halton sequence under a seeded random
/// shift (randomized quasi-Monte-Carlo), which at 1e5 points is an order of
/// magnitude tighter than independent draws.
pub fn coverage_monte_carlo(d: &SpDecomposition, samples: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    if d.phi.dim_in() != 2 {
        return Err(Error::UnsupportedForm("Bloch-ball sampling needs a qubit map".into()));
    }
    let (lambda, rho) = (d.lambda, &d.rho);
    let mut g = crate::atlas::rng(seed);
    let shift: [f64; 3] = [g.random(), g.random(), g.random()];
    let mut inside = 0usize;
    let mut drawn = 0usize;
    let mut index = 1u64;
    while drawn < samples {
        let p: [f64; 3] = std::array::from_fn(|k| {
            let u = (radical_inverse(index, [2, 3, 5][k]) + shift[k]).fract();
            2.0 * u - 1.0
        });
        index += 1;
        if p.iter().map(|v| v * v).sum::<f64>() > 1.0 {
            continue;
        }
        drawn += 1;
        let sigma = (identity(2)
            + linalg::pauli_x() * r(p[0])
            + linalg::pauli_y() * r(p[1])
            + linalg::pauli_z() * r(p[2]))
            * r(0.5);
        // Φ⁻¹(σ) = (σ − (1−λ)ρ)/λ for trace-one σ
        let pre = (&sigma - rho * r(1.0 - lambda)) * r(1.0 / lambda);
        if eigh(&linalg::hermitian_part(&pre)).min() >= 0.0 {
            inside += 1;
        }
    }
    Ok(inside as f64 / samples as f64)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut scale = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale /= base as f64;
    }
    out
}
