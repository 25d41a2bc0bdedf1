//! Error correction for signed operator-sum noise.
//!
//! The condition checked is `P E_i E_j† P = α_ij P` with `α` Hermitian, in
//! exactly that operator order. The textbook Knill–Laflamme condition reads
//! `P E_i† E_j P`; for the Pauli-type noise used here the two coincide, and
//! [`KlReport::adjoint_order_violation`] reports the other ordering so a
//! mismatch is visible. Recovery is built from the polar decompositions
//! `E_k P = √α_kk U_k P` with `R_k = U_k† P_k`, `P_k = U_k P U_k†`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    self, eigh, identity, kron, max_abs, max_abs_diff, polar_unitary_on_subspace, r, trace, ComplexMatrix,
    Tolerances,
};
use crate::map::{KrausTerm, QuantumMap, Sign, SignedKrausRep};
use crate::sdp::hermitian_basis;

#[derive(Clone, Debug, PartialEq)]
pub struct CodeSpace {
    ambient_dim: usize,
    projector: ComplexMatrix,
    code_dim: usize,
}

impl CodeSpace {
    pub fn new(projector: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        if !projector.is_square() || projector.nrows() == 0 {
            return Err(Error::InvalidCode("projector must be a non-empty square matrix".into()));
        }
        let defect = linalg::hermiticity_defect(&projector);
        if defect > tol.eq_tol {
            return Err(Error::InvalidCode(format!("projector not Hermitian (defect {defect:.3e})")));
        }
        let idem = max_abs_diff(&(&projector * &projector), &projector);
        if idem > tol.eq_tol {
            return Err(Error::InvalidCode(format!("projector not idempotent (max |P² − P| = {idem:.3e})")));
        }
        let code_dim = trace(&projector).re.round() as usize;
        if code_dim == 0 {
            return Err(Error::InvalidCode("projector is zero".into()));
        }
        Ok(Self {
            ambient_dim: projector.nrows(),
            projector,
            code_dim,
        })
    }

    /// Code spanned by the given (not necessarily orthonormal) columns.
    pub fn from_vectors(vectors: &ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let q = vectors.clone().qr().q();
        Self::new(&q * q.adjoint(), tol)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn projector(&self) -> &ComplexMatrix {
        &self.projector
    }

    pub fn code_dim(&self) -> usize {
        self.code_dim
    }

    /// Orthonormal basis of the code space as columns.
    pub fn basis(&self) -> ComplexMatrix {
        let e = eigh(&self.projector);
        e.vectors.columns(0, self.code_dim).into_owned()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KlReport {
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub alpha: ComplexMatrix,
    pub max_violation: f64,
    pub satisfied: bool,
    /// Residual of `P E_i† E_j P = β_ij P` for comparison.
    pub adjoint_order_violation: f64,
}

fn require_normalized(noise: &SignedKrausRep, tol: &Tolerances) -> Result<()> {
    let defect = noise.normalization_defect();
    if defect > tol.eq_tol {
        return Err(Error::UnnormalizedNoise { defect });
    }
    Ok(())
}

fn require_dims(code: &CodeSpace, noise: &SignedKrausRep) -> Result<()> {
    if noise.dim_in != code.ambient_dim || noise.dim_out != code.ambient_dim {
        return Err(Error::DimensionMismatch(format!(
            "noise is {}->{}, code lives in dimension {}",
            noise.dim_in, noise.dim_out, code.ambient_dim
        )));
    }
    Ok(())
}

/// Coefficients `α_ij = Tr(P E_i E_j† P)/k` and residuals of
/// `P E_i E_j† P − α_ij P` for every pair.
pub fn check_kl(code: &CodeSpace, noise: &SignedKrausRep, tol: &Tolerances) -> Result<KlReport> {
    require_dims(code, noise)?;
    require_normalized(noise, tol)?;
    let p = &code.projector;
    let k = code.code_dim as f64;
    let ops: Vec<&ComplexMatrix> = noise.terms.iter().map(|t| &t.operator).collect();
    let len = ops.len();
    let mut alpha = linalg::zeros(len, len);
    let mut max_violation: f64 = 0.0;
    let mut adjoint_violation: f64 = 0.0;
    for i in 0..len {
        for j in 0..len {
            let block = p * ops[i] * ops[j].adjoint() * p;
            let a = trace(&block) / r(k);
            alpha[(i, j)] = a;
            max_violation = max_violation.max(max_abs_diff(&block, &(p * a)));
            let other = p * ops[i].adjoint() * ops[j] * p;
            let b = trace(&other) / r(k);
            adjoint_violation = adjoint_violation.max(max_abs_diff(&other, &(p * b)));
        }
    }
    Ok(KlReport {
        alpha,
        max_violation,
        satisfied: max_violation <= tol.eq_tol,
        adjoint_order_violation: adjoint_violation,
    })
}

#[derive(Clone, Debug)]
pub struct RecoveryPlan {
    /// CPTP recovery channel.
    pub recovery: QuantumMap,
    /// `R_k` for the retained terms, followed by the completion `R_⊥` when nonzero.
    pub kraus: Vec<ComplexMatrix>,
    /// Noise rewritten so that `α` is diagonal (sector-wise unitary mixing).
    pub diagonal_noise: SignedKrausRep,
    pub diagonalized_alpha: Vec<f64>,
    /// Indices into `diagonal_noise` with `α_kk ≤ eig_tol`.
    pub skipped_terms: Vec<usize>,
    /// `Σ_i sign(i)·α_ii`.
    pub signed_alpha_sum: f64,
    /// `max_{k≠l} |P_k P_l|`.
    pub max_overlap: f64,
}

/// Synthesizes a CPTP recovery for noise satisfying the condition.
pub fn build_recovery(
    code: &CodeSpace,
    noise: &SignedKrausRep,
    report: &KlReport,
    tol: &Tolerances,
) -> Result<RecoveryPlan> {
    require_dims(code, noise)?;
    require_normalized(noise, tol)?;
    if !report.satisfied {
        return Err(Error::KlViolated {
            max_violation: report.max_violation,
        });
    }
    let len = noise.terms.len();
    if report.alpha.shape() != (len, len) {
        return Err(Error::DimensionMismatch("report does not match noise".into()));
    }
    let alpha = &report.alpha;

    let mut coupling: f64 = 0.0;
    for i in 0..len {
        for j in 0..len {
            if noise.terms[i].sign != noise.terms[j].sign {
                coupling = coupling.max(alpha[(i, j)].norm());
            }
        }
    }
    if coupling > tol.eq_tol {
        return Err(Error::SignSectorObstruction { coupling });
    }

    // Within each sign sector, F_a = Σ_i conj(W_ia) E_i with W†αW diagonal.
    let mut terms = Vec::with_capacity(len);
    let mut diag = Vec::with_capacity(len);
    for sign in [Sign::Plus, Sign::Minus] {
        let idx: Vec<usize> = (0..len).filter(|&i| noise.terms[i].sign == sign).collect();
        if idx.is_empty() {
            continue;
        }
        let block = ComplexMatrix::from_fn(idx.len(), idx.len(), |a, b| alpha[(idx[a], idx[b])]);
        let e = eigh(&linalg::hermitian_part(&block));
        for (col, &value) in e.values.iter().enumerate() {
            let mut op = linalg::zeros(code.ambient_dim, code.ambient_dim);
            for (row, &i) in idx.iter().enumerate() {
                op += &noise.terms[i].operator * e.vectors[(row, col)].conj();
            }
            terms.push(KrausTerm { sign, operator: op });
            diag.push(value);
        }
    }
    let diagonal_noise = SignedKrausRep::new(noise.dim_in, noise.dim_out, terms)?;

    let p = &code.projector;
    let mut kraus = Vec::new();
    let mut projectors = Vec::new();
    let mut skipped = Vec::new();
    for (k, t) in diagonal_noise.terms.iter().enumerate() {
        if diag[k] <= tol.eig_tol {
            skipped.push(k);
            continue;
        }
        let u = polar_unitary_on_subspace(&t.operator, p, tol.eig_tol)?;
        let pk = &u * p * u.adjoint();
        kraus.push(u.adjoint() * &pk);
        projectors.push(pk);
    }
    let mut max_overlap: f64 = 0.0;
    for a in 0..projectors.len() {
        for b in (a + 1)..projectors.len() {
            max_overlap = max_overlap.max(max_abs(&(&projectors[a] * &projectors[b])));
        }
    }
    if max_overlap > tol.eq_tol {
        return Err(Error::KlViolated {
            max_violation: max_overlap,
        });
    }
    let mut rest = identity(code.ambient_dim);
    for pk in &projectors {
        rest -= pk;
    }
    if max_abs(&rest) > tol.eq_tol {
        kraus.push(rest);
    }
    let recovery = SignedKrausRep::from_kraus(kraus.clone())?.to_map();
    let signed_alpha_sum = diagonal_noise
        .terms
        .iter()
        .zip(&diag)
        .map(|(t, a)| t.sign.value() * a)
        .sum();
    Ok(RecoveryPlan {
        recovery,
        kraus,
        diagonal_noise,
        diagonalized_alpha: diag,
        skipped_terms: skipped,
        signed_alpha_sum,
        max_overlap,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecoveryCheck {
    /// `max_σ |R(N(PσP)) − PσP|` over a Hermitian basis of code operators.
    pub residual: f64,
    pub signed_alpha_sum: f64,
    pub recovery_is_cptp: bool,
    pub passed: bool,
}

pub fn verify_recovery(
    recovery: &QuantumMap,
    noise: &SignedKrausRep,
    code: &CodeSpace,
    tol: &Tolerances,
) -> Result<RecoveryCheck> {
    require_dims(code, noise)?;
    let v = code.basis();
    let mut residual: f64 = 0.0;
    for h in hermitian_basis(code.code_dim).elements {
        let sigma = &v * h * v.adjoint();
        let out = recovery.apply(&noise.apply(&sigma)?)?;
        residual = residual.max(max_abs_diff(&out, &sigma));
    }
    let p = &code.projector;
    let k = code.code_dim as f64;
    let signed_alpha_sum = noise
        .terms
        .iter()
        .map(|t| t.sign.value() * trace(&(p * &t.operator * t.operator.adjoint() * p)).re / k)
        .sum();
    let recovery_is_cptp = recovery.is_cptp(tol);
    Ok(RecoveryCheck {
        residual,
        signed_alpha_sum,
        recovery_is_cptp,
        passed: residual <= tol.eq_tol && recovery_is_cptp,
    })
}

/// `N⁻¹` when it exists and is itself a channel; then `N⁻¹∘N = id` on every
/// input and no code is needed.
pub fn inverse_recovery_shortcut(noise: &QuantumMap, tol: &Tolerances) -> Option<QuantumMap> {
    if noise.dim_in() != noise.dim_out() {
        return None;
    }
    let inv = noise.inverse(tol).ok()?;
    inv.is_cptp(tol).then_some(inv)
}

/// `op` on qubit `which` (0-based, most significant first) of `qubits`.
pub fn single_qubit_op(qubits: usize, which: usize, op: &ComplexMatrix) -> ComplexMatrix {
    let mut out = identity(1);
    for q in 0..qubits {
        out = if q == which { kron(&out, op) } else { kron(&out, &identity(2)) };
    }
    out
}

/// `|000⟩⟨000| + |111⟩⟨111|`.
pub fn bit_flip_code() -> CodeSpace {
    let mut p = linalg::zeros(8, 8);
    p[(0, 0)] = r(1.0);
    p[(7, 7)] = r(1.0);
    CodeSpace::new(p, &Tolerances::default()).expect("valid projector")
}

/// Bit-flip noise `{(+, √w0 I), (s_q, √w_q X_q)}` with `w0 = 1 − Σ s_q w_q`,
/// which is trace-preserving for any weights.
pub fn bit_flip_noise(weights: [f64; 3], signs: [Sign; 3]) -> Result<SignedKrausRep> {
    let w0 = 1.0 - weights.iter().zip(&signs).map(|(w, s)| s.value() * w).sum::<f64>();
    if w0 < 0.0 || weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::ParameterOutOfRange("bit-flip weights must leave a nonnegative identity weight".into()));
    }
    let mut terms = vec![KrausTerm {
        sign: Sign::Plus,
        operator: identity(8) * r(w0.sqrt()),
    }];
    for q in 0..3 {
        terms.push(KrausTerm {
            sign: signs[q],
            operator: single_qubit_op(3, q, &linalg::pauli_x()) * r(weights[q].sqrt()),
        });
    }
    SignedKrausRep::new(8, 8, terms)
}

/// Seeded bit-flip noise with exactly one negative term.
pub fn signed_bit_flip_noise(seed: u64) -> SignedKrausRep {
    use rand::Rng;
    let mut g = crate::atlas::rng(seed);
    let weights = [
        g.random_range(0.01..0.3),
        g.random_range(0.01..0.3),
        g.random_range(0.01..0.3),
    ];
    let neg = g.random_range(0..3);
    let mut signs = [Sign::Plus; 3];
    signs[neg] = Sign::Minus;
    bit_flip_noise(weights, signs).expect("weights in range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas;
    use crate::linalg::pauli_z;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    /// Direct oracle: P X_i X_j P on the bit-flip code.
    #[test]
    fn bit_flip_alpha_is_diagonal() {
        let code = bit_flip_code();
        let noise = bit_flip_noise([0.1, 0.2, 0.05], [Sign::Plus; 3]).unwrap();
        let rep = check_kl(&code, &noise, &tol()).unwrap();
        assert!(rep.satisfied);
        let want = [0.65, 0.1, 0.2, 0.05];
        for i in 0..4 {
            for j in 0..4 {
                let w = if i == j { want[i] } else { 0.0 };
                assert!((rep.alpha[(i, j)] - r(w)).norm() < 1e-12, "({i},{j})");
            }
        }
        assert!(rep.adjoint_order_violation < 1e-12);
    }

    #[test]
    fn z_contamination_is_detected() {
        let code = bit_flip_code();
        let mut noise = bit_flip_noise([0.1, 0.1, 0.1], [Sign::Plus; 3]).unwrap();
        // trade some identity weight for Z on qubit 0
        noise.terms[0].operator = identity(8) * r(0.6f64.sqrt());
        noise.terms.push(KrausTerm {
            sign: Sign::Plus,
            operator: single_qubit_op(3, 0, &pauli_z()) * r(0.1f64.sqrt()),
        });
        let rep = check_kl(&code, &noise, &tol()).unwrap();
        assert!(!rep.satisfied);
        // P·(√0.6 I)(√0.1 Z₁)·P = √0.06 · diag(1, −1) on the code
        assert!((rep.max_violation - 0.06f64.sqrt()).abs() < 1e-12);
        assert!(matches!(
            build_recovery(&code, &noise, &rep, &tol()),
            Err(Error::KlViolated { .. })
        ));
    }

    #[test]
    fn trivial_code_and_noise() {
        let code = CodeSpace::new(identity(2), &tol()).unwrap();
        let noise = SignedKrausRep::from_kraus(vec![identity(2)]).unwrap();
        let rep = check_kl(&code, &noise, &tol()).unwrap();
        assert!(rep.satisfied);
        assert!((rep.alpha[(0, 0)] - r(1.0)).norm() < 1e-15);
        let plan = build_recovery(&code, &noise, &rep, &tol()).unwrap();
        let check = verify_recovery(&plan.recovery, &noise, &code, &tol()).unwrap();
        assert_eq!(check.residual, 0.0);
        assert!(check.passed);
    }

    #[test]
    fn signed_bit_flip_recovery() {
        let code = bit_flip_code();
        for seed in 0..10 {
            let noise = signed_bit_flip_noise(seed);
            assert!(noise.normalization_defect() < 1e-12);
            let rep = check_kl(&code, &noise, &tol()).unwrap();
            assert!(rep.satisfied);
            let plan = build_recovery(&code, &noise, &rep, &tol()).unwrap();
            assert!((plan.signed_alpha_sum - 1.0).abs() < 1e-10);
            assert!(plan.max_overlap < 1e-10);
            assert!(plan.recovery.is_cptp(&tol()));
            let check = verify_recovery(&plan.recovery, &noise, &code, &tol()).unwrap();
            assert!(check.residual <= 1e-9, "seed {seed}: {}", check.residual);
            assert!((check.signed_alpha_sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn swapped_recovery_fails() {
        let code = bit_flip_code();
        let noise = bit_flip_noise([0.1, 0.2, 0.05], [Sign::Plus, Sign::Minus, Sign::Plus]).unwrap();
        let rep = check_kl(&code, &noise, &tol()).unwrap();
        let plan = build_recovery(&code, &noise, &rep, &tol()).unwrap();
        let mut kraus = plan.kraus.clone();
        // exchange the corrections for the identity and X₁ syndromes
        let (a, b) = (kraus[0].clone(), kraus[1].clone());
        kraus[0] = &b * &plan.kraus[0].adjoint() * &plan.kraus[0];
        kraus[1] = &a * &plan.kraus[1].adjoint() * &plan.kraus[1];
        let wrong = SignedKrausRep::from_kraus(kraus).unwrap().to_map();
        let check = verify_recovery(&wrong, &noise, &code, &tol()).unwrap();
        assert!(check.residual > 0.1, "{}", check.residual);
    }

    #[test]
    fn unitary_noise_recovery_is_conjugation() {
        let code = CodeSpace::from_vectors(&atlas::random_unitary(4, 1).columns(0, 2).into_owned(), &tol()).unwrap();
        let v = atlas::random_unitary(4, 2);
        let noise = SignedKrausRep::from_kraus(vec![v.clone()]).unwrap();
        let rep = check_kl(&code, &noise, &tol()).unwrap();
        let plan = build_recovery(&code, &noise, &rep, &tol()).unwrap();
        // R_0 = V† on V·Range(P)
        let p = code.projector();
        let pk = &v * p * v.adjoint();
        assert!(max_abs_diff(&plan.kraus[0], &(v.adjoint() * &pk)) < 1e-10);
        assert!(verify_recovery(&plan.recovery, &noise, &code, &tol()).unwrap().passed);
    }

    #[test]
    fn zero_alpha_terms_are_skipped() {
        // E_2 = |2⟩⟨1|/2 annihilates the code from both sides
        let code = CodeSpace::new(linalg::diag_real(&[1.0, 0.0, 0.0, 0.0]), &tol()).unwrap();
        let e2 = linalg::matrix_unit(4, 2, 1) * r(0.5);
        let e1 = linalg::diag_real(&[1.0, 0.75f64.sqrt(), 1.0, 1.0]);
        let noise = SignedKrausRep::from_kraus(vec![e1, e2]).unwrap();
        assert!(noise.normalization_defect() < 1e-12);
        let rep = check_kl(&code, &noise, &tol()).unwrap();
        let plan = build_recovery(&code, &noise, &rep, &tol()).unwrap();
        assert_eq!(plan.skipped_terms.len(), 1);
        assert!(verify_recovery(&plan.recovery, &noise, &code, &tol()).unwrap().passed);
    }

    #[test]
    fn off_diagonal_alpha_is_diagonalized() {
        // a rotation of {√w0 I, √w1 X₀} with w0 ≠ w1 gives α_01 = cs(w1 − w0)
        let code = bit_flip_code();
        let x0 = single_qubit_op(3, 0, &linalg::pauli_x());
        let (w0, w1) = (0.8f64, 0.2f64);
        let (c, s) = (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);
        let f0 = identity(8) * r(c * w0.sqrt()) + &x0 * r(s * w1.sqrt());
        let f1 = identity(8) * r(-s * w0.sqrt()) + &x0 * r(c * w1.sqrt());
        let noise = SignedKrausRep::from_kraus(vec![f0, f1]).unwrap();
        let rep = check_kl(&code, &noise, &tol()).unwrap();
        assert!(rep.satisfied);
        assert!((rep.alpha[(0, 1)] - r(c * s * (w1 - w0))).norm() < 1e-12);
        let plan = build_recovery(&code, &noise, &rep, &tol()).unwrap();
        let mut d = plan.diagonalized_alpha.clone();
        d.sort_by(f64::total_cmp);
        assert!((d[0] - w1).abs() < 1e-12 && (d[1] - w0).abs() < 1e-12);
        assert!(verify_recovery(&plan.recovery, &noise, &code, &tol()).unwrap().passed);
    }

    #[test]
    fn sign_sector_coupling_is_surfaced() {
        let code = bit_flip_code();
        let x0 = single_qubit_op(3, 0, &linalg::pauli_x());
        // (+, aI + bX), (+, aI − bX), (−, dX): trace-preserving after scaling, and
        // P E_1 E_3† P = bd·P couples the sectors
        let (a, b, d) = (0.8f64, 0.3f64, 0.3f64);
        let e1 = identity(8) * r(a) + &x0 * r(b);
        let e2 = identity(8) * r(a) - &x0 * r(b);
        let sum_sq = 2.0 * (a * a + b * b) - d * d;
        let e3 = &x0 * r(d);
        let scale = 1.0 / sum_sq.sqrt();
        let noise = SignedKrausRep::new(
            8,
            8,
            vec![
                KrausTerm { sign: Sign::Plus, operator: e1 * r(scale) },
                KrausTerm { sign: Sign::Plus, operator: e2 * r(scale) },
                KrausTerm { sign: Sign::Minus, operator: e3 * r(scale) },
            ],
        )
        .unwrap();
        assert!(noise.normalization_defect() < 1e-12);
        let rep = check_kl(&code, &noise, &tol()).unwrap();
        assert!(rep.satisfied);
        assert!(matches!(
            build_recovery(&code, &noise, &rep, &tol()),
            Err(Error::SignSectorObstruction { .. })
        ));
    }

    #[test]
    fn rejects_unnormalized_noise_and_bad_codes() {
        let code = bit_flip_code();
        let noise = SignedKrausRep::from_kraus(vec![identity(8) * r(1.1)]).unwrap();
        assert!(matches!(check_kl(&code, &noise, &tol()), Err(Error::UnnormalizedNoise { .. })));
        assert!(matches!(
            CodeSpace::new(linalg::diag_real(&[1.0, 0.5]), &tol()),
            Err(Error::InvalidCode(_))
        ));
        assert!(matches!(CodeSpace::new(linalg::zeros(2, 2), &tol()), Err(Error::InvalidCode(_))));
        let small = SignedKrausRep::from_kraus(vec![identity(2)]).unwrap();
        assert!(matches!(check_kl(&code, &small, &tol()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn inverse_shortcut() {
        let u = atlas::random_unitary(2, 9);
        let noise = SignedKrausRep::from_kraus(vec![u.clone()]).unwrap().to_map();
        let inv = inverse_recovery_shortcut(&noise, &tol()).expect("unitary noise is invertible");
        let want = SignedKrausRep::from_kraus(vec![u.adjoint()]).unwrap().to_map();
        assert!(inv.distance(&want) < 1e-10);
        assert!(inv.compose(&noise).unwrap().distance(&QuantumMap::identity(2)) < 1e-10);

        let dep = atlas::depolarizing(2, 0.5).unwrap();
        let dep_inv = dep.inverse(&tol()).unwrap();
        assert!(dep_inv.choi_min_eigenvalue(&tol()).unwrap() < -0.1);
        assert!(inverse_recovery_shortcut(&dep, &tol()).is_none());
        assert!(inverse_recovery_shortcut(&atlas::example2_phi(), &tol()).is_none());
    }
}
