//! Linear maps `B(C^n) → B(C^m)` stored as Choi matrices.
//!
//! The Choi layout is output ⊗ input: `J(Ψ) = Σ_ij Ψ(E_ij) ⊗ E_ij`, so the
//! entry `J[a·n + i, b·n + j]` is `Ψ(E_ij)[a, b]`. In this layout a Kraus
//! operator `E` contributes `vec(E) vec(E)†` with the row-stacking `vec` of
//! [`crate::linalg`], and the trace-preservation condition reads
//! `Tr_out J = I_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, eigh, hermiticity_defect, identity, kron, max_abs_diff, partial_trace, r, trace, unvec, vec, zeros,
    ComplexMatrix, Factor, Tolerances, C64,
};

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumMap {
    dim_in: usize,
    dim_out: usize,
    choi: ComplexMatrix,
}

impl QuantumMap {
    pub fn from_choi(dim_in: usize, dim_out: usize, choi: ComplexMatrix) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::DimensionMismatch("map dimensions must be positive".into()));
        }
        let d = dim_in * dim_out;
        if choi.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix of a {dim_in}->{dim_out} map must be {d}x{d}, got {}x{}",
                choi.nrows(),
                choi.ncols()
            )));
        }
        if !linalg::all_finite(&choi) {
            return Err(Error::Parse("Choi matrix has non-finite entries".into()));
        }
        Ok(Self { dim_in, dim_out, choi })
    }

    /// Builds the map whose action on matrix units is given by `f`.
    pub fn from_linear_fn(dim_in: usize, dim_out: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let mut choi = zeros(dim_in * dim_out, dim_in * dim_out);
        for i in 0..dim_in {
            for j in 0..dim_in {
                let img = f(&linalg::matrix_unit(dim_in, i, j));
                assert_eq!(img.shape(), (dim_out, dim_out), "image has wrong shape");
                for a in 0..dim_out {
                    for b in 0..dim_out {
                        choi[(a * dim_in + i, b * dim_in + j)] = img[(a, b)];
                    }
                }
            }
        }
        Self { dim_in, dim_out, choi }
    }

    pub fn identity(n: usize) -> Self {
        let v = vec(&identity(n));
        Self {
            dim_in: n,
            dim_out: n,
            choi: &v * v.adjoint(),
        }
    }

    /// `x ↦ Tr(x)·d`.
    pub fn replacement(dim_in: usize, d: &ComplexMatrix) -> Self {
        Self {
            dim_in,
            dim_out: d.nrows(),
            choi: kron(d, &identity(dim_in)),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (n, m) = (self.dim_in, self.dim_out);
        if x.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "map acts on {n}x{n} matrices, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(ComplexMatrix::from_fn(m, m, |a, b| {
            let mut s = C64::ZERO;
            for i in 0..n {
                for j in 0..n {
                    s += self.choi[(a * n + i, b * n + j)] * x[(i, j)];
                }
            }
            s
        }))
    }

    /// Natural representation: `vec(Ψ(X)) = K · vec(X)`, an m²×n² matrix.
    pub fn transfer(&self) -> ComplexMatrix {
        let (n, m) = (self.dim_in, self.dim_out);
        ComplexMatrix::from_fn(m * m, n * n, |row, col| {
            let (a, b) = (row / m, row % m);
            let (i, j) = (col / n, col % n);
            self.choi[(a * n + i, b * n + j)]
        })
    }

    pub fn from_transfer(dim_in: usize, dim_out: usize, k: &ComplexMatrix) -> Result<Self> {
        let (n, m) = (dim_in, dim_out);
        if k.shape() != (m * m, n * n) {
            return Err(Error::DimensionMismatch(format!(
                "transfer matrix of a {n}->{m} map must be {}x{}",
                m * m,
                n * n
            )));
        }
        let choi = ComplexMatrix::from_fn(n * m, n * m, |row, col| {
            let (a, i) = (row / n, row % n);
            let (b, j) = (col / n, col % n);
            k[(a * m + b, i * n + j)]
        });
        Self::from_choi(n, m, choi)
    }

    pub fn is_hp(&self, tol: &Tolerances) -> bool {
        hermiticity_defect(&self.choi) <= tol.eq_tol
    }

    /// `Tr_out J`; equals `I_n` exactly when the map is trace-preserving.
    pub fn input_marginal(&self) -> ComplexMatrix {
        partial_trace(&self.choi, self.dim_out, self.dim_in, Factor::First).expect("shape checked on construction")
    }

    pub fn is_tp(&self, tol: &Tolerances) -> bool {
        max_abs_diff(&self.input_marginal(), &identity(self.dim_in)) <= tol.eq_tol
    }

    pub fn is_hptp(&self, tol: &Tolerances) -> bool {
        self.is_hp(tol) && self.is_tp(tol)
    }

    pub fn is_cp(&self, tol: &Tolerances) -> Result<bool> {
        Ok(self.choi_min_eigenvalue(tol)? >= -tol.eig_tol)
    }

    pub fn choi_min_eigenvalue(&self, tol: &Tolerances) -> Result<f64> {
        self.require_hp(tol)?;
        Ok(eigh(&linalg::hermitian_part(&self.choi)).min())
    }

    pub fn is_cptp(&self, tol: &Tolerances) -> bool {
        self.is_tp(tol) && self.is_cp(tol).unwrap_or(false)
    }

    pub(crate) fn require_hp(&self, tol: &Tolerances) -> Result<()> {
        let defect = hermiticity_defect(&self.choi);
        if defect > tol.eq_tol {
            return Err(Error::NonHermitianChoi { defect });
        }
        Ok(())
    }

    pub(crate) fn require_hptp(&self, tol: &Tolerances) -> Result<()> {
        if !self.is_hp(tol) {
            return Err(Error::NonHptpInput(format!(
                "Choi matrix not Hermitian (defect {:.3e})",
                hermiticity_defect(&self.choi)
            )));
        }
        if !self.is_tp(tol) {
            return Err(Error::NonHptpInput(format!(
                "not trace-preserving (max |Tr_out J - I| = {:.3e})",
                max_abs_diff(&self.input_marginal(), &identity(self.dim_in))
            )));
        }
        Ok(())
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &QuantumMap) -> Result<QuantumMap> {
        if inner.dim_out != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose a {}->{} map after a {}->{} map",
                self.dim_in, self.dim_out, inner.dim_in, inner.dim_out
            )));
        }
        QuantumMap::from_transfer(inner.dim_in, self.dim_out, &(self.transfer() * inner.transfer()))
    }

    /// Adjoint under the trace pairing: `Tr(Ψ*(y)·x) = Tr(y·Ψ(x))`.
    pub fn dual(&self) -> QuantumMap {
        let (n, m) = (self.dim_in, self.dim_out);
        // J*[i·m + a, j·m + b] = J[b·n + j, a·n + i]
        let choi = ComplexMatrix::from_fn(n * m, n * m, |row, col| {
            let (i, a) = (row / m, row % m);
            let (j, b) = (col / m, col % m);
            self.choi[(b * n + j, a * n + i)]
        });
        QuantumMap {
            dim_in: m,
            dim_out: n,
            choi,
        }
    }

    /// Condition number of the transfer matrix (∞ when singular or non-square).
    pub fn transfer_condition(&self) -> f64 {
        if self.dim_in != self.dim_out {
            return f64::INFINITY;
        }
        let sv = self.transfer().singular_values();
        let (max, min) = (sv.max(), sv.min());
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Inverse via LU on the transfer matrix. Rejected as [`Error::SingularMap`]
    /// once the condition number exceeds `1 / eig_tol`.
    pub fn inverse(&self, tol: &Tolerances) -> Result<QuantumMap> {
        if self.dim_in != self.dim_out {
            return Err(Error::DimensionMismatch(format!(
                "only square maps can be inverted, got {}->{}",
                self.dim_in, self.dim_out
            )));
        }
        let condition = self.transfer_condition();
        if !(condition.is_finite() && condition * tol.eig_tol <= 1.0) {
            return Err(Error::SingularMap { condition });
        }
        let n2 = self.dim_in * self.dim_in;
        let inv = self
            .transfer()
            .lu()
            .solve(&identity(n2))
            .ok_or(Error::SingularMap { condition })?;
        QuantumMap::from_transfer(self.dim_in, self.dim_in, &inv)
    }

    pub fn scaled(&self, s: f64) -> QuantumMap {
        QuantumMap {
            choi: &self.choi * r(s),
            ..self.clone()
        }
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &QuantumMap, b: f64) -> Result<QuantumMap> {
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out) {
            return Err(Error::DimensionMismatch(format!(
                "cannot combine a {}->{} map with a {}->{} map",
                self.dim_in, self.dim_out, other.dim_in, other.dim_out
            )));
        }
        QuantumMap::from_choi(self.dim_in, self.dim_out, &self.choi * r(a) + &other.choi * r(b))
    }

    /// `λ·self + (1−λ)·other`.
    pub fn mix(&self, lambda: f64, other: &QuantumMap) -> Result<QuantumMap> {
        self.linear_combination(lambda, other, 1.0 - lambda)
    }

    /// Max-abs-entry distance between Choi matrices.
    pub fn distance(&self, other: &QuantumMap) -> f64 {
        max_abs_diff(&self.choi, &other.choi)
    }

    /// Conjugation by an isometry on the output: `x ↦ W† Ψ(x) W`.
    pub fn compress_output(&self, w: &ComplexMatrix) -> Result<QuantumMap> {
        if w.nrows() != self.dim_out {
            return Err(Error::DimensionMismatch("isometry rows must equal output dimension".into()));
        }
        let k = w.ncols();
        let big = kron(&w.adjoint(), &identity(self.dim_in));
        let choi = &big * &self.choi * big.adjoint();
        QuantumMap::from_choi(self.dim_in, k, choi)
    }

    pub fn to_signed_kraus(&self, tol: &Tolerances) -> Result<SignedKrausRep> {
        self.require_hp(tol)?;
        let e = eigh(&linalg::hermitian_part(&self.choi));
        let mut terms = Vec::new();
        for (k, &lam) in e.values.iter().enumerate() {
            if lam.abs() <= tol.eig_tol {
                continue;
            }
            let v = e.vectors.columns(k, 1).into_owned();
            let op = unvec(&v, self.dim_out, self.dim_in)? * r(lam.abs().sqrt());
            let sign = if lam > 0.0 { Sign::Plus } else { Sign::Minus };
            terms.push(KrausTerm { sign, operator: op });
        }
        Ok(SignedKrausRep {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            terms,
        })
    }

    /// Splits `J(Ψ)` into its positive and negative spectral parts and returns
    /// `Ψ = p0·Φ0 − p1·Φ1` with `Φ0`, `Φ1` CPTP and `p0 − p1 = 1`.
    ///
    /// When the spectral parts do not have scalar input marginals they are both
    /// shifted by `I_m/m ⊗ (a·I − Tr_out P)`, `a = λ_max(Tr_out P)`, which leaves
    /// `P − Q` unchanged and makes both parts trace-preserving up to scale.
    pub fn jordan_hahn(&self, tol: &Tolerances) -> Result<JordanHahn> {
        self.require_hptp(tol)?;
        let (n, m) = (self.dim_in, self.dim_out);
        let e = eigh(&linalg::hermitian_part(&self.choi));
        let mut pos = zeros(n * m, n * m);
        let mut neg = zeros(n * m, n * m);
        for (k, &lam) in e.values.iter().enumerate() {
            let v = e.vectors.column(k);
            let proj = &v * v.adjoint();
            if lam > 0.0 {
                pos += proj * r(lam);
            } else if lam < 0.0 {
                neg += proj * r(-lam);
            }
        }
        let spectral_p0 = trace(&pos).re / n as f64;
        let spectral_p1 = trace(&neg).re / n as f64;
        let marginal = partial_trace(&pos, m, n, Factor::First)?;
        let a = eigh(&linalg::hermitian_part(&marginal)).max();
        let balanced = max_abs_diff(&marginal, &(identity(n) * r(spectral_p0))) > tol.eq_tol;
        let (p0, p1) = if balanced {
            let shift = kron(&(identity(m) * r(1.0 / m as f64)), &(identity(n) * r(a) - &marginal));
            pos += &shift;
            neg += &shift;
            (a, a - 1.0)
        } else {
            (spectral_p0, spectral_p1)
        };
        let phi0 = QuantumMap::from_choi(n, m, pos * r(1.0 / p0))?;
        let phi1 = if p1 > tol.eig_tol {
            Some(QuantumMap::from_choi(n, m, neg * r(1.0 / p1))?)
        } else {
            None
        };
        Ok(JordanHahn {
            p0,
            p1,
            phi0,
            phi1,
            spectral_p0,
            spectral_p1,
            balanced,
        })
    }
}

/// `Ψ = p0·Φ0 − p1·Φ1`.
#[derive(Clone, Debug)]
pub struct JordanHahn {
    pub p0: f64,
    pub p1: f64,
    pub phi0: QuantumMap,
    /// Absent when the map is already CP (`p1 = 0`).
    pub phi1: Option<QuantumMap>,
    /// `Tr P / n` and `Tr Q / n` of the plain spectral split.
    pub spectral_p0: f64,
    pub spectral_p1: f64,
    /// Whether the spectral parts needed the marginal-balancing shift.
    pub balanced: bool,
}

impl JordanHahn {
    pub fn recombine(&self) -> Result<QuantumMap> {
        match &self.phi1 {
            Some(phi1) => self.phi0.linear_combination(self.p0, phi1, -self.p1),
            None => Ok(self.phi0.scaled(self.p0)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_int(v: i64) -> Option<Self> {
        match v {
            1 => Some(Sign::Plus),
            -1 => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i64(self.value() as i64)
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Sign::from_int(v).ok_or_else(|| serde::de::Error::custom(format!("sign must be 1 or -1, got {v}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrausTerm {
    pub sign: Sign,
    /// m×n operator.
    pub operator: ComplexMatrix,
}

/// Operator-sum form `Ψ(ρ) = Σ sign(i)·E_i ρ E_i†`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedKrausRep {
    pub dim_in: usize,
    pub dim_out: usize,
    pub terms: Vec<KrausTerm>,
}

impl SignedKrausRep {
    pub fn new(dim_in: usize, dim_out: usize, terms: Vec<KrausTerm>) -> Result<Self> {
        for (k, t) in terms.iter().enumerate() {
            if t.operator.shape() != (dim_out, dim_in) {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {k} is {}x{}, expected {dim_out}x{dim_in}",
                    t.operator.nrows(),
                    t.operator.ncols()
                )));
            }
            if !linalg::all_finite(&t.operator) {
                return Err(Error::Parse(format!("Kraus operator {k} has non-finite entries")));
            }
        }
        Ok(Self { dim_in, dim_out, terms })
    }

    /// All-positive rep from ordinary Kraus operators.
    pub fn from_kraus(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty Kraus set".into()))?;
        let (m, n) = first.shape();
        let terms = ops
            .into_iter()
            .map(|operator| KrausTerm {
                sign: Sign::Plus,
                operator,
            })
            .collect();
        Self::new(n, m, terms)
    }

    pub fn to_map(&self) -> QuantumMap {
        let d = self.dim_in * self.dim_out;
        let mut choi = zeros(d, d);
        for t in &self.terms {
            let v = vec(&t.operator);
            choi += (&v * v.adjoint()) * r(t.sign.value());
        }
        QuantumMap {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            choi,
        }
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.shape() != (self.dim_in, self.dim_in) {
            return Err(Error::DimensionMismatch("input has wrong shape".into()));
        }
        let mut out = zeros(self.dim_out, self.dim_out);
        for t in &self.terms {
            out += (&t.operator * x * t.operator.adjoint()) * r(t.sign.value());
        }
        Ok(out)
    }

    /// `Σ sign(i)·E_i†E_i`; the identity for trace-preserving maps.
    pub fn normalization(&self) -> ComplexMatrix {
        let mut s = zeros(self.dim_in, self.dim_in);
        for t in &self.terms {
            s += (t.operator.adjoint() * &t.operator) * r(t.sign.value());
        }
        s
    }

    pub fn normalization_defect(&self) -> f64 {
        max_abs_diff(&self.normalization(), &identity(self.dim_in))
    }

    fn weight(&self, sign: Sign) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.sign == sign)
            .map(|t| t.operator.norm_squared())
            .sum::<f64>()
            / self.dim_in as f64
    }

    /// Positive weight `Σ_+ Tr(E†E)/n`.
    pub fn p0(&self) -> f64 {
        self.weight(Sign::Plus)
    }

    /// Negative weight `Σ_- Tr(E†E)/n`.
    pub fn p1(&self) -> f64 {
        self.weight(Sign::Minus)
    }

    pub fn all_positive(&self) -> bool {
        self.terms.iter().all(|t| t.sign == Sign::Plus)
    }
}
