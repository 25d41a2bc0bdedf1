//! Unitary dilations and the two-step context circuit that realizes an SP map.
//!
//! Joint system–environment indices are ordered system ⊗ environment:
//! basis state `|s⟩|e⟩` sits at `s·d + e`.

use serde::Serialize;

use crate::decompose::SpDecomposition;
use crate::error::{Error, Result};
use crate::linalg::{
    self, c, eigh, identity, kron, partial_trace, r, unitarity_defect, zeros, ComplexMatrix, Factor, Tolerances,
};
use crate::map::{QuantumMap, SignedKrausRep};

/// `U` on system ⊗ environment with the environment prepared in `env_state`.
#[derive(Clone, Debug, Serialize)]
pub struct Dilation {
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub unitary: ComplexMatrix,
    pub env_dim: usize,
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub env_state: ComplexMatrix,
}

impl Dilation {
    pub fn system_dim(&self) -> usize {
        self.unitary.nrows() / self.env_dim
    }

    /// `Tr_E[U(ρ ⊗ ε)U†]`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let joint = evolve(&self.unitary, &kron(rho, &self.env_state));
        partial_trace(&joint, self.system_dim(), self.env_dim, Factor::Second)
    }

    /// The reduced channel.
    pub fn channel(&self) -> QuantumMap {
        let n = self.system_dim();
        QuantumMap::from_linear_fn(n, n, |x| self.apply(x).expect("shapes agree"))
    }
}

fn evolve(u: &ComplexMatrix, state: &ComplexMatrix) -> ComplexMatrix {
    u * state * u.adjoint()
}

fn env_ground(d: usize) -> ComplexMatrix {
    linalg::matrix_unit(d, 0, 0)
}

/// Stinespring dilation of a CPTP Kraus set `{E_k}` on an `n`-dimensional
/// system: `V = Σ_k E_k ⊗ |k⟩` fills the columns `|i⟩|0⟩` of `U`, the rest is
/// an orthonormal completion.
pub fn stinespring(rep: &SignedKrausRep, tol: &Tolerances) -> Result<Dilation> {
    if !rep.all_positive() {
        return Err(Error::NotCptp("negative Kraus weight".into()));
    }
    let defect = rep.normalization_defect();
    if defect > tol.eq_tol {
        return Err(Error::NotCptp(format!("Σ E†E deviates from I by {defect:.3e}")));
    }
    let n = rep.dim_in;
    if rep.dim_out != n {
        return Err(Error::DimensionMismatch(format!(
            "dilation needs equal input and output dimensions, got {n}->{}",
            rep.dim_out
        )));
    }
    let d = rep.terms.len().max(1);
    let mut v = zeros(n * d, n);
    for (k, term) in rep.terms.iter().enumerate() {
        for a in 0..n {
            for i in 0..n {
                v[(a * d + k, i)] = term.operator[(a, i)];
            }
        }
    }
    // remove the residual normalization defect: V ← V (V†V)^(-1/2)
    let gram = linalg::hermitian_part(&(v.adjoint() * &v));
    v = &v * linalg::hermitian_fn(&gram, |x| 1.0 / x.sqrt());
    let rest = linalg::orthonormal_complement(&v, n * d);
    let mut u = zeros(n * d, n * d);
    let mut spare = 0;
    for s in 0..n {
        for e in 0..d {
            let col = if e == 0 {
                v.column(s).into_owned()
            } else {
                spare += 1;
                rest.column(spare - 1).into_owned()
            };
            u.set_column(s * d + e, &col);
        }
    }
    Ok(Dilation {
        unitary: u,
        env_dim: d,
        env_state: env_ground(d),
    })
}

/// Unitary applying `Φ` then the correction `U = U_Ξ U_Φ†`; running both on
/// `ρ ⊗ |0⟩⟨0|` yields `Φ(ρ)` and then `Ψ(Φ(ρ))` on the system.
#[derive(Clone, Debug, Serialize)]
pub struct ContextCircuit {
    pub u_c: Dilation,
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub u: ComplexMatrix,
}

#[derive(Clone, Debug, Serialize)]
pub struct CircuitRun {
    /// System after the context unitary, `Φ(ρ)`.
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub rho_s1: ComplexMatrix,
    /// System after the correction, `Ξ(ρ)`.
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub rho_s2: ComplexMatrix,
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub joint_after_context: ComplexMatrix,
    #[serde(serialize_with = "crate::io::ser_matrix")]
    pub joint_final: ComplexMatrix,
}

pub fn simulate_context_circuit(circuit: &ContextCircuit, rho: &ComplexMatrix) -> Result<CircuitRun> {
    let (n, d) = (circuit.u_c.system_dim(), circuit.u_c.env_dim);
    if rho.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("expected a {n}x{n} state")));
    }
    let joint_after_context = evolve(&circuit.u_c.unitary, &kron(rho, &circuit.u_c.env_state));
    let joint_final = evolve(&circuit.u, &joint_after_context);
    Ok(CircuitRun {
        rho_s1: partial_trace(&joint_after_context, n, d, Factor::Second)?,
        rho_s2: partial_trace(&joint_final, n, d, Factor::Second)?,
        joint_after_context,
        joint_final,
    })
}

fn pad(rep: &mut SignedKrausRep, len: usize) {
    while rep.terms.len() < len {
        let mut zero = rep.terms[0].clone();
        zero.operator = zeros(rep.dim_out, rep.dim_in);
        rep.terms.push(zero);
    }
}

/// Context circuit for `Ψ = Ξ∘Φ⁻¹` built from Stinespring dilations of `Φ`
/// and `Ξ` on a shared environment.
pub fn realize_sp_map(d: &SpDecomposition, tol: &Tolerances) -> Result<ContextCircuit> {
    let mut kphi = d.phi.to_signed_kraus(tol)?;
    let mut kxi = d.xi.to_signed_kraus(tol)?;
    let len = kphi.terms.len().max(kxi.terms.len());
    pad(&mut kphi, len);
    pad(&mut kxi, len);
    let u_phi = stinespring(&kphi, tol)?;
    let u_xi = stinespring(&kxi, tol)?;
    let u = &u_xi.unitary * u_phi.unitary.adjoint();
    Ok(ContextCircuit { u_c: u_phi, u })
}

/// The 8×8 dilations `(U_Φ, U_Ξ)` of the qubit transpose factorization, with
/// the blocks written out explicitly (system ⊗ 4-level environment).
pub fn example1_unitaries(lambda: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if !(lambda > 0.0 && lambda <= 1.0 / 3.0) {
        return Err(Error::ParameterOutOfRange(format!("lambda must lie in (0, 1/3], got {lambda}")));
    }
    let ket_bra = |i, j| linalg::matrix_unit(2, i, j);
    let (x, y, z, id) = (linalg::pauli_x(), linalg::pauli_y(), linalg::pauli_z(), identity(2));
    let a = [
        ket_bra(0, 1) * r(((1.0 - lambda) / 2.0).sqrt()),
        ket_bra(1, 0) * r(((1.0 - lambda) / 2.0).sqrt()),
        &id * r((1.0 + 3.0 * lambda).sqrt() / 2.0),
        &z * r((1.0 - lambda).sqrt() / 2.0),
    ];
    let b = [
        ket_bra(0, 0) * r(((1.0 + lambda) / 2.0).sqrt()),
        ket_bra(1, 1) * r(((1.0 + lambda) / 2.0).sqrt()),
        &x * r((1.0 + lambda).sqrt() / 2.0),
        &y * c(0.0, (1.0 - 3.0 * lambda).sqrt() / 2.0),
    ];
    let mix = |k: &[ComplexMatrix; 4]| {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [
            k[0].clone(),
            k[1].clone(),
            (&k[2] + &k[3]) * r(s),
            (&k[2] - &k[3]) * r(s),
        ]
    };
    let (cc, dd) = (mix(&a), mix(&b));
    let neg = |m: &ComplexMatrix| -m;
    let adj = |m: &ComplexMatrix| m.adjoint();
    let u_phi = [
        [cc[2].clone(), neg(&cc[3]), adj(&cc[0]), adj(&cc[1])],
        [cc[3].clone(), cc[2].clone(), adj(&cc[1]), neg(&adj(&cc[0]))],
        [cc[0].clone(), cc[1].clone(), neg(&cc[3]), cc[2].clone()],
        [cc[1].clone(), neg(&cc[0]), neg(&cc[2]), neg(&cc[3])],
    ];
    let u_xi = [
        [dd[0].clone(), neg(&dd[1]), adj(&dd[2]), adj(&dd[3])],
        [dd[1].clone(), dd[0].clone(), adj(&dd[3]), neg(&adj(&dd[2]))],
        [dd[2].clone(), dd[3].clone(), neg(&dd[1]), dd[0].clone()],
        [dd[3].clone(), neg(&dd[2]), neg(&dd[0]), neg(&dd[1])],
    ];
    Ok((from_env_blocks(&u_phi), from_env_blocks(&u_xi)))
}

/// Block `(r, c)` acts on the system for environment transition `c → r`.
fn from_env_blocks(blocks: &[[ComplexMatrix; 4]; 4]) -> ComplexMatrix {
    let mut u = zeros(8, 8);
    for (row, line) in blocks.iter().enumerate() {
        for (col, blk) in line.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    u[(a * 4 + row, b * 4 + col)] = blk[(a, b)];
                }
            }
        }
    }
    u
}

/// Context circuit for the qubit transpose from the explicit unitaries.
pub fn example1_circuit(lambda: f64) -> Result<ContextCircuit> {
    let (u_phi, u_xi) = example1_unitaries(lambda)?;
    Ok(ContextCircuit {
        u: &u_xi * u_phi.adjoint(),
        u_c: Dilation {
            unitary: u_phi,
            env_dim: 4,
            env_state: env_ground(4),
        },
    })
}

/// Two swaps with the environment prepared in `env_state`: after the first the
/// system holds `env_state` whatever it started in, after the second it is
/// back to `ρ`. The intermediate step admits no map on the system alone.
pub fn swap_circuit(env_state: &ComplexMatrix) -> ContextCircuit {
    let n = env_state.nrows();
    let mut swap = zeros(n * n, n * n);
    for s in 0..n {
        for e in 0..n {
            swap[(e * n + s, s * n + e)] = r(1.0);
        }
    }
    ContextCircuit {
        u_c: Dilation {
            unitary: swap.clone(),
            env_dim: n,
            env_state: env_state.clone(),
        },
        u: swap,
    }
}

/// Worst trace or positivity defect of the two joint states.
pub fn joint_state_defect(run: &CircuitRun) -> f64 {
    [&run.joint_after_context, &run.joint_final]
        .iter()
        .map(|s| {
            let t = (linalg::trace(s) - r(1.0)).norm();
            let neg = (-eigh(&linalg::hermitian_part(s)).min()).max(0.0);
            t.max(neg)
        })
        .fold(0.0, f64::max)
}

pub fn circuit_unitarity_defect(circuit: &ContextCircuit) -> f64 {
    unitarity_defect(&circuit.u_c.unitary).max(unitarity_defect(&circuit.u))
}
