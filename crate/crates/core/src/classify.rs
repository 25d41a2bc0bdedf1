//! Placement of a map in the hierarchy `CP ⊆ P ⊆ SPR ⊆ SN ⊆ HPTP` (with
//! `SP ⊆ SPR`), and the SP / dual-SN dichotomy.
//!
//! Positivity is decided by a sampled search, which can refute but not prove
//! it; [`PositivityVerdict::ProbablyTrue`] says so. Everything else comes
//! from the semi-nonnegativity program in [`crate::sdp`], read with a band of
//! width `sdp_tol` around zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, eigh, r, ComplexMatrix, Tolerances};
use crate::map::QuantumMap;
use crate::sdp::{self, SdpResult, SdpSettings};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassifyConfig {
    pub tol: Tolerances,
    pub sdp: SdpSettings,
    /// Random starts for the positivity search (on top of the basis vectors).
    pub positivity_starts: usize,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            sdp: SdpSettings::default(),
            positivity_starts: 64,
            seed: 0,
        }
    }
}

impl ClassifyConfig {
    pub fn with_tol(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Most specific class, from most to least physical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    #[serde(rename = "CP")]
    Cp,
    Positive,
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "SPR_not_SP")]
    SprNotSp,
    #[serde(rename = "SN_not_SP")]
    SnNotSp,
    #[serde(rename = "NonSN_HPTP")]
    NonSnHptp,
    #[serde(rename = "NotHPTP")]
    NotHptp,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Cp => "CP",
            Verdict::Positive => "Positive",
            Verdict::Sp => "SP",
            Verdict::SprNotSp => "SPR_not_SP",
            Verdict::SnNotSp => "SN_not_SP",
            Verdict::NonSnHptp => "NonSN_HPTP",
            Verdict::NotHptp => "NotHPTP",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "result")]
pub enum PositivityVerdict {
    /// Certified by complete positivity.
    True,
    /// `λ_min(Ψ(|φ⟩⟨φ|)) = value < 0`.
    False {
        #[serde(serialize_with = "crate::io::ser_matrix")]
        witness: ComplexMatrix,
        value: f64,
    },
    /// No violator found.
    ProbablyTrue { min_value: f64 },
}

impl PositivityVerdict {
    pub fn holds(&self) -> bool {
        !matches!(self, PositivityVerdict::False { .. })
    }
}

/// Outcome of a semi-positivity or semi-nonnegativity test.
#[derive(Clone, Debug, Serialize)]
pub struct SdpVerdict {
    pub holds: bool,
    pub y_star: f64,
    /// Density matrix certificate when `holds`.
    #[serde(serialize_with = "crate::io::ser_opt_matrix")]
    pub witness: Option<ComplexMatrix>,
    /// For SN witnesses: `λ_min(ρ)`, `λ_min(Ψ(ρ)) ≥ −eig_tol` after clipping.
    pub witness_validated: bool,
    pub sdp: SdpResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct Flags {
    pub hp: bool,
    pub tp: bool,
    pub cp: bool,
    pub positive: bool,
    pub spr: bool,
    pub sp: bool,
    pub sn: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MapClass {
    pub verdict: Verdict,
    pub flags: Flags,
    pub y_star: Option<f64>,
    pub choi_min_eigenvalue: Option<f64>,
    pub positivity: Option<PositivityVerdict>,
    #[serde(serialize_with = "crate::io::ser_opt_matrix")]
    pub sp_witness: Option<ComplexMatrix>,
    #[serde(serialize_with = "crate::io::ser_opt_matrix")]
    pub sn_witness: Option<ComplexMatrix>,
    pub sdp: Option<SdpResult>,
}

/// Projects a trace-one Hermitian matrix to a density matrix by clipping
/// negative eigenvalues.
pub fn clip_to_density(x: &ComplexMatrix) -> ComplexMatrix {
    let clipped = linalg::hermitian_fn(&linalg::hermitian_part(x), |v| v.max(0.0));
    let t = linalg::trace(&clipped).re;
    clipped * r(1.0 / t)
}

fn sdp_solve(map: &QuantumMap, cfg: &ClassifyConfig) -> Result<SdpResult> {
    sdp::solve_sn_program(map, &cfg.sdp, &cfg.tol)
}

fn sp_from(result: SdpResult, tol: &Tolerances) -> SdpVerdict {
    let holds = result.y_star < -tol.sdp_tol;
    SdpVerdict {
        holds,
        y_star: result.y_star,
        // y* < 0 already forces X ≻ 0 and Ψ(X) ≻ 0 at the returned point
        witness: holds.then(|| linalg::hermitian_part(&result.witness_state)),
        witness_validated: holds && result.lambda_min_state > 0.0 && result.lambda_min_image > 0.0,
        sdp: result,
    }
}

fn sn_from(map: &QuantumMap, result: SdpResult, tol: &Tolerances) -> Result<SdpVerdict> {
    let holds = result.y_star <= tol.sdp_tol;
    let (witness, validated) = if holds {
        let rho = clip_to_density(&result.witness_state);
        let img = linalg::hermitian_part(&map.apply(&rho)?);
        let ok = eigh(&rho).min() >= -tol.eig_tol && eigh(&img).min() >= -tol.eig_tol;
        (Some(rho), ok)
    } else {
        (None, false)
    };
    Ok(SdpVerdict {
        holds,
        y_star: result.y_star,
        witness,
        witness_validated: validated,
        sdp: result,
    })
}

/// Some invertible density matrix is mapped to an invertible one.
pub fn is_sp(map: &QuantumMap, cfg: &ClassifyConfig) -> Result<SdpVerdict> {
    Ok(sp_from(sdp_solve(map, cfg)?, &cfg.tol))
}

/// Some density matrix is mapped to a positive semidefinite one.
pub fn is_sn(map: &QuantumMap, cfg: &ClassifyConfig) -> Result<SdpVerdict> {
    sn_from(map, sdp_solve(map, cfg)?, &cfg.tol)
}

/// Isometry onto the largest output range `K_Ψ = Σ_k Range Ψ(V_k)`, which is
/// the range of `Ψ(ρ)` for a generic density matrix `ρ`.
pub fn output_range(map: &QuantumMap, tol: &Tolerances) -> Result<ComplexMatrix> {
    let m = map.dim_out();
    let mut gram = linalg::zeros(m, m);
    for v in sdp::hermitian_basis(map.dim_in()).elements {
        let img = map.apply(&v)?;
        gram += &img * img.adjoint();
    }
    let e = eigh(&linalg::hermitian_part(&gram));
    // singular values of the stacked images are square roots of these
    let top = e.max().max(0.0).sqrt();
    let rank = e
        .values
        .iter()
        .filter(|&&v| v.max(0.0).sqrt() > tol.eig_tol * top.max(1.0))
        .count();
    Ok(e.vectors.columns(0, rank).into_owned())
}

/// Semi-positive after compressing the codomain to [`output_range`].
pub fn is_spr(map: &QuantumMap, cfg: &ClassifyConfig) -> Result<SdpVerdict> {
    map.require_hptp(&cfg.tol)?;
    let w = output_range(map, &cfg.tol)?;
    if w.ncols() == map.dim_out() {
        return is_sp(map, cfg);
    }
    let reduced = map.compress_output(&w)?;
    is_sp(&reduced, cfg)
}

/// Searches for a pure state with an indefinite image by alternating
/// minimization of `⟨v|Ψ(|φ⟩⟨φ|)|v⟩` over `v` and `φ`. Starts are the basis
/// vectors followed by `positivity_starts` seeded random vectors.
pub fn is_positive(map: &QuantumMap, cfg: &ClassifyConfig) -> Result<PositivityVerdict> {
    map.require_hp(&cfg.tol)?;
    if map.is_cp(&cfg.tol)? {
        return Ok(PositivityVerdict::True);
    }
    let n = map.dim_in();
    let dual = map.dual();
    let mut starts: Vec<ComplexMatrix> = (0..n)
        .map(|i| {
            let mut v = linalg::zeros(n, 1);
            v[(i, 0)] = r(1.0);
            v
        })
        .collect();
    let mut g = crate::atlas::rng(cfg.seed ^ 0x9051_7175);
    for _ in 0..cfg.positivity_starts {
        let v = crate::atlas::gaussian_matrix(&mut g, n, 1);
        let norm = v.norm();
        starts.push(v / r(norm));
    }
    let descend = |mut phi: ComplexMatrix| -> Result<(f64, ComplexMatrix)> {
        let mut value = f64::INFINITY;
        for _ in 0..500 {
            let img = linalg::hermitian_part(&map.apply(&(&phi * phi.adjoint()))?);
            let e = eigh(&img);
            let new_value = e.min();
            if value - new_value <= 1e-15 {
                value = value.min(new_value);
                break;
            }
            value = new_value;
            let v = e.vectors.columns(map.dim_out() - 1, 1).into_owned();
            let back = linalg::hermitian_part(&dual.apply(&(&v * v.adjoint()))?);
            let eb = eigh(&back);
            phi = eb.vectors.columns(n - 1, 1).into_owned();
        }
        Ok((value, phi))
    };
    let mut best: Option<(f64, ComplexMatrix)> = None;
    for s in starts {
        let (value, phi) = descend(s)?;
        // earlier starts win near-ties, so exact basis witnesses are kept
        if best.as_ref().is_none_or(|(b, _)| value < *b - 1e-12) {
            best = Some((value, phi));
        }
    }
    let (value, phi) = best.expect("at least one start");
    if value < -cfg.tol.eig_tol {
        Ok(PositivityVerdict::False {
            witness: &phi * phi.adjoint(),
            value,
        })
    } else {
        Ok(PositivityVerdict::ProbablyTrue { min_value: value })
    }
}

pub fn classify(map: &QuantumMap, cfg: &ClassifyConfig) -> Result<MapClass> {
    let tol = &cfg.tol;
    let hp = map.is_hp(tol);
    let tp = map.is_tp(tol);
    if !(hp && tp) {
        return Ok(MapClass {
            verdict: Verdict::NotHptp,
            flags: Flags {
                hp,
                tp,
                cp: false,
                positive: false,
                spr: false,
                sp: false,
                sn: false,
            },
            y_star: None,
            choi_min_eigenvalue: None,
            positivity: None,
            sp_witness: None,
            sn_witness: None,
            sdp: None,
        });
    }
    let choi_min = map.choi_min_eigenvalue(tol)?;
    let cp = choi_min >= -tol.eig_tol;
    let positivity = is_positive(map, cfg)?;
    let result = sdp_solve(map, cfg)?;
    let sp = sp_from(result.clone(), tol);
    let sn = sn_from(map, result.clone(), tol)?;
    let spr = if sp.holds { true } else { is_spr(map, cfg)?.holds };
    let positive = positivity.holds();
    let verdict = if cp {
        Verdict::Cp
    } else if positive {
        Verdict::Positive
    } else if sp.holds {
        Verdict::Sp
    } else if spr {
        Verdict::SprNotSp
    } else if sn.holds {
        Verdict::SnNotSp
    } else {
        Verdict::NonSnHptp
    };
    Ok(MapClass {
        verdict,
        flags: Flags {
            hp,
            tp,
            cp,
            positive,
            spr,
            sp: sp.holds,
            sn: sn.holds,
        },
        y_star: Some(result.y_star),
        choi_min_eigenvalue: Some(choi_min),
        positivity: Some(positivity),
        sp_witness: sp.witness,
        sn_witness: sn.witness,
        sdp: Some(result),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DichotomySide {
    /// `Ψ` is semi-positive.
    #[serde(rename = "SP_side")]
    Sp,
    /// `−Ψ*` is semi-nonnegative.
    #[serde(rename = "SN_dual_side")]
    SnDual,
    /// One of the two values lies inside the tolerance band.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct Dichotomy {
    pub side: DichotomySide,
    /// Optimal value of the program for `Ψ`.
    pub y_star: f64,
    /// Optimal value of the program for `−Ψ*`.
    pub y_star_dual: f64,
}

/// Exactly one of: `Ψ` is SP, or `−Ψ*` is SN.
pub fn duality_dichotomy(map: &QuantumMap, cfg: &ClassifyConfig) -> Result<Dichotomy> {
    map.require_hptp(&cfg.tol)?;
    let band = cfg.tol.sdp_tol;
    let y = sdp_solve(map, cfg)?.y_star;
    let neg_dual = map.dual().scaled(-1.0);
    let y_dual = sdp::solve_feasibility(&neg_dual, &cfg.sdp, &cfg.tol)?.y_star;
    let side = if y.abs() <= band || y_dual.abs() <= band {
        DichotomySide::Inconclusive
    } else {
        match (y < 0.0, y_dual < 0.0) {
            (true, false) => DichotomySide::Sp,
            (false, true) => DichotomySide::SnDual,
            (both, _) => {
                return Err(Error::DichotomyViolation(format!(
                    "{} (y* = {y:.3e}, dual y* = {y_dual:.3e})",
                    if both {
                        "map is SP and its negated dual is SN"
                    } else {
                        "map is not SP and its negated dual is not SN"
                    }
                )))
            }
        }
    };
    Ok(Dichotomy {
        side,
        y_star: y,
        y_star_dual: y_dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas;
    use crate::linalg::{diag_real, max_abs_diff, pauli_z};

    fn cfg() -> ClassifyConfig {
        ClassifyConfig::default()
    }

    #[test]
    fn worked_examples() {
        let t = classify(&atlas::transpose(2), &cfg()).unwrap();
        assert_eq!(t.verdict, Verdict::Positive);
        assert!(!t.flags.cp && t.flags.positive && t.flags.spr && t.flags.sn && t.flags.sp);

        let e2 = classify(&atlas::example2_psi(), &cfg()).unwrap();
        assert_eq!(e2.verdict, Verdict::SnNotSp);
        assert!(e2.y_star.unwrap().abs() <= 1e-6);

        let ups = atlas::indefinite_replacement(2, &diag_real(&[2.0, -1.0])).unwrap();
        let u = classify(&ups, &cfg()).unwrap();
        assert_eq!(u.verdict, Verdict::NonSnHptp);
        assert!(!u.flags.sn);

        let id = classify(&QuantumMap::identity(3), &cfg()).unwrap();
        assert_eq!(id.verdict, Verdict::Cp);

        let doubled = classify(&QuantumMap::identity(2).scaled(2.0), &cfg()).unwrap();
        assert_eq!(doubled.verdict, Verdict::NotHptp);
        assert!(doubled.flags.hp && !doubled.flags.tp);
    }

    #[test]
    fn example2_positivity_witness() {
        match is_positive(&atlas::example2_psi(), &cfg()).unwrap() {
            PositivityVerdict::False { witness, value } => {
                assert!((value + 1.0).abs() < 1e-12);
                assert!(max_abs_diff(&witness, &diag_real(&[0.0, 1.0])) < 1e-12, "{witness}");
            }
            other => panic!("expected a violator, got {other:?}"),
        }
        assert!(matches!(
            is_positive(&atlas::transpose(3), &cfg()).unwrap(),
            PositivityVerdict::ProbablyTrue { .. }
        ));
        assert_eq!(is_positive(&atlas::random_cptp(2, 3, 1), &cfg()).unwrap(), PositivityVerdict::True);
    }

    #[test]
    fn sn_witness_for_example2() {
        let sn = is_sn(&atlas::example2_psi(), &cfg()).unwrap();
        assert!(sn.holds && sn.witness_validated);
        assert!(max_abs_diff(sn.witness.as_ref().unwrap(), &diag_real(&[1.0, 0.0])) < 1e-6);
    }

    #[test]
    fn replacement_by_pure_state() {
        let pure = diag_real(&[1.0, 0.0]);
        let map = atlas::replacement(2, &pure).unwrap();
        assert!(!is_sp(&map, &cfg()).unwrap().holds);
        assert!(is_spr(&map, &cfg()).unwrap().holds);
        assert_eq!(output_range(&map, &cfg().tol).unwrap().ncols(), 1);
        assert_eq!(classify(&map, &cfg()).unwrap().verdict, Verdict::Cp);
    }

    #[test]
    fn sn_but_not_spr() {
        let map = atlas::not_spr_example(2, 2).unwrap();
        assert!(is_sn(&map, &cfg()).unwrap().holds);
        assert!(!is_spr(&map, &cfg()).unwrap().holds);
        assert_eq!(classify(&map, &cfg()).unwrap().verdict, Verdict::SnNotSp);
    }

    #[test]
    fn gamma_eps_is_not_sn() {
        let map = atlas::gamma_eps(2, 2, 0.5).unwrap();
        assert!(!is_sn(&map, &cfg()).unwrap().holds);
    }

    #[test]
    fn inverse_of_channel_is_sp() {
        for seed in 0..5 {
            let phi = atlas::random_cptp(2, 2, seed).mix(0.5, &QuantumMap::identity(2)).unwrap();
            let inv = phi.inverse(&cfg().tol).unwrap();
            assert!(is_sp(&inv, &cfg()).unwrap().holds, "seed {seed}");
        }
    }

    #[test]
    fn dichotomy_examples() {
        assert_eq!(
            duality_dichotomy(&QuantumMap::identity(2), &cfg()).unwrap().side,
            DichotomySide::Sp
        );
        let ups = atlas::indefinite_replacement(2, &diag_real(&[2.0, -1.0])).unwrap();
        assert_eq!(duality_dichotomy(&ups, &cfg()).unwrap().side, DichotomySide::SnDual);
    }

    #[test]
    fn hierarchy_flags_are_monotone() {
        let maps = [
            atlas::random_hptp(2, 2, 3),
            atlas::random_sp(2, 4),
            atlas::transpose(2),
            atlas::example2_psi(),
            QuantumMap::replacement(2, &(linalg::identity(2) * r(0.5) + pauli_z() * r(0.5))),
        ];
        for m in &maps {
            let c = classify(m, &cfg()).unwrap();
            let f = &c.flags;
            assert!(!f.cp || f.positive);
            assert!(!f.positive || f.spr);
            assert!(!f.sp || f.spr);
            assert!(!f.spr || f.sn);
        }
    }

    #[test]
    fn json_shape() {
        let c = classify(&atlas::example2_psi(), &cfg()).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["verdict"], "SN_not_SP");
        assert_eq!(v["positivity"]["result"], "False");
        assert!(v["sn_witness"].is_array());
    }
}
