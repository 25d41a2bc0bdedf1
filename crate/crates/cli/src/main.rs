//! `hptp-kit`: classify, decompose, dilate and error-correct
//! Hermitian-preserving trace-preserving maps from JSON files.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hptp_core::atlas::{self, MapRecipe};
use hptp_core::classify::{self, Verdict};
use hptp_core::decompose::{self, SpDecomposition};
use hptp_core::dilate;
use hptp_core::io;
use hptp_core::linalg::{identity, max_abs_diff, r, unitarity_defect, ComplexMatrix};
use hptp_core::qec;
use hptp_core::sdp::SdpSettings;
use hptp_core::{QuantumMap, Tolerances};
use serde_json::{json, Value};

use report::{envelope, sig12, to_value, Failure, Output, RunConfig};

#[derive(Parser)]
#[command(name = "hptp-kit", version, about = "Maps between CPTP and HPTP: classification, decompositions, dilations, error correction")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Eigenvalue and equality tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Decision band of the semidefinite program.
    #[arg(long, global = true, default_value_t = 1e-7)]
    sdp_tol: f64,
    #[arg(long, global = true, default_value_t = 4)]
    sdp_restarts: usize,
    #[arg(long, global = true, default_value_t = 5000)]
    sdp_max_iters: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Output::Human)]
    output: Output,
}

#[derive(Subcommand)]
enum Command {
    /// Place a map in the CP ⊆ P ⊆ SPR ⊆ SN ⊆ HPTP hierarchy.
    Classify { map: PathBuf },
    /// Write a map in terms of CPTP maps.
    Decompose {
        #[command(subcommand)]
        kind: DecomposeKind,
    },
    /// End-to-end walkthroughs.
    Demo {
        #[command(subcommand)]
        which: Demo,
    },
    /// Error correction for signed operator-sum noise.
    Qec {
        #[command(subcommand)]
        action: QecAction,
    },
    /// Emit a registered map as a Choi file.
    Sample(SampleArgs),
    /// Stinespring dilation of a CPTP map.
    Dilate {
        map: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Realize an SP map as a context circuit and run it on a state.
    Simulate {
        map: PathBuf,
        /// Input state as a JSON matrix; random (from --seed) if absent.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DecomposeKind {
    /// Ψ = Ξ∘Φ⁻¹ with Φ, Ξ CPTP.
    Sp {
        map: PathBuf,
        /// Anchor state as a JSON matrix; the SDP witness if absent.
        #[arg(long)]
        rho: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ψ∘Φ = Ξ with replacement channels Φ, Ξ.
    Sn {
        map: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two SP maps averaging to Ψ.
    Convex {
        map: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Demo {
    /// The qubit transpose as a context circuit.
    Transpose {
        #[arg(long, default_value_t = 1.0 / 3.0)]
        lambda: f64,
        /// Random input states for the circuit check.
        #[arg(long, default_value_t = 50)]
        inputs: usize,
        /// Sample points for the coverage estimate.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum QecAction {
    /// Evaluate P E_i E_j† P = α_ij P.
    Check { code: PathBuf, noise: PathBuf },
    /// Build the recovery channel.
    Recover {
        code: PathBuf,
        noise: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check R∘N = id on the code space.
    Verify {
        code: PathBuf,
        noise: PathBuf,
        /// Recovery map file; synthesized if absent.
        #[arg(long)]
        recovery: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SampleArgs {
    /// One of the registered recipes (see `atlas::RECIPES`).
    recipe: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Output dimension; defaults to n.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Result of a command: payload for JSON, lines for humans, exit code.
struct Outcome {
    name: &'static str,
    result: Value,
    human: Vec<String>,
    code: u8,
}

impl Outcome {
    fn new(name: &'static str, result: Value) -> Self {
        Self { name, result, human: Vec::new(), code: report::OK }
    }

    fn line(&mut self, s: impl Into<String>) -> &mut Self {
        self.human.push(s.into());
        self
    }
}

type Run = Result<Outcome, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(report::PARSE, format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("plain data") + "\n";
    std::fs::write(path, text).map_err(|e| Failure::new(1, format!("{}: {e}", path.display())))
}

fn in_file(path: &Path, e: hptp_core::Error) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn load_map(path: &Path) -> Result<QuantumMap, Failure> {
    io::map_from_json_str(&read(path)?).map_err(|e| in_file(path, e))
}

fn load_matrix(path: &Path) -> Result<ComplexMatrix, Failure> {
    let rows: io::JsonMatrix =
        serde_json::from_str(&read(path)?).map_err(|e| in_file(path, hptp_core::Error::Parse(e.to_string())))?;
    io::matrix_from_json(&rows).map_err(|e| in_file(path, e))
}

fn fmt_matrix(m: &ComplexMatrix) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = (0..m.ncols())
                .map(|j| {
                    let z = m[(i, j)];
                    if z.im.abs() < 1e-15 {
                        format!("{}", sig12(z.re))
                    } else {
                        format!("{}{:+}i", sig12(z.re), sig12(z.im))
                    }
                })
                .collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn cmd_classify(cfg: &RunConfig, path: &Path) -> Run {
    let map = load_map(path)?;
    let class = classify::classify(&map, &cfg.classify_config())?;
    let mut out = Outcome::new("classify", to_value(&class));
    out.line(format!("verdict: {}", class.verdict));
    let f = &class.flags;
    out.line(format!(
        "flags: hp={} tp={} cp={} positive={} spr={} sp={} sn={}",
        f.hp, f.tp, f.cp, f.positive, f.spr, f.sp, f.sn
    ));
    if let Some(y) = class.y_star {
        out.line(format!("y*: {}", sig12(y)));
    }
    if let Some(e) = class.choi_min_eigenvalue {
        out.line(format!("min Choi eigenvalue: {}", sig12(e)));
    }
    if let Some(w) = &class.sp_witness {
        out.line(format!("SP witness: {}", fmt_matrix(w)));
    } else if let Some(w) = &class.sn_witness {
        out.line(format!("SN witness: {}", fmt_matrix(w)));
    }
    if let Some(classify::PositivityVerdict::False { witness, value }) = &class.positivity {
        out.line(format!("positivity violated: λ_min = {} at φ = {}", sig12(*value), fmt_matrix(witness)));
    }
    if class.verdict == Verdict::NotHptp {
        out.code = report::NOT_HPTP;
    }
    Ok(out)
}

fn sp_bundle(d: &SpDecomposition) -> Value {
    json!({
        "phi": io::map_to_json(&d.phi),
        "xi": io::map_to_json(&d.xi),
        "lambda": d.lambda,
        "rho": io::matrix_to_json(&d.rho),
    })
}

fn cmd_decompose(cfg: &RunConfig, kind: &DecomposeKind) -> Run {
    let ccfg = cfg.classify_config();
    let tol = &cfg.tolerances;
    match kind {
        DecomposeKind::Sp { map, rho, out } => {
            let psi = load_map(map)?;
            let anchor = rho.as_deref().map(load_matrix).transpose()?;
            let d = decompose::sp_decompose(&psi, anchor.as_ref(), &ccfg)?;
            let v = decompose::verify_sp_decomposition(&d, &psi, tol)?;
            let bundle = sp_bundle(&d);
            if let Some(path) = out {
                write_json(path, &bundle)?;
            }
            let mut o = Outcome::new("decompose sp", json!({ "decomposition": bundle, "verification": to_value(&v) }));
            o.line(format!("lambda: {}", sig12(d.lambda)))
                .line(format!("rho: {}", fmt_matrix(&d.rho)))
                .line(format!("residual |Ξ∘Φ⁻¹ − Ψ|: {:.3e}", v.residual))
                .line(format!("min eigenvalue of J(Ξ): {:.3e}", v.xi_choi_min_eigenvalue))
                .line(format!("verification: {}", if v.passed { "pass" } else { "FAIL" }));
            if !v.passed {
                o.code = report::VERIFY_FAILED;
            }
            Ok(o)
        }
        DecomposeKind::Sn { map, out } => {
            let psi = load_map(map)?;
            let d = decompose::sn_decompose(&psi, None, &ccfg)?;
            let residual = max_abs_diff(psi.compose(&d.phi)?.choi(), d.xi.choi());
            let cptp = d.phi.is_cptp(tol) && d.xi.is_cptp(tol);
            let passed = residual <= tol.eq_tol && cptp;
            let bundle = json!({
                "phi": io::map_to_json(&d.phi),
                "xi": io::map_to_json(&d.xi),
                "rho": io::matrix_to_json(&d.rho),
            });
            if let Some(path) = out {
                write_json(path, &bundle)?;
            }
            let mut o = Outcome::new(
                "decompose sn",
                json!({
                    "decomposition": bundle,
                    "verification": { "residual": residual, "cptp": cptp, "passed": passed },
                }),
            );
            o.line(format!("rho: {}", fmt_matrix(&d.rho)))
                .line(format!("Ψ(rho): {}", fmt_matrix(&psi.apply(&d.rho)?)))
                .line(format!("residual |Ψ∘Φ − Ξ|: {residual:.3e}"))
                .line(format!("verification: {}", if passed { "pass" } else { "FAIL" }));
            if !passed {
                o.code = report::VERIFY_FAILED;
            }
            Ok(o)
        }
        DecomposeKind::Convex { map, out } => {
            let psi = load_map(map)?;
            let (a, b) = decompose::convex_split(&psi, tol)?;
            let midpoint = max_abs_diff(a.linear_combination(0.5, &b, 0.5)?.choi(), psi.choi());
            let ya = classify::is_sp(&a, &ccfg)?;
            let yb = classify::is_sp(&b, &ccfg)?;
            let passed = midpoint <= tol.eq_tol && ya.holds && yb.holds;
            let bundle = json!({ "psi1": io::map_to_json(&a), "psi2": io::map_to_json(&b) });
            if let Some(path) = out {
                write_json(path, &bundle)?;
            }
            let mut o = Outcome::new(
                "decompose convex",
                json!({
                    "decomposition": bundle,
                    "verification": {
                        "midpoint_residual": midpoint,
                        "psi1_y_star": ya.y_star,
                        "psi2_y_star": yb.y_star,
                        "passed": passed,
                    },
                }),
            );
            o.line(format!("Ψ₁: SP={} (y* = {})", ya.holds, sig12(ya.y_star)))
                .line(format!("Ψ₂: SP={} (y* = {})", yb.holds, sig12(yb.y_star)))
                .line(format!("midpoint residual: {midpoint:.3e}"))
                .line(format!("verification: {}", if passed { "pass" } else { "FAIL" }));
            if !passed {
                o.code = report::VERIFY_FAILED;
            }
            Ok(o)
        }
    }
}

fn cmd_demo_transpose(cfg: &RunConfig, lambda: f64, inputs: usize, samples: usize) -> Run {
    let tol = &cfg.tolerances;
    let phi = atlas::example1_phi(lambda)?;
    let xi = atlas::example1_xi(lambda)?;
    let t = atlas::transpose(2);
    let factor_residual = max_abs_diff(xi.compose(&phi.inverse(tol)?)?.choi(), t.choi());
    let (u_phi, u_xi) = dilate::example1_unitaries(lambda)?;
    let unitarity = unitarity_defect(&u_phi).max(unitarity_defect(&u_xi));
    let circuit = dilate::example1_circuit(lambda)?;
    let dil_phi = circuit.u_c.channel().distance(&phi);
    let dil_xi = dilate::Dilation { unitary: u_xi, ..circuit.u_c.clone() }.channel().distance(&xi);
    let mut circuit_residual: f64 = 0.0;
    for k in 0..inputs as u64 {
        let rho = atlas::random_density(2, cfg.seed.wrapping_add(k));
        let run = dilate::simulate_context_circuit(&circuit, &rho)?;
        circuit_residual = circuit_residual.max(max_abs_diff(&run.rho_s2, &t.apply(&run.rho_s1)?));
    }
    let d = SpDecomposition { phi, xi, lambda, rho: identity(2) * r(0.5) };
    let coverage = decompose::coverage_ratio(&d, tol)?;
    let sampled = decompose::coverage_monte_carlo(&d, samples.max(1), cfg.seed)?;
    let checks = [
        ("factorization", factor_residual),
        ("unitarity", unitarity),
        ("dilation of Φ", dil_phi),
        ("dilation of Ξ", dil_xi),
        ("circuit", circuit_residual),
    ];
    let passed = checks.iter().all(|(_, v)| *v <= tol.eq_tol);
    let mut o = Outcome::new(
        "demo transpose",
        json!({
            "lambda": lambda,
            "factorization_residual": factor_residual,
            "unitarity_defect": unitarity,
            "dilation_residual_phi": dil_phi,
            "dilation_residual_xi": dil_xi,
            "circuit_residual": circuit_residual,
            "circuit_inputs": inputs,
            "coverage_ratio": coverage,
            "coverage_sampled": sampled,
            "coverage_samples": samples,
            "u_phi": io::matrix_to_json(&u_phi),
            "u_xi": io::matrix_to_json(&dilate::example1_unitaries(lambda)?.1),
            "passed": passed,
        }),
    );
    o.line(format!("lambda: {}", sig12(lambda)));
    for (name, v) in checks {
        o.line(format!("{name}: {v:.3e} {}", if v <= tol.eq_tol { "ok" } else { "FAIL" }));
    }
    o.line(format!("coverage of the Bloch ball: {} (sampled {})", sig12(coverage), sig12(sampled)));
    if !passed {
        o.code = report::VERIFY_FAILED;
    }
    Ok(o)
}

fn cmd_qec(cfg: &RunConfig, action: &QecAction) -> Run {
    let tol = &cfg.tolerances;
    let load = |code: &Path, noise: &Path| -> Result<_, Failure> {
        let c = io::code_from_json_str(&read(code)?, tol).map_err(|e| in_file(code, e))?;
        let n = io::kraus_from_json_str(&read(noise)?, tol).map_err(|e| in_file(noise, e))?;
        Ok((c, n))
    };
    match action {
        QecAction::Check { code, noise } => {
            let (c, n) = load(code, noise)?;
            let rep = qec::check_kl(&c, &n, tol)?;
            let mut o = Outcome::new("qec check", to_value(&rep));
            o.line(format!("satisfied: {}", rep.satisfied))
                .line(format!("max violation: {:.3e}", rep.max_violation))
                .line(format!("alpha: {}", fmt_matrix(&rep.alpha)));
            if !rep.satisfied {
                o.code = report::VERIFY_FAILED;
            }
            Ok(o)
        }
        QecAction::Recover { code, noise, out } => {
            let (c, n) = load(code, noise)?;
            let rep = qec::check_kl(&c, &n, tol)?;
            let plan = qec::build_recovery(&c, &n, &rep, tol)?;
            let recovery = io::map_to_json(&plan.recovery);
            if let Some(path) = out {
                write_json(path, &recovery)?;
            }
            let mut o = Outcome::new(
                "qec recover",
                json!({
                    "recovery": recovery,
                    "kraus": plan.kraus.iter().map(io::matrix_to_json).collect::<Vec<_>>(),
                    "diagonalized_alpha": plan.diagonalized_alpha,
                    "skipped_terms": plan.skipped_terms,
                    "signed_alpha_sum": plan.signed_alpha_sum,
                    "max_overlap": plan.max_overlap,
                }),
            );
            o.line(format!("recovery Kraus operators: {}", plan.kraus.len()))
                .line(format!("diagonalized alpha: {:?}", plan.diagonalized_alpha.iter().map(|a| sig12(*a)).collect::<Vec<_>>()))
                .line(format!("skipped terms: {:?}", plan.skipped_terms))
                .line(format!("Σ sign·α: {}", sig12(plan.signed_alpha_sum)));
            Ok(o)
        }
        QecAction::Verify { code, noise, recovery } => {
            let (c, n) = load(code, noise)?;
            let rec = match recovery {
                Some(path) => load_map(path)?,
                None => {
                    let rep = qec::check_kl(&c, &n, tol)?;
                    qec::build_recovery(&c, &n, &rep, tol)?.recovery
                }
            };
            let check = qec::verify_recovery(&rec, &n, &c, tol)?;
            let mut o = Outcome::new("qec verify", to_value(&check));
            o.line(format!("residual: {:.3e}", check.residual))
                .line(format!("recovery is CPTP: {}", check.recovery_is_cptp))
                .line(format!("Σ sign·α: {}", sig12(check.signed_alpha_sum)))
                .line(format!("verification: {}", if check.passed { "pass" } else { "FAIL" }));
            if !check.passed {
                o.code = report::VERIFY_FAILED;
            }
            Ok(o)
        }
    }
}

fn cmd_sample(cfg: &RunConfig, a: &SampleArgs) -> Run {
    let mut recipe = MapRecipe::new(&a.recipe, a.n, a.m.unwrap_or(a.n)).with_seed(cfg.seed);
    for (key, value) in [("lambda", a.lambda), ("p", a.p), ("k", a.k), ("eps", a.eps), ("q", a.q), ("d", a.d)] {
        if let Some(v) = value {
            recipe = recipe.with(key, v);
        }
    }
    let map = atlas::named_map(&recipe)?;
    let file = io::map_to_json(&map);
    if let Some(path) = &a.out {
        write_json(path, &file)?;
    }
    let mut o = Outcome::new("sample", json!({ "recipe": to_value(&recipe), "map": file }));
    if a.out.is_none() {
        // bare map file on stdout so it can be redirected straight into other commands
        o.human.push(serde_json::to_string_pretty(&file).expect("plain data"));
    } else {
        o.line(format!("wrote {} ({}→{})", a.recipe, map.dim_in(), map.dim_out()));
    }
    Ok(o)
}

fn cmd_dilate(cfg: &RunConfig, path: &Path, out: &Option<PathBuf>) -> Run {
    let tol = &cfg.tolerances;
    let rep = io::kraus_from_json_str(&read(path)?, tol).map_err(|e| in_file(path, e))?;
    let dil = dilate::stinespring(&rep, tol)?;
    let residual = dil.channel().distance(&rep.to_map());
    let unitarity = unitarity_defect(&dil.unitary);
    let passed = residual <= tol.eq_tol && unitarity <= tol.eq_tol;
    let result = json!({
        "unitary": io::matrix_to_json(&dil.unitary),
        "env_dim": dil.env_dim,
        "env_state": io::matrix_to_json(&dil.env_state),
        "unitarity_defect": unitarity,
        "dilation_residual": residual,
        "passed": passed,
    });
    if let Some(p) = out {
        write_json(p, &result)?;
    }
    let mut o = Outcome::new("dilate", result);
    o.line(format!("environment dimension: {}", dil.env_dim))
        .line(format!("unitarity defect: {unitarity:.3e}"))
        .line(format!("dilation residual: {residual:.3e}"));
    if out.is_none() {
        o.line(format!("U = {}", fmt_matrix(&dil.unitary)));
    }
    if !passed {
        o.code = report::VERIFY_FAILED;
    }
    Ok(o)
}

fn cmd_simulate(cfg: &RunConfig, path: &Path, rho: &Option<PathBuf>) -> Run {
    let tol = &cfg.tolerances;
    let psi = load_map(path)?;
    let d = decompose::sp_decompose(&psi, None, &cfg.classify_config())?;
    let circuit = dilate::realize_sp_map(&d, tol)?;
    let state = match rho {
        Some(p) => load_matrix(p)?,
        None => atlas::random_density(psi.dim_in(), cfg.seed),
    };
    let run = dilate::simulate_context_circuit(&circuit, &state)?;
    let residual = max_abs_diff(&run.rho_s2, &psi.apply(&run.rho_s1)?);
    let joint = dilate::joint_state_defect(&run);
    let passed = residual <= tol.eq_tol;
    let mut o = Outcome::new(
        "simulate",
        json!({
            "lambda": d.lambda,
            "env_dim": circuit.u_c.env_dim,
            "rho_s": io::matrix_to_json(&state),
            "rho_s1": io::matrix_to_json(&run.rho_s1),
            "rho_s2": io::matrix_to_json(&run.rho_s2),
            "residual": residual,
            "joint_state_defect": joint,
            "passed": passed,
        }),
    );
    o.line(format!("environment dimension: {}", circuit.u_c.env_dim))
        .line(format!("ρ_S: {}", fmt_matrix(&state)))
        .line(format!("ρ_S′ = Φ(ρ_S): {}", fmt_matrix(&run.rho_s1)))
        .line(format!("ρ_S″: {}", fmt_matrix(&run.rho_s2)))
        .line(format!("|ρ_S″ − Ψ(ρ_S′)|: {residual:.3e}"));
    if !passed {
        o.code = report::VERIFY_FAILED;
    }
    Ok(o)
}

fn dispatch(cfg: &RunConfig, command: &Command) -> Run {
    match command {
        Command::Classify { map } => cmd_classify(cfg, map),
        Command::Decompose { kind } => cmd_decompose(cfg, kind),
        Command::Demo { which: Demo::Transpose { lambda, inputs, samples } } => {
            cmd_demo_transpose(cfg, *lambda, *inputs, *samples)
        }
        Command::Qec { action } => cmd_qec(cfg, action),
        Command::Sample(args) => cmd_sample(cfg, args),
        Command::Dilate { map, out } => cmd_dilate(cfg, map, out),
        Command::Simulate { map, rho } => cmd_simulate(cfg, map, rho),
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classify { .. } => "classify",
        Command::Decompose { kind: DecomposeKind::Sp { .. } } => "decompose sp",
        Command::Decompose { kind: DecomposeKind::Sn { .. } } => "decompose sn",
        Command::Decompose { kind: DecomposeKind::Convex { .. } } => "decompose convex",
        Command::Demo { .. } => "demo transpose",
        Command::Qec { action: QecAction::Check { .. } } => "qec check",
        Command::Qec { action: QecAction::Recover { .. } } => "qec recover",
        Command::Qec { action: QecAction::Verify { .. } } => "qec verify",
        Command::Sample(_) => "sample",
        Command::Dilate { .. } => "dilate",
        Command::Simulate { .. } => "simulate",
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("HPTP_KIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let g = &cli.global;
    let tolerances = match Tolerances::new(g.tol, g.tol, g.sdp_tol) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(report::PARSE);
        }
    };
    let cfg = RunConfig {
        tolerances,
        seed: g.seed,
        output: g.output,
        sdp: SdpSettings { restarts: g.sdp_restarts.max(1), max_iters: g.sdp_max_iters.max(1) },
    };
    let name = command_name(&cli.command);
    let (code, json, human, failed) = match dispatch(&cfg, &cli.command) {
        Ok(o) => {
            debug_assert_eq!(o.name, name);
            (o.code, envelope(o.name, &cfg, o.result, o.code), o.human, false)
        }
        Err(f) => (
            f.code,
            envelope(name, &cfg, json!({ "error": f.message }), f.code),
            vec![format!("error: {}", f.message)],
            true,
        ),
    };
    match cfg.output {
        Output::Json => println!("{}", serde_json::to_string_pretty(&json).expect("plain data")),
        Output::Human if failed => human.iter().for_each(|l| eprintln!("{l}")),
        Output::Human => human.iter().for_each(|l| println!("{l}")),
    }
    ExitCode::from(code)
}
