//! Run configuration, JSON envelopes and exit codes.

use hptp_core::classify::ClassifyConfig;
use hptp_core::sdp::SdpSettings;
use hptp_core::{Error, Tolerances};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Human,
    Json,
}

/// Everything that influences a run; echoed into every JSON output.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub seed: u64,
    pub output: Output,
    pub sdp: SdpSettings,
}

impl RunConfig {
    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            tol: self.tolerances,
            sdp: self.sdp,
            seed: self.seed,
            ..ClassifyConfig::default()
        }
    }
}

pub const OK: u8 = 0;
pub const PARSE: u8 = 2;
pub const NOT_HPTP: u8 = 3;
pub const WRONG_CLASS: u8 = 4;
pub const VERIFY_FAILED: u8 = 5;

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_)
            | Error::UnknownRecipe(_)
            | Error::ParameterOutOfRange(_)
            | Error::InvalidTolerance { .. }
            | Error::DimensionMismatch(_)
            | Error::InvalidCode(_) => PARSE,
            Error::NonHptpInput(_)
            | Error::NonHermitianInput { .. }
            | Error::NonHermitianChoi { .. }
            | Error::UnnormalizedNoise { .. } => NOT_HPTP,
            Error::NotSp { .. }
            | Error::NotSn { .. }
            | Error::NotCptp(_)
            | Error::InvalidAnchor(_)
            | Error::UnsupportedForm(_)
            | Error::SingularMap { .. } => WRONG_CLASS,
            Error::KlViolated { .. }
            | Error::SignSectorObstruction { .. }
            | Error::VerificationFailed(_)
            | Error::DichotomyViolation(_) => VERIFY_FAILED,
            _ => 1,
        };
        Failure::new(code, e.to_string())
    }
}

/// Rounds every float to 12 significant digits so reruns print identically.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            if let Some(r) = serde_json::Number::from_f64(sig12(x)) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn envelope(command: &str, cfg: &RunConfig, result: Value, code: u8) -> Value {
    let mut v = json!({
        "command": command,
        "config": cfg,
        "exit_code": code,
        "result": result,
    });
    round_floats(&mut v);
    v
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("plain data")
}
