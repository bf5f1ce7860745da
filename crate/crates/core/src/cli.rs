//! Command-line driver: run configuration, subcommands and report files.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dashu_int::IBig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{self, classify, companion, eigensystem, AlgebraError, Classification, NumberProfile, Poly};
use crate::bernoulli::{
    self, biased_gamma_cap, decay_csv, eta_search, fourier, pisot_nondecay, salem_logstar_decay, BernoulliError,
    BernoulliSpec, DecayPoint, EtaConfig,
};
use crate::ekspansion::{
    bad_set_predicates, ek_expand, fit_logstar_envelope, logstar, psi, psi_power_sides, r0_tower, rate_h_tower, scales,
    EkError, RateParams,
};
use crate::hp::{self, Precision, PrecisionError, Real};
use crate::lattice::{build_lattice, LatticeError, LatticePair};
use crate::matrix::IntMatrix;
use crate::spectral::{spectral_sweep, CombinedConstants, CylFunction, SpectralError, SuspensionSpec, SweepConfig};
use crate::subst::{
    build_matrix, enumerate_return_words, find_good_power, is_primitive, parse_substitution, ReturnWordOptions,
    SubstError, Substitution,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_PRECISION: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Truncation tolerance for Fourier products.
    pub fourier: f64,
    /// Slack allowed when comparing fitted exponents with their caps.
    pub fit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { fourier: 1e-12, fit: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// Longest word any expansion may build.
    pub word_length: usize,
    pub trace_steps: usize,
    /// Node cap for lattice enumeration and η-search.
    pub enumeration: u64,
    /// Length cap for return words.
    pub return_word_length: usize,
    pub max_power: u32,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            word_length: 10_000_000,
            trace_steps: 100_000,
            enumeration: 20_000_000,
            return_word_length: 12,
            max_power: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    pub lambda: f64,
    pub c1: f64,
    pub c5: f64,
    pub beta: f64,
    pub gamma: f64,
    pub upsilon: f64,
    pub k0: u32,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { lambda: 0.5, c1: 1.0, c5: 1.0, beta: 1.0, gamma: 8.0, upsilon: 2.0, k0: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub precision: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub budgets: Budgets,
    pub constants: Constants,
    /// Output directory; not part of the hash.
    pub out: Option<String>,
    /// Worker threads; not part of the hash since outputs do not depend on it.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision: 256,
            seed: 0,
            tolerances: Tolerances::default(),
            budgets: Budgets::default(),
            constants: Constants::default(),
            out: None,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::validation("config", format!("cannot parse config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::validation("config", m));
        if self.precision < hp::MIN_BITS {
            return bad(format!("precision {} is below {}", self.precision, hp::MIN_BITS));
        }
        let b = &self.budgets;
        if b.word_length == 0
            || b.trace_steps == 0
            || b.enumeration == 0
            || b.return_word_length == 0
            || b.max_power == 0
        {
            return bad("all budgets must be positive".into());
        }
        let c = &self.constants;
        if !(0.0..1.0).contains(&c.lambda) {
            return bad(format!("lambda = {} is not in [0,1)", c.lambda));
        }
        for (name, v) in [("c1", c.c1), ("c5", c.c5), ("beta", c.beta), ("gamma", c.gamma), ("upsilon", c.upsilon)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        let t = &self.tolerances;
        if !(t.fourier > 0.0 && t.fourier < 1.0) || !(t.fit >= 0.0 && t.fit.is_finite()) {
            return bad("tolerances out of range".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON with the output directory and worker count cleared.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        c.workers = None;
        let text = serde_json::to_string(&c).expect("serializable");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn prec(&self) -> Result<Precision, CliError> {
        Ok(Precision::new(self.precision)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(exit_code: i32, kind: &str, message: impl Into<String>) -> Self {
        CliError { exit_code, kind: kind.into(), message: message.into() }
    }

    pub fn validation(kind: &str, message: impl Into<String>) -> Self {
        Self::new(EXIT_VALIDATION, kind, message)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&serde_json::json!({ "error": self })).expect("serializable")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<PrecisionError> for CliError {
    fn from(e: PrecisionError) -> Self {
        match e {
            PrecisionError::TooLow(_) => CliError::validation("precision", e.to_string()),
            _ => CliError::new(EXIT_PRECISION, "precision", e.to_string()),
        }
    }
}

impl From<SubstError> for CliError {
    fn from(e: SubstError) -> Self {
        let kind = match e {
            SubstError::Syntax { .. } => "syntax",
            SubstError::Alphabet(_) => "alphabet",
            SubstError::Size { .. } | SubstError::Cap { .. } => {
                return CliError::new(EXIT_BUDGET, "budget", e.to_string())
            }
            SubstError::Convergence(_) => return CliError::new(EXIT_INTERNAL, "convergence", e.to_string()),
            SubstError::NotPrimitive => "not_primitive",
        };
        CliError::validation(kind, e.to_string())
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        match e {
            AlgebraError::Precision(p) => p.into(),
            AlgebraError::Overflow => CliError::new(EXIT_BUDGET, "overflow", e.to_string()),
            AlgebraError::RootIsolation(_) => CliError::new(EXIT_PRECISION, "root_isolation", e.to_string()),
            _ => CliError::validation("algebra", e.to_string()),
        }
    }
}

impl From<LatticeError> for CliError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::EnumerationBudget { .. } => CliError::new(EXIT_BUDGET, "budget", e.to_string()),
            _ => CliError::validation("lattice", e.to_string()),
        }
    }
}

impl From<EkError> for CliError {
    fn from(e: EkError) -> Self {
        match e {
            EkError::Precision(p) => p.into(),
            EkError::Budget { .. } => CliError::new(EXIT_BUDGET, "budget", e.to_string()),
            EkError::TraceTooShort { .. } => CliError::new(EXIT_BUDGET, "trace_too_short", e.to_string()),
            EkError::Certification { .. } => CliError::new(EXIT_INTERNAL, "certification", e.to_string()),
            _ => CliError::validation("ekspansion", e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::Subst(x) => x.into(),
            SpectralError::Precision(x) => x.into(),
            SpectralError::Ek(x) => x.into(),
            SpectralError::Algebra(x) => x.into(),
            SpectralError::Lattice(x) => x.into(),
            SpectralError::Budget { .. } => CliError::new(EXIT_BUDGET, "budget", e.to_string()),
            _ => CliError::validation("spectral", e.to_string()),
        }
    }
}

impl From<BernoulliError> for CliError {
    fn from(e: BernoulliError) -> Self {
        match e {
            BernoulliError::Precision(x) => x.into(),
            BernoulliError::Algebra(x) => x.into(),
            BernoulliError::Ek(x) => x.into(),
            BernoulliError::SearchBudget { .. } => CliError::new(EXIT_BUDGET, "search_budget", e.to_string()),
            BernoulliError::VerificationFailure { .. } => {
                CliError::new(EXIT_INTERNAL, "verification_failure", e.to_string())
            }
            BernoulliError::Classification(_) => CliError::validation("classification", e.to_string()),
            _ => CliError::validation("bernoulli", e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(EXIT_INTERNAL, "io", e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "salem-lab", version, about = "Substitution flows, digit expansions and Salem Bernoulli convolutions")]
pub struct Cli {
    /// Working precision in bits.
    #[arg(long, global = true)]
    pub precision: Option<usize>,
    /// Seed for sampled orbit starts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Matrix, primitivity, classification, return words and lattice constants.
    Analyze(AnalyzeArgs),
    /// Vector digit expansion trace and bad-set predicates.
    Ek(EkArgs),
    /// Twisted-sum sweep with Hof, product and combined bounds.
    Spectrum(SpectrumArgs),
    /// Fourier transform of a Bernoulli convolution on a grid.
    Bernoulli(BernoulliArgs),
    /// Search for η with small ‖ηA^n s‖ on the torus.
    Eta(EtaArgs),
    /// Table of Ψ, the Ψ^Ψ comparison, R_0 and h_β.
    Rates(RatesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SMode {
    SelfSimilar,
    Unit,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Substitution file with lines like `1 -> 1,2`.
    pub file: PathBuf,
}

#[derive(Debug, Args)]
pub struct EkArgs {
    #[arg(long, conflicts_with = "poly")]
    pub subst: Option<PathBuf>,
    /// Monic polynomial as coefficients from the constant term up, e.g. 1,-1,-1,-1,1.
    #[arg(long, allow_hyphen_values = true)]
    pub poly: Option<String>,
    /// ω as a decimal, a fraction p/q, or pi.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub omega: String,
    #[arg(long, value_enum, default_value = "self-similar")]
    pub s_mode: SMode,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Scales k for the predicates; every feasible k when omitted.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub subst: PathBuf,
    #[arg(long, value_enum, default_value = "self-similar")]
    pub s_mode: SMode,
    /// Level-0 function values per letter, centered before use.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,0.25,0.5,1")]
    pub omegas: Vec<f64>,
    /// Radii given through x = log_α(1/2r).
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    pub radii_x: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct BernoulliArgs {
    #[arg(long, conflicts_with = "poly")]
    pub lambda: Option<f64>,
    /// λ = 1/α for the dominant root of this polynomial.
    #[arg(long, allow_hyphen_values = true)]
    pub poly: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 1.0)]
    pub xi_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub xi_max: f64,
    /// Number of geometric grid points.
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    /// Use ξ = α^N for N = 0..=this instead of the geometric grid (needs --poly).
    #[arg(long)]
    pub alpha_powers: Option<u32>,
    /// Orbit length for the Pisot experiment.
    #[arg(long, default_value_t = 40)]
    pub pisot_n: u32,
}

#[derive(Debug, Args)]
pub struct EtaArgs {
    #[arg(long, allow_hyphen_values = true, default_value = "1,-1,-1,-1,1", conflicts_with = "subst")]
    pub poly: String,
    /// Use S^T of this substitution instead of the companion matrix.
    #[arg(long)]
    pub subst: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 500)]
    pub n_ver: usize,
    #[arg(long, value_enum, default_value = "self-similar")]
    pub s_mode: SMode,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,17,256,65536")]
    pub b: Vec<u64>,
    /// Overrides constants.gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Overrides constants.beta.
    #[arg(long)]
    pub beta: Option<f64>,
}

/// Parses ω: `pi`, `p/q` or a decimal with optional exponent, rounded to `bits`.
pub fn parse_real(text: &str, bits: usize) -> Result<Real, CliError> {
    let t = text.trim();
    let bad = || CliError::validation("number", format!("cannot parse `{t}`"));
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let v = if body == "pi" {
        hp::pi(bits)
    } else if let Some((a, b)) = body.split_once('/') {
        let num: IBig = a.trim().parse().map_err(|_| bad())?;
        let den: IBig = b.trim().parse().map_err(|_| bad())?;
        if den == IBig::ZERO {
            return Err(bad());
        }
        hp::big(bits, &num) / hp::big(bits, &den)
    } else {
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(i) => (&body[..i], body[i + 1..].parse::<i64>().map_err(|_| bad())?),
            None => (body, 0),
        };
        let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
        if int_part.is_empty() && frac_part.is_empty()
            || !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        let digits: IBig = format!("{int_part}{frac_part}").parse().map_err(|_| bad())?;
        let e10 = exp - frac_part.len() as i64;
        if e10.abs() > 10_000 {
            return Err(bad());
        }
        let wp = bits + 64;
        let ten = IBig::from(10u8).pow(e10.unsigned_abs() as usize);
        let x = if e10 >= 0 { hp::big(wp, &(digits * ten)) } else { hp::big(wp, &digits) / hp::big(wp, &ten) };
        x.with_precision(bits).value()
    };
    Ok(if neg { -v } else { v })
}

fn read_subst(path: &Path) -> Result<Substitution, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation("io", format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_substitution(&text)?)
}

fn parse_poly_arg(text: &str) -> Result<Poly, CliError> {
    Ok(algebra::parse_poly(text)?)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    result: T,
}

fn envelope<T: Serialize>(command: &str, cfg: &RunConfig, result: T) -> String {
    let mut shown = cfg.clone();
    shown.out = None;
    shown.workers = None;
    to_json(&Envelope { command, config_hash: cfg.hash(), config: &shown, result })
}

fn roots_f64(profile: &NumberProfile) -> Vec<[f64; 2]> {
    profile.roots_f64().into_iter().map(|(a, b)| [a, b]).collect()
}

#[derive(Serialize)]
struct ProfileOut {
    charpoly: Poly,
    classification: Classification,
    degree: usize,
    height: i64,
    alpha: Option<String>,
    roots: Vec<[f64; 2]>,
}

fn profile_out(p: &NumberProfile) -> ProfileOut {
    ProfileOut {
        charpoly: p.charpoly.clone(),
        classification: p.classification,
        degree: p.degree,
        height: p.height,
        alpha: (!p.roots.is_empty()).then(|| hp::to_decimal(p.alpha(), 64)),
        roots: roots_f64(p),
    }
}

#[derive(Serialize)]
struct ReturnWordOut {
    letter: usize,
    word: Vec<usize>,
    population: Vec<i64>,
    good: bool,
    irreducible: bool,
}

#[derive(Serialize)]
struct LatticeOut {
    gamma_basis_columns: Vec<Vec<i64>>,
    dual_basis_numerators: Vec<Vec<String>>,
    dual_denominator: String,
    a_l: String,
    b_l: String,
    c_al: String,
}

fn lattice_out(l: &LatticePair) -> LatticeOut {
    let r = |x: &crate::lattice::Rational| format!("{}/{}", x.num, x.den);
    LatticeOut {
        gamma_basis_columns: (0..l.gamma.cols()).map(|j| l.gamma.col(j)).collect(),
        dual_basis_numerators: l.dual_num.clone(),
        dual_denominator: l.dual_den.clone(),
        a_l: r(&l.a_l),
        b_l: r(&l.b_l),
        c_al: r(&l.c_al),
    }
}

#[derive(Serialize)]
struct AnalyzeOut {
    substitution: Vec<Vec<usize>>,
    matrix: Vec<Vec<i64>>,
    primitive: bool,
    primitivity_exponent: Option<usize>,
    profile: ProfileOut,
    good_power: Option<u32>,
    return_words: Vec<ReturnWordOut>,
    lattice: Option<LatticeOut>,
    warnings: Vec<String>,
}

struct SubstLattice {
    power: Option<u32>,
    lattice: Option<LatticePair>,
    warnings: Vec<String>,
    words: Vec<ReturnWordOut>,
}

/// Return-word lattice for ζ with A = S^T; a missing lattice comes with a warning.
fn substitution_lattice(z: &Substitution, cfg: &RunConfig) -> Result<SubstLattice, CliError> {
    let b = &cfg.budgets;
    let opts = ReturnWordOptions { classical: false, budget: b.word_length };
    let a = build_matrix(z).transpose();
    let mut warnings = Vec::new();
    let good = find_good_power(z, b.return_word_length, b.max_power, opts)?;
    let (power, rws) = match good {
        Some(g) => (Some(g.power), g.return_words),
        None => {
            warnings.push(format!(
                "no power up to {} makes every elementary return word good within length {}",
                b.max_power, b.return_word_length
            ));
            (None, enumerate_return_words(z, b.return_word_length, opts)?)
        }
    };
    let words = rws
        .all()
        .map(|r| ReturnWordOut {
            letter: r.letter + 1,
            word: r.one_based(),
            population: r.population.clone(),
            good: r.good,
            irreducible: r.irreducible,
        })
        .collect();
    let lattice = match build_lattice(&rws, &a) {
        Ok(l) => Some(l),
        Err(e) => {
            warnings.push(format!("lattice: {e}"));
            None
        }
    };
    Ok(SubstLattice { power, lattice, warnings, words })
}

pub fn cmd_analyze(args: &AnalyzeArgs, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let z = read_subst(&args.file)?;
    let m = build_matrix(&z);
    let prim = is_primitive(&m);
    let cp = algebra::charpoly(&m)?;
    let profile = classify(&cp, cfg.prec()?)?;
    let mut warnings = Vec::new();
    if profile.classification == Classification::Reducible {
        warnings.push(format!("characteristic polynomial {} is reducible", algebra::poly_to_string(&cp)));
    }
    let sl = if prim.primitive {
        substitution_lattice(&z, cfg)?
    } else {
        warnings.push("substitution is not primitive; return words skipped".into());
        SubstLattice { power: None, lattice: None, warnings: Vec::new(), words: Vec::new() }
    };
    warnings.extend(sl.warnings);
    let res = AnalyzeOut {
        substitution: z.images_one_based(),
        matrix: m.to_rows(),
        primitive: prim.primitive,
        primitivity_exponent: prim.exponent,
        profile: profile_out(&profile),
        good_power: sl.power,
        return_words: sl.words,
        lattice: sl.lattice.as_ref().map(lattice_out),
        warnings,
    };
    Ok(vec![write_file(out, "analyze.json", &envelope("analyze", cfg, res))?])
}

#[derive(Serialize)]
struct EkOut {
    source: String,
    omega: String,
    s_mode: SMode,
    s: Vec<f64>,
    steps: usize,
    precision: usize,
    profile: ProfileOut,
    lattice: LatticeOut,
    checks: crate::ekspansion::TraceChecks,
    b: u64,
    predicates: Vec<crate::ekspansion::BadSet>,
    distinct_digits: usize,
    warnings: Vec<String>,
}

pub fn cmd_ek(args: &EkArgs, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    if args.steps > cfg.budgets.trace_steps {
        return Err(CliError::new(
            EXIT_BUDGET,
            "budget",
            format!("{} steps exceed the trace budget of {}", args.steps, cfg.budgets.trace_steps),
        ));
    }
    let mut warnings = Vec::new();
    let (poly, a, lattice, source) = match (&args.subst, &args.poly) {
        (Some(path), _) => {
            let z = read_subst(path)?;
            let a = build_matrix(&z).transpose();
            let cp = algebra::charpoly(&a)?;
            let sl = substitution_lattice(&z, cfg)?;
            warnings.extend(sl.warnings);
            let lat = match sl.lattice {
                Some(l) => l,
                None => {
                    warnings.push("falling back to L = Z^d".into());
                    LatticePair::integer(a.rows(), &a)?
                }
            };
            (cp, a, lat, path.display().to_string())
        }
        (None, Some(p)) => {
            let cp = parse_poly_arg(p)?;
            let a = companion(&cp);
            let lat = LatticePair::integer(a.rows(), &a)?;
            (cp.clone(), a, lat, format!("companion of {}", algebra::poly_to_string(&cp)))
        }
        (None, None) => return Err(CliError::validation("arguments", "one of --subst or --poly is required")),
    };
    let probe = classify(&poly, Precision::new(hp::MIN_BITS)?)?;
    if probe.roots.is_empty() {
        return Err(CliError::validation("algebra", "characteristic polynomial is reducible"));
    }
    let bits = Precision::required_for(args.steps, probe.log2_alpha(), hp::DEFAULT_GUARD).max(cfg.precision);
    let prec = Precision::new(bits)?;
    let profile = classify(&poly, prec)?;
    let eig = eigensystem(&a, &profile)?;
    let s: Vec<Real> = match args.s_mode {
        SMode::SelfSimilar => eig.e[0].iter().map(|z| z.re.clone()).collect(),
        SMode::Unit => vec![hp::int(bits, 1); a.rows()],
    };
    let omega = parse_real(&args.omega, bits)?;
    let trace = ek_expand(&omega, &s, &lattice, &eig, args.steps)?;

    let b = RateParams::b_of_omega(hp::to_f64(&omega));
    let b_real = hp::int(bits, b as i64);
    let ks: Vec<u32> = if args.k.is_empty() {
        (1..=10u32).take_while(|&k| scales(k).map(|n| n < IBig::from(trace.len())).unwrap_or(false)).collect()
    } else {
        args.k.clone()
    };
    let predicates = ks.iter().map(|&k| bad_set_predicates(&trace, k, &b_real)).collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::from("n,eps_inf,eps3_abs,z_nonzero,z_index\n");
    for st in &trace.steps {
        let e3 = st.eps3_abs.as_ref().map(|x| hp::to_decimal(x, 64)).unwrap_or_default();
        let zi = st.z_index.map(|i| i.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{},{}\n", st.n, hp::to_decimal(&st.eps_inf, 64), e3, !st.z_is_zero(), zi));
    }
    let res = EkOut {
        source,
        omega: args.omega.clone(),
        s_mode: args.s_mode,
        s: s.iter().map(hp::to_f64).collect(),
        steps: args.steps,
        precision: bits,
        profile: profile_out(&profile),
        lattice: lattice_out(&lattice),
        checks: trace.checks.clone(),
        b,
        predicates,
        distinct_digits: trace.f_observed.len(),
        warnings,
    };
    Ok(vec![write_file(out, "ek_trace.csv", &csv)?, write_file(out, "ek.json", &envelope("ek", cfg, res))?])
}

pub fn cmd_spectrum(args: &SpectrumArgs, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let z = read_subst(&args.subst)?;
    let prec = cfg.prec()?;
    let spec = match args.s_mode {
        SMode::SelfSimilar => SuspensionSpec::self_similar(&z, prec)?,
        SMode::Unit => SuspensionSpec::unit(&z, prec)?,
    };
    let a = spec.a();
    let lattice = match substitution_lattice(&z, cfg)?.lattice {
        Some(l) => l,
        None => LatticePair::integer(a.rows(), &a)?,
    };
    let values = if args.f.is_empty() {
        let mut v = vec![0.0; z.d()];
        v[0] = 1.0;
        v
    } else {
        args.f.clone()
    };
    let f = CylFunction::level0_f64(&spec, &values)?.centered(&spec);
    let c = &cfg.constants;
    let sweep = SweepConfig {
        omegas: args.omegas.clone(),
        radii_x: args.radii_x.clone(),
        samples: args.samples,
        seed: cfg.seed,
        consts: CombinedConstants { lambda: c.lambda, c1: c.c1, c5: c.c5, ..CombinedConstants::default() },
        params: RateParams {
            beta: c.beta,
            gamma: c.gamma,
            upsilon: c.upsilon,
            k0: c.k0,
            b: 16,
            alpha: spec.alpha_f64(),
        },
    };
    let report = spectral_sweep(&spec, &lattice, &f, &sweep)?;
    Ok(vec![
        write_file(out, "spectrum.csv", &report.to_csv())?,
        write_file(out, "spectrum.json", &envelope("spectrum", cfg, &report))?,
    ])
}

#[derive(Serialize)]
struct BernoulliOut {
    lambda: f64,
    p: f64,
    tol: f64,
    profile: Option<ProfileOut>,
    logstar_base: f64,
    fit: crate::ekspansion::LogstarFit,
    all_under_envelope: bool,
    chain_ok: Option<bool>,
    gamma_cap: Option<f64>,
    beta_cap: f64,
    pisot: Option<bernoulli::PisotReport>,
    points: usize,
}

pub fn cmd_bernoulli(args: &BernoulliArgs, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let prec = cfg.prec()?;
    let bits = prec.bits();
    let tol = cfg.tolerances.fourier;
    let profile = match &args.poly {
        Some(p) => Some(classify(&parse_poly_arg(p)?, prec)?),
        None => None,
    };
    let spec = match (&profile, args.lambda) {
        (Some(pr), _) => BernoulliSpec::from_profile(pr, args.p)?,
        (None, Some(l)) => BernoulliSpec::from_f64(l, args.p, prec)?,
        (None, None) => return Err(CliError::validation("arguments", "one of --lambda or --poly is required")),
    };
    let grid: Vec<Real> = match (args.alpha_powers, &profile) {
        (Some(n), Some(pr)) => bernoulli::alpha_power_grid(pr, n),
        (Some(_), None) => return Err(CliError::validation("arguments", "--alpha-powers needs --poly")),
        (None, _) => {
            if !(args.xi_min > 0.0 && args.xi_max >= args.xi_min && args.count >= 1) {
                return Err(CliError::validation("arguments", "need 0 < xi-min <= xi-max and count >= 1"));
            }
            let ratio =
                if args.count > 1 { (args.xi_max / args.xi_min).powf(1.0 / (args.count - 1) as f64) } else { 1.0 };
            (0..args.count).map(|i| hp::from_f64(bits, args.xi_min * ratio.powi(i as i32))).collect()
        }
    };
    let base = 1.0 / spec.lambda_f64();
    let salem = profile.as_ref().is_some_and(|p| p.is_salem());
    let (points, fit, all_ok, chain_ok) = if salem {
        let r = salem_logstar_decay(profile.as_ref().unwrap(), args.p, &grid, tol)?;
        (r.points, r.fit, r.all_ok, Some(r.chain_ok))
    } else {
        let vals = grid.par_iter().map(|x| fourier(&spec, x, tol)).collect::<Result<Vec<_>, _>>()?;
        let mut pts = Vec::with_capacity(vals.len());
        for (x, v) in grid.iter().zip(&vals) {
            let xi = hp::to_f64(x);
            let ls = logstar(xi.abs().max(1.0), base)?;
            pts.push(DecayPoint {
                xi,
                abs_fourier: v.abs,
                certified_err: v.error,
                logstar_xi: ls,
                envelope_value: 0.0,
                chain_bound: v.chain_bound,
            });
        }
        let pairs: Vec<(u32, f64)> = pts.iter().map(|q| (q.logstar_xi, q.abs_fourier)).collect();
        let fit = fit_logstar_envelope(&pairs)?;
        let mut ok = true;
        for q in &mut pts {
            q.envelope_value = fit.bound(q.logstar_xi);
            ok &= q.abs_fourier - q.certified_err <= q.envelope_value * (1.0 + 1e-12);
        }
        (pts, fit, ok, None)
    };
    let pisot = match &profile {
        Some(pr) if pr.is_pisot() => Some(pisot_nondecay(pr, args.pisot_n, 1.0)?),
        _ => None,
    };
    let gamma_cap = match &profile {
        Some(pr) if pr.is_salem() && args.p < 0.5 => Some(biased_gamma_cap(pr, args.p)?),
        _ => None,
    };
    let res = BernoulliOut {
        lambda: spec.lambda_f64(),
        p: args.p,
        tol,
        profile: profile.as_ref().map(profile_out),
        logstar_base: base,
        fit,
        all_under_envelope: all_ok,
        chain_ok,
        gamma_cap,
        beta_cap: bernoulli::unbiased_beta_cap(),
        pisot,
        points: points.len(),
    };
    Ok(vec![
        write_file(out, "decay.csv", &decay_csv(&points))?,
        write_file(out, "bernoulli.json", &envelope("bernoulli", cfg, res))?,
    ])
}

pub fn cmd_eta(args: &EtaArgs, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let (poly, a): (Poly, IntMatrix) = match &args.subst {
        Some(path) => {
            let z = read_subst(path)?;
            let a = build_matrix(&z).transpose();
            (algebra::charpoly(&a)?, a)
        }
        None => {
            let p = parse_poly_arg(&args.poly)?;
            let a = companion(&p);
            (p, a)
        }
    };
    let profile = classify(&poly, cfg.prec()?)?;
    if !profile.is_salem() {
        return Err(CliError::validation(
            "classification",
            format!("η-search needs a Salem number, got {:?}", profile.classification),
        ));
    }
    let eig = eigensystem(&a, &profile)?;
    let s: Vec<Real> = match args.s_mode {
        SMode::SelfSimilar => eig.e[0].iter().map(|z| z.re.clone()).collect(),
        SMode::Unit => vec![hp::int(profile.precision.bits(), 1); a.rows()],
    };
    let ecfg =
        EtaConfig { epsilon: args.epsilon, n_ver: args.n_ver, budget: cfg.budgets.enumeration, ..EtaConfig::default() };
    let r = eta_search(&profile, &a, &s, &ecfg)?;
    Ok(vec![write_file(out, "eta.json", &envelope("eta", cfg, &r))?])
}

#[derive(Serialize)]
struct RateRow {
    b: u64,
    gamma: f64,
    beta: f64,
    psi_b: f64,
    psi_power_lhs: f64,
    psi_power_rhs: f64,
    psi_power_holds: bool,
    log2_log_alpha_r0: String,
    h_beta_at_r0: Option<f64>,
}

pub fn cmd_rates(args: &RatesArgs, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let gamma = args.gamma.unwrap_or(cfg.constants.gamma);
    let beta = args.beta.unwrap_or(cfg.constants.beta);
    if !(gamma > 0.0 && beta > 0.0) {
        return Err(CliError::validation("arguments", "gamma and beta must be positive"));
    }
    let mut rows = Vec::with_capacity(args.b.len());
    for &b in &args.b {
        if b < 16 {
            return Err(CliError::validation("arguments", format!("B = {b} is below 16")));
        }
        let (lhs, rhs) = psi_power_sides(b)?;
        let m = r0_tower(b, gamma)?;
        let tau: Option<f64> = m.to_string().parse::<f64>().ok();
        let h = tau.and_then(|t| rate_h_tower(t, beta).ok());
        rows.push(RateRow {
            b,
            gamma,
            beta,
            psi_b: psi(b as f64)?,
            psi_power_lhs: lhs,
            psi_power_rhs: rhs,
            psi_power_holds: lhs >= rhs,
            log2_log_alpha_r0: m.to_string(),
            h_beta_at_r0: h,
        });
    }
    let mut csv =
        String::from("B,gamma,beta,psi_B,psi_power_lhs,psi_power_rhs,psi_power_holds,log2_log_alpha_R0,h_beta_at_R0\n");
    for r in &rows {
        let h = r.h_beta_at_r0.map(|v| format!("{v:?}")).unwrap_or_default();
        csv.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{:?},{},{},{}\n",
            r.b, r.gamma, r.beta, r.psi_b, r.psi_power_lhs, r.psi_power_rhs, r.psi_power_holds, r.log2_log_alpha_r0, h
        ));
    }
    Ok(vec![write_file(out, "rates.csv", &csv)?, write_file(out, "rates.json", &envelope("rates", cfg, &rows))?])
}

/// Merges the config file and flags into the effective configuration.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::validation("config", format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = cli.precision {
        cfg.precision = p;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.display().to_string());
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let cfg = resolve_config(cli)?;
    let out = PathBuf::from(cfg.out.clone().unwrap_or_else(|| "out".into()));
    let go = || match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, &cfg, &out),
        Command::Ek(a) => cmd_ek(a, &cfg, &out),
        Command::Spectrum(a) => cmd_spectrum(a, &cfg, &out),
        Command::Bernoulli(a) => cmd_bernoulli(a, &cfg, &out),
        Command::Eta(a) => cmd_eta(a, &cfg, &out),
        Command::Rates(a) => cmd_rates(a, &cfg, &out),
    };
    match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::new(EXIT_INTERNAL, "workers", e.to_string()))?
            .install(go),
        None => go(),
    }
}

/// Parses arguments, runs, prints written paths or an error JSON, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            EXIT_OK
        }
        Err(e) => {
            println!("{}", e.to_json());
            eprintln!("error: {e}");
            e.exit_code
        }
    }
}
