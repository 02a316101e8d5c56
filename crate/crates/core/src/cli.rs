//! Command-line front end. Exit codes: 0 certified or all checks passed,
//! 1 analysis completed with a negative verdict, 2 input or numeric error.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::fockcheck::{run_suite, SuiteReport};
use crate::io::{format_float, load_model, load_uncertainty, Json};
use crate::linalg::{self, c, C64};
use crate::moments::{build_closed_loop, default_step, integrate_moments, steady_state_moments};
use crate::opa::{compare_paths, sweep, Agreement, OpaParams, SweepReport};
use crate::smallgain::{
    certify, compute_f, freq_response, CertificationReport, CertifyOptions, HinfOptions, Verdict,
    MU_CONSTANT,
};
use crate::uncertainty::{qsiqc_params, LinearUncertainty, QsiqcParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Parser)]
#[command(
    name = "qsgain",
    version,
    about = "Small-gain robust mean-square stability certificates for uncertain linear quantum systems"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Certify robust mean-square stability of a model file.
    Certify(CertifyArgs),
    /// Frequency response of the uncertainty channel as CSV.
    Freqresp(FreqrespArgs),
    /// Quadratic-constraint parameters (gamma, delta1, delta2) of an uncertainty.
    Uncertainty(UncertaintyArgs),
    /// Closed-loop second moments against the certified bound.
    Moments(MomentsArgs),
    /// Parametric amplifier: closed forms against the generic pipeline.
    Opa(OpaArgs),
    /// Truncated Fock-space checks of the operator identities.
    Fockcheck(FockcheckArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct GainArgs {
    /// Uncertainty file supplying gamma, delta1 and delta2.
    #[arg(long)]
    pub uncertainty: Option<PathBuf>,
    /// Gain bound (overrides the uncertainty file; `inf` for none).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub delta2: Option<f64>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CertifyArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub gain: GainArgs,
    /// Relative tolerance of the H-infinity bisection.
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, clap::Args)]
pub struct FreqrespArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    /// Lowest frequency as a multiple of the drift's spectral norm.
    #[arg(long, default_value_t = 1e-3)]
    pub lo: f64,
    /// Highest frequency as a multiple of the drift's spectral norm.
    #[arg(long, default_value_t = 1e3)]
    pub hi: f64,
}

#[derive(Debug, Clone, clap::Args)]
pub struct UncertaintyArgs {
    /// Uncertainty file.
    #[arg(long, conflicts_with_all = ["coupling", "kappa_b"])]
    pub file: Option<PathBuf>,
    /// Bilinear coupling `RE,IM`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, requires = "kappa_b")]
    pub coupling: Option<C64>,
    #[arg(long)]
    pub kappa_b: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub rel_tol: f64,
}

#[derive(Debug, Clone, clap::Args)]
pub struct MomentsArgs {
    pub model: PathBuf,
    /// Bilinear coupling `RE,IM`, one per uncertainty mode.
    #[arg(long = "coupling", value_parser = parse_complex, allow_hyphen_values = true, required = true)]
    pub coupling: Vec<C64>,
    /// Write the transient `t, ms_value` series here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Horizon of the transient; default `20/|spectral abscissa|`.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Step of the transient; default `0.01/|spectral abscissa|`, at most
    /// `0.5/spectral radius`.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct OpaArgs {
    #[arg(long, required_unless_present = "sweep")]
    pub chi: Option<f64>,
    #[arg(long, required_unless_present = "sweep")]
    pub kappa_a: Option<f64>,
    #[arg(long, required_unless_present = "sweep")]
    pub kappa_b: Option<f64>,
    /// Steady-state amplitude of the fundamental, `RE,IM`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, required_unless_present = "sweep")]
    pub abar: Option<C64>,
    /// Steady-state amplitude of the second harmonic, `RE,IM`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, required_unless_present = "sweep")]
    pub bbar: Option<C64>,
    /// Number of random parameter tuples instead of a single one.
    #[arg(long)]
    pub sweep: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Write one CSV row per sweep sample here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct FockcheckArgs {
    #[arg(long, default_value_t = 30)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

/// `RE,IM` or a bare real number.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    match parts.as_slice() {
        [re] => Ok(c(num(re)?, 0.0)),
        [re, im] => Ok(c(num(re)?, num(im)?)),
        _ => Err(format!("expected RE,IM, got `{s}`")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run(cfg: &RunConfig) -> Outcome {
    let result = match &cfg.command {
        Command::Certify(a) => run_certify(a),
        Command::Freqresp(a) => run_freqresp(a),
        Command::Uncertainty(a) => run_uncertainty(a),
        Command::Moments(a) => run_moments(a),
        Command::Opa(a) => run_opa(a),
        Command::Fockcheck(a) => run_fockcheck(a),
    };
    match result {
        Ok((code, stdout)) => Outcome {
            code,
            stdout,
            stderr: String::new(),
        },
        Err(e) => Outcome {
            code: EXIT_ERROR,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

/// Parses `args` (program name first) and runs; clap usage errors exit 2.
pub fn run_from_args<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunConfig::try_parse_from(args) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                Outcome {
                    code: EXIT_ERROR,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                }
            }
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: name.into(),
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}

fn certify_options(rel_tol: f64) -> Result<CertifyOptions> {
    check_positive("rel-tol", rel_tol)?;
    Ok(CertifyOptions {
        hinf: HinfOptions {
            rel_tol,
            ..HinfOptions::default()
        },
        ..CertifyOptions::default()
    })
}

fn verdict_code(v: Verdict) -> i32 {
    if v == Verdict::Certified {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    }
}

fn resolve_gain(gain: &GainArgs, rel_tol: f64) -> Result<(QsiqcParams, &'static str)> {
    let (mut q, mut source) = match &gain.uncertainty {
        Some(path) => (qsiqc_params(&load_uncertainty(path)?, rel_tol)?, "uncertainty file"),
        None => (
            QsiqcParams {
                gamma: f64::INFINITY,
                delta1: 0.0,
                delta2: 0.0,
            },
            "default (no gain constraint)",
        ),
    };
    if let Some(g) = gain.gamma {
        q.gamma = g;
        source = "flags";
    }
    if let Some(d) = gain.delta1 {
        q.delta1 = d;
        source = "flags";
    }
    if let Some(d) = gain.delta2 {
        q.delta2 = d;
        source = "flags";
    }
    Ok((q, source))
}

fn run_certify(a: &CertifyArgs) -> Result<(i32, String)> {
    let model = load_model(&a.model)?;
    let opts = certify_options(a.rel_tol)?;
    let (q, source) = resolve_gain(&a.gain, a.rel_tol)?;
    let report = certify(&model, q.gamma, q.delta1, q.delta2, &opts)?;
    let out = match a.format {
        Format::Json => {
            let mut doc = certification_json(&report);
            if let Json::Obj(fields) = &mut doc {
                fields.push(("gain_source".into(), Json::Str(source.into())));
            }
            doc.render()
        }
        Format::Text => certification_text(&report),
    };
    Ok((verdict_code(report.verdict), out))
}

/// Every report field, in a fixed order.
pub fn certification_json(r: &CertificationReport) -> Json {
    let p = r.p.as_ref();
    Json::obj([
        ("verdict", Json::Str(r.verdict.as_str().into())),
        ("hurwitz", Json::Bool(r.hurwitz.hurwitz)),
        ("spectral_abscissa", Json::Num(r.hurwitz.abscissa)),
        ("f_eigenvalues", Json::Arr(r.f_eigenvalues.iter().map(|z| Json::complex(*z)).collect())),
        ("hinf", Json::opt_num(r.hinf)),
        ("gamma", Json::Num(r.gamma)),
        ("margin", Json::opt_num(r.margin)),
        ("P", p.map_or(Json::Null, |p| Json::matrix(&p.p))),
        (
            "riccati",
            p.map_or(Json::Null, |p| {
                Json::obj([
                    ("epsilon", Json::Num(p.epsilon)),
                    ("residual", Json::Num(p.are_residual)),
                    ("hermitian_residual", Json::Num(p.hermitian_residual)),
                    ("structure_residual", Json::Num(p.structure_residual)),
                    ("min_eig", Json::Num(p.min_eig)),
                    ("qmi_max_eig", Json::Num(p.qmi_max_eig)),
                    ("unprojected_qmi_max_eig", Json::Num(p.unprojected_qmi_max_eig)),
                ])
            }),
        ),
        ("mu", r.mu.map_or(Json::Null, Json::complex)),
        ("mu_multiplier", Json::Num(MU_CONSTANT)),
        ("lambda_tilde", Json::opt_num(r.lambda_tilde)),
        ("ordering_offset", Json::opt_num(r.ordering_offset)),
        ("delta0", Json::opt_num(r.delta0)),
        ("delta1", Json::Num(r.delta1)),
        ("delta2", Json::Num(r.delta2)),
        ("c_bound", Json::opt_num(r.c_bound)),
        ("warnings", Json::Arr(r.warnings.iter().map(|w| Json::Str(w.clone())).collect())),
        (
            "notes",
            Json::Arr(vec![Json::Str(
                "mu = 2 * (-E Sigma J P^T J E^T), the double commutator [z,[z,V]]; \
                 the unit-multiplier untransposed form differs from it"
                    .into(),
            )]),
        ),
    ])
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.10e}"))
}

pub fn certification_text(r: &CertificationReport) -> String {
    let mut s = String::new();
    writeln!(s, "verdict            {}", r.verdict.as_str()).unwrap();
    writeln!(s, "hurwitz            {} (spectral abscissa {:.10e})", r.hurwitz.hurwitz, r.hurwitz.abscissa).unwrap();
    writeln!(s, "hinf               {}", fmt(r.hinf)).unwrap();
    writeln!(s, "gamma              {:.10e}", r.gamma).unwrap();
    writeln!(s, "margin gamma/2-H   {}", fmt(r.margin)).unwrap();
    if let Some(p) = &r.p {
        writeln!(s, "riccati epsilon    {:.3e} (residual {:.3e}, min eig P {:.3e})", p.epsilon, p.are_residual, p.min_eig).unwrap();
    }
    if let Some(mu) = r.mu {
        writeln!(s, "mu                 {:.10e} {:+.10e}i", mu.re + 0.0, mu.im + 0.0).unwrap();
    }
    writeln!(s, "lambda_tilde       {}", fmt(r.lambda_tilde)).unwrap();
    writeln!(s, "ordering offset    {}", fmt(r.ordering_offset)).unwrap();
    writeln!(s, "delta0             {}", fmt(r.delta0)).unwrap();
    writeln!(s, "delta1, delta2     {:.10e}, {:.10e}", r.delta1, r.delta2).unwrap();
    writeln!(s, "c bound            {}", fmt(r.c_bound)).unwrap();
    for w in &r.warnings {
        writeln!(s, "warning: {w}").unwrap();
    }
    s
}

fn csv_text<F>(header: &[&str], fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> std::result::Result<(), csv::Error>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io_err)?;
    fill(&mut w).map_err(io_err)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn num(x: f64) -> String {
    format_float(x).trim_matches('"').to_string()
}

fn run_freqresp(a: &FreqrespArgs) -> Result<(i32, String)> {
    let model = load_model(&a.model)?;
    check_positive("lo", a.lo)?;
    check_positive("hi", a.hi)?;
    if a.points < 2 || a.hi <= a.lo {
        return Err(Error::InvalidParameter {
            name: "grid".into(),
            reason: "need at least 2 points and hi > lo".into(),
        });
    }
    let plant = compute_f(&model);
    let scale = linalg::norm2(&plant.f);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let (lo, hi) = (a.lo * scale, a.hi * scale);
    let mut rows = Vec::with_capacity(a.points);
    for k in 0..a.points {
        let w = lo * (hi / lo).powf(k as f64 / (a.points - 1) as f64);
        rows.push((w, freq_response(&plant, w)?));
    }
    let out = csv_text(&["omega", "re", "im", "magnitude"], |wr| {
        for (w, h) in &rows {
            wr.write_record([num(*w), num(h.re), num(h.im), num(h.norm())])?;
        }
        Ok(())
    })?;
    Ok((EXIT_OK, out))
}

fn qsiqc_json(q: &QsiqcParams) -> Json {
    Json::obj([
        ("gamma", Json::Num(q.gamma)),
        ("delta1", Json::Num(q.delta1)),
        ("delta2", Json::Num(q.delta2)),
    ])
}

fn run_uncertainty(a: &UncertaintyArgs) -> Result<(i32, String)> {
    check_positive("rel-tol", a.rel_tol)?;
    let u = match (&a.file, a.coupling, a.kappa_b) {
        (Some(path), _, _) => load_uncertainty(path)?,
        (None, Some(g), Some(k)) => LinearUncertainty::from_bilinear_coupling(g, k)?,
        _ => {
            return Err(Error::InvalidParameter {
                name: "uncertainty".into(),
                reason: "give --file, or --coupling with --kappa-b".into(),
            })
        }
    };
    let q = qsiqc_params(&u, a.rel_tol)?;
    Ok((EXIT_OK, qsiqc_json(&q).render()))
}

fn run_moments(a: &MomentsArgs) -> Result<(i32, String)> {
    let model = load_model(&a.model)?;
    let sys = build_closed_loop(&model, &a.coupling)?;
    let u = LinearUncertainty::from_model_coupling(&model, &a.coupling)?;
    let q = qsiqc_params(&u, 1e-10)?;
    let report = certify(&model, q.gamma, q.delta1, q.delta2, &CertifyOptions::default())?;
    let abscissa = sys.spectral_abscissa()?;
    let certified = report.verdict == Verdict::Certified;

    let steady = match steady_state_moments(&sys) {
        Ok(st) => Some(st),
        Err(Error::MeanSquareUnstable { .. }) => None,
        Err(e) => return Err(e),
    };
    let ms_value = steady.as_ref().map(|s| s.ms_value);
    let satisfied = match (ms_value, report.c_bound) {
        (Some(ms), Some(cb)) => Some(ms <= cb),
        _ => None,
    };

    if let Some(path) = &a.csv {
        let dt = match a.dt {
            Some(dt) => dt,
            None => default_step(&sys)?,
        };
        let horizon = match a.horizon {
            Some(t) => t,
            None if abscissa != 0.0 => 20.0 / abscissa.abs(),
            None => 20.0,
        };
        let text = match integrate_moments(&sys, horizon, dt) {
            Ok(traj) => csv_text(&["t", "ms_value"], |wr| {
                for (t, v) in traj.times.iter().zip(&traj.ms_values) {
                    wr.write_record([num(*t), num(*v)])?;
                }
                Ok(())
            })?,
            Err(Error::Divergent { t }) => {
                return Err(Error::Divergent { t }.at("integrate_moments"));
            }
            Err(e) => return Err(e),
        };
        std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }

    let doc = Json::obj([
        ("ms_value", Json::opt_num(ms_value)),
        ("mean_square_stable", Json::Bool(steady.is_some())),
        ("closed_loop_abscissa", Json::Num(abscissa)),
        ("c_bound", Json::opt_num(report.c_bound)),
        ("satisfied", satisfied.map_or(Json::Null, Json::Bool)),
        ("verdict", Json::Str(report.verdict.as_str().into())),
        ("qsiqc", qsiqc_json(&q)),
    ]);
    let code = if certified && satisfied == Some(true) {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    };
    Ok((code, doc.render()))
}

fn params_json(p: &OpaParams) -> Json {
    Json::obj([
        ("chi", Json::Num(p.chi)),
        ("kappa_a", Json::Num(p.kappa_a)),
        ("kappa_b", Json::Num(p.kappa_b)),
        ("abar", Json::complex(p.abar)),
        ("bbar", Json::complex(p.bbar)),
    ])
}

fn agreement_json(a: &Agreement) -> Json {
    let cf = &a.closed;
    Json::obj([
        ("params", params_json(&a.params)),
        (
            "closed_form",
            Json::obj([
                ("f_eigs", Json::Arr(cf.f_eigs.iter().map(|v| Json::Num(*v)).collect())),
                ("hurwitz", Json::Bool(cf.hurwitz)),
                ("h0_mag", Json::opt_num(cf.h0_mag)),
                ("g_norm", Json::Num(cf.g_norm)),
                ("gamma", Json::Num(cf.gamma)),
                ("delta1", Json::Num(cf.delta1)),
                ("lhs", Json::Num(cf.lhs)),
                ("kappa_a_squared", Json::Num(a.params.kappa_a * a.params.kappa_a)),
                ("certified", Json::Bool(cf.certified)),
            ]),
        ),
        (
            "generic",
            Json::obj([
                ("verdict", Json::Str(a.report.verdict.as_str().into())),
                ("spectral_abscissa", Json::Num(a.report.hurwitz.abscissa)),
                ("hinf", Json::opt_num(a.report.hinf)),
                ("gamma", Json::Num(a.qsiqc.gamma)),
                ("delta1", Json::Num(a.qsiqc.delta1)),
                ("delta2", Json::Num(a.qsiqc.delta2)),
                ("c_bound", Json::opt_num(a.report.c_bound)),
            ]),
        ),
        ("verdict_match", Json::Bool(a.verdict_match)),
        ("in_boundary_band", Json::Bool(a.in_boundary_band)),
        ("hinf_rel_err", Json::opt_num(a.hinf_rel_err)),
        ("gamma_rel_err", Json::Num(a.gamma_rel_err)),
        ("delta1_rel_err", Json::Num(a.delta1_rel_err)),
        ("divergent", Json::Arr(a.divergent.iter().map(|d| Json::Str((*d).into())).collect())),
        ("agrees", Json::Bool(a.agrees())),
    ])
}

fn sweep_csv(report: &SweepReport) -> Result<String> {
    let header = [
        "index", "chi", "kappa_a", "kappa_b", "abar_re", "abar_im", "bbar_re", "bbar_im",
        "lhs", "closed_certified", "verdict", "hinf", "h0_mag", "gamma", "delta1", "c_bound",
        "in_boundary_band", "agrees", "error",
    ];
    csv_text(&header, |wr| {
        for row in &report.rows {
            let p = &row.params;
            let mut rec = vec![
                row.index.to_string(),
                num(p.chi),
                num(p.kappa_a),
                num(p.kappa_b),
                num(p.abar.re),
                num(p.abar.im),
                num(p.bbar.re),
                num(p.bbar.im),
            ];
            let opt = |x: Option<f64>| x.map_or(String::new(), num);
            match &row.outcome {
                Ok(a) => rec.extend([
                    num(a.closed.lhs),
                    a.closed.certified.to_string(),
                    a.report.verdict.as_str().to_string(),
                    opt(a.report.hinf),
                    opt(a.closed.h0_mag),
                    num(a.qsiqc.gamma),
                    num(a.qsiqc.delta1),
                    opt(a.report.c_bound),
                    a.in_boundary_band.to_string(),
                    a.agrees().to_string(),
                    String::new(),
                ]),
                Err(e) => {
                    rec.extend(std::iter::repeat_n(String::new(), 10));
                    rec.push(e.to_string());
                }
            }
            wr.write_record(&rec)?;
        }
        Ok(())
    })
}

fn run_opa(a: &OpaArgs) -> Result<(i32, String)> {
    check_positive("tol", a.tol)?;
    if let Some(n) = a.sweep {
        let report = sweep(n, a.seed, a.tol);
        if let Some(path) = &a.csv {
            std::fs::write(path, sweep_csv(&report)?)
                .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        }
        let errors: Vec<Json> = report
            .rows
            .iter()
            .filter_map(|r| match &r.outcome {
                Err(e) => Some(Json::obj([
                    ("index", Json::Int(r.index as i64)),
                    ("error", Json::Str(e.to_string())),
                ])),
                Ok(a) if !a.agrees() => Some(Json::obj([
                    ("index", Json::Int(r.index as i64)),
                    ("divergent", Json::Arr(a.divergent.iter().map(|d| Json::Str((*d).into())).collect())),
                ])),
                Ok(_) => None,
            })
            .collect();
        let disagreements = report.disagreements();
        let doc = Json::obj([
            ("samples", Json::Int(n as i64)),
            ("seed", Json::Int(a.seed as i64)),
            ("tol", Json::Num(a.tol)),
            ("certified", Json::Int(report.certified() as i64)),
            ("boundary_band", Json::Int(report.boundary_cases() as i64)),
            ("disagreements", Json::Int(disagreements as i64)),
            ("failures", Json::Arr(errors)),
        ]);
        let code = if disagreements == 0 { EXIT_OK } else { EXIT_NEGATIVE };
        return Ok((code, doc.render()));
    }
    let missing = |n: &str| Error::InvalidParameter {
        name: n.into(),
        reason: "required without --sweep".into(),
    };
    let p = OpaParams {
        chi: a.chi.ok_or_else(|| missing("chi"))?,
        kappa_a: a.kappa_a.ok_or_else(|| missing("kappa-a"))?,
        kappa_b: a.kappa_b.ok_or_else(|| missing("kappa-b"))?,
        abar: a.abar.ok_or_else(|| missing("abar"))?,
        bbar: a.bbar.ok_or_else(|| missing("bbar"))?,
    };
    let agreement = compare_paths(&p, a.tol, &CertifyOptions::default())?;
    if !agreement.agrees() {
        return Err(Error::CrossValidation(format!(
            "generic pipeline and closed forms disagree on {}",
            agreement.divergent.join(", ")
        )));
    }
    Ok((verdict_code(agreement.report.verdict), agreement_json(&agreement).render()))
}

pub fn suite_text(r: &SuiteReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "fock checks: N = {} (two-mode N = {}), seed {}, {} trials, mu multiplier {:.12}",
        r.levels, r.two_mode_levels, r.seed, r.trials, r.kappa_mu
    )
    .unwrap();
    writeln!(s, "{:<40} {:>6} {:>12} {:>10}  status", "identity", "cases", "worst", "tol").unwrap();
    for row in &r.rows {
        let status = match row.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "info",
        };
        writeln!(
            s,
            "{:<40} {:>6} {:>12.3e} {:>10.1e}  {status}",
            row.name, row.cases, row.worst, row.tolerance
        )
        .unwrap();
    }
    writeln!(s, "{}", if r.all_pass() { "all checks passed" } else { "some checks FAILED" }).unwrap();
    s
}

fn suite_json(r: &SuiteReport) -> Json {
    Json::obj([
        ("dim", Json::Int(r.levels as i64)),
        ("two_mode_dim", Json::Int(r.two_mode_levels as i64)),
        ("seed", Json::Int(r.seed as i64)),
        ("trials", Json::Int(r.trials as i64)),
        ("mu_multiplier", Json::Num(r.kappa_mu)),
        (
            "rows",
            Json::Arr(
                r.rows
                    .iter()
                    .map(|row| {
                        Json::obj([
                            ("identity", Json::Str(row.name.clone())),
                            ("cases", Json::Int(row.cases as i64)),
                            ("worst", Json::Num(row.worst)),
                            ("tolerance", Json::Num(row.tolerance)),
                            ("pass", row.pass.map_or(Json::Null, Json::Bool)),
                        ])
                    })
                    .collect(),
            ),
        ),
        ("all_pass", Json::Bool(r.all_pass())),
    ])
}

fn run_fockcheck(a: &FockcheckArgs) -> Result<(i32, String)> {
    let report = run_suite(a.dim, a.seed, a.trials)?;
    let out = match a.format {
        Format::Text => suite_text(&report),
        Format::Json => suite_json(&report).render(),
    };
    Ok((if report.all_pass() { EXIT_OK } else { EXIT_NEGATIVE }, out))
}
