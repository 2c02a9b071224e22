//! The `wfl` command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{ConfigPatch, ExperimentConfig, OutputFormat};
use crate::error::{Error, Result};
use crate::fourier::{
    aligned_integral, aligned_integral_estimate, build_aligned_scene, partial_sum, Composed, KernelOrder,
    PiecewiseLinear, QuadratureSpec, SceneBounds,
};
use crate::homeo::DyadicHomeomorphism;
use crate::output::{fmt_f64, write_csv_preamble};
use crate::rng::RandomSource;
use crate::testfn::{build_counterexample, TestFunction};
use crate::verify::{self, CheckReport, DecaySetup};
use crate::zeroone::{run_trace, GridInit};

#[derive(Debug, Parser)]
#[command(
    name = "wfl",
    version,
    about = "Random homeomorphisms, Dirichlet partial sums and Monte Carlo checks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each also reads `WFL_<NAME>`.
#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[arg(long, global = true, env = "WFL_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "WFL_DEPTH")]
    pub depth: Option<u32>,
    #[arg(long, global = true, env = "WFL_SAMPLES")]
    pub samples: Option<usize>,
    #[arg(long, global = true, env = "WFL_WORKERS")]
    pub workers: Option<usize>,
    /// `key = value` file; flags and environment override it.
    #[arg(long, global = true, env = "WFL_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true, env = "WFL_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "WFL_FORMAT")]
    pub format: Option<OutputFormat>,
    #[arg(long, global = true, env = "WFL_POINTS_PER_OSCILLATION")]
    pub points_per_oscillation: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid values of one sampled homeomorphism (CSV `k,x,phi_x`).
    Sample,
    /// `f(phi(x))` at given points (CSV `x,phi_x,f_phi_x`).
    Eval {
        /// Test function: JSON, `@file.json`, or a shorthand such as `sin:1`.
        #[arg(long, default_value = "sin:1")]
        f: String,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<f64>,
    },
    /// Partial sums `S_n(f o phi; x)` (CSV `n,s_n`).
    PartialSum {
        #[arg(long, default_value = "sin:1")]
        f: String,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u32>,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        /// Use `f` itself instead of `f o phi`.
        #[arg(long)]
        no_phi: bool,
    },
    /// Run a statistical check and print its JSON report.
    Verify {
        #[command(subcommand)]
        check: Check,
    },
    /// Build the aligned scene and integrate it (JSON).
    Align(AlignArgs),
    /// Sweep partial sums at 0 over `n` for the counterexample and a control.
    Sweep(SweepArgs),
    /// Iterate the averaging map on a grid (JSON trace).
    Zeroone {
        /// `const:<c>`, `exp:<lambda>`, `remark` or `random`.
        #[arg(long, default_value = "const:0.5")]
        init: String,
        #[arg(long, default_value_t = 2)]
        iters: usize,
        /// Grid size `M` (step `1/M`).
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Also write the final grid as CSV `a,b,x,y,p`.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum Check {
    /// KS of `phi(2^-i)` against its closed-form law.
    DyadicLaw {
        #[arg(long, default_value_t = 1)]
        i: u32,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// First chain value below `y` also below `x`, against `x / y`.
    FirstPassage {
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
    /// KS of `phi(1/3)` against `2x - x^2`.
    ThirdDensity {
        #[arg(long)]
        threshold: Option<f64>,
        /// Depth of the lazy bracket around 1/3, independent of `--depth`.
        #[arg(long, default_value_t = 20)]
        bracket_depth: u32,
    },
    /// Envelope failures `phi(r) not in (r^K1, r^K2)` against `C r^2`.
    Holder {
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125,0.0625")]
        r: Vec<f64>,
    },
    /// Conditional law of `phi(1/2)` given `phi(1/4) = y`.
    Conditional {
        #[arg(long)]
        y: f64,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Exceedance of `|int_r^{1-r} (f o phi) D_n| / ||f||`.
    TailDecay {
        #[arg(long, default_value = "sin:1")]
        f: String,
        #[arg(long, default_value_t = 64)]
        n: u32,
        #[arg(long, default_value_t = 0.125)]
        r: f64,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
    },
    /// Exceedance of `|int_a^b (f o phi) D_n| / ||f||`, compared with the rest of the period.
    HeadDecay {
        #[arg(long, default_value = "sin:1")]
        f: String,
        #[arg(long, default_value_t = 64)]
        n: u32,
        #[arg(long, default_value_t = -0.125, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, default_value_t = 0.125)]
        b: f64,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
    },
    /// Probability of staying within `eps` of the line from `(2^-i, phi_i)` to `(1, 1)`.
    Tube {
        #[arg(long, default_value_t = 2)]
        i: usize,
        #[arg(long)]
        phi_i: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 8)]
        local_depth: u32,
    },
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long, default_value_t = 16)]
    pub n: u32,
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, default_value_t = 0.25)]
    pub s0: f64,
    #[arg(long, default_value_t = 1)]
    pub j: u32,
    /// Defaults to the smallest `i` with `2^(i-j) > 4n`.
    #[arg(long)]
    pub i: Option<u32>,
    /// Defaults to `s0 / (4 n^2)`.
    #[arg(long)]
    pub phi_i: Option<f64>,
    /// Defaults to `s0 / 2`.
    #[arg(long)]
    pub phi_j: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub ratio_exponent: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 2048)]
    pub n_max: u32,
    /// Explicit kernel orders; defaults to a roughly geometric grid up to `n_max`.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<u32>>,
    /// Orders of the ladders in the counterexample.
    #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
    pub ladders: Vec<u32>,
    #[arg(long, default_value_t = 6)]
    pub depth_k: u32,
    #[arg(long, default_value_t = 0.25)]
    pub s0: f64,
    /// Homeomorphism depth; defaults to `ceil(log2 n_max) + 10`.
    #[arg(long)]
    pub sweep_depth: Option<u32>,
}

/// Parses a test function: JSON, `@path` to a JSON file, or one of
/// `sin:k[:amp]`, `cos:k[:amp]`, `const:c`, `identity`,
/// `osc:n:K[:s0]`, `counterexample:n1,n2,...:K[:s0]`.
pub fn parse_function(spec: &str) -> Result<TestFunction> {
    let spec = spec.trim();
    let f: TestFunction = if let Some(path) = spec.strip_prefix('@') {
        serde_json::from_str(&std::fs::read_to_string(path)?)?
    } else if spec.starts_with('{') {
        serde_json::from_str(spec)?
    } else {
        let parts: Vec<&str> = spec.split(':').collect();
        let bad = || Error::Config(format!("cannot parse function '{spec}'"));
        let num = |i: usize| -> Result<f64> { parts.get(i).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad()) };
        let int = |i: usize| -> Result<u32> { parts.get(i).ok_or_else(bad)?.parse::<u32>().map_err(|_| bad()) };
        let opt = |i: usize, default: f64| -> Result<f64> {
            if parts.len() > i {
                num(i)
            } else {
                Ok(default)
            }
        };
        match parts[0] {
            "sin" => TestFunction::sine(int(1)? as i64, opt(2, 1.0)?),
            "cos" => TestFunction::cosine(int(1)? as i64, opt(2, 1.0)?),
            "const" => TestFunction::constant(num(1)?),
            "identity" => TestFunction::Identity,
            "osc" => TestFunction::oscillatory(int(1)?, int(2)?, opt(3, 1.0)?)?,
            "counterexample" => {
                let list = parts
                    .get(1)
                    .ok_or_else(bad)?
                    .split(',')
                    .map(|s| s.trim().parse::<u32>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                build_counterexample(&list, int(2)?, opt(3, 0.25)?)?
            }
            _ => return Err(bad()),
        }
    };
    f.validate()?;
    Ok(f)
}

/// Output of a subcommand before serialization.
struct Emission {
    /// CSV header line and rows.
    csv: Option<(String, Vec<String>)>,
    json: Value,
    default_format: OutputFormat,
    /// Set for checks: whether the check passed.
    pass: Option<bool>,
}

fn effective_config(g: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &g.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        ConfigPatch::parse(&text)?.apply(&mut cfg);
    }
    ConfigPatch {
        seed: g.seed,
        depth: g.depth,
        samples: g.samples,
        workers: g.workers,
        points_per_oscillation: g.points_per_oscillation,
        format: g.format,
        ..ConfigPatch::default()
    }
    .apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn quadrature(cfg: &ExperimentConfig) -> Result<QuadratureSpec> {
    QuadratureSpec::new(cfg.points_per_oscillation)
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Sample => "sample",
        Command::Eval { .. } => "eval",
        Command::PartialSum { .. } => "partial-sum",
        Command::Verify { .. } => "verify",
        Command::Align(_) => "align",
        Command::Sweep(_) => "sweep",
        Command::Zeroone { .. } => "zeroone",
    }
}

fn report_emission(report: CheckReport) -> Result<Emission> {
    let pass = report.pass;
    Ok(Emission {
        csv: Some((
            "name,statistic,threshold,pass,n_samples,seed".into(),
            vec![format!(
                "{},{},{},{},{},{}",
                report.name,
                fmt_f64(report.statistic),
                fmt_f64(report.threshold),
                report.pass,
                report.sample_count,
                report.seed
            )],
        )),
        json: serde_json::to_value(&report)?,
        default_format: OutputFormat::Json,
        pass: Some(pass),
    })
}

fn run_check(check: &Check, cfg: &ExperimentConfig) -> Result<Emission> {
    let (seed, n) = (cfg.seed, cfg.samples);
    let report = match check {
        Check::DyadicLaw { i, threshold } => verify::check_dyadic_law(*i, n, seed, *threshold)?,
        Check::FirstPassage { x, y } => verify::check_first_passage(*x, *y, n, seed)?,
        Check::ThirdDensity {
            threshold,
            bracket_depth,
        } => verify::check_third_density(n, *bracket_depth, seed, *threshold)?,
        Check::Holder { r } => verify::check_holder(&cfg.holder(), r, n, cfg.depth, seed)?,
        Check::Conditional { y, threshold } => verify::check_conditional_chain(*y, n, seed, *threshold)?,
        Check::TailDecay { f, n: order, r, k } => {
            let setup = decay_setup(f, *order, cfg)?;
            verify::check_tail_decay(&setup, *r, k.as_deref())?.report
        }
        Check::HeadDecay { f, n: order, a, b, k } => {
            let setup = decay_setup(f, *order, cfg)?;
            verify::check_head_decay(&setup, *a, *b, k.as_deref())?.report
        }
        Check::Tube {
            i,
            phi_i,
            eps,
            local_depth,
        } => {
            let x_i = 0.5f64.powi(*i as i32);
            let phi_i = phi_i.unwrap_or(x_i);
            let tau = PiecewiseLinear::new(&[(x_i, phi_i), (1.0, 1.0)])?;
            verify::check_tube_probability(*i, phi_i, &tau, *eps, n, *local_depth, seed)?
        }
    };
    report_emission(report)
}

fn decay_setup(f: &str, n: u32, cfg: &ExperimentConfig) -> Result<DecaySetup> {
    Ok(DecaySetup {
        f: parse_function(f)?,
        n,
        depth: cfg.depth,
        samples: cfg.samples,
        seed: cfg.seed,
        quadrature: quadrature(cfg)?,
    })
}

fn sample_phi(cfg: &ExperimentConfig) -> Result<DyadicHomeomorphism> {
    DyadicHomeomorphism::sample(cfg.depth, &RandomSource::new(cfg.seed))
}

fn run_command(cmd: &Command, cfg: &ExperimentConfig) -> Result<Emission> {
    match cmd {
        Command::Sample => {
            let phi = sample_phi(cfg)?;
            let rows = phi
                .values()
                .iter()
                .enumerate()
                .map(|(k, &v)| format!("{k},{},{}", fmt_f64(phi.grid_point(k)), fmt_f64(v)))
                .collect();
            Ok(Emission {
                csv: Some(("k,x,phi_x".into(), rows)),
                json: json!({ "depth": phi.depth(), "phi": phi.values() }),
                default_format: OutputFormat::Csv,
                pass: None,
            })
        }
        Command::Eval { f, x } => {
            let f = parse_function(f)?;
            let phi = sample_phi(cfg)?;
            let triples: Vec<(f64, f64, f64)> = x
                .iter()
                .map(|&t| {
                    let y = phi.evaluate(t);
                    (t, y, f.eval(y))
                })
                .collect();
            Ok(Emission {
                csv: Some((
                    "x,phi_x,f_phi_x".into(),
                    triples
                        .iter()
                        .map(|(a, b, c)| format!("{},{},{}", fmt_f64(*a), fmt_f64(*b), fmt_f64(*c)))
                        .collect(),
                )),
                json: json!({ "f": f, "points": triples.iter().map(|t| json!({"x": t.0, "phi_x": t.1, "f_phi_x": t.2})).collect::<Vec<_>>() }),
                default_format: OutputFormat::Csv,
                pass: None,
            })
        }
        Command::PartialSum { f, n, x, no_phi } => {
            let f = parse_function(f)?;
            let q = quadrature(cfg)?;
            let phi = sample_phi(cfg)?;
            let g = Composed { f: &f, phi: &phi };
            let sums = n
                .iter()
                .map(|&order| {
                    if *no_phi {
                        partial_sum(&f, KernelOrder(order), *x, &q)
                    } else {
                        partial_sum(&g, KernelOrder(order), *x, &q)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Emission {
                csv: Some((
                    "n,s_n".into(),
                    n.iter()
                        .zip(&sums)
                        .map(|(o, s)| format!("{o},{}", fmt_f64(*s)))
                        .collect(),
                )),
                json: json!({ "f": f, "x": x, "compose": !no_phi, "n": n, "s_n": sums }),
                default_format: OutputFormat::Csv,
                pass: None,
            })
        }
        Command::Verify { check } => run_check(check, cfg),
        Command::Align(a) => run_align(a, cfg),
        Command::Sweep(s) => run_sweep(s, cfg),
        Command::Zeroone {
            init,
            iters,
            grid,
            snapshot,
        } => {
            let init: GridInit = init.parse()?;
            let start = init.build(*grid, &RandomSource::new(cfg.seed))?;
            let (trace, last) = run_trace(start, *iters);
            if let Some(path) = snapshot {
                let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
                write_csv_preamble(&mut file, &cfg.entries())?;
                last.write_csv(&mut file)?;
                file.flush()?;
            }
            Ok(Emission {
                csv: Some((
                    "iter,residual,defect,violations,p01".into(),
                    trace
                        .iter()
                        .map(|r| {
                            format!(
                                "{},{},{},{},{}",
                                r.iter,
                                fmt_f64(r.residual),
                                fmt_f64(r.defect),
                                r.violations,
                                fmt_f64(r.p01)
                            )
                        })
                        .collect(),
                )),
                json: json!({ "init": init.to_string(), "grid": grid, "trace": trace }),
                default_format: OutputFormat::Json,
                pass: None,
            })
        }
    }
}

fn run_align(a: &AlignArgs, cfg: &ExperimentConfig) -> Result<Emission> {
    let nf = f64::from(a.n);
    let i = a.i.unwrap_or_else(|| a.j + (4.0 * nf).log2().floor() as u32 + 1);
    let phi_i = a.phi_i.unwrap_or(a.s0 / (4.0 * nf * nf));
    let phi_j = a.phi_j.unwrap_or(a.s0 / 2.0);
    let bounds = SceneBounds {
        k1: cfg.k1,
        ratio_exponent: a.ratio_exponent,
    };
    let scene = build_aligned_scene(a.n, a.k, a.s0, i, a.j, phi_i, phi_j, bounds)?;
    let value = aligned_integral(&scene, &quadrature(cfg)?)?;
    let err = scene.alignment_error(100_000);
    let json = json!({
        "scene": scene,
        "alignment_error": err,
        "aligned_integral": value,
        "estimate": aligned_integral_estimate(a.n),
        "ratio_to_log_n": value / nf.ln(),
    });
    Ok(Emission {
        csv: Some((
            "n,r,alpha,beta,alignment_error,aligned_integral,ratio_to_log_n".into(),
            vec![format!(
                "{},{},{},{},{},{},{}",
                a.n,
                scene.r,
                fmt_f64(scene.alpha),
                fmt_f64(scene.beta),
                fmt_f64(err),
                fmt_f64(value),
                fmt_f64(value / nf.ln())
            )],
        )),
        json,
        default_format: OutputFormat::Json,
        pass: None,
    })
}

fn run_sweep(s: &SweepArgs, cfg: &ExperimentConfig) -> Result<Emission> {
    let grid = s.n_grid.clone().unwrap_or_else(|| verify::default_sweep_grid(s.n_max));
    let n_max = grid.iter().copied().max().unwrap_or(s.n_max);
    let depth = s.sweep_depth.unwrap_or_else(|| verify::default_sweep_depth(n_max));
    let counter = build_counterexample(&s.ladders, s.depth_k, s.s0)?;
    let control = TestFunction::sine(1, counter.sup_norm());
    let families = vec![
        ("counterexample".to_string(), counter),
        ("control".to_string(), control),
    ];
    let results = verify::sweep_partial_sums(&families, &grid, cfg.samples, depth, cfg.seed)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for fam in &results {
        for (sample, row) in fam.sums.iter().enumerate() {
            for (n, v) in grid.iter().zip(row) {
                rows.push(format!("{},{sample},{n},{}", fam.name, fmt_f64(*v)));
            }
        }
        let qs = fam.quantiles(&verify::SWEEP_QUANTILES)?;
        summary.push(json!({
            "family": fam.name,
            "f": fam.f,
            "quantile_levels": verify::SWEEP_QUANTILES,
            "sup_quantiles": qs,
            "sup_abs": fam.sup_abs,
        }));
    }
    Ok(Emission {
        csv: Some(("family,sample,n,s_n".into(), rows)),
        json: json!({ "sweep_depth": depth, "n_grid": grid, "families": summary }),
        default_format: OutputFormat::Csv,
        pass: None,
    })
}

fn render(cmd: &Command, cfg: &ExperimentConfig, em: &Emission) -> Result<String> {
    let format = cfg.format.unwrap_or(em.default_format);
    match (format, &em.csv) {
        (OutputFormat::Csv, Some((header, rows))) => {
            let mut buf = Vec::new();
            let mut meta = vec![("command".to_string(), command_name(cmd).to_string())];
            meta.extend(cfg.entries());
            meta.push(("arguments".to_string(), format!("{cmd:?}")));
            write_csv_preamble(&mut buf, &meta)?;
            writeln!(buf, "{header}")?;
            for r in rows {
                writeln!(buf, "{r}")?;
            }
            Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
        }
        _ => {
            let mut obj = match &em.json {
                Value::Object(m) => m.clone(),
                other => {
                    let mut m = serde_json::Map::new();
                    m.insert("result".into(), other.clone());
                    m
                }
            };
            obj.insert("command".into(), json!(command_name(cmd)));
            obj.insert("arguments".into(), json!(format!("{cmd:?}")));
            obj.insert("config".into(), serde_json::to_value(cfg)?);
            Ok(serde_json::to_string_pretty(&Value::Object(obj))? + "\n")
        }
    }
}

fn write_output(cmd: &Command, g: &GlobalArgs, cfg: &ExperimentConfig, text: &str) -> Result<()> {
    let path = match (&g.out, &cfg.output_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir)?;
            let ext = cfg.format.map(|f| f.to_string()).unwrap_or_else(|| "out".into());
            Some(dir.join(format!("{}.{ext}", command_name(cmd))))
        }
        (None, None) => None,
    };
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<Option<bool>> {
    let cfg = effective_config(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let em = pool.install(|| run_command(&cli.command, &cfg))?;
    let text = render(&cli.command, &cfg, &em)?;
    write_output(&cli.command, &cli.global, &cfg, &text)?;
    Ok(em.pass)
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 when a
/// check fails, 2 on usage, configuration or input errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(Some(false)) => 1,
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
