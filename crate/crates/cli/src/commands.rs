use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use wiener::bounds::{
    bound_one_dim, bound_recursive_op, sampling_bounds, sampling_rho, solve_max_delta, BoundReport,
    DecayCertificate, DualWindowFactors,
};
use wiener::generator::{Generator, GeneratorSpec};
use wiener::sampling::{
    derivative_amalgam_norm, parse_points_csv, sampling_experiment, ExperimentConfig, SetSource,
};
use wiener::sequence::{MultiIndex, NormTag, SequenceFile, WeightedSequence};
use wiener::spline::{ModelSettings, SplineModel};
use wiener::suite::{run_suite, verify, SuiteConfig};
use wiener::symbol::{
    build_symbol, default_grid, deconvolve, deconvolve_auto, momentum_op, required_grid,
};
use wiener::Error;

use crate::{
    BoundsArgs, Cli, Command, DeconvolveArgs, DualWindowArgs, RieszArgs, SampleArgs, VerifyArgs,
};

/// Exit code of a finished run whose numbers miss a requirement.
const NUMERIC_FAILURE: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "Io",
            CliError::Parse { .. } => "Json",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                Error::GridTooSmall { .. }
                | Error::QuadratureNoConvergence(_)
                | Error::NotContracting { .. } => 3,
                Error::Io(_) => 4,
                _ => 2,
            },
            CliError::Io { .. } => 4,
            CliError::Parse { .. } => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult<ExitCode> {
    let out = Output::new(&cli.out_dir)?;
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Deconvolve(args) => cmd_deconvolve(args, seed, &out),
        Command::Bounds(args) => cmd_bounds(args, seed, &out),
        Command::DualWindow(args) => cmd_dual_window(args, seed, &out),
        Command::RieszCheck(args) => cmd_riesz(args, seed, &out),
        Command::SampleRecon(args) => cmd_sample(args, seed, &out),
        Command::Verify(args) => cmd_verify(args, cli.seed, &out),
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Output {
            dir: dir.to_path_buf(),
        })
    }

    fn write_with<F>(&self, name: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let io = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
        body(&mut w).and_then(|_| w.flush()).map_err(io)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|source| match source.classify() {
        serde_json::error::Category::Data => CliError::Core(Error::InvalidInput(format!(
            "{origin}: {source}"
        ))),
        _ => CliError::Parse {
            path: origin.to_string(),
            source,
        },
    })
}

/// Inline JSON or a path to a JSON file.
fn load_generator(spec: &str) -> CliResult<(GeneratorSpec, Generator)> {
    let (text, origin) = if spec.trim_start().starts_with('{') {
        (spec.to_string(), "--generator".to_string())
    } else {
        (read_text(Path::new(spec))?, spec.to_string())
    };
    let parsed: GeneratorSpec = parse_json(&text, &origin)?;
    let gen = Generator::from_spec(&parsed)?;
    Ok((parsed, gen))
}

fn require(cond: bool, msg: impl Into<String>) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidInput(msg.into()).into())
    }
}

fn model_settings(grid: Option<usize>, trunc_tol: f64) -> CliResult<ModelSettings> {
    let mut settings = ModelSettings {
        trunc_tol,
        ..ModelSettings::default()
    };
    if let Some(n) = grid {
        require(n >= 2, format!("grid size must be at least 2, got {n}"))?;
        settings.deconv_grid = n;
    }
    settings.validate()?;
    Ok(settings)
}

fn fmt_inputs(inputs: &BTreeMap<String, f64>) -> String {
    inputs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn print_table(reports: &[BoundReport]) {
    println!("{:<16} {:>24} {:>6}  inputs", "bound", "value", "valid");
    for r in reports {
        println!(
            "{:<16} {:>24.16e} {:>6}  {}",
            r.name,
            r.value,
            r.valid,
            fmt_inputs(&r.inputs)
        );
    }
}

fn index_label(alpha: &MultiIndex) -> String {
    alpha
        .exponents()
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Serialize)]
struct MomentumLine {
    index: MultiIndex,
    bound: f64,
    observed_lower: f64,
    observed_upper: f64,
}

fn cmd_deconvolve(args: &DeconvolveArgs, seed: u64, out: &Output) -> CliResult<ExitCode> {
    let text = read_text(&args.input)?;
    let a: WeightedSequence = parse_json(&text, &args.input.display().to_string())?;
    let d = a.dim();
    let n = args.grid.unwrap_or_else(|| default_grid(d));
    let res = if args.fixed_grid {
        deconvolve(&a, n, args.trunc_tol)?
    } else {
        deconvolve_auto(&a, n, args.trunc_tol)?
    };
    let big_a = res.a_certified;

    let mut reports = vec![
        BoundReport::new("A_certified", &[("grid", res.grid_size as f64)], big_a, true),
        BoundReport::new("B_certified", &[("grid", res.grid_size as f64)], res.b_certified, true),
    ];
    if d == 1 {
        let m12 = a.momentum(&MultiIndex::new(vec![1]), NormTag::L2)?.value;
        let (m12_b, l1_b) = bound_one_dim(m12, big_a)?;
        let inputs = [("M12_a", m12), ("A", big_a)];
        reports.push(BoundReport::new("M12_b", &inputs, m12_b, true));
        reports.push(BoundReport::new("l1_b", &inputs, l1_b, true));
    }

    let alpha = MultiIndex::new(args.alpha.clone().unwrap_or_else(|| vec![1; d]));
    require(
        alpha.dim() == d,
        format!("alpha has {} entries, sequence dimension is {d}", alpha.dim()),
    )?;
    let mut momenta_a = BTreeMap::new();
    for gamma in alpha.lower_set() {
        if !gamma.is_zero() {
            let est = momentum_op(&a, &gamma, res.grid_size)?;
            momenta_a.insert(gamma, est.upper);
        }
    }
    let m_b = bound_recursive_op(&momenta_a, big_a, &alpha)?;
    let b_grid = res.grid_size.max(required_grid(res.b.shape()).next_power_of_two());
    let mut recursive = Vec::new();
    for (gamma, bound) in &m_b {
        let observed = momentum_op(&res.b, gamma, b_grid)?;
        let mut inputs: Vec<(String, f64)> = vec![("A".into(), big_a)];
        for (beta, m) in &momenta_a {
            if beta.le(gamma) {
                inputs.push((format!("Mop_a[{}]", index_label(beta)), *m));
            }
        }
        let refs: Vec<(&str, f64)> = inputs.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        reports.push(BoundReport::new(
            format!("Mop_b[{}]", index_label(gamma)),
            &refs,
            *bound,
            true,
        ));
        recursive.push(MomentumLine {
            index: gamma.clone(),
            bound: *bound,
            observed_lower: observed.lower,
            observed_upper: observed.upper,
        });
    }

    out.json("b.json", &res.b)?;
    out.json(
        "bounds.json",
        &json!({
            "seed": seed,
            "input": args.input,
            "dim": d,
            "grid_size": res.grid_size,
            "trunc_tol": args.trunc_tol,
            "a_certified": res.a_certified,
            "b_certified": res.b_certified,
            "residual_l2": res.residual_l2,
            "truncation_radius": res.truncation_radius,
            "reports": reports,
            "recursive": recursive,
        }),
    )?;
    out.write_with("b_abs.csv", |w| {
        let header: Vec<String> = if d == 1 {
            vec!["k".into()]
        } else {
            (1..=d).map(|j| format!("k{j}")).collect()
        };
        writeln!(w, "{},abs", header.join(","))?;
        for (k, v) in res.b.iter_indexed() {
            let k: Vec<String> = k.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{},{}", k.join(","), v.norm())?;
        }
        Ok(())
    })?;
    if args.symbol {
        let grid = build_symbol(&a, res.grid_size)?;
        out.json("symbol.json", &grid.to_export())?;
        out.write_with("symbol.csv", |w| grid.write_csv(w))?;
    }

    print_table(&reports);
    println!(
        "grid {}  truncation radius {:?}  residual {:e}",
        res.grid_size, res.truncation_radius, res.residual_l2
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bounds(args: &BoundsArgs, seed: u64, out: &Output) -> CliResult<ExitCode> {
    let mut gen_name = None;
    let (cert, a, deriv) = match &args.generator {
        Some(spec) => {
            let (_, gen) = load_generator(spec)?;
            let model = SplineModel::new(gen.clone(), &ModelSettings::default())?;
            let mut cert = gen.cert();
            cert.c = args.c.unwrap_or(cert.c);
            cert.alpha = args.alpha.unwrap_or(cert.alpha);
            let a = args.a.unwrap_or(model.gram_bounds().0);
            let deriv = match args.deriv_norm {
                Some(v) => Some(v),
                None if gen.deriv_available() => Some(derivative_amalgam_norm(&gen, args.q)?),
                None => None,
            };
            gen_name = Some(gen.name());
            (cert, a, deriv)
        }
        None => {
            let missing = || Error::InvalidInput("need --generator or all of --c, --alpha, --a".into());
            let c = args.c.ok_or_else(missing)?;
            let alpha = args.alpha.ok_or_else(missing)?;
            let a = args.a.ok_or_else(missing)?;
            (DecayCertificate { c, alpha }, a, args.deriv_norm)
        }
    };
    let cert = DecayCertificate::new(cert.c, cert.alpha)?;
    let f = DualWindowFactors::new(&cert, a)?;
    let base = [("C", cert.c), ("alpha", cert.alpha), ("A", a)];
    let al = [("alpha", cert.alpha)];
    let mut reports = vec![
        BoundReport::new("W_alpha", &al, f.constants.w, true),
        BoundReport::new("K_alpha", &al, f.constants.k, true),
        BoundReport::new("S_alpha", &al, f.constants.s, true),
        BoundReport::new("kappa", &base, f.kappa, true),
        BoundReport::new("b_l1", &base, f.inverse_l1, true),
        BoundReport::new("phi_W", &base, f.phi_w, true),
        BoundReport::new("psi_W", &base, f.psi_w(), true),
        BoundReport::new("riesz_r", &base, 1.0 / f.psi_w(), true),
        BoundReport::new("riesz_R", &base, f.phi_w, true),
    ];
    if let Some(m12) = args.m12 {
        let (m12_b, l1_b) = bound_one_dim(m12, a)?;
        let inputs = [("M12_a", m12), ("A", a)];
        reports.push(BoundReport::new("M12_b", &inputs, m12_b, true));
        reports.push(BoundReport::new("l1_b_one_dim", &inputs, l1_b, true));
    }
    if let Some(dn) = deriv {
        let mut inputs = base.to_vec();
        inputs.extend([("deriv_norm", dn), ("q", args.q), ("rho_target", args.rho_target)]);
        let star = solve_max_delta(&cert, a, dn, args.q, args.rho_target)?;
        reports.push(BoundReport::new("delta_star", &inputs, star, true));
        if let Some(delta) = args.delta {
            inputs.truncate(base.len() + 2);
            inputs.push(("delta", delta));
            let rho = sampling_rho(&cert, a, dn, args.q, delta)?;
            reports.push(BoundReport::new("rho", &inputs, rho, true));
            if let Some(n_x) = args.n_x {
                inputs.extend([("rho", rho), ("n_x", n_x as f64), ("p", args.p)]);
                if rho < 1.0 {
                    let (lo, hi) = sampling_bounds(&cert, a, n_x, delta, rho, args.p)?;
                    reports.push(BoundReport::new("c_p", &inputs, lo, true));
                    reports.push(BoundReport::new("C_p", &inputs, hi, true));
                } else {
                    reports.push(BoundReport::new("c_p", &inputs, 0.0, false));
                }
            }
        }
    }
    out.json(
        "bounds.json",
        &json!({ "seed": seed, "generator": gen_name, "reports": reports }),
    )?;
    print_table(&reports);
    Ok(ExitCode::SUCCESS)
}

fn cmd_dual_window(args: &DualWindowArgs, seed: u64, out: &Output) -> CliResult<ExitCode> {
    require(args.per_cell >= 2, "per-cell must be at least 2")?;
    let (spec, gen) = load_generator(&args.generator)?;
    let settings = model_settings(args.grid, args.trunc_tol)?;
    let model = SplineModel::build(gen.clone(), &settings)?;
    let dual = model.dual()?;
    let (a_gram, b_gram) = model.gram_bounds();
    let cert = gen.cert();
    let f = DualWindowFactors::new(&cert, a_gram)?;
    let phi_numeric = model.phi_amalgam_norm(args.per_cell);
    let psi_numeric = model.psi_amalgam_norm(args.per_cell)?;
    let (lo, hi) = model.psi_support()?;

    out.json("psi_coefficients.json", &dual.b)?;
    out.json(
        "dual_window.json",
        &json!({
            "seed": seed,
            "generator": spec,
            "name": gen.name(),
            "certificate": cert,
            "a_gram": a_gram,
            "b_gram": b_gram,
            "autocorrelation": SequenceFile::from(model.autocorrelation().clone()),
            "b": SequenceFile::from(dual.b.clone()),
            "residual_l2": dual.residual_l2,
            "deconv_grid": dual.deconv_grid,
            "biorthogonality_defect": dual.biorthogonality_defect,
            "defect_range": dual.defect_range,
            "psi_support": [lo, hi],
            "per_cell": args.per_cell,
            "phi_w": { "certified": f.phi_w, "numeric": phi_numeric },
            "psi_w": { "certified": f.psi_w(), "numeric": psi_numeric },
            "riesz": { "r": 1.0 / f.psi_w(), "R": f.phi_w },
        }),
    )?;
    let cells = (hi - lo).ceil().max(1.0) as usize;
    let samples = cells * args.per_cell;
    let mut psi = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let x = lo + (hi - lo) * i as f64 / samples as f64;
        psi.push((x, model.psi(x)?));
    }
    out.write_with("psi.csv", |w| {
        writeln!(w, "x,psi")?;
        for (x, v) in &psi {
            writeln!(w, "{x},{v}")?;
        }
        Ok(())
    })?;

    println!("generator              {}", gen.name());
    println!("A_gram, B_gram         {a_gram:.16e} {b_gram:.16e}");
    println!("b entries              {} (grid {})", dual.b.len(), dual.deconv_grid);
    println!("biorthogonality defect {:e}", dual.biorthogonality_defect);
    println!("phi W-norm             numeric {phi_numeric:.6} <= certified {:.6}", f.phi_w);
    println!("psi W-norm             numeric {psi_numeric:.6} <= certified {:.6}", f.psi_w());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct RieszLine {
    p: f64,
    ratio_min: f64,
    ratio_max: f64,
    within: bool,
}

fn cmd_riesz(args: &RieszArgs, seed: u64, out: &Output) -> CliResult<ExitCode> {
    require(args.trials > 0 && args.width > 0, "trials and width must be positive")?;
    require(
        args.p.iter().all(|&p| p >= 1.0),
        "every p must lie in [1, inf]",
    )?;
    let (spec, gen) = load_generator(&args.generator)?;
    let model = SplineModel::new(gen.clone(), &ModelSettings::default())?;
    let (a_gram, _) = model.gram_bounds();
    let f = DualWindowFactors::new(&gen.cert(), a_gram)?;
    let (r, big_r) = (1.0 / f.psi_w(), f.phi_w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for &p in &args.p {
        let (lo, hi) = model.riesz_ratio_empirical(p, args.trials, args.width, &mut rng)?;
        lines.push(RieszLine {
            p,
            ratio_min: lo,
            ratio_max: hi,
            within: lo >= r && hi <= big_r,
        });
    }
    out.json(
        "riesz.json",
        &json!({
            "seed": seed,
            "generator": spec,
            "a_gram": a_gram,
            "trials": args.trials,
            "width": args.width,
            "r": r,
            "R": big_r,
            "rows": lines,
        }),
    )?;
    println!("r = {r:.6e}  R = {big_r:.6}");
    println!("{:>6} {:>12} {:>12} {:>7}", "p", "min", "max", "within");
    for l in &lines {
        println!("{:>6} {:>12.6} {:>12.6} {:>7}", l.p, l.ratio_min, l.ratio_max, l.within);
    }
    if lines.iter().all(|l| l.within) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("riesz-check: empirical ratio outside [r, R]");
        Ok(ExitCode::from(NUMERIC_FAILURE))
    }
}

fn cmd_sample(args: &SampleArgs, seed: u64, out: &Output) -> CliResult<ExitCode> {
    let (_, gen) = load_generator(&args.generator)?;
    let source = match (&args.points, args.cells, args.jitter) {
        (Some(path), _, _) => {
            let points = parse_points_csv(&read_text(path)?)?;
            let window = args.window.as_ref().map(|w| (w[0], w[1]));
            SetSource::Points {
                points,
                window,
                delta: args.delta,
            }
        }
        (None, Some(cells), Some(jitter)) => SetSource::Jitter {
            cells,
            jitter,
            delta: args.delta,
            seed,
        },
        _ => {
            return Err(Error::InvalidInput(
                "give either --points or both --cells and --jitter".into(),
            )
            .into())
        }
    };
    let cfg = ExperimentConfig {
        p: args.p,
        q: args.q,
        rho_target: args.rho_target,
        tol: args.tol,
        max_iter: args.max_iter,
        margin: args.margin,
        trials: args.trials,
        seed,
    };
    let model = SplineModel::build(gen, &ModelSettings::default())?;
    let report = sampling_experiment(&model, &source, &cfg)?;
    out.json("report.json", &report)?;
    out.write_with("error_history.csv", |w| {
        writeln!(w, "iteration,error")?;
        for (i, e) in report.error_history.iter().enumerate() {
            writeln!(w, "{i},{e}")?;
        }
        Ok(())
    })?;
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
    println!("points      {} on [{}, {}]", report.points, report.window.0, report.window.1);
    println!("delta       {:.6e} (delta* {})", report.delta, opt(report.delta_star));
    println!("rho         {} certified={}", opt(report.rho_certified), report.certified);
    println!("c_p, C_p    {} {}", opt(report.c_p), opt(report.upper_c_p));
    println!(
        "ratios      [{:.6}, {:.6}] violations {}/{}",
        report.ratio_min, report.ratio_max, report.violations, report.trials
    );
    println!(
        "iterations  {} gamma_observed {:.3e} coefficient error {:.3e}",
        report.iterations, report.gamma_observed, report.max_coefficient_error
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs, seed: Option<u64>, out: &Output) -> CliResult<ExitCode> {
    let mut cfg: SuiteConfig = match &args.config {
        Some(path) => parse_json(&read_text(path)?, &path.display().to_string())?,
        None => SuiteConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let report = if args.once {
        run_suite(&cfg)?
    } else {
        verify(&cfg)?
    };
    print!("{}", report.render());
    out.json("verify.json", &report)?;
    if report.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        let failed = report.criteria.iter().filter(|c| !c.passed).count();
        eprintln!("verify: {failed} criteria failed");
        Ok(ExitCode::from(NUMERIC_FAILURE))
    }
}
