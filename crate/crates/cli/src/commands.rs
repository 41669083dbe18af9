use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use covcalc::calculus::{
    backward_integral, forward_integral, skorohod_via_trace, symmetric_integral, wiener_integral, Integrand,
    MonteCarloEstimate,
};
use covcalc::kernels::{BifbmRegime, Family};
use covcalc::simulate::{sample_paths, PathEnsemble};
use covcalc::verify::{
    chaos_report, default_eps, gamma_decomposition_report, ito_suite, qv_report_on, quasi_helix_report, Report,
};
use covcalc::{Error, Measure};

use crate::config::{ConfigError, RunConfig};
use crate::integrand::IntegrandExpr;

/// Outcome of a subcommand, mapped to the process exit code.
pub enum Failure {
    Checks,
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Checks => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotPsd { .. } | Error::Estimation(_) => Failure::Numerical(e.to_string()),
            Error::Violation(_) => Failure::Checks,
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("i/o: {e}"))
    }
}

pub type Outcome = Result<(), Failure>;

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Config(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn header(cfg: &RunConfig) -> Value {
    json!({
        "kernel": cfg.kernel.id(),
        "n": cfg.grid.cells(),
        "T": cfg.grid.horizon(),
    })
}

pub fn measure(cfg: &RunConfig) -> Outcome {
    let m = Measure::build(&cfg.kernel, &cfg.grid)?;
    let n = cfg.grid.cells();
    let jordan = m.jordan_decompose();
    let mut summary = header(cfg);
    summary["total"] = json!(m.total());
    summary["planar_variation"] = json!(m.planar_variation());
    summary["positive_part"] = json!(jordan.pos.total());
    summary["negative_part"] = json!(jordan.neg.total());
    summary["energy"] = json!(m.energy_curve()[n]);
    summary["triangle"] = json!(m.triangle_curve()[n]);
    summary["scaling_exponent"] = match m.rectangle_scaling_exponent() {
        Ok(v) => json!(v),
        Err(_) => Value::Null,
    };
    if let Some(path) = &cfg.out {
        m.write_csv(BufWriter::new(File::create(path)?))?;
    }
    match &cfg.json {
        Some(path) => write_json(path, &summary)?,
        None => print_json(&summary),
    }
    Ok(())
}

fn ensemble(cfg: &RunConfig) -> Result<PathEnsemble, Failure> {
    Ok(sample_paths(&cfg.kernel, &cfg.grid, cfg.paths, cfg.seed)?)
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let e = ensemble(cfg)?;
    let n = cfg.grid.cells();
    let var = MonteCarloEstimate::variance_of(&e.column(n))?;
    let mut summary = header(cfg);
    summary["M"] = json!(cfg.paths);
    summary["seed"] = json!(cfg.seed);
    summary["method"] = json!(e.info().method);
    summary["jitter"] = json!(e.info().jitter);
    summary["var_X_T"] = json!(var);
    summary["gamma_T"] = json!(cfg.kernel.variance_curve(cfg.grid.horizon())?);
    if let Some(path) = &cfg.out {
        let file = BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|x| x == "bin") {
            e.write_binary(file)?;
        } else {
            e.write_csv(file)?;
        }
    }
    match &cfg.json {
        Some(path) => write_json(path, &summary)?,
        None => print_json(&summary),
    }
    Ok(())
}

pub fn integrate(cfg: &RunConfig) -> Outcome {
    let mode = cfg.mode.as_deref().unwrap_or("wiener");
    let text = cfg
        .integrand
        .as_deref()
        .ok_or_else(|| Failure::Config("key `integrand` is required".into()))?;
    let expr = IntegrandExpr::parse(text, cfg.grid)?;
    let eps = cfg.eps.as_ref().and_then(|e| e.first().copied()).unwrap_or(cfg.grid.step());
    let x = ensemble(cfg)?;
    let values = match (&expr, mode) {
        (IntegrandExpr::Step(s), "wiener") => wiener_integral(&x, s, cfg.upto)?,
        (IntegrandExpr::Step(s), "forward") => forward_integral(Integrand::Step(s), &x, eps, cfg.upto)?,
        (IntegrandExpr::Step(s), "backward") => backward_integral(Integrand::Step(s), &x, eps, cfg.upto)?,
        (IntegrandExpr::Step(s), "symmetric") => symmetric_integral(Integrand::Step(s), &x, eps, cfg.upto)?,
        (IntegrandExpr::FPrime(c), m) if m != "wiener" => {
            let (fp, fpp) = IntegrandExpr::derivatives(c);
            let f1 = |v: f64| fp.value(v);
            let f2 = |v: f64| fpp.value(v);
            match m {
                "forward" => forward_integral(Integrand::OfPath(&f1), &x, eps, cfg.upto)?,
                "backward" => backward_integral(Integrand::OfPath(&f1), &x, eps, cfg.upto)?,
                "symmetric" => symmetric_integral(Integrand::OfPath(&f1), &x, eps, cfg.upto)?,
                _ => {
                    let m = Measure::build(&cfg.kernel, &cfg.grid)?;
                    skorohod_via_trace(&f1, &f2, &x, &m, cfg.upto)?
                }
            }
        }
        (IntegrandExpr::Step(_), _) => {
            return Err(Failure::Config(format!("mode `{mode}` needs an fprime:poly: integrand")))
        }
        (IntegrandExpr::FPrime(_), _) => {
            return Err(Failure::Config("mode `wiener` needs a deterministic integrand".into()))
        }
    };
    let est = MonteCarloEstimate::from_samples(&values)?;
    let mut metadata = header(cfg);
    metadata["M"] = json!(cfg.paths);
    metadata["seed"] = json!(cfg.seed);
    metadata["mode"] = json!(mode);
    metadata["integrand"] = json!(text);
    metadata["upto"] = json!(cfg.upto);
    metadata["eps"] = json!(eps);
    metadata["method"] = json!(x.info().method);
    metadata["jitter"] = json!(x.info().jitter);
    let out = json!({
        "mean": est.mean,
        "std_error": est.std_error,
        "M": est.samples,
        "metadata": metadata,
    });
    match &cfg.json {
        Some(path) => write_json(path, &out)?,
        None => print_json(&out),
    }
    Ok(())
}

fn suites_for(cfg: &RunConfig) -> Vec<&'static str> {
    match cfg.suite.as_deref().unwrap_or("all") {
        "qv" => vec!["qv"],
        "ito" => vec!["ito"],
        "gamma" => vec!["gamma"],
        "chaos" => vec!["chaos"],
        "quasihelix" => vec!["quasihelix"],
        _ => {
            let mut all = vec!["gamma", "qv", "ito", "chaos"];
            if matches!(cfg.kernel.family(), Family::Bifbm { .. }) {
                all.push("quasihelix");
            }
            all
        }
    }
}

fn run_suite(cfg: &RunConfig, suite: &str) -> Result<Report, Failure> {
    let tol = &cfg.tolerances;
    Ok(match suite {
        "gamma" => gamma_decomposition_report(&cfg.kernel, &cfg.grid, tol)?,
        "qv" => {
            let eps = cfg.eps.clone().unwrap_or_else(|| default_eps(&cfg.grid));
            if eps.is_empty() {
                return Err(Failure::Config("no admissible eps for this grid".into()));
            }
            qv_report_on(&cfg.kernel, &ensemble(cfg)?, &eps, tol)?
        }
        "ito" => ito_suite(&cfg.kernel, &cfg.scan, cfg.paths, cfg.seed)?,
        "chaos" => chaos_report(&cfg.kernel, &cfg.grid, cfg.paths, cfg.seed, &cfg.chaos, tol)?,
        _ => quasi_helix_report(&cfg.kernel, &cfg.grid)?,
    })
}

pub fn verify(cfg: &RunConfig) -> Outcome {
    let mut reports = Vec::new();
    for suite in suites_for(cfg) {
        let r = run_suite(cfg, suite)?;
        for line in r.summary_lines() {
            println!("{line}");
        }
        if let Some(dir) = &cfg.plotdata {
            r.write_plotdata(dir)?;
        }
        reports.push(r);
    }
    if let Some(path) = &cfg.json {
        if reports.len() == 1 {
            write_json(path, &reports[0])?;
        } else {
            write_json(path, &reports)?;
        }
    }
    if matches!(cfg.kernel.bifbm_regime(), Some(BifbmRegime::Critical)) {
        println!("note: 2HK = 1 within tolerance, critical bifractional regime");
    }
    if reports.iter().all(Report::passed) {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

/// Prints the checks stored in a JSON report written by `verify --json`.
pub fn report(path: &Path) -> Outcome {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column())))?;
    let reports = match value {
        Value::Array(v) => v,
        single => vec![single],
    };
    let mut ok = true;
    for r in &reports {
        let suite = r["suite"].as_str().unwrap_or("?");
        let kernel = r["kernel"].as_str().unwrap_or("?");
        let checks = r["checks"]
            .as_array()
            .ok_or_else(|| Failure::Config(format!("{}: not a verification report", path.display())))?;
        for c in checks {
            let pass = c["pass"].as_bool().unwrap_or(false);
            let hard = c["hard"].as_bool().unwrap_or(true);
            ok &= pass || !hard;
            let status = if pass { "PASS" } else if hard { "FAIL" } else { "INFO" };
            println!(
                "[{suite}:{kernel}] {status} {}: {} (reference {} ± {})",
                c["name"].as_str().unwrap_or("?"),
                c["value"],
                c["reference"],
                c["tolerance"]
            );
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}
