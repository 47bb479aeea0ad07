use std::fs;
use std::path::Path;
use std::time::Instant;

use hdmt_core::harness::{self, ConvergenceEstimator, Execution, Format, SimConfig, SimMode};
use hdmt_core::oracle::{self, ORACLE_SOFT_LIMIT};
use hdmt_core::{reference_tests, Error, EstimatorKind, TestName, TestOptions, TestOutcome};
use serde::Serialize;
use serde_json::json;

use crate::input::{read_csv, Input};
use crate::CliError;

const SEED_ENV: &str = "HDMT_SEED";

const DEGENERATE_POLICY: &str = "a replication whose statistic cannot be standardised (non-positive variance \
     estimate, zero within-group variance, non-positive denominator) is counted in the `degenerate` column and \
     left out of that test's rejection rate";

impl Input {
    /// Rewrites coordinate indices into column names.
    fn explain(&self, e: Error) -> CliError {
        match e {
            Error::SingularScale { coordinate } => {
                let mut err = CliError::from(e);
                err.message = format!("{} has zero within-group variance", self.column(coordinate));
                err
            }
            other => other.into(),
        }
    }
}

#[derive(Serialize)]
struct TestReport<'a> {
    test: &'a str,
    statistic: f64,
    std_err: f64,
    z: f64,
    p_value: f64,
    alpha: f64,
    reject: bool,
    estimator: Option<&'a str>,
    k: usize,
    p: usize,
    n: Vec<usize>,
}

pub fn test(
    path: &Path,
    alpha: f64,
    estimator: EstimatorKind,
    test: TestName,
    json: bool,
    no_header: bool,
) -> Result<(), CliError> {
    let options = TestOptions::new(alpha, estimator)?;
    let input = read_csv(path, no_header)?;
    let ds = &input.dataset;
    let outcome: TestOutcome = match test {
        TestName::Our => hdmt_core::test_equal_means(ds, options),
        TestName::Sk => reference_tests::t_sk(ds, alpha),
        TestName::Bs | TestName::Cq => {
            if ds.k() != 2 {
                return Err(CliError::data(format!(
                    "--test {} needs exactly 2 groups, found {}",
                    test.as_str(),
                    ds.k()
                )));
            }
            let g = ds.groups();
            if test == TestName::Bs {
                reference_tests::t_bs(&g[0], &g[1], alpha)
            } else {
                reference_tests::t_cq(&g[0], &g[1], alpha)
            }
        }
    }
    .map_err(|e| input.explain(e))?;

    let report = TestReport {
        test: outcome.test.as_str(),
        statistic: outcome.statistic,
        std_err: outcome.std_err,
        z: outcome.z,
        p_value: outcome.p_value,
        alpha: outcome.alpha,
        reject: outcome.reject,
        estimator: outcome.estimator.map(EstimatorKind::as_str),
        k: ds.k(),
        p: ds.p(),
        n: ds.sizes(),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
        return Ok(());
    }
    let sizes: Vec<String> = ds.groups().iter().map(|g| format!("{}: {}", g.label(), g.n())).collect();
    println!("test        {}", report.test);
    if let Some(e) = report.estimator {
        println!("estimator   {e}");
    }
    println!("groups      {} ({})", report.k, sizes.join(", "));
    println!("dimension   {}", report.p);
    println!("statistic   {}", report.statistic);
    println!("std_err     {}", report.std_err);
    println!("z           {}", report.z);
    println!("p_value     {} (one-sided, upper tail)", report.p_value);
    let verdict = if report.reject { "reject H0" } else { "do not reject H0" };
    println!("decision    {verdict} at alpha = {}", report.alpha);
    Ok(())
}

pub enum EstimateKind {
    Closed(EstimatorKind),
    /// Distribution-free estimators by enumeration; `force` lifts the size cap.
    Oracle {
        force: bool,
    },
}

#[derive(Serialize)]
struct SquareEstimate<'a> {
    group: &'a str,
    estimate: f64,
}

#[derive(Serialize)]
struct CrossEstimate<'a> {
    first: &'a str,
    second: &'a str,
    estimate: f64,
}

pub fn estimate(path: &Path, kind: EstimateKind, json: bool, no_header: bool) -> Result<(), CliError> {
    let input = read_csv(path, no_header)?;
    let ds = &input.dataset;
    let groups = ds.groups();
    let k = ds.k();
    let (label, tr_sq, tr_cross) = match kind {
        EstimateKind::Closed(kind) => {
            let est = hdmt_core::estimate_traces(ds, kind)?;
            let cross = pairs(k).map(|(i, j)| est.cross(i, j)).collect::<Vec<_>>();
            (kind.as_str(), est.tr_sq, cross)
        }
        EstimateKind::Oracle { force } => {
            let largest = groups.iter().max_by_key(|g| g.n()).expect("at least two groups");
            if largest.n() > ORACLE_SOFT_LIMIT && !force {
                return Err(CliError::data(format!(
                    "--oracle enumerates O(n^6) tuples and group `{}` has n = {} (limit {ORACLE_SOFT_LIMIT}); pass --force to run it anyway",
                    largest.label(),
                    largest.n()
                )));
            }
            let sq = groups.iter().map(oracle::tr_sq_une_direct).collect::<Result<Vec<_>, _>>()?;
            let cross = pairs(k)
                .map(|(i, j)| oracle::tr_cross_une_direct(&groups[i], &groups[j]))
                .collect::<Result<Vec<_>, _>>()?;
            ("une_direct", sq, cross)
        }
    };

    let squares: Vec<SquareEstimate> =
        groups.iter().zip(&tr_sq).map(|(g, &estimate)| SquareEstimate { group: g.label(), estimate }).collect();
    let crosses: Vec<CrossEstimate> = pairs(k)
        .zip(&tr_cross)
        .map(|((i, j), &estimate)| CrossEstimate { first: groups[i].label(), second: groups[j].label(), estimate })
        .collect();
    if json {
        let doc = json!({
            "kind": label,
            "k": k,
            "p": ds.p(),
            "n": ds.sizes(),
            "tr_sq": squares,
            "tr_cross": crosses,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("estimates serialise"));
        return Ok(());
    }
    println!("kind {label}, k = {k}, p = {}", ds.p());
    println!("quantity\tgroups\testimate");
    for s in &squares {
        println!("tr_sq\t{}\t{}", s.group, s.estimate);
    }
    for c in &crosses {
        println!("tr_cross\t{},{}\t{}", c.first, c.second, c.estimate);
    }
    Ok(())
}

fn pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

pub fn quantile(alpha: f64) -> Result<(), CliError> {
    println!("{}", hdmt_core::normal_upper_quantile(alpha)?);
    Ok(())
}

#[derive(Clone, Copy)]
pub enum SimulateMode {
    Asl,
    Power,
    Convergence,
}

impl SimulateMode {
    fn as_str(self) -> &'static str {
        match self {
            Self::Asl => "asl",
            Self::Power => "power",
            Self::Convergence => "convergence",
        }
    }
}

fn load_config(path: &Path, full_grid: bool) -> Result<(SimConfig, &'static str), CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read `{}`: {e}", path.display())))?;
    let mut cfg = SimConfig::from_json(&text)?;
    if full_grid {
        cfg = cfg.full_grid();
    }
    let mut source = "config";
    if let Ok(raw) = std::env::var(SEED_ENV) {
        cfg.master_seed = parse_seed(&raw)
            .ok_or_else(|| CliError::data(format!("{SEED_ENV}: `{raw}` is not an unsigned 64-bit integer")))?;
        source = SEED_ENV;
    }
    Ok((cfg, source))
}

fn parse_seed(raw: &str) -> Option<u64> {
    let raw = raw.trim().replace('_', "");
    match raw.strip_prefix("0x").or_else(|| raw.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => raw.parse().ok(),
    }
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<String>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(format!("cannot write `{}`: {e}", path.display())))?;
    written.push(name.to_string());
    Ok(())
}

pub fn simulate(
    mode: SimulateMode,
    config: &Path,
    threads: Option<usize>,
    out: &Path,
    full_grid: bool,
) -> Result<(), CliError> {
    let (cfg, seed_source) = load_config(config, full_grid)?;
    match mode {
        SimulateMode::Convergence => cfg.validate_convergence()?,
        _ => cfg.validate()?,
    }
    let exec = Execution::from_threads(threads.or(cfg.threads));
    fs::create_dir_all(out).map_err(|e| CliError::io(format!("cannot create `{}`: {e}", out.display())))?;

    let started = Instant::now();
    let mut written = Vec::new();
    match mode {
        SimulateMode::Asl | SimulateMode::Power => {
            let sim_mode = if matches!(mode, SimulateMode::Asl) { SimMode::Asl } else { SimMode::Power };
            let run = harness::run(&cfg, sim_mode, exec)?;
            let name = mode.as_str();
            write(out, &format!("{name}.csv"), &harness::emit_table(&run, Format::Csv)?, &mut written)?;
            let md = harness::emit_table(&run, Format::Markdown)?;
            write(out, &format!("{name}.md"), &md, &mut written)?;
            print!("{md}");
        }
        SimulateMode::Convergence => {
            let series = harness::run_estimator_convergence(&cfg, exec)?;
            for est in ConvergenceEstimator::ALL {
                let csv = harness::emit_convergence(&series, est, Format::Csv)?;
                write(out, &format!("convergence_{}.csv", est.as_str()), &csv, &mut written)?;
                println!("{}", est.as_str());
                print!("{}", harness::emit_convergence(&series, est, Format::Markdown)?);
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();

    let metadata = json!({
        "mode": mode.as_str(),
        "config": cfg,
        "master_seed": cfg.master_seed,
        "seed_source": seed_source,
        "threads": exec.threads(),
        "parallel_feature": cfg!(feature = "parallel"),
        "hdmt_version": env!("CARGO_PKG_VERSION"),
        "wall_time_seconds": elapsed,
        "degenerate_policy": DEGENERATE_POLICY,
        "outputs": written,
    });
    write(
        out,
        "run_metadata.json",
        &serde_json::to_string_pretty(&metadata).expect("metadata serialises"),
        &mut Vec::new(),
    )?;
    eprintln!("hdmt: wrote {} files to {} in {elapsed:.1}s", written.len() + 1, out.display());
    Ok(())
}
