//! Subcommands. Reports go to stdout; failures come back as [`CliError`]
//! carrying the exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use ddmpc::consistency::{build_pi_blocks, sample_consistent_with, SamplerOptions};
use ddmpc::controller::{run_closed_loop, summarize, ClosedLoopRun, RunSummary};
use ddmpc::cstr;
use ddmpc::io;
use ddmpc::lti::{generate_dataset, uniform_inputs, DataSet, NoiseModel};
use ddmpc::synthesis::{self, CostWeights};
use ddmpc::verify::{
    boundary_states, check_constraint_bounds, check_cost_bound, check_decrease, check_initial, check_rpi,
    VerificationReport,
};

use crate::certificate::CertificateFile;
use crate::config::{Config, VerifyConfig};
use crate::error::{io_err, CliError};
use crate::plot;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bands applied to the `R = 1e-4` runs of the benchmark.
pub const NOISE_FREE_BAND: (f64, f64) = (0.03, 0.047);
pub const NOISY_BAND: (f64, f64) = (0.031, 0.055);
pub const NOISE_FREE_FINAL_NORM: f64 = 1e-3;
pub const NOISY_FINAL_NORM: f64 = 0.02;
const CONSTRAINT_SLACK: f64 = 1.0 + 1e-8;

/// Key-value metadata: artifact version and invocation, then the fully
/// resolved config. Loadable again with `--config`.
pub fn metadata(cfg: &Config, command: &str) -> String {
    format!(
        "artifact_version = {ARTIFACT_VERSION:?}\ncommand = {command:?}\n\n{}",
        cfg.to_toml()
    )
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Offline experiment from the config; inputs and noise share one stream
/// seeded by `data.seed`.
pub fn generate(cfg: &Config) -> Result<DataSet, CliError> {
    let d = &cfg.data;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let u = uniform_inputs(cfg.system.m(), d.length, d.input_range.0, d.input_range.1, &mut rng);
    Ok(generate_dataset(&cfg.system, &d.x0, &u, &d.noise_model(), &mut rng)?)
}

fn read_data(path: &Path, eps: f64) -> Result<DataSet, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    io::parse_dataset(&text, eps).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Data from `path`, or generated from the config when absent.
pub fn load_data(cfg: &Config, path: Option<&Path>) -> Result<DataSet, CliError> {
    let Some(path) = path else {
        return generate(cfg);
    };
    let data = read_data(path, cfg.data.eps)?;
    if data.n() != cfg.system.n() || data.m() != cfg.system.m() {
        return Err(CliError::Config(format!(
            "{}: data has n = {}, m = {} but the configured plant has n = {}, m = {}",
            path.display(),
            data.n(),
            data.m(),
            cfg.system.n(),
            cfg.system.m()
        )));
    }
    Ok(data)
}

pub fn generate_data(cfg: &Config, out: &Path, command: &str) -> Result<(), CliError> {
    let data = generate(cfg)?;
    write_file(out, &io::write_dataset(&data))?;
    let meta = out.with_extension("meta");
    write_file(&meta, &metadata(cfg, command))?;
    println!(
        "wrote {} ({} states, {} inputs) and {}",
        out.display(),
        data.len() + 1,
        data.len(),
        meta.display()
    );
    Ok(())
}

fn fmt_vec(v: &DVector<f64>) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
    format!("[{}]", items.join(", "))
}

pub fn synthesize(cfg: &Config, data: &DataSet, certificate: Option<&Path>) -> Result<(), CliError> {
    let x_t = &cfg.controller.x0;
    let blocks = build_pi_blocks(data);
    let res = synthesis::synthesize(x_t, &blocks, &cfg.weights, &cfg.constraints, &cfg.synthesis)?;
    println!("x_t         : {}", fmt_vec(x_t));
    print!("{}", res.report());
    if !res.is_optimal() {
        return Err(CliError::Infeasible(format!(
            "synthesis at x_t = {} returned status {}",
            fmt_vec(x_t),
            res.status
        )));
    }
    if let Some(path) = certificate {
        CertificateFile::new(
            &res,
            x_t,
            data.eps(),
            &cfg.weights,
            &cfg.constraints,
            &cfg.synthesis.state_form.to_string(),
            cfg.constraints_enabled,
        )
        .write(path)?;
        println!("certificate : {}", path.display());
    }
    Ok(())
}

/// Runs the closed loop; on loss of feasibility the step log up to the
/// failure is written to `dir` before the error is returned.
fn execute(cfg: &Config, data: &DataSet, dir: Option<&Path>) -> Result<ClosedLoopRun, CliError> {
    let mpc = cfg.mpc_config(data.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.controller.seed);
    match run_closed_loop(&cfg.system, &cfg.controller.x0, &mpc, &mut rng) {
        Ok(run) => Ok(run),
        Err(e) => {
            if let (ddmpc::Error::RecursiveFeasibility { log, .. }, Some(dir)) = (&e, dir) {
                write_file(&dir.join("steps.csv"), log)?;
            }
            Err(e.into())
        }
    }
}

fn write_run(cfg: &Config, run: &ClosedLoopRun, dir: &Path, command: &str) -> Result<RunSummary, CliError> {
    let summary = summarize(run);
    let traj = io::write_trajectory_vecs(&run.states, &run.inputs, cfg.system.n(), cfg.system.m())?;
    write_file(&dir.join("trajectory.csv"), &traj)?;
    write_file(&dir.join("steps.csv"), &run.step_log_csv())?;
    write_file(&dir.join("summary.txt"), &summary.to_string())?;
    write_file(&dir.join("metadata.txt"), &metadata(cfg, command))?;
    Ok(summary)
}

fn with_input_weight(cfg: &Config, r: f64) -> Result<Config, CliError> {
    let mut c = cfg.clone();
    let m = cfg.system.m();
    c.weights = CostWeights::new(cfg.weights.q().clone(), DMatrix::identity(m, m) * r)
        .map_err(|e| CliError::Config(format!("--r {r}: {e}")))?;
    Ok(c)
}

fn r_label(r: f64) -> String {
    format!("r_{r:e}")
}

/// One run in `out_dir`, or one subdirectory per input weight `R = r·I`.
pub fn simulate(cfg: &Config, data: &DataSet, out_dir: &Path, r_values: &[f64], command: &str) -> Result<(), CliError> {
    let runs: Vec<(String, PathBuf, Config)> = if r_values.is_empty() {
        vec![("run".into(), out_dir.to_path_buf(), cfg.clone())]
    } else {
        r_values
            .iter()
            .map(|&r| {
                Ok((
                    format!("R = {r:e}"),
                    out_dir.join(r_label(r)),
                    with_input_weight(cfg, r)?,
                ))
            })
            .collect::<Result<_, CliError>>()?
    };
    let mut plotted = Vec::new();
    for (label, dir, c) in &runs {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let run = execute(c, data, Some(dir))?;
        let summary = write_run(c, &run, dir, command)?;
        println!("== {label} ({})", dir.display());
        print!("{summary}");
        let rel = dir.strip_prefix(out_dir).unwrap_or(dir);
        let rel = if rel.as_os_str().is_empty() {
            ".".to_string()
        } else {
            rel.display().to_string()
        };
        plotted.push((label.clone(), rel));
    }
    write_file(&out_dir.join("plot.py"), &plot::script(&plotted, &cfg.constraints))?;
    println!("plot script : {}", out_dir.join("plot.py").display());
    Ok(())
}

fn dimension_err(what: &str, expected: String, actual: String) -> CliError {
    CliError::Config(format!("{what}: expected {expected}, got {actual}"))
}

pub fn verify(vcfg: &VerifyConfig, certificate: &Path, data_path: &Path) -> Result<(), CliError> {
    let cert = CertificateFile::read(certificate)?;
    let data = read_data(data_path, cert.eps)?;
    let (n, m) = (data.n(), data.m());
    let weights = cert.weights()?;
    if weights.n() != n || weights.m() != m {
        return Err(dimension_err(
            "certificate weights",
            format!("Q {n}x{n} and R {m}x{m} to match the data"),
            format!("Q {0}x{0} and R {1}x{1}", weights.n(), weights.m()),
        ));
    }
    let cons = cert.constraints()?;
    if cons.s_u().nrows() != m || cons.s_x().nrows() != n {
        return Err(dimension_err(
            "certificate constraints",
            format!("S_u {m}x{m} and S_x {n}x{n}"),
            format!("S_u {0}x{0} and S_x {1}x{1}", cons.s_u().nrows(), cons.s_x().nrows()),
        ));
    }
    if cert.x_t.len() != n {
        return Err(dimension_err(
            "certificate x_t",
            format!("{n} entries"),
            format!("{}", cert.x_t.len()),
        ));
    }
    let x_t = DVector::from_column_slice(&cert.x_t);

    let mut report = VerificationReport::default();
    if cert.at_origin {
        report.note("x_t is at the origin: gamma = 0 and there is nothing to certify");
        print!("{report}\n{}", report.summary());
        return Ok(());
    }
    let missing = |what: &str| CliError::Config(format!("certificate has no {what} (status {})", cert.status));
    let f = cert.gain()?.ok_or_else(|| missing("gain f"))?;
    let p = cert.lyapunov()?.ok_or_else(|| missing("Lyapunov matrix p"))?;
    if f.shape() != (m, n) {
        return Err(dimension_err(
            "certificate f",
            format!("{m}x{n}"),
            format!("{}x{}", f.nrows(), f.ncols()),
        ));
    }
    if p.shape() != (n, n) {
        return Err(dimension_err(
            "certificate p",
            format!("{n}x{n}"),
            format!("{}x{}", p.nrows(), p.ncols()),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(vcfg.seed);
    let opts = SamplerOptions {
        count: vcfg.samples,
        kind: vcfg.sampler,
        ..SamplerOptions::default()
    };
    let samples = sample_consistent_with(&data, &opts, &mut rng);
    if samples.pairs.is_empty() {
        return Err(CliError::Verification(
            "no consistent system could be sampled from the data".into(),
        ));
    }
    if samples.singleton {
        report.note("singleton consistency set: the data determine (A, B) exactly; one system checked");
    } else if samples.undersampled {
        report.note(format!(
            "undersampled: {} of {} systems",
            samples.pairs.len(),
            vcfg.samples
        ));
    }
    report.note(format!(
        "sampler {}, {} systems, seed {}",
        vcfg.sampler,
        samples.pairs.len(),
        vcfg.seed
    ));

    let gamma = cert.gamma;
    report.push(check_initial(&p, gamma, &x_t));
    report.push(check_decrease(&f, &p, &weights, &samples.pairs));
    let states = boundary_states(&p, gamma, vcfg.boundary_states, &mut rng);
    report.push(check_rpi(&f, &p, gamma, &samples.pairs, &states, vcfg.rpi_depth));
    report.push(check_cost_bound(
        &f,
        gamma,
        &x_t,
        &samples.pairs,
        &weights,
        vcfg.max_horizon,
    ));
    if cert.constraints_enabled {
        let [input, state] = check_constraint_bounds(&f, &p, gamma, &cons);
        report.push(input);
        if cons.has_state_constraint() {
            report.push(state);
        }
    }
    print!("{report}\n{}", report.summary());
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Verification(format!(
            "{} failed verification",
            certificate.display()
        )))
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    seed: u64,
    r: f64,
    noisy: bool,
}

struct JobResult {
    job: Job,
    outcome: Result<RunSummary, String>,
}

fn in_band(v: f64, band: (f64, f64)) -> bool {
    band.0 <= v && v <= band.1
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Benchmark protocol for seeds `first..first + count`: both input weights,
/// noise-free and noisy closed loops, each on the data of its seed.
pub fn reproduce_cstr(
    base: &Config,
    first: u64,
    count: u64,
    out_dir: Option<&Path>,
    command: &str,
) -> Result<(), CliError> {
    if base.preset.as_deref() != Some("cstr") {
        return Err(CliError::Config("reproduce-cstr needs the cstr plant preset".into()));
    }
    let online_eps = if base.controller.online_noise.eps > 0.0 {
        base.controller.online_noise.eps
    } else {
        cstr::NOISE_BOUND
    };
    let jobs: Vec<Job> = (first..first + count)
        .flat_map(|seed| {
            cstr::r_values()
                .into_iter()
                .flat_map(move |r| [false, true].map(|noisy| Job { seed, r, noisy }))
        })
        .collect();

    let results: Vec<JobResult> = jobs
        .par_iter()
        .map(|&job| {
            let outcome = (|| {
                let mut cfg = with_input_weight(base, job.r)?;
                cfg.data.seed = job.seed;
                cfg.controller.seed = job.seed.wrapping_add(1);
                cfg.controller.online_noise = if job.noisy {
                    NoiseModel::new(online_eps, base.controller.online_noise.distribution)?
                } else {
                    NoiseModel::zero()
                };
                let data = generate(&cfg)?;
                let dir = out_dir.map(|d| {
                    d.join(format!("seed_{}", job.seed)).join(format!(
                        "{}_{}",
                        r_label(job.r),
                        if job.noisy { "noisy" } else { "clean" }
                    ))
                });
                let run = execute(&cfg, &data, dir.as_deref())?;
                match &dir {
                    Some(d) => write_run(&cfg, &run, d, command),
                    None => Ok(summarize(&run)),
                }
            })()
            .map_err(|e: CliError| e.to_string());
            JobResult { job, outcome }
        })
        .collect();

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:>5} {:>8} {:>6} {:>12} {:>12} {:>9} {:>9} {:>11}  outcome",
        "seed", "R", "noise", "total cost", "gamma_0", "max|u|Su", "max|x|Sx", "final |x|"
    );
    for res in &results {
        let j = res.job;
        let noise = if j.noisy { "noisy" } else { "clean" };
        match &res.outcome {
            Ok(s) => {
                let _ = writeln!(
                    text,
                    "{:>5} {:>8.0e} {:>6} {:>12.6} {:>12.6} {:>9.4} {:>9.4} {:>11.3e}  {}",
                    j.seed,
                    j.r,
                    noise,
                    s.total_cost,
                    s.gamma0.unwrap_or(0.0),
                    s.max_input_norm,
                    s.max_state_norm,
                    s.final_state_norm,
                    s.outcome
                );
            }
            Err(e) => {
                let _ = writeln!(text, "{:>5} {:>8.0e} {:>6}  error: {e}", j.seed, j.r, noise);
            }
        }
    }

    let find = |seed: u64, noisy: bool| {
        results
            .iter()
            .find(|r| r.job.seed == seed && r.job.noisy == noisy && r.job.r == cstr::r_values()[1])
            .and_then(|r| r.outcome.as_ref().ok())
    };
    let constraints_ok = |s: &RunSummary| s.max_input_norm <= CONSTRAINT_SLACK && s.max_state_norm <= CONSTRAINT_SLACK;
    let mut all_pass = true;
    let mut clean_costs = Vec::new();
    let mut noisy_costs = Vec::new();
    let _ = writeln!(
        text,
        "\nR = 1e-4 against reported costs {} (noise-free) and {} (online noise):",
        cstr::REPORTED_COST_NOISE_FREE,
        cstr::REPORTED_COST_ONLINE_NOISE
    );
    for seed in first..first + count {
        let (Some(clean), Some(noisy)) = (find(seed, false), find(seed, true)) else {
            all_pass = false;
            let _ = writeln!(text, "seed {seed}: FAIL (a run did not complete)");
            continue;
        };
        clean_costs.push(clean.total_cost);
        noisy_costs.push(noisy.total_cost);
        let checks = [
            (
                format!(
                    "noise-free cost {:.4} in [{}, {}]",
                    clean.total_cost, NOISE_FREE_BAND.0, NOISE_FREE_BAND.1
                ),
                in_band(clean.total_cost, NOISE_FREE_BAND),
            ),
            (
                format!(
                    "noise-free final |x| {:.2e} <= {NOISE_FREE_FINAL_NORM:e}",
                    clean.final_state_norm
                ),
                clean.final_state_norm <= NOISE_FREE_FINAL_NORM,
            ),
            ("noise-free constraints".to_string(), constraints_ok(clean)),
            (
                format!(
                    "noisy cost {:.4} in [{}, {}]",
                    noisy.total_cost, NOISY_BAND.0, NOISY_BAND.1
                ),
                in_band(noisy.total_cost, NOISY_BAND),
            ),
            (
                format!("noisy final |x| {:.2e} <= {NOISY_FINAL_NORM}", noisy.final_state_norm),
                noisy.final_state_norm <= NOISY_FINAL_NORM,
            ),
            ("noisy constraints".to_string(), constraints_ok(noisy)),
            (
                "noisy cost >= noise-free cost".to_string(),
                noisy.total_cost >= clean.total_cost,
            ),
        ];
        for (what, ok) in checks {
            all_pass &= ok;
            let _ = writeln!(text, "seed {seed}: {} {what}", mark(ok));
        }
    }
    if clean_costs.len() > 1 {
        let _ = writeln!(text, "\ndispersion over {} seeds (R = 1e-4):", clean_costs.len());
        for (label, v) in [("noise-free", &clean_costs), ("noisy", &noisy_costs)] {
            let (mean, std) = mean_std(v);
            let min = v.iter().copied().fold(f64::INFINITY, f64::min);
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(
                text,
                "{label:>11}: mean {mean:.4}, std {std:.4}, min {min:.4}, max {max:.4}"
            );
        }
    }
    let _ = writeln!(text, "\noverall: {}", mark(all_pass));
    print!("{text}");

    if let Some(dir) = out_dir {
        write_file(&dir.join("report.txt"), &text)?;
        for seed in first..first + count {
            let seed_dir = format!("seed_{seed}");
            let runs: Vec<(String, String)> = jobs
                .iter()
                .filter(|j| j.seed == seed)
                .map(|j| {
                    let noise = if j.noisy { "noisy" } else { "clean" };
                    (format!("R = {:e}, {noise}", j.r), format!("{}_{noise}", r_label(j.r)))
                })
                .collect();
            write_file(
                &dir.join(&seed_dir).join("plot.py"),
                &plot::script(&runs, &base.constraints),
            )?;
        }
    }

    if let Some(err) = results.iter().find_map(|r| r.outcome.as_ref().err()) {
        return Err(CliError::Infeasible(format!("benchmark run failed: {err}")));
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Verification("benchmark outside its tolerance bands".into()))
    }
}
