//! The solve / geodesic / verify commands and their on-disk outputs.

use std::fs;
use std::path::{Path, PathBuf};

use donaldson::grid::dnfd;
use donaldson::verify;
use donaldson::{eps_sweep, solve_continuation, BarrierSpec, Field};

use crate::config::{ConfigError, LoadedRun, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER_FAILURE: i32 = 1;
pub const EXIT_VERIFY_FAILURE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

fn fail_usage(msg: impl std::fmt::Display) -> i32 {
    eprintln!("{msg}");
    EXIT_USAGE
}

fn load_run(config_path: &Path, out_override: Option<&Path>) -> Result<LoadedRun, ConfigError> {
    let cfg = RunConfig::load(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let mut run = cfg.realize(base)?;
    if let Some(dir) = out_override {
        run.config.output.dir = dir.to_path_buf();
    }
    Ok(run)
}

fn ensure_out_dir(run: &LoadedRun) -> Result<PathBuf, String> {
    let dir = run.config.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    Ok(dir)
}

fn write_dump(path: &Path, field: &Field) -> Result<(), String> {
    let mut file =
        fs::File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    dnfd::write_field(&mut file, field).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn barrier_spec_for(
    run: &LoadedRun,
    f: &Field,
) -> Result<(BarrierSpec, f64), donaldson::SolverError> {
    let a = match run.solver.barrier_amplitude {
        Some(a) => a,
        None => donaldson::choose_barrier_a(f, &run.phi0, &run.phi1)?,
    };
    let spec = BarrierSpec::new(a, run.phi0.clone(), run.phi1.clone())?;
    Ok((spec, a))
}

pub fn cmd_solve(config_path: &Path, out_override: Option<&Path>) -> i32 {
    let run = match load_run(config_path, out_override) {
        Ok(run) => run,
        Err(e) => return fail_usage(e),
    };
    let Some(f) = run.rhs.clone() else {
        return fail_usage("config error: problem.rhs is required by `solve`");
    };
    let out_dir = match ensure_out_dir(&run) {
        Ok(d) => d,
        Err(e) => return fail_usage(e),
    };

    let (phi, mut report) = match solve_continuation(&f, &run.phi0, &run.phi1, &run.solver) {
        Ok(pair) => pair,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return EXIT_SOLVER_FAILURE;
        }
    };

    let spec = BarrierSpec::new(report.barrier_amplitude, run.phi0.clone(), run.phi1.clone())
        .expect("endpoints were validated at load");
    let summary = verify::standard_checks(&phi, &f, &spec);
    let verified = summary.pass();
    report.verification = Some(summary.clone());

    if run.config.output.write_dumps {
        if let Err(e) = write_dump(&out_dir.join("solution.dnfd"), &phi) {
            return fail_usage(e);
        }
    }
    if let Err(e) = write_text(&out_dir.join("report.txt"), &report.to_string()) {
        return fail_usage(e);
    }
    if run.config.output.write_csv {
        if let Err(e) = write_text(&out_dir.join("verification.csv"), &summary.to_csv()) {
            return fail_usage(e);
        }
    }
    if let Err(e) = write_text(&out_dir.join("run_config.toml"), &run.config.to_toml()) {
        return fail_usage(e);
    }

    println!(
        "solve: s=1 reached in {} stages, final residual {:e}",
        report.steps.len(),
        report.final_residual
    );
    print!("{summary}");
    if verified {
        println!("verification: PASS");
        EXIT_OK
    } else {
        println!("verification: FAIL");
        EXIT_VERIFY_FAILURE
    }
}

pub fn cmd_geodesic(
    config_path: &Path,
    eps: Option<f64>,
    eps_list: Option<Vec<f64>>,
    out_override: Option<&Path>,
) -> i32 {
    let eps_values: Vec<f64> = match (eps, eps_list) {
        (Some(e), None) => vec![e],
        (None, Some(list)) if !list.is_empty() => list,
        _ => {
            return fail_usage(
                "usage: donaldson geodesic --config PATH (--eps X | --eps-list X,Y,...) [--out DIR]",
            )
        }
    };
    if let Some(bad) = eps_values.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return fail_usage(format!("config error: eps must be positive, got {bad}"));
    }
    let run = match load_run(config_path, out_override) {
        Ok(run) => run,
        Err(e) => return fail_usage(e),
    };
    let out_dir = match ensure_out_dir(&run) {
        Ok(d) => d,
        Err(e) => return fail_usage(e),
    };

    let table = eps_sweep(&run.phi0, &run.phi1, &eps_values, &run.solver);
    if let Err(e) = write_text(&out_dir.join("sweep.csv"), &table.to_csv()) {
        return fail_usage(e);
    }
    if let Err(e) = write_text(&out_dir.join("run_config.toml"), &run.config.to_toml()) {
        return fail_usage(e);
    }

    let mut any_failed = false;
    let mut all_verified = true;
    for (i, entry) in table.entries.iter().enumerate() {
        match &entry.result {
            Ok(res) => {
                let f = Field::from_fn(run.grid, |_, _| entry.eps);
                let spec = BarrierSpec::new(
                    res.report.barrier_amplitude,
                    run.phi0.clone(),
                    run.phi1.clone(),
                )
                .expect("endpoints were validated at load");
                let summary = verify::standard_checks(res.path.field(), &f, &spec);
                all_verified &= summary.pass();
                let mut report = res.report.clone();
                report.verification = Some(summary.clone());
                if run.config.output.write_dumps {
                    if let Err(e) =
                        write_dump(&out_dir.join(format!("eps_{i}.dnfd")), res.path.field())
                    {
                        return fail_usage(e);
                    }
                }
                if let Err(e) = write_text(
                    &out_dir.join(format!("eps_{i}_report.txt")),
                    &report.to_string(),
                ) {
                    return fail_usage(e);
                }
                if run.config.output.write_csv {
                    if let Err(e) = write_text(
                        &out_dir.join(format!("eps_{i}_verification.csv")),
                        &summary.to_csv(),
                    ) {
                        return fail_usage(e);
                    }
                }
                println!(
                    "geodesic eps={:e}: energy={} length={} residual={:e}",
                    entry.eps, res.energy, res.length, res.report.final_residual
                );
            }
            Err(e) => {
                any_failed = true;
                eprintln!("geodesic eps={:e} failed: {e}", entry.eps);
            }
        }
    }
    if any_failed {
        EXIT_SOLVER_FAILURE
    } else if !all_verified {
        EXIT_VERIFY_FAILURE
    } else {
        EXIT_OK
    }
}

pub fn cmd_verify(
    suite: &str,
    trials: usize,
    seed: Option<u64>,
    dump: Option<&Path>,
    config_path: Option<&Path>,
) -> i32 {
    match suite {
        "lemmas" => cmd_verify_lemmas(trials, seed),
        "solution" => {
            let (Some(dump), Some(config_path)) = (dump, config_path) else {
                return fail_usage(
                    "usage: donaldson verify --suite solution <dump.dnfd> <config.toml>",
                );
            };
            cmd_verify_solution(dump, config_path, seed)
        }
        other => fail_usage(format!("unknown suite `{other}`; expected `lemmas` or `solution`")),
    }
}

fn cmd_verify_lemmas(trials: usize, seed: Option<u64>) -> i32 {
    let seed = seed.unwrap_or(0);
    if trials == 0 {
        eprintln!("warning: --trials 0 makes every suite vacuous");
    }
    let mut all_pass = true;
    for report in verify::lemma_suites(seed, trials) {
        println!("{report}");
        all_pass &= report.pass;
    }
    if all_pass {
        EXIT_OK
    } else {
        EXIT_SOLVER_FAILURE
    }
}

fn cmd_verify_solution(dump: &Path, config_path: &Path, seed: Option<u64>) -> i32 {
    let _ = seed; // solution checks are deterministic
    let run = match load_run(config_path, None) {
        Ok(run) => run,
        Err(e) => return fail_usage(e),
    };
    let Some(f) = run.rhs.clone() else {
        return fail_usage("config error: problem.rhs is required to verify a solution");
    };
    let phi = match fs::File::open(dump)
        .map_err(|e| format!("cannot open {}: {e}", dump.display()))
        .and_then(|mut file| {
            dnfd::read_field(&mut file).map_err(|e| format!("{}: {e}", dump.display()))
        }) {
        Ok(phi) => phi,
        Err(e) => return fail_usage(e),
    };
    if phi.grid() != run.grid {
        return fail_usage("config error: dump grid does not match the run grid");
    }
    let (spec, _) = match barrier_spec_for(&run, &f) {
        Ok(pair) => pair,
        Err(e) => return fail_usage(format!("config error: {e}")),
    };
    match verify::solution_suite(&phi, &f, &spec, &run.solver) {
        Ok(summary) => {
            print!("{summary}");
            if summary.pass() {
                EXIT_OK
            } else {
                EXIT_SOLVER_FAILURE
            }
        }
        Err(e) => {
            eprintln!("solver failure during uniqueness re-solve: {e}");
            EXIT_SOLVER_FAILURE
        }
    }
}
