use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use spingas::config::{load_config, RunConfig};
use spingas::critfit::{exclusion_sensitivity, susceptibility, three_step_fit, FitForm, FitResult, FitSpec, Weights};
use spingas::dynamics::{simulate, Point, ProjectionMode};
use spingas::error::{exit, Error, Result};
use spingas::io::write_atomic;
use spingas::optics::table2::{format_table, transition_probability_table};
use spingas::selftest::{run_suite, SuiteOptions};
use spingas::sweep::{self, extract_contour, Cut};
use spingas::VERSION;

#[derive(Parser)]
#[command(name = "spingas", version, about = "Mean-field spin-gas simulator and critical-exponent fitter")]
struct Cli {
    /// TOML run configuration (defaults when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "SPINGAS_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct PointArgs {
    /// I/Γ (overrides the config)
    #[arg(long = "i")]
    i: Option<f64>,
    /// J/Γ (overrides the config)
    #[arg(long = "j")]
    j: Option<f64>,
    #[arg(long)]
    seed: Option<f64>,
    #[arg(long, value_enum)]
    projection: Option<Projection>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Projection {
    HyperfineOnly,
    HyperfineZeeman,
}

#[derive(Subcommand)]
enum Command {
    /// Transition probabilities of the linearly polarized pump.
    Table2 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One parameter point: steady M, τ and the M(t) trajectory.
    Simulate {
        #[command(flatten)]
        point: PointArgs,
        /// H/Γ
        #[arg(long = "h")]
        h: Option<f64>,
        /// Trajectory CSV (t, M_z).
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Summary JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid sweep from the config's [sweep] block.
    Sweep {
        #[arg(long)]
        out: PathBuf,
        /// Full result (reloadable by `contour`).
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// Series along one grid line of a stored sweep (nearest grid line).
    Contour {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, group = "cut")]
        fixed_j: Option<f64>,
        #[arg(long, group = "cut")]
        fixed_i: Option<f64>,
        #[arg(long, group = "cut")]
        fixed_density: Option<f64>,
        #[arg(long, group = "cut")]
        fixed_power: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// χ = dM/dH at H = 0.
    Susceptibility {
        #[command(flatten)]
        point: PointArgs,
        /// Bias step in units of Γ.
        #[arg(long, default_value_t = 1e-5)]
        dh: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Power-law fit of a two-column series.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        form: Option<Form>,
        #[arg(long, value_enum)]
        weights: Option<WeightArg>,
        #[arg(long)]
        exclusion: Option<usize>,
        /// Abscissa column (0-based index or header name).
        #[arg(long, default_value = "0")]
        x_col: String,
        /// Ordinate column (0-based index or header name).
        #[arg(long, default_value = "1")]
        y_col: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        residuals: Option<PathBuf>,
        #[arg(long)]
        loglog: Option<PathBuf>,
    },
    /// Randomized density-matrix invariant suite.
    Selftest {
        #[arg(long, default_value_t = 100)]
        sets: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Form {
    Beta,
    Gamma,
    Delta,
    Znu,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum WeightArg {
    Uniform,
    InverseCube,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    match &cli.config {
        Some(p) => load_config(p).map_err(|e| match e {
            Error::Io(io) => Error::config(p.display().to_string(), io.to_string()),
            other => other,
        }),
        None => Ok(RunConfig::default()),
    }
}

fn header(cfg: &RunConfig) -> Result<serde_json::Value> {
    Ok(json!({
        "tool_version": VERSION,
        "config_hash": cfg.hash()?,
        "user_fields": cfg.user_fields(),
    }))
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn apply_point(cfg: &mut RunConfig, a: &PointArgs) {
    let p = &mut cfg.params;
    if let Some(i) = a.i {
        p.i_rate = i * p.gamma;
    }
    if let Some(j) = a.j {
        p.j_rate = j * p.gamma;
    }
    if let Some(s) = a.seed {
        p.seed = s;
    }
    if let Some(m) = a.projection {
        p.projection = match m {
            Projection::HyperfineOnly => ProjectionMode::HyperfineOnly,
            Projection::HyperfineZeeman => ProjectionMode::HyperfineZeeman,
        };
    }
}

fn csv_header(cfg: &RunConfig) -> Result<String> {
    Ok(format!("# spingas {VERSION}\n# config_hash {}\n", cfg.hash()?))
}

fn read_series(path: &Path, x_col: &str, y_col: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut names: Option<Vec<String>> = None;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let col = |spec: &str, names: &Option<Vec<String>>| -> Result<usize> {
        if let Ok(k) = spec.parse() {
            return Ok(k);
        }
        names
            .as_ref()
            .and_then(|n| n.iter().position(|c| c == spec))
            .ok_or_else(|| Error::InvalidArgument(format!("no column `{spec}`")))
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if row == 0 && rec.iter().any(|f| !f.is_empty() && f.parse::<f64>().is_err()) {
            names = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        let get = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Schema(format!("row {}: missing column {k}", row + 1)))?
                .parse()
                .map_err(|_| Error::Schema(format!("row {}: column {k} is not a number", row + 1)))
        };
        x.push(get(col(x_col, &names)?)?);
        y.push(get(col(y_col, &names)?)?);
    }
    Ok((x, y))
}

fn fit_tables(x: &[f64], y: &[f64], r: &FitResult) -> (String, String) {
    let p = r.params();
    let mut res = String::from("x,y,fit,residual,weight,used\n");
    let mut ll = String::from("log_reduced,log_y\n");
    for (k, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let f = r.form.eval(xi, &p);
        let used = !r.excluded.contains(&k);
        let _ = writeln!(res, "{xi},{yi},{f},{},{},{used}", yi - f, r.weights.at(xi));
        let reduced = match r.form {
            FitForm::Beta | FitForm::Znu => 1.0 - p[1] / xi,
            FitForm::Gamma => p[1] / xi - 1.0,
            FitForm::Delta => xi,
        };
        if reduced > 0.0 && yi > 0.0 {
            let _ = writeln!(ll, "{},{}", reduced.ln(), yi.ln());
        }
    }
    (res, ll)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = config(&cli)?;
    match &cli.command {
        Command::Table2 { out } => {
            let rows = transition_probability_table(&cfg.params.atom, &cfg.params.pump)?;
            let mut text = format_table(&rows);
            if out.is_some() {
                text = format!("# spingas {VERSION}\n{text}");
            }
            emit(out.as_deref(), text.as_bytes())
        }
        Command::Simulate {
            point,
            h,
            trajectory,
            out,
        } => {
            apply_point(&mut cfg, point);
            if let Some(h) = h {
                cfg.params = cfg.params.with_bias(*h);
            }
            let (sim, ss) = simulate(&Point::standalone(&cfg.params)?, &cfg.steady, 1.0)?;
            let summary = json!({ "manifest": header(&cfg)?, "params": cfg.params, "result": sim });
            let traj = trajectory
                .as_ref()
                .map(|_| -> Result<String> {
                    let mut s = csv_header(&cfg)?;
                    s.push_str("t_s,M_z\n");
                    for (t, m) in ss.trajectory.times.iter().zip(&ss.trajectory.magnetization) {
                        let _ = writeln!(s, "{t:e},{m:e}");
                    }
                    Ok(s)
                })
                .transpose()?;
            if let (Some(p), Some(t)) = (trajectory, traj) {
                write_atomic(p, t.as_bytes())?;
            }
            emit(out.as_deref(), &to_json(&summary)?)?;
            if !sim.converged {
                return Err(Error::NotConverged {
                    t_max: cfg.steady.t_max,
                    last_m: sim.m_ss,
                });
            }
            Ok(())
        }
        Command::Sweep { out, json, gnuplot } => {
            let grid = cfg.sweep.grid(&cfg.conditions);
            let workers = cli.workers.or(cfg.sweep.workers).unwrap_or_else(sweep::default_workers);
            let result = sweep::run_sweep(&grid, &cfg.params, &cfg.steady, workers)?;
            let csv = format!("{}{}", csv_header(&cfg)?, sweep::store::to_csv(&result)?);
            let manifest = json!({
                "manifest": header(&cfg)?,
                "params_hash": result.params_hash,
                "cells": result.records.len(),
                "failures": result.failures().count(),
                "reference_m": result.reference_m,
                "config": cfg,
            });
            write_atomic(out, csv.as_bytes())?;
            write_atomic(&out.with_extension("manifest.json"), &to_json(&manifest)?)?;
            if let Some(p) = json {
                sweep::store::save(&result, p)?;
            }
            if let Some(p) = gnuplot {
                let text = format!("{}{}", csv_header(&cfg)?, sweep::store::to_gnuplot(&result));
                write_atomic(p, text.as_bytes())?;
            }
            Ok(())
        }
        Command::Contour {
            input,
            fixed_j,
            fixed_i,
            fixed_density,
            fixed_power,
            out,
        } => {
            let result = sweep::store::load(input)?;
            let cut = match (fixed_j, fixed_i, fixed_density, fixed_power) {
                (Some(v), ..) => Cut::FixedJ(*v),
                (_, Some(v), ..) => Cut::FixedI(*v),
                (_, _, Some(v), _) => Cut::FixedDensity(*v),
                (.., Some(v)) => Cut::FixedPower(*v),
                _ => return Err(Error::InvalidArgument("give one --fixed-* value".into())),
            };
            let c = extract_contour(&result, cut)?;
            let mut s = format!(
                "# spingas {VERSION}\n# params_hash {}\n# interpolation nearest-grid-line\n# line_value {}\n",
                result.params_hash, c.line_value
            );
            s.push_str("x,M_abs,tau_s\n");
            for (x, m, t) in c.series() {
                let _ = writeln!(s, "{x},{m:e},{t:e}");
            }
            emit(out.as_deref(), s.as_bytes())
        }
        Command::Susceptibility { point, dh, out } => {
            apply_point(&mut cfg, point);
            let s = susceptibility(&cfg.params, dh * cfg.params.gamma, &cfg.steady)?;
            let v = json!({
                "manifest": header(&cfg)?,
                "i_over_gamma": cfg.params.i_rate / cfg.params.gamma,
                "j_over_gamma": cfg.params.j_rate / cfg.params.gamma,
                "chi_times_gamma": s.chi * cfg.params.gamma,
                "result": s,
            });
            emit(out.as_deref(), &to_json(&v)?)
        }
        Command::Fit {
            input,
            form,
            weights,
            exclusion,
            x_col,
            y_col,
            out,
            residuals,
            loglog,
        } => {
            let (x, y) = read_series(input, x_col, y_col)?;
            let form = form.map_or(cfg.fit.form, |f| match f {
                Form::Beta => FitForm::Beta,
                Form::Gamma => FitForm::Gamma,
                Form::Delta => FitForm::Delta,
                Form::Znu => FitForm::Znu,
            });
            let base = if cfg.is_user_set("fit.form") || form == cfg.fit.form {
                FitSpec { form, ..cfg.fit }
            } else {
                FitSpec::for_form(form)
            };
            let spec = FitSpec {
                form,
                weights: weights.map_or(base.weights, |w| match w {
                    WeightArg::Uniform => Weights::Uniform,
                    WeightArg::InverseCube => Weights::InverseCube,
                }),
                exclusion: exclusion.unwrap_or(base.exclusion),
            };
            let r = three_step_fit(&x, &y, &spec)?;
            let sensitivity = if form == FitForm::Delta {
                None
            } else {
                let mut counts = vec![0, spec.exclusion];
                counts.dedup();
                exclusion_sensitivity(&x, &y, &spec, &counts).ok()
            };
            let doc = json!({
                "manifest": header(&cfg)?,
                "input": input.display().to_string(),
                "spec": spec,
                "result": r,
                "exclusion_sensitivity": sensitivity,
            });
            let (res, ll) = fit_tables(&x, &y, &r);
            let h = csv_header(&cfg)?;
            emit(out.as_deref(), &to_json(&doc)?)?;
            if let Some(p) = residuals {
                write_atomic(p, format!("{h}{res}").as_bytes())?;
            }
            if let Some(p) = loglog {
                write_atomic(p, format!("{h}{ll}").as_bytes())?;
            }
            Ok(())
        }
        Command::Selftest { sets, steps } => {
            let r = run_suite(&SuiteOptions {
                sets: *sets,
                steps: *steps,
                ..SuiteOptions::default()
            })?;
            emit(None, &to_json(&json!({ "passed": r.passed(), "report": r }))?)?;
            if r.passed() {
                Ok(())
            } else {
                Err(Error::InvariantViolation {
                    time: 0.0,
                    detail: "selftest thresholds exceeded".into(),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
