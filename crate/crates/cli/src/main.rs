// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use follower::config::Config;
use follower::control::{simulate_step, tune_gains, PidGains};
use follower::exec::Exec;
use follower::pipeline;
use follower::planner::{DemoDataset, PlannerModel};
use follower::vision::{annotate, detect_object_with, Frame};
use follower::world::{builtin_environments, resolve_environment};

/// Object-following robot: data generation, training, simulation and
/// diagnostics.
#[derive(Parser, Debug)]
#[command(name = "follower", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON file with configuration overrides (same layout as the defaults).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Dotted override, repeatable: `--set control.kp=1.5 --set train.epochs=200`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run batch work on one thread even when built with rayon.
    #[arg(long, global = true)]
    sequential: bool,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Record expert demonstrations as a CSV dataset.
    GenData {
        /// Number of rows (planner ticks) to record.
        #[arg(long, default_value_t = 5000)]
        rows: usize,
        #[arg(long)]
        seed: u64,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the velocity networks on a dataset and write the model JSON.
    Train {
        /// Dataset CSV from gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Output model JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Epochs (default from the configuration, 300).
        #[arg(long)]
        epochs: Option<usize>,
        /// Also write per-epoch losses to this directory.
        #[arg(long, value_name = "DIR")]
        history: Option<PathBuf>,
    },
    /// Run one closed-loop episode with a trained model.
    Simulate {
        /// env1, env2, env3 or an environment JSON file.
        #[arg(long)]
        env: String,
        #[arg(long)]
        model: PathBuf,
        /// Recorded in the summary; episodes themselves are deterministic.
        #[arg(long)]
        seed: u64,
        /// Output trace CSV.
        #[arg(long)]
        trace: PathBuf,
        /// Write annotated camera frames (PPM) here.
        #[arg(long, value_name = "DIR")]
        frames: Option<PathBuf>,
        /// Write the integrated desired path CSV here.
        #[arg(long, value_name = "FILE")]
        desired: Option<PathBuf>,
    },
    /// Detect the target in a PPM image and write an annotated copy.
    Detect {
        /// Input image (binary PPM, P6).
        #[arg(long)]
        image: PathBuf,
        /// Annotated output image.
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-loop step response of the velocity PI loop.
    StepResponse {
        #[arg(long)]
        kp: Option<f64>,
        #[arg(long)]
        ki: Option<f64>,
        /// Plant time constant, s.
        #[arg(long)]
        tau: Option<f64>,
        /// Output CSV (t,setpoint,output,u).
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search PI gains for the target rise and settling times.
    Tune,
    /// List the built-in environments.
    Envs,
    /// gen-data, train and simulate all three environments into one directory.
    Repro {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory (created if absent).
        #[arg(long, default_value = "repro")]
        out: PathBuf,
        /// Dataset rows (default from the configuration, 5000).
        #[arg(long)]
        rows: Option<usize>,
        /// Epochs (default from the configuration, 300).
        #[arg(long)]
        epochs: Option<usize>,
    },
}

enum Failure {
    /// Bad arguments, configuration or missing inputs: exit 1.
    Usage(String),
    /// The work itself failed: exit 2.
    Runtime(follower::Error),
}

impl From<follower::Error> for Failure {
    fn from(e: follower::Error) -> Self {
        match e {
            follower::Error::Config(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} `{}` does not exist", path.display())))
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON values always serialise"));
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    if let Some(path) = &g.config {
        require_file(path, "config file")?;
    }
    let mut cfg = Config::resolve(g.config.as_deref(), &g.overrides)?;
    let exec = if g.sequential { Exec::Sequential } else { Exec::default() };

    match cli.command {
        Command::GenData { rows, seed, out } => {
            let dataset = pipeline::generate(&cfg, rows, seed, exec)?;
            pipeline::write_dataset(&dataset, &out)?;
            print_json(&json!({ "rows": dataset.len(), "seed": seed, "out": out }));
        }
        Command::Train { data, out, seed, epochs, history } => {
            require_file(&data, "dataset")?;
            let dataset = DemoDataset::read_csv(BufReader::new(File::open(&data)?))?;
            let trained = pipeline::train(&dataset, &cfg, seed, epochs)?;
            trained.model.save(&out)?;
            if let Some(dir) = history {
                pipeline::write_loss_history(&trained.v_history, &dir.join("loss_v.csv"))?;
                pipeline::write_loss_history(&trained.w_history, &dir.join("loss_w.csv"))?;
            }
            print_json(&json!({
                "rows": dataset.len(),
                "seed": seed,
                "v_net": trained.v_history.last(),
                "w_net": trained.w_history.last(),
                "out": out,
            }));
        }
        Command::Simulate { env, model, seed, trace, frames, desired } => {
            require_file(&model, "model")?;
            let environment = resolve_environment(&env).map_err(|e| match e {
                follower::Error::Io(_) => Failure::Usage(format!("unknown environment `{env}` (not env1-3 or a file)")),
                other => other.into(),
            })?;
            let model = PlannerModel::load(&model)?;
            cfg.sim.record_frames = frames.is_some();
            let result = pipeline::simulate(&environment, &model, &cfg)?;
            pipeline::write_trace(&result, &trace)?;
            if let Some(path) = desired {
                pipeline::write_desired_path(&result, &path)?;
            }
            let written = match frames {
                Some(dir) => pipeline::write_frames(&result, &dir)?,
                None => 0,
            };
            let mut summary = serde_json::to_value(&result.summary).map_err(follower::Error::from)?;
            summary["seed"] = json!(seed);
            summary["frames_written"] = json!(written);
            print_json(&summary);
        }
        Command::Detect { image, out } => {
            require_file(&image, "image")?;
            let frame = Frame::read_ppm(BufReader::new(File::open(&image)?))?;
            let detection = detect_object_with(&frame, &cfg.sim.vision, exec);
            let mut writer = BufWriter::new(File::create(&out)?);
            annotate(&frame, detection.as_ref()).write_ppm(&mut writer)?;
            writer.flush()?;
            match detection {
                Some(d) => {
                    let mut value = serde_json::to_value(d).map_err(follower::Error::from)?;
                    value["detected"] = json!(true);
                    print_json(&value);
                }
                None => println!("{}", json!({ "detected": false })),
            }
        }
        Command::StepResponse { kp, ki, tau, out } => {
            let gains = &mut cfg.sim.controller.gains_v;
            *gains = PidGains { kp: kp.unwrap_or(gains.kp), ki: ki.unwrap_or(gains.ki), ..*gains };
            gains.validate()?;
            if let Some(tau) = tau {
                if !(tau > 0.0) {
                    return Err(Failure::Usage("--tau must be positive".into()));
                }
                cfg.step.tau = tau;
            }
            let metrics = pipeline::write_step_response(&cfg, &out)?;
            let gains = cfg.sim.controller.gains_v;
            print_json(&json!({ "kp": gains.kp, "ki": gains.ki, "tau": cfg.step.tau, "metrics": metrics }));
        }
        Command::Tune => {
            let best = tune_gains(&cfg.tuning, &cfg.step, exec)
                .ok_or(Failure::Runtime(follower::Error::Empty("no overshoot-free gains in the grid")))?;
            let check = simulate_step(&best.gains, &cfg.step).metrics;
            print_json(&json!({ "gains": best.gains, "metrics": check, "cost": best.cost }));
        }
        Command::Envs => {
            for env in builtin_environments() {
                println!(
                    "{}\tobstacles={}\tpath_length_m={:.3}\tpath_duration_s={:.1}",
                    env.name,
                    env.obstacles.len(),
                    env.path_length(),
                    env.path_end_time()
                );
            }
        }
        Command::Repro { seed, out, rows, epochs } => {
            if let Some(rows) = rows {
                cfg.gen.rows = rows;
            }
            if let Some(epochs) = epochs {
                cfg.train.epochs = epochs;
            }
            let summary = pipeline::repro(&cfg, seed, &out, exec)?;
            print_json(&serde_json::to_value(&summary).map_err(follower::Error::from)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
