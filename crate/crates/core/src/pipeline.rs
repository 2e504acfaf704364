//! The end-to-end chain: generate demonstrations, train, simulate, and write
//! every artefact to disk.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::control::{simulate_step, StepMetrics};
use crate::error::Result;
use crate::exec::Exec;
use crate::planner::{generate_dataset, train_planner, DemoDataset, EpochLoss, NetworkPolicy, PlannerModel, TrainedPlanner};
use crate::world::{
    builtin_environments, simulate_episode, write_desired_path_csv, write_trace_csv, Environment, EpisodeSummary, Trace,
};

pub fn generate(cfg: &Config, rows: usize, seed: u64, exec: Exec) -> Result<DemoDataset> {
    let gen = crate::planner::GenConfig { rows, seed, ..cfg.gen };
    generate_dataset(&builtin_environments(), &cfg.expert, &cfg.sim, &gen, exec)
}

pub fn train(dataset: &DemoDataset, cfg: &Config, seed: u64, epochs: Option<usize>) -> Result<TrainedPlanner> {
    let train = crate::planner::TrainConfig { seed, epochs: epochs.unwrap_or(cfg.train.epochs), ..cfg.train };
    train_planner(dataset, &train)
}

/// One episode driven by the trained networks.
pub fn simulate(env: &Environment, model: &PlannerModel, cfg: &Config) -> Result<Trace> {
    simulate_episode(env, &mut NetworkPolicy::new(model.clone()), &cfg.sim)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_dataset(dataset: &DemoDataset, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    dataset.write_csv(&mut out)?;
    Ok(out.flush()?)
}

pub fn write_loss_history(history: &[EpochLoss], path: &Path) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "epoch,train,val")?;
    for e in history {
        writeln!(out, "{},{},{}", e.epoch, e.train, e.val)?;
    }
    Ok(out.flush()?)
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_trace_csv(&trace.rows, &mut out)?;
    Ok(out.flush()?)
}

pub fn write_desired_path(trace: &Trace, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_desired_path_csv(&trace.desired_path, &mut out)?;
    Ok(out.flush()?)
}

/// Writes the annotated planner-tick frames as `frame_NNNN.ppm`.
pub fn write_frames(trace: &Trace, dir: &Path) -> Result<usize> {
    fs::create_dir_all(dir)?;
    for (k, frame) in &trace.frames {
        let mut out = BufWriter::new(File::create(dir.join(format!("frame_{k:04}.ppm")))?);
        frame.write_ppm(&mut out)?;
        out.flush()?;
    }
    Ok(trace.frames.len())
}

/// Writes `t,setpoint,output,u` and returns the metrics.
pub fn write_step_response(cfg: &Config, path: &Path) -> Result<StepMetrics> {
    let resp = simulate_step(&cfg.sim.controller.gains_v, &cfg.step);
    let mut out = create(path)?;
    writeln!(out, "t,setpoint,output,u")?;
    for s in &resp.samples {
        writeln!(out, "{},{},{},{}", s.t, s.setpoint, s.output, s.u)?;
    }
    out.flush()?;
    Ok(resp.metrics)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproSummary {
    pub seed: u64,
    pub rows: usize,
    pub final_v_loss: Option<EpochLoss>,
    pub final_w_loss: Option<EpochLoss>,
    pub step_metrics: StepMetrics,
    pub episodes: Vec<EpisodeSummary>,
    pub files: Vec<PathBuf>,
}

/// gen-data, train, then all three built-in courses, everything written
/// into `out_dir`. Episodes run in parallel when `exec` allows; each is
/// deterministic on its own, so the files never depend on scheduling.
pub fn repro(cfg: &Config, seed: u64, out_dir: &Path, exec: Exec) -> Result<ReproSummary> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut file = |name: &str| {
        let p = out_dir.join(name);
        files.push(p.clone());
        p
    };

    let dataset = generate(cfg, cfg.gen.rows, seed, exec)?;
    write_dataset(&dataset, &file("dataset.csv"))?;
    let trained = train(&dataset, cfg, seed, None)?;
    trained.model.save(&file("model.json"))?;
    write_loss_history(&trained.v_history, &file("loss_v.csv"))?;
    write_loss_history(&trained.w_history, &file("loss_w.csv"))?;
    let step_metrics = write_step_response(cfg, &file("step_response.csv"))?;

    let envs = builtin_environments();
    let traces = exec.map_slice(&envs, |env| simulate(env, &trained.model, cfg));
    let mut episodes = Vec::new();
    for (env, trace) in envs.iter().zip(traces) {
        let trace = trace?;
        write_trace(&trace, &file(&format!("{}_trace.csv", env.name)))?;
        write_desired_path(&trace, &file(&format!("{}_desired_path.csv", env.name)))?;
        episodes.push(trace.summary);
    }
    let summary = ReproSummary {
        seed,
        rows: dataset.len(),
        final_v_loss: trained.v_history.last().copied(),
        final_w_loss: trained.w_history.last().copied(),
        step_metrics,
        episodes,
        files,
    };
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}
