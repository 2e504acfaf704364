use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::ExpertPolicy;
use super::{clamp_v, N_FEATURES};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::kinematics::BodyTwist;
use crate::vision::Proximity;
use crate::world::{simulate_episode, Environment, Jitter, ObstacleEvent, Placement, SimConfig};

pub const DATASET_HEADER: &str = "left_cm,right_cm,x_angle,proximity,v,omega";

/// Planner features in their raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerInput {
    pub left_cm: f64,
    pub right_cm: f64,
    /// Horizontal pixel of the target centre.
    pub x_angle: f64,
    /// 0 for Far, 1 for Close.
    pub proximity: f64,
}

impl PlannerInput {
    pub fn new(left_cm: f64, right_cm: f64, x_angle: f64, proximity: Proximity) -> Self {
        Self { left_cm, right_cm, x_angle, proximity: proximity.as_feature() }
    }

    pub fn as_array(&self) -> [f64; N_FEATURES] {
        [self.left_cm, self.right_cm, self.x_angle, self.proximity]
    }

    pub fn is_close(&self) -> bool {
        self.proximity >= 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoRow {
    pub input: PlannerInput,
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DemoDataset {
    pub rows: Vec<DemoRow>,
}

impl DemoDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn inputs(&self) -> Vec<[f64; N_FEATURES]> {
        self.rows.iter().map(|r| r.input.as_array()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for r in &self.rows {
            writer.serialize(CsvRow::from(r)).map_err(csv_error)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
        if header.join(",") != DATASET_HEADER {
            return Err(Error::Format {
                what: "dataset csv",
                detail: format!("expected header `{DATASET_HEADER}`, got `{}`", header.join(",")),
            });
        }
        let mut rows = Vec::new();
        for record in reader.deserialize::<CsvRow>() {
            let r = record.map_err(csv_error)?;
            let vals = [r.left_cm, r.right_cm, r.x_angle, r.proximity, r.v, r.omega];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format { what: "dataset csv", detail: format!("non-finite value in row {}", rows.len() + 1) });
            }
            rows.push(DemoRow {
                input: PlannerInput { left_cm: r.left_cm, right_cm: r.right_cm, x_angle: r.x_angle, proximity: r.proximity },
                v: r.v,
                w: r.omega,
            });
        }
        Ok(Self { rows })
    }
}

/// On-disk row layout, in [`DATASET_HEADER`] order.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    left_cm: f64,
    right_cm: f64,
    x_angle: f64,
    proximity: f64,
    v: f64,
    omega: f64,
}

impl From<&DemoRow> for CsvRow {
    fn from(r: &DemoRow) -> Self {
        let i = &r.input;
        Self { left_cm: i.left_cm, right_cm: i.right_cm, x_angle: i.x_angle, proximity: i.proximity, v: r.v, omega: r.w }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format { what: "dataset csv", detail: e.to_string() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertConfig {
    pub k_img: f64,
    pub k_obs: f64,
    /// m/s
    pub v_max: f64,
    /// Obstacle steering engages below this range, cm.
    pub obstacle_active_cm: f64,
    /// Linear speed ramps from zero at `stop_cm` to full at `clear_cm`.
    pub stop_cm: f64,
    pub clear_cm: f64,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self { k_img: 1.0, k_obs: 0.3, v_max: 0.3, obstacle_active_cm: 80.0, stop_cm: 20.0, clear_cm: 60.0 }
    }
}

/// The scripted demonstrator: steer toward the target, away from the nearer
/// sonar return, slow down near obstacles and stop when the target is close.
pub fn expert_policy(input: &PlannerInput, cfg: &ExpertConfig) -> BodyTwist {
    let x_err = (input.x_angle - 160.0) / 160.0;
    let nearest = input.left_cm.min(input.right_cm);
    let mut w = -cfg.k_img * x_err;
    if nearest < cfg.obstacle_active_cm {
        w -= cfg.k_obs * (100.0 / input.left_cm.max(10.0) - 100.0 / input.right_cm.max(10.0));
    }
    let v = if input.is_close() {
        0.0
    } else {
        let ramp = ((nearest - cfg.stop_cm) / (cfg.clear_cm - cfg.stop_cm)).clamp(0.0, 1.0);
        cfg.v_max * ramp * (1.0 - 0.5 * x_err.abs())
    };
    BodyTwist::new(clamp_v(v), w)
}

/// How demonstration episodes are randomised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub rows: usize,
    pub seed: u64,
    pub jitter: Jitter,
    /// Chance that an episode gets an obstacle dropped in front of the robot.
    pub event_probability: f64,
    pub max_episodes: usize,
    pub episode_max_duration: f64,
    /// Episodes simulated per parallel batch.
    pub batch: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            rows: 5000,
            seed: 42,
            jitter: Jitter::default(),
            event_probability: 0.3,
            max_episodes: 2000,
            episode_max_duration: 40.0,
            batch: 16,
        }
    }
}

/// Randomised variant `index` of one of `envs`, fully determined by
/// `(seed, index)`.
pub fn episode_variant(envs: &[Environment], seed: u64, index: usize, gen: &GenConfig) -> Environment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let base = &envs[index % envs.len()];
    let jitter = Jitter { mirror: rng.gen_bool(0.5), ..gen.jitter };
    let mut env = base.jittered(&mut rng, &jitter);
    env.name = format!("{}-v{index}", base.name);
    if rng.gen_bool(gen.event_probability.clamp(0.0, 1.0)) {
        let end = env.path_end_time().max(2.0);
        env.events.push(ObstacleEvent {
            t: rng.gen_range(1.0..end),
            placement: Placement::AheadOfRobot {
                distance: rng.gen_range(0.25..0.6),
                lateral: rng.gen_range(-0.3..0.3),
                w: rng.gen_range(0.1..0.25),
                h: rng.gen_range(0.15..0.4),
            },
            replace: None,
        });
    }
    env
}

/// Drives the expert through randomised variants of `envs` and records one
/// row per planner tick until exactly `gen.rows` rows exist.
pub fn generate_dataset(
    envs: &[Environment],
    expert: &ExpertConfig,
    sim: &SimConfig,
    gen: &GenConfig,
    exec: Exec,
) -> Result<DemoDataset> {
    if gen.rows < 100 {
        return Err(Error::Config(format!("need at least 100 rows, asked for {}", gen.rows)));
    }
    if envs.is_empty() {
        return Err(Error::Empty("no environments to generate from"));
    }
    let sim = SimConfig { max_duration: gen.episode_max_duration, record_frames: false, ..*sim };
    let mut rows = Vec::with_capacity(gen.rows);
    let mut next = 0;
    while rows.len() < gen.rows && next < gen.max_episodes {
        let count = gen.batch.max(1).min(gen.max_episodes - next);
        let batch = exec.map_range(count, |i| -> Result<Vec<DemoRow>> {
            let env = episode_variant(envs, gen.seed, next + i, gen);
            let mut policy = ExpertPolicy::new(*expert);
            let trace = simulate_episode(&env, &mut policy, &sim)?;
            Ok(trace
                .ticks
                .iter()
                .map(|tick| DemoRow {
                    input: PlannerInput {
                        left_cm: tick.observation.left_cm,
                        right_cm: tick.observation.right_cm,
                        x_angle: tick.planned.x_angle,
                        proximity: tick.planned.proximity,
                    },
                    v: clamp_v(tick.planned.twist.v),
                    w: tick.planned.twist.w,
                })
                .collect())
        });
        for episode in batch {
            rows.extend(episode?);
        }
        next += count;
    }
    if rows.len() < gen.rows {
        return Err(Error::DatasetShort { got: rows.len(), wanted: gen.rows });
    }
    rows.truncate(gen.rows);
    Ok(DemoDataset { rows })
}
