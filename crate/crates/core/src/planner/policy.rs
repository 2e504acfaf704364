use super::dataset::{expert_policy, ExpertConfig, PlannerInput};
use super::model::PlannerModel;
use super::clamp_v;
use crate::error::{Error, Result};
use crate::kinematics::BodyTwist;
use crate::vision::{Detection, Proximity};
use crate::world::{Observation, Planned, Policy};

/// Image centre, the neutral steering reference before the first detection.
pub const DEFAULT_X_ANGLE: f64 = 160.0;

/// Memory carried between planner ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerState {
    /// x_angle of the most recent detection.
    pub last_x_angle: Option<f64>,
}

impl Default for PlannerState {
    fn default() -> Self {
        Self { last_x_angle: Some(DEFAULT_X_ANGLE) }
    }
}

impl PlannerState {
    /// Features for this tick. A lost object reuses the last x_angle and
    /// counts as far.
    pub fn input_for(&mut self, detection: Option<&Detection>, left_cm: f64, right_cm: f64) -> Result<PlannerInput> {
        let (x_angle, proximity) = match detection {
            Some(d) => {
                self.last_x_angle = Some(d.x_angle);
                (d.x_angle, d.proximity)
            }
            None => (self.last_x_angle.ok_or(Error::NoHeadingReference)?, Proximity::Far),
        };
        Ok(PlannerInput::new(left_cm, right_cm, x_angle, proximity))
    }
}

/// Desired twist from the two networks. A close detection means rest,
/// whatever the networks say.
pub fn plan_twist(
    model: &PlannerModel,
    detection: Option<&Detection>,
    left_cm: f64,
    right_cm: f64,
    state: &mut PlannerState,
) -> Result<(BodyTwist, PlannerInput)> {
    let input = state.input_for(detection, left_cm, right_cm)?;
    if input.is_close() {
        return Ok((BodyTwist::ZERO, input));
    }
    Ok((model.predict(&input), input))
}

/// The trained networks as a simulator policy.
#[derive(Debug, Clone)]
pub struct NetworkPolicy {
    pub model: PlannerModel,
    pub state: PlannerState,
}

impl NetworkPolicy {
    pub fn new(model: PlannerModel) -> Self {
        Self { model, state: PlannerState::default() }
    }
}

impl Policy for NetworkPolicy {
    fn plan(&mut self, obs: &Observation) -> Result<Planned> {
        let (twist, input) = plan_twist(&self.model, obs.detection.as_ref(), obs.left_cm, obs.right_cm, &mut self.state)?;
        Ok(Planned { twist, x_angle: input.x_angle, proximity: input.proximity })
    }
}

/// The scripted demonstrator as a simulator policy, with the same lost-object
/// handling as the networks.
#[derive(Debug, Clone)]
pub struct ExpertPolicy {
    pub config: ExpertConfig,
    pub state: PlannerState,
}

impl ExpertPolicy {
    pub fn new(config: ExpertConfig) -> Self {
        Self { config, state: PlannerState::default() }
    }
}

impl Policy for ExpertPolicy {
    fn plan(&mut self, obs: &Observation) -> Result<Planned> {
        let input = self.state.input_for(obs.detection.as_ref(), obs.left_cm, obs.right_cm)?;
        let twist = expert_policy(&input, &self.config);
        Ok(Planned { twist: BodyTwist::new(clamp_v(twist.v), twist.w), x_angle: input.x_angle, proximity: input.proximity })
    }
}
