//! Seeded random agent, used for fuzzing and as a floor baseline.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::link::Policy;
use super::protocol::Phase;
use crate::sim::{Action, Observation};

pub struct RandomPolicy {
    rng: ChaCha8Rng,
    stop_probability: f64,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            stop_probability: 0.0,
        }
    }

    /// Chance of choosing `Stop` on any tick.
    pub fn with_stop_probability(mut self, p: f64) -> Self {
        self.stop_probability = p.clamp(0.0, 1.0);
        self
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _phase: Phase, obs: &Observation) -> Action {
        if self.rng.random_bool(self.stop_probability) {
            return Action::Stop;
        }
        let mut options = vec![
            Action::MoveForward,
            Action::MoveForward,
            Action::TurnLeft,
            Action::TurnRight,
            Action::LookUp,
            Action::LookDown,
            Action::Grab,
            Action::Release,
            Action::Stow,
        ];
        if let Some(id) = obs.backpack.first() {
            options.push(Action::Unstow { id: id.clone() });
        }
        if let Some(v) = obs.visible.iter().find(|v| v.open_fraction.is_some()) {
            options.push(Action::SetJoint {
                id: v.id.clone(),
                fraction: self.rng.random_range(0.0..=1.0),
            });
        }
        options
            .choose(&mut self.rng)
            .cloned()
            .unwrap_or(Action::Stop)
    }
}
