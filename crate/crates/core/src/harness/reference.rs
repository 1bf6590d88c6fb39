//! Bundled experiment configurations.

use super::config::{Experiment, ExperimentConfig};
use crate::error::Result;

/// One sensor observing a scalar unstable state: the classic Kalman filter.
pub const SCALAR_KALMAN: &str = include_str!("../../configs/a_scalar_kalman.json");
/// Three sensors on a path, scalar `F = 1.2`, only the middle one observes.
pub const PATH3_UNSTABLE: &str = include_str!("../../configs/b_path3_unstable.json");
/// Two-dimensional expanding rotation seen by two single-coordinate sensors.
pub const ROTATION_PAIR: &str = include_str!("../../configs/c_rotation_pair.json");

pub fn scalar_kalman() -> Experiment {
    bundled(SCALAR_KALMAN)
}

pub fn path3_unstable() -> Experiment {
    bundled(PATH3_UNSTABLE)
}

pub fn rotation_pair() -> Experiment {
    bundled(ROTATION_PAIR)
}

pub fn by_name(name: &str) -> Option<Experiment> {
    match name {
        "a" | "scalar-kalman" => Some(scalar_kalman()),
        "b" | "path3-unstable" => Some(path3_unstable()),
        "c" | "rotation-pair" => Some(rotation_pair()),
        _ => None,
    }
}

fn bundled(text: &str) -> Experiment {
    parse(text).expect("bundled config is valid")
}

fn parse(text: &str) -> Result<Experiment> {
    ExperimentConfig::from_json(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_build() {
        assert_eq!(scalar_kalman().model.num_sensors(), 1);
        assert_eq!(path3_unstable().model.num_sensors(), 3);
        assert_eq!(rotation_pair().model.state_dim(), 2);
        assert!(by_name("b").is_some() && by_name("zzz").is_none());
    }
}
