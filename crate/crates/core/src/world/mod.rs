//! Robot kinematics, target motion, arena geometry and the range-bearing sensor.

mod map;
mod robot;
mod sensor;
mod target;

pub use map::{MapError, WorldMap, BUILTIN_MAPS};
pub use robot::{
    integrate_unicycle, step_robot, MotionPrimitive, Pose, ANGULAR_SPEEDS, LINEAR_SPEEDS,
    NUM_ACTIONS,
};
pub use sensor::{
    closest_obstacle, observe, range_bearing, Measurement, ObstacleReading, RangeBearing,
    SensorError, SensorSpec,
};
pub use target::{step_target, TargetState, DEFAULT_REFLECT_JITTER, MAX_REFLECTIONS};
