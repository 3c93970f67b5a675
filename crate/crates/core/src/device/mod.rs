//! The device model: squeeze detection, the anxiety accumulator, and the
//! state machine that turns inputs into LED/LCD frames, protocol messages and
//! history records.

mod detector;
mod level;
mod machine;

pub use detector::{detect_squeeze, DetectorPhase, PressureSample, SampleError, SqueezeDetector, SqueezeEvent};
pub use level::{accumulate, decay, led_level};
pub use machine::{
    render, step, AppCommand, Button, DeviceState, Event, LcdText, LedFrame, Mode, Output, PROMPT_TEXT,
};
