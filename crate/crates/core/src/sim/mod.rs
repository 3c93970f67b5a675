//! Virtual-clock replay of pressure traces through the device model.

mod run;
mod script;
mod trace;

pub use run::{run, write_event_log, RunError, RunOutput, SimRun, Simulator};
pub use script::{parse_script, ScriptError, ScriptedInput};
pub use trace::{gen_trace, read_trace, write_trace, Profile, Trace, TraceError, SAMPLE_PERIOD_MS};
