pub mod encode;
pub mod eval;
pub mod ingest;
pub mod mar;
pub mod simulate;

pub use encode::cmd_encode;
pub use eval::{cmd_eval, EvalInputs};
pub use ingest::cmd_ingest;
pub use mar::cmd_mar;
pub use simulate::{cmd_simulate, SimInputs};
