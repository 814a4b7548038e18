//! Small tensor engine: a reverse-mode tape, the layers the encoder needs,
//! Adam, gradient checking and a named-tensor checkpoint format.

mod gradcheck;
mod layers;
mod optim;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, sample_coords, GradCheckReport, GRAD_CHECK_FLOOR, GRAD_CHECK_STEP};
pub use layers::{BatchNorm, Conv, ConvBlock, FcBlock, Linear, Session, BN_EPS, BN_MOMENTUM, LEAKY_SLOPE};
pub use optim::Adam;
pub use params::{bias_uniform, kaiming_uniform, read_checkpoint, write_checkpoint, ParamEntry, ParamStore, CHECKPOINT_VERSION};
pub use tape::{BatchStats, ConvGeom, Gradients, Tape, Var};
pub use tensor::Tensor;
