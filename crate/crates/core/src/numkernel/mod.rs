//! Dense 2-D tensors, a reverse-mode tape, recurrent and attention layers,
//! optimizers and a finite-difference gradient checker.

mod gradcheck;
mod layers;
mod optim;
mod params;
mod tape;
mod tensor;


pub use gradcheck::{grad_check, relative_error, GradCheckReport, ParamCheck, DEFAULT_STEP, DEFAULT_TOLERANCE};
pub use layers::{
    bigru_encode, dense_relu, dense_relu_var, gru_step, self_attention, softmax, softmax_xent, BiGru, GruLayer,
    GruState, SelfAttention,
};
pub use optim::{Optimizer, OptimizerConfig, OptimizerKind};
pub use params::{ParamId, ParamStore, CHECKPOINT_MAGIC};
pub use tape::{Tape, Var};
pub use tensor::Tensor2;
