//! Graph View Transformation: the dimension-collapsing map `φ`, one GVT
//! step, the weight-shared recurrence, and exact reverse-mode gradients.

mod gvt;
mod phi;

pub use gvt::{
    apply_phi, gvt_forward, rgvt_backward, rgvt_backward_params, rgvt_forward, rgvt_forward_with,
    EncoderState, ForwardTrace, GradientBundle,
};
pub use phi::{
    gelu, gelu_derivative, local_gradient, param_gradient, phi_eval, Activation, Phi, PhiKind, PhiWorkspace,
};
