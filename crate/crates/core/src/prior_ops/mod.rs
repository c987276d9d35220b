//! Operators built on the local contrast and local motion priors.

pub mod cdconv;
pub mod dlcm;
pub mod lsta;
pub mod residual;

pub use cdconv::{cd_conv, CdConv, CdConvLayer, DEFAULT_THETA};
pub use dlcm::dlcm;
pub use lsta::{lsta, lsta_apply, lsta_attention, set_identity_projections, Lsta, LstaCfg};
pub use residual::{residual_group, ResidualGroup, ResidualGroupCfg};
