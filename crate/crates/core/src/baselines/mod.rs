//! Comparison forecasters: AR-I, persistence and a linear-coefficient
//! recurrent model.

mod ar;
mod linear_seq;

pub use ar::{
    fit_ar, fit_ar_segments, forecast_ar, persistence_forecast, ArModel, DEFAULT_AR_DIFFERENCING, DEFAULT_AR_ORDER,
};
pub use linear_seq::{LinearSeqConfig, LinearSeqModel, LinearSeqParams, LinearSeqTrace};
