//! Estimate verification: tail fits, measure decay, Calderón–Zygmund,
//! flatness iteration, singular-set flags and covering dimension.

pub mod cz;
pub mod decay;
pub mod flatness;
pub mod singular;
pub mod tail;

pub use cz::{cz_check, cz_instance, CzReport, DyadicGrid};
pub use decay::{measure_decay, measure_decay_check, DecayReport};
pub use flatness::{calibrate_constants, flatness_iterate, Calibration, CalibrationOptions, FlatnessTrace};
pub use singular::{box_dimension, flag_singular, flag_singular_lazy, BoxDimension, SingularReport};
pub use tail::{tail_fit, TailFit};
