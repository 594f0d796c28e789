//! Conversion of small trained networks into spiking form, plus the
//! time-stepped simulator, decoders, and reporting tools around it.
//!
//! The pipeline, end to end:
//!
//! 1. [`netspec`] — describe a network (conv / dense / max-pool stack),
//!    load/save it, fold batch norm into the preceding weights, and run the
//!    exact real-valued forward pass that later stages are checked against.
//! 2. [`calibrate`] — measure per-layer or per-channel activation scales over
//!    a calibration set (true maximum or a high percentile) and rescale the
//!    weights so every unit's activations fit the spiking operating range.
//! 3. [`spikesim`] — convert the normalized network into signed
//!    integrate-and-fire units (negative threshold tightened by the leaky
//!    slope) and simulate it tick by tick, counting synaptic events.
//! 4. [`decode`] — turn spike counts or final membrane potentials back into
//!    real-valued outputs and undo the calibration scaling.
//! 5. [`analytics`] / [`energy`] — firing-rate reports, convergence curves,
//!    and operation-count energy estimates comparing the original network
//!    with its spiking counterpart.
//!
//! [`fixtures`] provides deterministic synthetic networks used by the test
//! suite and the demo generator.

pub mod analytics;
pub mod calibrate;
pub mod decode;
pub mod energy;
pub mod fixtures;
pub mod netspec;
pub mod spikesim;
pub mod tensor;

pub use calibrate::{ActivationStats, NormScheme, NormalizedNetwork, StatMode};
pub use decode::{DecodeScheme, DecodedOutput};
pub use netspec::{ForwardPass, LayerKind, LayerSpec, ModelError, NetworkSpec};
pub use spikesim::{NeuronConfig, SimulationState, SpikingNetwork};
pub use tensor::Tensor;
