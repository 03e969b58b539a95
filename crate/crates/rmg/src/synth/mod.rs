//! Synthetic MIMO radiomyography recordings and companion sEMG traces.
//!
//! The generator emulates the morphology of muscle-coupled near-field
//! baseband: per-gesture activation envelopes drive a bilinear coupling
//! model with a quadratic cross term and complex noise. It is the test
//! substrate for every downstream stage; it does not solve any field
//! equations.

mod gesture;
mod layout;
mod mixing;
mod semg;

pub use gesture::{
    activation_envelope, activation_matrix, gesture_catalog, BasicGesture, GestureId, GestureSpec,
    MuscleId, MuscleLayer, MuscleSet, Tempo, BASE_ONSET_S, DOUBLE_GAP_S, LABELS, NUM_GESTURES,
    PULSE_WIDTH_S, STEP_GAP_S, WINDOW_S,
};
pub use layout::{derive_seed, seeded_uniform, SensorLayout, NUM_CHANNELS, NUM_UNITS};
pub use mixing::{
    mix_channels, subject_sequences, synth_dataset, synth_routine, synth_subject, Annotation,
    RawRecording, SynthConfig, ROUTINE_COUPLING_SIGMA, ROUTINE_GAIN_RANGE, SUBJECT_COUPLING_SIGMA,
    SUBJECT_SCALE_RANGE, WINDOWS_PER_ROUTINE,
};
pub use semg::{synth_semg, SEMG_FLOOR_FACTOR, SEMG_TAIL_GAIN, SEMG_TAIL_S};
