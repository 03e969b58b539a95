//! Gesture catalog and muscle activation envelopes.
//!
//! The protocol has 9 basic hand gestures driven by 12 forearm muscles.
//! Seven basics come in quick and double-quick versions, eight in a slow
//! version (Fist is slow-only), and Rest is static, for 23 classes total.

use crate::error::{Result, RmgError};
use serde::{Deserialize, Serialize};

/// Gesture window length in seconds.
pub const WINDOW_S: f64 = 5.0;

/// Raised-cosine pulse width for a single gesture step.
pub const PULSE_WIDTH_S: f64 = 0.4;
/// Onset separation between step 1 and step 2 of a quick gesture.
pub const STEP_GAP_S: f64 = 0.6;
/// Onset separation between the two step pairs of a double gesture.
pub const DOUBLE_GAP_S: f64 = 1.6;
/// Nominal onset of the first step within the window.
pub const BASE_ONSET_S: f64 = 0.5;
/// Attack/release ramp of the slow-gesture plateau.
const RAMP_S: f64 = PULSE_WIDTH_S / 2.0;

/// The 12 forearm muscles that drive the protocol gestures.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum MuscleId {
    /// Extensor carpi ulnaris
    Ecu,
    /// Extensor carpi radialis longus
    Ecrl,
    /// Extensor carpi radialis brevis
    Ecrb,
    /// Flexor carpi ulnaris
    Fcu,
    /// Flexor carpi radialis
    Fcr,
    /// Extensor digitorum
    Ed,
    /// Extensor digiti minimi
    Edm,
    /// Flexor digitorum superficialis
    Fds,
    /// Extensor pollicis longus
    Epl,
    /// Extensor indicis
    Ei,
    /// Flexor digitorum profundus
    Fdp,
    /// Flexor pollicis longus
    Fpl,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum MuscleLayer {
    Superficial,
    Intermediate,
    Deep,
}

impl MuscleId {
    pub const ALL: [MuscleId; 12] = [
        MuscleId::Ecu,
        MuscleId::Ecrl,
        MuscleId::Ecrb,
        MuscleId::Fcu,
        MuscleId::Fcr,
        MuscleId::Ed,
        MuscleId::Edm,
        MuscleId::Fds,
        MuscleId::Epl,
        MuscleId::Ei,
        MuscleId::Fdp,
        MuscleId::Fpl,
    ];

    pub const COUNT: usize = 12;

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            MuscleId::Ecu => "ECU",
            MuscleId::Ecrl => "ECRL",
            MuscleId::Ecrb => "ECRB",
            MuscleId::Fcu => "FCU",
            MuscleId::Fcr => "FCR",
            MuscleId::Ed => "ED",
            MuscleId::Edm => "EDM",
            MuscleId::Fds => "FDS",
            MuscleId::Epl => "EPL",
            MuscleId::Ei => "EI",
            MuscleId::Fdp => "FDP",
            MuscleId::Fpl => "FPL",
        }
    }

    pub fn layer(self) -> MuscleLayer {
        match self {
            MuscleId::Fds => MuscleLayer::Intermediate,
            MuscleId::Epl | MuscleId::Ei | MuscleId::Fdp | MuscleId::Fpl => MuscleLayer::Deep,
            _ => MuscleLayer::Superficial,
        }
    }

    /// Flexors sit on the anterior side of the forearm, extensors on the
    /// posterior side.
    pub fn is_flexor(self) -> bool {
        matches!(
            self,
            MuscleId::Fcu | MuscleId::Fcr | MuscleId::Fds | MuscleId::Fdp | MuscleId::Fpl
        )
    }
}

/// Small set of muscles, stored as a bitmask over `MuscleId::ALL`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct MuscleSet(u16);

impl MuscleSet {
    pub const EMPTY: MuscleSet = MuscleSet(0);

    pub fn new(muscles: &[MuscleId]) -> Self {
        let mut bits = 0u16;
        for m in muscles {
            bits |= 1 << m.index();
        }
        MuscleSet(bits)
    }

    pub fn contains(self, m: MuscleId) -> bool {
        self.0 & (1 << m.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = MuscleId> {
        MuscleId::ALL
            .into_iter()
            .filter(move |m| self.contains(*m))
    }
}

/// One of the 9 basic hand gestures.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum BasicGesture {
    PointThumb,
    PointIndex,
    PointIndMid,
    Point4Fingers,
    Grasp,
    WristUp,
    WristDown,
    Fist,
    Rest,
}

impl BasicGesture {
    /// Major muscle groups for step 1 and step 2 of the gesture.
    pub fn step_muscles(self) -> (MuscleSet, MuscleSet) {
        use MuscleId::*;
        match self {
            BasicGesture::Grasp => (MuscleSet::new(&[Ed, Epl, Edm]), MuscleSet::new(&[Fdp, Fds, Fpl])),
            BasicGesture::PointThumb => (MuscleSet::new(&[Epl]), MuscleSet::new(&[Fpl])),
            BasicGesture::PointIndex => (MuscleSet::new(&[Ei]), MuscleSet::new(&[Fdp, Fds])),
            BasicGesture::PointIndMid => (MuscleSet::new(&[Ei, Ed]), MuscleSet::new(&[Fdp, Fds])),
            BasicGesture::Point4Fingers => {
                (MuscleSet::new(&[Ei, Ed, Edm]), MuscleSet::new(&[Fdp, Fds]))
            }
            BasicGesture::Fist => (MuscleSet::new(&[Fdp, Fds, Fpl]), MuscleSet::EMPTY),
            BasicGesture::WristUp => (
                MuscleSet::new(&[Ecu, Ecrl, Ecrb]),
                MuscleSet::new(&[Fcu, Fcr]),
            ),
            BasicGesture::WristDown => (
                MuscleSet::new(&[Fcu, Fcr]),
                MuscleSet::new(&[Ecu, Ecrl, Ecrb]),
            ),
            BasicGesture::Rest => (MuscleSet::EMPTY, MuscleSet::EMPTY),
        }
    }

    fn code(self) -> &'static str {
        match self {
            BasicGesture::PointThumb => "P1",
            BasicGesture::PointIndex => "P2",
            BasicGesture::PointIndMid => "P23",
            BasicGesture::Point4Fingers => "P4",
            BasicGesture::Grasp => "G",
            BasicGesture::WristUp => "U",
            BasicGesture::WristDown => "D",
            BasicGesture::Fist => "F",
            BasicGesture::Rest => "R",
        }
    }
}

/// Execution tempo of a gesture.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Tempo {
    Quick,
    Double,
    Slow,
    Static,
}

/// Class label, an index into the 23-entry catalog.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct GestureId(pub u8);

pub const NUM_GESTURES: usize = 23;

impl GestureId {
    pub fn label(self) -> &'static str {
        LABELS[self.0 as usize]
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub const LABELS: [&str; NUM_GESTURES] = [
    "P1", "P2", "P23", "P4", "G", "U", "D", // quick
    "P1x2", "P2x2", "P23x2", "P4x2", "Gx2", "Ux2", "Dx2", // double quick
    "sP1", "sP2", "sP23", "sP4", "sG", "sU", "sD", "sF", // slow
    "R", // rest
];

/// Full description of one catalog entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GestureSpec {
    pub id: GestureId,
    pub basic: BasicGesture,
    pub tempo: Tempo,
    pub step1: MuscleSet,
    pub step2: MuscleSet,
    /// Holding time between the two steps; 2.0 s for slow gestures.
    pub hold_s: f64,
}

const DYNAMIC_BASICS: [BasicGesture; 7] = [
    BasicGesture::PointThumb,
    BasicGesture::PointIndex,
    BasicGesture::PointIndMid,
    BasicGesture::Point4Fingers,
    BasicGesture::Grasp,
    BasicGesture::WristUp,
    BasicGesture::WristDown,
];

/// The 23 protocol gestures: 7 quick, 7 double quick, 8 slow, 1 rest.
pub fn gesture_catalog() -> Vec<GestureSpec> {
    let mut catalog = Vec::with_capacity(NUM_GESTURES);
    let mut id = 0u8;
    let mut push = |basic: BasicGesture, tempo: Tempo, id: &mut u8| {
        let (step1, step2) = basic.step_muscles();
        let hold_s = if tempo == Tempo::Slow { 2.0 } else { 0.0 };
        catalog.push(GestureSpec {
            id: GestureId(*id),
            basic,
            tempo,
            step1,
            step2,
            hold_s,
        });
        *id += 1;
    };
    for basic in DYNAMIC_BASICS {
        push(basic, Tempo::Quick, &mut id);
    }
    for basic in DYNAMIC_BASICS {
        push(basic, Tempo::Double, &mut id);
    }
    for basic in DYNAMIC_BASICS {
        push(basic, Tempo::Slow, &mut id);
    }
    push(BasicGesture::Fist, Tempo::Slow, &mut id);
    push(BasicGesture::Rest, Tempo::Static, &mut id);
    catalog
}

impl GestureSpec {
    /// Human-readable label matching the protocol shorthand.
    pub fn label(&self) -> String {
        match self.tempo {
            Tempo::Quick => self.basic.code().to_string(),
            Tempo::Double => format!("{}x2", self.basic.code()),
            Tempo::Slow => format!("s{}", self.basic.code()),
            Tempo::Static => self.basic.code().to_string(),
        }
    }
}

/// Raised cosine supported on `[onset, onset + width]`, peaking at 1.
fn pulse(t: f64, onset: f64, width: f64) -> f64 {
    if t < onset || t > onset + width {
        0.0
    } else {
        0.5 * (1.0 - (std::f64::consts::TAU * (t - onset) / width).cos())
    }
}

/// Plateau with half-cosine attack and release ramps.
fn plateau(t: f64, onset: f64, hold: f64) -> f64 {
    if t < onset || t > onset + 2.0 * RAMP_S + hold {
        0.0
    } else if t < onset + RAMP_S {
        0.5 * (1.0 - (std::f64::consts::PI * (t - onset) / RAMP_S).cos())
    } else if t <= onset + RAMP_S + hold {
        1.0
    } else {
        let u = t - onset - RAMP_S - hold;
        0.5 * (1.0 + (std::f64::consts::PI * u / RAMP_S).cos())
    }
}

fn clamped_onset(jitter: f64) -> f64 {
    (BASE_ONSET_S + jitter).clamp(0.05, 2.0)
}

/// Per-muscle activation of `spec` at time `t`, with the whole pattern
/// shifted by `jitter` seconds. Values are in `[0, 1]`, indexed by
/// [`MuscleId::index`].
pub fn activation_envelope(spec: &GestureSpec, t: f64, jitter: f64) -> Result<[f64; 12]> {
    if !(0.0..=WINDOW_S).contains(&t) {
        return Err(RmgError::OutOfWindow { t });
    }
    let mut act = [0.0f64; 12];
    let onset = clamped_onset(jitter);
    let mut add = |set: MuscleSet, value: f64| {
        if value > 0.0 {
            for m in set.iter() {
                let a = &mut act[m.index()];
                *a = a.max(value);
            }
        }
    };
    match spec.tempo {
        Tempo::Static => {}
        Tempo::Quick => {
            add(spec.step1, pulse(t, onset, PULSE_WIDTH_S));
            add(spec.step2, pulse(t, onset + STEP_GAP_S, PULSE_WIDTH_S));
        }
        Tempo::Double => {
            for rep in 0..2 {
                let o = onset + rep as f64 * DOUBLE_GAP_S;
                add(spec.step1, pulse(t, o, PULSE_WIDTH_S));
                add(spec.step2, pulse(t, o + STEP_GAP_S, PULSE_WIDTH_S));
            }
        }
        Tempo::Slow => {
            add(spec.step1, plateau(t, onset, spec.hold_s));
            let step2_onset = onset + 2.0 * RAMP_S + spec.hold_s;
            add(spec.step2, pulse(t, step2_onset, PULSE_WIDTH_S));
        }
    }
    Ok(act)
}

/// Sample the activation envelope on a uniform grid of `n` samples at `fs`.
/// Returns a 12 x n matrix.
pub fn activation_matrix(
    spec: &GestureSpec,
    n: usize,
    fs: usize,
    jitter: f64,
) -> Result<ndarray::Array2<f64>> {
    let mut acts = ndarray::Array2::zeros((MuscleId::COUNT, n));
    let dt = 1.0 / fs as f64;
    for k in 0..n {
        let t = (k as f64 * dt).min(WINDOW_S);
        let a = activation_envelope(spec, t, jitter)?;
        for (m, &v) in a.iter().enumerate() {
            acts[[m, k]] = v;
        }
    }
    Ok(acts)
}
