//! Scripted editing sessions: scenario timelines rendered to two hand
//! streams, and the pipeline that drives a document from those streams.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edit::handpose::{roll_sector, PINCH_HOLD_S};
use crate::edit::{
    apply, bind_event, mode_switch_step, Document, EditCommand, EditorContext, LogRecord, ModeSwitchState,
    PinchHoldDetector, SwipeMapping,
};
use crate::gesture::{GestureClass, SubState};
use crate::recognizer::ModelParams;
use crate::skeleton::{HandFrame, Handedness, FRAME_RATE_HZ};
use crate::stream::{FsmConfig, GestureEvent, Runtime, StreamError};
use crate::synth::{derive_seed, Action, Performer, Segment, SubjectParams};

/// The built-in eight-command scenario.
pub const EIGHT_COMMANDS: &str = include_str!("../scenarios/eight_commands.toml");

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

/// One timed action of one hand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioStep {
    pub hand: Handedness,
    pub action: Action,
    /// Seconds from the start of the session.
    pub start: f64,
    pub duration: f64,
    /// Wrist roll held during the step, degrees.
    #[serde(default)]
    pub roll_deg: f64,
    /// Blend time into the step, seconds.
    #[serde(default)]
    pub transition: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Initial document text and caret.
    pub text: String,
    #[serde(default)]
    pub caret: usize,
    /// Performer identity: subject id and the population seed it is drawn
    /// with.
    pub subject: u32,
    pub population_seed: u64,
    /// Seed for per-performance variation.
    pub seed: u64,
    /// Session length, seconds.
    pub duration: f64,
    #[serde(default)]
    pub swipe_mapping: SwipeMapping,
    pub steps: Vec<ScenarioStep>,
}

/// The two rendered streams, each in timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub struct Streams {
    pub right: Vec<HandFrame>,
    pub left: Vec<HandFrame>,
}

impl Streams {
    /// Frames of both hands merged by timestamp, right hand first on ties.
    pub fn merged(&self) -> Vec<HandFrame> {
        let mut out = Vec::with_capacity(self.right.len() + self.left.len());
        let (mut i, mut j) = (0, 0);
        while i < self.right.len() || j < self.left.len() {
            let take_right = match (self.right.get(i), self.left.get(j)) {
                (Some(r), Some(l)) => r.timestamp <= l.timestamp,
                (Some(_), None) => true,
                _ => false,
            };
            if take_right {
                out.push(self.right[i].clone());
                i += 1;
            } else {
                out.push(self.left[j].clone());
                j += 1;
            }
        }
        out
    }
}

/// What a step is meant to trigger, independent of recognition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intent {
    Gesture(GestureClass),
    PinchHold,
    OpenMenu,
    ConfirmMenu { roll_deg: f64 },
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, SessionError> {
        let s: Scenario = toml::from_str(text).map_err(|e| SessionError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn eight_commands() -> Self {
        Self::parse(EIGHT_COMMANDS).expect("built-in scenario parses")
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::InvalidScenario(m));
        if self.caret > self.text.chars().count() {
            return bad(format!("caret {} past end of text", self.caret));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive".into());
        }
        for hand in [Handedness::Right, Handedness::Left] {
            let mut end = 0.0;
            for s in self.steps_of(hand) {
                if !(s.duration > 0.0) || s.start < end - 1e-9 {
                    return bad(format!("{hand:?} step at {} overlaps or is empty", s.start));
                }
                end = s.start + s.duration;
            }
            if end > self.duration + 1e-9 {
                return bad(format!("{hand:?} steps run past the session end"));
            }
        }
        Ok(())
    }

    fn steps_of(&self, hand: Handedness) -> Vec<ScenarioStep> {
        let mut v: Vec<ScenarioStep> = self.steps.iter().filter(|s| s.hand == hand).copied().collect();
        v.sort_by(|a, b| a.start.total_cmp(&b.start));
        v
    }

    fn timeline(&self, hand: Handedness) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut t = 0.0;
        let mut roll = 0.0;
        for s in self.steps_of(hand) {
            if s.start > t + 1e-9 {
                out.push(Segment::new(Action::Rest, s.start - t).with_roll(roll));
            }
            roll = s.roll_deg.to_radians();
            let mut seg = Segment::new(s.action, s.duration).with_roll(roll);
            if let Some(tr) = s.transition {
                seg = seg.with_transition(tr);
            }
            out.push(seg);
            t = s.start + s.duration;
        }
        out.push(Segment::new(Action::Rest, (self.duration - t).max(0.0)).with_roll(0.0));
        out
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * FRAME_RATE_HZ).round() as usize
    }

    /// Renders both hands at 72 Hz.
    pub fn render(&self) -> Streams {
        let subject = SubjectParams::sample(self.subject, self.population_seed);
        let performer = Performer::new(subject);
        let n = self.frame_count();
        let rest = Some(Segment::new(Action::Rest, 0.0).with_transition(0.0));
        let right = performer.perform(
            &self.timeline(Handedness::Right),
            rest,
            n,
            0.0,
            Handedness::Right,
            derive_seed(&[self.seed, 0x52]),
        );
        let left = performer.perform(
            &self.timeline(Handedness::Left),
            rest,
            n,
            0.0,
            Handedness::Left,
            derive_seed(&[self.seed, 0x4C]),
        );
        Streams { right, left }
    }

    /// Intended triggers in time order, read off the script.
    pub fn intents(&self) -> Vec<(f64, Intent)> {
        let mut out: Vec<(f64, Intent)> = self
            .steps
            .iter()
            .filter_map(|s| {
                let intent = match (s.hand, s.action) {
                    (Handedness::Right, Action::Hold { gesture }) => Intent::Gesture(gesture),
                    (Handedness::Right, Action::Sweep { .. } | Action::SwipeCycle) => {
                        Intent::Gesture(GestureClass::Swipe)
                    }
                    (Handedness::Right, Action::Pinch) if s.duration >= PINCH_HOLD_S => Intent::PinchHold,
                    (Handedness::Left, Action::ThumbUp) => Intent::OpenMenu,
                    (Handedness::Left, Action::Spread) => Intent::ConfirmMenu { roll_deg: s.roll_deg },
                    _ => return None,
                };
                Some((s.start, intent))
            })
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Gesture events the script should fire, in order.
    pub fn intended_gestures(&self) -> Vec<GestureClass> {
        self.intents()
            .into_iter()
            .filter_map(|(_, i)| match i {
                Intent::Gesture(g) => Some(g),
                _ => None,
            })
            .collect()
    }

    /// Commands the script means to issue, derived from the script alone
    /// with the same binding rules the pipeline uses.
    pub fn intended_commands(&self) -> Vec<EditCommand> {
        let mut ctx = EditorContext {
            selection_armed: false,
            swipe_mapping: self.swipe_mapping,
        };
        let mut menu_open = false;
        let mut out = Vec::new();
        for (t, intent) in self.intents() {
            match intent {
                Intent::Gesture(g) => {
                    // the net direction a sweep would leave in the sub-state trace
                    let trace = match self.steps.iter().find(|s| s.start == t && s.hand == Handedness::Right) {
                        Some(ScenarioStep {
                            action: Action::Sweep { from, to },
                            ..
                        }) => Some(vec![SubState::from_progress(*from), SubState::from_progress(*to)]),
                        _ => None,
                    };
                    let event = GestureEvent {
                        gesture: g,
                        fired_at: t,
                        mean_confidence: 1.0,
                        swipe_substate_trace: trace,
                    };
                    out.extend(bind_event(&event, &ctx));
                    if g != GestureClass::Swipe {
                        ctx.selection_armed = false;
                    }
                }
                Intent::PinchHold => {
                    if ctx.selection_armed {
                        out.push(EditCommand::ConfirmCaret);
                    }
                    ctx.selection_armed = !ctx.selection_armed;
                }
                Intent::OpenMenu => menu_open = true,
                Intent::ConfirmMenu { roll_deg } => {
                    if menu_open {
                        out.push(EditCommand::SetGranularity(roll_sector(roll_deg.to_radians())));
                        menu_open = false;
                    }
                }
            }
        }
        out
    }

    /// The document the script should produce.
    pub fn golden_document(&self) -> Document {
        let mut doc = Document::with_caret(&self.text, self.caret);
        for cmd in self.intended_commands() {
            if let Ok(d) = apply(&doc, cmd) {
                doc = d;
            }
        }
        doc
    }
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

/// Latency summary in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub frames: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(ms: &[f64]) -> Self {
        Self {
            frames: ms.len(),
            p50_ms: percentile(ms, 50.0),
            p95_ms: percentile(ms, 95.0),
            p99_ms: percentile(ms, 99.0),
            max_ms: ms.iter().copied().fold(f64::NAN, f64::max),
        }
    }
}

/// Right-hand gestures, pinch-hold and the left-hand menu driving one
/// document.
#[derive(Debug, Clone)]
pub struct EditorSession {
    runtime: Runtime,
    menu: ModeSwitchState,
    pinch: PinchHoldDetector,
    ctx: EditorContext,
    doc: Document,
    log: Vec<LogRecord>,
    events: Vec<GestureEvent>,
    warnings: Vec<String>,
    latencies_ms: Vec<f64>,
}

impl EditorSession {
    pub fn new(
        params: Arc<ModelParams<f32>>,
        fsm: FsmConfig,
        doc: Document,
        swipe_mapping: SwipeMapping,
    ) -> Result<Self, SessionError> {
        Ok(Self {
            runtime: Runtime::new(params, fsm)?,
            menu: ModeSwitchState::default(),
            pinch: PinchHoldDetector::new(),
            ctx: EditorContext {
                selection_armed: false,
                swipe_mapping,
            },
            doc,
            log: Vec::new(),
            events: Vec::new(),
            warnings: Vec::new(),
            latencies_ms: Vec::new(),
        })
    }

    pub fn document(&self) -> &Document {
        &self.doc
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn events(&self) -> &[GestureEvent] {
        &self.events
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn selection_armed(&self) -> bool {
        self.ctx.selection_armed
    }

    /// Wall-clock time of each right-hand `push_frame` after warm-up.
    pub fn latencies_ms(&self) -> &[f64] {
        &self.latencies_ms
    }

    fn issue(&mut self, timestamp: f64, command: EditCommand) {
        self.log.push(LogRecord { timestamp, command });
        match apply(&self.doc, command) {
            Ok(d) => self.doc = d,
            Err(e) => self.warnings.push(format!("{timestamp:.6} {command}: {e}")),
        }
    }

    /// Routes a frame to the right-hand or left-hand pipeline.
    pub fn push(&mut self, frame: &HandFrame) -> Result<Option<GestureEvent>, SessionError> {
        match frame.handedness {
            Handedness::Right => self.push_right(frame),
            Handedness::Left => {
                self.push_left(frame);
                Ok(None)
            }
        }
    }

    pub fn push_right(&mut self, frame: &HandFrame) -> Result<Option<GestureEvent>, SessionError> {
        let warm = self.runtime.buffered() + 1 >= crate::skeleton::WINDOW_LEN;
        let t0 = Instant::now();
        let event = self.runtime.push_frame(frame.clone())?;
        if warm {
            self.latencies_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        if self.pinch.push(frame) {
            if self.ctx.selection_armed {
                self.issue(frame.timestamp, EditCommand::ConfirmCaret);
            }
            self.ctx.selection_armed = !self.ctx.selection_armed;
        }
        if let Some(e) = &event {
            self.events.push(e.clone());
            if let Some(cmd) = bind_event(e, &self.ctx) {
                self.issue(frame.timestamp, cmd);
            }
            if e.gesture != GestureClass::Swipe {
                self.ctx.selection_armed = false;
            }
        }
        Ok(event)
    }

    pub fn push_left(&mut self, frame: &HandFrame) {
        let (next, cmd) = mode_switch_step(self.menu, frame);
        self.menu = next;
        if let Some(cmd) = cmd {
            self.issue(frame.timestamp, cmd);
        }
    }
}
