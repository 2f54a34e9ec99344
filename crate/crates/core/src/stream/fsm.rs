//! Confidence-gated gesture state machine.
//!
//! S1 waits for a confident non-Null class, S2 counts consecutive confident
//! frames of the candidate, and reaching `consecutive` frames fires the
//! event (the transient S3) and returns to S1.

use serde::{Deserialize, Serialize};

use super::StreamError;
use crate::gesture::{GestureClass, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmConfig {
    /// Probability a class must reach (inclusive).
    pub threshold: f64,
    /// Consecutive confident frames needed to fire.
    pub consecutive: usize,
    /// Frames ignored after a fire.
    pub refractory: usize,
}

impl Default for FsmConfig {
    fn default() -> Self {
        Self {
            threshold: 0.95,
            consecutive: 10,
            refractory: 20,
        }
    }
}

impl FsmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(format!("threshold must be in (0, 1), got {}", self.threshold));
        }
        if self.consecutive == 0 {
            return Err("consecutive must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    S1,
    S2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsmState {
    pub phase: Phase,
    pub candidate: Option<GestureClass>,
    pub count: usize,
    pub refractory_remaining: usize,
    /// Sum of the candidate's probability over the counted frames.
    pub confidence_sum: f64,
}

impl Default for FsmState {
    fn default() -> Self {
        Self::IDLE
    }
}

impl FsmState {
    pub const IDLE: FsmState = FsmState {
        phase: Phase::S1,
        candidate: None,
        count: 0,
        refractory_remaining: 0,
        confidence_sum: 0.0,
    };

    fn idle_with(refractory_remaining: usize) -> Self {
        Self {
            refractory_remaining,
            ..Self::IDLE
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fired {
    pub gesture: GestureClass,
    /// Mean candidate probability over the confirming frames.
    pub mean_confidence: f64,
}

/// Checks that `probs` is a probability vector over the gesture classes.
pub fn check_probs(probs: &[f64]) -> Result<(), StreamError> {
    if probs.len() != NUM_CLASSES {
        return Err(StreamError::MalformedProbs(format!("{} entries", probs.len())));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0 + 1e-9) {
        return Err(StreamError::MalformedProbs("entry outside [0, 1]".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-5 {
        return Err(StreamError::MalformedProbs(format!("sum {sum}")));
    }
    Ok(())
}

/// Advances the machine by one frame. Ties in the argmax go to the lower
/// class index.
pub fn fsm_step(state: &FsmState, probs: &[f64], cfg: &FsmConfig) -> Result<(FsmState, Option<Fired>), StreamError> {
    check_probs(probs)?;
    if state.refractory_remaining > 0 {
        return Ok((FsmState::idle_with(state.refractory_remaining - 1), None));
    }
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if probs[k] > probs[best] {
            best = k;
        }
    }
    let class = GestureClass::ALL[best];
    let p = probs[best];
    if class == GestureClass::Null || p < cfg.threshold {
        return Ok((FsmState::IDLE, None));
    }
    let next = match (state.phase, state.candidate) {
        (Phase::S2, Some(c)) if c == class => FsmState {
            count: state.count + 1,
            confidence_sum: state.confidence_sum + p,
            ..*state
        },
        _ => FsmState {
            phase: Phase::S2,
            candidate: Some(class),
            count: 1,
            refractory_remaining: 0,
            confidence_sum: p,
        },
    };
    if next.count >= cfg.consecutive {
        let fired = Fired {
            gesture: class,
            mean_confidence: next.confidence_sum / next.count as f64,
        };
        return Ok((FsmState::idle_with(cfg.refractory), Some(fired)));
    }
    Ok((next, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(class: GestureClass, p: f64) -> Vec<f64> {
        let mut v = vec![(1.0 - p) / 7.0; NUM_CLASSES];
        v[class.index()] = p;
        v
    }

    fn run(script: &[Vec<f64>], cfg: &FsmConfig) -> (FsmState, Vec<(usize, Fired)>) {
        let mut s = FsmState::IDLE;
        let mut fired = Vec::new();
        for (i, p) in script.iter().enumerate() {
            let (n, f) = fsm_step(&s, p, cfg).unwrap();
            if let Some(f) = f {
                fired.push((i, f));
            }
            s = n;
        }
        (s, fired)
    }

    #[test]
    fn ten_confident_frames_fire_on_the_tenth() {
        let cfg = FsmConfig::default();
        let script = vec![probs(GestureClass::Fist, 0.97); 10];
        let (s, fired) = run(&script, &cfg);
        assert_eq!(fired.len(), 1);
        assert_eq!(fired[0].0, 9);
        assert_eq!(fired[0].1.gesture, GestureClass::Fist);
        assert!((fired[0].1.mean_confidence - 0.97).abs() < 1e-12);
        assert_eq!(s.phase, Phase::S1);
        assert_eq!(s.refractory_remaining, 20);
    }

    #[test]
    fn nine_then_a_drop_does_not_fire() {
        let cfg = FsmConfig::default();
        let mut script = vec![probs(GestureClass::Fist, 0.97); 9];
        let mut low = vec![0.5 / 7.0; NUM_CLASSES];
        low[GestureClass::Fist.index()] = 0.5;
        script.push(low);
        let (s, fired) = run(&script, &cfg);
        assert!(fired.is_empty());
        assert_eq!(s.phase, Phase::S1);
        assert_eq!(s.count, 0);
    }

    #[test]
    fn switching_candidate_restarts_the_count() {
        let cfg = FsmConfig::default();
        let mut script = vec![probs(GestureClass::Fist, 0.99); 5];
        script.extend(vec![probs(GestureClass::Open, 0.99); 9]);
        let (s, fired) = run(&script, &cfg);
        assert!(fired.is_empty());
        assert_eq!(s.candidate, Some(GestureClass::Open));
        assert_eq!(s.count, 9);
    }

    #[test]
    fn null_never_becomes_a_candidate() {
        let cfg = FsmConfig::default();
        let script = vec![probs(GestureClass::Null, 0.999); 50];
        let (s, fired) = run(&script, &cfg);
        assert!(fired.is_empty());
        assert_eq!(s, FsmState::IDLE);
    }

    #[test]
    fn refractory_suppresses_new_candidates() {
        let cfg = FsmConfig::default();
        let script = vec![probs(GestureClass::Ring, 0.99); 40];
        let (_, fired) = run(&script, &cfg);
        // fire at 9, 20 frames ignored (10..=29), next fire at 39
        let at: Vec<usize> = fired.iter().map(|f| f.0).collect();
        assert_eq!(at, vec![9, 39]);
    }

    #[test]
    fn malformed_probs_are_rejected() {
        let cfg = FsmConfig::default();
        let s = FsmState::IDLE;
        assert!(fsm_step(&s, &[0.5; 8], &cfg).is_err());
        assert!(fsm_step(&s, &[1.0; 3], &cfg).is_err());
        let mut nan = probs(GestureClass::Fist, 0.9);
        nan[0] = f64::NAN;
        assert!(fsm_step(&s, &nan, &cfg).is_err());
    }
}
