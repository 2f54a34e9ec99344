//! Brute-force FSM oracle: instead of carrying a machine state, every
//! frame's expected outcome is derived from the whole script prefix.
//!
//! Rules read off the prefix at frame `t`:
//! - within `R` frames after a fire, nothing happens and the remaining
//!   refractory count is `f + R - t`;
//! - otherwise the run is the longest suffix of frames after the
//!   refractory period whose argmax is the same non-Null class at
//!   probability >= threshold;
//! - a run of exactly `N` frames fires.

use std::collections::HashMap;

use microgext::gesture::{GestureClass, NUM_CLASSES};
use microgext::stream::{fsm_step, FsmConfig, FsmState, Phase};

/// One scripted frame: the argmax class and its probability; the rest of
/// the mass is spread evenly over the other classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym {
    pub class: GestureClass,
    pub p: f64,
}

impl Sym {
    pub fn probs(&self) -> Vec<f64> {
        let rest = (1.0 - self.p) / (NUM_CLASSES - 1) as f64;
        let mut v = vec![rest; NUM_CLASSES];
        v[self.class.index()] = self.p;
        v
    }
}

pub const GRID: [f64; 3] = [0.30, 0.95, 0.99];
pub const CLASSES: [GestureClass; 4] = [
    GestureClass::Scissor,
    GestureClass::Swipe,
    GestureClass::Pinky,
    GestureClass::Null,
];

/// All 12 (class, probability) symbols.
pub fn full_alphabet() -> Vec<Sym> {
    CLASSES
        .iter()
        .flat_map(|&class| GRID.iter().map(move |&p| Sym { class, p }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub state: FsmState,
    pub fired: Option<(GestureClass, f64)>,
}

fn confident(s: &Sym, cfg: &FsmConfig) -> bool {
    s.class != GestureClass::Null && s.p >= cfg.threshold
}

/// Expected outcome at the last frame of `script`, given the frames at
/// which earlier prefixes fired.
pub fn oracle(script: &[Sym], last_fire: Option<usize>, cfg: &FsmConfig) -> Expected {
    let t = script.len() - 1;
    let idle = |refractory_remaining| FsmState {
        refractory_remaining,
        ..FsmState::IDLE
    };
    if let Some(f) = last_fire {
        if t <= f + cfg.refractory {
            return Expected {
                state: idle(f + cfg.refractory - t),
                fired: None,
            };
        }
    }
    let eligible = last_fire.map_or(0, |f| f + cfg.refractory + 1);
    let cur = script[t];
    if !confident(&cur, cfg) {
        return Expected {
            state: FsmState::IDLE,
            fired: None,
        };
    }
    let mut run = 0;
    let mut sum = 0.0;
    // sum in frame order, oldest first
    let mut k = t + 1;
    while k > eligible && confident(&script[k - 1], cfg) && script[k - 1].class == cur.class {
        k -= 1;
        run += 1;
    }
    for s in &script[k..=t] {
        sum += s.p;
    }
    if run >= cfg.consecutive {
        return Expected {
            state: idle(cfg.refractory),
            fired: Some((cur.class, sum / run as f64)),
        };
    }
    Expected {
        state: FsmState {
            phase: Phase::S2,
            candidate: Some(cur.class),
            count: run,
            refractory_remaining: 0,
            confidence_sum: sum,
        },
        fired: None,
    }
}

#[derive(Debug, Default, Clone)]
pub struct Exhaustive {
    /// Script prefixes checked (one per tree node).
    pub scripts: u64,
    pub fires: u64,
    pub discrepancies: u64,
    /// A run of N-1 confident frames followed by a drop was checked.
    pub saw_nine_of_ten: bool,
    /// A confident different class interrupted a candidate.
    pub saw_candidate_switch: bool,
    pub first_failure: Option<String>,
}

fn same(a: &FsmState, b: &FsmState) -> bool {
    a.phase == b.phase
        && a.candidate == b.candidate
        && a.count == b.count
        && a.refractory_remaining == b.refractory_remaining
        && (a.confidence_sum - b.confidence_sum).abs() <= 1e-12
}

/// Compares `fsm_step` with the oracle on every script over `alphabet` up
/// to `max_len` frames.
pub fn exhaustive(alphabet: &[Sym], max_len: usize, cfg: &FsmConfig) -> Exhaustive {
    let probs: Vec<Vec<f64>> = alphabet.iter().map(Sym::probs).collect();
    let mut out = Exhaustive::default();
    let mut script = Vec::with_capacity(max_len);
    descend(alphabet, &probs, max_len, cfg, &FsmState::IDLE, None, &mut script, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn descend(
    alphabet: &[Sym],
    probs: &[Vec<f64>],
    max_len: usize,
    cfg: &FsmConfig,
    state: &FsmState,
    last_fire: Option<usize>,
    script: &mut Vec<Sym>,
    out: &mut Exhaustive,
) {
    if script.len() == max_len {
        return;
    }
    for (sym, p) in alphabet.iter().zip(probs) {
        script.push(*sym);
        let t = script.len() - 1;
        let (next, fired) = fsm_step(state, p, cfg).expect("valid probabilities");
        let want = oracle(script, last_fire, cfg);
        out.scripts += 1;
        let got_fired = fired.map(|f| (f.gesture, f.mean_confidence));
        let fired_ok = match (got_fired, want.fired) {
            (None, None) => true,
            (Some((g, m)), Some((wg, wm))) => g == wg && (m - wm).abs() <= 1e-12,
            _ => false,
        };
        if !fired_ok || !same(&next, &want.state) {
            out.discrepancies += 1;
            if out.first_failure.is_none() {
                out.first_failure = Some(format!("{script:?}: got {next:?} {got_fired:?}, want {want:?}"));
            }
        }
        if state.phase == Phase::S2 && state.refractory_remaining == 0 {
            let confident_now = confident(sym, cfg);
            if state.count + 1 == cfg.consecutive && !confident_now {
                out.saw_nine_of_ten = true;
            }
            if confident_now && state.candidate != Some(sym.class) {
                out.saw_candidate_switch = true;
            }
        }
        // the oracle's own fire history, so a mismatch cannot hide later ones
        let lf = if want.fired.is_some() {
            out.fires += 1;
            Some(t)
        } else {
            last_fire
        };
        descend(alphabet, probs, max_len, cfg, &next, lf, script, out);
        script.pop();
    }
}

/// The part of a prefix that `oracle` can still read on any extension:
/// frames since the last fire while refractory, otherwise the current
/// confident same-class run (which never reaches back past eligibility).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Context {
    Refractory(usize),
    Run(Vec<(usize, u64)>),
}

fn context(script: &[Sym], last_fire: Option<usize>, cfg: &FsmConfig) -> Context {
    let Some(t) = script.len().checked_sub(1) else {
        return Context::Run(Vec::new());
    };
    if let Some(f) = last_fire {
        if t <= f + cfg.refractory {
            return Context::Refractory(t - f);
        }
    }
    let eligible = last_fire.map_or(0, |f| f + cfg.refractory + 1);
    let cur = script[t];
    let mut k = t + 1;
    if confident(&cur, cfg) {
        while k > eligible && confident(&script[k - 1], cfg) && script[k - 1].class == cur.class {
            k -= 1;
        }
    }
    Context::Run(script[k..].iter().map(|s| (s.class.index(), s.p.to_bits())).collect())
}

fn state_key(s: &FsmState) -> String {
    // Debug prints f64 in shortest round-trip form, so this is injective
    format!("{s:?}")
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    scripts: u64,
    fires: u64,
    discrepancies: u64,
}

type Memo = HashMap<(usize, String, Context), Counts>;

/// Same check and counts as [`exhaustive`], but subtrees whose root has
/// an already-seen (FSM state, oracle context, remaining length) are not
/// re-walked: every comparison inside them would repeat one already made.
/// `distinct_nodes` reports how many comparisons were actually executed.
pub fn exhaustive_memo(alphabet: &[Sym], max_len: usize, cfg: &FsmConfig) -> (Exhaustive, u64) {
    let probs: Vec<Vec<f64>> = alphabet.iter().map(Sym::probs).collect();
    let mut out = Exhaustive::default();
    let mut memo = Memo::new();
    let mut distinct = 0;
    let mut script = Vec::with_capacity(max_len);
    let c = expand(
        alphabet,
        &probs,
        max_len,
        cfg,
        &FsmState::IDLE,
        None,
        &mut script,
        &mut out,
        &mut memo,
        &mut distinct,
    );
    out.scripts = c.scripts;
    out.fires = c.fires;
    out.discrepancies = c.discrepancies;
    (out, distinct)
}

#[allow(clippy::too_many_arguments)]
fn expand(
    alphabet: &[Sym],
    probs: &[Vec<f64>],
    remaining: usize,
    cfg: &FsmConfig,
    state: &FsmState,
    last_fire: Option<usize>,
    script: &mut Vec<Sym>,
    out: &mut Exhaustive,
    memo: &mut Memo,
    distinct: &mut u64,
) -> Counts {
    if remaining == 0 {
        return Counts::default();
    }
    let key = (remaining, state_key(state), context(script, last_fire, cfg));
    if let Some(c) = memo.get(&key) {
        return *c;
    }
    let mut total = Counts::default();
    for (sym, p) in alphabet.iter().zip(probs) {
        script.push(*sym);
        let t = script.len() - 1;
        let (next, fired) = fsm_step(state, p, cfg).expect("valid probabilities");
        let want = oracle(script, last_fire, cfg);
        *distinct += 1;
        total.scripts += 1;
        let got_fired = fired.map(|f| (f.gesture, f.mean_confidence));
        let fired_ok = match (got_fired, want.fired) {
            (None, None) => true,
            (Some((g, m)), Some((wg, wm))) => g == wg && (m - wm).abs() <= 1e-12,
            _ => false,
        };
        if !fired_ok || !same(&next, &want.state) {
            total.discrepancies += 1;
            if out.first_failure.is_none() {
                out.first_failure = Some(format!("{script:?}: got {next:?} {got_fired:?}, want {want:?}"));
            }
        }
        if state.phase == Phase::S2 && state.refractory_remaining == 0 {
            let confident_now = confident(sym, cfg);
            if state.count + 1 == cfg.consecutive && !confident_now {
                out.saw_nine_of_ten = true;
            }
            if confident_now && state.candidate != Some(sym.class) {
                out.saw_candidate_switch = true;
            }
        }
        let lf = if want.fired.is_some() {
            total.fires += 1;
            Some(t)
        } else {
            last_fire
        };
        let sub = expand(alphabet, probs, remaining - 1, cfg, &next, lf, script, out, memo, distinct);
        total.scripts += sub.scripts;
        total.fires += sub.fires;
        total.discrepancies += sub.discrepancies;
        script.pop();
    }
    memo.insert(key, total);
    total
}
