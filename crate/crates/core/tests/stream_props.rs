use microgext::gesture::{GestureClass, NUM_CLASSES};
use microgext::stream::{fsm_step, FsmConfig, FsmState};
use proptest::prelude::*;

/// A probability vector with a chosen argmax class.
fn probs() -> impl Strategy<Value = Vec<f64>> {
    (0usize..NUM_CLASSES, 0.2f64..1.0, prop::collection::vec(0.0f64..1.0, NUM_CLASSES)).prop_map(|(k, top, noise)| {
        let rest: f64 = noise.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| v).sum();
        let scale = if rest > 0.0 { (1.0 - top) / rest } else { 0.0 };
        let mut v: Vec<f64> = noise.iter().map(|x| x * scale).collect();
        v[k] = top;
        if rest == 0.0 {
            v[k] = 1.0;
        }
        v
    })
}

fn cfg() -> impl Strategy<Value = FsmConfig> {
    (0.5f64..0.99, 1usize..12, 0usize..25).prop_map(|(threshold, consecutive, refractory)| FsmConfig {
        threshold,
        consecutive,
        refractory,
    })
}

fn argmax(p: &[f64]) -> usize {
    (1..p.len()).fold(0, |b, k| if p[k] > p[b] { k } else { b })
}

proptest! {
    #[test]
    fn fires_only_after_n_consecutive_confident_frames(cfg in cfg(), script in prop::collection::vec(probs(), 1..80)) {
        let mut state = FsmState::IDLE;
        let mut last_fire: Option<usize> = None;
        for (t, p) in script.iter().enumerate() {
            let (next, fired) = fsm_step(&state, p, &cfg).unwrap();
            prop_assert_eq!(fsm_step(&state, p, &cfg).unwrap(), (next, fired));
            if let Some(f) = fired {
                prop_assert!(t + 1 >= cfg.consecutive);
                let from = t + 1 - cfg.consecutive;
                if let Some(lf) = last_fire {
                    prop_assert!(from > lf + cfg.refractory);
                }
                for q in &script[from..=t] {
                    let k = argmax(q);
                    prop_assert_eq!(GestureClass::ALL[k], f.gesture);
                    prop_assert!(q[k] >= cfg.threshold);
                }
                prop_assert_ne!(f.gesture, GestureClass::Null);
                prop_assert!(f.mean_confidence >= cfg.threshold && f.mean_confidence <= 1.0 + 1e-12);
                last_fire = Some(t);
            }
            prop_assert!(next.count < cfg.consecutive);
            state = next;
        }
    }
}
