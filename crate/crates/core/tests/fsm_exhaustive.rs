mod support;

use support::fsm_oracle::{exhaustive, exhaustive_memo, full_alphabet, Sym};
use microgext::gesture::GestureClass;
use microgext::stream::FsmConfig;

fn check(alphabet: &[Sym], len: usize, cfg: FsmConfig) -> u64 {
    let r = exhaustive(alphabet, len, &cfg);
    assert_eq!(r.discrepancies, 0, "{cfg:?}: {:?}", r.first_failure);
    r.fires
}

#[test]
fn full_grid_short_scripts_default_config() {
    check(&full_alphabet(), 5, FsmConfig::default());
}

#[test]
fn full_grid_small_configs_fire_and_rearm() {
    for (consecutive, refractory) in [(1, 0), (2, 0), (2, 1), (3, 2)] {
        let cfg = FsmConfig {
            consecutive,
            refractory,
            ..FsmConfig::default()
        };
        assert!(check(&full_alphabet(), 5, cfg) > 0);
    }
}

#[test]
fn default_config_reaches_fire_and_near_misses() {
    let a = |class, p| Sym { class, p };
    let alphabet = [
        a(GestureClass::Scissor, 0.99),
        a(GestureClass::Swipe, 0.99),
        a(GestureClass::Null, 0.99),
    ];
    let r = exhaustive(&alphabet, 11, &FsmConfig::default());
    assert_eq!(r.discrepancies, 0, "{:?}", r.first_failure);
    assert!(r.fires > 0 && r.saw_nine_of_ten && r.saw_candidate_switch);
}

#[test]
fn memoized_walk_agrees_with_plain_walk() {
    for (consecutive, refractory, len) in [(10, 20, 6), (2, 1, 6), (3, 2, 6)] {
        let cfg = FsmConfig {
            consecutive,
            refractory,
            ..FsmConfig::default()
        };
        let plain = exhaustive(&full_alphabet(), len, &cfg);
        let (memo, distinct) = exhaustive_memo(&full_alphabet(), len, &cfg);
        assert_eq!(
            (plain.scripts, plain.fires, plain.discrepancies),
            (memo.scripts, memo.fires, memo.discrepancies),
            "{cfg:?}"
        );
        assert!(distinct <= memo.scripts);
    }
}

#[test]
fn full_grid_length_twelve_default_config() {
    let (r, _) = exhaustive_memo(&full_alphabet(), 12, &FsmConfig::default());
    let all: u64 = (1..=12).map(|l| 12u64.pow(l)).sum();
    assert_eq!(r.scripts, all);
    assert_eq!(r.discrepancies, 0, "{:?}", r.first_failure);
    assert!(r.fires > 0 && r.saw_nine_of_ten && r.saw_candidate_switch);
}
