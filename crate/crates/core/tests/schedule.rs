//! Schedule-level properties across arbitrary system shapes: the epoch log
//! must tile time contiguously, respect the quadrupling length rule, and
//! stay inside the exploration/exploitation budgets at every slot — no
//! matter what the player observes.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rmab_core::analysis::{exploitation_count_bound, exploration_time_bound};
use rmab_core::policy::{
    CoordinationMode, EpochKind, Feedback, ParamMode, PlayerState,
};

struct Driven {
    player: PlayerState,
    choices: Vec<usize>,
}

fn drive(
    id: usize,
    m: usize,
    n: usize,
    l: f64,
    d: f64,
    horizon: u64,
    observation_seed: u64,
) -> Driven {
    let mut player = PlayerState::new(
        id,
        m,
        n,
        CoordinationMode::PreAgreement,
        ParamMode::Fixed { l, d },
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(observation_seed);
    let mut fb: Option<Feedback> = None;
    let mut choices = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let arm = player.step(t, fb.as_ref(), &mut rng).unwrap();
        choices.push(arm);
        // observation stream unrelated to the arms' true values
        let state: f64 = 0.5 + rand::Rng::random_range(&mut rng, 0.0..2.0);
        fb = Some(Feedback {
            arm,
            state,
            collision: false,
        });
    }
    player.finish(&fb.unwrap()).unwrap();
    Driven { player, choices }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn epoch_log_tiles_time_and_respects_budgets(
        n in 1usize..=6,
        m_offset in 0usize..6,
        d in 0.0f64..40.0,
        l in 0.0f64..8.0,
        observation_seed in 0u64..1_000,
    ) {
        let m = 1 + m_offset % n;
        let horizon = 20_000u64;
        let driven = drive(1, m, n, l, d, horizon, observation_seed);
        let log = driven.player.epoch_log();

        // contiguous tiling from slot 1
        let mut t = 1u64;
        for rec in log {
            prop_assert_eq!(rec.start, t);
            t += rec.len;
        }
        prop_assert!(t > horizon, "log stops early at {t}");

        // length rule: k-th epoch of each type
        let (mut k_explore, mut k_exploit) = (0u32, 0u32);
        for rec in log {
            match rec.kind {
                EpochKind::Exploration => {
                    prop_assert_eq!(rec.len, n as u64 * 4u64.pow(k_explore));
                    k_explore += 1;
                }
                EpochKind::Exploitation => {
                    prop_assert_eq!(rec.len, 2 * m as u64 * 4u64.pow(k_exploit));
                    k_exploit += 1;
                }
            }
        }
        prop_assert_eq!(log[0].kind, EpochKind::Exploration);

        // per-slot budgets
        let mut kind_at = vec![EpochKind::Exploration; horizon as usize];
        for rec in log {
            let end = (rec.start + rec.len - 1).min(horizon);
            for slot in rec.start..=end {
                kind_at[(slot - 1) as usize] = rec.kind;
            }
        }
        let mut per_arm = vec![0u64; n];
        let mut exploit_started = 0u32;
        let mut log_iter = log.iter().peekable();
        for t in 1..=horizon {
            if let Some(rec) = log_iter.peek() {
                if rec.start == t {
                    if rec.kind == EpochKind::Exploitation {
                        exploit_started += 1;
                    }
                    log_iter.next();
                }
            }
            if kind_at[(t - 1) as usize] == EpochKind::Exploration {
                per_arm[driven.choices[(t - 1) as usize] - 1] += 1;
            }
            let worst = *per_arm.iter().max().unwrap() as f64;
            prop_assert!(
                worst <= exploration_time_bound(t, d) + 1e-9,
                "exploration budget broken at t={t}: {worst}"
            );
            if t > n as u64 {
                prop_assert!(
                    exploit_started <= exploitation_count_bound(t, n).unwrap(),
                    "exploitation count broken at t={t}"
                );
            }
        }

        // every slot accounted for in the sample statistics
        let total: u64 = (1..=n).map(|a| driven.player.plays(a)).sum();
        prop_assert_eq!(total, horizon);
        // the first exploration epoch covered every arm
        for a in 1..=n {
            prop_assert!(driven.player.plays(a) >= 1);
        }
    }

    #[test]
    fn players_with_equal_schedules_stay_in_lockstep(
        n in 2usize..=5,
        d in 0.0f64..20.0,
        seed_a in 0u64..500,
        seed_b in 500u64..1_000,
    ) {
        let m = 2usize;
        // different ids, different observation streams, same (D, N, M)
        let a = drive(1, m, n, 1.0, d, 8_000, seed_a);
        let b = drive(2, m, n, 1.0, d, 8_000, seed_b);
        prop_assert_eq!(a.player.epoch_log(), b.player.epoch_log());
    }
}
