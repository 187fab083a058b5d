//! Seeded synthetic inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refinebench::orchestrator::AttemptRecord;
use refinebench::stats::PairedOutcomes;
use refinebench::{ConfidenceHint, FailureDetail, JudgeResult, SessionLog, Verdict};

pub fn pairs(n: usize, seed: u64) -> PairedOutcomes {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PairedOutcomes::new((0..n).map(|_| (rng.random_bool(0.45), rng.random_bool(0.3))).collect())
}

pub fn hints(n: usize, seed: u64) -> Vec<ConfidenceHint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let level = rng.random_range(1..=5u8);
            let accepted = rng.random_bool(f64::from(level) / 6.0);
            ConfidenceHint::new(level, "hint").expect("level in range").resolved(accepted)
        })
        .collect()
}

/// Sessions that fail a random number of times before acceptance, or run
/// out of budget.
pub fn logs(n: usize, seed: u64) -> Vec<SessionLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let fails = rng.random_range(0..=4usize);
            let attempts = (0..fails.min(4))
                .map(|k| {
                    let v = if rng.random_bool(0.6) { Verdict::WrongAnswer } else { Verdict::TimeLimitExceeded };
                    AttemptRecord::new(k as u32, "code", JudgeResult::failed(v, 10, 100, FailureDetail::at(1)))
                })
                .chain((fails < 4).then(|| AttemptRecord::new(fails as u32, "code", JudgeResult::accepted(10, 100))))
                .collect();
            SessionLog::from_attempts(format!("p{i}"), "w", "stateful", Some(1200 + 100 * (i as u32 % 7)), 4, attempts, None)
        })
        .collect()
}
