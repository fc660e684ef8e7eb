//! Brute-force attack simulation against static and dynamic randomization.
//!
//! An attacker guesses the randomized form of a known command of `length`
//! bytes under a 1-to-`expansion` scheme over an `alphabet`-symbol output
//! set. The candidate space is every injective assignment: P(n^k, L)
//! ordered arrangements. Static randomization keeps one hidden pad for the
//! whole run, so enumerating without repetition finds it in (space+1)/2
//! attempts on average (uniform over positions). Dynamic randomization
//! redraws the pad per attempt, making every guess an independent 1/space
//! shot: a geometric distribution with mean equal to the space size —
//! twice the static cost.

use randlab_core::prng::Prng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BruteForceError {
    #[error("alphabet must have at least 2 symbols (got {0})")]
    AlphabetTooSmall(usize),
    #[error("command length must be at least 1")]
    ZeroLength,
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("expansion must be one of 1, 2, 4, 8 (got {0})")]
    BadExpansion(usize),
    #[error("search space for n={alphabet}, k={expansion}, L={length} overflows 64 bits")]
    SpaceOverflow {
        alphabet: usize,
        expansion: usize,
        length: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy)]
pub struct BruteForceConfig {
    pub mode: Mode,
    pub expansion: usize,
    pub alphabet: usize,
    pub length: usize,
    pub trials: usize,
}

#[derive(Debug)]
pub struct BruteForceStats {
    pub mode: Mode,
    pub space: u64,
    pub trials: usize,
    pub mean: f64,
    pub min: u64,
    pub max: u64,
    /// Ten equal-width buckets over the observed attempt range.
    pub histogram: Vec<(u64, usize)>,
}

/// Injective-assignment count: P(n^k, L) = (n^k)(n^k - 1)...(n^k - L + 1).
pub fn space_size(alphabet: usize, expansion: usize, length: usize) -> Option<u64> {
    let symbols = (alphabet as u64).checked_pow(expansion as u32)?;
    let mut space: u64 = 1;
    for i in 0..length as u64 {
        space = space.checked_mul(symbols.checked_sub(i)?)?;
    }
    Some(space)
}

fn validate(cfg: &BruteForceConfig) -> Result<u64, BruteForceError> {
    if cfg.alphabet < 2 {
        return Err(BruteForceError::AlphabetTooSmall(cfg.alphabet));
    }
    if cfg.length == 0 {
        return Err(BruteForceError::ZeroLength);
    }
    if cfg.trials == 0 {
        return Err(BruteForceError::ZeroTrials);
    }
    if ![1, 2, 4, 8].contains(&cfg.expansion) {
        return Err(BruteForceError::BadExpansion(cfg.expansion));
    }
    space_size(cfg.alphabet, cfg.expansion, cfg.length).ok_or(BruteForceError::SpaceOverflow {
        alphabet: cfg.alphabet,
        expansion: cfg.expansion,
        length: cfg.length,
    })
}

/// Spaces small enough to walk a literal shuffled enumeration per trial.
const ENUMERABLE: u64 = 1 << 16;

pub fn simulate(cfg: &BruteForceConfig, seed: u64) -> Result<BruteForceStats, BruteForceError> {
    let space = validate(cfg)?;
    let mut rng = Prng::seeded(seed);
    let mut attempts_per_trial = Vec::with_capacity(cfg.trials);

    for _ in 0..cfg.trials {
        let attempts = match cfg.mode {
            Mode::Static => {
                // One hidden pad for the run; the attacker enumerates
                // candidates without repetition until the hit.
                let hidden = rng.below(space);
                if space <= ENUMERABLE {
                    let mut order: Vec<u64> = (0..space).collect();
                    rng.shuffle(&mut order);
                    order.iter().position(|c| *c == hidden).unwrap() as u64 + 1
                } else {
                    // The position of a fixed element in a uniform random
                    // permutation is uniform; sample it directly.
                    rng.below(space) + 1
                }
            }
            Mode::Dynamic => {
                // Fresh hidden pad per attempt; guesses are independent.
                let mut attempts: u64 = 0;
                loop {
                    attempts += 1;
                    let guess = rng.below(space);
                    let hidden = rng.below(space);
                    if guess == hidden {
                        break attempts;
                    }
                }
            }
        };
        attempts_per_trial.push(attempts);
    }

    let min = *attempts_per_trial.iter().min().unwrap();
    let max = *attempts_per_trial.iter().max().unwrap();
    let mean = attempts_per_trial.iter().map(|a| *a as f64).sum::<f64>() / cfg.trials as f64;

    let bucket_width = ((max - min) / 10).max(1);
    let mut histogram: Vec<(u64, usize)> = Vec::new();
    for a in &attempts_per_trial {
        let bucket = min + ((a - min) / bucket_width) * bucket_width;
        match histogram.iter_mut().find(|(b, _)| *b == bucket) {
            Some((_, count)) => *count += 1,
            None => histogram.push((bucket, 1)),
        }
    }
    histogram.sort_unstable();

    Ok(BruteForceStats {
        mode: cfg.mode,
        space,
        trials: cfg.trials,
        mean,
        min,
        max,
        histogram,
    })
}

pub fn render_stats(stats: &BruteForceStats) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "mode={:?} space={} trials={} mean={:.2} min={} max={}\n",
        stats.mode, stats.space, stats.trials, stats.mean, stats.min, stats.max
    ));
    let peak = stats.histogram.iter().map(|(_, c)| *c).max().unwrap_or(1);
    for (bucket, count) in &stats.histogram {
        let bar = "#".repeat((count * 40 / peak).max(1));
        out.push_str(&format!("{bucket:>10} {bar} {count}\n"));
    }
    out
}
