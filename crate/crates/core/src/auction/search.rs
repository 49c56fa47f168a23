use std::time::{Duration, Instant};

use rand::Rng;

use super::bids::{BidSet, WinnerSet};

pub const DEFAULT_WP: f64 = 0.15;
pub const DEFAULT_NP: f64 = 0.5;
/// Outer passes per round in simulation runs.
pub const DEFAULT_PASSES: u32 = 400;
/// Outer passes the search completes in one second on 80-bid intersection
/// instances (`aimsim wdp-bench --calibrate` on the reference machine).
pub const ONE_SECOND_PASSES: u32 = 28_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Passes(u32),
    WallClock(Duration),
}

/// Anytime stochastic local search for the winner determination problem.
///
/// Each pass starts from an empty allocation and performs `|B|` steps. A step
/// adds one unallocated bid and evicts its neighbours: with probability `wp`
/// a uniformly random one, otherwise the highest-valued one unless it was
/// selected more recently than the runner-up, in which case the runner-up is
/// taken with probability `np`. The best allocation seen is returned.
pub fn wdp_stochastic<R: Rng + ?Sized>(
    set: &BidSet,
    budget: Budget,
    wp: f64,
    np: f64,
    rng: &mut R,
) -> WinnerSet {
    let n = set.len();
    if n == 0 {
        return WinnerSet::default();
    }
    let start = Instant::now();
    let mut best: Vec<usize> = Vec::new();
    let mut best_value = 0.0;

    let mut in_a = vec![false; n];
    let mut last_selected = vec![0u64; n];
    let mut step = 0u64;
    let mut free: Vec<usize> = Vec::with_capacity(n);

    let mut pass = 0u32;
    loop {
        match budget {
            Budget::Passes(p) if pass >= p => break,
            Budget::WallClock(d) if pass > 0 && start.elapsed() >= d => break,
            _ => {}
        }
        pass += 1;
        in_a.iter_mut().for_each(|x| *x = false);
        let mut value = 0.0;
        for _ in 0..n {
            free.clear();
            free.extend((0..n).filter(|&i| !in_a[i]));
            if free.is_empty() {
                break;
            }
            let pick = if rng.random::<f64>() < wp {
                free[rng.random_range(0..free.len())]
            } else {
                let age = |i: usize| step - last_selected[i];
                // Higher value first, then older, then lower id.
                let better = |a: usize, b: usize| {
                    let (va, vb) = (set.value(a), set.value(b));
                    va > vb || (va == vb && (age(a) > age(b) || (age(a) == age(b) && a < b)))
                };
                let mut hi = free[0];
                let mut second: Option<usize> = None;
                for &i in &free[1..] {
                    if better(i, hi) {
                        second = Some(hi);
                        hi = i;
                    } else if second.is_none_or(|s| better(i, s)) {
                        second = Some(i);
                    }
                }
                match second {
                    Some(s) if age(hi) < age(s) && rng.random::<f64>() < np => s,
                    _ => hi,
                }
            };
            in_a[pick] = true;
            value += set.value(pick);
            for &j in set.neighbours(pick) {
                if in_a[j] {
                    in_a[j] = false;
                    value -= set.value(j);
                }
            }
            step += 1;
            last_selected[pick] = step;
            if value > best_value + 1e-9 {
                best_value = value;
                best = (0..n).filter(|&i| in_a[i]).collect();
            }
        }
    }
    WinnerSet::from_members(set, best)
}
