use super::bids::{BidSet, WinnerSet};
use crate::error::{Error, Result};

pub const DEFAULT_ORACLE_CAP: usize = 24;

/// Maximum-value conflict-free subset by branch and bound, solved per
/// connected component of the conflict graph. Among optimal sets the one
/// with the lexicographically smallest sorted id list is returned.
pub fn wdp_exact(set: &BidSet, cap: usize) -> Result<WinnerSet> {
    let n = set.len();
    if n > cap {
        return Err(Error::OracleCapExceeded { n, cap });
    }
    let mut members = Vec::new();
    for component in components(set) {
        members.extend(solve_component(set, component));
    }
    Ok(WinnerSet::from_members(set, members))
}

fn components(set: &BidSet) -> Vec<Vec<usize>> {
    let n = set.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut k = 0;
        while k < comp.len() {
            for &j in set.neighbours(comp[k]) {
                if !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                }
            }
            k += 1;
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

struct Search<'a> {
    set: &'a BidSet,
    best: Vec<usize>,
    best_value: f64,
    chosen: Vec<usize>,
}

const EPS: f64 = 1e-9;

fn solve_component(set: &BidSet, comp: Vec<usize>) -> Vec<usize> {
    if comp.len() == 1 {
        return comp;
    }
    // Highest value first; ids (indices follow id order) break ties.
    let mut order = comp;
    order.sort_by(|&a, &b| set.value(b).total_cmp(&set.value(a)).then(a.cmp(&b)));
    let mut search = Search {
        set,
        best: Vec::new(),
        best_value: -1.0,
        chosen: Vec::new(),
    };
    search.branch(&order, 0.0);
    search.best
}

impl Search<'_> {
    fn branch(&mut self, candidates: &[usize], value: f64) {
        if candidates.is_empty() {
            self.offer(value);
            return;
        }
        if value + self.clique_bound(candidates) < self.best_value - EPS {
            return;
        }
        let v = candidates[0];
        let rest: Vec<usize> = candidates[1..]
            .iter()
            .copied()
            .filter(|&j| !self.set.conflict(v, j))
            .collect();
        self.chosen.push(v);
        self.branch(&rest, value + self.set.value(v));
        self.chosen.pop();
        self.branch(&candidates[1..], value);
    }

    fn offer(&mut self, value: f64) {
        let better = if value > self.best_value + EPS {
            true
        } else if value >= self.best_value - EPS {
            let mut mine = self.chosen.clone();
            mine.sort_unstable();
            mine < self.best
        } else {
            false
        };
        if better {
            self.best = self.chosen.clone();
            self.best.sort_unstable();
            self.best_value = value;
        }
    }

    /// Greedy weighted clique cover: an independent set takes at most one
    /// bid per clique, so the sum of clique maxima bounds the remainder.
    fn clique_bound(&self, candidates: &[usize]) -> f64 {
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        let mut bound = 0.0;
        for &c in candidates {
            match cliques
                .iter_mut()
                .find(|q| q.iter().all(|&m| self.set.conflict(c, m)))
            {
                Some(q) => q.push(c),
                None => {
                    bound += self.set.value(c);
                    cliques.push(vec![c]);
                }
            }
        }
        bound
    }
}
