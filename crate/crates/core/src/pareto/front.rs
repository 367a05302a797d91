use std::cmp::Ordering;
use std::collections::HashSet;

use crate::error::{GanensError, Result};
use crate::metric::Orientation;
use crate::objective::{EnsembleGenome, ObjectiveVector};

pub type Evaluated = (EnsembleGenome, ObjectiveVector);

/// `a` dominates `b`: no worse on effective Intra-d (maximised) and
/// effective Inter-d (minimised), strictly better on at least one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    debug_assert_eq!(a.metric.orientation, b.metric.orientation);
    let (ai, ad) = (a.effective_intra(), a.effective_inter());
    let (bi, bd) = (b.effective_intra(), b.effective_inter());
    ai >= bi && ad <= bd && (ai > bi || ad < bd)
}

/// Output order: best effective Intra-d first, then lower effective Inter-d,
/// fewer members, and finally the bit vector.
fn front_order(a: &Evaluated, b: &Evaluated) -> Ordering {
    b.1.effective_intra()
        .total_cmp(&a.1.effective_intra())
        .then(a.1.effective_inter().total_cmp(&b.1.effective_inter()))
        .then(a.1.member_count.cmp(&b.1.member_count))
        .then(a.0.cmp(&b.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    pub entries: Vec<Evaluated>,
    pub orientation: Orientation,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, genome: &EnsembleGenome) -> bool {
        self.entries.iter().any(|(g, _)| g == genome)
    }

    /// Objective points `(intra, inter)` in output order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|(_, o)| (o.intra, o.inter)).collect()
    }
}

/// Non-dominated subset of `evaluated`, deduplicated by genome.
///
/// Runs a sort-and-sweep in `O(n log n)`: after ordering by effective
/// Intra-d descending, a point survives iff its effective Inter-d is below
/// every point with strictly higher Intra-d and minimal among its own ties.
pub fn extract_front(evaluated: &[Evaluated]) -> Result<ParetoFront> {
    let Some(first) = evaluated.first() else {
        return Err(GanensError::param("cannot extract a front from no evaluations"));
    };
    let orientation = first.1.metric.orientation;
    let mut seen = HashSet::new();
    let mut unique: Vec<Evaluated> = evaluated
        .iter()
        .filter(|(g, _)| seen.insert(g.bits().to_vec()))
        .cloned()
        .collect();
    unique.sort_by(front_order);

    let mut entries = Vec::new();
    let mut best_above = f64::INFINITY;
    let mut i = 0;
    while i < unique.len() {
        let intra = unique[i].1.effective_intra();
        let mut j = i;
        while j < unique.len() && unique[j].1.effective_intra() == intra {
            j += 1;
        }
        // within a tie group the first entries carry the minimal inter
        let group_min = unique[i].1.effective_inter();
        if group_min < best_above {
            entries.extend(
                unique[i..j]
                    .iter()
                    .take_while(|e| e.1.effective_inter() == group_min)
                    .cloned(),
            );
            best_above = group_min;
        }
        i = j;
    }
    Ok(ParetoFront { entries, orientation })
}

/// Minimisation coordinates used by the evolutionary ranking.
fn as_min(o: &ObjectiveVector) -> [f64; 2] {
    [-o.effective_intra(), o.effective_inter()]
}

/// Non-dominated rank of each point (0 = first front).
pub(crate) fn non_dominated_ranks(objs: &[ObjectiveVector]) -> Vec<usize> {
    let n = objs.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for p in 0..n {
        for q in 0..n {
            if p != q && dominates(&objs[p], &objs[q]) {
                dominates_list[p].push(q);
            } else if p != q && dominates(&objs[q], &objs[p]) {
                dominated_by[p] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&p| dominated_by[p] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            rank[p] = r;
            for &q in &dominates_list[p] {
                dominated_by[q] -= 1;
                if dominated_by[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        current = next;
        r += 1;
    }
    rank
}

/// Crowding distance of each member of one front (indices into `objs`).
pub(crate) fn crowding_distance(objs: &[ObjectiveVector], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    for axis in 0..2 {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| {
            as_min(&objs[front[a]])[axis]
                .total_cmp(&as_min(&objs[front[b]])[axis])
                .then(a.cmp(&b))
        });
        let lo = as_min(&objs[front[order[0]]])[axis];
        let hi = as_min(&objs[front[order[m - 1]]])[axis];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..m - 1 {
                let prev = as_min(&objs[front[order[w - 1]]])[axis];
                let next = as_min(&objs[front[order[w + 1]]])[axis];
                dist[order[w]] += (next - prev) / (hi - lo);
            }
        }
    }
    dist
}
