//! Tie-aware ranking helpers shared by the policies.
//!
//! Every ranking in the crate breaks ties toward the smallest feature index.
//! Scores that agree up to a relative `TIE_TOLERANCE` count as tied, so that
//! values which are equal in exact arithmetic but computed along different
//! floating-point paths do not flip the order.

use crate::TIE_TOLERANCE;

/// Whether `a` and `b` are equal up to the relative tie tolerance.
pub(crate) fn tied(a: f64, b: f64) -> bool {
    let scale = 1f64.max(a.abs()).max(b.abs());
    (a - b).abs() <= TIE_TOLERANCE * scale
}

/// Whether `candidate` is strictly larger than `incumbent` (not tied).
pub(crate) fn strictly_greater(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent && !tied(candidate, incumbent)
}

/// Position of the maximal score, earliest position on ties. `None` if empty.
pub(crate) fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (pos, &s) in scores.iter().enumerate() {
        match best {
            None => best = Some(pos),
            Some(b) if strictly_greater(s, scores[b]) => best = Some(pos),
            _ => {}
        }
    }
    best
}

/// Selects up to `k` entries with the largest scores, in selection order.
///
/// `entries` pairs a feature index with its score and must be sorted by
/// feature index so that ties resolve to the smallest index.
pub(crate) fn top_k(entries: &[(usize, f64)], k: usize) -> Vec<usize> {
    let mut taken = vec![false; entries.len()];
    let mut chosen = Vec::with_capacity(k.min(entries.len()));
    for _ in 0..k.min(entries.len()) {
        let mut best: Option<usize> = None;
        for (pos, &(_, score)) in entries.iter().enumerate() {
            if taken[pos] {
                continue;
            }
            match best {
                None => best = Some(pos),
                Some(b) if strictly_greater(score, entries[b].1) => best = Some(pos),
                _ => {}
            }
        }
        let b = best.expect("at least one untaken entry");
        taken[b] = true;
        chosen.push(entries[b].0);
    }
    chosen
}

/// Number of subsets of an `n`-set with at most `k` elements, saturating.
pub(crate) fn subsets_up_to(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for t in 0..=k.min(n) {
        if t > 0 {
            binom = binom.saturating_mul((n - t + 1) as u128) / t as u128;
        }
        total = total.saturating_add(binom);
    }
    total
}

/// Visits every subset of `items` with at most `k` elements in
/// lexicographic depth-first order (the empty set first). The callback
/// receives the current subset.
pub(crate) fn for_each_subset<F>(items: &[usize], k: usize, mut visit: F)
where
    F: FnMut(&[usize]),
{
    fn recurse<F: FnMut(&[usize])>(
        items: &[usize],
        start: usize,
        k: usize,
        current: &mut Vec<usize>,
        visit: &mut F,
    ) {
        visit(current);
        if current.len() == k {
            return;
        }
        for pos in start..items.len() {
            current.push(items[pos]);
            recurse(items, pos + 1, k, current, visit);
            current.pop();
        }
    }
    let mut current = Vec::with_capacity(k);
    recurse(items, 0, k, &mut current, &mut visit);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_smallest_index() {
        let entries = [(0, 0.5), (1, 0.5), (2, 0.25)];
        assert_eq!(top_k(&entries, 2), vec![0, 1]);
        let nearly = [(3, 5.0 / 16.0), (4, 5.0 / 16.0 + 1e-17), (5, 0.1)];
        assert_eq!(top_k(&nearly, 1), vec![3]);
    }

    #[test]
    fn argmax_prefers_earliest() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subsets_up_to(44, 3), 1 + 44 + 946 + 13244);
        assert_eq!(subsets_up_to(3, 5), 8);
        let mut seen = Vec::new();
        for_each_subset(&[0, 1, 2], 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 7);
        assert_eq!(seen[0], Vec::<usize>::new());
        assert_eq!(seen[1], vec![0]);
        assert_eq!(seen[2], vec![0, 1]);
    }
}
