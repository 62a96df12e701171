//! One-to-one bipartite matching over admissible (left, right) pairs.
//!
//! Pairs are first taken greedily in priority order; augmenting paths then
//! extend the result to a maximum-cardinality matching, so the count never
//! falls below the best possible assignment.

/// Pure greedy pass: accept a pair when both ends are still free.
pub fn greedy_matching(
    n_left: usize,
    n_right: usize,
    pairs: &[(usize, usize)],
) -> Vec<Option<usize>> {
    let mut left = vec![None; n_left];
    let mut right_used = vec![false; n_right];
    for &(l, r) in pairs {
        if left[l].is_none() && !right_used[r] {
            left[l] = Some(r);
            right_used[r] = true;
        }
    }
    left
}

/// Greedy pass followed by augmenting paths. Returns the partner of each left node.
pub fn priority_matching(
    n_left: usize,
    n_right: usize,
    pairs: &[(usize, usize)],
) -> Vec<Option<usize>> {
    let mut left = greedy_matching(n_left, n_right, pairs);
    let mut right: Vec<Option<usize>> = vec![None; n_right];
    for (l, r) in left.iter().enumerate() {
        if let Some(r) = *r {
            right[r] = Some(l);
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n_left];
    for &(l, r) in pairs {
        adj[l].push(r);
    }
    let mut visited = vec![0usize; n_right];
    let mut stamp = 0;
    for start in 0..n_left {
        if left[start].is_some() || adj[start].is_empty() {
            continue;
        }
        stamp += 1;
        augment(start, &adj, &mut left, &mut right, &mut visited, stamp);
    }
    left
}

/// Iterative depth-first search for an augmenting path from `start`.
fn augment(
    start: usize,
    adj: &[Vec<usize>],
    left: &mut [Option<usize>],
    right: &mut [Option<usize>],
    visited: &mut [usize],
    stamp: usize,
) -> bool {
    // stack of (left node, next edge index); `via[k]` is the right node used to reach stack[k + 1]
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    let mut via: Vec<usize> = Vec::new();
    while let Some(top) = stack.last_mut() {
        let (l, edge) = *top;
        if edge >= adj[l].len() {
            stack.pop();
            via.pop();
            continue;
        }
        top.1 += 1;
        let r = adj[l][edge];
        if visited[r] == stamp {
            continue;
        }
        visited[r] = stamp;
        via.push(r);
        match right[r] {
            None => {
                for (k, &(node, _)) in stack.iter().enumerate() {
                    left[node] = Some(via[k]);
                    right[via[k]] = Some(node);
                }
                return true;
            }
            Some(next) => stack.push((next, 0)),
        }
    }
    false
}

pub fn matched_count(matching: &[Option<usize>]) -> usize {
    matching.iter().filter(|m| m.is_some()).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exhaustive_max(n_left: usize, n_right: usize, pairs: &[(usize, usize)]) -> usize {
        fn go(l: usize, n_left: usize, adj: &[Vec<bool>], used: &mut Vec<bool>) -> usize {
            if l == n_left {
                return 0;
            }
            let mut best = go(l + 1, n_left, adj, used);
            for r in 0..used.len() {
                if adj[l][r] && !used[r] {
                    used[r] = true;
                    best = best.max(1 + go(l + 1, n_left, adj, used));
                    used[r] = false;
                }
            }
            best
        }
        let mut adj = vec![vec![false; n_right]; n_left];
        for &(l, r) in pairs {
            adj[l][r] = true;
        }
        go(0, n_left, &adj, &mut vec![false; n_right])
    }

    #[test]
    fn greedy_alone_can_be_suboptimal() {
        // left 0 grabs right 0 first, leaving left 1 with nothing
        let pairs = [(0, 0), (0, 1), (1, 0)];
        assert_eq!(matched_count(&greedy_matching(2, 2, &pairs)), 1);
        let m = priority_matching(2, 2, &pairs);
        assert_eq!(m, vec![Some(1), Some(0)]);
    }

    #[test]
    fn keeps_greedy_choices_when_already_maximum() {
        let pairs = [(0, 1), (1, 0), (0, 0)];
        assert_eq!(priority_matching(2, 2, &pairs), vec![Some(1), Some(0)]);
        assert_eq!(priority_matching(3, 0, &[]), vec![None; 3]);
    }

    proptest! {
        #[test]
        fn reaches_maximum_cardinality(
            n_left in 0usize..7,
            n_right in 0usize..7,
            raw in prop::collection::vec((0usize..7, 0usize..7), 0..30),
        ) {
            let pairs: Vec<(usize, usize)> =
                raw.into_iter().filter(|&(l, r)| l < n_left && r < n_right).collect();
            let m = priority_matching(n_left, n_right, &pairs);
            prop_assert_eq!(matched_count(&m), exhaustive_max(n_left, n_right, &pairs));
            let mut seen = vec![false; n_right];
            for (l, r) in m.iter().enumerate() {
                if let Some(r) = *r {
                    prop_assert!(pairs.contains(&(l, r)));
                    prop_assert!(!seen[r]);
                    seen[r] = true;
                }
            }
        }
    }
}
