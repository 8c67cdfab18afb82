use std::collections::VecDeque;

/// Reverse Cuthill-McKee ordering of a symmetric adjacency structure.
///
/// Returns `perm` with `perm[new] = old`. Each connected component is started from a
/// pseudo-peripheral vertex found by repeated breadth-first sweeps.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |v: usize| adj[v].len();

    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_by_key(|&v| (degree(v), v));

    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, seed, &visited);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (degree(w), w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize, blocked: &[bool]) -> usize {
    let mut root = seed;
    let (mut ecc, mut last) = bfs_levels(adj, root, blocked);
    for _ in 0..8 {
        // smallest-degree vertex of the last level
        let cand = *last.iter().min_by_key(|&&v| (adj[v].len(), v)).unwrap();
        let (e2, l2) = bfs_levels(adj, cand, blocked);
        if e2 > ecc {
            root = cand;
            ecc = e2;
            last = l2;
        } else {
            break;
        }
    }
    root
}

fn bfs_levels(adj: &[Vec<usize>], root: usize, blocked: &[bool]) -> (usize, Vec<usize>) {
    let n = adj.len();
    let mut level = vec![usize::MAX; n];
    level[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if !blocked[w] && level[w] == usize::MAX {
                    level[w] = depth + 1;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

pub(crate) fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bandwidth(adj: &[Vec<usize>], perm: &[usize]) -> usize {
        let inv = invert(perm);
        let mut bw = 0;
        for (v, nb) in adj.iter().enumerate() {
            for &w in nb {
                bw = bw.max(inv[v].abs_diff(inv[w]));
            }
        }
        bw
    }

    #[test]
    fn permutation_is_complete() {
        let adj = vec![vec![3], vec![2], vec![1], vec![0], vec![]];
        let mut p = reverse_cuthill_mckee(&adj);
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn grid_bandwidth_is_reduced() {
        // 10x10 grid numbered in a scrambled order
        let m = 10;
        let id = |i: usize, j: usize| ((i * m + j) * 37) % (m * m);
        let mut adj = vec![Vec::new(); m * m];
        for i in 0..m {
            for j in 0..m {
                if i + 1 < m {
                    adj[id(i, j)].push(id(i + 1, j));
                    adj[id(i + 1, j)].push(id(i, j));
                }
                if j + 1 < m {
                    adj[id(i, j)].push(id(i, j + 1));
                    adj[id(i, j + 1)].push(id(i, j));
                }
            }
        }
        let natural: Vec<usize> = (0..m * m).collect();
        let p = reverse_cuthill_mckee(&adj);
        assert!(bandwidth(&adj, &p) <= m + 1, "bw {}", bandwidth(&adj, &p));
        assert!(bandwidth(&adj, &p) < bandwidth(&adj, &natural));
    }
}
