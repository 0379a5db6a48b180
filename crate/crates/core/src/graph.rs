//! Strong connectivity of directed graphs given as adjacency lists.

use std::collections::VecDeque;

/// Returns true iff every node can reach every other node.
///
/// A graph is strongly connected exactly when node 0 reaches all nodes both
/// in the graph and in its reverse, which needs two breadth-first searches.
pub(crate) fn is_strongly_connected(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    if n == 0 {
        return false;
    }
    let mut rev = vec![Vec::new(); n];
    for (u, out) in adj.iter().enumerate() {
        for &v in out {
            rev[v].push(u);
        }
    }
    reaches_all(adj) && reaches_all(&rev)
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}
