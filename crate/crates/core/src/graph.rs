//! Reaction-graph structure: linkage classes, strong components,
//! reversibility and deficiency.

use crate::network::{Complex, ReactionNetwork};

/// Pivot tolerance of the rank computation behind the deficiency.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphAnalysis {
    /// Connected components of the undirected reaction graph, each sorted,
    /// ordered by smallest member.
    pub linkage_classes: Vec<Vec<usize>>,
    /// Strongly connected components, same normalization.
    pub strong_components: Vec<Vec<usize>>,
    pub is_reversible: bool,
    pub is_weakly_reversible: bool,
    pub deficiency: usize,
}

impl GraphAnalysis {
    pub fn linkage_class_count(&self) -> usize {
        self.linkage_classes.len()
    }
}

pub fn analyze_graph(net: &ReactionNetwork) -> GraphAnalysis {
    let m = net.complex_count();
    let edges: Vec<(usize, usize)> = net.reactions().map(|r| (r.source, r.target)).collect();

    let linkage_classes = linkage_classes(m, &edges);
    let strong_components = strong_components(m, &edges);

    let mut comp_of = vec![0; m];
    for (c, members) in strong_components.iter().enumerate() {
        for &v in members {
            comp_of[v] = c;
        }
    }
    let is_weakly_reversible = edges.iter().all(|&(s, t)| comp_of[s] == comp_of[t]);
    let is_reversible = edges.iter().all(|&(s, t)| net.rate(t, s).is_some());

    let rank = stoichiometric_rank(net.complexes(), &edges);
    let deficiency = m - linkage_classes.len() - rank;

    GraphAnalysis {
        linkage_classes,
        strong_components,
        is_reversible,
        is_weakly_reversible,
        deficiency,
    }
}

/// Undirected connected components over `0..m`.
pub fn linkage_classes(m: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(a, b) in edges {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let roots: Vec<usize> = (0..m).map(|v| find(&mut parent, v)).collect();
    group_by_label(&roots)
}

/// Tarjan's algorithm, iterative.
pub fn strong_components(m: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m];
    for &(s, t) in edges {
        adj[s].push(t);
    }
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; m];
    let mut low = vec![0; m];
    let mut on_stack = vec![false; m];
    let mut stack = Vec::new();
    let mut label = vec![0; m];
    let mut next_index = 0;
    let mut next_label = 0;

    for root in 0..m {
        if index[root] != UNSEEN {
            continue;
        }
        // (vertex, next neighbour position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        label[w] = next_label;
                        if w == v {
                            break;
                        }
                    }
                    next_label += 1;
                }
            }
        }
    }
    group_by_label(&label)
}

fn group_by_label(label: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = std::collections::HashMap::new();
    for (v, &l) in label.iter().enumerate() {
        let g = *slot.entry(l).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(v);
    }
    groups
}

/// Rank of the reaction vectors `C_t - C_s`.
fn stoichiometric_rank(complexes: &[Complex], edges: &[(usize, usize)]) -> usize {
    let rows: Vec<Vec<f64>> = edges
        .iter()
        .map(|&(s, t)| {
            complexes[t]
                .0
                .iter()
                .zip(&complexes[s].0)
                .map(|(&a, &b)| f64::from(a) - f64::from(b))
                .collect()
        })
        .collect();
    matrix_rank(rows, RANK_TOL)
}

/// Gaussian elimination with partial pivoting.
pub fn matrix_rank(mut rows: Vec<Vec<f64>>, tol: f64) -> usize {
    let Some(width) = rows.first().map(Vec::len) else {
        return 0;
    };
    let mut rank = 0;
    for col in 0..width {
        let pivot =
            (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(p) = pivot else { break };
        if rows[p][col].abs() <= tol {
            continue;
        }
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for r in rows.iter_mut().skip(rank + 1) {
            let f = r[col] / pivot_row[col];
            if f != 0.0 {
                for (x, y) in r.iter_mut().zip(&pivot_row).skip(col) {
                    *x -= f * y;
                }
            }
        }
        rank += 1;
    }
    rank
}
