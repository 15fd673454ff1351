//! Slow reference implementations used to cross-check the fast paths in
//! tests. Only compiled for tests or with the `oracles` feature.

/// Optimal transport cost between `p` and `q` on the points `locations`
/// with ground cost `|x_i - x_j|`, solved as a min-cost flow by successive
/// shortest paths (Bellman-Ford on the residual graph).
pub fn transport_cost(locations: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let n = locations.len();
    assert_eq!(p.len(), n);
    assert_eq!(q.len(), n);
    // nodes: 0 = source, 1..=n supplies, n+1..=2n demands, 2n+1 = sink
    let nodes = 2 * n + 2;
    let (src, sink) = (0, 2 * n + 1);
    struct Edge {
        to: usize,
        cap: f64,
        cost: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let add = |edges: &mut Vec<Edge>, adj: &mut Vec<Vec<usize>>, a: usize, b: usize, cap: f64, cost: f64| {
        adj[a].push(edges.len());
        edges.push(Edge { to: b, cap, cost });
        adj[b].push(edges.len());
        edges.push(Edge { to: a, cap: 0.0, cost: -cost });
    };
    for i in 0..n {
        add(&mut edges, &mut adj, src, 1 + i, p[i], 0.0);
        add(&mut edges, &mut adj, 1 + n + i, sink, q[i], 0.0);
        for j in 0..n {
            add(&mut edges, &mut adj, 1 + i, 1 + n + j, f64::INFINITY, (locations[i] - locations[j]).abs());
        }
    }
    let mut total = 0.0;
    loop {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<usize>> = vec![None; nodes];
        dist[src] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u].is_infinite() {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    if edge.cap > 1e-15 && dist[u] + edge.cost < dist[edge.to] - 1e-15 {
                        dist[edge.to] = dist[u] + edge.cost;
                        prev[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink].is_infinite() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while let Some(e) = prev[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = prev[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            total += push * edges[e].cost;
            v = edges[e ^ 1].to;
        }
    }
    total
}

/// ROC AUC by counting every (positive, negative) pair; ties count one half.
pub fn auc_pair_count(y: &[bool], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// All-pairs k smallest distances, sorted ascending.
pub fn knn_brute(points: &[Vec<f64>], queries: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    queries
        .iter()
        .map(|q| {
            let mut d: Vec<f64> = points.iter().map(|p| dist(p, q)).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            d.truncate(k);
            d
        })
        .collect()
}

/// Nearest-neighbour distance ratio from an all-pairs scan: mean distance
/// from synthetic rows to their `k` nearest real rows over the mean distance
/// from real rows to their `k` nearest other real rows.
pub fn knn_ratio_brute(real: &[Vec<f64>], syn: &[Vec<f64>], k: usize) -> f64 {
    let num: Vec<Vec<f64>> = knn_brute(real, syn, k);
    let den: Vec<Vec<f64>> = knn_brute(real, real, k + 1).into_iter().map(|d| d[1..].to_vec()).collect();
    let mean = |rows: &[Vec<f64>]| {
        let mut s = 0.0;
        let mut c = 0usize;
        for r in rows {
            for &v in r {
                s += v;
                c += 1;
            }
        }
        s / c as f64
    };
    mean(&num) / mean(&den)
}

/// Exhaustive CART for binary labels: at every node try every feature and
/// every midpoint, keep the split with the lowest weighted Gini impurity (even when
/// it does not improve on the parent) and recurse until nodes are pure or
/// unsplittable. Returns the class-1
/// frequency of the leaf each training row lands in.
pub fn cart_training_predictions(x: &[Vec<f64>], y: &[bool]) -> Vec<f64> {
    fn gini(idx: &[usize], y: &[bool]) -> f64 {
        let n = idx.len() as f64;
        let pos = idx.iter().filter(|&&i| y[i]).count() as f64;
        let p = pos / n;
        2.0 * p * (1.0 - p)
    }
    fn grow(idx: Vec<usize>, x: &[Vec<f64>], y: &[bool], out: &mut [f64]) {
        let pos = idx.iter().filter(|&&i| y[i]).count();
        let leaf = pos as f64 / idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        if pos != 0 && pos != idx.len() {
            for f in 0..x[0].len() {
                let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                vals.dedup();
                for w in vals.windows(2) {
                    let t = (w[0] + w[1]) / 2.0;
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
                    let imp = gini(&l, y) * l.len() as f64 + gini(&r, y) * r.len() as f64;
                    if best.is_none_or(|b| imp < b.0) {
                        best = Some((imp, f, t));
                    }
                }
            }
        }
        match best {
            None => idx.iter().for_each(|&i| out[i] = leaf),
            Some((_, f, t)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
                grow(l, x, y, out);
                grow(r, x, y, out);
            }
        }
    }
    let mut out = vec![0.0; y.len()];
    grow((0..y.len()).collect(), x, y, &mut out);
    out
}
