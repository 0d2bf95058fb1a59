//! Dinic's max-flow over real capacities.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    eps: f64,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            edges: Vec::new(),
            eps: 0.0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Directed edge `u → v`; its residual twin is stored at index ^ 1.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: f64) {
        debug_assert!(cap >= 0.0 && cap.is_finite());
        if u == v || cap <= 0.0 {
            return;
        }
        self.adj[u].push(self.edges.len());
        self.edges.push(Edge { to: v, cap });
        self.adj[v].push(self.edges.len());
        self.edges.push(Edge { to: u, cap: 0.0 });
    }

    fn levels(&self, s: usize, t: usize) -> Option<Vec<usize>> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let Edge { to, cap } = self.edges[e];
                if cap > self.eps && level[to] == usize::MAX {
                    level[to] = level[u] + 1;
                    queue.push_back(to);
                }
            }
        }
        (level[t] != usize::MAX).then_some(level)
    }

    /// One blocking-flow augmentation along the level graph, iteratively.
    fn augment(&mut self, s: usize, t: usize, level: &[usize], next: &mut [usize]) -> f64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let push = path
                    .iter()
                    .map(|&e| self.edges[e].cap)
                    .fold(f64::INFINITY, f64::min);
                for &e in &path {
                    self.edges[e].cap -= push;
                    self.edges[e ^ 1].cap += push;
                }
                return push;
            }
            let mut advanced = false;
            while next[u] < self.adj[u].len() {
                let e = self.adj[u][next[u]];
                let Edge { to, cap } = self.edges[e];
                if cap > self.eps && level[to] == level[u] + 1 {
                    path.push(e);
                    u = to;
                    advanced = true;
                    break;
                }
                next[u] += 1;
            }
            if !advanced {
                // Dead end: retreat and skip the edge that led here.
                let Some(e) = path.pop() else { return 0.0 };
                u = self.edges[e ^ 1].to;
                next[u] += 1;
            }
        }
    }

    /// Maximum `s → t` flow value; afterwards the network holds residuals.
    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let largest = self.edges.iter().map(|e| e.cap).fold(0.0, f64::max);
        self.eps = largest * 1e-13;
        let mut total = 0.0;
        while let Some(level) = self.levels(s, t) {
            let mut next = vec![0; self.adj.len()];
            loop {
                let f = self.augment(s, t, &level, &mut next);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
        total
    }

    /// Nodes that can still reach `t` in the residual network: the smallest
    /// sink side among all minimum cuts.
    pub fn sink_side(&self, t: usize) -> Vec<bool> {
        let mut into: Vec<Vec<usize>> = vec![Vec::new(); self.adj.len()];
        for (u, list) in self.adj.iter().enumerate() {
            for &e in list {
                if self.edges[e].cap > self.eps {
                    into[self.edges[e].to].push(u);
                }
            }
        }
        let mut seen = vec![false; self.adj.len()];
        seen[t] = true;
        let mut queue = VecDeque::from([t]);
        while let Some(v) = queue.pop_front() {
            for &u in &into[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}
