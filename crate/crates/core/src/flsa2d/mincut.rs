use std::collections::VecDeque;

/// Flow network with real capacities, solved by Dinic's algorithm.
pub(crate) struct FlowNetwork {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    eps: f64,
}

impl FlowNetwork {
    /// Residual capacities at or below `eps` count as saturated.
    pub fn new(nodes: usize, eps: f64) -> Self {
        FlowNetwork {
            head: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            eps,
        }
    }

    /// Arc `u → v` with capacity `forward` and its reverse with `backward`.
    pub fn add_edge(&mut self, u: usize, v: usize, forward: f64, backward: f64) {
        self.head[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(forward);
        self.head[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(backward);
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.head.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > self.eps && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, pushed: f64, level: &[usize], next: &mut [usize]) -> f64 {
        if u == t {
            return pushed;
        }
        while next[u] < self.head[u].len() {
            let e = self.head[u][next[u]];
            let v = self.to[e];
            if self.cap[e] > self.eps && level[v] == level[u] + 1 {
                let got = self.augment(v, t, pushed.min(self.cap[e]), level, next);
                if got > 0.0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        loop {
            let level = self.levels(s);
            if level[t] == usize::MAX {
                return flow;
            }
            let mut next = vec![0; self.head.len()];
            loop {
                let got = self.augment(s, t, f64::INFINITY, &level, &mut next);
                if got <= 0.0 {
                    break;
                }
                flow += got;
            }
        }
    }

    /// Nodes reachable from `s` in the residual network, after `max_flow`.
    pub fn source_side(&self, s: usize) -> Vec<bool> {
        self.levels(s).into_iter().map(|l| l != usize::MAX).collect()
    }
}
