use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numeric::{kinked_quadratic_argmin, same_level, Kink, EQUALITY_TOL};

use super::mincut::FlowNetwork;
use super::PixelGrid;

/// Merges between full recomputations of the boundary counts.
const ADJACENCY_CHECK_EVERY: usize = 64;

/// Adjacent pixel pairs between two groups, by orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundaryCount {
    /// Pairs in the same row.
    pub horizontal: usize,
    /// Pairs in the same column.
    pub vertical: usize,
}

impl BoundaryCount {
    pub fn total(&self) -> usize {
        self.horizontal + self.vertical
    }

    fn add(&mut self, other: BoundaryCount) {
        self.horizontal += other.horizontal;
        self.vertical += other.vertical;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    /// Row-major pixel indices.
    pub members: Vec<usize>,
    pub sum_y: f64,
    pub sum_y2: f64,
    pub gamma: f64,
}

impl Group {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Mean of the data over the members.
    pub fn mean(&self) -> f64 {
        self.sum_y / self.members.len() as f64
    }

    /// `½ Σ_{p ∈ G} (y_p − γ)²`.
    fn fit(&self, gamma: f64) -> f64 {
        (0.5 * (self.sum_y2 - 2.0 * gamma * self.sum_y + self.members.len() as f64 * gamma * gamma)).max(0.0)
    }
}

/// Pixel groups with common values, their 4-neighbour adjacency and the
/// penalties. Group ids are stable; merged-away ids stay empty.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition2D {
    n1: usize,
    n2: usize,
    groups: Vec<Group>,
    alive: Vec<usize>,
    label: Vec<usize>,
    y: Vec<f64>,
    adjacency: Vec<BTreeMap<usize, BoundaryCount>>,
    merges_since_check: usize,
    pub lambda1: f64,
    /// Penalty per horizontal boundary pair.
    pub lambda2: f64,
    /// Penalty per vertical boundary pair.
    pub lambda3: f64,
}

/// Exact minimizer and local criterion pieces of a set of groups moved to
/// one common value.
struct JointMove {
    size: f64,
    sum_y: f64,
    kinks: Vec<Kink>,
}

impl GroupPartition2D {
    /// One group per pixel with `γ = y`.
    pub fn singletons(grid: &PixelGrid, lambda1: f64, lambda2: f64, lambda3: f64) -> Self {
        let (n1, n2) = (grid.n1(), grid.n2());
        let groups = grid
            .values()
            .iter()
            .enumerate()
            .map(|(p, &y)| Group {
                members: vec![p],
                sum_y: y,
                sum_y2: y * y,
                gamma: y,
            })
            .collect();
        let label: Vec<usize> = (0..n1 * n2).collect();
        let adjacency = Self::count_boundaries(n1, n2, &label, n1 * n2);
        GroupPartition2D {
            n1,
            n2,
            groups,
            alive: (0..n1 * n2).collect(),
            label,
            y: grid.values().to_vec(),
            adjacency,
            merges_since_check: 0,
            lambda1,
            lambda2,
            lambda3,
        }
    }

    fn count_boundaries(
        n1: usize,
        n2: usize,
        label: &[usize],
        groups: usize,
    ) -> Vec<BTreeMap<usize, BoundaryCount>> {
        let mut adj = vec![BTreeMap::new(); groups];
        let mut bump = |a: usize, b: usize, horizontal: bool| {
            let (ga, gb) = (label[a], label[b]);
            if ga == gb {
                return;
            }
            for (x, y) in [(ga, gb), (gb, ga)] {
                let c: &mut BoundaryCount = adj[x].entry(y).or_default();
                if horizontal {
                    c.horizontal += 1;
                } else {
                    c.vertical += 1;
                }
            }
        };
        for r in 0..n1 {
            for c in 0..n2 {
                let p = r * n2 + c;
                if c + 1 < n2 {
                    bump(p, p + 1, true);
                }
                if r + 1 < n1 {
                    bump(p, p + n2, false);
                }
            }
        }
        adj
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    /// Number of live groups.
    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    /// Live group ids in ascending order.
    pub fn group_ids(&self) -> &[usize] {
        &self.alive
    }

    pub fn group(&self, k: usize) -> &Group {
        &self.groups[k]
    }

    /// Group containing pixel `p` (row-major).
    pub fn label(&self, p: usize) -> usize {
        self.label[p]
    }

    pub fn neighbours(&self, k: usize) -> impl Iterator<Item = (usize, BoundaryCount)> + '_ {
        self.adjacency[k].iter().map(|(&j, &c)| (j, c))
    }

    pub fn boundary(&self, k: usize, j: usize) -> Option<BoundaryCount> {
        self.adjacency[k].get(&j).copied()
    }

    fn weight(&self, c: BoundaryCount) -> f64 {
        self.lambda2 * c.horizontal as f64 + self.lambda3 * c.vertical as f64
    }

    /// Pixel values, row-major.
    pub fn expand(&self) -> Vec<f64> {
        self.label.iter().map(|&k| self.groups[k].gamma).collect()
    }

    /// Criterion in group form: fit, `λ1 Σ N_k|γ_k|` and weighted boundary
    /// differences, each unordered pair once.
    pub fn objective(&self) -> f64 {
        let mut f = 0.0;
        for &k in &self.alive {
            let g = &self.groups[k];
            f += g.fit(g.gamma) + self.lambda1 * g.size() as f64 * g.gamma.abs();
            for (&j, &c) in &self.adjacency[k] {
                if j > k {
                    f += self.weight(c) * (g.gamma - self.groups[j].gamma).abs();
                }
            }
        }
        f
    }

    /// Recomputes boundary counts from the pixel labels and compares them
    /// with the maintained ones.
    pub fn adjacency_consistent(&self) -> bool {
        Self::count_boundaries(self.n1, self.n2, &self.label, self.groups.len()) == self.adjacency
    }

    /// Every group is connected under 4-adjacency.
    pub fn groups_contiguous(&self) -> bool {
        self.alive.iter().all(|&k| {
            let members = &self.groups[k].members;
            let mut seen = vec![members[0]];
            let mut stack = vec![members[0]];
            let mut visited = std::collections::HashSet::from([members[0]]);
            while let Some(p) = stack.pop() {
                for (q, _) in self.pixel_neighbours(p) {
                    if self.label[q] == k && visited.insert(q) {
                        seen.push(q);
                        stack.push(q);
                    }
                }
            }
            seen.len() == members.len()
        })
    }

    fn joint(&self, set: &[usize], inside: impl Fn(usize) -> bool) -> JointMove {
        let mut size = 0.0;
        let mut sum_y = 0.0;
        let mut kinks = Vec::new();
        for &k in set {
            let g = &self.groups[k];
            size += g.size() as f64;
            sum_y += g.sum_y;
            for (&j, &c) in &self.adjacency[k] {
                if !inside(j) {
                    let w = self.weight(c);
                    if w > 0.0 {
                        kinks.push(Kink::new(self.groups[j].gamma, w));
                    }
                }
            }
        }
        if self.lambda1 > 0.0 {
            kinks.push(Kink::new(0.0, self.lambda1 * size));
        }
        JointMove { size, sum_y, kinks }
    }

    /// Criterion terms that involve the groups of `set`, with internal
    /// boundaries counted once, if the set took `value` (or its current
    /// values when `None`).
    fn local(&self, set: &[usize], inside: impl Fn(usize) -> bool, value: Option<f64>) -> f64 {
        let val = |k: usize| value.unwrap_or(self.groups[k].gamma);
        let mut f = 0.0;
        for &k in set {
            let g = &self.groups[k];
            f += g.fit(val(k)) + self.lambda1 * g.size() as f64 * val(k).abs();
            for (&j, &c) in &self.adjacency[k] {
                if inside(j) {
                    if j > k {
                        f += self.weight(c) * (val(k) - val(j)).abs();
                    }
                } else {
                    f += self.weight(c) * (val(k) - self.groups[j].gamma).abs();
                }
            }
        }
        f
    }

    /// Moves the groups of `set` to their best common value if that strictly
    /// decreases the criterion; returns the largest change.
    fn try_joint(&mut self, set: &[usize], inside: impl Fn(usize) -> bool + Copy) -> Option<f64> {
        let mut m = self.joint(set, inside);
        let gamma = kinked_quadratic_argmin(m.size, m.sum_y / m.size, &mut m.kinks);
        if set.iter().all(|&k| self.groups[k].gamma == gamma) {
            return None;
        }
        let before = self.local(set, inside, None);
        let after = self.local(set, inside, Some(gamma));
        if after < before - 1e-14 * before.abs().max(1.0) {
            let change = set
                .iter()
                .map(|&k| (self.groups[k].gamma - gamma).abs())
                .fold(0.0, f64::max);
            for &k in set {
                self.groups[k].gamma = gamma;
            }
            Some(change)
        } else {
            None
        }
    }

    /// Exact minimization over `γ_k` alone: the breakpoints are 0 and the
    /// neighbouring values. Returns the new value.
    pub fn group_descent_step(&mut self, k: usize) -> f64 {
        let mut m = self.joint(&[k], |j| j == k);
        let gamma = kinked_quadratic_argmin(m.size, m.sum_y / m.size, &mut m.kinks);
        self.groups[k].gamma = gamma;
        gamma
    }

    /// Provisionally fuses adjacent groups `k` and `j`: both are set to the
    /// best value of the merged group if that strictly decreases the
    /// criterion. Returns the common value on acceptance.
    pub fn group_fusion_step(&mut self, k: usize, j: usize) -> Result<Option<f64>> {
        if k == j || !self.adjacency[k].contains_key(&j) {
            return Err(Error::NotAdjacent(k, j));
        }
        Ok(self.try_joint(&[k, j], |u| u == k || u == j).map(|_| self.groups[k].gamma))
    }

    /// Looks inside every connected set of equal-valued groups for a subset
    /// whose joint shift up or down has a negative directional derivative,
    /// found by a minimum cut, and moves it. Returns whether anything moved.
    pub(crate) fn plateau_pass(&mut self) -> bool {
        let scale = 1.0
            + self.lambda1
            + self.lambda2
            + self.lambda3
            + self
                .alive
                .iter()
                .map(|&k| {
                    let g = &self.groups[k];
                    (g.sum_y.abs() + g.size() as f64 * g.gamma.abs()) + g.size() as f64
                })
                .fold(0.0, f64::max);
        let eps = 1e-12 * scale;
        let mut position = vec![usize::MAX; self.groups.len()];
        let mut moved = false;
        let mut visited = vec![false; self.groups.len()];
        let ids = self.alive.clone();
        for &start in &ids {
            if visited[start] {
                continue;
            }
            let v = self.groups[start].gamma;
            let mut plateau = vec![start];
            visited[start] = true;
            let mut i = 0;
            while i < plateau.len() {
                let k = plateau[i];
                for (&j, _) in &self.adjacency[k] {
                    if !visited[j] && same_level(self.groups[j].gamma, v) {
                        visited[j] = true;
                        plateau.push(j);
                    }
                }
                i += 1;
            }
            if plateau.len() < 2 {
                continue;
            }
            for (pos, &k) in plateau.iter().enumerate() {
                position[k] = pos;
            }
            let mut best: Option<(f64, Vec<usize>)> = None;
            for dir in [1.0, -1.0] {
                if let Some((cost, subset)) = self.best_shift(&plateau, &position, v, dir) {
                    if cost < -eps && best.as_ref().map_or(true, |(c, _)| cost < *c) {
                        best = Some((cost, subset));
                    }
                }
            }
            if let Some((_, subset)) = best {
                let mut member = vec![false; self.groups.len()];
                for &k in &subset {
                    member[k] = true;
                }
                moved |= self.try_joint(&subset, |u| member[u]).is_some();
            }
            for &k in &plateau {
                position[k] = usize::MAX;
            }
        }
        moved
    }

    /// Subset of a plateau at value `v` minimizing the directional derivative
    /// of a joint shift in direction `dir`, with that derivative.
    fn best_shift(&self, plateau: &[usize], position: &[usize], v: f64, dir: f64) -> Option<(f64, Vec<usize>)> {
        let m = plateau.len();
        let (s, t) = (m, m + 1);
        let mut net = FlowNetwork::new(m + 2, 0.0);
        let mut negative = 0.0;
        let l1_dir = if v == 0.0 { 1.0 } else { dir * v.signum() };
        for (pos, &k) in plateau.iter().enumerate() {
            let g = &self.groups[k];
            let n = g.size() as f64;
            let mut a = dir * (n * v - g.sum_y) + self.lambda1 * n * l1_dir;
            for (&j, &c) in &self.adjacency[k] {
                let w = self.weight(c);
                if position[j] == usize::MAX {
                    a += dir * w * (v - self.groups[j].gamma).signum();
                } else if position[j] > pos && w > 0.0 {
                    net.add_edge(pos, position[j], w, w);
                }
            }
            if a < 0.0 {
                net.add_edge(s, pos, -a, 0.0);
                negative += a;
            } else if a > 0.0 {
                net.add_edge(pos, t, a, 0.0);
            }
        }
        let cut = net.max_flow(s, t);
        let side = net.source_side(s);
        let subset: Vec<usize> = plateau.iter().enumerate().filter(|(p, _)| side[*p]).map(|(_, &k)| k).collect();
        if subset.is_empty() {
            return None;
        }
        Some((cut + negative, subset))
    }

    /// Permanently merges every connected set of adjacent groups whose values
    /// agree within the equality tolerance and are nonzero. The merged value
    /// is the size-weighted mean. Returns the number of groups removed.
    pub fn merge_equal(&mut self) -> usize {
        let mut parent: Vec<usize> = (0..self.groups.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &k in &self.alive {
            let gk = self.groups[k].gamma;
            if gk == 0.0 {
                continue;
            }
            for (&j, _) in &self.adjacency[k] {
                let gj = self.groups[j].gamma;
                if j > k && gj != 0.0 && (gk - gj).abs() <= EQUALITY_TOL {
                    let (a, b) = (find(&mut parent, k), find(&mut parent, j));
                    if a != b {
                        // the smaller id survives
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &k in &self.alive {
            let root = find(&mut parent, k);
            if root != k {
                components.entry(root).or_default().push(k);
            }
        }
        let mut removed = 0;
        for (root, others) in components {
            let mut weighted = self.groups[root].gamma * self.groups[root].size() as f64;
            for &k in &others {
                let g = std::mem::replace(
                    &mut self.groups[k],
                    Group {
                        members: Vec::new(),
                        sum_y: 0.0,
                        sum_y2: 0.0,
                        gamma: 0.0,
                    },
                );
                weighted += g.gamma * g.size() as f64;
                for &p in &g.members {
                    self.label[p] = root;
                }
                let target = &mut self.groups[root];
                target.members.extend(g.members);
                target.sum_y += g.sum_y;
                target.sum_y2 += g.sum_y2;
                let edges = std::mem::take(&mut self.adjacency[k]);
                for (j, c) in edges {
                    self.adjacency[j].remove(&k);
                    if find(&mut parent, j) != root {
                        self.adjacency[root].entry(j).or_default().add(c);
                        self.adjacency[j].entry(root).or_default().add(c);
                    }
                }
                self.adjacency[root].remove(&k);
            }
            let g = &mut self.groups[root];
            g.members.sort_unstable();
            g.gamma = weighted / g.members.len() as f64;
            removed += others.len();
        }
        if removed > 0 {
            self.alive.retain(|&k| !self.groups[k].members.is_empty());
            self.merges_since_check += removed;
            if self.merges_since_check >= ADJACENCY_CHECK_EVERY {
                self.merges_since_check = 0;
                let fresh = Self::count_boundaries(self.n1, self.n2, &self.label, self.groups.len());
                if fresh != self.adjacency {
                    log::error!("boundary counts drifted during merging; recomputed");
                    debug_assert!(false, "boundary counts drifted");
                    self.adjacency = fresh;
                }
            }
        }
        removed
    }

    /// 4-neighbours of pixel `p`, flagged `true` for the same row.
    fn pixel_neighbours(&self, p: usize) -> impl Iterator<Item = (usize, bool)> {
        let (n1, n2) = (self.n1, self.n2);
        let (r, c) = (p / n2, p % n2);
        [
            (c > 0).then(|| (p - 1, true)),
            (c + 1 < n2).then(|| (p + 1, true)),
            (r > 0).then(|| (p - n2, false)),
            (r + 1 < n1).then(|| (p + n2, false)),
        ]
        .into_iter()
        .flatten()
    }

    fn pixel_weight(&self, horizontal: bool) -> f64 {
        if horizontal {
            self.lambda2
        } else {
            self.lambda3
        }
    }

    /// Pixel-level completeness check. Group moves never undo a merge, and
    /// a merged group can stop being optimal as a unit. Inside every set of
    /// equal-valued pixels that contains a merged group, a minimum cut finds
    /// the pixel subset whose joint shift has the most negative directional
    /// derivative; groups cut by such a subset are split along it and the
    /// subset is moved. Returns whether anything moved.
    pub(crate) fn split_pass(&mut self) -> bool {
        let n = self.label.len();
        let beta = self.expand();
        let scale = 1.0
            + self.lambda1
            + self.lambda2
            + self.lambda3
            + self.y.iter().chain(&beta).fold(0.0f64, |m, v| m.max(v.abs()));
        let eps = 1e-12 * scale;
        let mut visited = vec![false; n];
        let mut position = vec![usize::MAX; n];
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let v = beta[start];
            let mut plateau = vec![start];
            visited[start] = true;
            let mut i = 0;
            while i < plateau.len() {
                let p = plateau[i];
                for (q, _) in self.pixel_neighbours(p) {
                    if !visited[q] && same_level(beta[q], v) {
                        visited[q] = true;
                        plateau.push(q);
                    }
                }
                i += 1;
            }
            if plateau.iter().all(|&p| self.groups[self.label[p]].size() == 1) {
                continue;
            }
            for (pos, &p) in plateau.iter().enumerate() {
                position[p] = pos;
            }
            let mut best: Option<(f64, Vec<usize>)> = None;
            for dir in [1.0, -1.0] {
                let (cost, subset) = self.pixel_shift(&plateau, &position, &beta, v, dir);
                if cost < -eps && !subset.is_empty() && best.as_ref().map_or(true, |(c, _)| cost < *c) {
                    best = Some((cost, subset));
                }
            }
            for &p in &plateau {
                position[p] = usize::MAX;
            }
            if let Some((_, subset)) = best {
                subsets.push(subset);
            }
        }
        if subsets.is_empty() {
            return false;
        }
        let mut in_subset = vec![false; n];
        for s in &subsets {
            for &p in s {
                in_subset[p] = true;
            }
        }
        self.split_along(&in_subset);
        let mut moved = false;
        let mut member = vec![false; self.groups.len()];
        for s in &subsets {
            let mut set: Vec<usize> = s.iter().map(|&p| self.label[p]).collect();
            set.sort_unstable();
            set.dedup();
            for &k in &set {
                member[k] = true;
            }
            moved |= self.try_joint(&set, |u| member[u]).is_some();
            for &k in &set {
                member[k] = false;
            }
        }
        moved
    }

    fn pixel_shift(&self, plateau: &[usize], position: &[usize], beta: &[f64], v: f64, dir: f64) -> (f64, Vec<usize>) {
        let m = plateau.len();
        let (s, t) = (m, m + 1);
        let mut net = FlowNetwork::new(m + 2, 0.0);
        let mut negative = 0.0;
        let l1_dir = if v == 0.0 { 1.0 } else { dir * v.signum() };
        for (pos, &p) in plateau.iter().enumerate() {
            let mut a = dir * (v - self.y[p]) + self.lambda1 * l1_dir;
            for (q, horizontal) in self.pixel_neighbours(p) {
                let w = self.pixel_weight(horizontal);
                if position[q] == usize::MAX {
                    a += dir * w * (v - beta[q]).signum();
                } else if position[q] > pos && w > 0.0 {
                    net.add_edge(pos, position[q], w, w);
                }
            }
            if a < 0.0 {
                net.add_edge(s, pos, -a, 0.0);
                negative += a;
            } else if a > 0.0 {
                net.add_edge(pos, t, a, 0.0);
            }
        }
        let cut = net.max_flow(s, t);
        let side = net.source_side(s);
        let subset = plateau.iter().enumerate().filter(|(i, _)| side[*i]).map(|(_, &p)| p).collect();
        (cut + negative, subset)
    }

    /// Splits every group into the connected pieces of its members on each
    /// side of `in_subset`, then rebuilds the boundary counts.
    fn split_along(&mut self, in_subset: &[bool]) {
        let ids = self.alive.clone();
        for k in ids {
            let members = &self.groups[k].members;
            let side = in_subset[members[0]];
            if members.iter().all(|&p| in_subset[p] == side) {
                continue;
            }
            let gamma = self.groups[k].gamma;
            let members = std::mem::take(&mut self.groups[k].members);
            let mut assigned = std::collections::HashSet::new();
            let mut first = true;
            for &seed in &members {
                if !assigned.insert(seed) {
                    continue;
                }
                let flag = in_subset[seed];
                let mut piece = vec![seed];
                let mut i = 0;
                while i < piece.len() {
                    let p = piece[i];
                    for (q, _) in self.pixel_neighbours(p) {
                        if self.label[q] == k && in_subset[q] == flag && assigned.insert(q) {
                            piece.push(q);
                        }
                    }
                    i += 1;
                }
                piece.sort_unstable();
                let id = if first {
                    first = false;
                    k
                } else {
                    self.groups.push(Group {
                        members: Vec::new(),
                        sum_y: 0.0,
                        sum_y2: 0.0,
                        gamma,
                    });
                    self.groups.len() - 1
                };
                let g = &mut self.groups[id];
                g.sum_y = piece.iter().map(|&p| self.y[p]).sum();
                g.sum_y2 = piece.iter().map(|&p| self.y[p] * self.y[p]).sum();
                g.gamma = gamma;
                g.members = piece;
            }
        }
        for (id, g) in self.groups.iter().enumerate() {
            for &p in &g.members {
                self.label[p] = id;
            }
        }
        self.alive = (0..self.groups.len()).filter(|&g| !self.groups[g].members.is_empty()).collect();
        self.adjacency = Self::count_boundaries(self.n1, self.n2, &self.label, self.groups.len());
        log::debug!("split merged groups; {} groups now", self.alive.len());
    }

    /// Sets every group to `S(γ_k, gamma)`.
    pub(crate) fn soft_threshold(&mut self, gamma: f64) {
        for &k in &self.alive {
            let g = &mut self.groups[k];
            g.gamma = crate::numeric::soft_threshold(g.gamma, gamma);
        }
    }

    /// Sets every group to `S(ȳ_k, λ1)`.
    pub(crate) fn reset_to_means(&mut self) {
        let l1 = self.lambda1;
        for &k in &self.alive {
            let g = &mut self.groups[k];
            g.gamma = crate::numeric::soft_threshold(g.mean(), l1);
        }
    }
}
