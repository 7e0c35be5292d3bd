use std::collections::VecDeque;
use std::ops::{AddAssign, Sub};

/// Integer mass units per unit of probability.
pub const GRAINS: u64 = 1 << 32;

/// Scales nonnegative masses to integers summing to [`GRAINS`] by
/// largest-remainder rounding (ties broken by index). Zero masses stay zero.
pub fn to_grains(probs: &[f64]) -> Vec<u64> {
    let total: f64 = probs.iter().sum();
    if probs.is_empty() || !(total > 0.0) {
        return vec![0; probs.len()];
    }
    let scaled: Vec<f64> = probs.iter().map(|p| p / total * GRAINS as f64).collect();
    let mut grains: Vec<u64> = scaled.iter().map(|s| s.floor() as u64).collect();
    let assigned: u64 = grains.iter().sum();
    if assigned <= GRAINS {
        let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
        order.sort_by(|&a, &b| {
            let fa = scaled[a] - scaled[a].floor();
            let fb = scaled[b] - scaled[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let mut left = GRAINS - assigned;
        let mut k = 0;
        while left > 0 {
            grains[order[k % order.len()]] += 1;
            left -= 1;
            k += 1;
        }
    } else {
        // float rounding overshoot: take the excess from the largest atom
        let big = (0..grains.len()).max_by_key(|&i| (grains[i], usize::MAX - i)).unwrap();
        grains[big] -= assigned - GRAINS;
    }
    grains
}

/// `|a − b| ≤ λ` up to floating noise in lattice coordinates.
#[inline]
pub(crate) fn close(dist: f64, lambda: f64) -> bool {
    dist <= lambda * (1.0 + 1e-12) + 1e-12
}

pub(crate) trait Mass: Copy + PartialOrd + Default + Sub<Output = Self> + AddAssign {}
impl Mass for u64 {}
impl Mass for f64 {}

/// Maximum transport between `supply` and `demand` placed on the sorted
/// `points`, along edges joining points at distance `≤ λ`.
///
/// Because every neighborhood is an interval whose endpoints move right with
/// the point, serving each supply point (left to right) from the leftmost
/// demand still available in its window is a maximum flow.
/// Returns the matched total and the `(supply index, demand index, amount)` moves.
pub(crate) fn interval_matching<T: Mass>(points: &[f64], supply: &[T], demand: &[T], lambda: f64) -> (T, Vec<(usize, usize, T)>) {
    let zero = T::default();
    let ys: Vec<usize> = (0..points.len()).filter(|&j| demand[j] > zero).collect();
    let mut rem: Vec<T> = ys.iter().map(|&j| demand[j]).collect();
    let mut moves = Vec::new();
    let mut total = zero;
    let mut lo = 0;
    for i in 0..points.len() {
        let mut a = supply[i];
        if !(a > zero) {
            continue;
        }
        let x = points[i];
        while lo < ys.len() && (!(rem[lo] > zero) || (points[ys[lo]] < x && !close(x - points[ys[lo]], lambda))) {
            lo += 1;
        }
        let mut k = lo;
        while a > zero && k < ys.len() && close((points[ys[k]] - x).abs(), lambda) {
            if rem[k] > zero {
                let take = if a < rem[k] { a } else { rem[k] };
                a = a - take;
                rem[k] = rem[k] - take;
                total += take;
                moves.push((i, ys[k], take));
            }
            k += 1;
        }
    }
    (total, moves)
}

/// Residual network for Dinic's maximum-flow algorithm with integer capacities.
#[derive(Clone, Debug, Default)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u64>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], to: Vec::new(), cap: Vec::new() }
    }

    /// Adds the arc `u → v` and returns its id.
    pub fn add_edge(&mut self, u: usize, v: usize, cap: u64) -> usize {
        let id = self.to.len();
        self.to.push(v);
        self.cap.push(cap);
        self.adj[u].push(id);
        self.to.push(u);
        self.cap.push(0);
        self.adj[v].push(id + 1);
        id
    }

    /// Flow currently routed through arc `id` (capacity of its reverse arc).
    pub fn flow_on(&self, id: usize) -> u64 {
        self.cap[id ^ 1]
    }

    pub fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        let n = self.adj.len();
        let mut total = 0u64;
        loop {
            let mut level = vec![usize::MAX; n];
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if self.cap[e] > 0 && level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[t] == usize::MAX {
                return total;
            }
            let mut next = vec![0usize; n];
            loop {
                let pushed = self.augment(s, t, u64::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(&mut self, u: usize, t: usize, limit: u64, level: &[usize], next: &mut [usize]) -> u64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && level[v] == level[u] + 1 {
                let got = self.augment(v, t, limit.min(self.cap[e]), level, next);
                if got > 0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0
    }
}

/// Same quantity as [`interval_matching`] computed by a general max-flow on
/// the explicit bipartite graph.
pub(crate) fn dinic_matching(points: &[f64], supply: &[u64], demand: &[u64], lambda: f64) -> u64 {
    let k = points.len();
    let (s, t) = (2 * k, 2 * k + 1);
    let mut net = FlowNetwork::new(2 * k + 2);
    for i in 0..k {
        if supply[i] > 0 {
            net.add_edge(s, i, supply[i]);
        }
        if demand[i] > 0 {
            net.add_edge(k + i, t, demand[i]);
        }
    }
    for i in (0..k).filter(|&i| supply[i] > 0) {
        for j in (0..k).filter(|&j| demand[j] > 0) {
            if close((points[i] - points[j]).abs(), lambda) {
                net.add_edge(i, k + j, u64::MAX);
            }
        }
    }
    net.max_flow(s, t)
}

/// `sup_X max{F{X} − G{X^λ}, G{X} − F{X^λ}}` in grains, over every subset
/// `X` of the (at most 20-point) union support, with closed neighborhoods.
pub(crate) fn subset_supremum(points: &[f64], f: &[u64], g: &[u64], lambda: f64) -> u64 {
    let k = points.len();
    debug_assert!(k <= 20);
    let nbr: Vec<u32> = (0..k)
        .map(|i| (0..k).filter(|&j| close((points[i] - points[j]).abs(), lambda)).fold(0u32, |m, j| m | (1 << j)))
        .collect();
    let size = 1usize << k;
    let mut fm = vec![0u64; size];
    let mut gm = vec![0u64; size];
    let mut nb = vec![0u32; size];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        fm[mask] = fm[rest] + f[low];
        gm[mask] = gm[rest] + g[low];
        nb[mask] = nb[rest] | nbr[low];
    }
    let mut best = 0u64;
    for mask in 1..size {
        let around = nb[mask] as usize;
        best = best.max(fm[mask].saturating_sub(gm[around])).max(gm[mask].saturating_sub(fm[around]));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grains_sum_exactly() {
        for probs in [vec![1.0 / 3.0; 3], vec![0.1, 0.0, 0.2, 0.7], vec![1.0], vec![1e-12, 1.0 - 1e-12]] {
            let g = to_grains(&probs);
            assert_eq!(g.iter().sum::<u64>(), GRAINS);
            for (p, q) in probs.iter().zip(&g) {
                assert!((*q as f64 / GRAINS as f64 - p).abs() <= 1.0 / GRAINS as f64);
                if *p == 0.0 {
                    assert_eq!(*q, 0);
                }
            }
        }
        assert_eq!(to_grains(&[0.5, 0.25, 0.25]), vec![GRAINS / 2, GRAINS / 4, GRAINS / 4]);
    }

    #[test]
    fn dinic_small_network() {
        // classic 4-node example with max flow 5
        let mut net = FlowNetwork::new(4);
        net.add_edge(0, 1, 3);
        net.add_edge(0, 2, 2);
        net.add_edge(1, 2, 5);
        let e = net.add_edge(1, 3, 2);
        net.add_edge(2, 3, 3);
        assert_eq!(net.max_flow(0, 3), 5);
        assert_eq!(net.flow_on(e), 2);
    }

    #[test]
    fn interval_matching_agrees_with_dinic() {
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as u32
        };
        for _ in 0..300 {
            let k = 2 + (next() % 12) as usize;
            let mut points: Vec<f64> = (0..k).map(|i| i as f64 * 0.5).collect();
            points.dedup();
            let f: Vec<u64> = (0..k).map(|_| if next() % 3 == 0 { 0 } else { (next() % 50) as u64 }).collect();
            let g: Vec<u64> = (0..k).map(|_| if next() % 3 == 0 { 0 } else { (next() % 50) as u64 }).collect();
            let lambda = (next() % 5) as f64 * 0.5;
            let (greedy, moves) = interval_matching(&points, &f, &g, lambda);
            assert_eq!(greedy, dinic_matching(&points, &f, &g, lambda));
            for (i, j, _) in moves {
                assert!(close((points[i] - points[j]).abs(), lambda));
            }
        }
    }

    #[test]
    fn subset_supremum_of_shifted_points() {
        let pts = [0.0, 1.0];
        assert_eq!(subset_supremum(&pts, &[GRAINS, 0], &[0, GRAINS], 0.5), GRAINS);
        assert_eq!(subset_supremum(&pts, &[GRAINS, 0], &[0, GRAINS], 1.0), 0);
    }
}
