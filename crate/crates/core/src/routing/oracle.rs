//! Reference solvers for testing and benchmarking the heuristic.

use super::{Route, RoutingInstance};
use crate::model::CellId;

fn candidates(inst: &RoutingInstance) -> Vec<(CellId, f64)> {
    let mut out: Vec<(CellId, f64)> = Vec::new();
    for &(c, r) in &inst.candidates {
        if r > 0.0 && !out.iter().any(|o| o.0 == c) {
            out.push((c, r));
        }
    }
    out
}

fn route(inst: &RoutingInstance, visits: &[CellId], reward: f64) -> Route {
    let mut cells = vec![inst.depot];
    cells.extend_from_slice(visits);
    cells.push(inst.depot);
    Route {
        total_time: inst.tour_time(visits),
        cells,
        total_reward: reward,
    }
}

/// Best reward over every subset and visiting order. Exponential; meant for
/// at most about eight candidates.
pub fn exhaustive_optimum(inst: &RoutingInstance) -> Route {
    let cands = candidates(inst);
    if !(inst.speed > 0.0) {
        return Route::depot_only(inst.depot);
    }
    let mut best = (0.0, Vec::new());
    let mut path = Vec::new();
    let mut used = vec![false; cands.len()];
    fn dfs(
        inst: &RoutingInstance,
        cands: &[(CellId, f64)],
        used: &mut [bool],
        path: &mut Vec<CellId>,
        at: CellId,
        time: f64,
        reward: f64,
        best: &mut (f64, Vec<CellId>),
    ) {
        for i in 0..cands.len() {
            if used[i] {
                continue;
            }
            let (c, r) = cands[i];
            let t = time + inst.travel_time(at, c);
            if t + inst.travel_time(c, inst.depot) > inst.budget {
                continue;
            }
            used[i] = true;
            path.push(c);
            if reward + r > best.0 {
                let exact = inst.tour_time(path);
                if exact <= inst.budget {
                    *best = (reward + r, path.clone());
                }
            }
            dfs(inst, cands, used, path, c, t, reward + r, best);
            path.pop();
            used[i] = false;
        }
    }
    dfs(inst, &cands, &mut used, &mut path, inst.depot, 0.0, 0.0, &mut best);
    route(inst, &best.1, best.0)
}

/// Repeatedly flies to the nearest unvisited candidate that still allows
/// returning within budget.
pub fn greedy_nearest(inst: &RoutingInstance) -> Route {
    let mut cands = candidates(inst);
    if !(inst.speed > 0.0) {
        return Route::depot_only(inst.depot);
    }
    let (mut at, mut time, mut reward) = (inst.depot, 0.0, 0.0);
    let mut visits = Vec::new();
    loop {
        let mut pick: Option<(usize, f64)> = None;
        for (i, &(c, _)) in cands.iter().enumerate() {
            let d = inst.travel_time(at, c);
            if time + d + inst.travel_time(c, inst.depot) > inst.budget {
                continue;
            }
            if pick.is_none_or(|(_, bd)| d < bd) {
                pick = Some((i, d));
            }
        }
        let Some((i, d)) = pick else { break };
        let (c, r) = cands.remove(i);
        visits.push(c);
        if inst.tour_time(&visits) > inst.budget {
            visits.pop();
            continue;
        }
        time += d;
        reward += r;
        at = c;
    }
    route(inst, &visits, reward)
}

/// Best insertion evaluated literally: every candidate at every position on
/// every step, no caching.
pub fn best_insertion_reference(inst: &RoutingInstance) -> Route {
    let mut cands = candidates(inst);
    if !(inst.speed > 0.0) || !(inst.budget > 0.0) {
        return Route::depot_only(inst.depot);
    }
    let mut visits: Vec<CellId> = Vec::new();
    let mut reward = 0.0;
    loop {
        let base = inst.tour_time(&visits);
        let tour: Vec<CellId> = std::iter::once(inst.depot)
            .chain(visits.iter().copied())
            .chain(std::iter::once(inst.depot))
            .collect();
        // (ratio, cell index, position, candidate)
        let mut pick: Option<(f64, usize, usize, usize)> = None;
        for (k, &(c, r)) in cands.iter().enumerate() {
            for e in 0..tour.len() - 1 {
                let (a, b) = (tour[e], tour[e + 1]);
                let added = (inst.travel_time(a, c) + inst.travel_time(c, b) - inst.travel_time(a, b)).max(0.0);
                if added > inst.budget - base {
                    continue;
                }
                let ratio = r / added;
                let idx = inst.grid.index_of(c);
                let better = match pick {
                    None => true,
                    Some((br, bi, be, _)) => ratio > br || (ratio == br && (idx, e) < (bi, be)),
                };
                if better {
                    pick = Some((ratio, idx, e, k));
                }
            }
        }
        let Some((_, _, e, k)) = pick else { break };
        let (c, r) = cands.remove(k);
        visits.insert(e, c);
        if inst.tour_time(&visits) > inst.budget {
            visits.remove(e);
            continue;
        }
        reward += r;
    }
    route(inst, &visits, reward)
}

/// Seeded random instance on a 16x16 grid of 512 m cells: `n` distinct
/// candidates with rewards in (0, 10], a random depot, speed 17.88 m/s and a
/// budget between 5 minutes and an hour.
pub fn random_instance(seed: u64, n: usize) -> RoutingInstance {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = crate::model::RegionConfig::square(16, 512.0);
    let cell = |rng: &mut rand_chacha::ChaCha8Rng| CellId::new(rng.random_range(0..16), rng.random_range(0..16));
    let depot = cell(&mut rng);
    let mut candidates: Vec<(CellId, f64)> = Vec::new();
    while candidates.len() < n.min(255) {
        let c = cell(&mut rng);
        if c != depot && !candidates.iter().any(|o| o.0 == c) {
            candidates.push((c, 10.0 - rng.random_range(0.0..10.0)));
        }
    }
    RoutingInstance {
        grid,
        depot,
        candidates,
        speed: 17.88,
        budget: rng.random_range(300.0..3600.0),
    }
}
