use super::{Route, RoutingInstance};
use crate::model::CellId;

struct Candidate {
    cell: CellId,
    index: usize,
    reward: f64,
    /// Cheapest insertion: added seconds and edge (insert after tour position `edge`).
    added: f64,
    edge: usize,
}

fn added_time(inst: &RoutingInstance, tour: &[CellId], edge: usize, c: CellId) -> f64 {
    let (a, b) = (tour[edge], tour[edge + 1]);
    (inst.travel_time(a, c) + inst.travel_time(c, b) - inst.travel_time(a, b)).max(0.0)
}

fn cheapest(inst: &RoutingInstance, tour: &[CellId], c: CellId) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for e in 0..tour.len() - 1 {
        let a = added_time(inst, tour, e, c);
        if a < best.0 {
            best = (a, e);
        }
    }
    best
}

/// Greedy best insertion.
///
/// Starting from the depot-only tour, repeatedly inserts the unvisited
/// candidate and position with the highest reward per added second among
/// those keeping the tour within budget. Ties go to the lower cell index,
/// then the earlier position. For a fixed candidate the best ratio is at its
/// cheapest position, which is cached and patched after each insertion.
pub fn best_insertion(inst: &RoutingInstance) -> Route {
    insert_from(inst, None)
}

/// Best insertion continued from the tour depot, `seed`, depot.
fn insert_from(inst: &RoutingInstance, seed: Option<CellId>) -> Route {
    let mut tour = vec![inst.depot, inst.depot];
    if !(inst.speed > 0.0) || !(inst.budget > 0.0) {
        return Route::depot_only(inst.depot);
    }
    let mut reward = 0.0;
    let mut time = 0.0;
    if let Some(s) = seed {
        let r = inst.candidates.iter().find(|c| c.0 == s).map_or(0.0, |c| c.1);
        tour.insert(1, s);
        time = inst.tour_time(&[s]);
        reward = r;
        if time > inst.budget || !(r > 0.0) {
            return Route::depot_only(inst.depot);
        }
    }
    let mut cands: Vec<Candidate> = Vec::new();
    for &(cell, reward) in &inst.candidates {
        if !(reward > 0.0) || tour[1..tour.len() - 1].contains(&cell) || cands.iter().any(|c| c.cell == cell) {
            continue;
        }
        let (added, edge) = cheapest(inst, &tour, cell);
        cands.push(Candidate {
            cell,
            index: inst.grid.index_of(cell),
            reward,
            added,
            edge,
        });
    }
    cands.sort_by_key(|c| c.index);

    loop {
        let slack = inst.budget - time;
        let mut pick: Option<(usize, f64)> = None;
        for (i, c) in cands.iter().enumerate() {
            if c.added > slack {
                continue;
            }
            let ratio = c.reward / c.added;
            // Candidates are in index order, so strict improvement keeps ties on the lower index.
            if pick.is_none_or(|(_, r)| ratio > r) {
                pick = Some((i, ratio));
            }
        }
        let Some((i, _)) = pick else { break };
        let c = cands.remove(i);
        let e = c.edge;
        tour.insert(e + 1, c.cell);
        let t = inst.tour_time(&tour[1..tour.len() - 1]);
        if t > inst.budget {
            // Rounding pushed the exact tour time over budget.
            tour.remove(e + 1);
            continue;
        }
        time = t;
        reward += c.reward;
        for k in &mut cands {
            if k.edge == e {
                (k.added, k.edge) = cheapest(inst, &tour, k.cell);
                continue;
            }
            if k.edge > e {
                k.edge += 1;
            }
            for ne in [e, e + 1] {
                let a = added_time(inst, &tour, ne, k.cell);
                if a < k.added || (a == k.added && ne < k.edge) {
                    (k.added, k.edge) = (a, ne);
                }
            }
        }
    }
    Route {
        cells: tour,
        total_time: time,
        total_reward: reward,
    }
}

/// Number of single-cell starting tours tried by [`solve`].
pub const RESTARTS: usize = 16;

/// [`solve_with_local_search`] with [`RESTARTS`] restarts.
pub fn solve(inst: &RoutingInstance) -> Route {
    solve_with_local_search(inst, RESTARTS)
}

fn starts(inst: &RoutingInstance, restarts: usize) -> Vec<Route> {
    let mut seeds: Vec<(CellId, f64)> = inst
        .candidates
        .iter()
        .copied()
        .filter(|&(c, r)| r > 0.0 && inst.tour_time(&[c]) <= inst.budget)
        .collect();
    seeds.sort_by(|a, b| b.1.total_cmp(&a.1).then(inst.grid.index_of(a.0).cmp(&inst.grid.index_of(b.0))));
    seeds.dedup_by_key(|s| s.0);
    std::iter::once(best_insertion(inst))
        .chain(seeds.iter().take(restarts).map(|&(c, _)| insert_from(inst, Some(c))))
        .chain(std::iter::once(super::oracle::greedy_nearest(inst)))
        .collect()
}

fn keep_best(runs: impl IntoIterator<Item = Route>) -> Route {
    let mut runs = runs.into_iter();
    let mut best = runs.next().expect("at least one run");
    for r in runs {
        if r.total_reward > best.total_reward || (r.total_reward == best.total_reward && r.total_time < best.total_time) {
            best = r;
        }
    }
    best
}

/// Best insertion with restarts.
///
/// Runs [`best_insertion`] from the empty tour and from single-cell tours
/// seeded with the `restarts` highest-reward reachable candidates, and also
/// considers the nearest-neighbor tour. Returns the highest reward, then the
/// shortest time, then the earliest run in that order.
pub fn solve_with_restarts(inst: &RoutingInstance, restarts: usize) -> Route {
    keep_best(starts(inst, restarts))
}

/// [`solve_with_restarts`] with every starting tour refined by [`improve`].
pub fn solve_with_local_search(inst: &RoutingInstance, restarts: usize) -> Route {
    keep_best(starts(inst, restarts).into_iter().map(|r| improve(inst, r)))
}

/// Shortens the tour with segment reversals (2-opt) and single-cell
/// moves until neither helps.
fn two_opt(inst: &RoutingInstance, tour: &mut Vec<CellId>) {
    let d = |a: CellId, b: CellId| inst.travel_time(a, b);
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..tour.len().saturating_sub(2) {
            for j in i + 1..tour.len() - 1 {
                let delta = d(tour[i - 1], tour[j]) + d(tour[i], tour[j + 1]) - d(tour[i - 1], tour[i]) - d(tour[j], tour[j + 1]);
                if delta < -1e-9 {
                    tour[i..=j].reverse();
                    improved = true;
                }
            }
        }
        for i in 1..tour.len() - 1 {
            let c = tour[i];
            let saved = d(tour[i - 1], c) + d(c, tour[i + 1]) - d(tour[i - 1], tour[i + 1]);
            let mut rest = tour.clone();
            rest.remove(i);
            let (added, e) = cheapest(inst, &rest, c);
            if added < saved - 1e-9 {
                rest.insert(e + 1, c);
                *tour = rest;
                improved = true;
                break;
            }
        }
    }
}

/// Tour with `c` at its cheapest position, if that fits the budget.
fn with_cheapest(inst: &RoutingInstance, tour: &[CellId], c: CellId) -> Option<(Vec<CellId>, f64)> {
    let (_, e) = cheapest(inst, tour, c);
    let mut t = tour.to_vec();
    t.insert(e + 1, c);
    two_opt(inst, &mut t);
    let time = inst.tour_time(&t[1..t.len() - 1]);
    (time <= inst.budget).then_some((t, time))
}

/// Inserts `u`, drops the cell at tour position `first` (if given), then
/// drops visited cells until the tour fits the budget, and refills it from
/// `pool`. Cells are dropped by lowest reward per saved second, or by lowest
/// reward when `by_reward` is set. Returns the
/// tour, its time and its reward.
fn force_in(
    inst: &RoutingInstance,
    tour: &[CellId],
    u: CellId,
    first: Option<usize>,
    by_reward: bool,
    pool: &[(CellId, f64)],
    reward_of: &dyn Fn(CellId) -> f64,
) -> Option<(Vec<CellId>, f64, f64)> {
    let mut t = tour.to_vec();
    if let Some(k) = first {
        t.remove(k);
    }
    let (_, e) = cheapest(inst, &t, u);
    t.insert(e + 1, u);
    two_opt(inst, &mut t);
    let mut time = inst.tour_time(&t[1..t.len() - 1]);
    while time > inst.budget {
        let k = (1..t.len() - 1)
            .filter(|&k| t[k] != u)
            .map(|k| {
                let saved = inst.travel_time(t[k - 1], t[k]) + inst.travel_time(t[k], t[k + 1])
                    - inst.travel_time(t[k - 1], t[k + 1]);
                let r = reward_of(t[k]);
                (k, if by_reward { r } else { r / saved.max(1e-9) })
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))?
            .0;
        t.remove(k);
        two_opt(inst, &mut t);
        time = inst.tour_time(&t[1..t.len() - 1]);
    }
    loop {
        let next = pool
            .iter()
            .filter(|p| !t[1..t.len() - 1].contains(&p.0))
            .find_map(|&(c, _)| with_cheapest(inst, &t, c));
        match next {
            Some((nt, ntime)) => (t, time) = (nt, ntime),
            None => break,
        }
    }
    let reward = t[1..t.len() - 1].iter().map(|&c| reward_of(c)).sum();
    Some((t, time, reward))
}

/// Local search on a feasible route: 2-opt, then the insertion of any
/// unvisited candidate that fits (highest reward first), then forcing in an
/// unvisited candidate after dropping each visited cell in turn (see
/// [`force_in`]) when that raises the reward,
/// repeated until nothing improves. Never lowers the reward.
pub fn improve(inst: &RoutingInstance, route: Route) -> Route {
    if !(inst.speed > 0.0) || route.is_depot_only() && !(inst.budget > 0.0) {
        return route;
    }
    let mut pool: Vec<(CellId, f64)> = Vec::new();
    for &(c, r) in &inst.candidates {
        if r > 0.0 && !pool.iter().any(|p| p.0 == c) {
            pool.push((c, r));
        }
    }
    pool.sort_by(|a, b| b.1.total_cmp(&a.1).then(inst.grid.index_of(a.0).cmp(&inst.grid.index_of(b.0))));
    let reward_of = |c: CellId| pool.iter().find(|p| p.0 == c).map_or(0.0, |p| p.1);

    let mut tour = route.cells;
    two_opt(inst, &mut tour);
    let mut time = inst.tour_time(&tour[1..tour.len() - 1]);
    let mut reward = route.total_reward;
    loop {
        let visited = |tour: &[CellId], c: CellId| tour[1..tour.len() - 1].contains(&c);
        if let Some((t, tt, r)) = pool
            .iter()
            .filter(|p| !visited(&tour, p.0))
            .find_map(|&(c, r)| with_cheapest(inst, &tour, c).map(|(t, tt)| (t, tt, r)))
        {
            (tour, time, reward) = (t, tt, reward + r);
            continue;
        }
        let mut swap: Option<(Vec<CellId>, f64, f64)> = None;
        'outer: for &(u, _) in pool.iter().filter(|p| !visited(&tour, p.0)) {
            for first in std::iter::once(None).chain((1..tour.len() - 1).map(Some)) {
                for by_reward in [false, true] {
                    let found = force_in(inst, &tour, u, first, by_reward, &pool, &reward_of);
                    if let Some(found) = found.filter(|f| f.2 > reward + 1e-9) {
                        swap = Some(found);
                        break 'outer;
                    }
                }
            }
        }
        match swap {
            Some((t, tt, r)) => (tour, time, reward) = (t, tt, r),
            None => break,
        }
    }
    Route {
        cells: tour,
        total_time: time,
        total_reward: reward,
    }
}
