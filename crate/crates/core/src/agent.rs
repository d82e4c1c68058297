//! Agent-based prisoner's dilemma on random k-regular graphs.
//!
//! Updating is asynchronous: each event picks one focal player uniformly at
//! random, and `n` events make up one unit of model time. The switching
//! signal is consulted before every event, so rule changes take effect with
//! a granularity of `1/n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{fitness, GameParams, Strategy, UpdateRule};
use crate::switched::{time_grid, SwitchSchedule};

/// Generator used for every stochastic run.
pub type SimRng = ChaCha8Rng;

/// Name recorded in output metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.3, seed_from_u64)";

/// Full restarts allowed when pairing stubs.
pub const GRAPH_RETRY_BUDGET: usize = 1000;

/// A connected simple graph in which every node has exactly `k` neighbors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularGraph {
    n: usize,
    k: usize,
    /// `n * k` neighbor ids, node `i` owning `[i k, (i + 1) k)`.
    neighbors: Vec<usize>,
}

impl RegularGraph {
    /// Random k-regular graph by stub pairing.
    ///
    /// Pairs of free stubs are drawn uniformly; a pair that would create a
    /// self-loop or a multi-edge is redrawn, and a pairing that gets stuck or
    /// ends up disconnected is discarded and restarted from scratch.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || n <= k {
            return Err(Error::InvalidDegreeSequence {
                n,
                k,
                reason: "need n > k > 0",
            });
        }
        if (n * k) % 2 == 1 {
            return Err(Error::InvalidDegreeSequence {
                n,
                k,
                reason: "n * k must be even",
            });
        }
        for _ in 0..GRAPH_RETRY_BUDGET {
            if let Some(g) = Self::try_pairing(n, k, rng) {
                if g.is_connected() {
                    return Ok(g);
                }
            }
        }
        Err(Error::GenerationFailed {
            n,
            k,
            attempts: GRAPH_RETRY_BUDGET,
        })
    }

    fn try_pairing<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Option<Self> {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::with_capacity(k); n];
        let max_redraws = 50 + 10 * k * k;
        while !stubs.is_empty() {
            let mut redraws = 0;
            let (i, j) = loop {
                let i = rng.gen_range(0..stubs.len());
                let j = rng.gen_range(0..stubs.len());
                let (u, v) = (stubs[i], stubs[j]);
                if i != j && u != v && !adjacency[u].contains(&v) {
                    break (i, j);
                }
                redraws += 1;
                if redraws > max_redraws {
                    return None;
                }
            };
            let (u, v) = (stubs[i], stubs[j]);
            adjacency[u].push(v);
            adjacency[v].push(u);
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            stubs.swap_remove(hi);
            stubs.swap_remove(lo);
        }
        Some(Self {
            n,
            k,
            neighbors: adjacency.into_iter().flatten().collect(),
        })
    }

    /// Build from explicit neighbor lists, checking regularity and symmetry.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Result<Self> {
        let n = adjacency.len();
        let k = adjacency.first().map_or(0, Vec::len);
        let bad = |reason| Error::InvalidDegreeSequence { n, k, reason };
        for (u, list) in adjacency.iter().enumerate() {
            if list.len() != k {
                return Err(bad("nodes have different degrees"));
            }
            for (pos, &v) in list.iter().enumerate() {
                if v >= n || v == u || list[..pos].contains(&v) {
                    return Err(bad("self-loop, multi-edge or out-of-range neighbor"));
                }
                if !adjacency[v].contains(&u) {
                    return Err(bad("adjacency is not symmetric"));
                }
            }
        }
        Ok(Self {
            n,
            k,
            neighbors: adjacency.into_iter().flatten().collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.k / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v * self.k..(v + 1) * self.k]
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }
}

/// How strategies are assigned at `t = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitMode {
    /// Each node cooperates independently with probability `x0`.
    #[default]
    Bernoulli,
    /// Exactly `floor(x0 n)` cooperators placed uniformly at random.
    Exact,
}

/// Strategies on a graph with incrementally maintained counts.
#[derive(Clone, Debug)]
pub struct Population {
    graph: RegularGraph,
    strategies: Vec<Strategy>,
    coop_neighbors: Vec<u32>,
    n_coop: usize,
    cc_edges: usize,
}

impl Population {
    pub fn new(graph: RegularGraph, strategies: Vec<Strategy>) -> Self {
        assert_eq!(graph.node_count(), strategies.len());
        let coop_neighbors: Vec<u32> = (0..graph.node_count())
            .map(|v| {
                graph
                    .neighbors(v)
                    .iter()
                    .filter(|&&u| strategies[u].is_cooperator())
                    .count() as u32
            })
            .collect();
        let n_coop = strategies.iter().filter(|s| s.is_cooperator()).count();
        let cc_edges = strategies
            .iter()
            .zip(&coop_neighbors)
            .filter(|(s, _)| s.is_cooperator())
            .map(|(_, &c)| c as usize)
            .sum::<usize>()
            / 2;
        Self {
            graph,
            strategies,
            coop_neighbors,
            n_coop,
            cc_edges,
        }
    }

    pub fn uniform(graph: RegularGraph, s: Strategy) -> Self {
        let n = graph.node_count();
        Self::new(graph, vec![s; n])
    }

    pub fn random<R: Rng + ?Sized>(graph: RegularGraph, x0: f64, mode: InitMode, rng: &mut R) -> Self {
        let n = graph.node_count();
        let strategies = match mode {
            InitMode::Bernoulli => (0..n)
                .map(|_| {
                    if rng.gen::<f64>() < x0 {
                        Strategy::Cooperate
                    } else {
                        Strategy::Defect
                    }
                })
                .collect(),
            InitMode::Exact => {
                let target = (x0 * n as f64).floor() as usize;
                let chosen = rand::seq::index::sample(rng, n, target.min(n));
                let mut s = vec![Strategy::Defect; n];
                for v in chosen.iter() {
                    s[v] = Strategy::Cooperate;
                }
                s
            }
        };
        Self::new(graph, strategies)
    }

    pub fn graph(&self) -> &RegularGraph {
        &self.graph
    }

    pub fn strategy(&self, v: usize) -> Strategy {
        self.strategies[v]
    }

    pub fn strategies(&self) -> &[Strategy] {
        &self.strategies
    }

    pub fn cooperator_count(&self) -> usize {
        self.n_coop
    }

    pub fn cc_edge_count(&self) -> usize {
        self.cc_edges
    }

    pub fn x_c(&self) -> f64 {
        self.n_coop as f64 / self.graph.node_count() as f64
    }

    /// Share of cooperators' neighbors that cooperate; zero without
    /// cooperators.
    pub fn x_c_given_c(&self) -> f64 {
        if self.n_coop == 0 {
            return 0.0;
        }
        2.0 * self.cc_edges as f64 / (self.graph.degree() * self.n_coop) as f64
    }

    /// Accumulated payoff of `v` against all its neighbors.
    pub fn payoff(&self, v: usize, p: &GameParams) -> f64 {
        let nc = self.coop_neighbors[v] as f64;
        match self.strategies[v] {
            Strategy::Cooperate => nc * p.benefit - p.degree as f64 * p.cost,
            Strategy::Defect => nc * p.benefit,
        }
    }

    pub fn set_strategy(&mut self, v: usize, s: Strategy) {
        if self.strategies[v] == s {
            return;
        }
        let nc = self.coop_neighbors[v] as usize;
        let k = self.graph.degree();
        let nbrs = &self.graph.neighbors[v * k..(v + 1) * k];
        match s {
            Strategy::Cooperate => {
                self.n_coop += 1;
                self.cc_edges += nc;
                for &u in nbrs {
                    self.coop_neighbors[u] += 1;
                }
            }
            Strategy::Defect => {
                self.n_coop -= 1;
                self.cc_edges -= nc;
                for &u in nbrs {
                    self.coop_neighbors[u] -= 1;
                }
            }
        }
        self.strategies[v] = s;
    }
}

/// Fermi adoption probability `1 / (1 + exp(-ω (π_model - π_focal)))`.
pub fn fermi_probability(omega: f64, payoff_focal: f64, payoff_model: f64) -> f64 {
    1.0 / (1.0 + (-omega * (payoff_model - payoff_focal)).exp())
}

/// Outcome probabilities of one imitation event: `(adopt C, adopt D, keep)`
/// given the summed fitness of cooperating neighbors, of defecting neighbors,
/// and the focal player's own fitness.
pub fn imitation_probabilities(coop_weight: f64, defect_weight: f64, own: f64) -> (f64, f64, f64) {
    let total = coop_weight + defect_weight + own;
    (coop_weight / total, defect_weight / total, own / total)
}

/// Reject games in which the worst possible payoff `-k c` gives negative
/// fitness.
pub fn check_nonnegative_fitness(p: &GameParams) -> Result<()> {
    let worst = fitness(-(p.degree as f64) * p.cost, p.omega);
    if worst < 0.0 {
        return Err(Error::NegativeFitness {
            fitness: worst,
            omega: p.omega,
        });
    }
    Ok(())
}

/// Pairwise-comparison event. Returns whether a strategy changed.
pub fn pc_update_event<R: Rng + ?Sized>(pop: &mut Population, p: &GameParams, rng: &mut R) -> bool {
    let n = pop.graph.node_count();
    let focal = rng.gen_range(0..n);
    let model = pop.graph.neighbors(focal)[rng.gen_range(0..pop.graph.degree())];
    let target = pop.strategies[model];
    if pop.strategies[focal] == target {
        return false;
    }
    let prob = fermi_probability(p.omega, pop.payoff(focal, p), pop.payoff(model, p));
    if rng.gen::<f64>() < prob {
        pop.set_strategy(focal, target);
        true
    } else {
        false
    }
}

/// Imitation event: the focal player copies itself or a neighbor with
/// probability proportional to fitness. Returns whether a strategy changed.
pub fn im_update_event<R: Rng + ?Sized>(
    pop: &mut Population,
    p: &GameParams,
    rng: &mut R,
) -> Result<bool> {
    let n = pop.graph.node_count();
    let focal = rng.gen_range(0..n);
    let weight = |v: usize| -> Result<f64> {
        let g = fitness(pop.payoff(v, p), p.omega);
        if g < 0.0 {
            return Err(Error::NegativeFitness {
                fitness: g,
                omega: p.omega,
            });
        }
        Ok(g)
    };
    let own = weight(focal)?;
    let (mut w_c, mut w_d) = (0.0, 0.0);
    for &u in pop.graph.neighbors(focal) {
        let g = weight(u)?;
        match pop.strategies[u] {
            Strategy::Cooperate => w_c += g,
            Strategy::Defect => w_d += g,
        }
    }
    let total = w_c + w_d + own;
    if total <= 0.0 {
        return Ok(false);
    }
    let u = rng.gen::<f64>() * total;
    let next = if u < w_c {
        Strategy::Cooperate
    } else if u < w_c + w_d {
        Strategy::Defect
    } else {
        return Ok(false);
    };
    let changed = pop.strategies[focal] != next;
    pop.set_strategy(focal, next);
    Ok(changed)
}

/// One observation of a running population.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub t: f64,
    pub x_c: f64,
    pub x_c_given_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EventKind {
    Pc,
    Im,
}

fn event_kinds(schedule: &SwitchSchedule) -> Result<Vec<EventKind>> {
    schedule
        .rules()
        .iter()
        .map(|r| match r {
            UpdateRule::PairwiseComparison => Ok(EventKind::Pc),
            UpdateRule::Imitation => Ok(EventKind::Im),
            other => Err(Error::UnsupportedRule(other.to_string())),
        })
        .collect()
}

/// Run `ceil(n t_end)` events under the switching schedule and observe the
/// population on the grid `0, sample_dt, ...`. An observation at time `s`
/// reflects every event with time `e / n < s`.
pub fn run_switched_simulation<R: Rng + ?Sized>(
    pop: &mut Population,
    schedule: &SwitchSchedule,
    p: &GameParams,
    t_end: f64,
    sample_dt: f64,
    rng: &mut R,
) -> Result<Vec<Observation>> {
    let kinds = event_kinds(schedule)?;
    if kinds.contains(&EventKind::Im) {
        check_nonnegative_fitness(p)?;
    }
    let n = pop.graph.node_count();
    let nf = n as f64;
    let total_events = (nf * t_end - 1e-9).ceil().max(0.0) as u64;
    let sample_times: Vec<f64> = time_grid(t_end, sample_dt).collect();
    let observe = |pop: &Population, t: f64| Observation {
        t,
        x_c: pop.x_c(),
        x_c_given_c: pop.x_c_given_c(),
    };

    let mut out = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;
    for e in 0..total_events {
        let t = e as f64 / nf;
        while next_sample < sample_times.len() && t >= sample_times[next_sample] - 1e-12 {
            out.push(observe(pop, sample_times[next_sample]));
            next_sample += 1;
        }
        match kinds[schedule.signal_at(t).index] {
            EventKind::Pc => {
                pc_update_event(pop, p, rng);
            }
            EventKind::Im => {
                im_update_event(pop, p, rng)?;
            }
        }
    }
    for &s in &sample_times[next_sample..] {
        out.push(observe(pop, s));
    }
    Ok(out)
}

/// Everything that defines one replicate apart from its seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSpec {
    pub pop_size: usize,
    pub params: GameParams,
    pub schedule: SwitchSchedule,
    pub x0: f64,
    pub init: InitMode,
    pub t_end: f64,
    pub sample_dt: f64,
}

impl SimSpec {
    /// A single replicate: build a graph, seed the strategies and run.
    pub fn run_once(&self, seed: u64) -> Result<Vec<Observation>> {
        let mut rng = SimRng::seed_from_u64(seed);
        let graph = RegularGraph::random(self.pop_size, self.params.degree, &mut rng)?;
        let mut pop = Population::random(graph, self.x0, self.init, &mut rng);
        run_switched_simulation(
            &mut pop,
            &self.schedule,
            &self.params,
            self.t_end,
            self.sample_dt,
            &mut rng,
        )
    }
}

/// Per-time ensemble moments. Standard deviations use the `1/runs`
/// normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_x_c: Vec<f64>,
    pub std_x_c: Vec<f64>,
    pub mean_x_c_given_c: Vec<f64>,
    pub std_x_c_given_c: Vec<f64>,
    pub runs: usize,
}

impl EnsembleStats {
    /// Standard error of the mean cooperator fraction at sample `i`.
    pub fn stderr_x_c(&self, i: usize) -> f64 {
        self.std_x_c[i] / (self.runs as f64).sqrt()
    }
}

#[cfg(feature = "parallel")]
fn run_replicates(
    spec: &SimSpec,
    runs: usize,
    base_seed: u64,
    threads: Option<usize>,
) -> Result<Vec<Vec<Observation>>> {
    let job = || -> Result<Vec<Vec<Observation>>> {
        (0..runs)
            .into_par_iter()
            .map(|i| spec.run_once(base_seed.wrapping_add(i as u64)))
            .collect()
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .expect("thread pool")
            .install(job),
        None => job(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_replicates(
    spec: &SimSpec,
    runs: usize,
    base_seed: u64,
    _threads: Option<usize>,
) -> Result<Vec<Vec<Observation>>> {
    (0..runs)
        .map(|i| spec.run_once(base_seed.wrapping_add(i as u64)))
        .collect()
}

/// Independent replicates with seeds `base_seed + i`, run on up to
/// `threads` workers. The result does not depend on the worker count.
pub fn run_ensemble(
    spec: &SimSpec,
    runs: usize,
    base_seed: u64,
    threads: Option<usize>,
) -> Result<EnsembleStats> {
    assert!(runs >= 1, "an ensemble needs at least one run");
    let replicates = run_replicates(spec, runs, base_seed, threads)?;

    let len = replicates[0].len();
    let mut stats = EnsembleStats {
        times: replicates[0].iter().map(|o| o.t).collect(),
        mean_x_c: vec![0.0; len],
        std_x_c: vec![0.0; len],
        mean_x_c_given_c: vec![0.0; len],
        std_x_c_given_c: vec![0.0; len],
        runs,
    };
    let r = runs as f64;
    for i in 0..len {
        let (mut sx, mut sxx, mut sy, mut syy) = (0.0, 0.0, 0.0, 0.0);
        for rep in &replicates {
            let o = rep[i];
            sx += o.x_c;
            sxx += o.x_c * o.x_c;
            sy += o.x_c_given_c;
            syy += o.x_c_given_c * o.x_c_given_c;
        }
        let (mx, my) = (sx / r, sy / r);
        stats.mean_x_c[i] = mx;
        stats.mean_x_c_given_c[i] = my;
        stats.std_x_c[i] = (sxx / r - mx * mx).max(0.0).sqrt();
        stats.std_x_c_given_c[i] = (syy / r - my * my).max(0.0).sqrt();
    }
    if runs == 1 {
        stats.std_x_c.iter_mut().for_each(|s| *s = 0.0);
        stats.std_x_c_given_c.iter_mut().for_each(|s| *s = 0.0);
    }
    Ok(stats)
}
