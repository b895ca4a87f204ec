use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::set::ElementSet;

use super::TaggedSet;

/// Object features: standardized 2-D position followed by appearance.
pub const POS_DIMS: usize = 2;
pub const APPEARANCE_DIMS: usize = 4;
pub const OBJECT_DIM: usize = POS_DIMS + APPEARANCE_DIMS;

/// Standard deviation of U(0, 1).
const UNIT_SD: f64 = 0.288_675_134_594_812_9;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub n_agents: usize,
    pub n_objects: usize,
    pub comm_radius: f64,
    pub obs_radius: f64,
    /// Resampling attempts before giving up.
    pub max_retries: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_agents: 7,
            n_objects: 10,
            comm_radius: 0.5,
            obs_radius: 0.4,
            max_retries: 10_000,
        }
    }
}

/// Agents and objects in the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct World<T> {
    pub agent_pos: Vec<[f64; 2]>,
    pub object_pos: Vec<[f64; 2]>,
    /// Row `j` is object `j`; its provenance id is `j`.
    pub objects: ElementSet<T>,
    /// Sorted neighbour lists, symmetric, no self-loops.
    pub comm: Vec<Vec<usize>>,
    /// Sorted object indices each agent observes.
    pub obs: Vec<Vec<usize>>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Samples a world whose communication graph is connected and whose objects
/// are each seen by at least one agent.
pub fn generate_world<T: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: &WorldConfig, n_max: usize) -> Result<World<T>> {
    if cfg.n_agents == 0 {
        return Err(Error::Contract("a world needs at least one agent".into()));
    }
    if cfg.n_objects > n_max {
        return Err(Error::Capacity {
            needed: cfg.n_objects,
            n_max,
        });
    }
    for _ in 0..cfg.max_retries.max(1) {
        let w = sample_once(rng, cfg)?;
        if w.is_connected() && w.all_observed() {
            return Ok(w);
        }
    }
    Err(Error::Generation(cfg.max_retries))
}

fn sample_once<T: Scalar, R: Rng + ?Sized>(rng: &mut R, cfg: &WorldConfig) -> Result<World<T>> {
    let point = |rng: &mut R| [rng.random::<f64>(), rng.random::<f64>()];
    let agent_pos: Vec<[f64; 2]> = (0..cfg.n_agents).map(|_| point(rng)).collect();
    let object_pos: Vec<[f64; 2]> = (0..cfg.n_objects).map(|_| point(rng)).collect();
    let mut data = Vec::with_capacity(cfg.n_objects * OBJECT_DIM);
    for p in &object_pos {
        data.extend(p.iter().map(|&c| T::lit((c - 0.5) / UNIT_SD)));
        for _ in 0..APPEARANCE_DIMS {
            let v: f64 = StandardNormal.sample(rng);
            data.push(T::lit(v));
        }
    }
    let comm = (0..cfg.n_agents)
        .map(|i| {
            (0..cfg.n_agents)
                .filter(|&j| j != i && dist(agent_pos[i], agent_pos[j]) <= cfg.comm_radius)
                .collect()
        })
        .collect();
    let obs = agent_pos
        .iter()
        .map(|&a| (0..cfg.n_objects).filter(|&o| dist(a, object_pos[o]) <= cfg.obs_radius).collect())
        .collect();
    Ok(World {
        agent_pos,
        object_pos,
        objects: ElementSet::from_flat(OBJECT_DIM, data)?,
        comm,
        obs,
    })
}

impl<T: Scalar> World<T> {
    pub fn n_agents(&self) -> usize {
        self.agent_pos.len()
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    /// Hop distances from `src`; `None` for unreachable agents.
    fn hops_from(&self, src: usize) -> Vec<Option<usize>> {
        let mut d = vec![None; self.n_agents()];
        d[src] = Some(0);
        let mut q = VecDeque::from([src]);
        while let Some(u) = q.pop_front() {
            let du = d[u].unwrap_or(0);
            for &v in &self.comm[u] {
                if d[v].is_none() {
                    d[v] = Some(du + 1);
                    q.push_back(v);
                }
            }
        }
        d
    }

    pub fn is_connected(&self) -> bool {
        self.hops_from(0).iter().all(Option::is_some)
    }

    pub fn all_observed(&self) -> bool {
        let mut seen = vec![false; self.n_objects()];
        for o in self.obs.iter().flatten() {
            seen[*o] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// Longest shortest path of the communication graph.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in 0..self.n_agents() {
            for d in self.hops_from(s) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    /// The objects agent `i` sees, tagged with their ids.
    pub fn local_observe(&self, i: usize) -> TaggedSet<T> {
        let mut set = ElementSet::empty(OBJECT_DIM);
        for &o in &self.obs[i] {
            set.push(self.objects.get(o)).expect("object width");
        }
        TaggedSet {
            set,
            ids: self.obs[i].iter().map(|&o| Some(o)).collect(),
        }
    }
}
