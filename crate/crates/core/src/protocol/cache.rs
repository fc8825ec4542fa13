//! Path cache of whole source routes, keyed by destination.

use std::collections::BTreeMap;

use crate::engine::SimTime;
use crate::error::SimError;

use super::packet::{contains_link, is_loop_free, Link, NodeId, RouteRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CachePolicy {
    /// DSR: any route, at most `max_per_dst`, oldest evicted first.
    Fifo { max_per_dst: usize },
    /// MEA-DSR: exactly one primary and one alternate slot per destination.
    PrimaryAlternate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedRoute {
    pub route: Vec<NodeId>,
    pub inserted_at: SimTime,
    pub role: Option<RouteRole>,
    /// Discovery round the route came from (MEA-DSR slots only).
    pub seq: u32,
}

#[derive(Debug, Clone)]
pub struct RouteCache {
    policy: CachePolicy,
    routes: BTreeMap<NodeId, Vec<CachedRoute>>,
}

impl RouteCache {
    pub fn new(policy: CachePolicy) -> Self {
        RouteCache { policy, routes: BTreeMap::new() }
    }

    pub fn policy(&self) -> CachePolicy {
        self.policy
    }

    /// Stores a route under its last node. Under the primary/alternate policy
    /// this fills the primary slot.
    pub fn insert(&mut self, route: Vec<NodeId>, now: SimTime) -> Result<bool, SimError> {
        match self.policy {
            CachePolicy::Fifo { max_per_dst } => {
                check_route(&route)?;
                let dst = *route.last().expect("checked non-empty");
                let entry = self.routes.entry(dst).or_default();
                if entry.iter().any(|c| c.route == route) {
                    return Ok(false);
                }
                entry.push(CachedRoute { route, inserted_at: now, role: None, seq: 0 });
                while entry.len() > max_per_dst {
                    entry.remove(0);
                }
                Ok(true)
            }
            CachePolicy::PrimaryAlternate => self.insert_role(route, RouteRole::Primary, 0, now),
        }
    }

    /// Fills one slot. A route from a newer discovery round clears the other
    /// slot; one from an older round is ignored.
    pub fn insert_role(&mut self, route: Vec<NodeId>, role: RouteRole, seq: u32, now: SimTime) -> Result<bool, SimError> {
        check_route(&route)?;
        let dst = *route.last().expect("checked non-empty");
        let entry = self.routes.entry(dst).or_default();
        let newest = entry.iter().map(|c| c.seq).max();
        match newest {
            Some(s) if seq < s => return Ok(false),
            Some(s) if seq > s => entry.clear(),
            _ => {}
        }
        entry.retain(|c| c.role != Some(role));
        entry.push(CachedRoute { route, inserted_at: now, role: Some(role), seq });
        entry.sort_by_key(|c| c.role);
        Ok(true)
    }

    /// Preferred route to `dst`: the shortest (earliest stored on ties) for the
    /// FIFO policy, the primary and then the alternate for the slot policy.
    pub fn lookup(&self, dst: NodeId) -> Option<&[NodeId]> {
        let entry = self.routes.get(&dst)?;
        let best = match self.policy {
            CachePolicy::Fifo { .. } => entry.iter().min_by_key(|c| c.route.len()),
            CachePolicy::PrimaryAlternate => entry.iter().min_by_key(|c| c.role),
        };
        best.map(|c| c.route.as_slice())
    }

    pub fn routes_to(&self, dst: NodeId) -> &[CachedRoute] {
        self.routes.get(&dst).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_route(&self, dst: NodeId) -> bool {
        self.routes.get(&dst).is_some_and(|v| !v.is_empty())
    }

    /// Removes every route using the directed `link`; returns how many went.
    pub fn invalidate_link(&mut self, link: Link) -> usize {
        let mut removed = 0;
        for routes in self.routes.values_mut() {
            let before = routes.len();
            routes.retain(|c| !contains_link(&c.route, link));
            removed += before - routes.len();
        }
        self.routes.retain(|_, v| !v.is_empty());
        removed
    }

    pub fn len(&self) -> usize {
        self.routes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

fn check_route(route: &[NodeId]) -> Result<(), SimError> {
    if route.len() < 2 || !is_loop_free(route) {
        return Err(SimError::LoopedRoute(route.to_vec()));
    }
    Ok(())
}
