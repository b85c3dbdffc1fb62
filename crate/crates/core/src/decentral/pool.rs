use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::DecentralError;
use crate::codec::CacheState;
use crate::rsgraph::{self, GraphIndex, RsGraph, SchemeParams};

pub type UserId = u64;

const VACANT: u32 = u32::MAX;

/// Bits exchanged per join: `3 * ceil(log2 K_cap)`.
pub fn join_overhead_bits(k_cap: u64) -> Result<u64, DecentralError> {
    if k_cap < 2 {
        return Err(DecentralError::OutOfRange(format!(
            "population bound must be at least 2 (got {k_cap})"
        )));
    }
    // ceil(log2 x) for x >= 2
    let bits = u64::from(64 - (k_cap - 1).leading_zeros());
    Ok(3 * bits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct JoinRecord {
    pub user: UserId,
    pub choices: (usize, usize),
    pub chosen: usize,
    pub bits_exchanged: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LeaveRecord {
    pub user: UserId,
    pub slot: usize,
}

/// Load counters and user-to-slot assignments for `K'` virtual slots.
///
/// User ids are handed out sequentially from 0 in join order. Slot members
/// are kept in join order, which the delivery rounds rely on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotTable {
    loads: Vec<u32>,
    members: Vec<Vec<UserId>>,
    slot_of: Vec<u32>,
    population: usize,
    k_cap: u64,
    bits_per_join: u64,
}

impl SlotTable {
    pub fn new(num_slots: usize, k_cap: u64) -> Result<Self, DecentralError> {
        if num_slots == 0 || num_slots >= VACANT as usize {
            return Err(DecentralError::OutOfRange(format!(
                "slot count {num_slots} out of range"
            )));
        }
        Ok(SlotTable {
            loads: vec![0; num_slots],
            members: vec![Vec::new(); num_slots],
            slot_of: Vec::new(),
            population: 0,
            k_cap,
            bits_per_join: join_overhead_bits(k_cap)?,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.loads.len()
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    pub fn max_load(&self) -> u32 {
        self.loads.iter().copied().max().unwrap_or(0)
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn k_cap(&self) -> u64 {
        self.k_cap
    }

    /// Id the next joining user will receive.
    pub fn next_user(&self) -> UserId {
        self.slot_of.len() as UserId
    }

    pub fn slot_of(&self, user: UserId) -> Option<usize> {
        let s = *self.slot_of.get(usize::try_from(user).ok()?)?;
        (s != VACANT).then_some(s as usize)
    }

    /// Users assigned to `slot`, oldest first.
    pub fn members(&self, slot: usize) -> &[UserId] {
        &self.members[slot]
    }

    /// Present users in id (= join) order with their slots.
    pub fn assignments(&self) -> impl Iterator<Item = (UserId, usize)> + '_ {
        self.slot_of
            .iter()
            .enumerate()
            .filter(|(_, &s)| s != VACANT)
            .map(|(u, &s)| (u as UserId, s as usize))
    }

    /// Slot of every user id ever issued, `u32::MAX` for departed users.
    pub fn raw_assignments(&self) -> &[u32] {
        &self.slot_of
    }

    /// Draws two slots uniformly with replacement and joins a new user.
    pub fn sample_join<R: Rng + ?Sized>(&mut self, rng: &mut R) -> JoinRecord {
        let n = self.loads.len();
        let first = rng.gen_range(0..n);
        let second = rng.gen_range(0..n);
        self.join_with_choices(first, second)
            .expect("drawn slots are in range")
    }

    /// Joins a new user given its two candidate slots; the first candidate
    /// wins unless it is strictly more loaded.
    pub fn join_with_choices(
        &mut self,
        first: usize,
        second: usize,
    ) -> Result<JoinRecord, DecentralError> {
        let n = self.loads.len();
        if first >= n || second >= n {
            return Err(DecentralError::OutOfRange(format!(
                "choices ({first}, {second}) outside {n} slots"
            )));
        }
        let chosen = if self.loads[first] <= self.loads[second] {
            first
        } else {
            second
        };
        let user = self.next_user();
        self.loads[chosen] += 1;
        self.members[chosen].push(user);
        self.slot_of.push(chosen as u32);
        self.population += 1;
        Ok(JoinRecord {
            user,
            choices: (first, second),
            chosen,
            bits_exchanged: self.bits_per_join,
        })
    }

    pub fn leave(&mut self, user: UserId) -> Result<LeaveRecord, DecentralError> {
        let slot = self
            .slot_of(user)
            .ok_or(DecentralError::UnknownUser(user))?;
        self.slot_of[user as usize] = VACANT;
        self.loads[slot] -= 1;
        let members = &mut self.members[slot];
        let pos = members
            .iter()
            .position(|&u| u == user)
            .expect("assigned user is listed in its slot");
        members.remove(pos);
        self.population -= 1;
        Ok(LeaveRecord { user, slot })
    }
}

/// Virtual cache contents of a centralized scheme plus the real users
/// sharing them.
#[derive(Debug, Clone)]
pub struct VirtualPool {
    graph: Arc<RsGraph>,
    index: Arc<GraphIndex>,
    params: SchemeParams,
    caches: Arc<[CacheState]>,
    table: SlotTable,
}

impl VirtualPool {
    /// One slot per user of `graph`, which must be a valid RS graph.
    pub fn new(graph: Arc<RsGraph>, k_cap: u64) -> Result<Self, DecentralError> {
        let params = rsgraph::scheme_params(&graph)?;
        let index = Arc::new(graph.index());
        let caches: Arc<[CacheState]> = (0..graph.num_users())
            .map(|k| CacheState::for_user(&index, graph.num_packets(), k))
            .collect();
        let table = SlotTable::new(graph.num_users(), k_cap)?;
        Ok(VirtualPool {
            graph,
            index,
            params,
            caches,
            table,
        })
    }

    pub fn graph(&self) -> &RsGraph {
        &self.graph
    }

    pub fn index(&self) -> &GraphIndex {
        &self.index
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn table(&self) -> &SlotTable {
        &self.table
    }

    pub fn num_slots(&self) -> usize {
        self.table.num_slots()
    }

    pub fn loads(&self) -> &[u32] {
        self.table.loads()
    }

    pub fn population(&self) -> usize {
        self.table.population()
    }

    pub fn virtual_cache(&self, slot: usize) -> &CacheState {
        &self.caches[slot]
    }

    /// The cache a present real user holds.
    pub fn cache_of(&self, user: UserId) -> Option<&CacheState> {
        self.table.slot_of(user).map(|s| &self.caches[s])
    }

    pub fn sample_join<R: Rng + ?Sized>(&mut self, rng: &mut R) -> JoinRecord {
        self.table.sample_join(rng)
    }

    pub fn join_with_choices(
        &mut self,
        first: usize,
        second: usize,
    ) -> Result<JoinRecord, DecentralError> {
        self.table.join_with_choices(first, second)
    }

    pub fn leave(&mut self, user: UserId) -> Result<LeaveRecord, DecentralError> {
        self.table.leave(user)
    }

    /// Places `count` users one after another into an empty pool.
    pub fn place_all<R: Rng + ?Sized>(
        &mut self,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<JoinRecord>, DecentralError> {
        if self.table.next_user() != 0 {
            return Err(DecentralError::NotEmpty);
        }
        Ok((0..count).map(|_| self.table.sample_join(rng)).collect())
    }
}
