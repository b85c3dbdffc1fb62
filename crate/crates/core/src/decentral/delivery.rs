//! Round-based delivery for a populated pool.
//!
//! Round `i` serves, for every slot with at least `i` users, the `i`-th user
//! to have joined that slot. Slots without a user in a round request the
//! all-zero dummy file, which drops out of every XOR.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::Serialize;

use super::pool::{UserId, VirtualPool};
use super::DecentralError;
use crate::ballsbins::lnln_over_ln2;
use crate::codec::{self, Library, PayloadBlock, Transmission};
use crate::rsgraph::{ratio_f64, RsGraph};

/// Demands of the present real users.
pub type RealDemands = HashMap<UserId, usize>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Round {
    /// Per slot: the user served in this round and its file.
    pub slots: Vec<Option<(UserId, usize)>>,
}

impl Round {
    pub fn demand_slots(&self) -> Vec<Option<usize>> {
        self.slots.iter().map(|s| s.map(|(_, f)| f)).collect()
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryPlan {
    pub rounds: Vec<Round>,
    /// `t` transmissions per round.
    pub naive_transmission_count: u64,
    /// Transmissions left after dropping those whose matching touches only
    /// dummy slots.
    pub pruned_transmission_count: u64,
}

fn live_matchings(graph: &RsGraph, round: &Round) -> u64 {
    graph
        .matchings()
        .iter()
        .filter(|m| m.iter().any(|e| round.slots[e.user].is_some()))
        .count() as u64
}

pub fn build_rounds(
    pool: &VirtualPool,
    demands: &RealDemands,
) -> Result<DeliveryPlan, DecentralError> {
    let table = pool.table();
    let num_rounds = table.max_load() as usize;
    let mut rounds = Vec::with_capacity(num_rounds);
    for i in 0..num_rounds {
        let slots = (0..table.num_slots())
            .map(|slot| {
                table
                    .members(slot)
                    .get(i)
                    .map(|&user| {
                        demands
                            .get(&user)
                            .map(|&file| (user, file))
                            .ok_or(DecentralError::MissingDemand(user))
                    })
                    .transpose()
            })
            .collect::<Result<Vec<_>, _>>()?;
        rounds.push(Round { slots });
    }
    let t = pool.graph().num_matchings() as u64;
    let pruned = rounds.iter().map(|r| live_matchings(pool.graph(), r)).sum();
    Ok(DeliveryPlan {
        naive_transmission_count: t * rounds.len() as u64,
        pruned_transmission_count: pruned,
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeFailure {
    pub user: UserId,
    pub round: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecentralDelivery {
    pub rounds: usize,
    /// Transmissions actually encoded, `t` per round.
    pub naive_transmissions: u64,
    pub pruned_transmissions: u64,
    pub decoded_users: usize,
    pub failures: Vec<DecodeFailure>,
}

impl DecentralDelivery {
    pub fn all_decoded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Encodes every round and decodes every served user from the payloads,
/// comparing against the library byte for byte.
pub fn deliver_decentralized(
    pool: &VirtualPool,
    library: &Library,
    plan: &DeliveryPlan,
) -> Result<DecentralDelivery, DecentralError> {
    let graph = pool.graph();
    let b = library.packet_bytes();
    let mut out = vec![0u8; library.num_packets() * b];
    let mut naive = 0u64;
    let mut pruned = 0u64;
    let mut decoded = 0usize;
    let mut failures = Vec::new();
    for (r, round) in plan.rounds.iter().enumerate() {
        let slots = round.demand_slots();
        let block = PayloadBlock::encode(graph, library, &slots)?;
        naive += block.len() as u64;
        pruned += live_matchings(graph, round);
        for (slot, entry) in round.slots.iter().enumerate() {
            let Some((user, file)) = *entry else { continue };
            let cache = pool.cache_of(user).unwrap_or(pool.virtual_cache(slot));
            let result = codec::decode_blind_into(
                graph,
                pool.index(),
                slot,
                cache,
                &block,
                &slots,
                library,
                &mut out,
            );
            match result {
                Ok(()) if out.as_slice() == library.file(file) => decoded += 1,
                Ok(()) => failures.push(DecodeFailure {
                    user,
                    round: r,
                    reason: "decoded bytes differ from the demanded file".into(),
                }),
                Err(e) => failures.push(DecodeFailure {
                    user,
                    round: r,
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(DecentralDelivery {
        rounds: plan.rounds.len(),
        naive_transmissions: naive,
        pruned_transmissions: pruned,
        decoded_users: decoded,
        failures,
    })
}

/// The transmissions of one round, optionally without dummy-only ones.
pub fn round_transmissions(
    pool: &VirtualPool,
    library: &Library,
    round: &Round,
    prune: bool,
) -> Result<Vec<Transmission>, DecentralError> {
    let mut tx = codec::deliver_with_dummies(pool.graph(), library, &round.demand_slots())?;
    if prune {
        tx.retain(|t| t.constituents.iter().any(|c| c.file.is_some()));
    }
    Ok(tx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub num_users: usize,
    pub k_prime: usize,
    pub centralized_rate: Ratio<u64>,
    pub memory_ratio: Ratio<u64>,
    pub max_load: u32,
    pub rounds: usize,
    /// `(t / F) * max_k X_k`.
    pub naive_rate: Ratio<u64>,
    pub pruned_rate: Ratio<u64>,
    /// `K (1 - M/N) / g + R_c (ln ln K' / ln 2 + 9)`; absent below 3 slots.
    pub bound: Option<f64>,
}

impl RateReport {
    pub fn naive_rate_f64(&self) -> f64 {
        ratio_f64(self.naive_rate)
    }

    pub fn pruned_rate_f64(&self) -> f64 {
        ratio_f64(self.pruned_rate)
    }

    pub fn within_bound(&self) -> Option<bool> {
        self.bound.map(|b| self.naive_rate_f64() <= b)
    }
}

/// Rate accounting for a plan; `gain` is the target coding gain `g`.
pub fn measure_rate(pool: &VirtualPool, plan: &DeliveryPlan, gain: f64) -> RateReport {
    let params = pool.params();
    let f = params.subpacketization as u64;
    let max_load = pool.table().max_load();
    let k_prime = pool.num_slots();
    let num_users = pool.population();
    let rc = ratio_f64(params.rate);
    let bound = (k_prime >= 3).then(|| {
        num_users as f64 * (1.0 - ratio_f64(params.memory_ratio)) / gain
            + rc * (lnln_over_ln2(k_prime as f64) + 9.0)
    });
    RateReport {
        num_users,
        k_prime,
        centralized_rate: params.rate,
        memory_ratio: params.memory_ratio,
        max_load,
        rounds: plan.rounds.len(),
        naive_rate: params.rate * Ratio::from_integer(u64::from(max_load)),
        pruned_rate: Ratio::new(plan.pruned_transmission_count, f),
        bound,
    }
}
