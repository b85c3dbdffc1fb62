//! Join/leave event logs: recording, parsing, and replay with audit.
//!
//! A log is JSON lines, one event per line:
//! `{"op":"join","user":7,"choices":[3,9],"chosen":3,"loads_digest":"..."}`.
//! Leaves carry `"choices":null` and the slot that was vacated. The digest is
//! taken over the load vector after the event.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pool::{join_overhead_bits, JoinRecord, LeaveRecord, SlotTable, UserId, VirtualPool};
use super::DecentralError;
use crate::ballsbins::ChurnScript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Join,
    Leave,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub op: Op,
    pub user: UserId,
    pub choices: Option<[usize; 2]>,
    pub chosen: usize,
    pub loads_digest: String,
}

/// First 16 hex digits of SHA-256 over the loads as little-endian `u32`s.
pub fn loads_digest(loads: &[u32]) -> String {
    let mut h = Sha256::new();
    for l in loads {
        h.update(l.to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

impl Event {
    pub fn join(r: &JoinRecord, loads: &[u32]) -> Self {
        Event {
            op: Op::Join,
            user: r.user,
            choices: Some([r.choices.0, r.choices.1]),
            chosen: r.chosen,
            loads_digest: loads_digest(loads),
        }
    }

    pub fn leave(r: &LeaveRecord, loads: &[u32]) -> Self {
        Event {
            op: Op::Leave,
            user: r.user,
            choices: None,
            chosen: r.slot,
            loads_digest: loads_digest(loads),
        }
    }
}

pub fn write_event_log<W: Write>(events: &[Event], mut w: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a log; blank lines are skipped, line numbers are 1-based.
pub fn parse_event_log(text: &str) -> Result<Vec<(usize, Event)>, DecentralError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map(|e| (i + 1, e))
                .map_err(|e| DecentralError::EventLog {
                    line: i + 1,
                    message: e.to_string(),
                })
        })
        .collect()
}

/// Places the initial population and then applies the script's deletions,
/// each followed by a join. Ball `t` of the script is user `t - 1`.
pub fn run_churn<R: Rng + ?Sized>(
    pool: &mut VirtualPool,
    script: &ChurnScript,
    rng: &mut R,
) -> Result<Vec<Event>, DecentralError> {
    if pool.table().next_user() != 0 {
        return Err(DecentralError::NotEmpty);
    }
    let mut events = Vec::with_capacity(script.population_cap() + 2 * script.churn_steps());
    for _ in 0..script.population_cap() {
        let r = pool.sample_join(rng);
        events.push(Event::join(&r, pool.loads()));
    }
    for &v in script.deletions() {
        let r = pool.leave(v - 1)?;
        events.push(Event::leave(&r, pool.loads()));
        let r = pool.sample_join(rng);
        events.push(Event::join(&r, pool.loads()));
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditFailure {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReplayAudit {
    pub ok: bool,
    pub events: usize,
    pub joins: u64,
    pub leaves: u64,
    pub bits_per_join: u64,
    pub bits_total: u64,
    pub population: usize,
    pub final_loads: Vec<u32>,
    pub failure: Option<AuditFailure>,
}

/// Replays `events` into a fresh table of `num_slots` slots, checking after
/// every event that the reported choice and load digest match, that loads
/// sum to the population, and that no user other than the event's subject
/// changed slot.
pub fn replay(
    events: &[(usize, Event)],
    num_slots: usize,
    k_cap: u64,
) -> Result<ReplayAudit, DecentralError> {
    let mut table = SlotTable::new(num_slots, k_cap)?;
    let bits_per_join = join_overhead_bits(k_cap)?;
    let mut joins = 0u64;
    let mut leaves = 0u64;
    let mut failure = None;
    let mut mirror: Vec<u32> = Vec::new();

    for (line, event) in events {
        if let Err(message) = apply(&mut table, event, &mut mirror) {
            failure = Some(AuditFailure {
                line: *line,
                message,
            });
            break;
        }
        match event.op {
            Op::Join => joins += 1,
            Op::Leave => leaves += 1,
        }
    }

    Ok(ReplayAudit {
        ok: failure.is_none(),
        events: events.len(),
        joins,
        leaves,
        bits_per_join,
        bits_total: bits_per_join * joins,
        population: table.population(),
        final_loads: table.loads().to_vec(),
        failure,
    })
}

/// `mirror` holds the assignments before the event and is brought up to
/// date afterwards, so only the subject's entry is ever rewritten.
fn apply(table: &mut SlotTable, event: &Event, mirror: &mut Vec<u32>) -> Result<(), String> {
    let subject = usize::try_from(event.user).map_err(|_| "user id too large".to_string())?;

    match event.op {
        Op::Join => {
            let [first, second] = event
                .choices
                .ok_or_else(|| "join without choices".to_string())?;
            if event.user != table.next_user() {
                return Err(format!(
                    "join of user {} but the next user id is {}",
                    event.user,
                    table.next_user()
                ));
            }
            let r = table
                .join_with_choices(first, second)
                .map_err(|e| e.to_string())?;
            if r.chosen != event.chosen {
                return Err(format!(
                    "user {} should join slot {} but the log says {}",
                    event.user, r.chosen, event.chosen
                ));
            }
        }
        Op::Leave => {
            let r = table.leave(event.user).map_err(|e| e.to_string())?;
            if r.slot != event.chosen {
                return Err(format!(
                    "user {} left slot {} but the log says {}",
                    event.user, r.slot, event.chosen
                ));
            }
        }
    }

    let now = table.raw_assignments();
    let unchanged = now.len() <= mirror.len().max(subject + 1)
        && now[..subject] == mirror[..subject.min(mirror.len())]
        && now.get(subject + 1..).unwrap_or(&[]) == mirror.get(subject + 1..).unwrap_or(&[]);
    if !unchanged {
        return Err(format!(
            "event for user {} changed another user's cache",
            event.user
        ));
    }
    if mirror.len() < now.len() {
        mirror.resize(now.len(), u32::MAX);
    }
    mirror[subject] = now[subject];
    let total: u64 = table.loads().iter().map(|&l| u64::from(l)).sum();
    if total != table.population() as u64 {
        return Err(format!(
            "loads sum to {total} with {} users present",
            table.population()
        ));
    }
    let digest = loads_digest(table.loads());
    if digest != event.loads_digest {
        return Err(format!(
            "load digest {digest} does not match logged {}",
            event.loads_digest
        ));
    }
    Ok(())
}
