//! Packet-level placement, XOR broadcast delivery and per-user decoding for a
//! scheme given by a Ruzsa-Szemerédi graph.
//!
//! User `k` stores packet `f` of every file exactly when `(f, k)` is not an
//! edge. Delivery sends one XOR per matching. A user recovers each missing
//! packet from the transmission of the matching that carries its edge: every
//! other term of that XOR is a packet the user has cached, since the matching
//! is induced.

use std::io::{self, Write};

use num_rational::Ratio;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rsgraph::{GraphIndex, RsGraph};

pub const DEFAULT_PACKET_BYTES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("file index {file} out of range for a library of {num_files} files")]
    InvalidFile { file: usize, num_files: usize },
    #[error("user {user}: no transmission carries packet {packet}")]
    MissingTransmission { user: usize, packet: usize },
    #[error("user {user}: matching {matching} cannot be decoded for packet {packet}")]
    Undecodable {
        user: usize,
        matching: usize,
        packet: usize,
    },
    #[error("transmission dump line {line}: {message}")]
    Dump { line: usize, message: String },
}

pub fn xor_into(dst: &mut [u8], src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= *s;
    }
}

/// `N` files of `F` packets of `B` bytes each, filled from a seeded stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Library {
    num_files: usize,
    num_packets: usize,
    packet_bytes: usize,
    seed: u64,
    data: Vec<u8>,
}

impl Library {
    pub fn generate(
        num_files: usize,
        num_packets: usize,
        packet_bytes: usize,
        seed: u64,
    ) -> Result<Self, CodecError> {
        if num_files == 0 || num_packets == 0 || packet_bytes == 0 {
            return Err(CodecError::InvalidParameter(format!(
                "library needs N, F, B >= 1 (got N={num_files}, F={num_packets}, B={packet_bytes})"
            )));
        }
        let len = num_files
            .checked_mul(num_packets)
            .and_then(|x| x.checked_mul(packet_bytes))
            .ok_or_else(|| CodecError::InvalidParameter("library size overflows".into()))?;
        let mut data = vec![0u8; len];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut data);
        Ok(Library {
            num_files,
            num_packets,
            packet_bytes,
            seed,
            data,
        })
    }

    pub fn num_files(&self) -> usize {
        self.num_files
    }

    pub fn num_packets(&self) -> usize {
        self.num_packets
    }

    pub fn packet_bytes(&self) -> usize {
        self.packet_bytes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn packet(&self, file: usize, packet: usize) -> &[u8] {
        let start = (file * self.num_packets + packet) * self.packet_bytes;
        &self.data[start..start + self.packet_bytes]
    }

    /// All packets of a file, concatenated in packet order.
    pub fn file(&self, file: usize) -> &[u8] {
        let len = self.num_packets * self.packet_bytes;
        &self.data[file * len..(file + 1) * len]
    }

    fn check_file(&self, file: usize) -> Result<(), CodecError> {
        if file >= self.num_files {
            return Err(CodecError::InvalidFile {
                file,
                num_files: self.num_files,
            });
        }
        Ok(())
    }
}

/// The packet indices a user stores (for every file).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheState {
    owner: usize,
    cached: Vec<bool>,
    count: usize,
}

impl CacheState {
    /// Cache of `user`: every packet not adjacent to it.
    pub fn for_user(index: &GraphIndex, num_packets: usize, user: usize) -> Self {
        let mut cached = vec![true; num_packets];
        for &(packet, _) in index.user_edges(user) {
            cached[packet] = false;
        }
        let count = cached.iter().filter(|&&c| c).count();
        CacheState {
            owner: user,
            cached,
            count,
        }
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn num_packets(&self) -> usize {
        self.cached.len()
    }

    pub fn contains(&self, packet: usize) -> bool {
        self.cached.get(packet).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn packets(&self) -> impl Iterator<Item = usize> + '_ {
        self.cached
            .iter()
            .enumerate()
            .filter_map(|(f, &c)| c.then_some(f))
    }

    /// Drops one packet from the cache; used to model a damaged placement.
    pub fn evict(&mut self, packet: usize) {
        if self.contains(packet) {
            self.cached[packet] = false;
            self.count -= 1;
        }
    }
}

/// One requested file index per user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandVector {
    demands: Vec<usize>,
}

impl DemandVector {
    pub fn new(demands: Vec<usize>, num_files: usize) -> Result<Self, CodecError> {
        if let Some(&file) = demands.iter().find(|&&d| d >= num_files) {
            return Err(CodecError::InvalidFile { file, num_files });
        }
        Ok(DemandVector { demands })
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }

    pub fn get(&self, user: usize) -> usize {
        self.demands[user]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.demands
    }

    fn as_slots(&self) -> Vec<Option<usize>> {
        self.demands.iter().copied().map(Some).collect()
    }
}

/// One term of a transmitted XOR. `file` is `None` for the all-zero dummy
/// file standing in for an absent user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub user: usize,
    pub packet: usize,
    pub file: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transmission {
    pub matching_index: usize,
    pub payload: Vec<u8>,
    pub constituents: Vec<Constituent>,
}

/// Placement: one cache per user of the graph.
pub fn place(graph: &RsGraph, library: &Library) -> Result<Vec<CacheState>, CodecError> {
    check_packets(graph, library)?;
    let index = graph.index();
    Ok((0..graph.num_users())
        .map(|k| CacheState::for_user(&index, graph.num_packets(), k))
        .collect())
}

fn check_packets(graph: &RsGraph, library: &Library) -> Result<(), CodecError> {
    if graph.num_packets() != library.num_packets() {
        return Err(CodecError::DimensionMismatch(format!(
            "graph has F={} packets but library files have {}",
            graph.num_packets(),
            library.num_packets()
        )));
    }
    Ok(())
}

fn check_slots(
    graph: &RsGraph,
    library: &Library,
    slots: &[Option<usize>],
) -> Result<(), CodecError> {
    check_packets(graph, library)?;
    if slots.len() != graph.num_users() {
        return Err(CodecError::DimensionMismatch(format!(
            "{} demands for {} users",
            slots.len(),
            graph.num_users()
        )));
    }
    for &file in slots.iter().flatten() {
        library.check_file(file)?;
    }
    Ok(())
}

fn encode_matching(
    graph: &RsGraph,
    library: &Library,
    slots: &[Option<usize>],
    matching: usize,
    out: &mut [u8],
) {
    out.fill(0);
    for e in graph.matching(matching) {
        if let Some(file) = slots[e.user] {
            xor_into(out, library.packet(file, e.packet));
        }
    }
}

/// Delivery for a full demand vector: one XOR per matching, in matching order.
pub fn deliver(
    graph: &RsGraph,
    library: &Library,
    demands: &DemandVector,
) -> Result<Vec<Transmission>, CodecError> {
    deliver_with_dummies(graph, library, &demands.as_slots())
}

/// Delivery where `None` slots request the all-zero dummy file.
pub fn deliver_with_dummies(
    graph: &RsGraph,
    library: &Library,
    slots: &[Option<usize>],
) -> Result<Vec<Transmission>, CodecError> {
    check_slots(graph, library, slots)?;
    let b = library.packet_bytes();
    Ok((0..graph.num_matchings())
        .map(|m| {
            let mut payload = vec![0u8; b];
            encode_matching(graph, library, slots, m, &mut payload);
            let constituents = graph
                .matching(m)
                .iter()
                .map(|e| Constituent {
                    user: e.user,
                    packet: e.packet,
                    file: slots[e.user],
                })
                .collect();
            Transmission {
                matching_index: m,
                payload,
                constituents,
            }
        })
        .collect())
}

/// Payloads only, stored contiguously and indexed by matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadBlock {
    packet_bytes: usize,
    data: Vec<u8>,
}

impl PayloadBlock {
    pub fn encode(
        graph: &RsGraph,
        library: &Library,
        slots: &[Option<usize>],
    ) -> Result<Self, CodecError> {
        check_slots(graph, library, slots)?;
        let b = library.packet_bytes();
        let mut data = vec![0u8; b * graph.num_matchings()];
        for (m, out) in data.chunks_exact_mut(b).enumerate() {
            encode_matching(graph, library, slots, m, out);
        }
        Ok(PayloadBlock {
            packet_bytes: b,
            data,
        })
    }

    /// Reassembles a block from a dump; every matching must appear exactly once.
    pub fn from_dump(
        dump: &[DumpedTransmission],
        num_matchings: usize,
        packet_bytes: usize,
    ) -> Result<Self, CodecError> {
        let mut data = vec![0u8; num_matchings * packet_bytes];
        let mut seen = vec![false; num_matchings];
        for (i, t) in dump.iter().enumerate() {
            let bad = |message: String| CodecError::Dump {
                line: i + 1,
                message,
            };
            if t.matching_index >= num_matchings {
                return Err(bad(format!("matching {} out of range", t.matching_index)));
            }
            if t.payload.len() != packet_bytes {
                return Err(bad(format!(
                    "payload has {} bytes, expected {packet_bytes}",
                    t.payload.len()
                )));
            }
            if std::mem::replace(&mut seen[t.matching_index], true) {
                return Err(bad(format!("matching {} repeated", t.matching_index)));
            }
            let start = t.matching_index * packet_bytes;
            data[start..start + packet_bytes].copy_from_slice(&t.payload);
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(CodecError::Dump {
                line: dump.len(),
                message: format!("matching {m} missing"),
            });
        }
        Ok(PayloadBlock { packet_bytes, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.packet_bytes
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, matching: usize) -> &[u8] {
        let start = matching * self.packet_bytes;
        &self.data[start..start + self.packet_bytes]
    }
}

/// Decodes the demanded file of `user` using the constituent metadata that
/// travels with each transmission.
pub fn decode(
    user: usize,
    cache: &CacheState,
    transmissions: &[Transmission],
    demands: &DemandVector,
    library: &Library,
) -> Result<Vec<u8>, CodecError> {
    if user >= demands.len() {
        return Err(CodecError::DimensionMismatch(format!(
            "user {user} has no demand in a vector of {}",
            demands.len()
        )));
    }
    let wanted = demands.get(user);
    library.check_file(wanted)?;
    let f_count = library.num_packets();
    if cache.num_packets() != f_count {
        return Err(CodecError::DimensionMismatch(format!(
            "cache covers {} packets, library {}",
            cache.num_packets(),
            f_count
        )));
    }
    let b = library.packet_bytes();
    let mut out = vec![0u8; f_count * b];
    let mut recovered = vec![false; f_count];
    for f in cache.packets() {
        out[f * b..(f + 1) * b].copy_from_slice(library.packet(wanted, f));
        recovered[f] = true;
    }

    for t in transmissions {
        for (pos, own) in t.constituents.iter().enumerate() {
            if own.user != user || cache.contains(own.packet) {
                continue;
            }
            let undecodable = || CodecError::Undecodable {
                user,
                matching: t.matching_index,
                packet: own.packet,
            };
            if own.file != Some(wanted) || own.packet >= f_count || t.payload.len() != b {
                return Err(undecodable());
            }
            let slot = &mut out[own.packet * b..(own.packet + 1) * b];
            slot.copy_from_slice(&t.payload);
            for (other_pos, other) in t.constituents.iter().enumerate() {
                if other_pos == pos {
                    continue;
                }
                let Some(file) = other.file else { continue };
                if !cache.contains(other.packet) || file >= library.num_files() {
                    return Err(undecodable());
                }
                xor_into(slot, library.packet(file, other.packet));
            }
            recovered[own.packet] = true;
        }
    }

    match recovered.iter().position(|r| !r) {
        Some(packet) => Err(CodecError::MissingTransmission { user, packet }),
        None => Ok(out),
    }
}

/// Decodes from payloads alone, taking the constituents of each matching
/// from the public graph and the public demand slots.
#[allow(clippy::too_many_arguments)]
pub fn decode_blind_into(
    graph: &RsGraph,
    index: &GraphIndex,
    user: usize,
    cache: &CacheState,
    payloads: &PayloadBlock,
    slots: &[Option<usize>],
    library: &Library,
    out: &mut [u8],
) -> Result<(), CodecError> {
    let Some(wanted) = slots.get(user).copied().flatten() else {
        return Err(CodecError::DimensionMismatch(format!(
            "user {user} has no demand"
        )));
    };
    library.check_file(wanted)?;
    let b = library.packet_bytes();
    if out.len() != library.num_packets() * b || payloads.len() != graph.num_matchings() {
        return Err(CodecError::DimensionMismatch(
            "output buffer or payload block has the wrong size".into(),
        ));
    }
    for f in cache.packets() {
        out[f * b..(f + 1) * b].copy_from_slice(library.packet(wanted, f));
    }
    for &(packet, matching) in index.user_edges(user) {
        let slot = &mut out[packet * b..(packet + 1) * b];
        slot.copy_from_slice(payloads.get(matching));
        for e in graph.matching(matching) {
            if e.user == user {
                continue;
            }
            let Some(file) = slots[e.user] else { continue };
            if !cache.contains(e.packet) {
                return Err(CodecError::Undecodable {
                    user,
                    matching,
                    packet,
                });
            }
            xor_into(slot, library.packet(file, e.packet));
        }
    }
    if cache.len() + index.degree(user) != library.num_packets() {
        let packet = (0..library.num_packets())
            .find(|&f| !cache.contains(f) && index.matching_of(f, user).is_none())
            .unwrap_or(0);
        return Err(CodecError::MissingTransmission { user, packet });
    }
    Ok(())
}

/// Per-user outcome of an end-to-end delivery check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UserMismatch {
    pub user: usize,
    /// Packets whose decoded bytes differ from the library.
    pub packets: Vec<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryCheck {
    pub ok: bool,
    pub num_transmissions: usize,
    /// Transmissions normalized by the file size `F`.
    pub rate: Ratio<u64>,
    pub mismatches: Vec<UserMismatch>,
}

/// Places, delivers and decodes for every user; `ok` iff every user gets the
/// demanded file byte for byte.
pub fn verify_delivery(
    graph: &RsGraph,
    library: &Library,
    demands: &DemandVector,
) -> Result<DeliveryCheck, CodecError> {
    let caches = place(graph, library)?;
    let transmissions = deliver(graph, library, demands)?;
    Ok(verify_transmissions(
        graph,
        library,
        demands,
        &caches,
        &transmissions,
    ))
}

/// Decodes the given transmissions for every user and compares against the
/// library.
pub fn verify_transmissions(
    graph: &RsGraph,
    library: &Library,
    demands: &DemandVector,
    caches: &[CacheState],
    transmissions: &[Transmission],
) -> DeliveryCheck {
    let b = library.packet_bytes();
    let mut mismatches = Vec::new();
    for (user, cache) in caches.iter().enumerate() {
        match decode(user, cache, transmissions, demands, library) {
            Ok(bytes) => {
                let expected = library.file(demands.get(user));
                let bad: Vec<usize> = bytes
                    .chunks_exact(b)
                    .zip(expected.chunks_exact(b))
                    .enumerate()
                    .filter_map(|(f, (got, want))| (got != want).then_some(f))
                    .collect();
                if !bad.is_empty() {
                    mismatches.push(UserMismatch {
                        user,
                        packets: bad,
                        error: None,
                    });
                }
            }
            Err(e) => mismatches.push(UserMismatch {
                user,
                packets: Vec::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    DeliveryCheck {
        ok: mismatches.is_empty() && caches.len() == graph.num_users(),
        num_transmissions: transmissions.len(),
        rate: Ratio::new(transmissions.len() as u64, graph.num_packets() as u64),
        mismatches,
    }
}

/// One line of a transmission dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpedTransmission {
    pub matching_index: usize,
    #[serde(with = "hex_bytes")]
    pub payload: Vec<u8>,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        hex::decode(text).map_err(serde::de::Error::custom)
    }
}

/// Writes transmissions as JSON lines `{"matching_index": m, "payload": hex}`.
pub fn write_dump<W: Write>(transmissions: &[Transmission], mut w: W) -> io::Result<()> {
    for t in transmissions {
        let line = DumpedTransmission {
            matching_index: t.matching_index,
            payload: t.payload.clone(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a transmission dump; blank lines are skipped.
pub fn parse_dump(text: &str) -> Result<Vec<DumpedTransmission>, CodecError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CodecError::Dump {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
