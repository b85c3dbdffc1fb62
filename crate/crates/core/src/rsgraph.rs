//! Ruzsa-Szemerédi bipartite graphs: packets on the left, users on the
//! right, edges partitioned into induced matchings.
//!
//! The edge set of a graph is, by definition, the union of its matchings.
//! Constructed families label every vertex with the subset of `{1, ..., n}`
//! it stands for.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::combinatorics::{self, binomial, colex_rank, CombinatoricsError};

/// Upper bound on the number of edges a constructor will materialize.
pub const MAX_EDGES: u64 = 1 << 24;

/// Upper bound on either side of a graph read from a file.
pub const MAX_SIDE: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("construction would have {edges} edges (limit {MAX_EDGES})")]
    TooLarge { edges: u64 },
    #[error(transparent)]
    Combinatorics(#[from] CombinatoricsError),
    #[error("malformed graph: {0}")]
    Malformed(String),
    #[error("graph is not a valid Ruzsa-Szemerédi graph ({0} violations)")]
    InvalidGraph(usize),
    #[error("graph file: {0}")]
    Json(#[from] serde_json::Error),
}

/// An edge `(f, k)` between packet `f` and user `k`, both 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Edge {
    pub packet: usize,
    pub user: usize,
}

impl Edge {
    pub fn new(packet: usize, user: usize) -> Self {
        Edge { packet, user }
    }
}

impl From<[usize; 2]> for Edge {
    fn from([packet, user]: [usize; 2]) -> Self {
        Edge { packet, user }
    }
}

impl From<Edge> for [usize; 2] {
    fn from(e: Edge) -> Self {
        [e.packet, e.user]
    }
}

/// Subset labels (1-based elements) for constructed families.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub packets: Vec<Vec<u32>>,
    pub users: Vec<Vec<u32>>,
    #[serde(default)]
    pub matchings: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct GraphFile {
    #[serde(rename = "F")]
    num_packets: usize,
    #[serde(rename = "K")]
    num_users: usize,
    matchings: Vec<Vec<Edge>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Labels>,
}

/// Bipartite graph on `[F] x [K]` together with its matching decomposition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct RsGraph {
    num_packets: usize,
    num_users: usize,
    matchings: Vec<Vec<Edge>>,
    labels: Option<Labels>,
}

impl TryFrom<GraphFile> for RsGraph {
    type Error = GraphError;

    fn try_from(f: GraphFile) -> Result<Self, GraphError> {
        if f.num_packets > MAX_SIDE || f.num_users > MAX_SIDE {
            return Err(GraphError::Malformed(format!(
                "F={} K={} exceeds the per-side limit {MAX_SIDE}",
                f.num_packets, f.num_users
            )));
        }
        RsGraph::new(f.num_packets, f.num_users, f.matchings, f.labels)
    }
}

impl From<RsGraph> for GraphFile {
    fn from(g: RsGraph) -> Self {
        GraphFile {
            num_packets: g.num_packets,
            num_users: g.num_users,
            matchings: g.matchings,
            labels: g.labels,
        }
    }
}

impl RsGraph {
    /// Builds a graph, checking only that it is well-formed: both sides are
    /// non-empty and every edge endpoint is in range. The Ruzsa-Szemerédi
    /// properties are checked by [`validate_rs`].
    pub fn new(
        num_packets: usize,
        num_users: usize,
        matchings: Vec<Vec<Edge>>,
        labels: Option<Labels>,
    ) -> Result<Self, GraphError> {
        if num_packets == 0 || num_users == 0 {
            return Err(GraphError::Malformed(format!(
                "F={num_packets} K={num_users}: both sides need at least one vertex"
            )));
        }
        for (m, matching) in matchings.iter().enumerate() {
            for e in matching {
                if e.packet >= num_packets || e.user >= num_users {
                    return Err(GraphError::Malformed(format!(
                        "matching {m}: edge ({}, {}) outside [{num_packets}] x [{num_users}]",
                        e.packet, e.user
                    )));
                }
            }
        }
        if let Some(l) = &labels {
            if l.packets.len() != num_packets || l.users.len() != num_users {
                return Err(GraphError::Malformed(
                    "label count does not match vertex count".into(),
                ));
            }
            if !l.matchings.is_empty() && l.matchings.len() != matchings.len() {
                return Err(GraphError::Malformed(
                    "matching label count does not match matching count".into(),
                ));
            }
        }
        Ok(RsGraph {
            num_packets,
            num_users,
            matchings,
            labels,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization is infallible")
    }

    pub fn num_packets(&self) -> usize {
        self.num_packets
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_matchings(&self) -> usize {
        self.matchings.len()
    }

    pub fn matchings(&self) -> &[Vec<Edge>] {
        &self.matchings
    }

    pub fn matching(&self, index: usize) -> &[Edge] {
        &self.matchings[index]
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    /// Sum of matching sizes; equals the edge count on valid graphs.
    pub fn num_edge_slots(&self) -> usize {
        self.matchings.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.matchings.iter().flatten().copied()
    }

    /// Distinct-edge degree of each user.
    pub fn user_degrees(&self) -> Vec<usize> {
        let distinct: HashSet<Edge> = self.edges().collect();
        let mut deg = vec![0usize; self.num_users];
        for e in distinct {
            deg[e.user] += 1;
        }
        deg
    }

    pub fn index(&self) -> GraphIndex {
        GraphIndex::new(self)
    }
}

/// Lookup tables derived from a graph: which matching carries each edge and
/// the edge list of every user.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    num_users: usize,
    edge_matching: HashMap<(usize, usize), usize>,
    user_edges: Vec<Vec<(usize, usize)>>,
}

impl GraphIndex {
    pub fn new(graph: &RsGraph) -> Self {
        let mut edge_matching = HashMap::with_capacity(graph.num_edge_slots());
        let mut user_edges = vec![Vec::new(); graph.num_users];
        for (m, matching) in graph.matchings.iter().enumerate() {
            for e in matching {
                if edge_matching.insert((e.packet, e.user), m).is_none() {
                    user_edges[e.user].push((e.packet, m));
                }
            }
        }
        GraphIndex {
            num_users: graph.num_users,
            edge_matching,
            user_edges,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Matching containing edge `(packet, user)`, if it is an edge.
    pub fn matching_of(&self, packet: usize, user: usize) -> Option<usize> {
        self.edge_matching.get(&(packet, user)).copied()
    }

    pub fn contains(&self, packet: usize, user: usize) -> bool {
        self.edge_matching.contains_key(&(packet, user))
    }

    /// `(packet, matching)` for every edge incident to `user`.
    pub fn user_edges(&self, user: usize) -> &[(usize, usize)] {
        &self.user_edges[user]
    }

    pub fn degree(&self, user: usize) -> usize {
        self.user_edges[user].len()
    }
}

/// Which family a graph was (or would be) built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Construction {
    /// `a`-subsets versus 2-subsets of `[n]`, adjacent when disjoint.
    Binomial { n: u32, a: u32 },
    /// `s`-subsets of `[K]` versus the `K` users, adjacent when the user is
    /// outside the subset.
    Mn { users: u32, s: u32 },
}

/// Counts a construction will have, computed from closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FamilyCounts {
    pub num_packets: u64,
    pub num_users: u64,
    pub num_matchings: u64,
    pub matching_size: u64,
    pub user_degree: u64,
}

impl FamilyCounts {
    pub fn num_edges(&self) -> Option<u64> {
        self.num_matchings.checked_mul(self.matching_size)
    }

    pub fn rate(&self) -> Ratio<u64> {
        Ratio::new(self.num_matchings, self.num_packets)
    }

    pub fn memory_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.num_packets - self.user_degree, self.num_packets)
    }
}

impl Construction {
    fn check(&self) -> Result<(), GraphError> {
        match *self {
            Construction::Binomial { n, a } => {
                if a < 1 || a + 2 > n {
                    return Err(GraphError::ParameterOutOfRange(format!(
                        "binomial family needs 1 <= a and a + 2 <= n (got n={n}, a={a})"
                    )));
                }
                if n > combinatorics::MAX_GROUND_SET {
                    return Err(GraphError::ParameterOutOfRange(format!(
                        "n={n} exceeds {}",
                        combinatorics::MAX_GROUND_SET
                    )));
                }
            }
            Construction::Mn { users, s } => {
                if s < 1 || s >= users {
                    return Err(GraphError::ParameterOutOfRange(format!(
                        "mn family needs 1 <= s < K (got K={users}, s={s})"
                    )));
                }
                if users > combinatorics::MAX_GROUND_SET {
                    return Err(GraphError::ParameterOutOfRange(format!(
                        "K={users} exceeds {}",
                        combinatorics::MAX_GROUND_SET
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> Result<FamilyCounts, GraphError> {
        self.check()?;
        let counts = match *self {
            Construction::Binomial { n, a } => {
                let (n, a) = (u64::from(n), u64::from(a));
                FamilyCounts {
                    num_packets: binomial(n, a)?,
                    num_users: binomial(n, 2)?,
                    num_matchings: binomial(n, a + 2)?,
                    matching_size: binomial(a + 2, 2)?,
                    user_degree: binomial(n - 2, a)?,
                }
            }
            Construction::Mn { users, s } => {
                let (k, s) = (u64::from(users), u64::from(s));
                FamilyCounts {
                    num_packets: binomial(k, s)?,
                    num_users: k,
                    num_matchings: binomial(k, s + 1)?,
                    matching_size: s + 1,
                    user_degree: binomial(k - 1, s)?,
                }
            }
        };
        Ok(counts)
    }

    pub fn build(&self) -> Result<RsGraph, GraphError> {
        match *self {
            Construction::Binomial { n, a } => construct_binomial(n, a),
            Construction::Mn { users, s } => construct_mn(users, s),
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Construction::Binomial { n, a } => write!(f, "binomial(n={n}, a={a})"),
            Construction::Mn { users, s } => write!(f, "mn(K={users}, s={s})"),
        }
    }
}

fn guard_size(counts: &FamilyCounts) -> Result<(), GraphError> {
    let edges = counts.num_edges().unwrap_or(u64::MAX);
    if edges > MAX_EDGES {
        return Err(GraphError::TooLarge { edges });
    }
    Ok(())
}

fn labels_of(n: u32, k: u32) -> Result<Vec<Vec<u32>>, GraphError> {
    Ok(combinatorics::subsets(n, k)?
        .map(combinatorics::elements)
        .collect())
}

/// The `(a+2)`-subset construction: packets are `a`-subsets of `[n]`, users
/// are 2-subsets, and matching `S` holds every disjoint pair `(A, B)` with
/// `A ∪ B = S`.
pub fn construct_binomial(n: u32, a: u32) -> Result<RsGraph, GraphError> {
    let spec = Construction::Binomial { n, a };
    let counts = spec.counts()?;
    guard_size(&counts)?;

    let mut matchings = Vec::with_capacity(counts.num_matchings as usize);
    let mut matching_labels = Vec::with_capacity(counts.num_matchings as usize);
    for s in combinatorics::subsets(n, a + 2)? {
        let members = combinatorics::elements(s);
        let mut edges = Vec::with_capacity(counts.matching_size as usize);
        for (i, &x) in members.iter().enumerate() {
            for &y in &members[i + 1..] {
                let pair = combinatorics::mask_of(&[x, y]);
                let packet = colex_rank(s ^ pair) as usize;
                let user = colex_rank(pair) as usize;
                edges.push(Edge::new(packet, user));
            }
        }
        edges.sort_unstable();
        matchings.push(edges);
        matching_labels.push(members);
    }
    let labels = Labels {
        packets: labels_of(n, a)?,
        users: labels_of(n, 2)?,
        matchings: matching_labels,
    };
    RsGraph::new(
        counts.num_packets as usize,
        counts.num_users as usize,
        matchings,
        Some(labels),
    )
}

/// The canonical symmetric scheme in Ruzsa-Szemerédi form: packets are the
/// `s`-subsets of `[K]`, user `k` misses every subset not containing it, and
/// each `(s+1)`-subset `S` gives the matching `{(S \ {k}, k) : k in S}`.
pub fn construct_mn(num_users: u32, s: u32) -> Result<RsGraph, GraphError> {
    let spec = Construction::Mn {
        users: num_users,
        s,
    };
    let counts = spec.counts()?;
    guard_size(&counts)?;

    let mut matchings = Vec::with_capacity(counts.num_matchings as usize);
    let mut matching_labels = Vec::with_capacity(counts.num_matchings as usize);
    for set in combinatorics::subsets(num_users, s + 1)? {
        let members = combinatorics::elements(set);
        let mut edges: Vec<Edge> = members
            .iter()
            .map(|&k| {
                let packet = colex_rank(set & !(1u64 << (k - 1))) as usize;
                Edge::new(packet, (k - 1) as usize)
            })
            .collect();
        edges.sort_unstable();
        matchings.push(edges);
        matching_labels.push(members);
    }
    let labels = Labels {
        packets: labels_of(num_users, s)?,
        users: (1..=num_users).map(|k| vec![k]).collect(),
        matchings: matching_labels,
    };
    RsGraph::new(
        counts.num_packets as usize,
        num_users as usize,
        matchings,
        Some(labels),
    )
}

/// A single way in which a graph fails to be Ruzsa-Szemerédi.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoMatchings,
    EmptyMatching {
        matching: usize,
    },
    /// The same edge occurs in two matchings (or twice in one).
    DuplicateEdge {
        packet: usize,
        user: usize,
        first_matching: usize,
        matching: usize,
    },
    SharedPacket {
        matching: usize,
        packet: usize,
    },
    SharedUser {
        matching: usize,
        user: usize,
    },
    /// `(packet, user)` is a graph edge joining two different edges of the
    /// same matching.
    NotInduced {
        matching: usize,
        packet: usize,
        user: usize,
    },
}

impl Violation {
    pub fn matching(&self) -> Option<usize> {
        match *self {
            Violation::NoMatchings => None,
            Violation::EmptyMatching { matching }
            | Violation::DuplicateEdge { matching, .. }
            | Violation::SharedPacket { matching, .. }
            | Violation::SharedUser { matching, .. }
            | Violation::NotInduced { matching, .. } => Some(matching),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NoMatchings => write!(f, "graph has no matchings"),
            Violation::EmptyMatching { matching } => write!(f, "matching {matching} is empty"),
            Violation::DuplicateEdge {
                packet,
                user,
                first_matching,
                matching,
            } => write!(
                f,
                "edge ({packet}, {user}) in matching {matching} already appears in matching {first_matching}"
            ),
            Violation::SharedPacket { matching, packet } => {
                write!(f, "matching {matching} uses packet {packet} twice")
            }
            Violation::SharedUser { matching, user } => {
                write!(f, "matching {matching} uses user {user} twice")
            }
            Violation::NotInduced {
                matching,
                packet,
                user,
            } => write!(
                f,
                "matching {matching} is not induced: edge ({packet}, {user}) joins two of its edges"
            ),
        }
    }
}

/// Parameters of a graph that passed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphSummary {
    pub num_packets: usize,
    pub num_users: usize,
    pub num_matchings: usize,
    pub num_edges: usize,
    pub avg_matching_size: Ratio<u64>,
    pub min_right_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub partition_ok: bool,
    pub matching_ok: bool,
    pub induced_ok: bool,
    pub violations: Vec<Violation>,
    pub summary: Option<GraphSummary>,
}

/// Checks the partition, matching and induced properties.
pub fn validate_rs(graph: &RsGraph) -> ValidationReport {
    let mut violations = Vec::new();
    if graph.matchings.is_empty() {
        violations.push(Violation::NoMatchings);
    }

    let mut first_seen: HashMap<(usize, usize), usize> =
        HashMap::with_capacity(graph.num_edge_slots());
    let mut partition_ok = true;
    let mut matching_ok = true;
    for (m, matching) in graph.matchings.iter().enumerate() {
        if matching.is_empty() {
            violations.push(Violation::EmptyMatching { matching: m });
        }
        let mut packets = HashSet::with_capacity(matching.len());
        let mut users = HashSet::with_capacity(matching.len());
        for e in matching {
            if let Some(&first) = first_seen.get(&(e.packet, e.user)) {
                partition_ok = false;
                violations.push(Violation::DuplicateEdge {
                    packet: e.packet,
                    user: e.user,
                    first_matching: first,
                    matching: m,
                });
            } else {
                first_seen.insert((e.packet, e.user), m);
            }
            if !packets.insert(e.packet) {
                matching_ok = false;
                violations.push(Violation::SharedPacket {
                    matching: m,
                    packet: e.packet,
                });
            }
            if !users.insert(e.user) {
                matching_ok = false;
                violations.push(Violation::SharedUser {
                    matching: m,
                    user: e.user,
                });
            }
        }
    }

    let mut induced_ok = true;
    for (m, matching) in graph.matchings.iter().enumerate() {
        for (i, x) in matching.iter().enumerate() {
            for (j, y) in matching.iter().enumerate() {
                if i == j || x.packet == y.packet || x.user == y.user {
                    continue;
                }
                if first_seen.contains_key(&(x.packet, y.user)) {
                    induced_ok = false;
                    violations.push(Violation::NotInduced {
                        matching: m,
                        packet: x.packet,
                        user: y.user,
                    });
                }
            }
        }
    }

    let valid = violations.is_empty();
    let summary = valid.then(|| {
        let num_edges = first_seen.len();
        let mut deg = vec![0usize; graph.num_users];
        for &(_, user) in first_seen.keys() {
            deg[user] += 1;
        }
        GraphSummary {
            num_packets: graph.num_packets,
            num_users: graph.num_users,
            num_matchings: graph.matchings.len(),
            num_edges,
            avg_matching_size: Ratio::new(num_edges as u64, graph.matchings.len() as u64),
            min_right_degree: deg.into_iter().min().unwrap_or(0),
        }
    });
    ValidationReport {
        valid,
        partition_ok,
        matching_ok,
        induced_ok,
        violations,
        summary,
    }
}

/// Rate, memory and size parameters of the scheme a valid graph induces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeParams {
    /// Normalized worst-case delivery rate `t / F`.
    pub rate: Ratio<u64>,
    /// `M / N = 1 - c / F`.
    pub memory_ratio: Ratio<u64>,
    pub min_right_degree: usize,
    pub avg_matching_size: Ratio<u64>,
    pub subpacketization: usize,
    pub num_users: usize,
    pub num_matchings: usize,
    pub num_edges: usize,
}

impl SchemeParams {
    pub fn rate_f64(&self) -> f64 {
        ratio_f64(self.rate)
    }

    pub fn memory_ratio_f64(&self) -> f64 {
        ratio_f64(self.memory_ratio)
    }
}

pub fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn scheme_params(graph: &RsGraph) -> Result<SchemeParams, GraphError> {
    let report = validate_rs(graph);
    let summary = report
        .summary
        .ok_or(GraphError::InvalidGraph(report.violations.len()))?;
    Ok(params_from_summary(&summary))
}

pub(crate) fn params_from_summary(s: &GraphSummary) -> SchemeParams {
    let f = s.num_packets as u64;
    SchemeParams {
        rate: Ratio::new(s.num_matchings as u64, f),
        memory_ratio: Ratio::new(f - s.min_right_degree as u64, f),
        min_right_degree: s.min_right_degree,
        avg_matching_size: s.avg_matching_size,
        subpacketization: s.num_packets,
        num_users: s.num_users,
        num_matchings: s.num_matchings,
        num_edges: s.num_edges,
    }
}
