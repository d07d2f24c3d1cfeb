//! Network model: MATPOWER-style case ingestion, zero-injection detection and
//! bus connectivity structures.
//!
//! Buses keep their external numbers (`BusId`) while every internal structure
//! is indexed by the bus position in the case's bus table.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// External (case-file) bus number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BusId(pub usize);

impl std::fmt::Display for BusId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

impl BusKind {
    fn code(self) -> u8 {
        match self {
            BusKind::Pq => 1,
            BusKind::Pv => 2,
            BusKind::Slack => 3,
        }
    }
}

/// Aggregated in-service generation at a bus (case units: MW / MVAr).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub pg: f64,
    pub qg: f64,
    pub qmax: f64,
    pub qmin: f64,
    pub vg: f64,
}

/// A bus row. Power quantities are stored in case units (MW, MVAr); the
/// per-unit accessors on [`Network`] divide by the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    pub pd: f64,
    pub qd: f64,
    pub gs: f64,
    pub bs: f64,
    pub vm: f64,
    pub va: f64,
    pub base_kv: f64,
    pub vmax: f64,
    pub vmin: f64,
    pub generator: Option<Generator>,
    pub is_zib: bool,
}

impl Bus {
    fn has_zero_injection(&self) -> bool {
        self.pd == 0.0 && self.qd == 0.0 && self.generator.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchStatus {
    InService,
    Outaged,
}

/// Series branch in the standard pi model. `ratio == 0` means a plain line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: usize,
    pub from: BusId,
    pub to: BusId,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    pub ratio: f64,
    pub angle: f64,
    pub status: BranchStatus,
}

impl Branch {
    pub fn in_service(&self) -> bool {
        self.status == BranchStatus::InService
    }

    /// Impedance magnitude `sqrt(r^2 + x^2)`.
    pub fn impedance(&self) -> f64 {
        self.r.hypot(self.x)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    #[serde(skip)]
    index: HashMap<BusId, usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.base_mva == other.base_mva && self.buses == other.buses && self.branches == other.branches
    }
}

impl Network {
    /// Builds a validated network. ZIB flags are recomputed from injections.
    pub fn new(base_mva: f64, buses: Vec<Bus>, branches: Vec<Branch>) -> Result<Self> {
        let mut net = Self::assemble(base_mva, buses, branches, 0)?;
        for bus in &mut net.buses {
            bus.is_zib = bus.has_zero_injection();
        }
        Ok(net)
    }

    fn assemble(base_mva: f64, buses: Vec<Bus>, branches: Vec<Branch>, line: usize) -> Result<Self> {
        if !(base_mva > 0.0) {
            return Err(Error::parse(line, "baseMVA must be positive"));
        }
        if buses.is_empty() {
            return Err(Error::parse(line, "bus table is empty"));
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (i, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, i).is_some() {
                return Err(Error::parse(line, format!("duplicate bus {}", bus.id)));
            }
        }
        let slacks = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks == 0 {
            return Err(Error::parse(line, "missing slack bus"));
        }
        if slacks > 1 {
            return Err(Error::parse(line, format!("{slacks} slack buses, expected exactly one")));
        }
        for (k, br) in branches.iter().enumerate() {
            if br.id != k {
                return Err(Error::parse(line, format!("branch {k} carries id {}", br.id)));
            }
            for end in [br.from, br.to] {
                if !index.contains_key(&end) {
                    return Err(Error::parse(line, format!("branch {k} references absent bus {end}")));
                }
            }
            if br.from == br.to {
                return Err(Error::parse(line, format!("branch {k} is a self loop at bus {}", br.from)));
            }
            if br.x == 0.0 {
                return Err(Error::parse(line, format!("branch {k} has zero reactance")));
            }
        }
        let net = Self { base_mva, buses, branches, index };
        if !net.is_connected_without(None) {
            return Err(Error::parse(line, "network graph is disconnected over in-service branches"));
        }
        Ok(net)
    }

    /// Replaces the automatically detected zero-injection set.
    pub fn with_zib_override(mut self, zibs: &[BusId]) -> Result<Self> {
        let mut wanted = vec![false; self.buses.len()];
        for id in zibs {
            let i = self.index_of(*id)?;
            if !self.buses[i].has_zero_injection() {
                return Err(Error::Invalid(format!("bus {id} has load or generation and cannot be a ZIB")));
            }
            wanted[i] = true;
        }
        for (bus, z) in self.buses.iter_mut().zip(wanted) {
            bus.is_zib = z;
        }
        Ok(self)
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn index_of(&self, id: BusId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownBus(id.0))
    }

    pub fn bus_id(&self, index: usize) -> BusId {
        self.buses[index].id
    }

    pub fn branch(&self, k: usize) -> Result<&Branch> {
        self.branches.get(k).ok_or(Error::UnknownBranch(k))
    }

    /// Internal endpoints of a branch.
    pub fn endpoints(&self, k: usize) -> (usize, usize) {
        let br = &self.branches[k];
        (self.index[&br.from], self.index[&br.to])
    }

    pub fn in_service_branches(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.in_service())
    }

    pub fn slack_index(&self) -> usize {
        self.buses.iter().position(|b| b.kind == BusKind::Slack).expect("validated")
    }

    pub fn load_p(&self, i: usize) -> f64 {
        self.buses[i].pd / self.base_mva
    }

    pub fn load_q(&self, i: usize) -> f64 {
        self.buses[i].qd / self.base_mva
    }

    pub fn gen_p(&self, i: usize) -> f64 {
        self.buses[i].generator.as_ref().map_or(0.0, |g| g.pg / self.base_mva)
    }

    pub fn gen_q(&self, i: usize) -> f64 {
        self.buses[i].generator.as_ref().map_or(0.0, |g| g.qg / self.base_mva)
    }

    /// Regulated voltage magnitude for slack/PV buses, initial magnitude otherwise.
    pub fn voltage_setpoint(&self, i: usize) -> f64 {
        let bus = &self.buses[i];
        match (&bus.generator, bus.kind) {
            (Some(g), BusKind::Slack | BusKind::Pv) => g.vg,
            _ => bus.vm,
        }
    }

    /// Buses carrying demand and no active-power generation (PQ buses and
    /// synchronous-condenser buses), excluding the slack. These are the
    /// candidates for reactive loadability sweeps.
    pub fn load_buses(&self) -> Vec<usize> {
        self.buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind != BusKind::Slack)
            .filter(|(_, b)| b.pd != 0.0 || b.qd != 0.0)
            .filter(|(_, b)| b.generator.as_ref().is_none_or(|g| g.pg == 0.0))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of in-service branches incident to each bus (parallel lines counted).
    pub fn branch_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.buses.len()];
        for k in 0..self.branches.len() {
            if self.branches[k].in_service() {
                let (f, t) = self.endpoints(k);
                deg[f] += 1;
                deg[t] += 1;
            }
        }
        deg
    }

    /// In-service branch ids incident to bus `i`.
    pub fn incident_branches(&self, i: usize) -> Vec<usize> {
        (0..self.branches.len())
            .filter(|&k| {
                let (f, t) = self.endpoints(k);
                self.branches[k].in_service() && (f == i || t == i)
            })
            .collect()
    }

    fn is_connected_without(&self, skip: Option<usize>) -> bool {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for k in 0..self.branches.len() {
            if Some(k) == skip || !self.branches[k].in_service() {
                continue;
            }
            let (f, t) = self.endpoints(k);
            adj[f].push(t);
            adj[t].push(f);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Whether taking branch `k` out of service splits the network.
    pub fn is_islanding_outage(&self, k: usize) -> bool {
        !self.is_connected_without(Some(k))
    }

    /// Serializes the model back to MATPOWER case text.
    pub fn to_case_text(&self) -> String {
        let mut out = String::new();
        out.push_str("function mpc = exported_case\n");
        out.push_str("mpc.version = '2';\n");
        let _ = writeln!(out, "mpc.baseMVA = {};", self.base_mva);
        out.push_str(
            "\n%% bus data\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n",
        );
        for b in &self.buses {
            let _ = writeln!(
                out,
                "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t{}\t{}\t1\t{}\t{};",
                b.id,
                b.kind.code(),
                b.pd,
                b.qd,
                b.gs,
                b.bs,
                b.vm,
                b.va,
                b.base_kv,
                b.vmax,
                b.vmin
            );
        }
        out.push_str("];\n\n%% generator data\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\nmpc.gen = [\n");
        for b in &self.buses {
            if let Some(g) = &b.generator {
                let _ = writeln!(
                    out,
                    "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t1;",
                    b.id, g.pg, g.qg, g.qmax, g.qmin, g.vg, self.base_mva
                );
            }
        }
        out.push_str(
            "];\n\n%% branch data\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\nmpc.branch = [\n",
        );
        for br in &self.branches {
            let status = u8::from(br.in_service());
            let _ = writeln!(
                out,
                "\t{}\t{}\t{}\t{}\t{}\t0\t0\t0\t{}\t{}\t{};",
                br.from, br.to, br.r, br.x, br.b, br.ratio, br.angle, status
            );
        }
        out.push_str("];\n");
        out
    }
}

/// Parses MATPOWER-style case text (`mpc.baseMVA`, `mpc.bus`, `mpc.gen`,
/// `mpc.branch`). Other blocks are skipped.
/// Header line and `(line, values)` rows of one `mpc.<name>` matrix.
type Table = (usize, Vec<(usize, Vec<f64>)>);

pub fn parse_case(text: &str) -> Result<Network> {
    let mut base_mva = None;
    let mut tables: HashMap<String, Table> = HashMap::new();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));

    while let Some((lineno, line)) = lines.next() {
        let trimmed = line.trim();
        let Some(rest) = trimmed.strip_prefix("mpc.") else { continue };
        let Some((name, value)) = rest.split_once('=') else { continue };
        let name = name.trim().to_string();
        let value = value.trim();
        if name == "baseMVA" {
            let v = value.trim_end_matches(';').trim();
            let v: f64 = v.parse().map_err(|_| Error::parse(lineno, format!("bad baseMVA value `{v}`")))?;
            base_mva = Some(v);
            continue;
        }
        let Some(body) = value.strip_prefix('[') else { continue };
        let mut rows = Vec::new();
        let mut pending: Vec<f64> = Vec::new();
        let mut pending_line = lineno;
        let mut chunk = body.to_string();
        let mut chunk_line = lineno;
        let mut closed = false;
        loop {
            let (content, done) = match chunk.find(']') {
                Some(pos) => (&chunk[..pos], true),
                None => (chunk.as_str(), false),
            };
            for (seg_idx, segment) in content.split(';').enumerate() {
                if seg_idx > 0 && !pending.is_empty() {
                    rows.push((pending_line, std::mem::take(&mut pending)));
                }
                for tok in segment.split(|c: char| c.is_whitespace() || c == ',') {
                    if tok.is_empty() {
                        continue;
                    }
                    let v = parse_number(tok)
                        .ok_or_else(|| Error::parse(chunk_line, format!("non-numeric entry `{tok}` in mpc.{name}")))?;
                    if pending.is_empty() {
                        pending_line = chunk_line;
                    }
                    pending.push(v);
                }
            }
            // a newline also terminates a row
            if !pending.is_empty() {
                rows.push((pending_line, std::mem::take(&mut pending)));
            }
            if done {
                closed = true;
                break;
            }
            match lines.next() {
                Some((l, next)) => {
                    chunk = next;
                    chunk_line = l;
                }
                None => break,
            }
        }
        if !closed {
            return Err(Error::parse(lineno, format!("unterminated matrix mpc.{name}")));
        }
        tables.insert(name, (lineno, rows));
    }

    let base_mva = base_mva.ok_or_else(|| Error::parse(1, "missing mpc.baseMVA"))?;
    let (bus_line, bus_rows) = tables.remove("bus").ok_or_else(|| Error::parse(1, "missing mpc.bus table"))?;
    let (_, branch_rows) = tables.remove("branch").unwrap_or((bus_line, Vec::new()));
    let (_, gen_rows) = tables.remove("gen").unwrap_or((bus_line, Vec::new()));

    let mut buses = Vec::with_capacity(bus_rows.len());
    for (line, row) in &bus_rows {
        require_cols(*line, row, 13, "bus")?;
        let kind = match row[1] as i64 {
            1 => BusKind::Pq,
            2 => BusKind::Pv,
            3 => BusKind::Slack,
            t => return Err(Error::parse(*line, format!("unsupported bus type {t}"))),
        };
        buses.push(Bus {
            id: BusId(as_bus_number(*line, row[0])?),
            kind,
            pd: row[2],
            qd: row[3],
            gs: row[4],
            bs: row[5],
            vm: row[7],
            va: row[8],
            base_kv: row[9],
            vmax: row[11],
            vmin: row[12],
            generator: None,
            is_zib: false,
        });
    }
    let positions: HashMap<BusId, usize> = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();

    for (line, row) in &gen_rows {
        require_cols(*line, row, 8, "gen")?;
        if row[7] <= 0.0 {
            continue;
        }
        let id = BusId(as_bus_number(*line, row[0])?);
        let &i =
            positions.get(&id).ok_or_else(|| Error::parse(*line, format!("generator references absent bus {id}")))?;
        let g = buses[i].generator.get_or_insert(Generator { pg: 0.0, qg: 0.0, qmax: 0.0, qmin: 0.0, vg: row[5] });
        g.pg += row[1];
        g.qg += row[2];
        g.qmax += row[3];
        g.qmin += row[4];
    }

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (line, row) in &branch_rows {
        require_cols(*line, row, 11, "branch")?;
        let from = BusId(as_bus_number(*line, row[0])?);
        let to = BusId(as_bus_number(*line, row[1])?);
        for end in [from, to] {
            if !positions.contains_key(&end) {
                return Err(Error::parse(*line, format!("branch references absent bus {end}")));
            }
        }
        if from == to {
            return Err(Error::parse(*line, format!("branch {from}-{to} is a self loop")));
        }
        if row[3] == 0.0 {
            return Err(Error::parse(*line, format!("branch {from}-{to} has zero reactance")));
        }
        branches.push(Branch {
            id: branches.len(),
            from,
            to,
            r: row[2],
            x: row[3],
            b: row[4],
            ratio: row[8],
            angle: row[9],
            status: if row[10] > 0.0 { BranchStatus::InService } else { BranchStatus::Outaged },
        });
    }

    let mut net = Network::assemble(base_mva, buses, branches, bus_line)?;
    for bus in &mut net.buses {
        bus.is_zib = bus.has_zero_injection();
    }
    Ok(net)
}

fn strip_comment(line: &str) -> String {
    match line.find('%') {
        Some(pos) => line[..pos].to_string(),
        None => line.to_string(),
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn require_cols(line: usize, row: &[f64], min: usize, table: &str) -> Result<()> {
    if row.len() < min {
        return Err(Error::parse(line, format!("{table} row has {} columns, expected at least {min}", row.len())));
    }
    Ok(())
}

fn as_bus_number(line: usize, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::parse(line, format!("invalid bus number {v}")))
    }
}

/// Zero-injection buses: no demand and no in-service generator attached.
/// Shunt elements do not count as injections.
pub fn detect_zibs(net: &Network) -> BTreeSet<BusId> {
    net.buses.iter().filter(|b| b.has_zero_injection()).map(|b| b.id).collect()
}

/// Closed-neighbourhood adjacency `a_ij` over in-service branches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectivityMatrix {
    rows: Vec<FixedBitSet>,
}

impl ConnectivityMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].contains(j)
    }

    /// Closed neighbourhood of bus `i` as a bit set over internal indices.
    pub fn row(&self, i: usize) -> &FixedBitSet {
        &self.rows[i]
    }

    /// Row sum, i.e. number of distinct neighbours plus one.
    pub fn row_sum(&self, i: usize) -> usize {
        self.rows[i].count_ones(..)
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let n = self.rows.len();
        self.rows.iter().map(|r| (0..n).map(|j| u8::from(r.contains(j))).collect()).collect()
    }

    pub(crate) fn rows(&self) -> &[FixedBitSet] {
        &self.rows
    }
}

fn build_connectivity(net: &Network, skip: Option<usize>) -> ConnectivityMatrix {
    let n = net.bus_count();
    let mut rows: Vec<FixedBitSet> = (0..n)
        .map(|i| {
            let mut r = FixedBitSet::with_capacity(n);
            r.insert(i);
            r
        })
        .collect();
    for k in 0..net.branches.len() {
        if Some(k) == skip || !net.branches[k].in_service() {
            continue;
        }
        let (f, t) = net.endpoints(k);
        rows[f].insert(t);
        rows[t].insert(f);
    }
    ConnectivityMatrix { rows }
}

pub fn connectivity(net: &Network) -> ConnectivityMatrix {
    build_connectivity(net, None)
}

/// Connectivity with branch `k` out of service. Entries survive when a
/// parallel in-service branch joins the same pair.
pub fn contingency_connectivity(net: &Network, k: usize) -> Result<ConnectivityMatrix> {
    let br = net.branch(k)?;
    if !br.in_service() {
        return Err(Error::Invalid(format!("branch {k} is already out of service")));
    }
    Ok(build_connectivity(net, Some(k)))
}

/// Largest number of in-service branches at any bus.
pub fn max_branch_degree(net: &Network) -> usize {
    net.branch_degrees().into_iter().max().unwrap_or(0)
}
