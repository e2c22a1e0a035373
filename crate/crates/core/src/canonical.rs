//! Exact canonical certificates for small rooted, optionally featured
//! digraphs.
//!
//! The labeling is computed in three stages:
//!
//! 1. **Twin reduction.** Vertices with identical colors and identical open
//!    (false twins) or closed (true twins) neighborhoods are interchangeable;
//!    each twin class is collapsed to one vertex whose color records the twin
//!    kind and the class size.
//! 2. **Individualization–refinement** on the reduced graph: color
//!    refinement to an equitable ordered partition, then a depth-first search
//!    over individualizations of the first smallest non-singleton cell,
//!    keeping the lexicographically smallest leaf certificate. Automorphisms
//!    found at equal leaves prune the search (orbit pruning below every node,
//!    and a backjump whenever a leaf matches the first leaf). A node whose
//!    partition is homogeneous between every pair of cells is treated as a
//!    leaf, since every discretization of it yields the same certificate.
//! 3. **Expansion** of the reduced labeling back to the original vertices.
//!
//! The search is exponential in the worst case and is bounded by a node
//! budget; exceeding it is reported as [`Error::Timeout`], never as a wrong
//! answer.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sampler::BallUnion;

/// Version byte leading every certificate.
pub const CERTIFICATE_VERSION: u8 = 1;
pub const DEFAULT_SIZE_CAP: usize = 256;
pub const DEFAULT_NODE_BUDGET: usize = 200_000;
pub const DEFAULT_FEATURE_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootMode {
    /// Ball root `i` must map to ball root `i`.
    OrderedRoots,
    /// Roots carry no information.
    Unrooted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonOptions {
    pub root_mode: RootMode,
    /// Quantization step for vertex features; features are ignored when the
    /// input has none.
    pub feature_step: f64,
    pub size_cap: usize,
    pub node_budget: usize,
}

impl Default for CanonOptions {
    fn default() -> Self {
        CanonOptions {
            root_mode: RootMode::OrderedRoots,
            feature_step: DEFAULT_FEATURE_STEP,
            size_cap: DEFAULT_SIZE_CAP,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

impl CanonOptions {
    pub fn unrooted() -> Self {
        CanonOptions {
            root_mode: RootMode::Unrooted,
            ..Default::default()
        }
    }
}

/// Isomorphism-class certificate. Equality and ordering compare the full
/// certificate; hashing uses the 128-bit digest.
#[derive(Debug, Clone)]
pub struct CanonicalCode {
    certificate: Vec<u8>,
    digest: u128,
}

impl CanonicalCode {
    fn from_certificate(certificate: Vec<u8>) -> Self {
        let hash = Sha256::digest(&certificate);
        let mut first = [0u8; 16];
        first.copy_from_slice(&hash[..16]);
        CanonicalCode {
            certificate,
            digest: u128::from_be_bytes(first),
        }
    }

    pub fn certificate(&self) -> &[u8] {
        &self.certificate
    }

    pub fn digest(&self) -> u128 {
        self.digest
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.certificate)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let bytes = hex::decode(s)
            .map_err(|e| Error::InvalidArgument(format!("bad certificate hex: {e}")))?;
        let code = Self::from_certificate(bytes);
        code.header()?;
        Ok(code)
    }

    fn header(&self) -> Result<(RootMode, u32, u64)> {
        let c = &self.certificate;
        if c.len() < 22 || c[0] != CERTIFICATE_VERSION {
            return Err(Error::InvalidArgument("unsupported certificate".into()));
        }
        let mode = match c[1] {
            0 => RootMode::OrderedRoots,
            1 => RootMode::Unrooted,
            _ => return Err(Error::InvalidArgument("unknown root mode".into())),
        };
        let m = u32::from_le_bytes(c[2..6].try_into().unwrap());
        let step = u64::from_le_bytes(c[14..22].try_into().unwrap());
        Ok((mode, m, step))
    }

    pub fn root_mode(&self) -> RootMode {
        self.header().expect("valid certificate").0
    }

    /// Number of vertices of the certified graph.
    pub fn vertex_count(&self) -> usize {
        self.header().expect("valid certificate").1 as usize
    }

    /// Feature quantization step, when the graph carried features.
    pub fn feature_step(&self) -> Option<f64> {
        let bits = self.header().expect("valid certificate").2;
        (bits != 0).then(|| f64::from_bits(bits))
    }
}

impl PartialEq for CanonicalCode {
    fn eq(&self, other: &Self) -> bool {
        self.digest == other.digest && self.certificate == other.certificate
    }
}

impl Eq for CanonicalCode {}

impl Hash for CanonicalCode {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.digest.hash(state);
    }
}

impl PartialOrd for CanonicalCode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CanonicalCode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.certificate.cmp(&other.certificate)
    }
}

/// Whether two codes certify isomorphic graphs. Codes built under different
/// root modes or feature steps are not comparable.
pub fn isomorphic(a: &CanonicalCode, b: &CanonicalCode) -> Result<bool> {
    let (ma, _, qa) = a.header()?;
    let (mb, _, qb) = b.header()?;
    if ma != mb {
        return Err(Error::InvalidArgument("root modes differ".into()));
    }
    if qa != 0 && qb != 0 && qa != qb {
        return Err(Error::InvalidArgument("feature steps differ".into()));
    }
    Ok(a == b)
}

fn bucket_count(step: f64) -> u32 {
    ((1.0 / step).ceil() as u32).max(1)
}

/// Grid cell index of a feature value in `[0, 1]`.
pub fn quantize(x: f64, step: f64) -> u32 {
    let top = bucket_count(step) - 1;
    ((x / step).floor().max(0.0) as u32).min(top)
}

/// Canonical certificate of a whole union.
pub fn canonicalize(u: &BallUnion, opts: &CanonOptions) -> Result<CanonicalCode> {
    let all: Vec<usize> = (0..u.m()).collect();
    canonicalize_subset(u, &all, opts)
}

/// Canonical certificate of the subgraph induced by `members` (for example
/// one weakly connected component). Ball roots outside `members` are
/// recorded as absent.
pub fn canonicalize_subset(
    u: &BallUnion,
    members: &[usize],
    opts: &CanonOptions,
) -> Result<CanonicalCode> {
    let m = members.len();
    if m > opts.size_cap {
        return Err(Error::TooLarge {
            size: m,
            cap: opts.size_cap,
        });
    }
    let local: HashMap<usize, usize> = members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let out: Vec<Vec<usize>> = members
        .iter()
        .map(|&x| {
            members
                .iter()
                .enumerate()
                .filter(|&(_, &y)| u.has_edge(x, y))
                .map(|(j, _)| j)
                .collect()
        })
        .collect();

    let roots: Vec<Option<usize>> = match opts.root_mode {
        RootMode::OrderedRoots => u
            .root_locals()
            .into_iter()
            .map(|r| local.get(&r).copied())
            .collect(),
        RootMode::Unrooted => Vec::new(),
    };
    let step = opts.feature_step;
    let fdim = u.feature_dim().unwrap_or(0);
    let buckets: Vec<Vec<u32>> = members
        .iter()
        .map(|&v| match u.feature_row(v) {
            Some(row) => row.iter().map(|&x| quantize(x, step)).collect(),
            None => Vec::new(),
        })
        .collect();

    let mut keys: Vec<(Vec<u32>, Vec<u32>)> =
        buckets.iter().map(|b| (Vec::new(), b.clone())).collect();
    for (ball, r) in roots.iter().enumerate() {
        if let Some(r) = r {
            keys[*r].0.push(ball as u32);
        }
    }
    let colors = rank(&keys);
    let order = canonical_order(&out, &colors, opts.node_budget)?;

    let mut pos = vec![0usize; m];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut cert = Vec::with_capacity(22 + 4 * roots.len() + 2 * m * fdim + (m * m).div_ceil(8));
    cert.push(CERTIFICATE_VERSION);
    cert.push(match opts.root_mode {
        RootMode::OrderedRoots => 0,
        RootMode::Unrooted => 1,
    });
    cert.extend_from_slice(&(m as u32).to_le_bytes());
    cert.extend_from_slice(&(roots.len() as u32).to_le_bytes());
    cert.extend_from_slice(&(fdim as u32).to_le_bytes());
    let step_bits = if fdim > 0 { step.to_bits() } else { 0 };
    cert.extend_from_slice(&step_bits.to_le_bytes());
    for r in &roots {
        let p = r.map_or(u32::MAX, |r| pos[r] as u32);
        cert.extend_from_slice(&p.to_le_bytes());
    }
    for &v in &order {
        for &b in &buckets[v] {
            cert.extend_from_slice(&(b as u16).to_le_bytes());
        }
    }
    let mut bits = vec![0u8; (m * m).div_ceil(8)];
    for (i, &v) in order.iter().enumerate() {
        for &w in &out[v] {
            let idx = i * m + pos[w];
            bits[idx / 8] |= 1 << (idx % 8);
        }
    }
    cert.extend_from_slice(&bits);
    Ok(CanonicalCode::from_certificate(cert))
}

/// Dense ranks of ordered keys.
fn rank<K: Ord + Clone>(keys: &[K]) -> Vec<u32> {
    let mut sorted: Vec<K> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap() as u32)
        .collect()
}

/// Canonical vertex order (position -> vertex) of a vertex-colored digraph
/// given by out-neighbor lists. Colors are compared by value.
pub fn canonical_order(
    out: &[Vec<usize>],
    colors: &[u32],
    node_budget: usize,
) -> Result<Vec<usize>> {
    let n = out.len();
    let mut inn: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, nb) in out.iter().enumerate() {
        for &v in nb {
            inn[v].push(u);
        }
    }
    let mut out_sorted: Vec<Vec<usize>> = out.to_vec();
    for l in out_sorted.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }

    // Twin classes: false twins first, then true twins among the rest.
    let mut class_of = vec![usize::MAX; n];
    let mut classes: Vec<(u8, Vec<usize>)> = Vec::new();
    let group =
        |kind: u8, closed: bool, class_of: &mut Vec<usize>, classes: &mut Vec<(u8, Vec<usize>)>| {
            let mut by_key: HashMap<(u32, Vec<usize>, Vec<usize>), Vec<usize>> = HashMap::new();
            for v in 0..n {
                if class_of[v] != usize::MAX {
                    continue;
                }
                let mut o = out_sorted[v].clone();
                let mut i = inn[v].clone();
                if closed {
                    o.push(v);
                    i.push(v);
                    o.sort_unstable();
                }
                i.sort_unstable();
                by_key.entry((colors[v], o, i)).or_default().push(v);
            }
            let mut found: Vec<Vec<usize>> = by_key.into_values().filter(|c| c.len() > 1).collect();
            found.sort();
            for c in found {
                for &v in &c {
                    class_of[v] = classes.len();
                }
                classes.push((kind, c));
            }
        };
    group(1, false, &mut class_of, &mut classes);
    group(2, true, &mut class_of, &mut classes);
    for v in 0..n {
        if class_of[v] == usize::MAX {
            class_of[v] = classes.len();
            classes.push((0, vec![v]));
        }
    }
    classes.sort_by_key(|(_, c)| c[0]);
    for (i, (_, c)) in classes.iter().enumerate() {
        for &v in c {
            class_of[v] = i;
        }
    }

    let reps: Vec<usize> = classes.iter().map(|(_, c)| c[0]).collect();
    let qout: Vec<Vec<u32>> = reps
        .iter()
        .map(|&r| {
            let mut l: Vec<u32> = out_sorted[r]
                .iter()
                .map(|&w| class_of[w])
                .filter(|&c| c != class_of[r])
                .map(|c| c as u32)
                .collect();
            l.sort_unstable();
            l.dedup();
            l
        })
        .collect();
    let qkeys: Vec<(u32, u8, usize)> = classes
        .iter()
        .map(|(kind, c)| (colors[c[0]], *kind, c.len()))
        .collect();
    let qcolors = rank(&qkeys);

    let reduced = Reduced::new(qout, &qcolors);
    let lab = reduced.canonical_lab(node_budget)?;
    Ok(lab
        .iter()
        .flat_map(|&c| classes[c as usize].1.iter().copied())
        .collect())
}

/// Reduced digraph in the form the search works on.
struct Reduced {
    n: usize,
    out: Vec<Vec<u32>>,
    inn: Vec<Vec<u32>>,
    symmetric: bool,
    words: usize,
    adj: Vec<u64>,
    initial: Partition,
}

#[derive(Clone)]
struct Partition {
    lab: Vec<u32>,
    /// Start position of each vertex's cell.
    cell: Vec<u32>,
    /// Cell length, valid at cell start positions.
    len: Vec<u32>,
}

impl Partition {
    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut s = 0;
        std::iter::from_fn(move || {
            if s >= self.lab.len() {
                return None;
            }
            let l = self.len[s] as usize;
            let out = (s, l);
            s += l;
            Some(out)
        })
    }

    fn is_discrete(&self) -> bool {
        self.cells().all(|(_, l)| l == 1)
    }

    /// Move `v` to the front of its cell and split it off.
    fn individualize(&mut self, v: u32) {
        let s = self.cell[v as usize] as usize;
        let l = self.len[s] as usize;
        if l == 1 {
            return;
        }
        let p = self.lab[s..s + l].iter().position(|&x| x == v).unwrap();
        self.lab.swap(s, s + p);
        self.len[s] = 1;
        self.len[s + 1] = (l - 1) as u32;
        for &x in &self.lab[s + 1..s + l] {
            self.cell[x as usize] = (s + 1) as u32;
        }
    }
}

impl Reduced {
    fn new(out: Vec<Vec<u32>>, colors: &[u32]) -> Self {
        let n = out.len();
        let mut inn: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, nb) in out.iter().enumerate() {
            for &v in nb {
                inn[v as usize].push(u as u32);
            }
        }
        let symmetric = out == inn;
        let words = n.div_ceil(64).max(1);
        let mut adj = vec![0u64; n * words];
        for (u, nb) in out.iter().enumerate() {
            for &v in nb {
                adj[u * words + v as usize / 64] |= 1 << (v % 64);
            }
        }
        let mut lab: Vec<u32> = (0..n as u32).collect();
        lab.sort_by_key(|&v| (colors[v as usize], v));
        let mut cell = vec![0u32; n];
        let mut len = vec![0u32; n];
        let mut s = 0;
        while s < n {
            let mut e = s + 1;
            while e < n && colors[lab[e] as usize] == colors[lab[s] as usize] {
                e += 1;
            }
            for &v in &lab[s..e] {
                cell[v as usize] = s as u32;
            }
            len[s] = (e - s) as u32;
            s = e;
        }
        Reduced {
            n,
            out,
            inn,
            symmetric,
            words,
            adj,
            initial: Partition { lab, cell, len },
        }
    }

    #[inline]
    fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize * self.words + v as usize / 64] >> (v % 64) & 1 == 1
    }

    fn signature(&self, p: &Partition, v: u32, buf: &mut Vec<u32>) {
        buf.clear();
        let start = buf.len();
        buf.extend(self.out[v as usize].iter().map(|&w| p.cell[w as usize]));
        buf[start..].sort_unstable();
        if !self.symmetric {
            buf.push(u32::MAX);
            let mid = buf.len();
            buf.extend(self.inn[v as usize].iter().map(|&w| p.cell[w as usize]));
            buf[mid..].sort_unstable();
        }
    }

    /// Refine to an equitable partition. Cells are split in place, in order
    /// of position, by sorted neighbor-cell signatures; every step depends
    /// only on positions, so the result is isomorphism invariant.
    fn refine(&self, p: &mut Partition) {
        let mut buf = Vec::new();
        loop {
            let mut changed = false;
            let mut s = 0;
            while s < self.n {
                let l = p.len[s] as usize;
                if l > 1 {
                    let mut sigs: Vec<(Vec<u32>, u32)> = p.lab[s..s + l]
                        .iter()
                        .map(|&v| {
                            self.signature(p, v, &mut buf);
                            (buf.clone(), v)
                        })
                        .collect();
                    sigs.sort();
                    if sigs[0].0 != sigs[l - 1].0 {
                        changed = true;
                        let mut start = s;
                        for (i, (sig, v)) in sigs.iter().enumerate() {
                            if i > 0 && *sig != sigs[i - 1].0 {
                                p.len[start] = (s + i - start) as u32;
                                start = s + i;
                            }
                            p.lab[s + i] = *v;
                            p.cell[*v as usize] = start as u32;
                        }
                        p.len[start] = (s + l - start) as u32;
                    }
                }
                s += l;
            }
            if !changed {
                break;
            }
        }
    }

    /// Whether every non-singleton cell is homogeneous towards every cell
    /// (all or nothing, in both directions). Then every permutation inside
    /// cells is an automorphism. Requires an equitable partition.
    fn is_homogeneous(&self, p: &Partition) -> bool {
        let mut cnt_out = vec![0u32; self.n];
        let mut cnt_in = vec![0u32; self.n];
        for (s, l) in p.cells() {
            if l == 1 {
                continue;
            }
            let x = p.lab[s] as usize;
            for &w in &self.out[x] {
                cnt_out[p.cell[w as usize] as usize] += 1;
            }
            for &w in &self.inn[x] {
                cnt_in[p.cell[w as usize] as usize] += 1;
            }
            let mut ok = true;
            for (t, tl) in p.cells() {
                let full = if t == s { tl as u32 - 1 } else { tl as u32 };
                for c in [cnt_out[t], cnt_in[t]] {
                    if c != 0 && c != full {
                        ok = false;
                    }
                }
            }
            for &w in self.out[x].iter().chain(&self.inn[x]) {
                let c = p.cell[w as usize] as usize;
                cnt_out[c] = 0;
                cnt_in[c] = 0;
            }
            if !ok {
                return false;
            }
        }
        true
    }

    fn certificate(&self, lab: &[u32]) -> Vec<u64> {
        let n = self.n;
        let mut cert = vec![0u64; (n * n).div_ceil(64)];
        for (i, &u) in lab.iter().enumerate() {
            for (j, &v) in lab.iter().enumerate() {
                if self.has_edge(u, v) {
                    let idx = i * n + j;
                    cert[idx / 64] |= 1 << (63 - idx % 64);
                }
            }
        }
        cert
    }

    fn canonical_lab(&self, node_budget: usize) -> Result<Vec<u32>> {
        let mut p = self.initial.clone();
        self.refine(&mut p);
        let mut search = Search {
            g: self,
            first: None,
            best: None,
            first_path: Vec::new(),
            autos: Vec::new(),
            nodes: 0,
            budget: node_budget,
        };
        let mut path = Vec::new();
        search.descend(p, &mut path)?;
        Ok(search.best.expect("search reaches a leaf").1)
    }
}

struct Search<'a> {
    g: &'a Reduced,
    first: Option<(Vec<u64>, Vec<u32>)>,
    best: Option<(Vec<u64>, Vec<u32>)>,
    first_path: Vec<u32>,
    autos: Vec<Vec<u32>>,
    nodes: usize,
    budget: usize,
}

impl Search<'_> {
    /// Returns `Some(level)` to abandon the search up to the node at depth
    /// `level` on the first path.
    fn descend(&mut self, p: Partition, path: &mut Vec<u32>) -> Result<Option<usize>> {
        if p.is_discrete() || self.g.is_homogeneous(&p) {
            return Ok(self.leaf(p.lab, path));
        }
        let depth = path.len();
        let (s, l) = p
            .cells()
            .filter(|&(_, l)| l > 1)
            .min_by_key(|&(s, l)| (l, s))
            .expect("non-discrete partition");
        let mut candidates: Vec<u32> = p.lab[s..s + l].to_vec();
        candidates.sort_unstable();
        let mut explored: Vec<u32> = Vec::new();
        for v in candidates {
            if !explored.is_empty() && self.same_orbit(path, v, &explored) {
                continue;
            }
            explored.push(v);
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::Timeout {
                    budget: self.budget,
                    seed: None,
                    stream: None,
                });
            }
            let mut child = p.clone();
            child.individualize(v);
            self.g.refine(&mut child);
            path.push(v);
            let jump = self.descend(child, path)?;
            path.pop();
            if let Some(level) = jump {
                if level < depth {
                    return Ok(Some(level));
                }
            }
        }
        Ok(None)
    }

    fn leaf(&mut self, lab: Vec<u32>, path: &[u32]) -> Option<usize> {
        let cert = self.g.certificate(&lab);
        let Some((first_cert, first_lab)) = &self.first else {
            self.first = Some((cert.clone(), lab.clone()));
            self.best = Some((cert, lab));
            self.first_path = path.to_vec();
            return None;
        };
        if cert == *first_cert {
            let gamma = self.automorphism(&lab, first_lab);
            self.autos.push(gamma);
            let level = path
                .iter()
                .zip(&self.first_path)
                .position(|(a, b)| a != b)
                .unwrap_or(path.len().min(self.first_path.len()));
            return Some(level);
        }
        let best = self.best.as_ref().expect("best set with first");
        match cert.cmp(&best.0) {
            std::cmp::Ordering::Equal => {
                let gamma = self.automorphism(&lab, &best.1);
                self.autos.push(gamma);
            }
            std::cmp::Ordering::Less => self.best = Some((cert, lab)),
            std::cmp::Ordering::Greater => {}
        }
        None
    }

    /// The automorphism mapping `from[i]` to `to[i]`.
    fn automorphism(&self, from: &[u32], to: &[u32]) -> Vec<u32> {
        let mut gamma = vec![0u32; self.g.n];
        for (a, b) in from.iter().zip(to) {
            gamma[*a as usize] = *b;
        }
        gamma
    }

    /// Whether `v` shares an orbit with an explored vertex under the group
    /// generated by the known automorphisms that fix `path` pointwise.
    fn same_orbit(&self, path: &[u32], v: u32, explored: &[u32]) -> bool {
        let n = self.g.n;
        let mut parent: Vec<u32> = (0..n as u32).collect();
        fn find(parent: &mut [u32], mut x: u32) -> u32 {
            while parent[x as usize] != x {
                parent[x as usize] = parent[parent[x as usize] as usize];
                x = parent[x as usize];
            }
            x
        }
        let mut any = false;
        for gamma in &self.autos {
            if path.iter().any(|&x| gamma[x as usize] != x) {
                continue;
            }
            any = true;
            for (a, &b) in gamma.iter().enumerate() {
                let (ra, rb) = (find(&mut parent, a as u32), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb) as usize] = ra.min(rb);
                }
            }
        }
        if !any {
            return false;
        }
        let rv = find(&mut parent, v);
        explored.iter().any(|&w| find(&mut parent, w) == rv)
    }
}
