//! Harrington's hierarchical cellular-automaton decoder for the 2D toric code.
//!
//! Every vertex hosts a 0-cell. `Q x Q` blocks of `(i-1)`-cells form an
//! `i`-cell whose memory lives at the block's centre. All levels share the
//! same three-step local rule (nearest neighbours, diagonal neighbours, move
//! to centre); level `i` runs it once per work period of `U^i` steps on
//! thresholded defect records, and realises its moves as straight strings of
//! `Q^i` qubit flips applied one work period later.
//!
//! Communication lag is modelled by delay counters: neighbour records are
//! read `Q^i` steps late and corrections land at the next period end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Chain, Torus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregationStrategy {
    /// Threshold the whole record of `U` samples.
    NonDivision,
    /// Split the record into `b` blocks of `b` samples (`U = b^2`).
    Division,
}

/// CA steps executed per QEC cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tau {
    Steps(u32),
    /// Run until the syndrome is empty and no correction is pending.
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarringtonConfig {
    pub q: usize,
    pub u: usize,
    pub f_c: f64,
    pub f_n: f64,
    pub strategy: AggregationStrategy,
    pub b: Option<usize>,
    pub tau: Tau,
}

impl Default for HarringtonConfig {
    fn default() -> Self {
        HarringtonConfig {
            q: 3,
            u: 10,
            f_c: 0.9,
            f_n: 0.4,
            strategy: AggregationStrategy::NonDivision,
            b: None,
            tau: Tau::Steps(1),
        }
    }
}

fn at_least(f: f64, n: usize) -> usize {
    (f * n as f64 - 1e-9).ceil().max(0.0) as usize
}

impl HarringtonConfig {
    /// Checks the parameters against lattice size `l` and read-out error rate `q_noise`.
    /// Returns the number of hierarchy levels `k` with `l = Q^k`.
    pub fn validate(&self, l: usize, q_noise: f64) -> Result<usize> {
        if self.q < 3 || self.q % 2 == 0 {
            return Err(Error::config("Q", "must be an odd integer >= 3"));
        }
        if self.u < self.q {
            return Err(Error::config("U", "must be at least Q"));
        }
        for (key, f) in [("f_c", self.f_c), ("f_n", self.f_n)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::config(key, "must lie strictly between 0 and 1"));
            }
        }
        if self.strategy == AggregationStrategy::Division {
            match self.b {
                Some(b) if b * b == self.u => {}
                _ => return Err(Error::config("b", "division strategy needs U = b^2")),
            }
        }
        if let Tau::Steps(0) = self.tau {
            return Err(Error::config("tau", "must be positive"));
        }
        if self.tau == Tau::Infinite && q_noise > 0.0 {
            return Err(Error::config("tau", "tau = inf is only supported with q = 0"));
        }
        let mut k = 0;
        let mut n = 1;
        while n < l {
            n *= self.q;
            k += 1;
        }
        if n != l || k == 0 {
            return Err(Error::config("L", format!("L = {l} is not a power of Q = {}", self.q)));
        }
        Ok(k)
    }

    fn block_len(&self) -> usize {
        self.b.unwrap_or(self.u)
    }
}

fn threshold(record: &[bool], f: f64, cfg: &HarringtonConfig) -> Result<bool> {
    if record.len() != cfg.u {
        return Err(Error::contract(format!(
            "record has length {}, expected U = {}",
            record.len(),
            cfg.u
        )));
    }
    Ok(match cfg.strategy {
        AggregationStrategy::NonDivision => record.iter().filter(|&&x| x).count() >= at_least(f, cfg.u),
        AggregationStrategy::Division => {
            let b = cfg.block_len();
            let need = at_least(f, b);
            let good = record
                .chunks(b)
                .filter(|blk| blk.iter().filter(|&&x| x).count() >= need)
                .count();
            good >= need
        }
    })
}

/// Level-`i` defect decision from the centre `(i-1)`-cell's record of `U` samples.
pub fn aggregate_own_defect(record: &[bool], cfg: &HarringtonConfig) -> Result<bool> {
    threshold(record, cfg.f_c, cfg)
}

/// A cell's verdict about a neighbour from that neighbour's streamed record.
pub fn aggregate_neighbor_defect(record: &[bool], cfg: &HarringtonConfig) -> Result<bool> {
    threshold(record, cfg.f_n, cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColonyRegion {
    Nwq,
    Nc,
    Neq,
    Wc,
    Center,
    Ec,
    Swq,
    Sc,
    Seq,
}

/// Region of position `(cx, cy)` in a `Q x Q` colony; `y` grows northward.
pub fn classify_region(pos: (usize, usize), q: usize) -> Result<ColonyRegion> {
    let (cx, cy) = pos;
    if cx >= q || cy >= q {
        return Err(Error::contract(format!("position {pos:?} outside a {q}x{q} colony")));
    }
    let c = (q - 1) / 2;
    use std::cmp::Ordering::*;
    Ok(match (cx.cmp(&c), cy.cmp(&c)) {
        (Less, Greater) => ColonyRegion::Nwq,
        (Equal, Greater) => ColonyRegion::Nc,
        (Greater, Greater) => ColonyRegion::Neq,
        (Less, Equal) => ColonyRegion::Wc,
        (Equal, Equal) => ColonyRegion::Center,
        (Greater, Equal) => ColonyRegion::Ec,
        (Less, Less) => ColonyRegion::Swq,
        (Equal, Less) => ColonyRegion::Sc,
        (Greater, Less) => ColonyRegion::Seq,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dir {
    N,
    E,
    S,
    W,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::N, Dir::E, Dir::S, Dir::W];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Dir::N => (0, 1),
            Dir::E => (1, 0),
            Dir::S => (0, -1),
            Dir::W => (-1, 0),
        }
    }

    fn x(s: isize) -> Dir {
        if s > 0 {
            Dir::E
        } else {
            Dir::W
        }
    }

    fn y(s: isize) -> Dir {
        if s > 0 {
            Dir::N
        } else {
            Dir::S
        }
    }
}

/// Diagonal offsets in tie-break order.
const DIAGONALS: [(isize, isize); 4] = [(1, 1), (1, -1), (-1, -1), (-1, 1)];

fn sign(a: isize) -> isize {
    a.signum()
}

/// Geometry of one position inside a colony, shared by the three steps.
struct Site {
    q: usize,
    cx: usize,
    cy: usize,
    tx: isize,
    ty: isize,
}

impl Site {
    fn new(cx: usize, cy: usize, q: usize) -> Self {
        let c = ((q - 1) / 2) as isize;
        Site {
            q,
            cx,
            cy,
            tx: sign(c - cx as isize),
            ty: sign(c - cy as isize),
        }
    }

    fn owns(&self, d: Dir) -> bool {
        match d {
            Dir::N => self.ty == 1,
            Dir::S => self.ty == -1 || self.cy == 0,
            Dir::E => self.tx == 1,
            Dir::W => self.tx == -1 || self.cx == 0,
        }
    }

    fn border_x(&self, sx: isize) -> bool {
        (sx < 0 && self.cx == 0) || (sx > 0 && self.cx == self.q - 1)
    }

    fn border_y(&self, sy: isize) -> bool {
        (sy < 0 && self.cy == 0) || (sy > 0 && self.cy == self.q - 1)
    }

    fn crosses(&self, d: Dir) -> bool {
        match d {
            Dir::N => self.border_y(1),
            Dir::S => self.border_y(-1),
            Dir::E => self.border_x(1),
            Dir::W => self.border_x(-1),
        }
    }

    fn toward_center(&self) -> Option<Dir> {
        let c = ((self.q - 1) / 2) as isize;
        match (self.tx, self.ty) {
            (0, 0) => None,
            (0, ty) => Some(Dir::y(ty)),
            (tx, 0) => Some(Dir::x(tx)),
            (tx, ty) => {
                let dx = (c - self.cx as isize).abs();
                let dy = (c - self.cy as isize).abs();
                Some(if dx > dy { Dir::x(tx) } else { Dir::y(ty) })
            }
        }
    }

    /// Link flipped when pairing with a defect at diagonal offset `(sx, sy)`.
    fn diagonal_action(&self, sx: isize, sy: isize) -> Option<Dir> {
        match (self.tx, self.ty) {
            (0, 0) => None,
            (0, ty) => (sy == ty || self.border_y(sy)).then(|| Dir::y(sy)),
            (tx, 0) => (sx == tx || self.border_x(sx)).then(|| Dir::x(sx)),
            (tx, ty) => match (sx == tx, sy == ty) {
                (true, true) => self.toward_center(),
                (true, false) => Some(Dir::x(sx)),
                (false, true) => Some(Dir::y(sy)),
                (false, false) => match (self.border_x(sx), self.border_y(sy)) {
                    (true, true) => Some(if self.cx == 0 { Dir::x(sx) } else { Dir::y(sy) }),
                    (true, false) => Some(Dir::x(sx)),
                    (false, true) => Some(Dir::y(sy)),
                    (false, false) => None,
                },
            },
        }
    }
}

/// The three-step rule for one cell holding a defect.
///
/// `nn[d]` flags defects at the nearest neighbours in N, E, S, W order and
/// `diag` those at NE, SE, SW, NW. Returns the link to flip, if any.
pub fn local_decision(cx: usize, cy: usize, q: usize, nn: [bool; 4], diag: [bool; 4]) -> Option<Dir> {
    let site = Site::new(cx, cy, q);
    if nn.iter().any(|&b| b) {
        let best = Dir::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| nn[*i])
            .min_by_key(|(i, &d)| (!site.crosses(d), site.owns(d), *i))
            .map(|(_, &d)| d)
            .unwrap();
        return site.owns(best).then_some(best);
    }
    if diag.iter().any(|&b| b) {
        let (_, _, action) = DIAGONALS
            .iter()
            .enumerate()
            .filter(|(i, _)| diag[*i])
            .map(|(i, &(sx, sy))| (i, (sx, sy), site.diagonal_action(sx, sy)))
            .min_by_key(|&(i, (sx, sy), action)| {
                let cross = site.border_x(sx) || site.border_y(sy);
                (!cross, action.is_some(), i)
            })
            .unwrap();
        return action;
    }
    site.toward_center()
}

/// A cell of an `n x n` periodic grid and the link it flips.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub x: usize,
    pub y: usize,
    pub dir: Dir,
}

/// Applies the local rule to every cell of an `n x n` grid.
///
/// `own(x, y)` says whether a cell believes it holds a defect; `seen(x, y)`
/// is what its neighbours believe about it.
pub fn grid_step(
    n: usize,
    q: usize,
    own: impl Fn(usize, usize) -> bool,
    seen: impl Fn(usize, usize) -> bool,
    cells: impl Iterator<Item = (usize, usize)>,
) -> Vec<Move> {
    let wrap = |a: usize, d: isize| ((a as isize + d).rem_euclid(n as isize)) as usize;
    let mut out = Vec::new();
    for (x, y) in cells {
        if !own(x, y) {
            continue;
        }
        let mut nn = [false; 4];
        for (i, d) in Dir::ALL.iter().enumerate() {
            let (dx, dy) = d.delta();
            nn[i] = seen(wrap(x, dx), wrap(y, dy));
        }
        let mut diag = [false; 4];
        if !nn.iter().any(|&b| b) {
            for (i, &(dx, dy)) in DIAGONALS.iter().enumerate() {
                diag[i] = seen(wrap(x, dx), wrap(y, dy));
            }
        }
        if let Some(dir) = local_decision(x % q, y % q, q, nn, diag) {
            out.push(Move { x, y, dir });
        }
    }
    out
}

/// Edge index of the link leaving vertex `(x, y)` in direction `dir` on an `l x l` torus.
pub fn link(l: usize, x: usize, y: usize, dir: Dir) -> usize {
    let (x, y) = match dir {
        Dir::N | Dir::E => (x, y),
        Dir::S => (x, (y + l - 1) % l),
        Dir::W => ((x + l - 1) % l, y),
    };
    let horizontal = matches!(dir, Dir::E | Dir::W);
    (x * l + y) * 2 + usize::from(!horizontal)
}

/// Flips chosen by the 0-cells for one CA step on the given defect chain.
pub fn level0_step(torus: &Torus, defects: &Chain, q: usize) -> Result<Vec<usize>> {
    if torus.dimension() != 2 || defects.cell_dim() != 0 {
        return Err(Error::contract("level0_step expects a 2D vertex chain"));
    }
    let l = torus.l();
    if l % q != 0 {
        return Err(Error::contract("L must be a multiple of Q"));
    }
    let get = |x: usize, y: usize| defects.get(x * l + y);
    let moves = grid_step(l, q, get, get, defects.iter_ones().map(|v| (v / l, v % l)));
    Ok(moves.iter().map(|m| link(l, m.x, m.y, m.dir)).collect())
}

/// Something the decoder did, for traces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecoderEvent {
    Flip { step: u64, edges: Vec<usize> },
    CorrectionScheduled { step: u64, level: usize, apply_at: u64, edges: Vec<usize> },
    CorrectionApplied { step: u64, level: usize, edges: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Pending {
    edges: Vec<usize>,
    apply_at: u64,
}

#[derive(Clone, Copy, Debug)]
struct Mask {
    cell: usize,
    lo: u64,
    hi: u64,
}

/// State of level `i >= 1`: the sample streams of its `n x n` cells,
/// adjustment masks and corrections in flight.
#[derive(Clone, Debug)]
struct Level {
    i: usize,
    n: usize,
    /// Time between samples, `U^(i-1)`.
    sample_period: u64,
    /// Work period `U^i`.
    period: u64,
    /// Neighbour-stream and correction latency `Q^i`.
    lag: u64,
    span: usize,
    cap: usize,
    ring: Vec<bool>,
    masks: Vec<Mask>,
    pending: Vec<Pending>,
    /// Own decisions at the last period end.
    own: Vec<bool>,
}

impl Level {
    fn new(i: usize, l: usize, cfg: &HarringtonConfig) -> Self {
        let q = cfg.q as u64;
        let u = cfg.u as u64;
        let span = q.pow(i as u32);
        let n = l / span as usize;
        let sample_period = u.pow(i as u32 - 1);
        let lag = span;
        let cap = cfg.u + lag.div_ceil(sample_period) as usize + 2;
        Level {
            i,
            n,
            sample_period,
            period: u.pow(i as u32),
            lag,
            span: span as usize,
            cap,
            ring: vec![false; n * n * cap],
            masks: Vec::new(),
            pending: Vec::new(),
            own: vec![false; n * n],
        }
    }

    fn record(&mut self, cell: usize, s: u64, bit: bool) {
        let slot = cell * self.cap + (s as usize % self.cap);
        self.ring[slot] = bit;
    }

    fn sample(&self, cell: usize, s: u64) -> bool {
        if s == 0 {
            return false;
        }
        let raw = self.ring[cell * self.cap + (s as usize % self.cap)];
        let flips = self
            .masks
            .iter()
            .filter(|m| m.cell == cell && m.lo <= s && s <= m.hi)
            .count();
        raw ^ (flips % 2 == 1)
    }

    /// The `U` most recent samples taken no later than time `t`.
    fn window(&self, cell: usize, t: i64, u: usize, out: &mut Vec<bool>) {
        out.clear();
        let last = if t <= 0 { 0 } else { t as u64 / self.sample_period };
        for k in (0..u as u64).rev() {
            out.push(if last >= k + 1 { self.sample(cell, last - k) } else { false });
        }
    }

    fn rep(&self, x: usize) -> usize {
        x * self.span + (self.span - 1) / 2
    }
}

/// Harrington decoder state for one trial.
#[derive(Clone, Debug)]
pub struct HarringtonDecoder {
    cfg: HarringtonConfig,
    l: usize,
    k: usize,
    time: u64,
    syndrome: Chain,
    levels: Vec<Level>,
    scratch: Vec<bool>,
}

impl HarringtonDecoder {
    pub fn new(torus: &Torus, cfg: HarringtonConfig, q_noise: f64) -> Result<Self> {
        if torus.dimension() != 2 {
            return Err(Error::contract("the Harrington decoder runs on the 2D lattice"));
        }
        let l = torus.l();
        let k = cfg.validate(l, q_noise)?;
        let levels = (1..k).map(|i| Level::new(i, l, &cfg)).collect();
        Ok(HarringtonDecoder {
            cfg,
            l,
            k,
            time: 0,
            syndrome: Chain::zeros(torus, 0),
            levels,
            scratch: Vec::new(),
        })
    }

    pub fn config(&self) -> &HarringtonConfig {
        &self.cfg
    }

    /// Number of hierarchy levels `k` with `L = Q^k`.
    pub fn levels(&self) -> usize {
        self.k
    }

    /// CA steps executed so far.
    pub fn time(&self) -> u64 {
        self.time
    }

    /// Effective syndrome: last measurement XOR boundaries of flips since.
    pub fn effective_syndrome(&self) -> &Chain {
        &self.syndrome
    }

    pub fn pending_count(&self) -> usize {
        self.levels.iter().map(|lv| lv.pending.len()).sum()
    }

    fn flip_edge(&mut self, error: &mut Chain, e: usize) {
        error.flip(e);
        let l = self.l;
        let (v, dir) = (e / 2, e % 2);
        let (x, y) = (v / l, v % l);
        let w = if dir == 0 { ((x + 1) % l) * l + y } else { x * l + (y + 1) % l };
        self.syndrome.flip(v);
        self.syndrome.flip(w);
    }

    /// One QEC cycle: load the measured syndrome and run `tau` CA steps,
    /// flipping qubits of `error` as the automaton decides.
    pub fn run_cycle(&mut self, error: &mut Chain, measured: &Chain) -> Result<()> {
        self.run_cycle_traced(error, measured, None)
    }

    pub fn run_cycle_traced(
        &mut self,
        error: &mut Chain,
        measured: &Chain,
        mut trace: Option<&mut Vec<DecoderEvent>>,
    ) -> Result<()> {
        if measured.dims() != self.syndrome.dims() || measured.cell_dim() != 0 {
            return Err(Error::contract("measured syndrome must be a vertex chain of the same lattice"));
        }
        self.syndrome = measured.clone();
        match self.cfg.tau {
            Tau::Steps(n) => {
                for _ in 0..n {
                    self.step(error, trace.as_deref_mut());
                }
            }
            Tau::Infinite => {
                let cap = 50 * (self.cfg.u as u64).pow(self.k as u32) + 100;
                let mut used = 0;
                while (!self.syndrome.is_zero() || self.pending_count() > 0) && used < cap {
                    self.step(error, trace.as_deref_mut());
                    used += 1;
                }
            }
        }
        Ok(())
    }

    /// One CA step at every level that is due.
    pub fn step(&mut self, error: &mut Chain, mut trace: Option<&mut Vec<DecoderEvent>>) {
        self.time += 1;
        let t = self.time;
        let l = self.l;

        if let Some(lv) = self.levels.first_mut() {
            for x in 0..lv.n {
                for y in 0..lv.n {
                    let v = lv.rep(x) * l + lv.rep(y);
                    let bit = self.syndrome.get(v);
                    lv.record(x * lv.n + y, t, bit);
                }
            }
        }

        let q = self.cfg.q;
        let syn = &self.syndrome;
        let get = |x: usize, y: usize| syn.get(x * l + y);
        let moves = grid_step(l, q, get, get, syn.iter_ones().map(|v| (v / l, v % l)));
        if !moves.is_empty() {
            let edges: Vec<usize> = moves.iter().map(|m| link(l, m.x, m.y, m.dir)).collect();
            for &e in &edges {
                self.flip_edge(error, e);
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(DecoderEvent::Flip { step: t, edges });
            }
        }

        for li in 0..self.levels.len() {
            if t % self.levels[li].period == 0 {
                self.level_step(li, error, trace.as_deref_mut());
            }
        }
    }

    fn level_step(&mut self, li: usize, error: &mut Chain, mut trace: Option<&mut Vec<DecoderEvent>>) {
        let t = self.time;
        let l = self.l;
        let u = self.cfg.u;
        let cfg = self.cfg;

        let due: Vec<Pending> = {
            let lv = &mut self.levels[li];
            let (due, keep) = lv.pending.drain(..).partition(|p| p.apply_at == t);
            lv.pending = keep;
            due
        };
        for p in due {
            for &e in &p.edges {
                self.flip_edge(error, e);
            }
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(DecoderEvent::CorrectionApplied {
                    step: t,
                    level: li + 1,
                    edges: p.edges,
                });
            }
        }

        let mut scratch = std::mem::take(&mut self.scratch);
        let lv = &mut self.levels[li];
        let n = lv.n;
        let mut own = vec![false; n * n];
        let mut seen = vec![false; n * n];
        for c in 0..n * n {
            lv.window(c, t as i64, u, &mut scratch);
            own[c] = threshold(&scratch, cfg.f_c, &cfg).unwrap_or(false);
            lv.window(c, t as i64 - lv.lag as i64, u, &mut scratch);
            seen[c] = threshold(&scratch, cfg.f_n, &cfg).unwrap_or(false);
        }
        self.scratch = scratch;
        lv.own = own.clone();

        let moves = grid_step(
            n,
            cfg.q,
            |x, y| own[x * n + y],
            |x, y| seen[x * n + y],
            (0..n).flat_map(|x| (0..n).map(move |y| (x, y))),
        );

        let apply_at = t + lv.period;
        let s_lo = (t.saturating_sub(lv.lag)) / lv.sample_period + 1;
        let s_hi = (t + lv.period) / lv.sample_period;
        for m in &moves {
            let (dx, dy) = m.dir.delta();
            let nx = (m.x as isize + dx).rem_euclid(n as isize) as usize;
            let ny = (m.y as isize + dy).rem_euclid(n as isize) as usize;
            let (rx, ry) = (lv.rep(m.x), lv.rep(m.y));
            let mut edges = Vec::with_capacity(lv.span);
            for s in 0..lv.span {
                let (px, py) = (
                    (rx as isize + dx * s as isize).rem_euclid(l as isize) as usize,
                    (ry as isize + dy * s as isize).rem_euclid(l as isize) as usize,
                );
                edges.push(link(l, px, py, m.dir));
            }
            lv.masks.push(Mask { cell: m.x * n + m.y, lo: s_lo, hi: s_hi });
            lv.masks.push(Mask { cell: nx * n + ny, lo: s_lo, hi: s_hi });
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(DecoderEvent::CorrectionScheduled {
                    step: t,
                    level: lv.i,
                    apply_at,
                    edges: edges.clone(),
                });
            }
            lv.pending.push(Pending { edges, apply_at });
        }

        // Samples older than the next neighbour window are never read again.
        let oldest_needed = ((t + lv.period).saturating_sub(lv.lag) / lv.sample_period).saturating_sub(u as u64);
        lv.masks.retain(|m| m.hi >= oldest_needed);

        if li + 1 < self.levels.len() {
            let upper = &mut self.levels[li + 1];
            let s = t / upper.sample_period;
            let c = (cfg.q - 1) / 2;
            for x in 0..upper.n {
                for y in 0..upper.n {
                    let bit = own[(x * cfg.q + c) * n + (y * cfg.q + c)];
                    upper.record(x * upper.n + y, s, bit);
                }
            }
        }
    }
}
