//! Exact minimum-weight perfect matching, the rough row/column test and the
//! 2D logical-failure oracle.
//!
//! Small instances (up to [`DP_LIMIT`] points) are solved by a bitmask
//! recursion that returns the lexicographically smallest optimal pair list.
//! Larger instances go through a port of the Edmonds blossom algorithm in
//! the formulation of Galil (integer duals, maximum cardinality).

use crate::error::{Error, Result};
use crate::lattice::{Chain, Torus};

/// Instances with at most this many points use the exact bitmask solver.
pub const DP_LIMIT: usize = 12;

/// Fixed-point scale applied to Euclidean distances.
pub const EUCLID_SCALE: f64 = (1u64 << 20) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Taxi-cab distance on a periodic lattice of side `l`.
    Torus { l: usize },
    /// Straight-line distance, scaled by [`EUCLID_SCALE`] and rounded.
    Euclidean,
}

impl Metric {
    pub fn distance(&self, a: &[i64], b: &[i64]) -> i64 {
        match *self {
            Metric::Torus { l } => {
                let l = l as i64;
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| {
                        let d = (x - y).rem_euclid(l);
                        d.min(l - d)
                    })
                    .sum()
            }
            Metric::Euclidean => {
                let sq: i64 = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
                ((sq as f64).sqrt() * EUCLID_SCALE).round() as i64
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pairing {
    /// Index pairs `(i, j)` with `i < j`, sorted by `i`.
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: i64,
}

/// Minimum-weight perfect matching of `points` under `metric`.
pub fn mwm(points: &[Vec<i64>], metric: Metric) -> Result<Pairing> {
    let n = points.len();
    let w = |i: usize, j: usize| metric.distance(&points[i], &points[j]);
    let pairs = min_weight_perfect_matching(n, w)?;
    let total_weight = pairs.iter().map(|&(i, j)| w(i, j)).sum();
    Ok(Pairing { pairs, total_weight })
}

/// Minimum-weight perfect matching on the complete graph with weights `w`.
pub fn min_weight_perfect_matching<F: Fn(usize, usize) -> i64>(n: usize, w: F) -> Result<Vec<(usize, usize)>> {
    if n % 2 == 1 {
        return Err(Error::contract(format!("perfect matching needs an even number of points, got {n}")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n <= DP_LIMIT {
        Ok(dp_matching(n, &w))
    } else {
        blossom_matching(n, &w)
    }
}

/// Exact matching by recursion on the lowest unmatched point.
///
/// Among optimal matchings the one whose pair list is lexicographically
/// smallest is returned.
pub fn dp_matching<F: Fn(usize, usize) -> i64>(n: usize, w: &F) -> Vec<(usize, usize)> {
    assert!(n % 2 == 0 && n <= 24);
    let mut wm = vec![0i64; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                wm[i * n + j] = w(i.min(j), i.max(j));
            }
        }
    }
    let full = (1usize << n) - 1;
    let mut best = vec![i64::MAX; full + 1];
    best[0] = 0;
    for mask in 1..=full {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut m = rest;
        let mut b = i64::MAX;
        while m != 0 {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            let sub = best[rest & !(1 << j)];
            let c = wm[i * n + j] + sub;
            if c < b {
                b = c;
            }
        }
        best[mask] = b;
    }
    let mut pairs = Vec::with_capacity(n / 2);
    let mut mask = full;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut m = rest;
        loop {
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            let next = rest & !(1 << j);
            if wm[i * n + j] + best[next] == best[mask] {
                pairs.push((i, j));
                mask = next;
                break;
            }
        }
    }
    pairs
}

/// Exhaustive reference matching over all `(n-1)!!` pairings.
pub fn brute_force_matching<F: Fn(usize, usize) -> i64>(n: usize, w: &F) -> i64 {
    fn rec<F: Fn(usize, usize) -> i64>(free: &mut Vec<usize>, w: &F) -> i64 {
        if free.is_empty() {
            return 0;
        }
        let a = free.remove(0);
        let mut best = i64::MAX;
        for k in 0..free.len() {
            let b = free.remove(k);
            let c = w(a.min(b), a.max(b)) + rec(free, w);
            best = best.min(c);
            free.insert(k, b);
        }
        free.insert(0, a);
        best
    }
    rec(&mut (0..n).collect(), w)
}

/// Blossom-algorithm matching; used above [`DP_LIMIT`] but callable directly.
pub fn blossom_matching<F: Fn(usize, usize) -> i64>(n: usize, w: &F) -> Result<Vec<(usize, usize)>> {
    if n % 2 == 1 {
        return Err(Error::contract("perfect matching needs an even number of points"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    let mut wmax = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let x = w(i, j);
            if x < 0 {
                return Err(Error::contract("matching weights must be non-negative"));
            }
            wmax = wmax.max(x);
            edges.push((i, j, x));
        }
    }
    // Maximum weight with maximum cardinality on shifted weights is a
    // minimum weight perfect matching on the original ones.
    for e in edges.iter_mut() {
        e.2 = wmax + 1 - e.2;
    }
    let mate = Blossom::new(n, edges).solve();
    let mut pairs = Vec::with_capacity(n / 2);
    for (i, &m) in mate.iter().enumerate() {
        if m == NONE {
            return Err(Error::contract("blossom matching left a point unmatched"));
        }
        if i < m {
            pairs.push((i, m));
        }
    }
    Ok(pairs)
}

const NONE: usize = usize::MAX;

struct Blossom {
    nvertex: usize,
    edges: Vec<(usize, usize, i64)>,
    endpoint: Vec<usize>,
    neighbend: Vec<Vec<usize>>,
    mate: Vec<usize>,
    label: Vec<i32>,
    labelend: Vec<usize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<usize>,
    blossombestedges: Vec<Option<Vec<usize>>>,
    unusedblossoms: Vec<usize>,
    dualvar: Vec<i64>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
}

fn at(v: &[usize], j: isize) -> usize {
    if j >= 0 {
        v[j as usize]
    } else {
        v[(v.len() as isize + j) as usize]
    }
}

impl Blossom {
    fn new(nvertex: usize, edges: Vec<(usize, usize, i64)>) -> Self {
        let nedge = edges.len();
        let maxweight = edges.iter().map(|e| e.2).max().unwrap_or(0);
        let mut endpoint = Vec::with_capacity(2 * nedge);
        let mut neighbend = vec![Vec::new(); nvertex];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            endpoint.push(i);
            endpoint.push(j);
            neighbend[i].push(2 * k + 1);
            neighbend[j].push(2 * k);
        }
        let mut blossombase: Vec<usize> = (0..nvertex).collect();
        blossombase.extend(std::iter::repeat_n(NONE, nvertex));
        let mut dualvar = vec![maxweight; nvertex];
        dualvar.extend(std::iter::repeat_n(0, nvertex));
        Blossom {
            nvertex,
            endpoint,
            neighbend,
            mate: vec![NONE; nvertex],
            label: vec![0; 2 * nvertex],
            labelend: vec![NONE; 2 * nvertex],
            inblossom: (0..nvertex).collect(),
            blossomparent: vec![NONE; 2 * nvertex],
            blossomchilds: vec![Vec::new(); 2 * nvertex],
            blossombase,
            blossomendps: vec![Vec::new(); 2 * nvertex],
            bestedge: vec![NONE; 2 * nvertex],
            blossombestedges: vec![None; 2 * nvertex],
            unusedblossoms: (nvertex..2 * nvertex).collect(),
            dualvar,
            allowedge: vec![false; nedge],
            queue: Vec::new(),
            edges,
        }
    }

    #[inline]
    fn slack(&self, k: usize) -> i64 {
        let (i, j, wt) = self.edges[k];
        self.dualvar[i] + self.dualvar[j] - 2 * wt
    }

    fn leaves(&self, b: usize, out: &mut Vec<usize>) {
        if b < self.nvertex {
            out.push(b);
        } else {
            for &t in &self.blossomchilds[b] {
                self.leaves(t, out);
            }
        }
    }

    fn leaves_of(&self, b: usize) -> Vec<usize> {
        let mut v = Vec::new();
        self.leaves(b, &mut v);
        v
    }

    fn assign_label(&mut self, w: usize, t: i32, p: usize) {
        let b = self.inblossom[w];
        debug_assert!(self.label[w] == 0 && self.label[b] == 0);
        self.label[w] = t;
        self.label[b] = t;
        self.labelend[w] = p;
        self.labelend[b] = p;
        self.bestedge[w] = NONE;
        self.bestedge[b] = NONE;
        if t == 1 {
            let mut leaves = Vec::new();
            self.leaves(b, &mut leaves);
            self.queue.extend(leaves);
        } else if t == 2 {
            let base = self.blossombase[b];
            let mb = self.mate[base];
            debug_assert!(mb != NONE);
            self.assign_label(self.endpoint[mb], 1, mb ^ 1);
        }
    }

    fn scan_blossom(&mut self, mut v: usize, mut w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        while v != NONE || w != NONE {
            let mut b = self.inblossom[v];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert!(self.label[b] == 1);
            path.push(b);
            self.label[b] = 5;
            if self.labelend[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.labelend[b]];
                b = self.inblossom[v];
                debug_assert!(self.label[b] == 2);
                v = self.endpoint[self.labelend[b]];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = 1;
        }
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w, _) = self.edges[k];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom slots exhausted");
        self.blossombase[b] = base;
        self.blossomparent[b] = NONE;
        self.blossomparent[bb] = b;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b;
            path.push(bv);
            endps.push(self.labelend[bv]);
            v = self.endpoint[self.labelend[bv]];
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b;
            path.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            w = self.endpoint[self.labelend[bw]];
            bw = self.inblossom[w];
        }
        debug_assert!(self.label[bb] == 1);
        self.label[b] = 1;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0;
        self.blossomchilds[b] = path.clone();
        self.blossomendps[b] = endps;
        for v in self.leaves_of(b) {
            if self.label[self.inblossom[v]] == 2 {
                self.queue.push(v);
            }
            self.inblossom[v] = b;
        }
        let mut bestedgeto = vec![NONE; 2 * self.nvertex];
        for &bv in &path {
            let nblists: Vec<Vec<usize>> = match self.blossombestedges[bv].take() {
                Some(list) => vec![list],
                None => self
                    .leaves_of(bv)
                    .into_iter()
                    .map(|v| self.neighbend[v].iter().map(|p| p / 2).collect())
                    .collect(),
            };
            for nblist in nblists {
                for k in nblist {
                    let (mut i, mut j, _) = self.edges[k];
                    if self.inblossom[j] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.inblossom[j];
                    if bj != b
                        && self.label[bj] == 1
                        && (bestedgeto[bj] == NONE || self.slack(k) < self.slack(bestedgeto[bj]))
                    {
                        bestedgeto[bj] = k;
                    }
                }
            }
            self.bestedge[bv] = NONE;
        }
        let list: Vec<usize> = bestedgeto.into_iter().filter(|&k| k != NONE).collect();
        let mut best = NONE;
        for &k in &list {
            if best == NONE || self.slack(k) < self.slack(best) {
                best = k;
            }
        }
        self.blossombestedges[b] = Some(list);
        self.bestedge[b] = best;
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let childs = self.blossomchilds[b].clone();
        for &s in &childs {
            self.blossomparent[s] = NONE;
            if s < self.nvertex {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for v in self.leaves_of(s) {
                    self.inblossom[v] = s;
                }
            }
        }
        if !endstage && self.label[b] == 2 {
            let entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]];
            let len = childs.len() as isize;
            let mut j = childs.iter().position(|&c| c == entrychild).unwrap() as isize;
            let (jstep, endptrick): (isize, usize) = if j & 1 != 0 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };
            let endps = self.blossomendps[b].clone();
            let mut p = self.labelend[b];
            while j != 0 {
                self.label[self.endpoint[p ^ 1]] = 0;
                let q = at(&endps, j - endptrick as isize) ^ endptrick ^ 1;
                self.label[self.endpoint[q]] = 0;
                self.assign_label(self.endpoint[p ^ 1], 2, p);
                self.allowedge[at(&endps, j - endptrick as isize) / 2] = true;
                j += jstep;
                p = at(&endps, j - endptrick as isize) ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = at(&childs, j);
            self.label[self.endpoint[p ^ 1]] = 2;
            self.label[bv] = 2;
            self.labelend[self.endpoint[p ^ 1]] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = NONE;
            j += jstep;
            while at(&childs, j) != entrychild {
                let bv = at(&childs, j);
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                let mut found = NONE;
                for v in self.leaves_of(bv) {
                    if self.label[v] != 0 {
                        found = v;
                        break;
                    }
                }
                if found != NONE {
                    let v = found;
                    debug_assert!(self.label[v] == 2 && self.inblossom[v] == bv);
                    self.label[v] = 0;
                    self.label[self.endpoint[self.mate[self.blossombase[bv]]]] = 0;
                    let le = self.labelend[v];
                    self.assign_label(v, 2, le);
                }
                j += jstep;
            }
        }
        self.label[b] = -1;
        self.labelend[b] = NONE;
        self.blossomchilds[b] = Vec::new();
        self.blossomendps[b] = Vec::new();
        self.blossombase[b] = NONE;
        self.blossombestedges[b] = None;
        self.bestedge[b] = NONE;
        self.unusedblossoms.push(b);
    }

    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.nvertex {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len();
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let mut j = i as isize;
        let (jstep, endptrick): (isize, usize) = if i & 1 != 0 {
            j -= len as isize;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = at(&self.blossomchilds[b], j);
            let p = at(&self.blossomendps[b], j - endptrick as isize) ^ endptrick;
            if t >= self.nvertex {
                self.augment_blossom(t, self.endpoint[p]);
            }
            j += jstep;
            let t = at(&self.blossomchilds[b], j);
            if t >= self.nvertex {
                self.augment_blossom(t, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert!(self.blossombase[b] == v);
    }

    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (s0, p0) in [(v, 2 * k + 1), (w, 2 * k)] {
            let mut s = s0;
            let mut p = p0;
            loop {
                let bs = self.inblossom[s];
                debug_assert!(self.label[bs] == 1);
                if bs >= self.nvertex {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == NONE {
                    break;
                }
                let t = self.endpoint[self.labelend[bs]];
                let bt = self.inblossom[t];
                debug_assert!(self.label[bt] == 2);
                s = self.endpoint[self.labelend[bt]];
                let j = self.endpoint[self.labelend[bt] ^ 1];
                debug_assert!(self.blossombase[bt] == t);
                if bt >= self.nvertex {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn solve(mut self) -> Vec<usize> {
        let n = self.nvertex;
        for _ in 0..n {
            self.label.iter_mut().for_each(|x| *x = 0);
            self.bestedge.iter_mut().for_each(|x| *x = NONE);
            for b in n..2 * n {
                self.blossombestedges[b] = None;
            }
            self.allowedge.iter_mut().for_each(|x| *x = false);
            self.queue.clear();
            for v in 0..n {
                if self.mate[v] == NONE && self.label[self.inblossom[v]] == 0 {
                    self.assign_label(v, 1, NONE);
                }
            }
            let mut augmented = false;
            loop {
                while !augmented {
                    let Some(v) = self.queue.pop() else { break };
                    for idx in 0..self.neighbend[v].len() {
                        let p = self.neighbend[v][idx];
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            if self.label[self.inblossom[w]] == 0 {
                                self.assign_label(w, 2, p ^ 1);
                            } else if self.label[self.inblossom[w]] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base != NONE {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                self.label[w] = 2;
                                self.labelend[w] = p ^ 1;
                            }
                        } else if self.label[self.inblossom[w]] == 1 {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == NONE || kslack < self.slack(self.bestedge[b]) {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w] == 0
                            && (self.bestedge[w] == NONE || kslack < self.slack(self.bestedge[w]))
                        {
                            self.bestedge[w] = k;
                        }
                    }
                }
                if augmented {
                    break;
                }

                let mut deltatype = -1;
                let mut delta = 0i64;
                let mut deltaedge = NONE;
                let mut deltablossom = NONE;
                for v in 0..n {
                    if self.label[self.inblossom[v]] == 0 && self.bestedge[v] != NONE {
                        let d = self.slack(self.bestedge[v]);
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                for b in 0..2 * n {
                    if self.blossomparent[b] == NONE && self.label[b] == 1 && self.bestedge[b] != NONE {
                        let d = self.slack(self.bestedge[b]) / 2;
                        if deltatype == -1 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE
                        && self.blossomparent[b] == NONE
                        && self.label[b] == 2
                        && (deltatype == -1 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == -1 {
                    deltatype = 1;
                    delta = self.dualvar[..n].iter().copied().min().unwrap().max(0);
                }
                for v in 0..n {
                    match self.label[self.inblossom[v]] {
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => {}
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE && self.blossomparent[b] == NONE {
                        match self.label[b] {
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => {}
                        }
                    }
                }
                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (mut i, j, _) = self.edges[deltaedge];
                        if self.label[self.inblossom[i]] == 0 {
                            i = j;
                        }
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let (i, _, _) = self.edges[deltaedge];
                        self.queue.push(i);
                    }
                    _ => self.expand_blossom(deltablossom, false),
                }
            }
            if !augmented {
                break;
            }
            for b in n..2 * n {
                if self.blossomparent[b] == NONE
                    && self.blossombase[b] != NONE
                    && self.label[b] == 1
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
        (0..n)
            .map(|v| match self.mate[v] {
                NONE => NONE,
                p => self.endpoint[p],
            })
            .collect()
    }
}

/// Outcome of the row/column parity preselection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoughTest {
    Pass,
    Fail,
}

/// Counts odd rows (horizontal edges at fixed height) and odd columns
/// (vertical edges at fixed abscissa); fails if either exceeds `L/2`.
pub fn rough_test(torus: &Torus, error: &Chain) -> Result<RoughTest> {
    if torus.dimension() != 2 || error.cell_dim() != 1 {
        return Err(Error::contract("rough_test expects a 2D edge chain"));
    }
    let l = torus.l();
    let mut rows = vec![false; l];
    let mut cols = vec![false; l];
    for e in error.iter_ones() {
        let (v, dir) = (e / 2, e % 2);
        if dir == 0 {
            rows[v % l] ^= true;
        } else {
            cols[v / l] ^= true;
        }
    }
    let odd_rows = rows.iter().filter(|&&b| b).count();
    let odd_cols = cols.iter().filter(|&&b| b).count();
    Ok(if 2 * odd_rows > l || 2 * odd_cols > l {
        RoughTest::Fail
    } else {
        RoughTest::Pass
    })
}

/// Edges of the x-then-y shortest path between two vertices of a 2D torus.
///
/// The walk starts at the vertex with the smaller index; each segment takes
/// the shorter way round, and the positive way when both are equal.
pub fn torus_path_2d(l: usize, a: usize, b: usize, out: &mut Vec<usize>) {
    let (a, b) = (a.min(b), a.max(b));
    let (ax, ay) = (a / l, a % l);
    let (bx, by) = (b / l, b % l);
    let dx = (bx + l - ax) % l;
    if 2 * dx <= l {
        for s in 0..dx {
            out.push((((ax + s) % l) * l + ay) * 2);
        }
    } else {
        for s in 0..l - dx {
            out.push((((ax + 2 * l - s - 1) % l) * l + ay) * 2);
        }
    }
    let dy = (by + l - ay) % l;
    if 2 * dy <= l {
        for s in 0..dy {
            out.push((bx * l + (ay + s) % l) * 2 + 1);
        }
    } else {
        for s in 0..l - dy {
            out.push((bx * l + (ay + 2 * l - s - 1) % l) * 2 + 1);
        }
    }
}

/// Realises a pairing of 2D vertices as an edge chain.
pub fn correction_from_pairing(torus: &Torus, vertices: &[usize], pairing: &Pairing) -> Chain {
    let l = torus.l();
    let mut out = Chain::zeros(torus, 1);
    let mut path = Vec::new();
    for &(i, j) in &pairing.pairs {
        path.clear();
        torus_path_2d(l, vertices[i], vertices[j], &mut path);
        for &e in &path {
            out.flip(e);
        }
    }
    out
}

fn coords_2d(l: usize, v: usize) -> Vec<i64> {
    vec![(v / l) as i64, (v % l) as i64]
}

/// MWM recovery for a 2D defect set given as a vertex chain.
pub fn mwm_recovery_2d(torus: &Torus, defects: &Chain) -> Result<Chain> {
    let l = torus.l();
    let verts = defects.ones();
    let pts: Vec<Vec<i64>> = verts.iter().map(|&v| coords_2d(l, v)).collect();
    let pairing = mwm(&pts, Metric::Torus { l })?;
    Ok(correction_from_pairing(torus, &verts, &pairing))
}

/// True if MWM on the perfect syndrome leaves a non-trivial cycle.
pub fn mwm_fails_2d(torus: &Torus, error: &Chain) -> Result<bool> {
    let s = torus.syndrome_of(error)?;
    let r = mwm_recovery_2d(torus, &s)?;
    let residual = error.xor(&r)?;
    Ok(!torus.homology_class(&residual)?.is_trivial())
}

/// Logical-failure oracle: rough test first, then MWM when it fails.
pub fn logical_failure_2d(torus: &Torus, error: &Chain) -> Result<bool> {
    match rough_test(torus, error)? {
        RoughTest::Pass => Ok(false),
        RoughTest::Fail => mwm_fails_2d(torus, error),
    }
}
