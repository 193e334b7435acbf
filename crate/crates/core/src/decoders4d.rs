//! Local decoders for the 4D toric code: Hastings' box decoder, Toom's rule
//! and the DKLP rule.
//!
//! All decoders act on an error face-chain together with an *effective*
//! syndrome (an edge-chain) that they keep up to date as they flip faces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Chain, Torus};
use crate::matching::{min_weight_perfect_matching, Metric};

const DIM: usize = 4;

/// Direction pairs of 4D faces in plane-group order (xy, xz, xw, yz, yw, zw).
pub const PLANE_GROUPS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HastingsConfig {
    /// Box side length.
    pub l: usize,
    /// Rounds (grid repositionings) per QEC cycle.
    pub m: usize,
}

impl Default for HastingsConfig {
    fn default() -> Self {
        HastingsConfig { l: 3, m: 5 }
    }
}

impl HastingsConfig {
    /// Boxes per axis on a lattice of side `big_l`.
    pub fn validate(&self, big_l: usize) -> Result<usize> {
        if self.l < 2 {
            return Err(Error::config("l", "box side must be at least 2"));
        }
        if self.m == 0 {
            return Err(Error::config("m", "need at least one round"));
        }
        if self.l + 1 > big_l {
            return Err(Error::config("l", format!("l + 1 = {} exceeds L = {big_l}", self.l + 1)));
        }
        Ok(big_l / (self.l + 1))
    }
}

/// Closed box `[anchor, anchor + l]^4` on the periodic lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub anchor: [usize; DIM],
    pub l: usize,
}

impl BoxRegion {
    pub fn face_count(&self) -> usize {
        6 * self.l * self.l * (self.l + 1) * (self.l + 1)
    }

    /// Box-local coordinates of vertex `v`, or `None` if it lies outside.
    pub fn local_coords(&self, torus: &Torus, v: usize) -> Option<[usize; DIM]> {
        let big_l = torus.l();
        let mut c = [0; DIM];
        torus.decode_vertex_into(v, &mut c);
        let mut u = [0; DIM];
        for i in 0..DIM {
            let t = (c[i] + big_l - self.anchor[i]) % big_l;
            if t > self.l {
                return None;
            }
            u[i] = t;
        }
        Some(u)
    }

    fn global_vertex(&self, torus: &Torus, u: &[usize; DIM]) -> usize {
        let c: Vec<usize> = (0..DIM).map(|i| self.anchor[i] + u[i]).collect();
        torus.vertex_index(&c)
    }

    /// Global indices of all faces inside the box.
    pub fn faces(&self, torus: &Torus, geom: &BoxGeometry) -> Vec<usize> {
        (0..geom.face_count()).map(|f| geom.global_face(torus, self, f as u32)).collect()
    }

    pub fn edges(&self, torus: &Torus, geom: &BoxGeometry) -> Vec<usize> {
        (0..geom.edge_count()).map(|e| geom.global_edge(torus, self, e as u32)).collect()
    }
}

/// A grid of `floor(L/(l+1))^4` pairwise disjoint boxes shifted by `offset`.
pub fn partition_boxes(big_l: usize, l: usize, offset: [usize; DIM]) -> Result<Vec<BoxRegion>> {
    if l + 1 > big_l {
        return Err(Error::contract(format!("box side {l} does not fit in L = {big_l}")));
    }
    if offset.iter().any(|&o| o >= big_l) {
        return Err(Error::contract("box offset must lie in [0, L)"));
    }
    let nb = big_l / (l + 1);
    let mut out = Vec::with_capacity(nb.pow(DIM as u32));
    for j in 0..nb.pow(DIM as u32) {
        let mut rest = j;
        let mut anchor = [0; DIM];
        for i in (0..DIM).rev() {
            anchor[i] = (offset[i] + (rest % nb) * (l + 1)) % big_l;
            rest /= nb;
        }
        out.push(BoxRegion { anchor, l });
    }
    Ok(out)
}

/// Incidence tables of a box of side `l` in local coordinates.
#[derive(Clone, Debug)]
pub struct BoxGeometry {
    l: usize,
    side: usize,
    edge_id: Vec<u32>,
    edges: Vec<(u32, u8)>,
    faces: Vec<(u32, u8)>,
    face_edges: Vec<[u32; 4]>,
    edge_faces: Vec<Vec<u32>>,
    edge_ends: Vec<[u32; 2]>,
    cube_faces: Vec<[u32; 6]>,
    face_cubes: Vec<Vec<u32>>,
}

const NONE: u32 = u32::MAX;

impl BoxGeometry {
    pub fn new(l: usize) -> Self {
        let side = l + 1;
        let nv = side.pow(DIM as u32);
        let mut g = BoxGeometry {
            l,
            side,
            edge_id: vec![NONE; nv * DIM],
            edges: Vec::new(),
            faces: Vec::new(),
            face_edges: Vec::new(),
            edge_faces: Vec::new(),
            edge_ends: Vec::new(),
            cube_faces: Vec::new(),
            face_cubes: Vec::new(),
        };
        for v in 0..nv {
            let u = g.coords(v as u32);
            for d in 0..DIM {
                if u[d] < l {
                    g.edge_id[v * DIM + d] = g.edges.len() as u32;
                    g.edges.push((v as u32, d as u8));
                    g.edge_ends.push([v as u32, g.shift(v as u32, d)]);
                }
            }
        }
        g.edge_faces = vec![Vec::new(); g.edges.len()];
        for v in 0..nv {
            let u = g.coords(v as u32);
            for (o, &(a, b)) in PLANE_GROUPS.iter().enumerate() {
                if u[a] < l && u[b] < l {
                    let f = g.faces.len() as u32;
                    g.faces.push((v as u32, o as u8));
                    let v = v as u32;
                    let es = [
                        g.edge(v, a),
                        g.edge(g.shift(v, b), a),
                        g.edge(v, b),
                        g.edge(g.shift(v, a), b),
                    ];
                    for &e in &es {
                        g.edge_faces[e as usize].push(f);
                    }
                    g.face_edges.push(es);
                }
            }
        }
        g.face_cubes = vec![Vec::new(); g.faces.len()];
        for v in 0..nv as u32 {
            let u = g.coords(v);
            for skip in (0..DIM).rev() {
                let dirs: Vec<usize> = (0..DIM).filter(|&d| d != skip).collect();
                if dirs.iter().any(|&d| u[d] >= l) {
                    continue;
                }
                let c = g.cube_faces.len() as u32;
                let mut fs = [0u32; 6];
                let mut n = 0;
                for (i, &third) in dirs.iter().enumerate() {
                    let (a, b) = match i {
                        0 => (dirs[1], dirs[2]),
                        1 => (dirs[0], dirs[2]),
                        _ => (dirs[0], dirs[1]),
                    };
                    for base in [v, g.shift(v, third)] {
                        let f = g.face(base, a, b).expect("cube face inside box");
                        fs[n] = f;
                        n += 1;
                        g.face_cubes[f as usize].push(c);
                    }
                }
                g.cube_faces.push(fs);
            }
        }
        g
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn vertex_count(&self) -> usize {
        self.side.pow(DIM as u32)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn coords(&self, v: u32) -> [usize; DIM] {
        let mut v = v as usize;
        let mut u = [0; DIM];
        for i in (0..DIM).rev() {
            u[i] = v % self.side;
            v /= self.side;
        }
        u
    }

    pub fn vertex(&self, u: &[usize; DIM]) -> u32 {
        u.iter().fold(0, |acc, &c| acc * self.side + c) as u32
    }

    fn shift(&self, v: u32, d: usize) -> u32 {
        v + self.side.pow((DIM - 1 - d) as u32) as u32
    }

    /// Local edge leaving local vertex `v` in direction `d`.
    pub fn edge(&self, v: u32, d: usize) -> u32 {
        self.edge_id[v as usize * DIM + d]
    }

    pub fn edge_ends(&self, e: u32) -> [u32; 2] {
        self.edge_ends[e as usize]
    }

    pub fn face_edges(&self, f: u32) -> &[u32; 4] {
        &self.face_edges[f as usize]
    }

    pub fn edge_faces(&self, e: u32) -> &[u32] {
        &self.edge_faces[e as usize]
    }

    /// Local face with base `v` spanning directions `a < b`.
    pub fn face(&self, v: u32, a: usize, b: usize) -> Option<u32> {
        let o = PLANE_GROUPS.iter().position(|&p| p == (a, b))? as u8;
        let e = self.edge(v, a);
        if e == NONE {
            return None;
        }
        self.edge_faces(e).iter().copied().find(|&f| self.faces[f as usize] == (v, o))
    }

    pub fn global_edge(&self, torus: &Torus, b: &BoxRegion, e: u32) -> usize {
        let (v, d) = self.edges[e as usize];
        let gv = b.global_vertex(torus, &self.coords(v));
        torus.cell_at(1, gv, torus.orientation_of_mask(1, 1 << d).unwrap())
    }

    pub fn global_face(&self, torus: &Torus, b: &BoxRegion, f: u32) -> usize {
        let (v, o) = self.faces[f as usize];
        let (a, c) = PLANE_GROUPS[o as usize];
        let gv = b.global_vertex(torus, &self.coords(v));
        torus.cell_at(2, gv, torus.orientation_of_mask(2, (1 << a) | (1 << c)).unwrap())
    }

    /// Local edge of global edge `idx` if it lies in box `b`.
    pub fn local_edge(&self, torus: &Torus, b: &BoxRegion, idx: usize) -> Option<u32> {
        let (v, o) = torus.split_cell(1, idx);
        let d = torus.orientation_mask(1, o).trailing_zeros() as usize;
        let u = b.local_coords(torus, v)?;
        let e = self.edge(self.vertex(&u), d);
        (e != NONE).then_some(e)
    }

    fn is_closed(&self, edges: &[u32]) -> bool {
        let mut deg = vec![0u8; self.vertex_count()];
        for &e in edges {
            for w in self.edge_ends(e) {
                deg[w as usize] ^= 1;
            }
        }
        deg.iter().all(|&d| d == 0)
    }

    /// Faces of the chain-homotopy cone over a closed edge set.
    ///
    /// Each edge `(p, d)` is joined to the corner `0` by the ladder of
    /// `{d, j}` faces (`j > d`) along the staircase from `(p_0..p_d, 0..)` to `p`.
    pub fn cone(&self, edges: &[u32]) -> Vec<u32> {
        let mut hit = vec![false; self.face_count()];
        for &e in edges {
            let (v, d) = self.edges[e as usize];
            let p = self.coords(v);
            let d = d as usize;
            let mut q = p;
            for c in q.iter_mut().skip(d + 1) {
                *c = 0;
            }
            for j in d + 1..DIM {
                for _ in 0..p[j] {
                    let f = self.face(self.vertex(&q), d, j).expect("cone face inside box");
                    hit[f as usize] ^= true;
                    q[j] += 1;
                }
            }
        }
        (0..self.face_count() as u32).filter(|&f| hit[f as usize]).collect()
    }

    pub fn cube_count(&self) -> usize {
        self.cube_faces.len()
    }

    /// Shrinks a surface without changing its boundary by flipping cubes that
    /// hold at least four of its faces, until no such cube is left.
    pub fn descend(&self, faces: &[u32]) -> Vec<u32> {
        let mut inside = vec![false; self.face_count()];
        for &f in faces {
            inside[f as usize] ^= true;
        }
        let overlap = |inside: &[bool], c: usize| self.cube_faces[c].iter().filter(|&&f| inside[f as usize]).count();
        let mut stack: Vec<u32> = (0..self.cube_count() as u32).rev().collect();
        let mut queued = vec![true; self.cube_count()];
        while let Some(c) = stack.pop() {
            queued[c as usize] = false;
            if overlap(&inside, c as usize) < 4 {
                continue;
            }
            for &f in &self.cube_faces[c as usize] {
                inside[f as usize] ^= true;
                for &other in &self.face_cubes[f as usize] {
                    if !queued[other as usize] {
                        queued[other as usize] = true;
                        stack.push(other);
                    }
                }
            }
        }
        (0..self.face_count() as u32).filter(|&f| inside[f as usize]).collect()
    }

    /// XOR of the boundaries of `faces`, as sorted local edges.
    pub fn boundary(&self, faces: &[u32]) -> Vec<u32> {
        let mut hit = vec![false; self.edge_count()];
        for &f in faces {
            for &e in self.face_edges(f) {
                hit[e as usize] ^= true;
            }
        }
        (0..self.edge_count() as u32).filter(|&e| hit[e as usize]).collect()
    }
}

/// Result of a minimum-surface search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Surface {
    /// Sorted local face indices.
    pub faces: Vec<u32>,
    /// False if a node budget cut the search short.
    pub optimal: bool,
}

/// Default node budget of one branch-and-bound search.
pub const SURFACE_NODE_BUDGET: usize = 20_000;

struct SparseSet {
    pos: Vec<u32>,
    items: Vec<u32>,
}

impl SparseSet {
    fn new(n: usize) -> Self {
        SparseSet { pos: vec![NONE; n], items: Vec::new() }
    }

    fn contains(&self, x: u32) -> bool {
        self.pos[x as usize] != NONE
    }

    fn toggle(&mut self, x: u32) {
        let p = self.pos[x as usize];
        if p == NONE {
            self.pos[x as usize] = self.items.len() as u32;
            self.items.push(x);
        } else {
            let last = self.items.pop().unwrap();
            if last != x {
                self.items[p as usize] = last;
                self.pos[last as usize] = p;
            }
            self.pos[x as usize] = NONE;
        }
    }
}

const UNDECIDED: u8 = 0;
const INCLUDED: u8 = 1;
const EXCLUDED: u8 = 2;

struct Search<'a> {
    g: &'a BoxGeometry,
    status: Vec<u8>,
    resid: SparseSet,
    chosen: Vec<u32>,
    best: Option<Vec<u32>>,
    best_len: usize,
    /// Keep exploring ties to find the lexicographically smallest optimum.
    lexicographic: bool,
    nodes: usize,
    budget: usize,
    exhausted: bool,
}

impl<'a> Search<'a> {
    fn new(g: &'a BoxGeometry, target: &[u32], incumbent: Vec<u32>, lexicographic: bool, budget: usize) -> Self {
        let mut resid = SparseSet::new(g.edge_count());
        for &e in target {
            resid.toggle(e);
        }
        Search {
            g,
            status: vec![UNDECIDED; g.face_count()],
            resid,
            chosen: Vec::new(),
            best_len: incumbent.len(),
            best: Some(incumbent),
            lexicographic,
            nodes: 0,
            budget,
            exhausted: false,
        }
    }

    fn cover(&self, f: u32) -> usize {
        self.g.face_edges(f).iter().filter(|&&e| self.resid.contains(e)).count()
    }

    fn toggle_face(&mut self, f: u32) {
        for &e in self.g.face_edges(f) {
            self.resid.toggle(e);
        }
    }

    fn prune(&self, lower: usize) -> bool {
        if self.lexicographic {
            lower > self.best_len
        } else {
            lower >= self.best_len
        }
    }

    fn run(&mut self) {
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        if self.resid.items.is_empty() {
            let mut cand = self.chosen.clone();
            cand.sort_unstable();
            let better = match &self.best {
                None => true,
                Some(b) => cand.len() < b.len() || (cand.len() == b.len() && self.lexicographic && cand < *b),
            };
            if better {
                self.best_len = cand.len();
                self.best = Some(cand);
            }
            return;
        }
        // Each residual edge needs some undecided face; a face covers at most
        // `cover(f)` residual edges, so sum 1/max-cover bounds the faces still needed.
        let mut sum12 = 0usize;
        let mut branch: Option<(usize, u32)> = None;
        for &e in &self.resid.items {
            let mut count = 0;
            let mut cmax = 0;
            for &f in self.g.edge_faces(e) {
                if self.status[f as usize] == UNDECIDED {
                    count += 1;
                    cmax = cmax.max(self.cover(f));
                }
            }
            if count == 0 {
                return;
            }
            sum12 += 12 / cmax;
            if branch.map_or(true, |(c, be)| (count, e) < (c, be)) {
                branch = Some((count, e));
            }
        }
        let lower = self.chosen.len() + sum12.div_ceil(12);
        if self.prune(lower) {
            return;
        }
        let (_, e) = branch.unwrap();
        let cands: Vec<u32> = self
            .g
            .edge_faces(e)
            .iter()
            .copied()
            .filter(|&f| self.status[f as usize] == UNDECIDED)
            .collect();
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by_key(|&j| (std::cmp::Reverse(self.cover(cands[j])), cands[j]));
        for j in order {
            for &f in &cands[..j] {
                self.status[f as usize] = EXCLUDED;
            }
            let f = cands[j];
            self.status[f as usize] = INCLUDED;
            self.toggle_face(f);
            self.chosen.push(f);
            self.run();
            self.chosen.pop();
            self.toggle_face(f);
            self.status[f as usize] = UNDECIDED;
            for &f in &cands[..j] {
                self.status[f as usize] = UNDECIDED;
            }
            if self.exhausted {
                return;
            }
        }
    }
}

/// Connected components of an edge set, grouped by shared vertices.
fn edge_components(g: &BoxGeometry, edges: &[u32]) -> Vec<Vec<u32>> {
    let mut uf = UnionFind::new(g.vertex_count());
    for &e in edges {
        let [a, b] = g.edge_ends(e);
        uf.union(a as usize, b as usize);
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<u32>> = Default::default();
    for &e in edges {
        let root = uf.find(g.edge_ends(e)[0] as usize);
        groups.entry(root).or_default().push(e);
    }
    let mut out: Vec<Vec<u32>> = groups.into_values().collect();
    out.sort_by_key(|c| c[0]);
    out
}

/// Smallest face set of the box whose boundary equals the closed edge set `target`.
///
/// Each connected loop component is solved by branch and bound (lexicographic
/// tie-break) starting from its cone; the union is then offered to a global
/// search that only accepts strictly smaller surfaces.
pub fn min_surface(g: &BoxGeometry, target: &[u32]) -> Result<Surface> {
    min_surface_with_budget(g, target, SURFACE_NODE_BUDGET)
}

pub fn min_surface_with_budget(g: &BoxGeometry, target: &[u32], budget: usize) -> Result<Surface> {
    let mut target: Vec<u32> = target.to_vec();
    target.sort_unstable();
    target.dedup();
    if target.iter().any(|&e| e as usize >= g.edge_count()) {
        return Err(Error::contract("edge outside the box"));
    }
    if !g.is_closed(&target) {
        return Err(Error::contract("S_correct has odd incidence at some box vertex"));
    }
    if target.is_empty() {
        return Ok(Surface { faces: Vec::new(), optimal: true });
    }
    let comps = edge_components(g, &target);
    let mut optimal = true;
    let mut union = vec![false; g.face_count()];
    for comp in &comps {
        let mut s = Search::new(g, comp, g.descend(&g.cone(comp)), true, budget);
        s.run();
        optimal &= !s.exhausted;
        for f in s.best.unwrap() {
            union[f as usize] ^= true;
        }
    }
    let mut faces: Vec<u32> = (0..g.face_count() as u32).filter(|&f| union[f as usize]).collect();
    if comps.len() > 1 {
        let joined = g.descend(&faces);
        if joined.len() < faces.len() {
            faces = joined;
        }
        let mut s = Search::new(g, &target, faces.clone(), false, budget);
        s.run();
        optimal &= !s.exhausted;
        faces = s.best.unwrap();
    }
    Ok(Surface { faces, optimal })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// `|d|^2` times the squared distance from `p` to the line through `u` with direction `d`.
fn deviation(p: &[i64; DIM], u: &[i64; DIM], d: &[i64; DIM]) -> i64 {
    let mut pp = 0;
    let mut pd = 0;
    let mut dd = 0;
    for i in 0..DIM {
        let r = p[i] - u[i];
        pp += r * r;
        pd += r * d[i];
        dd += d[i] * d[i];
    }
    pp * dd - pd * pd
}

/// Total deviation of a vertex path, in the units of [`deviation`].
pub fn path_deviation(u: [i64; DIM], v: [i64; DIM], path: &[[i64; DIM]]) -> i64 {
    let d: [i64; DIM] = std::array::from_fn(|i| v[i] - u[i]);
    path.iter().map(|p| deviation(p, &u, &d)).sum()
}

struct PathTable {
    ext: [usize; DIM],
    sign: [i64; DIM],
    cost: Vec<i64>,
    count: Vec<u64>,
}

impl PathTable {
    fn new(u: [i64; DIM], v: [i64; DIM]) -> Self {
        let d: [i64; DIM] = std::array::from_fn(|i| v[i] - u[i]);
        let ext: [usize; DIM] = std::array::from_fn(|i| d[i].unsigned_abs() as usize + 1);
        let sign: [i64; DIM] = std::array::from_fn(|i| d[i].signum());
        let n: usize = ext.iter().product();
        let mut cost = vec![i64::MAX; n];
        let mut count = vec![0u64; n];
        for s in 0..n {
            let k = Self::split(&ext, s);
            let p: [i64; DIM] = std::array::from_fn(|i| u[i] + sign[i] * k[i] as i64);
            let here = deviation(&p, &u, &d);
            if s == 0 {
                cost[0] = here;
                count[0] = 1;
                continue;
            }
            for i in 0..DIM {
                if k[i] > 0 {
                    let prev = s - Self::stride(&ext, i);
                    let c = cost[prev] + here;
                    if c < cost[s] {
                        cost[s] = c;
                        count[s] = count[prev];
                    } else if c == cost[s] {
                        count[s] = count[s].saturating_add(count[prev]);
                    }
                }
            }
        }
        PathTable { ext, sign, cost, count }
    }

    fn stride(ext: &[usize; DIM], i: usize) -> usize {
        ext[i + 1..].iter().product()
    }

    fn split(ext: &[usize; DIM], mut s: usize) -> [usize; DIM] {
        let mut k = [0; DIM];
        for i in (0..DIM).rev() {
            k[i] = s % ext[i];
            s /= ext[i];
        }
        k
    }
}

/// Number of minimal-length monotone paths from `u` to `v` with least deviation.
pub fn optimal_path_count(u: [i64; DIM], v: [i64; DIM]) -> u64 {
    let t = PathTable::new(u, v);
    *t.count.last().unwrap()
}

/// A shortest lattice path from `u` to `v` (as its vertex sequence) that
/// deviates least from the straight segment; ties are broken uniformly at random.
pub fn least_deviating_path<R: Rng + ?Sized>(u: [i64; DIM], v: [i64; DIM], rng: &mut R) -> Vec<[i64; DIM]> {
    let t = PathTable::new(u, v);
    let mut s = t.cost.len() - 1;
    let mut rev = Vec::new();
    loop {
        let k = PathTable::split(&t.ext, s);
        rev.push(std::array::from_fn(|i| u[i] + t.sign[i] * k[i] as i64));
        if s == 0 {
            break;
        }
        let p: [i64; DIM] = std::array::from_fn(|i| u[i] + t.sign[i] * k[i] as i64);
        let d: [i64; DIM] = std::array::from_fn(|i| v[i] - u[i]);
        let here = deviation(&p, &u, &d);
        let mut pick = rng.random_range(0..t.count[s]);
        let mut next = None;
        for i in 0..DIM {
            if k[i] > 0 {
                let prev = s - PathTable::stride(&t.ext, i);
                if t.cost[prev] + here == t.cost[s] {
                    if pick < t.count[prev] {
                        next = Some(prev);
                        break;
                    }
                    pick -= t.count[prev];
                }
            }
        }
        s = next.expect("optimal predecessor");
    }
    rev.reverse();
    rev
}

/// Working set of one box decode, in box-local indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoxDecodeState {
    /// Syndrome edges inside the box.
    pub restricted: Vec<u32>,
    /// Box vertices with odd incidence in `restricted`.
    pub intersection_vertices: Vec<u32>,
    /// Edges of the matching strings.
    pub matching_strings: Vec<u32>,
    /// `matching_strings XOR restricted`, a set of closed loops.
    pub closed_loops: Vec<u32>,
    /// Minimum surface bounded by `closed_loops`.
    pub correction: Vec<u32>,
    pub optimal: bool,
}

fn odd_vertices(g: &BoxGeometry, edges: &[u32]) -> Vec<u32> {
    let mut deg = vec![0u8; g.vertex_count()];
    for &e in edges {
        for w in g.edge_ends(e) {
            deg[w as usize] ^= 1;
        }
    }
    (0..g.vertex_count() as u32).filter(|&w| deg[w as usize] == 1).collect()
}

fn xor_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    let mut res = Vec::with_capacity(out.len());
    let mut i = 0;
    while i < out.len() {
        if i + 1 < out.len() && out[i] == out[i + 1] {
            i += 2;
        } else {
            res.push(out[i]);
            i += 1;
        }
    }
    res
}

/// Matching weight between box vertices: scaled Euclidean distance, then a
/// unit penalty when the two endpoints are not joined by the restricted syndrome.
fn pair_weight(g: &BoxGeometry, a: u32, b: u32, same_component: bool) -> i64 {
    let pa: Vec<i64> = g.coords(a).iter().map(|&c| c as i64).collect();
    let pb: Vec<i64> = g.coords(b).iter().map(|&c| c as i64).collect();
    Metric::Euclidean.distance(&pa, &pb) * 1024 + i64::from(!same_component)
}

/// Decodes one box from its restricted syndrome (local edges).
pub fn decode_box_local<R: Rng + ?Sized>(g: &BoxGeometry, restricted: &[u32], rng: &mut R) -> Result<BoxDecodeState> {
    let mut restricted = restricted.to_vec();
    restricted.sort_unstable();
    restricted.dedup();
    let verts = odd_vertices(g, &restricted);

    let mut uf = UnionFind::new(g.vertex_count());
    for &e in &restricted {
        let [a, b] = g.edge_ends(e);
        uf.union(a as usize, b as usize);
    }
    let roots: Vec<usize> = verts.iter().map(|&w| uf.find(w as usize)).collect();
    let pairs = min_weight_perfect_matching(verts.len(), |i, j| {
        pair_weight(g, verts[i], verts[j], roots[i] == roots[j])
    })?;

    let mut strings = vec![false; g.edge_count()];
    for &(i, j) in &pairs {
        let a = g.coords(verts[i]).map(|c| c as i64);
        let b = g.coords(verts[j]).map(|c| c as i64);
        let path = least_deviating_path(a, b, rng);
        for w in path.windows(2) {
            let (lo, d) = step_edge(&w[0], &w[1]);
            let lo: [usize; DIM] = lo.map(|c| c as usize);
            let e = g.edge(g.vertex(&lo), d);
            strings[e as usize] ^= true;
        }
    }
    let matching_strings: Vec<u32> = (0..g.edge_count() as u32).filter(|&e| strings[e as usize]).collect();
    let closed_loops = xor_sorted(&matching_strings, &restricted);
    let surface = min_surface(g, &closed_loops)?;
    Ok(BoxDecodeState {
        restricted,
        intersection_vertices: verts,
        matching_strings,
        closed_loops,
        correction: surface.faces,
        optimal: surface.optimal,
    })
}

fn step_edge(a: &[i64; DIM], b: &[i64; DIM]) -> ([i64; DIM], usize) {
    let d = (0..DIM).find(|&i| a[i] != b[i]).unwrap();
    if a[d] < b[d] {
        (*a, d)
    } else {
        (*b, d)
    }
}

/// Vertices of box `b` (global indices, sorted) with odd incidence in the syndrome restricted to the box.
pub fn box_intersection_vertices(torus: &Torus, syndrome: &Chain, b: &BoxRegion) -> Vec<usize> {
    let g = BoxGeometry::new(b.l);
    let restricted: Vec<u32> = (0..g.edge_count() as u32)
        .filter(|&e| syndrome.get(g.global_edge(torus, b, e)))
        .collect();
    let mut out: Vec<usize> = odd_vertices(&g, &restricted)
        .into_iter()
        .map(|w| b.global_vertex(torus, &g.coords(w)))
        .collect();
    out.sort_unstable();
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HastingsStats {
    pub boxes_decoded: u64,
    /// Surfaces returned without an optimality proof.
    pub inexact_surfaces: u64,
}

/// Hastings' box decoder.
#[derive(Clone, Debug)]
pub struct HastingsDecoder {
    cfg: HastingsConfig,
    geom: BoxGeometry,
    big_l: usize,
    nb: usize,
    pub stats: HastingsStats,
}

impl HastingsDecoder {
    pub fn new(torus: &Torus, cfg: HastingsConfig) -> Result<Self> {
        if torus.dimension() != 4 {
            return Err(Error::contract("the Hastings decoder runs on the 4D lattice"));
        }
        let nb = cfg.validate(torus.l())?;
        Ok(HastingsDecoder {
            cfg,
            geom: BoxGeometry::new(cfg.l),
            big_l: torus.l(),
            nb,
            stats: HastingsStats::default(),
        })
    }

    pub fn config(&self) -> &HastingsConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geom
    }

    /// `m` rounds with uniformly random grid offsets.
    pub fn cycle<R: Rng + ?Sized>(&mut self, torus: &Torus, error: &mut Chain, syndrome: &mut Chain, rng: &mut R) -> Result<usize> {
        let mut flips = 0;
        for _ in 0..self.cfg.m {
            let offset: [usize; DIM] = std::array::from_fn(|_| rng.random_range(0..self.big_l));
            flips += self.round(torus, offset, error, syndrome, rng)?;
        }
        Ok(flips)
    }

    /// One round on the box grid at `offset`; returns the number of faces flipped.
    pub fn round<R: Rng + ?Sized>(
        &mut self,
        torus: &Torus,
        offset: [usize; DIM],
        error: &mut Chain,
        syndrome: &mut Chain,
        rng: &mut R,
    ) -> Result<usize> {
        let states = self.round_states(torus, offset, syndrome, rng)?;
        let boxes = partition_boxes(self.big_l, self.cfg.l, offset)?;
        let mut flips = 0;
        for (bi, st) in states {
            for &f in &st.correction {
                let gf = self.geom.global_face(torus, &boxes[bi], f);
                error.flip(gf);
                torus.toggle_boundary(2, gf, syndrome);
                flips += 1;
            }
        }
        Ok(flips)
    }

    /// Decode states of every box with a non-empty restricted syndrome, in box order.
    pub fn round_states<R: Rng + ?Sized>(
        &mut self,
        torus: &Torus,
        offset: [usize; DIM],
        syndrome: &Chain,
        rng: &mut R,
    ) -> Result<Vec<(usize, BoxDecodeState)>> {
        let l = self.cfg.l;
        let nb = self.nb;
        let big_l = self.big_l;
        let mut bins: Vec<Vec<u32>> = vec![Vec::new(); nb.pow(DIM as u32)];
        let mut c = [0usize; DIM];
        'edges: for idx in syndrome.iter_ones() {
            let (v, o) = torus.split_cell(1, idx);
            let d = torus.orientation_mask(1, o).trailing_zeros() as usize;
            torus.decode_vertex_into(v, &mut c);
            let mut bi = 0;
            let mut u = [0usize; DIM];
            for i in 0..DIM {
                let t = (c[i] + big_l - offset[i]) % big_l;
                let j = t / (l + 1);
                if j >= nb {
                    continue 'edges;
                }
                bi = bi * nb + j;
                u[i] = t % (l + 1);
            }
            if u[d] == l {
                continue;
            }
            bins[bi].push(self.geom.edge(self.geom.vertex(&u), d));
        }
        let mut out = Vec::new();
        for (bi, restricted) in bins.into_iter().enumerate() {
            if restricted.is_empty() {
                continue;
            }
            let mut box_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
            let st = decode_box_local(&self.geom, &restricted, &mut box_rng)?;
            self.stats.boxes_decoded += 1;
            self.stats.inexact_surfaces += u64::from(!st.optimal);
            out.push((bi, st));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepRule {
    Toom,
    Dklp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rule: SweepRule,
    pub repeats_per_plane: usize,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats_per_plane == 0 {
            return Err(Error::config("repeats_per_plane", "must be at least 1"));
        }
        Ok(())
    }
}

fn face_orientation(torus: &Torus, group: usize) -> usize {
    let (a, b) = PLANE_GROUPS[group];
    torus.orientation_of_mask(2, (1 << a) | (1 << b)).unwrap()
}

fn edge_orientation(torus: &Torus, d: usize) -> usize {
    torus.orientation_of_mask(1, 1 << d).unwrap()
}

/// Faces of plane group `group` whose North and East edges are both defects.
///
/// For the face at `v` spanning `(mu, nu)` the North edge is the `mu`-edge at
/// `v + e_nu` and the East edge the `nu`-edge at `v + e_mu`; they meet at the
/// face corner with the largest coordinates.
pub fn toom_group_flips(torus: &Torus, syndrome: &Chain, group: usize) -> Vec<usize> {
    let (mu, nu) = PLANE_GROUPS[group];
    let (omu, onu) = (edge_orientation(torus, mu), edge_orientation(torus, nu));
    let of = face_orientation(torus, group);
    let mut out = Vec::new();
    for idx in syndrome.iter_ones() {
        let (w, o) = torus.split_cell(1, idx);
        if o != omu {
            continue;
        }
        let v = torus.step_vertex(w, nu, -1);
        let east = torus.cell_at(1, torus.step_vertex(v, mu, 1), onu);
        if syndrome.get(east) {
            out.push(torus.cell_at(2, v, of));
        }
    }
    out.sort_unstable();
    out
}

/// `repeats_per_plane` passes of Toom's rule over the six plane groups.
pub fn toom_sweep(torus: &Torus, cfg: &SweepConfig, error: &mut Chain, syndrome: &mut Chain) -> usize {
    let mut flips = 0;
    for _ in 0..cfg.repeats_per_plane {
        for group in 0..PLANE_GROUPS.len() {
            for f in toom_group_flips(torus, syndrome, group) {
                error.flip(f);
                torus.toggle_boundary(2, f, syndrome);
                flips += 1;
            }
        }
    }
    flips
}

/// Number of checkerboard subsets per plane: 2 for even `L`, 3 for odd `L`.
pub fn dklp_subset_count(big_l: usize) -> usize {
    if big_l % 2 == 0 {
        2
    } else {
        3
    }
}

/// Subset of the face with in-plane coordinates `(a, b)`. No two faces of a
/// subset in the same plane share an edge, including across the periodic seam.
pub fn dklp_subset(big_l: usize, a: usize, b: usize) -> usize {
    if big_l % 2 == 0 {
        (a + b) % 2
    } else {
        let c = |x: usize| if x == big_l - 1 { 2 } else { x % 2 };
        (c(a) + c(b)) % 3
    }
}

fn face_defects(torus: &Torus, syndrome: &Chain, f: usize) -> usize {
    torus.boundary_of(2, f).iter().filter(|&&e| syndrome.get(e as usize)).count()
}

/// One simultaneous DKLP update of checkerboard subset `subset` of plane group `group`.
pub fn dklp_subset_update<R: Rng + ?Sized>(
    torus: &Torus,
    error: &mut Chain,
    syndrome: &mut Chain,
    group: usize,
    subset: usize,
    rng: &mut R,
) -> usize {
    let (mu, nu) = PLANE_GROUPS[group];
    let (omu, onu) = (edge_orientation(torus, mu), edge_orientation(torus, nu));
    let of = face_orientation(torus, group);
    let big_l = torus.l();
    let mut cands = Vec::new();
    for idx in syndrome.iter_ones() {
        let (w, o) = torus.split_cell(1, idx);
        let back = if o == omu {
            nu
        } else if o == onu {
            mu
        } else {
            continue;
        };
        cands.push(torus.cell_at(2, w, of));
        cands.push(torus.cell_at(2, torus.step_vertex(w, back, -1), of));
    }
    cands.sort_unstable();
    cands.dedup();
    let mut coords = [0usize; DIM];
    let mut chosen = Vec::new();
    for f in cands {
        let (v, _) = torus.split_cell(2, f);
        torus.decode_vertex_into(v, &mut coords);
        if dklp_subset(big_l, coords[mu], coords[nu]) != subset {
            continue;
        }
        let k = face_defects(torus, syndrome, f);
        if k >= 3 || (k == 2 && rng.random::<bool>()) {
            chosen.push(f);
        }
    }
    for &f in &chosen {
        error.flip(f);
        torus.toggle_boundary(2, f, syndrome);
    }
    chosen.len()
}

/// `repeats_per_plane` passes of the DKLP rule over the six plane groups and their subsets.
pub fn dklp_sweep<R: Rng + ?Sized>(torus: &Torus, cfg: &SweepConfig, error: &mut Chain, syndrome: &mut Chain, rng: &mut R) -> usize {
    let mut flips = 0;
    for _ in 0..cfg.repeats_per_plane {
        for group in 0..PLANE_GROUPS.len() {
            for subset in 0..dklp_subset_count(torus.l()) {
                flips += dklp_subset_update(torus, error, syndrome, group, subset, rng);
            }
        }
    }
    flips
}

/// Any of the three 4D decoders.
#[derive(Clone, Debug)]
pub enum Decoder4d {
    Hastings(HastingsDecoder),
    Sweep(SweepConfig),
}

impl Decoder4d {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Decoder4d::Sweep(SweepConfig { rule: SweepRule::Toom, .. }))
    }

    /// One QEC cycle of decoding against the effective syndrome.
    pub fn cycle<R: Rng + ?Sized>(&mut self, torus: &Torus, error: &mut Chain, syndrome: &mut Chain, rng: &mut R) -> Result<usize> {
        match self {
            Decoder4d::Hastings(h) => h.cycle(torus, error, syndrome, rng),
            Decoder4d::Sweep(cfg) => Ok(match cfg.rule {
                SweepRule::Toom => toom_sweep(torus, cfg, error, syndrome),
                SweepRule::Dklp => dklp_sweep(torus, cfg, error, syndrome, rng),
            }),
        }
    }
}
