//! Periodic cubic lattices in 2 and 4 dimensions.
//!
//! Cells of dimension `k` are addressed by a base vertex and a set of `k`
//! directions. The dense index of a cell is `vertex_index * C(d, k) + o`,
//! where the vertex index is row-major with coordinate 0 slowest and `o`
//! is the position of the direction set in lexicographic order. In 4D the
//! face orientations therefore come out as xy, xz, xw, yz, yw, zw.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusDims {
    pub dimension: usize,
    #[serde(rename = "L")]
    pub l: usize,
}

impl TorusDims {
    pub fn new(dimension: usize, l: usize) -> Result<Self> {
        if dimension != 2 && dimension != 4 {
            return Err(Error::config("dimension", "must be 2 or 4"));
        }
        if l < 2 {
            return Err(Error::config("L", "must be at least 2"));
        }
        Ok(TorusDims { dimension, l })
    }

    /// Dimension of the cells that carry qubits (edges in 2D, faces in 4D).
    pub fn qubit_dim(&self) -> usize {
        self.dimension / 2
    }
}

/// A cell given by its base vertex and strictly increasing direction list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub base: Vec<usize>,
    pub dirs: Vec<usize>,
}

impl CellIndex {
    pub fn new(base: Vec<usize>, dirs: Vec<usize>) -> Self {
        CellIndex { base, dirs }
    }

    pub fn cell_dim(&self) -> usize {
        self.dirs.len()
    }
}

#[derive(Clone, Debug)]
struct CellTable {
    /// Direction bitmasks in lexicographic order of the sorted direction lists.
    orients: Vec<u8>,
    /// Inverse of `orients`, indexed by bitmask.
    orient_pos: [u8; 16],
    count: usize,
    boundary: Vec<u32>,
    coboundary: Vec<u32>,
    bnd_width: usize,
    cob_width: usize,
}

/// Geometry and incidence tables for an `L^d` periodic lattice.
#[derive(Clone, Debug)]
pub struct Torus {
    dims: TorusDims,
    nverts: usize,
    tables: Vec<CellTable>,
}

fn subsets_lex(d: usize, k: usize) -> Vec<u8> {
    fn rec(start: usize, d: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<u8>) {
        if cur.len() == k {
            out.push(cur.iter().fold(0u8, |m, &x| m | (1 << x)));
            return;
        }
        for x in start..d {
            cur.push(x);
            rec(x + 1, d, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, d, k, &mut Vec::new(), &mut out);
    out
}

impl Torus {
    pub fn new(dimension: usize, l: usize) -> Result<Self> {
        let dims = TorusDims::new(dimension, l)?;
        let d = dimension;
        let nverts = l.pow(d as u32);
        let mut tables: Vec<CellTable> = (0..=d)
            .map(|k| {
                let orients = subsets_lex(d, k);
                let mut orient_pos = [u8::MAX; 16];
                for (i, &m) in orients.iter().enumerate() {
                    orient_pos[m as usize] = i as u8;
                }
                CellTable {
                    count: nverts * orients.len(),
                    orients,
                    orient_pos,
                    boundary: Vec::new(),
                    coboundary: Vec::new(),
                    bnd_width: 2 * k,
                    cob_width: 2 * (d - k),
                }
            })
            .collect();

        let mut torus = Torus {
            dims,
            nverts,
            tables: Vec::new(),
        };
        let mut coords = vec![0usize; d];
        for k in 0..=d {
            let t = &tables[k];
            let norient = t.orients.len();
            let mut bnd = Vec::with_capacity(t.count * t.bnd_width);
            let mut cob = Vec::with_capacity(t.count * t.cob_width);
            for v in 0..nverts {
                torus.decode_vertex_into(v, &mut coords);
                for oi in 0..norient {
                    let mask = t.orients[oi];
                    for di in 0..d {
                        if mask & (1 << di) == 0 {
                            continue;
                        }
                        let lower = mask & !(1 << di);
                        let lo_pos = tables[k - 1].orient_pos[lower as usize] as usize;
                        let lo_n = tables[k - 1].orients.len();
                        let shifted = torus.shift_vertex(v, &coords, di, 1);
                        bnd.push((v * lo_n + lo_pos) as u32);
                        bnd.push((shifted * lo_n + lo_pos) as u32);
                    }
                    if k < d {
                        for di in 0..d {
                            if mask & (1 << di) != 0 {
                                continue;
                            }
                            let upper = mask | (1 << di);
                            let up_pos = tables[k + 1].orient_pos[upper as usize] as usize;
                            let up_n = tables[k + 1].orients.len();
                            let shifted = torus.shift_vertex(v, &coords, di, -1);
                            cob.push((v * up_n + up_pos) as u32);
                            cob.push((shifted * up_n + up_pos) as u32);
                        }
                    }
                }
            }
            tables[k].boundary = bnd;
            tables[k].coboundary = cob;
        }
        torus.tables = tables;
        Ok(torus)
    }

    pub fn dims(&self) -> TorusDims {
        self.dims
    }

    pub fn dimension(&self) -> usize {
        self.dims.dimension
    }

    pub fn l(&self) -> usize {
        self.dims.l
    }

    pub fn qubit_dim(&self) -> usize {
        self.dims.qubit_dim()
    }

    pub fn vertex_count(&self) -> usize {
        self.nverts
    }

    /// Number of cells of dimension `k`.
    pub fn cell_count(&self, k: usize) -> usize {
        self.tables[k].count
    }

    /// Number of orientations of `k`-cells, `C(d, k)`.
    pub fn orientation_count(&self, k: usize) -> usize {
        self.tables[k].orients.len()
    }

    /// Direction bitmask of orientation `o` of `k`-cells.
    pub fn orientation_mask(&self, k: usize, o: usize) -> u8 {
        self.tables[k].orients[o]
    }

    /// Orientation position of a direction bitmask among `k`-cells.
    pub fn orientation_of_mask(&self, k: usize, mask: u8) -> Option<usize> {
        match self.tables[k].orient_pos[mask as usize] {
            u8::MAX => None,
            p => Some(p as usize),
        }
    }

    pub fn vertex_index(&self, coords: &[usize]) -> usize {
        let l = self.dims.l;
        coords.iter().fold(0, |acc, &c| acc * l + (c % l))
    }

    pub fn decode_vertex(&self, v: usize) -> Vec<usize> {
        let mut c = vec![0; self.dims.dimension];
        self.decode_vertex_into(v, &mut c);
        c
    }

    pub fn decode_vertex_into(&self, mut v: usize, out: &mut [usize]) {
        let l = self.dims.l;
        for slot in out.iter_mut().rev() {
            *slot = v % l;
            v /= l;
        }
    }

    fn shift_vertex(&self, v: usize, coords: &[usize], dir: usize, delta: isize) -> usize {
        let l = self.dims.l;
        let d = self.dims.dimension;
        let stride = l.pow((d - 1 - dir) as u32);
        let c = coords[dir];
        let nc = (c as isize + delta).rem_euclid(l as isize) as usize;
        v - c * stride + nc * stride
    }

    /// Vertex reached from `v` by moving `delta` steps along `dir`.
    pub fn step_vertex(&self, v: usize, dir: usize, delta: isize) -> usize {
        let l = self.dims.l;
        let d = self.dims.dimension;
        let stride = l.pow((d - 1 - dir) as u32);
        let c = (v / stride) % l;
        let nc = (c as isize + delta).rem_euclid(l as isize) as usize;
        v - c * stride + nc * stride
    }

    /// Dense index of the `k`-cell with base vertex `v` and orientation position `o`.
    #[inline]
    pub fn cell_at(&self, k: usize, v: usize, o: usize) -> usize {
        v * self.tables[k].orients.len() + o
    }

    /// Splits a dense index into (base vertex, orientation position).
    #[inline]
    pub fn split_cell(&self, k: usize, idx: usize) -> (usize, usize) {
        let n = self.tables[k].orients.len();
        (idx / n, idx % n)
    }

    pub fn index_of(&self, cell: &CellIndex) -> Result<usize> {
        let d = self.dims.dimension;
        let k = cell.dirs.len();
        if cell.base.len() != d {
            return Err(Error::contract(format!(
                "cell base has {} coordinates, lattice has dimension {d}",
                cell.base.len()
            )));
        }
        if k > d || cell.dirs.windows(2).any(|w| w[0] >= w[1]) || cell.dirs.iter().any(|&x| x >= d) {
            return Err(Error::contract("cell directions must be strictly increasing and < dimension"));
        }
        if cell.base.iter().any(|&c| c >= self.dims.l) {
            return Err(Error::contract("cell coordinates must lie in [0, L)"));
        }
        let mask = cell.dirs.iter().fold(0u8, |m, &x| m | (1 << x));
        let o = self.tables[k].orient_pos[mask as usize] as usize;
        Ok(self.cell_at(k, self.vertex_index(&cell.base), o))
    }

    pub fn cell_index(&self, k: usize, idx: usize) -> CellIndex {
        let (v, o) = self.split_cell(k, idx);
        let mask = self.tables[k].orients[o];
        let dirs = (0..self.dims.dimension).filter(|&x| mask & (1 << x) != 0).collect();
        CellIndex {
            base: self.decode_vertex(v),
            dirs,
        }
    }

    /// Boundary `(k-1)`-cells of the `k`-cell `idx`, two per direction.
    #[inline]
    pub fn boundary_of(&self, k: usize, idx: usize) -> &[u32] {
        let t = &self.tables[k];
        &t.boundary[idx * t.bnd_width..(idx + 1) * t.bnd_width]
    }

    /// Coboundary `(k+1)`-cells of the `k`-cell `idx`, two per missing direction.
    #[inline]
    pub fn coboundary_of(&self, k: usize, idx: usize) -> &[u32] {
        let t = &self.tables[k];
        &t.coboundary[idx * t.cob_width..(idx + 1) * t.cob_width]
    }

    pub fn incident_cells(&self, cell: &CellIndex, target_dim: usize) -> Result<Vec<CellIndex>> {
        let k = cell.cell_dim();
        let idx = self.index_of(cell)?;
        let list = if target_dim + 1 == k {
            self.boundary_of(k, idx)
        } else if target_dim == k + 1 && k < self.dims.dimension {
            self.coboundary_of(k, idx)
        } else {
            return Err(Error::contract(format!(
                "incident cells of a {k}-cell must have dimension {} or {}",
                k as isize - 1,
                k + 1
            )));
        };
        Ok(list.iter().map(|&c| self.cell_index(target_dim, c as usize)).collect())
    }

    /// XORs the boundary of the `k`-cell `idx` into `out`.
    #[inline]
    pub fn toggle_boundary(&self, k: usize, idx: usize, out: &mut Chain) {
        for &b in self.boundary_of(k, idx) {
            out.flip(b as usize);
        }
    }

    /// GF(2) boundary of a chain of any positive dimension.
    pub fn boundary(&self, chain: &Chain) -> Result<Chain> {
        self.check_shape(chain)?;
        let k = chain.cell_dim;
        if k == 0 {
            return Err(Error::contract("vertices have no boundary"));
        }
        let mut out = Chain::zeros(self, k - 1);
        for i in chain.iter_ones() {
            self.toggle_boundary(k, i, &mut out);
        }
        Ok(out)
    }

    /// Syndrome of an error: the boundary of a qubit-dimension chain.
    pub fn syndrome_of(&self, error: &Chain) -> Result<Chain> {
        if error.cell_dim != self.qubit_dim() {
            return Err(Error::contract(format!(
                "syndrome_of expects a {}-chain, got a {}-chain",
                self.qubit_dim(),
                error.cell_dim
            )));
        }
        self.boundary(error)
    }

    /// Homology class of a qubit-dimension cycle.
    ///
    /// Bit `o` (orientation `o` of qubit cells) is the parity of the support on
    /// cells of that orientation whose coordinates along their own directions
    /// are all zero. The other coordinates range freely, so the cut is a dual
    /// plane that meets each winding plane of orientation `o` once.
    pub fn homology_class(&self, cycle: &Chain) -> Result<HomologyClass> {
        let k = self.qubit_dim();
        if cycle.cell_dim != k {
            return Err(Error::contract(format!("homology_class expects a {k}-chain")));
        }
        if !self.boundary(cycle)?.is_zero() {
            return Err(Error::contract("homology_class requires a cycle (empty boundary)"));
        }
        Ok(self.homology_bits_unchecked(cycle))
    }

    /// Homology bits without checking that the chain is closed.
    pub fn homology_bits_unchecked(&self, chain: &Chain) -> HomologyClass {
        let k = chain.cell_dim;
        let d = self.dims.dimension;
        let l = self.dims.l;
        let n = self.orientation_count(k);
        let mut bits = 0u8;
        for i in chain.iter_ones() {
            let (v, o) = self.split_cell(k, i);
            let mask = self.tables[k].orients[o];
            let mut on_cut = true;
            for dir in 0..d {
                if mask & (1 << dir) != 0 {
                    let stride = l.pow((d - 1 - dir) as u32);
                    if (v / stride) % l != 0 {
                        on_cut = false;
                        break;
                    }
                }
            }
            if on_cut {
                bits ^= 1 << o;
            }
        }
        HomologyClass { bits, n: n as u8 }
    }

    fn check_shape(&self, chain: &Chain) -> Result<()> {
        if chain.dims != self.dims || chain.len != self.cell_count(chain.cell_dim) {
            return Err(Error::contract("chain shape does not match the lattice"));
        }
        Ok(())
    }
}

/// Logical class of a cycle, one bit per orientation of qubit cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HomologyClass {
    bits: u8,
    n: u8,
}

impl HomologyClass {
    pub fn is_trivial(&self) -> bool {
        self.bits == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits & (1 << i) != 0
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.n as usize).map(|i| self.bit(i)).collect()
    }

    pub fn mask(&self) -> u8 {
        self.bits
    }
}

/// A GF(2) chain: a bit vector over the `cell_dim`-cells of a lattice.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chain {
    dims: TorusDims,
    cell_dim: usize,
    len: usize,
    words: Vec<u64>,
}

impl Chain {
    pub fn zeros(torus: &Torus, cell_dim: usize) -> Self {
        let len = torus.cell_count(cell_dim);
        Chain {
            dims: torus.dims,
            cell_dim,
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_indices(torus: &Torus, cell_dim: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut c = Chain::zeros(torus, cell_dim);
        for i in idx {
            c.flip(i);
        }
        c
    }

    pub fn dims(&self) -> TorusDims {
        self.dims
    }

    pub fn cell_dim(&self) -> usize {
        self.cell_dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        if value {
            self.words[i >> 6] |= 1 << (i & 63);
        } else {
            self.words[i >> 6] &= !(1 << (i & 63));
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] ^= 1 << (i & 63);
    }

    pub fn xor_with(&mut self, other: &Chain) -> Result<()> {
        if self.dims != other.dims || self.cell_dim != other.cell_dim {
            return Err(Error::contract("XOR of chains with different shapes"));
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    pub fn xor(&self, other: &Chain) -> Result<Chain> {
        let mut out = self.clone();
        out.xor_with(other)?;
        Ok(out)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    /// Bitwise complement over all cells.
    pub fn complement(&mut self) {
        for w in self.words.iter_mut() {
            *w = !*w;
        }
        let tail = self.len & 63;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    pub fn ones(&self) -> Vec<usize> {
        self.iter_ones().collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}
