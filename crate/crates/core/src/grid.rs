//! Structured staggered hexahedral grid and its integer incidence operators.
//!
//! Nodes carry scalar potentials, edges carry line integrals (voltages,
//! vector-potential circulations), faces carry fluxes. Edges point along
//! `+axis`, face normals point along `+axis`. Every entity family is
//! linearized axis-major, then `k`, `j`, `i` with `i` running fastest.

use crate::error::{Error, Result};
use crate::linalg::Scalar;

/// Coordinate axis of an edge direction or a face normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            2 => Axis::Z,
            _ => panic!("axis index {i} out of range"),
        }
    }

    /// The two axes completing a right-handed triple `(self, next, after)`.
    #[inline]
    pub fn transverse(self) -> (Axis, Axis) {
        let a = self.index();
        (Axis::from_index((a + 1) % 3), Axis::from_index((a + 2) % 3))
    }

    #[inline]
    fn unit(self) -> [usize; 3] {
        let mut u = [0; 3];
        u[self.index()] = 1;
        u
    }
}

#[inline]
fn add(p: [usize; 3], q: [usize; 3]) -> [usize; 3] {
    [p[0] + q[0], p[1] + q[1], p[2] + q[2]]
}

/// Tensor-product hexahedral grid with uniform spacing per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    n: [usize; 3],
    h: [f64; 3],
    edge_offsets: [usize; 4],
    face_offsets: [usize; 4],
}

impl StructuredGrid {
    /// Builds a grid with `nx × ny × nz` nodes and spacings `dx, dy, dz` in metres.
    pub fn new(nx: usize, ny: usize, nz: usize, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let n = [nx, ny, nz];
        let h = [dx, dy, dz];
        for (axis, &count) in ["nx", "ny", "nz"].iter().zip(&n) {
            if count < 2 {
                return Err(Error::Config(format!(
                    "grid node count {axis} = {count} must be at least 2"
                )));
            }
        }
        for (axis, &spacing) in ["dx", "dy", "dz"].iter().zip(&h) {
            if !(spacing.is_finite() && spacing > 0.0) {
                return Err(Error::Config(format!(
                    "grid spacing {axis} = {spacing} must be positive and finite"
                )));
            }
        }
        let mut edge_offsets = [0; 4];
        let mut face_offsets = [0; 4];
        for a in Axis::ALL {
            edge_offsets[a.index() + 1] = edge_offsets[a.index()] + Self::family_len(n, Self::edge_dims(n, a));
            face_offsets[a.index() + 1] = face_offsets[a.index()] + Self::family_len(n, Self::face_dims(n, a));
        }
        Ok(Self {
            n,
            h,
            edge_offsets,
            face_offsets,
        })
    }

    fn family_len(_n: [usize; 3], dims: [usize; 3]) -> usize {
        dims[0] * dims[1] * dims[2]
    }

    fn edge_dims(n: [usize; 3], a: Axis) -> [usize; 3] {
        let mut d = n;
        d[a.index()] -= 1;
        d
    }

    fn face_dims(n: [usize; 3], a: Axis) -> [usize; 3] {
        let mut d = [n[0] - 1, n[1] - 1, n[2] - 1];
        d[a.index()] += 1;
        d
    }

    #[inline]
    fn linear(dims: [usize; 3], p: [usize; 3]) -> usize {
        debug_assert!(p[0] < dims[0] && p[1] < dims[1] && p[2] < dims[2]);
        p[0] + dims[0] * (p[1] + dims[1] * p[2])
    }

    #[inline]
    fn unlinear(dims: [usize; 3], mut idx: usize) -> [usize; 3] {
        let i = idx % dims[0];
        idx /= dims[0];
        let j = idx % dims[1];
        [i, j, idx / dims[1]]
    }

    pub fn nodes_per_axis(&self) -> [usize; 3] {
        self.n
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn num_edges(&self) -> usize {
        self.edge_offsets[3]
    }

    pub fn num_faces(&self) -> usize {
        self.face_offsets[3]
    }

    pub fn num_cells(&self) -> usize {
        (self.n[0] - 1) * (self.n[1] - 1) * (self.n[2] - 1)
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        [self.n[0] - 1, self.n[1] - 1, self.n[2] - 1]
    }

    pub fn node(&self, p: [usize; 3]) -> usize {
        Self::linear(self.n, p)
    }

    pub fn node_coords(&self, idx: usize) -> [usize; 3] {
        Self::unlinear(self.n, idx)
    }

    pub fn edge(&self, axis: Axis, p: [usize; 3]) -> usize {
        self.edge_offsets[axis.index()] + Self::linear(Self::edge_dims(self.n, axis), p)
    }

    pub fn edge_coords(&self, idx: usize) -> (Axis, [usize; 3]) {
        let a = Self::family_of(&self.edge_offsets, idx);
        let p = Self::unlinear(Self::edge_dims(self.n, a), idx - self.edge_offsets[a.index()]);
        (a, p)
    }

    pub fn face(&self, axis: Axis, p: [usize; 3]) -> usize {
        self.face_offsets[axis.index()] + Self::linear(Self::face_dims(self.n, axis), p)
    }

    pub fn face_coords(&self, idx: usize) -> (Axis, [usize; 3]) {
        let a = Self::family_of(&self.face_offsets, idx);
        let p = Self::unlinear(Self::face_dims(self.n, a), idx - self.face_offsets[a.index()]);
        (a, p)
    }

    pub fn cell(&self, p: [usize; 3]) -> usize {
        Self::linear(self.cell_dims(), p)
    }

    pub fn cell_coords(&self, idx: usize) -> [usize; 3] {
        Self::unlinear(self.cell_dims(), idx)
    }

    fn family_of(offsets: &[usize; 4], idx: usize) -> Axis {
        assert!(idx < offsets[3], "entity index {idx} out of range");
        if idx < offsets[1] {
            Axis::X
        } else if idx < offsets[2] {
            Axis::Y
        } else {
            Axis::Z
        }
    }

    /// Range of linear indices of the edges parallel to `axis`.
    pub fn edge_range(&self, axis: Axis) -> std::ops::Range<usize> {
        self.edge_offsets[axis.index()]..self.edge_offsets[axis.index() + 1]
    }

    pub fn face_range(&self, axis: Axis) -> std::ops::Range<usize> {
        self.face_offsets[axis.index()]..self.face_offsets[axis.index() + 1]
    }

    /// Physical position of a node in metres (origin at node `(0,0,0)`).
    pub fn node_position(&self, p: [usize; 3]) -> [f64; 3] {
        [p[0] as f64 * self.h[0], p[1] as f64 * self.h[1], p[2] as f64 * self.h[2]]
    }

    /// Domain extent per axis in metres.
    pub fn extent(&self) -> [f64; 3] {
        [
            (self.n[0] - 1) as f64 * self.h[0],
            (self.n[1] - 1) as f64 * self.h[1],
            (self.n[2] - 1) as f64 * self.h[2],
        ]
    }

    pub fn edge_length(&self, axis: Axis) -> f64 {
        self.h[axis.index()]
    }

    pub fn face_area(&self, axis: Axis) -> f64 {
        let (b, c) = axis.transverse();
        self.h[b.index()] * self.h[c.index()]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    pub fn is_boundary_node(&self, p: [usize; 3]) -> bool {
        (0..3).any(|d| p[d] == 0 || p[d] == self.n[d] - 1)
    }

    /// An edge is on the boundary when it lies inside one of the six bounding faces.
    pub fn is_boundary_edge(&self, idx: usize) -> bool {
        let (a, p) = self.edge_coords(idx);
        let (b, c) = a.transverse();
        [b, c]
            .iter()
            .any(|d| p[d.index()] == 0 || p[d.index()] == self.n[d.index()] - 1)
    }

    pub fn is_boundary_face(&self, idx: usize) -> bool {
        let (a, p) = self.face_coords(idx);
        p[a.index()] == 0 || p[a.index()] == self.n[a.index()] - 1
    }

    /// Cells sharing an edge (between one and four).
    pub fn edge_cells(&self, idx: usize) -> Vec<usize> {
        let (a, p) = self.edge_coords(idx);
        let (b, c) = a.transverse();
        let mut out = Vec::with_capacity(4);
        for db in [0usize, 1] {
            for dc in [0usize, 1] {
                let (Some(cb), Some(cc)) = (
                    p[b.index()].checked_sub(db),
                    p[c.index()].checked_sub(dc),
                ) else {
                    continue;
                };
                if cb >= self.n[b.index()] - 1 || cc >= self.n[c.index()] - 1 {
                    continue;
                }
                let mut q = p;
                q[b.index()] = cb;
                q[c.index()] = cc;
                out.push(self.cell(q));
            }
        }
        out
    }

    /// Cells sharing a face (one or two).
    pub fn face_cells(&self, idx: usize) -> Vec<usize> {
        let (a, p) = self.face_coords(idx);
        let mut out = Vec::with_capacity(2);
        for d in [1usize, 0] {
            let Some(ca) = p[a.index()].checked_sub(d) else {
                continue;
            };
            if ca >= self.n[a.index()] - 1 {
                continue;
            }
            let mut q = p;
            q[a.index()] = ca;
            out.push(self.cell(q));
        }
        out
    }

    /// Dual-cell volume attached to an edge: a quarter of every adjacent cell.
    pub fn edge_dual_volume(&self, idx: usize) -> f64 {
        self.edge_cells(idx).len() as f64 * 0.25 * self.cell_volume()
    }

    /// Dual-face area attached to an edge (only the part inside the domain).
    pub fn edge_dual_area(&self, idx: usize) -> f64 {
        let (a, _) = self.edge_coords(idx);
        self.edge_dual_volume(idx) / self.edge_length(a)
    }

    /// Dual-edge length attached to a face (half of every adjacent cell).
    pub fn face_dual_length(&self, idx: usize) -> f64 {
        let (a, _) = self.face_coords(idx);
        self.face_cells(idx).len() as f64 * 0.5 * self.h[a.index()]
    }

    pub fn face_dual_volume(&self, idx: usize) -> f64 {
        let (a, _) = self.face_coords(idx);
        self.face_dual_length(idx) * self.face_area(a)
    }

    /// Longest side of the domain in metres.
    pub fn longest_side(&self) -> f64 {
        self.extent().into_iter().fold(0.0, f64::max)
    }
}

/// Sparse integer operator with entries in `{-1, +1}`, stored row-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<i8>,
}

impl IncidenceMatrix {
    fn from_rows(cols: usize, rows: impl Iterator<Item = Vec<(usize, i8)>>) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: row_ptr.len() - 1,
            cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(column, value)` pairs of one row, columns ascending.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, i8)> + '_ {
        let s = self.row_ptr[r];
        let e = self.row_ptr[r + 1];
        self.col_idx[s..e].iter().copied().zip(self.vals[s..e].iter().copied())
    }

    /// All `(row, col, value)` triplets.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "incidence apply: dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).fold(T::zero(), |acc, (c, v)| acc + x[c] * f64::from(v)))
            .collect()
    }

    /// Transposed product `selfᵀ · y`.
    pub fn apply_transpose<T: Scalar>(&self, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.rows, "incidence transpose apply: dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (r, &yr) in y.iter().enumerate() {
            for (c, v) in self.row(r) {
                out[c] += yr * f64::from(v);
            }
        }
        out
    }

    /// Exact integer product, for identity checks.
    pub fn apply_i64(&self, x: &[i64]) -> Vec<i64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).map(|(c, v)| i64::from(v) * x[c]).sum())
            .collect()
    }

    /// Nonzero entries of the exact integer product `self · rhs`.
    pub fn compose(&self, rhs: &IncidenceMatrix) -> Vec<(usize, usize, i64)> {
        assert_eq!(self.cols, rhs.rows, "compose: inner dimension mismatch");
        let mut out = Vec::new();
        let mut acc: Vec<(usize, i64)> = Vec::new();
        for r in 0..self.rows {
            acc.clear();
            for (k, v) in self.row(r) {
                for (c, w) in rhs.row(k) {
                    let prod = i64::from(v) * i64::from(w);
                    match acc.iter_mut().find(|(cc, _)| *cc == c) {
                        Some(slot) => slot.1 += prod,
                        None => acc.push((c, prod)),
                    }
                }
            }
            out.extend(acc.iter().filter(|(_, s)| *s != 0).map(|&(c, s)| (r, c, s)));
        }
        out
    }
}

/// Discrete gradient `G` (`N_edges × N_nodes`): `-1` at the edge tail, `+1` at its head.
pub fn build_gradient(grid: &StructuredGrid) -> IncidenceMatrix {
    IncidenceMatrix::from_rows(
        grid.num_nodes(),
        (0..grid.num_edges()).map(|e| {
            let (a, p) = grid.edge_coords(e);
            vec![(grid.node(p), -1), (grid.node(add(p, a.unit())), 1)]
        }),
    )
}

/// Discrete curl `C` (`N_faces × N_edges`): each row is the oriented boundary
/// loop of a face, counter-clockwise about the `+axis` normal.
pub fn build_curl(grid: &StructuredGrid) -> IncidenceMatrix {
    IncidenceMatrix::from_rows(
        grid.num_edges(),
        (0..grid.num_faces()).map(|f| {
            let (a, p) = grid.face_coords(f);
            let (b, c) = a.transverse();
            vec![
                (grid.edge(b, p), 1),
                (grid.edge(c, add(p, b.unit())), 1),
                (grid.edge(b, add(p, c.unit())), -1),
                (grid.edge(c, p), -1),
            ]
        }),
    )
}
