//! Discrete domains: 1D intervals, 2D rectangles, and axis-aligned unions of
//! rectangles on a common lattice (staircase approximations of non-convex
//! domains such as L-shapes).
//!
//! A grid is a set of active cells of pitch `h`; the unknowns live on the
//! lattice nodes touched by at least one active cell. Each node carries a
//! trapezoid-type quadrature weight, `(h/2)^d` per incident active cell, so
//! the weights sum to the domain measure exactly. Lattice edges carry
//! conductances proportional to the number of active cells they bound; the
//! operators module builds the Neumann Laplacian from them. Boundary nodes
//! record their outward normal directions and the boundary measure they own.
//!
//! Grids are immutable after construction and safe to share across threads.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

/// Sentinel for "no neighbor in this direction".
pub const NO_NODE: usize = usize::MAX;

/// Relative tolerance for snapping rectangle corners to the lattice.
const LATTICE_SNAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Interval,
    Rectangle,
    Masked,
}

impl GridKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GridKind::Interval => "interval",
            GridKind::Rectangle => "rectangle",
            GridKind::Masked => "masked",
        }
    }
}

/// Outward boundary direction at a node: axis (0 = x, 1 = y) and sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Normal {
    pub axis: usize,
    pub sign: i8,
}

/// Axis-aligned rectangle given by two opposite corners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Rect {
        Rect { x0, y0, x1, y1 }
    }
}

#[derive(Debug)]
pub struct Grid {
    id: u64,
    kind: GridKind,
    dim: usize,
    nx: usize,
    ny: usize,
    h: f64,
    extents: [f64; 2],
    cell_mask: Vec<bool>,
    node_of_lattice: Vec<usize>,
    lattice_of_node: Vec<(usize, usize)>,
    weights: Vec<f64>,
    measure: f64,
    /// Per node, neighbor indices in direction order [-x, +x, -y, +y].
    neighbors: Vec<[usize; 4]>,
    /// Per node, edge conductances matching `neighbors` (zero when absent).
    edge_coefs: Vec<[f64; 4]>,
    /// Per node, measure of the boundary faces the node owns.
    boundary_measure: Vec<f64>,
    normals: Vec<Vec<Normal>>,
}

/// Uniform grid on `[0, length]` with `n` nodes.
pub fn build_interval(length: f64, n: usize) -> Result<Grid> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::BadExtent(length));
    }
    if n < 3 {
        return Err(Error::TooFewNodes(n));
    }
    let h = length / (n - 1) as f64;
    Grid::assemble(GridKind::Interval, n, 1, h, vec![true; n - 1])
}

/// Tensor grid on `[0, lx] x [0, ly]`; spacing must be isotropic.
pub fn build_rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Grid> {
    if !(lx > 0.0) || !lx.is_finite() {
        return Err(Error::BadExtent(lx));
    }
    if !(ly > 0.0) || !ly.is_finite() {
        return Err(Error::BadExtent(ly));
    }
    if nx < 3 || ny < 3 {
        return Err(Error::TooFewNodes(nx.min(ny)));
    }
    let hx = lx / (nx - 1) as f64;
    let hy = ly / (ny - 1) as f64;
    if (hx - hy).abs() > 1e-12 * hx.max(hy) {
        return Err(Error::AnisotropicSpacing { hx, hy });
    }
    Grid::assemble(
        GridKind::Rectangle,
        nx,
        ny,
        hx,
        vec![true; (nx - 1) * (ny - 1)],
    )
}

/// Masked grid covering a union of rectangles whose corners lie on a common
/// lattice of pitch `h`. The union must be edge-connected.
pub fn build_union_rectangles(rects: &[Rect], h: f64) -> Result<Grid> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::BadExtent(h));
    }
    if rects.is_empty() {
        return Err(Error::EmptyDomain);
    }
    for r in rects {
        if !(r.x1 > r.x0)
            || !(r.y1 > r.y0)
            || !r.x0.is_finite()
            || !r.y0.is_finite()
            || !r.x1.is_finite()
            || !r.y1.is_finite()
        {
            return Err(Error::BadExtent(r.x1 - r.x0));
        }
    }
    let ox = rects.iter().map(|r| r.x0).fold(f64::INFINITY, f64::min);
    let oy = rects.iter().map(|r| r.y0).fold(f64::INFINITY, f64::min);
    let snap = |coord: f64| -> Result<i64> {
        let ratio = coord / h;
        let idx = ratio.round();
        if (ratio - idx).abs() > LATTICE_SNAP_TOL * ratio.abs().max(1.0) {
            return Err(Error::OffLatticeCorner { coord, h });
        }
        Ok(idx as i64)
    };
    let mut spans = Vec::with_capacity(rects.len());
    let mut cx = 0usize;
    let mut cy = 0usize;
    for r in rects {
        let i0 = snap(r.x0 - ox)?;
        let j0 = snap(r.y0 - oy)?;
        let i1 = snap(r.x1 - ox)?;
        let j1 = snap(r.y1 - oy)?;
        cx = cx.max(i1 as usize);
        cy = cy.max(j1 as usize);
        spans.push((i0, j0, i1, j1));
    }
    let mut mask = vec![false; cx * cy];
    for (i0, j0, i1, j1) in spans {
        for j in j0..j1 {
            for i in i0..i1 {
                mask[j as usize * cx + i as usize] = true;
            }
        }
    }
    Grid::assemble(GridKind::Masked, cx + 1, cy + 1, h, mask)
}

impl Grid {
    fn assemble(
        kind: GridKind,
        nx: usize,
        ny: usize,
        h: f64,
        cell_mask: Vec<bool>,
    ) -> Result<Grid> {
        let dim: usize = if ny == 1 { 1 } else { 2 };
        let cx = nx - 1;
        let cy = if dim == 1 { 1 } else { ny - 1 };
        debug_assert_eq!(cell_mask.len(), cx * cy);
        if !cell_mask.iter().any(|&c| c) {
            return Err(Error::EmptyDomain);
        }
        let cell_at = |i: i64, j: i64| -> bool {
            if i < 0 || j < 0 || i >= cx as i64 || j >= cy as i64 {
                return false;
            }
            cell_mask[j as usize * cx + i as usize]
        };

        check_connected(&cell_mask, cx, cy)?;

        let mut node_of_lattice = vec![NO_NODE; nx * ny];
        let mut lattice_of_node = Vec::new();
        let mut incident_counts = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let (ii, jj) = (i as i64, j as i64);
                let count = [(ii - 1, jj - 1), (ii, jj - 1), (ii - 1, jj), (ii, jj)]
                    .iter()
                    .filter(|&&(a, b)| cell_at(a, b))
                    .count();
                if count > 0 {
                    node_of_lattice[j * nx + i] = lattice_of_node.len();
                    lattice_of_node.push((i, j));
                    incident_counts.push(count);
                }
            }
        }
        let n = lattice_of_node.len();

        let half = 0.5 * h;
        let node_share = half.powi(dim as i32);
        let weights: Vec<f64> = incident_counts
            .iter()
            .map(|&c| c as f64 * node_share)
            .collect();
        let active_cells = cell_mask.iter().filter(|&&c| c).count();
        let measure = active_cells as f64 * h.powi(dim as i32);

        // conductance per unit of edge multiplicity: dual face area over h
        let conductance = half.powi(dim as i32 - 1) / h;
        let face_share = half.powi(dim as i32 - 1);

        let mut neighbors = vec![[NO_NODE; 4]; n];
        let mut edge_coefs = vec![[0.0; 4]; n];
        let mut boundary_measure = vec![0.0; n];
        let mut normals = vec![Vec::new(); n];

        for a in 0..n {
            let (i, j) = lattice_of_node[a];
            let (ii, jj) = (i as i64, j as i64);

            // x edges: cells in the column the edge crosses, above and below it
            if i > 0 {
                let s = cell_at(ii - 1, jj - 1) as u8 + cell_at(ii - 1, jj) as u8;
                if s > 0 {
                    neighbors[a][0] = node_of_lattice[j * nx + (i - 1)];
                    edge_coefs[a][0] = s as f64 * conductance;
                }
            }
            if i + 1 < nx {
                let s = cell_at(ii, jj - 1) as u8 + cell_at(ii, jj) as u8;
                if s > 0 {
                    neighbors[a][1] = node_of_lattice[j * nx + (i + 1)];
                    edge_coefs[a][1] = s as f64 * conductance;
                }
            }
            if dim == 2 {
                if j > 0 {
                    let s = cell_at(ii - 1, jj - 1) as u8 + cell_at(ii, jj - 1) as u8;
                    if s > 0 {
                        neighbors[a][2] = node_of_lattice[(j - 1) * nx + i];
                        edge_coefs[a][2] = s as f64 * conductance;
                    }
                }
                if j + 1 < ny {
                    let s = cell_at(ii - 1, jj) as u8 + cell_at(ii, jj) as u8;
                    if s > 0 {
                        neighbors[a][3] = node_of_lattice[(j + 1) * nx + i];
                        edge_coefs[a][3] = s as f64 * conductance;
                    }
                }
            }

            // boundary faces through the lattice line at this node
            let mut faces = [0usize; 4]; // -x, +x, -y, +y
            for seg in [jj - 1, jj] {
                if dim == 1 && seg != 0 {
                    continue;
                }
                if cell_at(ii, seg) && !cell_at(ii - 1, seg) {
                    faces[0] += 1;
                }
                if cell_at(ii - 1, seg) && !cell_at(ii, seg) {
                    faces[1] += 1;
                }
            }
            if dim == 2 {
                for seg in [ii - 1, ii] {
                    if cell_at(seg, jj) && !cell_at(seg, jj - 1) {
                        faces[2] += 1;
                    }
                    if cell_at(seg, jj - 1) && !cell_at(seg, jj) {
                        faces[3] += 1;
                    }
                }
            }
            let dirs = [
                Normal { axis: 0, sign: -1 },
                Normal { axis: 0, sign: 1 },
                Normal { axis: 1, sign: -1 },
                Normal { axis: 1, sign: 1 },
            ];
            for (d, &count) in faces.iter().enumerate() {
                if count > 0 {
                    boundary_measure[a] += count as f64 * face_share;
                    normals[a].push(dirs[d]);
                }
            }
        }

        let extents = [
            (nx - 1) as f64 * h,
            if dim == 2 { (ny - 1) as f64 * h } else { 0.0 },
        ];

        Ok(Grid {
            id: NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed),
            kind,
            dim,
            nx,
            ny,
            h,
            extents,
            cell_mask,
            node_of_lattice,
            lattice_of_node,
            weights,
            measure,
            neighbors,
            edge_coefs,
            boundary_measure,
            normals,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn node_count(&self) -> usize {
        self.lattice_of_node.len()
    }

    /// Domain measure `|Ω|` (length in 1D, area in 2D).
    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Bounding-box extents per axis.
    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.weights[node]
    }

    pub fn neighbors(&self, node: usize) -> [usize; 4] {
        self.neighbors[node]
    }

    pub fn edge_coefs(&self, node: usize) -> [f64; 4] {
        self.edge_coefs[node]
    }

    pub fn boundary_measure(&self, node: usize) -> f64 {
        self.boundary_measure[node]
    }

    pub fn normals(&self, node: usize) -> &[Normal] {
        &self.normals[node]
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        !self.normals[node].is_empty()
    }

    pub fn node_lattice(&self, node: usize) -> (usize, usize) {
        self.lattice_of_node[node]
    }

    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        let a = self.node_of_lattice[j * self.nx + i];
        (a != NO_NODE).then_some(a)
    }

    pub fn node_pos(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.lattice_of_node[node];
        [i as f64 * self.h, j as f64 * self.h]
    }

    pub fn cell_mask(&self) -> &[bool] {
        &self.cell_mask
    }

    /// Cell counts per axis.
    pub fn cells(&self) -> (usize, usize) {
        (self.nx - 1, if self.dim == 1 { 1 } else { self.ny - 1 })
    }

    /// Weighted mean of nodal values.
    pub fn mean_w(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.node_count());
        let mut acc = 0.0;
        for (v, w) in values.iter().zip(&self.weights) {
            acc += v * w;
        }
        acc / self.measure
    }

    /// Weighted inner product.
    pub fn dot_w(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.node_count());
        debug_assert_eq!(b.len(), self.node_count());
        let mut acc = 0.0;
        for i in 0..a.len() {
            acc += self.weights[i] * a[i] * b[i];
        }
        acc
    }

    pub fn norm_w(&self, a: &[f64]) -> f64 {
        self.dot_w(a, a).sqrt()
    }

    /// Same domain with the spacing halved (every cell split per axis).
    pub fn refined(&self) -> Result<Grid> {
        let (cx, cy) = self.cells();
        match self.dim {
            1 => {
                let mut mask = vec![false; 2 * cx];
                for i in 0..cx {
                    if self.cell_mask[i] {
                        mask[2 * i] = true;
                        mask[2 * i + 1] = true;
                    }
                }
                Grid::assemble(self.kind, 2 * self.nx - 1, 1, 0.5 * self.h, mask)
            }
            _ => {
                let mut mask = vec![false; 4 * cx * cy];
                for j in 0..cy {
                    for i in 0..cx {
                        if self.cell_mask[j * cx + i] {
                            for dj in 0..2 {
                                for di in 0..2 {
                                    mask[(2 * j + dj) * 2 * cx + 2 * i + di] = true;
                                }
                            }
                        }
                    }
                }
                Grid::assemble(
                    self.kind,
                    2 * self.nx - 1,
                    2 * self.ny - 1,
                    0.5 * self.h,
                    mask,
                )
            }
        }
    }
}

fn check_connected(mask: &[bool], cx: usize, cy: usize) -> Result<()> {
    let total: usize = mask.iter().filter(|&&c| c).count();
    if total == 0 {
        return Err(Error::EmptyDomain);
    }
    let start = mask.iter().position(|&c| c).unwrap();
    let mut seen = vec![false; mask.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut reached = 0usize;
    while let Some(c) = stack.pop() {
        reached += 1;
        let (i, j) = (c % cx, c / cx);
        let mut push = |ni: usize, nj: usize| {
            let nc = nj * cx + ni;
            if mask[nc] && !seen[nc] {
                seen[nc] = true;
                stack.push(nc);
            }
        };
        if i > 0 {
            push(i - 1, j);
        }
        if i + 1 < cx {
            push(i + 1, j);
        }
        if j > 0 {
            push(i, j - 1);
        }
        if j + 1 < cy {
            push(i, j + 1);
        }
    }
    if reached != total {
        return Err(Error::DisconnectedDomain);
    }
    Ok(())
}
