//! Discrete graph of continuous multilinear finite elements on uniform
//! interval and rectangle grids.
//!
//! On a tensor-product grid the global consistent mass matrix and the two
//! gradient matrices are Kronecker products of their one-dimensional
//! counterparts, which is how the 2D graph is assembled.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("need at least {min} cells per direction, got {got}")]
    TooFewCells { min: usize, got: usize },
    #[error("degenerate extent [{lower}, {upper}]")]
    DegenerateExtent { lower: f64, upper: f64 },
}

/// Boundary side of a rectangle, encoded as a bit in [`DiscreteGraph::boundary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    XLow,
    XHigh,
    YLow,
    YHigh,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::XLow, Side::XHigh, Side::YLow, Side::YHigh];

    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::XLow => [-1.0, 0.0],
            Side::XHigh => [1.0, 0.0],
            Side::YLow => [0.0, -1.0],
            Side::YHigh => [0.0, 1.0],
        }
    }

    /// Coordinate axis orthogonal to the side.
    pub fn axis(self) -> usize {
        match self {
            Side::XLow | Side::XHigh => 0,
            Side::YLow | Side::YHigh => 1,
        }
    }
}

/// Sparse graph with stencils, masses and c_ij vectors.
///
/// Rows are stored in compressed form with sorted column indices; every row
/// contains its diagonal entry.
#[derive(Debug, Clone)]
pub struct DiscreteGraph {
    dim: usize,
    coords: Vec<[f64; 2]>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    c: Vec<[f64; 2]>,
    mass: Vec<f64>,
    mirror: Vec<usize>,
    diag: Vec<usize>,
    lumped: Vec<f64>,
    boundary: Vec<u8>,
    measure: f64,
    cells: [usize; 2],
}

/// One-dimensional global matrices in dense-band form.
struct Line {
    nodes: usize,
    x: Vec<f64>,
    // neighbors[i] = sorted (j, m_ij, c_ij)
    rows: Vec<Vec<(usize, f64, f64)>>,
    lumped: Vec<f64>,
    low: Vec<bool>,
    high: Vec<bool>,
}

fn line(n_cells: usize, lower: f64, upper: f64, periodic: bool) -> Line {
    let h = (upper - lower) / n_cells as f64;
    let nodes = if periodic { n_cells } else { n_cells + 1 };
    let mut rows: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); nodes];
    let mut lumped = vec![0.0; nodes];
    let mut add = |i: usize, j: usize, m: f64, c: f64| {
        if let Some(e) = rows[i].iter_mut().find(|e| e.0 == j) {
            e.1 += m;
            e.2 += c;
        } else {
            rows[i].push((j, m, c));
        }
    };
    for cell in 0..n_cells {
        let a = cell;
        let b = if periodic { (cell + 1) % nodes } else { cell + 1 };
        // ∫φ_aφ_b and ∫φ_a φ_b' on one element
        add(a, a, h / 3.0, -0.5);
        add(a, b, h / 6.0, 0.5);
        add(b, a, h / 6.0, -0.5);
        add(b, b, h / 3.0, 0.5);
        lumped[a] += 0.5 * h;
        lumped[b] += 0.5 * h;
    }
    for r in rows.iter_mut() {
        r.sort_by_key(|e| e.0);
    }
    let x = (0..nodes).map(|i| lower + h * i as f64).collect();
    let mut low = vec![false; nodes];
    let mut high = vec![false; nodes];
    if !periodic {
        low[0] = true;
        high[nodes - 1] = true;
    }
    Line { nodes, x, rows, lumped, low, high }
}

fn check_extent(lower: f64, upper: f64) -> Result<(), MeshError> {
    if !(upper > lower) || !lower.is_finite() || !upper.is_finite() {
        return Err(MeshError::DegenerateExtent { lower, upper });
    }
    Ok(())
}

impl DiscreteGraph {
    /// Uniform interval mesh with `n_cells + 1` nodes.
    pub fn build_1d(n_cells: usize, x_left: f64, x_right: f64) -> Result<Self, MeshError> {
        if n_cells < 2 {
            return Err(MeshError::TooFewCells { min: 2, got: n_cells });
        }
        check_extent(x_left, x_right)?;
        Ok(Self::from_line(line(n_cells, x_left, x_right, false), x_right - x_left))
    }

    /// Uniform periodic interval mesh with `n_cells` nodes.
    pub fn build_1d_periodic(n_cells: usize, x_left: f64, x_right: f64) -> Result<Self, MeshError> {
        if n_cells < 3 {
            return Err(MeshError::TooFewCells { min: 3, got: n_cells });
        }
        check_extent(x_left, x_right)?;
        Ok(Self::from_line(line(n_cells, x_left, x_right, true), x_right - x_left))
    }

    fn from_line(l: Line, measure: f64) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut c = Vec::new();
        let mut mass = Vec::new();
        for r in &l.rows {
            for &(j, m, cx) in r {
                cols.push(j);
                mass.push(m);
                c.push([cx, 0.0]);
            }
            row_ptr.push(cols.len());
        }
        let boundary = (0..l.nodes)
            .map(|i| {
                (if l.low[i] { Side::XLow.bit() } else { 0 }) | (if l.high[i] { Side::XHigh.bit() } else { 0 })
            })
            .collect();
        let cells = [if l.low.iter().any(|b| *b) { l.nodes - 1 } else { l.nodes }, 0];
        Self::finish(1, l.x.iter().map(|x| [*x, 0.0]).collect(), row_ptr, cols, c, mass, l.lumped, boundary, measure, cells)
    }

    /// Uniform rectangle mesh with `(nx + 1)(ny + 1)` nodes, numbered
    /// lexicographically with x fastest.
    pub fn build_2d(nx: usize, ny: usize, lower: [f64; 2], upper: [f64; 2]) -> Result<Self, MeshError> {
        for n in [nx, ny] {
            if n < 2 {
                return Err(MeshError::TooFewCells { min: 2, got: n });
            }
        }
        check_extent(lower[0], upper[0])?;
        check_extent(lower[1], upper[1])?;
        let lx = line(nx, lower[0], upper[0], false);
        let ly = line(ny, lower[1], upper[1], false);
        let idx = |ix: usize, iy: usize| ix + lx.nodes * iy;
        let n = lx.nodes * ly.nodes;
        let mut coords = Vec::with_capacity(n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::with_capacity(9 * n);
        let mut c = Vec::with_capacity(9 * n);
        let mut mass = Vec::with_capacity(9 * n);
        let mut lumped = Vec::with_capacity(n);
        let mut boundary = Vec::with_capacity(n);
        for iy in 0..ly.nodes {
            for ix in 0..lx.nodes {
                coords.push([lx.x[ix], ly.x[iy]]);
                lumped.push(lx.lumped[ix] * ly.lumped[iy]);
                let mut bits = 0;
                if lx.low[ix] {
                    bits |= Side::XLow.bit();
                }
                if lx.high[ix] {
                    bits |= Side::XHigh.bit();
                }
                if ly.low[iy] {
                    bits |= Side::YLow.bit();
                }
                if ly.high[iy] {
                    bits |= Side::YHigh.bit();
                }
                boundary.push(bits);
                // sorted because y-major ordering matches the nested loops
                for &(jy, my, cy) in &ly.rows[iy] {
                    for &(jx, mx, cx) in &lx.rows[ix] {
                        cols.push(idx(jx, jy));
                        mass.push(mx * my);
                        c.push([cx * my, mx * cy]);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        let measure = (upper[0] - lower[0]) * (upper[1] - lower[1]);
        Ok(Self::finish(2, coords, row_ptr, cols, c, mass, lumped, boundary, measure, [nx, ny]))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        dim: usize,
        coords: Vec<[f64; 2]>,
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        c: Vec<[f64; 2]>,
        mass: Vec<f64>,
        lumped: Vec<f64>,
        boundary: Vec<u8>,
        measure: f64,
        cells: [usize; 2],
    ) -> Self {
        let n = coords.len();
        let mut diag = vec![usize::MAX; n];
        let mut mirror = vec![usize::MAX; cols.len()];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = cols[k];
                if j == i {
                    diag[i] = k;
                }
                let row = &cols[row_ptr[j]..row_ptr[j + 1]];
                let pos = row.binary_search(&i).expect("graph must be structurally symmetric");
                mirror[k] = row_ptr[j] + pos;
            }
        }
        let graph = Self { dim, coords, row_ptr, cols, c, mass, mirror, diag, lumped, boundary, measure, cells };
        debug_assert!(graph.check_invariants(1e-12).is_ok());
        graph
    }

    /// Verifies the structural invariants, returning the first violation.
    pub fn check_invariants(&self, tol: f64) -> Result<(), String> {
        let mut total = 0.0;
        for i in 0..self.n_nodes() {
            if !(self.lumped[i] > 0.0) {
                return Err(format!("node {i}: nonpositive lumped mass"));
            }
            total += self.lumped[i];
            let mut row_c = [0.0; 2];
            let mut row_m = 0.0;
            let scale = self.lumped[i].powf((self.dim as f64 - 1.0) / self.dim as f64);
            for k in self.row(i) {
                row_c[0] += self.c[k][0];
                row_c[1] += self.c[k][1];
                row_m += self.mass[k];
                let j = self.cols[k];
                if self.boundary[i] == 0 || self.boundary[j] == 0 {
                    let back = self.c[self.mirror[k]];
                    if (self.c[k][0] + back[0]).abs() > tol * scale || (self.c[k][1] + back[1]).abs() > tol * scale {
                        return Err(format!("pair ({i},{j}): c_ij is not antisymmetric"));
                    }
                }
            }
            if row_c[0].abs() > tol * scale || row_c[1].abs() > tol * scale {
                return Err(format!("node {i}: c row sum {row_c:?}"));
            }
            if (row_m - self.lumped[i]).abs() > tol * self.lumped[i] {
                return Err(format!("node {i}: mass row sum {row_m} vs lumped {}", self.lumped[i]));
            }
            if self.diag[i] == usize::MAX {
                return Err(format!("node {i}: missing diagonal"));
            }
        }
        if (total - self.measure).abs() > tol * self.measure {
            return Err(format!("lumped masses sum to {total}, measure is {}", self.measure));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_entries(&self) -> usize {
        self.cols.len()
    }

    /// Cells per direction (the second entry is zero in 1D).
    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Entry range of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    #[inline]
    pub fn col(&self, k: usize) -> usize {
        self.cols[k]
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    /// c_ij for entry `k`; the second component is zero in 1D.
    #[inline]
    pub fn c(&self, k: usize) -> [f64; 2] {
        self.c[k]
    }

    /// Consistent mass m_ij for entry `k`.
    #[inline]
    pub fn mass(&self, k: usize) -> f64 {
        self.mass[k]
    }

    /// Entry index of the transposed pair.
    #[inline]
    pub fn mirror(&self, k: usize) -> usize {
        self.mirror[k]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> usize {
        self.diag[i]
    }

    #[inline]
    pub fn lumped_mass(&self, i: usize) -> f64 {
        self.lumped[i]
    }

    pub fn lumped_masses(&self) -> &[f64] {
        &self.lumped
    }

    /// Bitmask of the boundary sides node `i` lies on.
    #[inline]
    pub fn boundary(&self, i: usize) -> u8 {
        self.boundary[i]
    }

    pub fn on_side(&self, i: usize, side: Side) -> bool {
        self.boundary[i] & side.bit() != 0
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    /// Entry index of `(i, j)`, if `j` is in the stencil of `i`.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.cols[self.row(i)];
        row.binary_search(&j).ok().map(|p| self.row_ptr[i] + p)
    }
}

/// Splits c_ij into its norm and unit direction; `None` for the zero vector.
#[inline]
pub fn normalize(c: [f64; 2]) -> Option<(f64, [f64; 2])> {
    let norm = (c[0] * c[0] + c[1] * c[1]).sqrt();
    if norm == 0.0 {
        return None;
    }
    Some((norm, [c[0] / norm, c[1] / norm]))
}
