use log::warn;
use nalgebra::DMatrix;

use super::sparse::Csr;
use crate::linalg::{sym_sign_split, sym_spectral_radius};
use crate::system::{boundary_decomposition, BoundaryDecomposition, Face, SystemSpec, DEFAULT_ZERO_TOL};
use crate::{Error, Result};

pub const MIN_CELLS: usize = 4;
pub const DEFAULT_CFL: f64 = 0.9;

/// Interface flux splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    /// Characteristic upwinding `A = A⁺ + A⁻` from the eigen-split.
    Upwind,
    /// Local Lax–Friedrichs: `A± = (A ± ρ(A) I) / 2`.
    Rusanov,
}

/// One boundary cell face with its cached decomposition and ghost closure.
#[derive(Debug, Clone)]
pub struct BoundaryCell {
    pub face: Face,
    /// Interior cell adjacent to the face.
    pub cell: usize,
    /// Midpoint of the cell face on the boundary.
    pub x: Vec<f64>,
    pub dec: BoundaryDecomposition,
    /// Offset of this cell's incoming block in the boundary-control vector.
    pub u_offset: usize,
    /// Ghost closure `y_g = K y_cell + Q u`.
    pub keep: DMatrix<f64>,
    pub inject: DMatrix<f64>,
    /// Length of the face segment (1 in one dimension).
    pub measure: f64,
}

impl BoundaryCell {
    pub fn n_minus(&self) -> usize {
        self.dec.n_minus
    }

    pub fn ghost(&self, y_cell: &[f64], u: &[f64]) -> Vec<f64> {
        let y = nalgebra::DVector::from_column_slice(y_cell);
        let u = nalgebra::DVector::from_column_slice(u);
        (&self.keep * y + &self.inject * u).as_slice().to_vec()
    }
}

/// Uniform cell-centered grid with the assembled transport operator
/// `dy/dt = D y + E u`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: SystemSpec,
    pub cells: Vec<usize>,
    pub h: Vec<f64>,
    pub cfl: f64,
    pub flux: FluxKind,
    pub boundary: Vec<BoundaryCell>,
    /// Faces with zero characteristic speeds, reported once each.
    pub warnings: Vec<String>,
    pub drift: Csr,
    pub inflow: Csr,
    /// Largest step allowed by the CFL number.
    pub dt_max: f64,
}

/// Values of a grid function: one `N`-vector per cell, cell-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub n: usize,
    pub values: Vec<f64>,
}

impl StateField {
    pub fn zeros(n: usize, cells: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * cells],
        }
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || !values.len().is_multiple_of(n) {
            return Err(Error::dim("state field length (multiple of N)", n, values.len()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite state entry {v}")));
        }
        Ok(Self { n, values })
    }

    pub fn cells(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.n..(c + 1) * self.n]
    }
}

/// Characteristic blocks of the boundary-cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub face: Face,
    pub cell: usize,
    pub incoming: Vec<f64>,
    pub outgoing: Vec<f64>,
    pub lambda_minus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub entries: Vec<TraceEntry>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn state_dim(&self) -> usize {
        self.spec.state_dim
    }

    /// Length of the state vector, `N · #cells`.
    pub fn state_len(&self) -> usize {
        self.num_cells() * self.state_dim()
    }

    /// Length of one boundary-control vector (all incoming components).
    pub fn u_len(&self) -> usize {
        self.boundary.iter().map(BoundaryCell::n_minus).sum()
    }

    /// Cell volume.
    pub fn cell_weight(&self) -> f64 {
        self.h.iter().product()
    }

    /// Linear index of a multi-index; axis 0 varies fastest.
    pub fn cell_index(&self, idx: &[usize]) -> usize {
        match idx.len() {
            1 => idx[0],
            _ => idx[0] + self.cells[0] * idx[1],
        }
    }

    pub fn cell_multi(&self, c: usize) -> Vec<usize> {
        match self.dim() {
            1 => vec![c],
            _ => vec![c % self.cells[0], c / self.cells[0]],
        }
    }

    pub fn center(&self, c: usize) -> Vec<f64> {
        let lo = self.spec.domain.lo();
        self.cell_multi(c)
            .iter()
            .enumerate()
            .map(|(d, &i)| lo[d] + (i as f64 + 0.5) * self.h[d])
            .collect()
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        (0..self.num_cells()).map(|c| self.center(c)).collect()
    }

    /// Neighbor of `c` along `axis` (`+1` or `−1`), if inside.
    pub fn neighbor(&self, c: usize, axis: usize, up: bool) -> Option<usize> {
        let mut m = self.cell_multi(c);
        if up {
            if m[axis] + 1 >= self.cells[axis] {
                return None;
            }
            m[axis] += 1;
        } else {
            if m[axis] == 0 {
                return None;
            }
            m[axis] -= 1;
        }
        Some(self.cell_index(&m))
    }

    /// Boundary cell entry for `(face, cell)`.
    pub fn boundary_cell(&self, face: Face, cell: usize) -> Option<&BoundaryCell> {
        self.boundary.iter().find(|b| b.face == face && b.cell == cell)
    }

    /// Largest transport substep count needed to cover `dt` within the CFL limit.
    pub fn substeps(&self, dt: f64) -> usize {
        if !self.dt_max.is_finite() {
            return 1;
        }
        ((dt / self.dt_max) - 1e-9).ceil().max(1.0) as usize
    }

    /// Whether any face carries a zero characteristic speed.
    pub fn has_zero_characteristics(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Builds a uniform grid and assembles its transport operator.
///
/// Uses characteristic upwinding in one dimension and Rusanov splitting in two.
pub fn build_grid(spec: &SystemSpec, cells: &[usize], cfl: f64) -> Result<Grid> {
    let flux = if spec.space_dim() == 1 {
        FluxKind::Upwind
    } else {
        FluxKind::Rusanov
    };
    build_grid_with(spec, cells, cfl, flux)
}

pub fn build_grid_with(spec: &SystemSpec, cells: &[usize], cfl: f64, flux: FluxKind) -> Result<Grid> {
    let dim = spec.space_dim();
    if cells.len() != dim {
        return Err(Error::dim("cells per axis", dim, cells.len()));
    }
    if let Some(&c) = cells.iter().find(|&&c| c < MIN_CELLS) {
        return Err(Error::precondition(
            "grid size",
            format!("{c} cells; at least {MIN_CELLS} per axis required"),
        ));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::precondition("cfl range", format!("cfl = {cfl} outside (0, 1]")));
    }
    let h: Vec<f64> = (0..dim).map(|d| spec.domain.width(d) / cells[d] as f64).collect();
    let mut grid = Grid {
        spec: spec.clone(),
        cells: cells.to_vec(),
        h,
        cfl,
        flux,
        boundary: Vec::new(),
        warnings: Vec::new(),
        drift: Csr::from_triplets(0, 0, Vec::new()),
        inflow: Csr::from_triplets(0, 0, Vec::new()),
        dt_max: f64::INFINITY,
    };
    build_boundary(&mut grid)?;
    assemble(&mut grid)?;
    Ok(grid)
}

fn build_boundary(grid: &mut Grid) -> Result<()> {
    let dim = grid.dim();
    let n = grid.state_dim();
    let mut offset = 0;
    for face in Face::all(dim) {
        let along: Vec<usize> = if dim == 1 {
            vec![0]
        } else {
            (0..grid.cells[1 - face.axis]).collect()
        };
        let mut zero_reported = false;
        for k in along {
            let mut m = vec![0; dim];
            m[face.axis] = if face.upper { grid.cells[face.axis] - 1 } else { 0 };
            if dim == 2 {
                m[1 - face.axis] = k;
            }
            let cell = grid.cell_index(&m);
            let mut x = grid.center(cell);
            x[face.axis] = if face.upper {
                grid.spec.domain.hi()[face.axis]
            } else {
                grid.spec.domain.lo()[face.axis]
            };
            let flux = grid.spec.face_flux_matrix(face, &x);
            let dec = boundary_decomposition(&flux, DEFAULT_ZERO_TOL)?;
            if dec.n_zero > 0 && !zero_reported {
                let msg = format!(
                    "{}: face {} has {} zero characteristic speed(s); those components are extrapolated",
                    grid.spec.label,
                    face.name(),
                    dec.n_zero
                );
                warn!("{msg}");
                grid.warnings.push(msg);
                zero_reported = true;
            }
            let mut keep_diag = DMatrix::zeros(n, n);
            for j in 0..dec.n_plus + dec.n_zero {
                keep_diag[(j, j)] = 1.0;
            }
            let keep = &dec.pi * keep_diag * dec.pi.transpose();
            let inject = dec.pi.columns(dec.n_plus + dec.n_zero, dec.n_minus).into_owned();
            let measure = if dim == 1 { 1.0 } else { grid.h[1 - face.axis] };
            let n_minus = dec.n_minus;
            grid.boundary.push(BoundaryCell {
                face,
                cell,
                x,
                dec,
                u_offset: offset,
                keep,
                inject,
                measure,
            });
            offset += n_minus;
        }
    }
    Ok(())
}

fn split(a: &DMatrix<f64>, kind: FluxKind) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    match kind {
        FluxKind::Upwind => sym_sign_split(a),
        FluxKind::Rusanov => {
            let rho = sym_spectral_radius(a)?;
            let id = DMatrix::identity(a.nrows(), a.ncols()) * rho;
            Ok(((a + &id) * 0.5, (a - id) * 0.5))
        }
    }
}

fn push_block(t: &mut Vec<(usize, usize, f64)>, n: usize, r: usize, c: usize, m: &DMatrix<f64>, s: f64) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)] * s;
            if v != 0.0 {
                t.push((r * n + i, c * n + j, v));
            }
        }
    }
}

/// Fluctuation form: each interface sends `−A⁺ (y_R − y_L)/h` to the right cell and
/// `−A⁻ (y_R − y_L)/h` to the left one, with `A` taken at the interface.
fn assemble(grid: &mut Grid) -> Result<()> {
    let n = grid.state_dim();
    let ncell = grid.num_cells();
    let mut td = Vec::new();
    let mut te = Vec::new();
    let mut speed = vec![0.0_f64; grid.dim()];
    for d in 0..grid.dim() {
        let inv_h = 1.0 / grid.h[d];
        for left in 0..ncell {
            let Some(right) = grid.neighbor(left, d, true) else { continue };
            let mut x = grid.center(left);
            x[d] += 0.5 * grid.h[d];
            let a = &grid.spec.a_at(&x)[d];
            speed[d] = speed[d].max(sym_spectral_radius(a)?);
            let (ap, am) = split(a, grid.flux)?;
            push_block(&mut td, n, right, right, &ap, -inv_h);
            push_block(&mut td, n, right, left, &ap, inv_h);
            push_block(&mut td, n, left, right, &am, -inv_h);
            push_block(&mut td, n, left, left, &am, inv_h);
        }
    }
    for b in &grid.boundary {
        let d = b.face.axis;
        let inv_h = 1.0 / grid.h[d];
        let a = &grid.spec.a_at(&b.x)[d];
        speed[d] = speed[d].max(sym_spectral_radius(a)?);
        let (ap, am) = split(a, grid.flux)?;
        let c = b.cell;
        // lower face: −A⁺(y_c − y_g)/h;  upper face: −A⁻(y_g − y_c)/h
        let (m, sign) = if b.face.upper { (am, -1.0) } else { (ap, 1.0) };
        push_block(&mut td, n, c, c, &m, -sign * inv_h);
        push_block(&mut td, n, c, c, &(&m * &b.keep), sign * inv_h);
        let mi = &m * &b.inject;
        for i in 0..n {
            for j in 0..b.n_minus() {
                let v = mi[(i, j)] * sign * inv_h;
                if v != 0.0 {
                    te.push((c * n + i, b.u_offset + j, v));
                }
            }
        }
    }
    grid.drift = Csr::from_triplets(ncell * n, ncell * n, td);
    grid.inflow = Csr::from_triplets(ncell * n, grid.u_len(), te);
    let rate: f64 = speed.iter().zip(&grid.h).map(|(s, h)| s / h).sum();
    grid.dt_max = if rate > 0.0 { grid.cfl / rate } else { f64::INFINITY };
    Ok(())
}

fn check_state(grid: &Grid, y: &StateField) -> Result<()> {
    if y.n != grid.state_dim() || y.values.len() != grid.state_len() {
        return Err(Error::dim("state field length", grid.state_len(), y.values.len()));
    }
    Ok(())
}

/// One explicit step `y + dt (D y + E u)`.
pub fn transport_step(grid: &Grid, y: &StateField, u: &[f64], dt: f64) -> Result<StateField> {
    check_state(grid, y)?;
    if u.len() != grid.u_len() {
        return Err(Error::dim("boundary control length", grid.u_len(), u.len()));
    }
    if dt > grid.dt_max * (1.0 + 1e-12) {
        return Err(Error::precondition(
            "cfl",
            format!("dt = {dt:e} exceeds the stable step {:e}", grid.dt_max),
        ));
    }
    let mut out = y.values.clone();
    grid.drift.mul_add(dt, &y.values, &mut out);
    grid.inflow.mul_add(dt, u, &mut out);
    Ok(StateField { n: y.n, values: out })
}

/// Splits every boundary-cell value through the cached `Π`.
pub fn extract_trace(grid: &Grid, y: &StateField) -> Result<BoundaryTrace> {
    check_state(grid, y)?;
    let entries = grid
        .boundary
        .iter()
        .map(|b| {
            let s = b.dec.split_state(y.cell(b.cell))?;
            Ok(TraceEntry {
                face: b.face,
                cell: b.cell,
                incoming: s.minus,
                outgoing: s.plus,
                lambda_minus: b.dec.lambda_minus.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundaryTrace { entries })
}

/// Incoming characteristic values of a constant state, laid out as a boundary-control vector.
pub fn incoming_of_constant(grid: &Grid, c: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; grid.u_len()];
    for b in &grid.boundary {
        let s = b.dec.split_state(c).expect("state dimension");
        u[b.u_offset..b.u_offset + b.n_minus()].copy_from_slice(&s.minus);
    }
    u
}
