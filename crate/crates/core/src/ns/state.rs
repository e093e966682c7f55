use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::ThinGeometry;
use crate::laws::LawSet;

/// Staggered terrain-following mesh on the rescaled channel.
///
/// `x` is periodic with `nx` cells; `sigma = Z / h(x)` spans `[0, 1]` with
/// `ns` cells. Density lives at cell centres `(x_i, sigma_j)`, the horizontal
/// velocity at faces `(x_{i+1/2}, sigma_j)` and the vertical velocity at
/// nodes `(x_i, sigma_k)`, `k = 0..=ns`.
#[derive(Debug, Clone, PartialEq)]
pub struct NsGrid {
    pub nx: usize,
    pub ns: usize,
    pub length: f64,
    pub dx: f64,
    pub ds: f64,
    /// `h` and `h'` at cell centres.
    pub hc: Vec<f64>,
    pub hpc: Vec<f64>,
    /// `h` and `h'` at faces `i + 1/2`.
    pub hf: Vec<f64>,
    pub hpf: Vec<f64>,
}

impl NsGrid {
    pub fn new(geom: &ThinGeometry, nx: usize, ns: usize) -> Result<Self> {
        if nx < 4 || ns < 4 {
            return Err(Error::InvalidInput(format!(
                "channel grid needs at least 4x4 cells, got {nx}x{ns}"
            )));
        }
        let dx = geom.length / nx as f64;
        let xc = |i: usize| (i as f64 + 0.5) * dx;
        let xf = |i: usize| (i as f64 + 1.0) * dx;
        Ok(Self {
            nx,
            ns,
            length: geom.length,
            dx,
            ds: 1.0 / ns as f64,
            hc: (0..nx).map(|i| geom.h(xc(i))).collect(),
            hpc: (0..nx).map(|i| geom.h_prime(xc(i))).collect(),
            hf: (0..nx).map(|i| geom.h(xf(i))).collect(),
            hpf: (0..nx).map(|i| geom.h_prime(xf(i))).collect(),
        })
    }

    pub fn x_centre(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    pub fn x_face(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.dx
    }

    pub fn sigma_centre(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.ds
    }

    pub fn sigma_node(&self, k: usize) -> f64 {
        k as f64 * self.ds
    }

    #[inline]
    pub fn left(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }

    #[inline]
    pub fn right(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i * self.ns + j
    }

    #[inline]
    pub fn node(&self, i: usize, k: usize) -> usize {
        i * (self.ns + 1) + k
    }

    /// Cell area `dx * ds * h_i` in the rescaled domain.
    pub fn area(&self, i: usize) -> f64 {
        self.dx * self.ds * self.hc[i]
    }
}

/// Discrete solution of the rescaled channel equations at one aspect ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinState {
    pub grid: NsGrid,
    /// `nx * ns`, index `grid.cell(i, j)`.
    pub rho: Vec<f64>,
    /// `nx * ns`, face `i + 1/2`, row `j`.
    pub v: Vec<f64>,
    /// `nx * (ns + 1)`; wall nodes are kept at zero.
    pub w: Vec<f64>,
    pub eps: f64,
    pub wall_speed: f64,
    /// Dirichlet densities on the walls.
    pub rho_bottom: f64,
    pub rho_top: f64,
}

/// Piecewise-linear lift `V (1 - Z)` below `Z = 1`, zero above.
pub fn lift_velocity(geom: &ThinGeometry, z: f64) -> f64 {
    if z <= 0.0 {
        geom.wall_speed
    } else if z < 1.0 {
        geom.wall_speed * (1.0 - z)
    } else {
        0.0
    }
}

impl ThinState {
    /// Lift velocity, zero vertical velocity and the given column densities
    /// (one value per x cell, extended constant in sigma).
    pub fn from_columns(geom: &ThinGeometry, grid: NsGrid, column_rho: &[f64]) -> Result<Self> {
        if column_rho.len() != grid.nx {
            return Err(Error::InvalidInput(format!(
                "{} column densities for {} columns",
                column_rho.len(),
                grid.nx
            )));
        }
        let (nx, ns) = (grid.nx, grid.ns);
        let mut rho = vec![0.0; nx * ns];
        let mut v = vec![0.0; nx * ns];
        for i in 0..nx {
            for j in 0..ns {
                rho[grid.cell(i, j)] = column_rho[i];
                v[grid.cell(i, j)] = lift_velocity(geom, grid.sigma_centre(j) * grid.hf[i]);
            }
        }
        Ok(Self {
            w: vec![0.0; nx * (ns + 1)],
            grid,
            rho,
            v,
            eps: geom.eps,
            wall_speed: geom.wall_speed,
            rho_bottom: geom.rho_bottom,
            rho_top: geom.rho_top,
        })
    }

    /// Uniform density equal to the geometry's mean density.
    pub fn initial(geom: &ThinGeometry, nx: usize, ns: usize) -> Result<Self> {
        let grid = NsGrid::new(geom, nx, ns)?;
        let mean = geom.mass / (grid.hc.iter().sum::<f64>() * grid.dx);
        let cols = vec![mean; nx];
        Self::from_columns(geom, grid, &cols)
    }

    /// Exact plane Couette flow `v = V (1 - sigma)` at uniform density.
    pub fn couette(geom: &ThinGeometry, nx: usize, ns: usize, rho: f64) -> Result<Self> {
        let grid = NsGrid::new(geom, nx, ns)?;
        let mut s = Self::from_columns(geom, grid, &vec![rho; nx])?;
        for i in 0..nx {
            for j in 0..ns {
                let sg = s.grid.sigma_centre(j);
                let c = s.grid.cell(i, j);
                s.v[c] = geom.wall_speed * (1.0 - sg);
            }
        }
        Ok(s)
    }

    pub fn pressure(&self, laws: &LawSet) -> Vec<f64> {
        self.rho.iter().map(|&r| laws.pressure_unchecked(r)).collect()
    }

    /// `sum rho h dx ds`.
    pub fn mass(&self) -> f64 {
        let g = &self.grid;
        (0..g.nx)
            .map(|i| g.area(i) * (0..g.ns).map(|j| self.rho[g.cell(i, j)]).sum::<f64>())
            .sum()
    }

    /// Column mass flux `sum_j h_f rho_face v ds` through every face.
    pub fn column_fluxes(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.nx)
            .map(|i| {
                let r = g.right(i);
                (0..g.ns)
                    .map(|j| {
                        0.5 * (self.rho[g.cell(i, j)] + self.rho[g.cell(r, j)]) * self.v[g.cell(i, j)]
                    })
                    .sum::<f64>()
                    * g.hf[i]
                    * g.ds
            })
            .collect()
    }

    /// Copy shifted by one cell in x (all fields move to `i + 1`).
    pub fn shifted(&self, geom_shifted: &ThinGeometry) -> Result<Self> {
        let g = NsGrid::new(geom_shifted, self.grid.nx, self.grid.ns)?;
        let mut out = self.clone();
        out.grid = g;
        let (nx, ns) = (self.grid.nx, self.grid.ns);
        for i in 0..nx {
            let to = (i + 1) % nx;
            for j in 0..ns {
                out.rho[to * ns + j] = self.rho[i * ns + j];
                out.v[to * ns + j] = self.v[i * ns + j];
            }
            for k in 0..=ns {
                out.w[to * (ns + 1) + k] = self.w[i * (ns + 1) + k];
            }
        }
        Ok(out)
    }

    /// One row per cell: `x, sigma, Z, rho, v, w, P`.
    ///
    /// `x`, `sigma`, `Z` locate the cell centre; `v` is the value on the
    /// cell's right face and `w` the value on its lower node, so the file is
    /// a lossless image of the staggered state.
    pub fn export_fields(&self, laws: &LawSet) -> String {
        let g = &self.grid;
        let p = self.pressure(laws);
        let mut out = String::with_capacity(g.nx * g.ns * 170);
        out.push_str("x,sigma,Z,rho,v,w,P\n");
        for i in 0..g.nx {
            let x = g.x_centre(i);
            for j in 0..g.ns {
                let s = g.sigma_centre(j);
                let c = g.cell(i, j);
                let _ = writeln!(
                    out,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    x,
                    s,
                    s * g.hc[i],
                    self.rho[c],
                    self.v[c],
                    self.w[g.node(i, j)],
                    p[c]
                );
            }
        }
        out
    }

    /// Inverse of [`ThinState::export_fields`] on the grid implied by `geom`.
    pub fn import_fields(text: &str, geom: &ThinGeometry, nx: usize, ns: usize) -> Result<Self> {
        let grid = NsGrid::new(geom, nx, ns)?;
        let mut state = Self::from_columns(geom, grid, &vec![1.0; nx])?;
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "x,sigma,Z,rho,v,w,P" => {}
            other => {
                return Err(Error::InvalidInput(format!("unexpected field header {other:?}")));
            }
        }
        let mut count = 0;
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if count >= nx * ns {
                return Err(Error::InvalidInput("too many field rows".into()));
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("field row {}: {e}", ln + 2)))?;
            if vals.len() != 7 {
                return Err(Error::InvalidInput(format!("field row {} has {} columns", ln + 2, vals.len())));
            }
            let (i, j) = (count / ns, count % ns);
            let c = state.grid.cell(i, j);
            state.rho[c] = vals[3];
            state.v[c] = vals[4];
            if j > 0 {
                let n = state.grid.node(i, j);
                state.w[n] = vals[5];
            }
            count += 1;
        }
        if count != nx * ns {
            return Err(Error::InvalidInput(format!("expected {} field rows, got {count}", nx * ns)));
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_values() {
        let g = ThinGeometry::slider(0.3, 2.0);
        assert_eq!(lift_velocity(&g, 0.0), 2.0);
        assert_eq!(lift_velocity(&g, 1.0), 0.0);
        assert_eq!(lift_velocity(&g, 1.7), 0.0);
        assert_eq!(lift_velocity(&g, 0.25), 1.5);
    }

    #[test]
    fn export_import_export_is_identical() {
        let geom = ThinGeometry::slider(0.3, 1.0);
        let laws = LawSet::default();
        let mut s = ThinState::initial(&geom, 8, 5).unwrap();
        for (k, w) in s.w.iter_mut().enumerate() {
            if k % 6 != 0 && k % 6 != 5 {
                *w = 0.01 * (k as f64).sin();
            }
        }
        for (k, r) in s.rho.iter_mut().enumerate() {
            *r += 1e-3 * (k as f64 * 0.37).cos();
        }
        let a = s.export_fields(&laws);
        assert_eq!(a.lines().count(), 8 * 5 + 1);
        let back = ThinState::import_fields(&a, &geom, 8, 5).unwrap();
        assert_eq!(back.rho, s.rho);
        assert_eq!(back.v, s.v);
        assert_eq!(back.w, s.w);
        assert_eq!(a, back.export_fields(&laws));
        // Z column is sigma * h
        for line in a.lines().skip(1) {
            let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
            let h = geom.h(v[0]);
            assert!((v[2] - v[1] * h).abs() <= 1e-15 * (1.0 + v[2].abs()));
        }
    }

    #[test]
    fn import_rejects_garbage() {
        let geom = ThinGeometry::flat(1.0);
        assert!(ThinState::import_fields("nope\n", &geom, 4, 4).is_err());
        assert!(ThinState::import_fields("x,sigma,Z,rho,v,w,P\n1,2\n", &geom, 4, 4).is_err());
    }

    #[test]
    fn couette_flux_is_half_wall_speed() {
        let geom = ThinGeometry::flat(1.0);
        let s = ThinState::couette(&geom, 8, 16, 1.0).unwrap();
        for f in s.column_fluxes() {
            assert!((f - 0.5).abs() < 1e-14);
        }
        assert!((s.mass() - 1.0).abs() < 1e-14);
    }
}
