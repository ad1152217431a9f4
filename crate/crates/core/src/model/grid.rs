use super::{Direction, PeriodicCell, Point};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Boundary treatment of one grid axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Homogeneous Neumann condition via ghost reflection.
    NoFlux,
    /// Periodic with a shift along the other axis: leaving through the top of
    /// this axis re-enters at the bottom displaced by `shift` nodes on the
    /// other axis. Planar data in a rational direction are exactly invariant
    /// under the matching lattice translation.
    ShearPeriodic { shift: isize },
}

impl Boundary {
    fn is_periodic(&self) -> bool {
        !matches!(self, Boundary::NoFlux)
    }
}

/// Uniform computational grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    origin: Point,
    extents: [f64; 2],
    nodes: [usize; 2],
    bc: [Boundary; 2],
}

impl GridSpec {
    pub fn new(
        dim: usize,
        origin: Point,
        extents: [f64; 2],
        nodes: [usize; 2],
        bc: [Boundary; 2],
    ) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(invalid(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        let mut nodes = nodes;
        let mut extents = extents;
        let mut bc = bc;
        if dim == 1 {
            nodes[1] = 1;
            extents[1] = 0.0;
            bc[1] = Boundary::Periodic;
        }
        for axis in 0..dim {
            if !(extents[axis] > 0.0 && extents[axis].is_finite()) {
                return Err(invalid(format!("extent along axis {axis} must be positive")));
            }
            let min_nodes = if bc[axis].is_periodic() { 1 } else { 2 };
            if nodes[axis] < min_nodes.max(3) {
                return Err(invalid(format!("need at least 3 nodes along axis {axis}")));
            }
        }
        if dim == 2 {
            let shears = bc
                .iter()
                .filter(|b| matches!(b, Boundary::ShearPeriodic { .. }))
                .count();
            if shears == 2 {
                return Err(invalid("at most one axis may be shear-periodic"));
            }
        }
        Ok(Self {
            dim,
            origin,
            extents,
            nodes,
            bc,
        })
    }

    /// 1D no-flux interval `[x0, x1]` with spacing `h` (the right end is
    /// moved so that the spacing is exact).
    pub fn line(x0: f64, x1: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(x1 > x0) {
            return Err(invalid("line needs x1 > x0 and h > 0"));
        }
        let cells = ((x1 - x0) / h - 1e-9).ceil().max(2.0) as usize;
        Self::new(
            1,
            [x0, 0.0],
            [cells as f64 * h, 0.0],
            [cells + 1, 1],
            [Boundary::NoFlux, Boundary::Periodic],
        )
    }

    /// Fully periodic grid on one cell with `res` nodes per axis.
    pub fn periodic_cell(cell: &PeriodicCell, res: &[usize]) -> Result<Self> {
        if res.len() != cell.dim() {
            return Err(invalid("resolution must have one entry per axis"));
        }
        let nodes = [res[0], if cell.dim() == 2 { res[1] } else { 1 }];
        Self::new(
            cell.dim(),
            [0.0; 2],
            [cell.length(0), cell.length(1)],
            nodes,
            [Boundary::Periodic; 2],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }

    pub fn nodes(&self) -> [usize; 2] {
        self.nodes
    }

    pub fn boundary(&self, axis: usize) -> Boundary {
        self.bc[axis]
    }

    pub fn len(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `extent / (nodes - 1)` on no-flux axes, `extent / nodes` otherwise.
    pub fn spacing(&self, axis: usize) -> f64 {
        if axis >= self.dim {
            return 1.0;
        }
        match self.bc[axis] {
            Boundary::NoFlux => self.extents[axis] / (self.nodes[axis] - 1) as f64,
            _ => self.extents[axis] / self.nodes[axis] as f64,
        }
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Node volume `h_1 ... h_dim`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nodes[0] + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nodes[0], idx / self.nodes[0])
    }

    pub fn position(&self, i: usize, j: usize) -> Point {
        let y = if self.dim == 2 {
            self.origin[1] + j as f64 * self.spacing(1)
        } else {
            0.0
        };
        [self.origin[0] + i as f64 * self.spacing(0), y]
    }

    pub fn positions(&self) -> Vec<Point> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.coords(k);
                self.position(i, j)
            })
            .collect()
    }

    /// Whether every cell length is an integer multiple of the spacing and
    /// the origin sits on the cell lattice.
    pub fn resolves_cell(&self, cell: &PeriodicCell) -> bool {
        (0..self.dim).all(|a| {
            let r = cell.length(a) / self.spacing(a);
            let o = self.origin[a] / self.spacing(a);
            (r - r.round()).abs() < 1e-9 && (o - o.round()).abs() < 1e-9
        })
    }

    /// Linear index of the neighbour of `(i, j)` one step along `axis`
    /// (`step` is `+1` or `-1`), applying the boundary conditions.
    pub fn neighbor(&self, i: usize, j: usize, axis: usize, step: isize) -> (usize, usize) {
        let n = self.nodes;
        let (along, other) = if axis == 0 { (i, j) } else { (j, i) };
        let len = n[axis] as isize;
        let other_len = n[1 - axis] as isize;
        let mut a = along as isize + step;
        let mut o = other as isize;
        match self.bc[axis] {
            Boundary::Periodic => a = a.rem_euclid(len),
            Boundary::NoFlux => {
                if a < 0 {
                    a = (1).min(len - 1);
                } else if a >= len {
                    a = (len - 2).max(0);
                }
            }
            Boundary::ShearPeriodic { shift } => {
                if a >= len {
                    a -= len;
                    o = (o + shift).clamp(0, other_len - 1);
                } else if a < 0 {
                    a += len;
                    o = (o - shift).clamp(0, other_len - 1);
                }
            }
        }
        if axis == 0 {
            (a as usize, o as usize)
        } else {
            (o as usize, a as usize)
        }
    }
}

/// Simulation domain for planar-like data in a direction `n`.
///
/// `s(x) = n . (x - anchor)` is the signed distance to the initial front
/// plane. Axis-aligned and rational directions get (shear-)periodic
/// transverse boundaries; other directions get a no-flux rectangle whose
/// oblique walls are excluded from measurements by a time-growing margin.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalDomain {
    pub grid: GridSpec,
    pub direction: Direction,
    pub anchor: Point,
    /// Walls (by normal axis) that meet the front at an oblique angle.
    pub oblique_walls: [bool; 2],
    pub behind: f64,
    pub ahead: f64,
}

impl DirectionalDomain {
    /// Builds a domain covering `s in [-behind, ahead]`. `lateral` is the
    /// half-width across `n` used only by the no-flux fallback.
    pub fn build(
        cell: &PeriodicCell,
        n: Direction,
        h: f64,
        behind: f64,
        ahead: f64,
        lateral: f64,
    ) -> Result<Self> {
        if n.dim() != cell.dim() {
            return Err(invalid("direction and cell dimensions differ"));
        }
        if !(h > 0.0 && behind > 0.0 && ahead > 0.0) {
            return Err(invalid("h, behind and ahead must be positive"));
        }
        let snap = |v: f64| (v / h).floor() * h;
        if cell.dim() == 1 {
            let (lo, hi) = if n.get(0) > 0.0 {
                (-behind, ahead)
            } else {
                (-ahead, behind)
            };
            let x0 = snap(lo);
            let grid = GridSpec::line(x0, hi, h)?;
            return Ok(Self {
                grid,
                direction: n,
                anchor: [0.0; 2],
                oblique_walls: [false; 2],
                behind,
                ahead,
            });
        }

        let a = n.dominant_axis();
        let b = 1 - a;
        let (na, nb) = (n.get(a), n.get(b));
        let is_int = |v: f64| (v - v.round()).abs() < 1e-9;

        // transverse period P = m L_b with an integral lattice shift on the long axis
        let mut shear = None;
        for m in 1..=16 {
            let period = m as f64 * cell.length(b);
            let shift_len = period * nb / na;
            if is_int(period / h) && is_int(shift_len / h) && is_int(shift_len / cell.length(a)) {
                shear = Some((period, (shift_len / h).round() as isize));
                break;
            }
        }

        if let Some((period, shift)) = shear {
            // long-axis range so that every transverse line covers [-behind, ahead]
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for tb in [0.0, period] {
                for s in [-behind, ahead] {
                    let xa = (s - nb * tb) / na;
                    lo = lo.min(xa);
                    hi = hi.max(xa);
                }
            }
            let lo = snap(lo);
            let cells = ((hi - lo) / h - 1e-9).ceil().max(2.0) as usize;
            let mut origin = [0.0; 2];
            origin[a] = lo;
            let mut extents = [0.0; 2];
            extents[a] = cells as f64 * h;
            extents[b] = period;
            let mut nodes = [0; 2];
            nodes[a] = cells + 1;
            nodes[b] = (period / h).round() as usize;
            let mut bc = [Boundary::NoFlux; 2];
            bc[b] = if shift == 0 {
                Boundary::Periodic
            } else {
                Boundary::ShearPeriodic { shift }
            };
            let grid = GridSpec::new(2, origin, extents, nodes, bc)?;
            return Ok(Self {
                grid,
                direction: n,
                anchor: [0.0; 2],
                oblique_walls: [false; 2],
                behind,
                ahead,
            });
        }

        // no-flux rectangle around the rotated box
        let perp = [-n.get(1), n.get(0)];
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for s in [-behind, ahead] {
            for t in [-lateral, lateral] {
                for axis in 0..2 {
                    let v = s * n.get(axis) + t * perp[axis];
                    lo[axis] = lo[axis].min(v);
                    hi[axis] = hi[axis].max(v);
                }
            }
        }
        let origin = [snap(lo[0]), snap(lo[1])];
        let cells = [
            ((hi[0] - origin[0]) / h - 1e-9).ceil().max(2.0) as usize,
            ((hi[1] - origin[1]) / h - 1e-9).ceil().max(2.0) as usize,
        ];
        let grid = GridSpec::new(
            2,
            origin,
            [cells[0] as f64 * h, cells[1] as f64 * h],
            [cells[0] + 1, cells[1] + 1],
            [Boundary::NoFlux; 2],
        )?;
        let oblique = |v: f64| v.abs() > 1e-12 && v.abs() < 1.0 - 1e-12;
        Ok(Self {
            grid,
            direction: n,
            anchor: [0.0; 2],
            oblique_walls: [oblique(n.get(0)), oblique(n.get(1))],
            behind,
            ahead,
        })
    }

    /// Signed distance to the initial front plane along `n`.
    pub fn s(&self, x: Point) -> f64 {
        self.direction.dot([x[0] - self.anchor[0], x[1] - self.anchor[1]])
    }

    pub fn has_oblique_walls(&self) -> bool {
        self.oblique_walls.iter().any(|&w| w)
    }

    /// Whether `x` is at least `margin` away from every oblique wall.
    pub fn in_window(&self, x: Point, margin: f64) -> bool {
        let o = self.grid.origin();
        let e = self.grid.extents();
        (0..self.grid.dim()).all(|axis| {
            !self.oblique_walls[axis]
                || (x[axis] - o[axis] >= margin && o[axis] + e[axis] - x[axis] >= margin)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_rules() {
        let g = GridSpec::line(0.0, 10.0, 0.5).unwrap();
        assert_eq!(g.nodes()[0], 21);
        assert_eq!(g.spacing(0), 0.5);
        let cell = PeriodicCell::unit(2).unwrap();
        let p = GridSpec::periodic_cell(&cell, &[16, 16]).unwrap();
        assert_eq!(p.spacing(0), 1.0 / 16.0);
        assert!(p.resolves_cell(&cell));
    }

    #[test]
    fn neighbours_apply_boundaries() {
        let g = GridSpec::line(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.neighbor(0, 0, 0, -1), (1, 0));
        assert_eq!(g.neighbor(4, 0, 0, 1), (3, 0));
        let cell = PeriodicCell::unit(2).unwrap();
        let p = GridSpec::periodic_cell(&cell, &[4, 4]).unwrap();
        assert_eq!(p.neighbor(3, 0, 0, 1), (0, 0));
        assert_eq!(p.neighbor(0, 0, 1, -1), (0, 3));
    }

    #[test]
    fn diagonal_direction_gets_shear_domain() {
        let cell = PeriodicCell::unit(2).unwrap();
        let n = Direction::from_angle(std::f64::consts::FRAC_PI_4);
        let d = DirectionalDomain::build(&cell, n, 0.25, 5.0, 20.0, 10.0).unwrap();
        assert!(matches!(d.grid.boundary(1), Boundary::ShearPeriodic { shift: 4 }));
        assert!(!d.has_oblique_walls());
        // every transverse line covers the requested s-range
        let g = &d.grid;
        for j in 0..g.nodes()[1] {
            let first = d.s(g.position(0, j));
            let last = d.s(g.position(g.nodes()[0] - 1, j));
            assert!(first <= -5.0 + 1e-9 && last >= 20.0 - 1e-9);
        }
    }

    #[test]
    fn irrational_direction_falls_back_to_rectangle() {
        let cell = PeriodicCell::unit(2).unwrap();
        let n = Direction::from_angle(0.3);
        let d = DirectionalDomain::build(&cell, n, 0.5, 5.0, 10.0, 8.0).unwrap();
        assert!(d.has_oblique_walls());
        assert_eq!(d.grid.boundary(0), Boundary::NoFlux);
        let c = d.grid.position(d.grid.nodes()[0] / 2, d.grid.nodes()[1] / 2);
        assert!(d.in_window(c, 1.0));
        assert!(!d.in_window(d.grid.position(0, 0), 1.0));
    }

    #[test]
    fn axis_direction_uses_plain_periodic_transverse() {
        let cell = PeriodicCell::unit(2).unwrap();
        let n = Direction::from_angle(std::f64::consts::PI);
        let d = DirectionalDomain::build(&cell, n, 0.25, 5.0, 20.0, 10.0).unwrap();
        assert_eq!(d.grid.boundary(1), Boundary::Periodic);
        assert_eq!(d.grid.nodes()[1], 4);
    }
}
