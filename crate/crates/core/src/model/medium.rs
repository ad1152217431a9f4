use super::{PeriodicCell, Point, Sym2, TensorExpr, TensorField, VectorField};
use crate::error::{invalid, Result};
use sha2::{Digest, Sha256};

/// A periodic medium: cell, diffusion matrix `A(x)` and advection `q(x)`.
#[derive(Clone, Debug)]
pub struct PeriodicMedium {
    cell: PeriodicCell,
    diffusion: TensorField,
    flow: VectorField,
    diffusion_expr: Option<TensorExpr>,
}

impl PeriodicMedium {
    pub fn new(cell: PeriodicCell, diffusion: TensorField, flow: VectorField) -> Result<Self> {
        Self::with_exprs(cell, diffusion, flow, None)
    }

    /// Like [`PeriodicMedium::new`], keeping the closed form of `A` so that
    /// `div(A n)` is evaluated analytically.
    pub fn with_exprs(
        cell: PeriodicCell,
        diffusion: TensorField,
        flow: VectorField,
        diffusion_expr: Option<TensorExpr>,
    ) -> Result<Self> {
        if diffusion.samples().cell() != &cell || flow.samples().cell() != &cell {
            return Err(invalid("coefficient fields must share the medium cell"));
        }
        Ok(Self {
            cell,
            diffusion,
            flow,
            diffusion_expr,
        })
    }

    /// `A = I`, `q = 0` on the given cell.
    pub fn homogeneous(cell: PeriodicCell) -> Result<Self> {
        Self::constant(cell, Sym2::IDENTITY)
    }

    /// Constant diffusion matrix, no flow.
    pub fn constant(cell: PeriodicCell, a: Sym2) -> Result<Self> {
        let res = vec![4; cell.dim()];
        let diffusion = TensorField::constant(cell, &res, a)?;
        let flow = VectorField::zero(cell, &res)?;
        let expr = if cell.dim() == 1 {
            TensorExpr::Constant {
                matrix: vec![vec![a.xx]],
            }
        } else {
            TensorExpr::Constant {
                matrix: vec![vec![a.xx, a.xy], vec![a.xy, a.yy]],
            }
        };
        Self::with_exprs(cell, diffusion, flow, Some(expr))
    }

    pub fn cell(&self) -> &PeriodicCell {
        &self.cell
    }

    pub fn dim(&self) -> usize {
        self.cell.dim()
    }

    pub fn diffusion(&self) -> &TensorField {
        &self.diffusion
    }

    pub fn flow(&self) -> &VectorField {
        &self.flow
    }

    pub fn a1(&self) -> f64 {
        self.diffusion.a1()
    }

    pub fn a2(&self) -> f64 {
        self.diffusion.a2()
    }

    pub fn diffusion_at(&self, x: Point) -> Sym2 {
        self.diffusion.evaluate(x)
    }

    pub fn flow_at(&self, x: Point) -> [f64; 2] {
        self.flow.evaluate(x)
    }

    /// `div(A n)(x)`: closed form when known, centered differences otherwise.
    pub fn div_an(&self, x: Point, n: Point) -> f64 {
        if let Some(e) = &self.diffusion_expr {
            if let Ok(v) = e.div_an(&self.cell, x, n) {
                return v;
            }
        }
        let s = self.diffusion.samples();
        let mut d = 0.0;
        for axis in 0..self.dim() {
            let h = s.spacing(axis);
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let ap = self.diffusion_at(xp).apply(n)[axis];
            let am = self.diffusion_at(xm).apply(n)[axis];
            d += (ap - am) / (2.0 * h);
        }
        d
    }

    /// `sup |q|`.
    pub fn flow_sup(&self) -> f64 {
        self.flow.sup_norm()
    }

    /// `sup_x |q(x) . n|` over the samples.
    pub fn flow_dot_sup(&self, n: Point) -> f64 {
        self.flow
            .samples()
            .data()
            .iter()
            .map(|q| (q[0] * n[0] + q[1] * n[1]).abs())
            .fold(0.0, f64::max)
    }

    /// `sup_x |div(A n)|` sampled on the coefficient grid.
    pub fn div_an_sup(&self, n: Point) -> f64 {
        let s = self.diffusion.samples();
        let [r0, r1] = s.resolution();
        let mut worst = 0.0f64;
        for j in 0..r1 {
            for i in 0..r0 {
                let x = [i as f64 * s.spacing(0), j as f64 * s.spacing(1)];
                let x = if self.dim() == 1 { [x[0], 0.0] } else { x };
                worst = worst.max(self.div_an(x, n).abs());
            }
        }
        worst
    }

    /// Whether `A` and `q` are constant in space.
    pub fn is_homogeneous(&self) -> bool {
        let a = self.diffusion.samples().data();
        let q = self.flow.samples().data();
        a.iter().all(|m| *m == a[0]) && q.iter().all(|v| *v == q[0])
    }

    /// Content hash of the sampled coefficients (hex, 16 chars).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for l in self.cell.lengths() {
            h.update(l.to_le_bytes());
        }
        for m in self.diffusion.samples().data() {
            for v in [m.xx, m.xy, m.yy] {
                h.update(v.to_le_bytes());
            }
        }
        for q in self.flow.samples().data() {
            h.update(q[0].to_le_bytes());
            h.update(q[1].to_le_bytes());
        }
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MediumSpec;

    #[test]
    fn analytic_and_numeric_div_an_agree() {
        let spec: MediumSpec = serde_json::from_str(
            r#"{"cell":[1.0,1.0],"resolution":[256,256],"diffusion":{"kind":"cosine_tensor","amplitude":0.5,"amplitude_y":0.3}}"#,
        )
        .unwrap();
        let m = spec.build().unwrap();
        let plain = PeriodicMedium::new(*m.cell(), m.diffusion().clone(), m.flow().clone()).unwrap();
        let n = [0.6, 0.8];
        for x in [[0.1, 0.2], [0.37, 0.91]] {
            let a = m.div_an(x, n);
            let b = plain.div_an(x, n);
            assert!((a - b).abs() < 2e-3 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn homogeneity_and_hash() {
        let m = PeriodicMedium::homogeneous(PeriodicCell::unit(2).unwrap()).unwrap();
        assert!(m.is_homogeneous());
        assert_eq!(m.hash(), m.clone().hash());
        let other = PeriodicMedium::constant(PeriodicCell::unit(2).unwrap(), Sym2::diag(1.0, 4.0)).unwrap();
        assert_ne!(m.hash(), other.hash());
        assert_eq!((other.a1(), other.a2()), (1.0, 4.0));
    }
}
