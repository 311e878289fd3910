use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

/// An n-body phase point in exponential coordinates.
///
/// The flat vector layout used by the integrator and the Newton solvers is
/// `(u₁, v₁, …, u_n, v_n, p_u₁, p_v₁, …, p_un, p_vn)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartState {
    pub q: Vec<Vector2<f64>>,
    pub p: Vec<Vector2<f64>>,
}

impl ChartState {
    pub fn new(q: Vec<Vector2<f64>>, p: Vec<Vector2<f64>>) -> Self {
        assert_eq!(q.len(), p.len(), "positions and momenta must pair up");
        Self { q, p }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn dim(&self) -> usize {
        4 * self.q.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.n();
        let mut z = DVector::zeros(4 * n);
        for i in 0..n {
            z[2 * i] = self.q[i][0];
            z[2 * i + 1] = self.q[i][1];
            z[2 * n + 2 * i] = self.p[i][0];
            z[2 * n + 2 * i + 1] = self.p[i][1];
        }
        z
    }

    pub fn from_vector(z: &DVector<f64>) -> Self {
        assert!(z.len() % 4 == 0, "phase vector length must be a multiple of 4");
        let n = z.len() / 4;
        let q = (0..n).map(|i| Vector2::new(z[2 * i], z[2 * i + 1])).collect();
        let p = (0..n).map(|i| Vector2::new(z[2 * n + 2 * i], z[2 * n + 2 * i + 1])).collect();
        Self { q, p }
    }

    /// Smallest chart distance between two bodies.
    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                best = best.min((self.q[i] - self.q[j]).norm());
            }
        }
        best
    }
}

/// Canonical symplectic matrix `[[0, I], [−I, 0]]` for the layout of [`ChartState::to_vector`].
pub fn canonical_omega(dim: usize) -> nalgebra::DMatrix<f64> {
    let h = dim / 2;
    let mut om = nalgebra::DMatrix::zeros(dim, dim);
    for k in 0..h {
        om[(k, h + k)] = 1.0;
        om[(h + k, k)] = -1.0;
    }
    om
}
