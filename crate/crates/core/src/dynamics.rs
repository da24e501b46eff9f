//! Node dynamics, mismatched coupling functions and the network vector
//! field
//!
//! ```text
//! x_i' = f(x_i) + alpha * sum_j A_ij (Gamma + delta cos(omega t) R_ij) (x_j - x_i)
//! ```
//!
//! together with its linearisation about the synchronization manifold.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::spectra::eigenvalues_symmetric;

/// Any state component beyond this magnitude aborts the trajectory.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

/// Isolated node vector field `f: R^q -> R^q`.
pub trait OscillatorModel: Send + Sync {
    fn dim(&self) -> usize;
    fn name(&self) -> &str;
    fn rhs(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, x: &[f64]) -> Matrix;
    /// Recorded bound on `||Df||` over the absorbing ball, if known.
    fn jacobian_bound(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lorenz {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for Lorenz {
    fn default() -> Self {
        Self { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0 }
    }
}

impl OscillatorModel for Lorenz {
    fn dim(&self) -> usize {
        3
    }

    fn name(&self) -> &str {
        "lorenz"
    }

    #[inline]
    fn rhs(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * (x[1] - x[0]);
        out[1] = x[0] * (self.rho - x[2]) - x[1];
        out[2] = x[0] * x[1] - self.beta * x[2];
    }

    fn jacobian(&self, x: &[f64]) -> Matrix {
        Matrix::from_rows(&[
            vec![-self.sigma, self.sigma, 0.0],
            vec![self.rho - x[2], -1.0, -x[0]],
            vec![x[1], x[0], -self.beta],
        ])
    }
}

pub fn lorenz_rhs(x: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    Lorenz::default().rhs(&x, &mut out);
    out
}

/// One `q x q` mismatch direction `R_ij` per ordered pair `(i, j)` with
/// `A_ij = 1`, stored in the graph's directed-pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchMatrices {
    q: usize,
    data: Vec<f64>,
}

impl MismatchMatrices {
    pub fn zeros(graph: &Graph, q: usize) -> Self {
        Self { q, data: vec![0.0; graph.pair_count() * q * q] }
    }

    /// Builds the per-pair matrices from a closure over `(i, j)`.
    pub fn from_fn(graph: &Graph, q: usize, mut f: impl FnMut(usize, usize) -> Matrix) -> Self {
        let mut data = Vec::with_capacity(graph.pair_count() * q * q);
        for i in 0..graph.n() {
            for &j in graph.neighbors(i) {
                let m = f(i, j);
                assert_eq!((m.rows(), m.cols()), (q, q));
                data.extend_from_slice(m.as_slice());
            }
        }
        Self { q, data }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.q * self.q)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn pair_slice(&self, pair: usize) -> &[f64] {
        let qq = self.q * self.q;
        &self.data[pair * qq..(pair + 1) * qq]
    }

    pub fn pair(&self, pair: usize) -> Matrix {
        Matrix::from_vec(self.q, self.q, self.pair_slice(pair).to_vec())
    }

    pub fn get(&self, graph: &Graph, i: usize, j: usize) -> Option<Matrix> {
        graph.pair_index(i, j).map(|p| self.pair(p))
    }
}

/// Draws a GOE matrix (off-diagonal variance 1, diagonal variance 2) for
/// every ordered pair and scales it to unit max-row-sum norm.
///
/// With `symmetric_mismatch` the matrix of `(j, i)` is a copy of the one
/// drawn for `(i, j)`, `i < j`.
pub fn sample_perturbation_matrices(
    graph: &Graph,
    q: usize,
    seed: u64,
    symmetric_mismatch: bool,
) -> Result<MismatchMatrices> {
    if q == 0 {
        return Err(Error::InvalidParameter("state dimension q must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = MismatchMatrices::zeros(graph, q);
    let qq = q * q;
    for i in 0..graph.n() {
        for (k, &j) in graph.neighbors(i).iter().enumerate() {
            let pair = graph.pair_offset(i) + k;
            if symmetric_mismatch && j < i {
                let src = graph.pair_index(j, i).expect("undirected edge");
                let (head, tail) = out.data.split_at_mut(pair * qq);
                tail[..qq].copy_from_slice(&head[src * qq..(src + 1) * qq]);
                continue;
            }
            let m = sample_goe_unit(q, &mut rng);
            out.data[pair * qq..(pair + 1) * qq].copy_from_slice(m.as_slice());
        }
    }
    Ok(out)
}

fn sample_goe_unit(q: usize, rng: &mut ChaCha8Rng) -> Matrix {
    loop {
        let mut m = Matrix::zeros(q, q);
        for a in 0..q {
            let d: f64 = StandardNormal.sample(rng);
            m[(a, a)] = std::f64::consts::SQRT_2 * d;
            for b in (a + 1)..q {
                let v: f64 = StandardNormal.sample(rng);
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        let norm = m.norm_inf();
        if norm > 0.0 && norm.is_finite() {
            return m.scaled(1.0 / norm);
        }
    }
}

/// Coupling function data: `H_ij(t, x) = Gamma x + delta cos(omega t) R_ij x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    gamma_matrix: Matrix,
    gamma: f64,
    identity_gamma: bool,
    pub delta: f64,
    pub omega: f64,
    mismatch: MismatchMatrices,
    pub seed: u64,
}

impl CouplingSpec {
    /// Identity `Gamma` (so `gamma = 1`) with freshly sampled mismatch
    /// directions.
    pub fn new(graph: &Graph, q: usize, delta: f64, omega: f64, seed: u64) -> Result<Self> {
        Self::with_options(graph, q, delta, omega, seed, false)
    }

    pub fn with_options(
        graph: &Graph,
        q: usize,
        delta: f64,
        omega: f64,
        seed: u64,
        symmetric_mismatch: bool,
    ) -> Result<Self> {
        let mismatch = sample_perturbation_matrices(graph, q, seed, symmetric_mismatch)?;
        Self::from_parts(Matrix::identity(q), None, delta, omega, mismatch, seed)
    }

    /// `gamma` (the smallest real part of the eigenvalues of `Gamma`) is
    /// computed when `Gamma` is symmetric and must be supplied otherwise.
    pub fn from_parts(
        gamma_matrix: Matrix,
        gamma: Option<f64>,
        delta: f64,
        omega: f64,
        mismatch: MismatchMatrices,
        seed: u64,
    ) -> Result<Self> {
        let q = mismatch.q();
        if gamma_matrix.rows() != q || gamma_matrix.cols() != q {
            return Err(Error::InvalidParameter("Gamma must be q x q".into()));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega must be > 0, got {omega}")));
        }
        let gamma = match gamma {
            Some(g) => g,
            None if gamma_matrix.max_asymmetry() <= 1e-12 => eigenvalues_symmetric(&gamma_matrix)?[0],
            None => {
                return Err(Error::InvalidParameter("gamma must be given explicitly for a non-symmetric Gamma".into()))
            }
        };
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        let identity_gamma = gamma_matrix == Matrix::identity(q);
        Ok(Self { gamma_matrix, gamma, identity_gamma, delta, omega, mismatch, seed })
    }

    pub fn gamma_matrix(&self) -> &Matrix {
        &self.gamma_matrix
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mismatch(&self) -> &MismatchMatrices {
        &self.mismatch
    }

    pub fn q(&self) -> usize {
        self.mismatch.q()
    }

    /// `delta cos(omega t)`, the common scalar factor of every `P_ij(t)`.
    #[inline]
    pub fn modulation(&self, t: f64) -> f64 {
        self.delta * (self.omega * t).cos()
    }

    /// `P_ij(t)` for directed pair index `pair`.
    pub fn perturbation(&self, pair: usize, t: f64) -> Matrix {
        self.mismatch.pair(pair).scaled(self.modulation(t))
    }
}

/// Diffusively coupled network built on a borrowed graph.
#[derive(Debug, Clone)]
pub struct NetworkSystem<'g, M> {
    graph: &'g Graph,
    model: M,
    coupling: CouplingSpec,
    alpha: f64,
}

impl<'g, M: OscillatorModel> NetworkSystem<'g, M> {
    pub fn new(graph: &'g Graph, model: M, coupling: CouplingSpec, alpha: f64) -> Result<Self> {
        if coupling.q() != model.dim() {
            return Err(Error::InvalidParameter("coupling and model dimensions differ".into()));
        }
        if coupling.mismatch().len() != graph.pair_count() {
            return Err(Error::InvalidParameter("mismatch matrices do not match the graph".into()));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        if !graph.is_connected() {
            return Err(Error::InvalidGraph("network graph must be connected".into()));
        }
        Ok(Self { graph, model, coupling, alpha })
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn coupling(&self) -> &CouplingSpec {
        &self.coupling
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q(&self) -> usize {
        self.model.dim()
    }

    pub fn state_dim(&self) -> usize {
        self.graph.n() * self.q()
    }

    /// Evaluates the network vector field into `out`. Touches only existing
    /// edges, `O(|E| q^2)` per call.
    pub fn network_rhs(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let q = self.q();
        debug_assert_eq!(x.len(), self.state_dim());
        if x.iter().any(|v| !(v.abs() <= BLOWUP_THRESHOLD)) {
            return Err(Error::BlowUp { t });
        }
        let c = self.coupling.modulation(t);
        let use_r = c != 0.0;
        let mut diff_sum = [0.0f64; 8];
        let mut r_sum = [0.0f64; 8];
        let mut d = [0.0f64; 8];
        let mut big = Vec::new();
        if q > 8 {
            big = vec![0.0; 3 * q];
        }

        for i in 0..self.graph.n() {
            let xi = &x[i * q..(i + 1) * q];
            let oi = &mut out[i * q..(i + 1) * q];
            self.model.rhs(xi, oi);
            if self.alpha == 0.0 {
                continue;
            }
            let (ds, rs, dd) = if q <= 8 {
                (&mut diff_sum[..q], &mut r_sum[..q], &mut d[..q])
            } else {
                let (a, rest) = big.split_at_mut(q);
                let (b, c) = rest.split_at_mut(q);
                (a, b, c)
            };
            ds.fill(0.0);
            rs.fill(0.0);
            let base = self.graph.pair_offset(i);
            for (k, &j) in self.graph.neighbors(i).iter().enumerate() {
                let xj = &x[j * q..(j + 1) * q];
                for a in 0..q {
                    dd[a] = xj[a] - xi[a];
                    ds[a] += dd[a];
                }
                if use_r {
                    let r = self.coupling.mismatch.pair_slice(base + k);
                    for a in 0..q {
                        let row = &r[a * q..(a + 1) * q];
                        let mut s = 0.0;
                        for b in 0..q {
                            s += row[b] * dd[b];
                        }
                        rs[a] += s;
                    }
                }
            }
            for a in 0..q {
                let h = if self.coupling.identity_gamma {
                    ds[a]
                } else {
                    let row = self.coupling.gamma_matrix.row(a);
                    (0..q).map(|b| row[b] * ds[b]).sum()
                };
                oi[a] += self.alpha * (h + c * rs[a]);
            }
        }
        Ok(())
    }

    /// Applies the coupling Jacobian at modulation `c`,
    /// `J_c = alpha sum_(i,j) A_ij (Gamma + c R_ij) (xi_j - xi_i)`, or its
    /// transpose.
    fn apply_coupling(&self, c: f64, transpose: bool, v: &[f64], out: &mut [f64]) {
        let q = self.q();
        out.fill(0.0);
        let mut w = Matrix::zeros(q, q);
        for i in 0..self.graph.n() {
            let base = self.graph.pair_offset(i);
            for (k, &j) in self.graph.neighbors(i).iter().enumerate() {
                let r = self.coupling.mismatch.pair_slice(base + k);
                for a in 0..q {
                    for b in 0..q {
                        w[(a, b)] = self.alpha * (self.coupling.gamma_matrix[(a, b)] + c * r[a * q + b]);
                    }
                }
                for a in 0..q {
                    for b in 0..q {
                        if transpose {
                            let y = w[(b, a)] * v[i * q + b];
                            out[j * q + a] += y;
                            out[i * q + a] -= y;
                        } else {
                            out[i * q + a] += w[(a, b)] * (v[j * q + b] - v[i * q + b]);
                        }
                    }
                }
            }
        }
    }

    /// Power-iteration estimate of the spectral norm of the coupling
    /// Jacobian at modulation `c`. Bounds the magnitude of every coupling
    /// eigenvalue, which is what limits an explicit step size.
    pub fn coupling_norm_estimate(&self, c: f64, iterations: usize) -> f64 {
        let dim = self.state_dim();
        let mut v: Vec<f64> = (0..dim).map(|k| ((k + 1) as f64).sin()).collect();
        let mut u = vec![0.0; dim];
        let mut sigma2 = 0.0;
        for _ in 0..iterations.max(1) {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            self.apply_coupling(c, false, &v, &mut u);
            sigma2 = u.iter().map(|x| x * x).sum::<f64>();
            self.apply_coupling(c, true, &u, &mut v);
        }
        sigma2.sqrt()
    }

    /// Linear perturbation operator `P(t)` acting on stacked transverse
    /// states: block `(i, j)` is `A_ij P_ij(t)` for `i != j`, block `(i, i)`
    /// is `-sum_j A_ij P_ij(t)`.
    pub fn perturbation_operator(&self, t: f64) -> Matrix {
        let q = self.q();
        let n = self.graph.n();
        let mut p = Matrix::zeros(n * q, n * q);
        for i in 0..n {
            let base = self.graph.pair_offset(i);
            for (k, &j) in self.graph.neighbors(i).iter().enumerate() {
                let pij = self.coupling.perturbation(base + k, t);
                p.add_block(i * q, j * q, &pij, 1.0);
                p.add_block(i * q, i * q, &pij, -1.0);
            }
        }
        p
    }

    /// `I_n ⊗ Df(s) - alpha (L ⊗ Gamma) + alpha P(t)`, the linearisation of
    /// the network about the synchronous state `(s, …, s)`.
    pub fn variational_operator(&self, t: f64, s: &[f64]) -> Matrix {
        let n = self.graph.n();
        let df = self.model.jacobian(s);
        let lg = self.graph.laplacian().kron(&self.coupling.gamma_matrix);
        let base = Matrix::identity(n).kron(&df);
        let mut out = &base - &lg.scaled(self.alpha);
        if self.coupling.delta != 0.0 {
            out = &out + &self.perturbation_operator(t).scaled(self.alpha);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind, GraphRecipe};

    #[test]
    fn lorenz_values() {
        assert_eq!(lorenz_rhs([0.0; 3]), [0.0; 3]);
        let v = lorenz_rhs([1.0, 1.0, 1.0]);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 26.0);
        assert!((v[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
        let c = 72f64.sqrt();
        let fp = lorenz_rhs([c, c, 27.0]);
        assert!(fp.iter().all(|v| v.abs() < 1e-12), "{fp:?}");
    }

    #[test]
    fn mismatch_matrices_are_symmetric_unit_norm() {
        let g = generate(&GraphRecipe::new(GraphKind::Complete, 6, 1)).unwrap();
        let r = sample_perturbation_matrices(&g, 3, 99, false).unwrap();
        assert_eq!(r.len(), g.pair_count());
        for p in 0..r.len() {
            let m = r.pair(p);
            assert!((m.norm_inf() - 1.0).abs() < 1e-12);
            assert_eq!(m, m.transpose());
        }
        let again = sample_perturbation_matrices(&g, 3, 99, false).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn symmetric_mismatch_mirrors_pairs() {
        let g = generate(&GraphRecipe::new(GraphKind::Path, 4, 1)).unwrap();
        let r = sample_perturbation_matrices(&g, 3, 5, true).unwrap();
        assert_eq!(r.get(&g, 1, 2), r.get(&g, 2, 1));
        let r = sample_perturbation_matrices(&g, 3, 5, false).unwrap();
        assert_ne!(r.get(&g, 1, 2), r.get(&g, 2, 1));
    }

    #[test]
    fn two_node_hand_evaluation() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let c = CouplingSpec::new(&g, 3, 0.0, 1.0, 0).unwrap();
        let sys = NetworkSystem::new(&g, Lorenz::default(), c, 1.0).unwrap();
        let x = [1.0, 2.0, 3.0, -1.0, 0.5, 4.0];
        let mut out = [0.0; 6];
        sys.network_rhs(0.3, &x, &mut out).unwrap();
        let f1 = lorenz_rhs([1.0, 2.0, 3.0]);
        for a in 0..3 {
            assert!((out[a] - (f1[a] + x[3 + a] - x[a])).abs() < 1e-14);
        }
    }

    #[test]
    fn perturbed_two_node_matches_formula() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let c = CouplingSpec::new(&g, 3, 0.7, 2.0, 11).unwrap();
        let r01 = c.mismatch().get(&g, 0, 1).unwrap();
        let t = 0.4;
        let sys = NetworkSystem::new(&g, Lorenz::default(), c, 1.5).unwrap();
        let x = [1.0, 2.0, 3.0, -1.0, 0.5, 4.0];
        let mut out = [0.0; 6];
        sys.network_rhs(t, &x, &mut out).unwrap();
        let d: Vec<f64> = (0..3).map(|a| x[3 + a] - x[a]).collect();
        let rd = r01.mul_vec(&d);
        let f1 = lorenz_rhs([1.0, 2.0, 3.0]);
        let m = 0.7 * (2.0 * t).cos();
        for a in 0..3 {
            let want = f1[a] + 1.5 * (d[a] + m * rd[a]);
            assert!((out[a] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn blow_up_is_reported_with_time() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let c = CouplingSpec::new(&g, 3, 0.0, 1.0, 0).unwrap();
        let sys = NetworkSystem::new(&g, Lorenz::default(), c, 1.0).unwrap();
        let mut out = [0.0; 6];
        let err = sys.network_rhs(2.5, &[0.0, 0.0, 2e6, 0.0, 0.0, 0.0], &mut out).unwrap_err();
        assert_eq!(err, Error::BlowUp { t: 2.5 });
        assert!(sys.network_rhs(2.5, &[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0], &mut out).is_err());
    }

    #[test]
    fn rejects_bad_coupling_parameters() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert!(CouplingSpec::new(&g, 3, -1.0, 1.0, 0).is_err());
        assert!(CouplingSpec::new(&g, 3, 1.0, 0.0, 0).is_err());
        let r = MismatchMatrices::zeros(&g, 3);
        let neg = Matrix::identity(3).scaled(-1.0);
        assert!(CouplingSpec::from_parts(neg, None, 0.0, 1.0, r.clone(), 0).is_err());
        let mut skew = Matrix::identity(3);
        skew[(0, 1)] = 0.5;
        assert!(CouplingSpec::from_parts(skew.clone(), None, 0.0, 1.0, r.clone(), 0).is_err());
        let c = CouplingSpec::from_parts(skew, Some(1.0), 0.0, 1.0, r, 0).unwrap();
        assert_eq!(c.gamma(), 1.0);
    }

    #[test]
    fn symmetric_gamma_gives_min_eigenvalue() {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let r = MismatchMatrices::zeros(&g, 2);
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let c = CouplingSpec::from_parts(m, None, 0.0, 1.0, r, 0).unwrap();
        assert!((c.gamma() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unperturbed_variational_operator() {
        let g = generate(&GraphRecipe::new(GraphKind::Path, 3, 0)).unwrap();
        let c = CouplingSpec::new(&g, 3, 0.0, 1.0, 4).unwrap();
        let sys = NetworkSystem::new(&g, Lorenz::default(), c, 0.8).unwrap();
        let s = [1.0, -2.0, 20.0];
        let v = sys.variational_operator(1.0, &s);
        let want = &Matrix::identity(3).kron(&Lorenz::default().jacobian(&s))
            - &g.laplacian().kron(&Matrix::identity(3)).scaled(0.8);
        assert_eq!(v, want);
        // synchronous direction is untouched by the coupling
        let lg = g.laplacian().kron(&Matrix::identity(3));
        let sync: Vec<f64> = (0..3).flat_map(|_| [0.3, -1.1, 2.0]).collect();
        assert!(lg.mul_vec(&sync).iter().all(|v| *v == 0.0));
    }
}
