//! Thermal cavity dissipator acting on the field factor of a (possibly joint)
//! density matrix.
//!
//! Matrices handled here are `blocks · d` square, with row/column index
//! `s · d + m` where `m` is the photon number and `s` labels an atomic level
//! (a single block for the bare field).

use crate::linalg::CMatrix;

/// `L[ρ] = κ(1+n_t) D[a]ρ + κ n_t D[a†]ρ` on the truncated ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dissipator {
    down: f64,
    up: f64,
}

impl Dissipator {
    pub fn new(kappa: f64, n_t: f64) -> Self {
        Self {
            down: kappa * (1.0 + n_t),
            up: kappa * n_t,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.down == 0.0 && self.up == 0.0
    }

    /// Upper bound on the decay rate of any matrix element.
    pub fn max_rate(&self, d: usize) -> f64 {
        (self.down + self.up) * d as f64
    }

    /// Writes `L[ρ]` into `out`.
    pub fn apply(&self, rho: &CMatrix, d: usize, out: &mut CMatrix) {
        let dim = rho.nrows();
        debug_assert_eq!(dim % d, 0);
        let n_max = d - 1;
        // diagonal of the truncated a a†: m + 1 below the edge, 0 at the edge
        let decay: Vec<f64> = (0..d)
            .map(|m| {
                let aad = if m < n_max { (m + 1) as f64 } else { 0.0 };
                0.5 * self.down * m as f64 + 0.5 * self.up * aad
            })
            .collect();
        let root: Vec<f64> = (0..=d).map(|m| (m as f64).sqrt()).collect();
        let src = rho.as_slice();
        let dst = out.as_mut_slice();
        for j in 0..dim {
            let mj = j % d;
            let col = &src[j * dim..(j + 1) * dim];
            let out_col = &mut dst[j * dim..(j + 1) * dim];
            for (o, (x, dec)) in out_col.iter_mut().zip(col.iter().zip(decay.iter().cycle())) {
                *o = x * -(dec + decay[mj]);
            }
            // ρ(m+1, mj+1) feeds (m, mj) through a ρ a†
            if mj < n_max {
                let next = &src[(j + 1) * dim..(j + 2) * dim];
                let w = self.down * root[mj + 1];
                for base in (0..dim).step_by(d) {
                    for mi in 0..n_max {
                        out_col[base + mi] += next[base + mi + 1] * (w * root[mi + 1]);
                    }
                }
            }
            // ρ(m−1, mj−1) feeds (m, mj) through a† ρ a
            if mj > 0 && self.up != 0.0 {
                let prev = &src[(j - 1) * dim..j * dim];
                let w = self.up * root[mj];
                for base in (0..dim).step_by(d) {
                    for mi in 1..d {
                        out_col[base + mi] += prev[base + mi - 1] * (w * root[mi]);
                    }
                }
            }
        }
    }

    /// Evolves `ρ` for `duration` under the dissipator alone (RK4 sub-steps).
    pub fn evolve(&self, rho: &CMatrix, d: usize, duration: f64) -> CMatrix {
        let mut state = rho.clone();
        self.evolve_in_place(&mut state, d, duration, &mut Scratch::default());
        state
    }

    /// [`Dissipator::evolve`] without allocating once `scratch` has been sized.
    pub fn evolve_in_place(&self, rho: &mut CMatrix, d: usize, duration: f64, scratch: &mut Scratch) {
        if self.is_zero() || duration <= 0.0 {
            return;
        }
        let steps = ((duration * self.max_rate(d)) / 0.25).ceil().max(1.0) as usize;
        let h = duration / steps as f64;
        scratch.fit(rho.nrows());
        let Scratch { k, acc, tmp } = scratch;
        for _ in 0..steps {
            // classic RK4 on a linear time-independent generator
            self.apply(rho, d, k);
            stage(rho, k, acc, tmp, 0.5 * h, 0.0);
            self.apply(tmp, d, k);
            stage(rho, k, acc, tmp, 0.5 * h, 2.0);
            self.apply(tmp, d, k);
            stage(rho, k, acc, tmp, h, 2.0);
            self.apply(tmp, d, k);
            for ((s, a), k) in rho.as_mut_slice().iter_mut().zip(acc.as_slice()).zip(k.as_slice()) {
                *s += (a + k) * (h / 6.0);
            }
        }
    }
}

/// `acc ← keep·acc + w·k` (with `keep = 0` on the first stage) and
/// `tmp ← state + f·k`.
fn stage(state: &CMatrix, k: &CMatrix, acc: &mut CMatrix, tmp: &mut CMatrix, f: f64, w: f64) {
    let first = w == 0.0;
    let w = if first { 1.0 } else { w };
    for ((a, t), (s, k)) in acc
        .as_mut_slice()
        .iter_mut()
        .zip(tmp.as_mut_slice().iter_mut())
        .zip(state.as_slice().iter().zip(k.as_slice()))
    {
        *a = if first { k * w } else { *a + k * w };
        *t = s + k * f;
    }
}

/// Work buffers for [`Dissipator::evolve_in_place`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    k: CMatrix,
    acc: CMatrix,
    tmp: CMatrix,
}

impl Scratch {
    fn fit(&mut self, dim: usize) {
        if self.k.nrows() != dim {
            self.k = CMatrix::zeros(dim, dim);
            self.acc = CMatrix::zeros(dim, dim);
            self.tmp = CMatrix::zeros(dim, dim);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, c};

    fn random_density(dim: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(dim, dim, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let rho = &g * g.adjoint();
        let tr = linalg::trace(&rho);
        rho / tr
    }

    #[test]
    fn generator_is_traceless_and_hermitian() {
        let d = 8;
        let rho = random_density(2 * d, 3);
        let mut out = CMatrix::zeros(2 * d, 2 * d);
        Dissipator::new(3.0, 0.2).apply(&rho, d, &mut out);
        assert!(linalg::trace(&out).norm() < 1e-12);
        assert!(linalg::hermiticity_error(&out) < 1e-12);
    }

    #[test]
    fn matches_dense_operator_form() {
        let d = 7;
        let rho = random_density(d, 11);
        let (kappa, nt) = (1.3, 0.4);
        let mut a = CMatrix::zeros(d, d);
        for n in 1..d {
            a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
        }
        let ad = a.adjoint();
        let half = c(0.5, 0.0);
        let d_a = &a * &rho * &ad - (&ad * &a * &rho + &rho * &ad * &a) * half;
        let d_ad = &ad * &rho * &a - (&a * &ad * &rho + &rho * &a * &ad) * half;
        let dense = d_a * c(kappa * (1.0 + nt), 0.0) + d_ad * c(kappa * nt, 0.0);
        let mut out = CMatrix::zeros(d, d);
        Dissipator::new(kappa, nt).apply(&rho, d, &mut out);
        assert!(linalg::max_abs(&(out - dense)) < 1e-12);
    }
}
