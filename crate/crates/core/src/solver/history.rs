use crate::error::{Error, Result};
use crate::kernels::moments::mean_omega;
use crate::kernels::{check_fast_l1_soe, KernelTable};
use crate::mesh::TimeMesh;
use crate::soe::{phi1, SoeApprox};

/// How the memory term `sum_{k<n} A^(n)_{n-k} du^k` is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Memory<'a> {
    /// Direct convolution with a stored kernel table; keeps every increment.
    Direct(&'a KernelTable),
    /// Fast L1: exact L1 diagonal plus exponential histories, `Nq` values
    /// per spatial unknown regardless of `N`.
    Soe(&'a SoeApprox),
}

impl Memory<'_> {
    pub fn alpha(&self) -> f64 {
        match self {
            Memory::Direct(t) => t.alpha(),
            Memory::Soe(s) => s.alpha,
        }
    }

    pub fn theta(&self) -> f64 {
        match self {
            Memory::Direct(t) => t.theta(),
            Memory::Soe(_) => 0.0,
        }
    }

    pub(crate) fn start(&self, mesh: &TimeMesh, dim: usize) -> Result<History<'_>> {
        match *self {
            Memory::Direct(table) => {
                if table.len() != mesh.len() {
                    return Err(Error::LengthMismatch { expected: mesh.len(), got: table.len() });
                }
                Ok(History::Direct { table, dim, incr: Vec::with_capacity(mesh.len() * dim) })
            }
            Memory::Soe(soe) => {
                check_fast_l1_soe(mesh, soe.alpha, soe)?;
                Ok(History::Soe { soe, dim, h: vec![0.0; soe.len() * dim] })
            }
        }
    }
}

pub(crate) enum History<'a> {
    Direct { table: &'a KernelTable, dim: usize, incr: Vec<f64> },
    /// `h[l * dim + i] = sum_{k<=n} exp(-theta_l (t_n - t_k)) phi1(theta_l tau_k) du^k_i`.
    Soe { soe: &'a SoeApprox, dim: usize, h: Vec<f64> },
}

impl History<'_> {
    pub fn diag(&self, mesh: &TimeMesh, n: usize) -> f64 {
        match self {
            History::Direct { table, .. } => table.get(n, 0),
            History::Soe { soe, .. } => mean_omega(soe.alpha, 0.0, mesh.tau(n)),
        }
    }

    /// `out = sum_{k<n} A^(n)_{n-k} du^k`.
    pub fn accumulate(&self, mesh: &TimeMesh, n: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        match self {
            History::Direct { table, dim, incr } => {
                let row = table.row(n);
                for k in 1..n {
                    let a = row[n - k];
                    let du = &incr[(k - 1) * dim..k * dim];
                    for (o, d) in out.iter_mut().zip(du) {
                        *o += a * d;
                    }
                }
            }
            History::Soe { soe, dim, h } => {
                let tau = mesh.tau(n);
                for (l, (w, th)) in soe.weights.iter().zip(&soe.nodes).enumerate() {
                    let f = w * (-th * tau).exp();
                    for (o, hl) in out.iter_mut().zip(&h[l * dim..(l + 1) * dim]) {
                        *o += f * hl;
                    }
                }
            }
        }
    }

    pub fn push(&mut self, mesh: &TimeMesh, n: usize, du: &[f64]) {
        match self {
            History::Direct { incr, .. } => incr.extend_from_slice(du),
            History::Soe { soe, dim, h } => {
                let tau = mesh.tau(n);
                for (l, th) in soe.nodes.iter().enumerate() {
                    let decay = (-th * tau).exp();
                    let gain = phi1(th * tau);
                    for (hl, d) in h[l * *dim..(l + 1) * *dim].iter_mut().zip(du) {
                        *hl = decay * *hl + gain * d;
                    }
                }
            }
        }
    }

    /// Number of stored history values.
    pub fn stored(&self) -> usize {
        match self {
            History::Direct { incr, .. } => incr.len(),
            History::Soe { h, .. } => h.len(),
        }
    }
}
