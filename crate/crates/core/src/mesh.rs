//! Nonuniform time meshes `0 = t_0 < t_1 < ... < t_N = T`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance (against `T`) used when comparing node-derived quantities.
pub const NODE_RTOL: f64 = 1e-14;

/// A strictly increasing time mesh. The nodes are the source of truth;
/// steps and ratios are derived once at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMesh {
    nodes: Vec<f64>,
    steps: Vec<f64>,
    ratios: Vec<f64>,
}

/// Summary of the step-size properties of a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshReport {
    pub max_step: f64,
    /// `max_k tau_k / tau_{k+1}`; zero for a single-step mesh (no ratios).
    pub max_ratio: f64,
    pub rho_bound: f64,
    pub satisfies_a3: bool,
}

impl TimeMesh {
    /// Graded mesh `t_n = (n/N)^gamma T`. `gamma = 1` gives a uniform mesh.
    pub fn graded(n_steps: usize, gamma: f64, t_final: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::EmptyMesh);
        }
        if !gamma.is_finite() || gamma < 1.0 {
            return Err(Error::InvalidGrading(gamma));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::Domain(format!("final time must be positive, got {t_final}")));
        }
        let nf = n_steps as f64;
        let nodes = (0..=n_steps)
            .map(|n| {
                if n == n_steps {
                    t_final
                } else {
                    (n as f64 / nf).powf(gamma) * t_final
                }
            })
            .collect();
        Self::from_nodes(nodes)
    }

    pub fn uniform(n_steps: usize, t_final: f64) -> Result<Self> {
        Self::graded(n_steps, 1.0, t_final)
    }

    /// Random quasi-uniform mesh on `[0, T]` whose consecutive step ratios
    /// never exceed `max_ratio` (> 1).
    pub fn random_quasi_uniform<R: Rng + ?Sized>(
        n_steps: usize,
        max_ratio: f64,
        t_final: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::EmptyMesh);
        }
        if !(max_ratio > 1.0) {
            return Err(Error::Domain(format!("max_ratio must exceed 1, got {max_ratio}")));
        }
        // Raw steps drawn from [1, r) have every ratio inside (1/r, r).
        let raw: Vec<f64> = (0..n_steps).map(|_| rng.random_range(1.0..max_ratio)).collect();
        let total: f64 = raw.iter().sum();
        let mut nodes = Vec::with_capacity(n_steps + 1);
        let mut acc = 0.0;
        nodes.push(0.0);
        for (i, r) in raw.iter().enumerate() {
            acc += r;
            nodes.push(if i + 1 == n_steps { t_final } else { acc / total * t_final });
        }
        Self::from_nodes(nodes)
    }

    /// Build a mesh from explicit nodes; the first node must be 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::EmptyMesh);
        }
        if let Some(&bad) = nodes.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "mesh node", value: bad });
        }
        if nodes[0] != 0.0 {
            return Err(Error::NonZeroStart(nodes[0]));
        }
        let mut steps = Vec::with_capacity(nodes.len() - 1);
        for (i, w) in nodes.windows(2).enumerate() {
            let tau = w[1] - w[0];
            if !(tau > 0.0) {
                return Err(Error::NonMonotone { index: i + 1, prev: w[0], next: w[1] });
            }
            steps.push(tau);
        }
        let ratios = steps.windows(2).map(|w| w[0] / w[1]).collect();
        Ok(Self { nodes, steps, ratios })
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `t_n` for `n in 0..=N`.
    pub fn t(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    /// `tau_n = t_n - t_{n-1}` for `n in 1..=N`.
    pub fn tau(&self, n: usize) -> f64 {
        self.steps[n - 1]
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// `rho_k = tau_k / tau_{k+1}` for `k in 1..N`.
    pub fn rho(&self, k: usize) -> f64 {
        self.ratios[k - 1]
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// Offset point `t_{n-theta} = theta t_{n-1} + (1 - theta) t_n`.
    pub fn t_offset(&self, n: usize, theta: f64) -> f64 {
        self.nodes[n - 1] + (1.0 - theta) * self.steps[n - 1]
    }

    pub fn max_step(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_step(&self) -> f64 {
        self.steps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }

    /// True when all steps agree to `NODE_RTOL * T`.
    pub fn is_uniform(&self) -> bool {
        self.first_nonuniform().is_none()
    }

    /// First `k` (1-based) with `tau_k != tau_{k+1}` beyond rounding.
    pub(crate) fn first_nonuniform(&self) -> Option<usize> {
        let tol = NODE_RTOL * self.final_time();
        self.steps
            .windows(2)
            .position(|w| (w[0] - w[1]).abs() > tol)
            .map(|i| i + 1)
    }

    /// Check the step-ratio assumption `rho_k <= rho_bound`.
    pub fn check_a3(&self, rho_bound: f64) -> MeshReport {
        let max_ratio = self.max_ratio();
        MeshReport {
            max_step: self.max_step(),
            max_ratio,
            rho_bound,
            satisfies_a3: self.ratios.iter().all(|&r| r <= rho_bound),
        }
    }

    /// One node per line, shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.nodes {
            writeln!(out, "{t}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let nodes = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("bad mesh node {l:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_nodes(nodes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.nodes).expect("f64 vector serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let nodes: Vec<f64> =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("bad mesh JSON: {e}")))?;
        Self::from_nodes(nodes)
    }

    /// Load a mesh file: a JSON array if the content starts with `[`,
    /// otherwise one node per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('[') {
            Self::from_json(&text)
        } else {
            Self::from_text(&text)
        }
    }
}

impl Serialize for TimeMesh {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.nodes.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TimeMesh {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let nodes = Vec::<f64>::deserialize(d)?;
        TimeMesh::from_nodes(nodes).map_err(serde::de::Error::custom)
    }
}

/// Textual mesh description, e.g. `graded:64,2,1`, `uniform:32,1`,
/// `random:64,1.75,7` (steps, max ratio, seed; `T = 1`) or `file:nodes.txt`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Graded { n: usize, gamma: f64, t_final: f64 },
    Random { n: usize, max_ratio: f64, seed: u64 },
    File(std::path::PathBuf),
}

impl MeshSpec {
    pub fn build(&self) -> Result<TimeMesh> {
        match self {
            MeshSpec::Graded { n, gamma, t_final } => TimeMesh::graded(*n, *gamma, *t_final),
            MeshSpec::Random { n, max_ratio, seed } => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                TimeMesh::random_quasi_uniform(*n, *max_ratio, 1.0, &mut rng)
            }
            MeshSpec::File(p) => TimeMesh::load(p),
        }
    }

    /// Same family with a different step count (file meshes are returned as-is).
    pub fn with_steps(&self, steps: usize) -> MeshSpec {
        match self {
            MeshSpec::Graded { gamma, t_final, .. } => {
                MeshSpec::Graded { n: steps, gamma: *gamma, t_final: *t_final }
            }
            MeshSpec::Random { max_ratio, seed, .. } => {
                MeshSpec::Random { n: steps, max_ratio: *max_ratio, seed: *seed }
            }
            MeshSpec::File(p) => MeshSpec::File(p.clone()),
        }
    }
}

impl FromStr for MeshSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad mesh spec {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums = |rest: &str| -> Result<Vec<f64>> {
            rest.split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(bad())
            }
        };
        match kind {
            "graded" => match nums(rest)?.as_slice() {
                &[n, gamma, t_final] => Ok(MeshSpec::Graded { n: count(n)?, gamma, t_final }),
                _ => Err(bad()),
            },
            "uniform" => match nums(rest)?.as_slice() {
                &[n, t_final] => Ok(MeshSpec::Graded { n: count(n)?, gamma: 1.0, t_final }),
                _ => Err(bad()),
            },
            "random" => match nums(rest)?.as_slice() {
                &[n, max_ratio, seed] if seed >= 0.0 && seed.fract() == 0.0 => {
                    Ok(MeshSpec::Random { n: count(n)?, max_ratio, seed: seed as u64 })
                }
                _ => Err(bad()),
            },
            "file" if !rest.is_empty() => Ok(MeshSpec::File(rest.into())),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for MeshSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshSpec::Graded { n, gamma, t_final } if *gamma == 1.0 => write!(f, "uniform:{n},{t_final}"),
            MeshSpec::Graded { n, gamma, t_final } => write!(f, "graded:{n},{gamma},{t_final}"),
            MeshSpec::Random { n, max_ratio, seed } => write!(f, "random:{n},{max_ratio},{seed}"),
            MeshSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn graded_examples() {
        let m = TimeMesh::graded(4, 1.0, 1.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let m = TimeMesh::graded(4, 2.0, 1.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.0625, 0.25, 0.5625, 1.0]);
        let m = TimeMesh::graded(1, 3.0, 2.0).unwrap();
        assert_eq!(m.nodes(), &[0.0, 2.0]);
        assert_eq!(m.max_ratio(), 0.0);
    }

    #[test]
    fn graded_rejects_bad_input() {
        assert_eq!(TimeMesh::graded(4, 0.5, 1.0), Err(Error::InvalidGrading(0.5)));
        assert_eq!(TimeMesh::graded(0, 2.0, 1.0), Err(Error::EmptyMesh));
        assert!(TimeMesh::graded(4, 2.0, -1.0).is_err());
    }

    #[test]
    fn from_nodes_examples() {
        let m = TimeMesh::from_nodes(vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.ratios(), &[1.0]);
        let m = TimeMesh::from_nodes(vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(m.steps(), &[1.0, 2.0]);
        assert_eq!(m.rho(1), 0.5);
        assert!(matches!(
            TimeMesh::from_nodes(vec![0.0, 2.0, 1.0]),
            Err(Error::NonMonotone { index: 2, .. })
        ));
        assert_eq!(TimeMesh::from_nodes(vec![-1.0, 2.0]), Err(Error::NonZeroStart(-1.0)));
        assert_eq!(TimeMesh::from_nodes(vec![0.0]), Err(Error::EmptyMesh));
        assert!(TimeMesh::from_nodes(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn a3_examples() {
        let m = TimeMesh::uniform(8, 1.0).unwrap();
        assert!(m.check_a3(1.75).satisfies_a3);
        let m = TimeMesh::from_nodes(vec![0.0, 1.0, 1.25]).unwrap();
        let r = m.check_a3(1.75);
        assert_eq!(r.max_ratio, 4.0);
        assert!(!r.satisfies_a3);
        let m = TimeMesh::graded(10, 2.0, 1.0).unwrap();
        let r = m.check_a3(1.75);
        assert!(r.max_ratio < 1.0 && r.satisfies_a3);
    }

    #[test]
    fn random_mesh_respects_ratio() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = TimeMesh::random_quasi_uniform(200, 1.75, 1.0, &mut rng).unwrap();
        assert_eq!(m.len(), 200);
        assert_eq!(m.final_time(), 1.0);
        assert!(m.max_ratio() <= 1.75);
    }

    #[test]
    fn text_and_json_round_trip() {
        let m = TimeMesh::graded(7, 2.5, 3.0).unwrap();
        assert_eq!(TimeMesh::from_text(&m.to_text()).unwrap(), m);
        assert_eq!(TimeMesh::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn mesh_spec_parsing() {
        assert_eq!(
            "graded:30,2,1".parse::<MeshSpec>().unwrap(),
            MeshSpec::Graded { n: 30, gamma: 2.0, t_final: 1.0 }
        );
        assert_eq!(
            "uniform:16,2".parse::<MeshSpec>().unwrap(),
            MeshSpec::Graded { n: 16, gamma: 1.0, t_final: 2.0 }
        );
        assert!(matches!("random:10,1.5,4".parse::<MeshSpec>().unwrap(), MeshSpec::Random { n: 10, .. }));
        assert!(matches!("file:x.txt".parse::<MeshSpec>().unwrap(), MeshSpec::File(_)));
        assert!("graded:30,2".parse::<MeshSpec>().is_err());
        assert!("graded:2.5,2,1".parse::<MeshSpec>().is_err());
        assert!("bogus".parse::<MeshSpec>().is_err());
    }

    proptest! {
        #[test]
        fn graded_steps_nondecreasing(n in 1usize..300, gamma in 1.0f64..6.0, t in 0.1f64..10.0) {
            let m = TimeMesh::graded(n, gamma, t).unwrap();
            prop_assert!(m.ratios().iter().all(|&r| r <= 1.0 + 1e-12));
            prop_assert_eq!(m.final_time(), t);
        }

        #[test]
        fn rebuild_from_nodes_is_bitwise(n in 1usize..300, gamma in 1.0f64..6.0) {
            let m = TimeMesh::graded(n, gamma, 1.0).unwrap();
            let again = TimeMesh::from_nodes(m.nodes().to_vec()).unwrap();
            prop_assert_eq!(m.steps(), again.steps());
            prop_assert_eq!(m.ratios(), again.ratios());
        }
    }
}
