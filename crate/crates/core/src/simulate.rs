//! Synthetic VAR scenarios and stationary simulation.
//!
//! Scenario presets:
//!
//! | id | K  | structure |
//! |----|----|-----------|
//! | A  | 10 | one cluster, two leading indicators |
//! | B  | 10 | two clusters of 5, two in-cluster leading indicators each |
//! | C  | 10 | own lags only |
//! | D  | 10 | every off-diagonal block present |
//! | E  | 30 | three clusters of 10, the third with weak coefficients |

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::evaluate::GrangerGraph;
use crate::model::VarModel;
use crate::panel::TimeSeriesPanel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    A,
    B,
    C,
    D,
    E,
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            _ => Err(invalid(format!("unknown scenario '{s}'"))),
        }
    }
}

/// A group of target series sharing the same leading indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub members: Vec<usize>,
    pub leading: Vec<usize>,
    /// Magnitude range of the leading-indicator coefficients.
    #[serde(default = "default_magnitude")]
    pub magnitude: (f64, f64),
    /// Marks a deliberately hard-to-detect cluster.
    #[serde(default)]
    pub weak: bool,
}

fn default_magnitude() -> (f64, f64) {
    (0.2, 0.6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: Option<ScenarioId>,
    pub k: usize,
    pub p: usize,
    pub clusters: Vec<ClusterSpec>,
    /// Place every off-diagonal block regardless of `clusters`.
    #[serde(default)]
    pub fully_connected: bool,
    pub target_spectral_radius: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn preset(id: ScenarioId, seed: u64) -> Self {
        let cluster = |members: std::ops::Range<usize>, leading: Vec<usize>, weak: bool| ClusterSpec {
            members: members.collect(),
            leading,
            magnitude: if weak { (0.2, 0.3) } else { default_magnitude() },
            weak,
        };
        let (k, clusters, full) = match id {
            ScenarioId::A => (10, vec![cluster(0..10, vec![1, 4], false)], false),
            ScenarioId::B => (
                10,
                vec![cluster(0..5, vec![0, 2], false), cluster(5..10, vec![6, 8], false)],
                false,
            ),
            ScenarioId::C => (10, Vec::new(), false),
            ScenarioId::D => (10, Vec::new(), true),
            ScenarioId::E => (
                30,
                vec![
                    cluster(0..10, vec![1, 4], false),
                    cluster(10..20, vec![12, 17], false),
                    cluster(20..30, vec![23, 26], true),
                ],
                false,
            ),
        };
        Self {
            id: Some(id),
            k,
            p: 3,
            clusters,
            fully_connected: full,
            target_spectral_radius: 0.9,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p == 0 {
            return Err(invalid("scenario needs k >= 1 and p >= 1"));
        }
        let r = self.target_spectral_radius;
        if !(r > 0.0 && r < 1.0) {
            return Err(invalid(format!("target spectral radius must be in (0, 1), got {r}")));
        }
        let mut seen = vec![false; self.k];
        for c in &self.clusters {
            if c.members.is_empty() {
                return Err(invalid("empty cluster"));
            }
            for &m in &c.members {
                if m >= self.k || std::mem::replace(&mut seen[m], true) {
                    return Err(invalid(format!("cluster member {m} out of range or repeated")));
                }
            }
            if c.leading.iter().any(|&l| l >= self.k) {
                return Err(invalid("leading indicator out of range"));
            }
            let (lo, hi) = c.magnitude;
            if !(lo >= 0.0 && hi >= lo) {
                return Err(invalid("bad coefficient magnitude range"));
            }
        }
        Ok(())
    }

    /// Hard cluster labels (unclustered series get their own label).
    pub fn cluster_labels(&self) -> Vec<usize> {
        let mut labels: Vec<usize> = (0..self.k).map(|i| self.clusters.len() + i).collect();
        for (c, spec) in self.clusters.iter().enumerate() {
            for &m in &spec.members {
                labels[m] = c;
            }
        }
        labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub model: VarModel,
    pub truth: GrangerGraph,
}

fn draw_block(rng: &mut ChaCha8Rng, p: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    (0..p)
        .map(|_| {
            let m = lo + (hi - lo) * rng.random::<f64>();
            if rng.random::<bool>() { m } else { -m }
        })
        .collect()
}

pub fn make_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let (k, p) = (spec.k, spec.p);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names: Vec<String> = (1..=k).map(|i| format!("y{i}")).collect();
    let mut w = DMatrix::zeros(k * p, k);
    let mut truth = GrangerGraph::empty(names.clone());
    let place = |w: &mut DMatrix<f64>, b: usize, t: usize, vals: Vec<f64>| {
        for (l, v) in vals.into_iter().enumerate() {
            w[(b * p + l, t)] = v;
        }
    };
    for j in 0..k {
        let vals = draw_block(&mut rng, p, default_magnitude());
        place(&mut w, j, j, vals);
    }
    if spec.fully_connected {
        for b in 0..k {
            for t in 0..k {
                if b != t {
                    let vals = draw_block(&mut rng, p, default_magnitude());
                    place(&mut w, b, t, vals);
                    truth.set_edge(b, t, true);
                }
            }
        }
    } else {
        for c in &spec.clusters {
            for &l in &c.leading {
                for &t in &c.members {
                    if t != l {
                        let vals = draw_block(&mut rng, p, c.magnitude);
                        place(&mut w, l, t, vals);
                        truth.set_edge(l, t, true);
                    }
                }
            }
        }
    }
    let mut model = VarModel::new(w, p, names)?;
    rescale_to_radius(&mut model, spec.target_spectral_radius)?;
    Ok(Scenario { spec: spec.clone(), model, truth })
}

/// Scales lag `l` by `c^l`, which multiplies every companion eigenvalue by
/// `c`; two passes absorb rounding.
fn rescale_to_radius(model: &mut VarModel, target: f64) -> Result<()> {
    let p = model.p;
    for _ in 0..2 {
        let rho = companion_spectral_radius(model);
        if rho == 0.0 {
            return Err(invalid("cannot rescale a model with zero spectral radius"));
        }
        let c = target / rho;
        for row in 0..model.w.nrows() {
            let lag = row % p + 1;
            let f = c.powi(lag as i32);
            model.w.row_mut(row).scale_mut(f);
        }
    }
    Ok(())
}

pub fn companion_matrix(model: &VarModel) -> DMatrix<f64> {
    let (k, p) = (model.n_series(), model.p);
    let mut c = DMatrix::zeros(k * p, k * p);
    for (l, a) in model.lag_matrices().into_iter().enumerate() {
        c.view_mut((0, l * k), (k, k)).copy_from(&a);
    }
    for i in k..k * p {
        c[(i, i - k)] = 1.0;
    }
    c
}

pub fn companion_spectral_radius(model: &VarModel) -> f64 {
    companion_matrix(model)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub t: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Defaults to the identity.
    #[serde(default)]
    pub noise_cov: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

fn default_burn_in() -> usize {
    500
}

impl SimulationConfig {
    pub fn new(t: usize, seed: u64) -> Self {
        Self { t, burn_in: default_burn_in(), noise_cov: None, seed }
    }
}

pub fn simulate_var(model: &VarModel, cfg: &SimulationConfig) -> Result<TimeSeriesPanel> {
    let (k, p) = (model.n_series(), model.p);
    if cfg.t == 0 {
        return Err(invalid("simulation length must be positive"));
    }
    if cfg.burn_in < 100 {
        return Err(invalid(format!("burn_in must be >= 100, got {}", cfg.burn_in)));
    }
    let rho = companion_spectral_radius(model);
    if !(rho < 1.0) {
        return Err(Error::NonStationary(rho));
    }
    let chol = match &cfg.noise_cov {
        None => None,
        Some(rows) => {
            let sigma = crate::model::matrix_from_rows(rows)?;
            if sigma.shape() != (k, k) {
                return Err(mismatch(format!("noise covariance must be {k}x{k}")));
            }
            if (&sigma - sigma.transpose()).amax() > 1e-12 {
                return Err(invalid("noise covariance must be symmetric"));
            }
            let c = Cholesky::new(sigma)
                .ok_or_else(|| invalid("noise covariance must be positive definite"))?;
            Some(c.l())
        }
    };
    let lags = model.lag_matrices();
    let total = cfg.burn_in + cfg.t;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Ring of the last p states, most recent first.
    let mut hist: Vec<DVector<f64>> = vec![DVector::zeros(k); p];
    let mut out = DMatrix::zeros(cfg.t, k);
    for step in 0..total {
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut y = match &chol {
            Some(l) => l * z,
            None => z,
        };
        for (a, prev) in lags.iter().zip(&hist) {
            y.gemv(1.0, a, prev, 1.0);
        }
        hist.rotate_right(1);
        hist[0] = y;
        if step >= cfg.burn_in {
            out.set_row(step - cfg.burn_in, &hist[0].transpose());
        }
    }
    TimeSeriesPanel::new(out, model.names.clone())
}
