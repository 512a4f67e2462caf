//! Vibration-based fault identification on a cantilever beam.
//!
//! Euler-Bernoulli elements with two degrees of freedom per node (transverse
//! displacement and rotation), consistent mass, and the first node clamped.
//! A fault index `alpha_i` scales element `i`'s stiffness by `1 - alpha_i`.
//! Candidate fault vectors are scored by the squared cosine similarity
//! (MDLAC) between measured and predicted eigenvalue changes and between
//! measured and predicted changes of one mode shape.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problems::{check_bounds, Problem};

/// Number of measured eigenvalues.
pub const MEASURED_MODES: usize = 5;
/// Zero-based index of the monitored mode shape (the second mode).
pub const MONITORED_MODE: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamModel {
    pub n_elements: usize,
    /// Pa.
    pub youngs_modulus: f64,
    /// m.
    pub element_length: f64,
    /// m^4.
    pub second_moment: f64,
    /// m^2.
    pub area: f64,
    /// kg/m^3.
    pub density: f64,
}

impl Default for BeamModel {
    fn default() -> Self {
        // 1 m x 1 m square aluminium section
        Self {
            n_elements: 20,
            youngs_modulus: 69e9,
            element_length: 10.0,
            second_moment: 1.0 / 12.0,
            area: 1.0,
            density: 2700.0,
        }
    }
}

/// Element stiffness placed in the reduced (clamped) global system.
#[derive(Debug, Clone)]
pub struct ElementBlock {
    /// Reduced DOF index of each local DOF, `None` for clamped DOFs.
    pub dofs: [Option<usize>; 4],
    pub local: [[f64; 4]; 4],
}

impl ElementBlock {
    /// Full-size matrix of this element's stiffness contribution.
    pub fn to_dense(&self, n_dof: usize) -> DMatrix<f64> {
        let mut k = DMatrix::zeros(n_dof, n_dof);
        self.add_scaled(&mut k, 1.0);
        k
    }

    fn add_scaled(&self, k: &mut DMatrix<f64>, scale: f64) {
        for a in 0..4 {
            let Some(ga) = self.dofs[a] else { continue };
            for b in 0..4 {
                if let Some(gb) = self.dofs[b] {
                    k[(ga, gb)] += scale * self.local[a][b];
                }
            }
        }
    }

    /// `v^T K_i v` restricted to this element's DOFs.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        let mut s = 0.0;
        for a in 0..4 {
            let Some(ga) = self.dofs[a] else { continue };
            for b in 0..4 {
                if let Some(gb) = self.dofs[b] {
                    s += v[ga] * self.local[a][b] * v[gb];
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Assembly {
    pub stiffness: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub elements: Vec<ElementBlock>,
}

impl Assembly {
    pub fn n_dof(&self) -> usize {
        self.mass.nrows()
    }

    /// `sum (1 - alpha_i) K_i`.
    pub fn damaged_stiffness(&self, alpha: &[f64]) -> DMatrix<f64> {
        let n = self.n_dof();
        let mut k = DMatrix::zeros(n, n);
        for (e, a) in self.elements.iter().zip(alpha) {
            e.add_scaled(&mut k, 1.0 - a);
        }
        k
    }
}

impl BeamModel {
    pub fn with_elements(n_elements: usize) -> Self {
        Self {
            n_elements,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_elements < 2 {
            return Err(Error::Config("beam needs at least 2 elements".into()));
        }
        for (name, v) in [
            ("youngs_modulus", self.youngs_modulus),
            ("element_length", self.element_length),
            ("second_moment", self.second_moment),
            ("area", self.area),
            ("density", self.density),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn n_dof(&self) -> usize {
        2 * self.n_elements
    }

    pub fn total_length(&self) -> f64 {
        self.element_length * self.n_elements as f64
    }

    pub fn flexural_rigidity(&self) -> f64 {
        self.youngs_modulus * self.second_moment
    }

    fn element_stiffness(&self) -> [[f64; 4]; 4] {
        let l = self.element_length;
        let c = self.flexural_rigidity() / l.powi(3);
        let l2 = l * l;
        [
            [12.0 * c, 6.0 * l * c, -12.0 * c, 6.0 * l * c],
            [6.0 * l * c, 4.0 * l2 * c, -6.0 * l * c, 2.0 * l2 * c],
            [-12.0 * c, -6.0 * l * c, 12.0 * c, -6.0 * l * c],
            [6.0 * l * c, 2.0 * l2 * c, -6.0 * l * c, 4.0 * l2 * c],
        ]
    }

    fn element_mass(&self) -> [[f64; 4]; 4] {
        let l = self.element_length;
        let c = self.density * self.area * l / 420.0;
        let l2 = l * l;
        [
            [156.0 * c, 22.0 * l * c, 54.0 * c, -13.0 * l * c],
            [22.0 * l * c, 4.0 * l2 * c, 13.0 * l * c, -3.0 * l2 * c],
            [54.0 * c, 13.0 * l * c, 156.0 * c, -22.0 * l * c],
            [-13.0 * l * c, -3.0 * l2 * c, -22.0 * l * c, 4.0 * l2 * c],
        ]
    }

    /// Assembles the clamped stiffness and mass matrices and the per-element
    /// stiffness blocks (`K = sum K_i`).
    pub fn assemble(&self) -> Result<Assembly> {
        self.validate()?;
        let n = self.n_dof();
        let ke = self.element_stiffness();
        let me = self.element_mass();
        let mut stiffness = DMatrix::zeros(n, n);
        let mut mass = DMatrix::zeros(n, n);
        let mut elements = Vec::with_capacity(self.n_elements);
        for e in 0..self.n_elements {
            // node e carries global DOFs 2e, 2e+1; node 0 is clamped
            let dofs: [Option<usize>; 4] = std::array::from_fn(|a| (2 * e + a).checked_sub(2));
            let block = ElementBlock { dofs, local: ke };
            block.add_scaled(&mut stiffness, 1.0);
            let mblock = ElementBlock { dofs, local: me };
            mblock.add_scaled(&mut mass, 1.0);
            elements.push(block);
        }
        Ok(Assembly {
            stiffness,
            mass,
            elements,
        })
    }
}

/// Mass-normalized eigenpairs, ascending.
#[derive(Debug, Clone)]
pub struct Modes {
    pub eigenvalues: Vec<f64>,
    /// One mode shape per column.
    pub shapes: DMatrix<f64>,
}

impl Modes {
    pub fn shape(&self, j: usize) -> DVector<f64> {
        self.shapes.column(j).into_owned()
    }
}

/// Generalized eigen-solver for a fixed positive-definite mass matrix.
/// Reduces `K phi = lambda M phi` with the Cholesky factor `L` of `K` to the
/// standard problem `L^-1 M L^-T y = (1/lambda) y`, so the lowest modes are
/// the dominant ones and keep full relative precision.
#[derive(Debug, Clone)]
pub struct EigenSolver {
    mass: DMatrix<f64>,
}

impl EigenSolver {
    pub fn new(mass: &DMatrix<f64>) -> Result<Self> {
        if !mass.is_square() || mass.clone().cholesky().is_none() {
            return Err(Error::Numerical("mass matrix is not positive definite".into()));
        }
        Ok(Self { mass: mass.clone() })
    }

    /// All eigenpairs, ascending, mass-normalized, with the largest-magnitude
    /// entry of each shape made positive.
    pub fn solve_all(&self, stiffness: &DMatrix<f64>) -> Result<Modes> {
        if stiffness.shape() != self.mass.shape() {
            return Err(invalid("stiffness and mass differ in size"));
        }
        let chol = stiffness
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("stiffness matrix is not positive definite".into()))?;
        let l = chol.l();
        let n = l.nrows();
        let l_inv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        let l_inv_t = l_inv.transpose();
        let mut c = &l_inv * &self.mass * &l_inv_t;
        let ct = c.transpose();
        c += ct;
        c *= 0.5;
        let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("symmetric eigen-solver did not converge".into()))?;
        // descending flexibility eigenvalue = ascending lambda
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut shapes = DMatrix::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (col, &j) in order.iter().enumerate() {
            let mu = eig.eigenvalues[j];
            if !(mu > 0.0) {
                return Err(Error::Numerical(format!("non-positive flexibility eigenvalue {mu}")));
            }
            let mut phi = &l_inv_t * eig.eigenvectors.column(j) / mu.sqrt();
            let peak = phi.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
            if peak < 0.0 {
                phi.neg_mut();
            }
            shapes.set_column(col, &phi);
            eigenvalues.push(1.0 / mu);
        }
        Ok(Modes { eigenvalues, shapes })
    }
}

/// The `n_modes` lowest mass-normalized eigenpairs of `(K, M)`.
pub fn eigen_solve(stiffness: &DMatrix<f64>, mass: &DMatrix<f64>, n_modes: usize) -> Result<Modes> {
    if stiffness.shape() != mass.shape() || !stiffness.is_square() {
        return Err(invalid("stiffness and mass must be square and of equal size"));
    }
    if n_modes == 0 || n_modes > mass.nrows() {
        return Err(invalid(format!("cannot extract {n_modes} modes from a {}-DOF system", mass.nrows())));
    }
    let all = EigenSolver::new(mass)?.solve_all(stiffness)?;
    Ok(Modes {
        eigenvalues: all.eigenvalues[..n_modes].to_vec(),
        shapes: all.shapes.columns(0, n_modes).into_owned(),
    })
}

/// `S[j][i] = phi_j^T K_i phi_j` for the given healthy modes.
pub fn sensitivity(assembly: &Assembly, modes: &Modes) -> DMatrix<f64> {
    let q = modes.eigenvalues.len();
    let n = assembly.elements.len();
    DMatrix::from_fn(q, n, |j, i| assembly.elements[i].quadratic_form(&modes.shape(j)))
}

/// Squared cosine similarity of two change vectors; 0 if either is zero.
pub fn mdlac(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(invalid(format!("MDLAC of vectors of length {} and {}", u.len(), v.len())));
    }
    let uv: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let uu: f64 = u.iter().map(|a| a * a).sum();
    let vv: f64 = v.iter().map(|a| a * a).sum();
    if uu == 0.0 || vv == 0.0 {
        return Ok(0.0);
    }
    Ok(((uv * uv) / (uu * vv)).clamp(0.0, 1.0))
}

/// Healthy reference state and the machinery to predict changes for any
/// fault vector.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub beam: BeamModel,
    pub assembly: Assembly,
    solver: EigenSolver,
    pub healthy: Modes,
    /// `M phi_j` for the tracked healthy modes.
    mass_weighted: Vec<DVector<f64>>,
}

/// Eigenvalue changes of the first modes and the change of the monitored
/// mode shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalChange {
    pub dlambda: Vec<f64>,
    pub dphi: Vec<f64>,
}

impl ForwardModel {
    pub fn new(beam: BeamModel) -> Result<Self> {
        let assembly = beam.assemble()?;
        let solver = EigenSolver::new(&assembly.mass)?;
        let healthy = solver.solve_all(&assembly.stiffness)?;
        let tracked = MEASURED_MODES.max(MONITORED_MODE + 1).min(healthy.eigenvalues.len());
        let mass_weighted = (0..tracked).map(|j| &assembly.mass * healthy.shape(j)).collect();
        Ok(Self {
            beam,
            assembly,
            solver,
            healthy,
            mass_weighted,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.beam.n_elements
    }

    /// Damaged modes paired to the tracked healthy modes by maximum
    /// mass-weighted modal assurance, sign-aligned with their partner.
    pub fn tracked_modes(&self, alpha: &[f64]) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
        if alpha.len() != self.n_elements() {
            return Err(invalid(format!(
                "fault vector has {} entries, beam has {} elements",
                alpha.len(),
                self.n_elements()
            )));
        }
        let damaged = self.solver.solve_all(&self.assembly.damaged_stiffness(alpha))?;
        let n = damaged.eigenvalues.len();
        let mut used = vec![false; n];
        let mut values = Vec::with_capacity(self.mass_weighted.len());
        let mut shapes = Vec::with_capacity(self.mass_weighted.len());
        for mphi in &self.mass_weighted {
            let mut best: Option<(usize, f64, f64)> = None;
            for k in (0..n).filter(|k| !used[*k]) {
                let dot = mphi.dot(&damaged.shapes.column(k));
                let mac = dot * dot;
                if best.is_none_or(|(_, m, _)| mac > m) {
                    best = Some((k, mac, dot));
                }
            }
            let (k, _, dot) = best.ok_or_else(|| Error::Numerical("mode pairing failed".into()))?;
            used[k] = true;
            let mut phi = damaged.shape(k);
            if dot < 0.0 {
                phi.neg_mut();
            }
            values.push(damaged.eigenvalues[k]);
            shapes.push(phi);
        }
        Ok((values, shapes))
    }

    /// Exact predicted changes for fault vector `alpha`.
    pub fn predict(&self, alpha: &[f64]) -> Result<ModalChange> {
        let (values, shapes) = self.tracked_modes(alpha)?;
        let dlambda = values
            .iter()
            .zip(&self.healthy.eigenvalues)
            .take(MEASURED_MODES)
            .map(|(d, h)| d - h)
            .collect();
        let dphi = (&shapes[MONITORED_MODE] - self.healthy.shape(MONITORED_MODE))
            .iter()
            .copied()
            .collect();
        Ok(ModalChange { dlambda, dphi })
    }

    /// First-order eigenvalue changes `S alpha` (stiffness loss counts as
    /// negative change).
    pub fn linear_dlambda(&self, alpha: &[f64]) -> Vec<f64> {
        let healthy_first = Modes {
            eigenvalues: self.healthy.eigenvalues[..MEASURED_MODES].to_vec(),
            shapes: self.healthy.shapes.columns(0, MEASURED_MODES).into_owned(),
        };
        let s = sensitivity(&self.assembly, &healthy_first);
        let a = DVector::from_column_slice(alpha);
        (-(s * a)).iter().copied().collect()
    }
}

/// Simulated measurements of a damaged beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub dlambda: Vec<f64>,
    pub dphi: Vec<f64>,
    pub noise_level: f64,
    pub seed: u64,
}

/// Exact changes for `true_alpha`, each entry scaled by `1 + noise_level g`
/// with independent standard normal `g`.
pub fn synthesize_measurements(
    model: &ForwardModel,
    true_alpha: &[f64],
    bounds: (f64, f64),
    noise_level: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    let box_bounds = vec![bounds; model.n_elements()];
    check_bounds(true_alpha, &box_bounds)?;
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(invalid(format!("noise level must be non-negative, got {noise_level}")));
    }
    let exact = model.predict(true_alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturb = |v: f64| {
        let g: f64 = StandardNormal.sample(&mut rng);
        v * (1.0 + noise_level * g)
    };
    let dlambda = exact.dlambda.iter().map(|v| perturb(*v)).collect();
    let dphi = exact.dphi.iter().map(|v| perturb(*v)).collect();
    Ok(MeasurementSet {
        dlambda,
        dphi,
        noise_level,
        seed,
    })
}

/// `(-MDLAC(dlambda), -MDLAC(dphi))` for a candidate fault vector.
pub fn fault_objectives(alpha: &[f64], meas: &MeasurementSet, model: &ForwardModel) -> Result<[f64; 2]> {
    let predicted = model.predict(alpha)?;
    Ok([
        -mdlac(&meas.dlambda, &predicted.dlambda)?,
        -mdlac(&meas.dphi, &predicted.dphi)?,
    ])
}

/// The two-objective identification problem over fault vectors.
#[derive(Debug, Clone)]
pub struct FaultProblem {
    name: String,
    model: ForwardModel,
    measurements: MeasurementSet,
    bounds: Vec<(f64, f64)>,
}

impl FaultProblem {
    pub fn new(model: ForwardModel, measurements: MeasurementSet, bounds: (f64, f64)) -> Result<Self> {
        if !(bounds.0 < bounds.1 && bounds.0 >= 0.0 && bounds.1 < 1.0) {
            return Err(Error::Config(format!("fault bounds must satisfy 0 <= lo < hi < 1, got {bounds:?}")));
        }
        let n = model.n_elements();
        Ok(Self {
            name: format!("beam{n}"),
            model,
            measurements,
            bounds: vec![bounds; n],
        })
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn measurements(&self) -> &MeasurementSet {
        &self.measurements
    }
}

impl Problem for FaultProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn n_vars(&self) -> usize {
        self.bounds.len()
    }

    fn n_objs(&self) -> usize {
        2
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_bounds(x, &self.bounds)?;
        Ok(fault_objectives(x, &self.measurements, &self.model)?.to_vec())
    }

    fn objective_origin(&self) -> Vec<f64> {
        vec![-1.0, -1.0]
    }
}

/// Case-study description read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub n_elements: usize,
    /// `(element number starting at 1, severity)` pairs.
    pub true_faults: Vec<(usize, f64)>,
    #[serde(default = "default_noise")]
    pub noise_level: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fault_bounds")]
    pub bounds: (f64, f64),
    #[serde(default = "default_case_iters")]
    pub iters: usize,
    #[serde(default)]
    pub beam: Option<BeamModel>,
}

fn default_noise() -> f64 {
    0.02
}

pub const DEFAULT_FAULT_BOUNDS: (f64, f64) = (0.0, 0.3);

fn default_fault_bounds() -> (f64, f64) {
    DEFAULT_FAULT_BOUNDS
}

fn default_case_iters() -> usize {
    50_000
}

impl CaseConfig {
    /// 20 elements, faults on elements 6 and 11.
    pub fn two_faults() -> Self {
        Self {
            n_elements: 20,
            true_faults: vec![(6, 0.04), (11, 0.06)],
            noise_level: 0.02,
            seed: 0,
            bounds: DEFAULT_FAULT_BOUNDS,
            iters: default_case_iters(),
            beam: None,
        }
    }

    /// 30 elements, faults on elements 6, 11 and 22.
    pub fn three_faults() -> Self {
        Self {
            n_elements: 30,
            true_faults: vec![(6, 0.04), (11, 0.06), (22, 0.02)],
            ..Self::two_faults()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.true_alpha()?;
        Ok(cfg)
    }

    pub fn true_alpha(&self) -> Result<Vec<f64>> {
        let mut alpha = vec![0.0; self.n_elements];
        for &(elem, sev) in &self.true_faults {
            if elem == 0 || elem > self.n_elements {
                return Err(Error::Config(format!(
                    "fault element {elem} outside 1..={}",
                    self.n_elements
                )));
            }
            alpha[elem - 1] = sev;
        }
        Ok(alpha)
    }

    pub fn beam(&self) -> BeamModel {
        let mut b = self.beam.clone().unwrap_or_default();
        b.n_elements = self.n_elements;
        b
    }

    /// Builds the identification problem with synthesized measurements.
    pub fn build_problem(&self) -> Result<FaultProblem> {
        let model = ForwardModel::new(self.beam())?;
        let meas = synthesize_measurements(&model, &self.true_alpha()?, self.bounds, self.noise_level, self.seed)?;
        FaultProblem::new(model, meas, self.bounds)
    }
}

/// Pooled per-element statistics of identified fault vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementStats {
    /// Element number starting at 1.
    pub element: usize,
    pub mean: f64,
    pub variance: f64,
    pub outliers: Vec<f64>,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Pools fault vectors from all runs and summarizes each element: mean,
/// sample variance, quartiles, and 1.5 IQR outliers.
pub fn solution_statistics<V: AsRef<[f64]>>(pooled: &[V]) -> Result<Vec<ElementStats>> {
    let first = pooled.first().ok_or_else(|| invalid("no solutions to summarize"))?;
    let n = first.as_ref().len();
    if pooled.iter().any(|v| v.as_ref().len() != n) {
        return Err(invalid("fault vectors of differing length"));
    }
    let count = pooled.len() as f64;
    Ok((0..n)
        .map(|e| {
            let mut col: Vec<f64> = pooled.iter().map(|v| v.as_ref()[e]).collect();
            let mean = col.iter().sum::<f64>() / count;
            let variance = if pooled.len() > 1 {
                col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0)
            } else {
                0.0
            };
            col.sort_by(f64::total_cmp);
            let (q1, median, q3) = (quantile(&col, 0.25), quantile(&col, 0.5), quantile(&col, 0.75));
            let iqr = q3 - q1;
            let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
            ElementStats {
                element: e + 1,
                mean,
                variance,
                outliers: col.iter().copied().filter(|v| *v < lo || *v > hi).collect(),
                q1,
                median,
                q3,
            }
        })
        .collect())
}

/// CSV `element,mean,variance,n_outliers`.
pub fn write_statistics_csv<W: Write>(writer: W, stats: &[ElementStats]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["element", "mean", "variance", "n_outliers"])?;
    for s in stats {
        w.write_record([
            s.element.to_string(),
            s.mean.to_string(),
            s.variance.to_string(),
            s.outliers.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `run,a1..an` with one row per pooled fault vector.
pub fn write_samples_csv<W: Write>(writer: W, runs: &[Vec<Vec<f64>>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let n = runs.iter().flatten().next().map_or(0, |v| v.len());
    let mut header = vec!["run".to_string()];
    header.extend((1..=n).map(|i| format!("a{i}")));
    w.write_record(&header)?;
    for (r, run) in runs.iter().enumerate() {
        for v in run {
            let mut rec = vec![r.to_string()];
            rec.extend(v.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
