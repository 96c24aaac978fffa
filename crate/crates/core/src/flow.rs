//! The network-formation gradient flow.
//!
//! Each step solves two elliptic problems with the current conductivity,
//!
//! ```text
//! −div((C + rI)∇p) = S,            −div((C + rI)∇σ) = Φ'''(p) ∇p·(C + rI)∇p,
//! ```
//!
//! and then advances `C` semi-implicitly: diffusion and metabolic decay use
//! `Cⁿ⁺¹` with the metabolic weight `(‖Cⁿ‖ + ε)^{γ−2}` frozen, while the
//! activation forcing `Φ''(p)∇p⊗∇p + sym(∇σ⊗∇p)` is explicit.

use std::fmt;

use sha2::{Digest, Sha256};

use crate::analysis::{symmetry_residual, Axis, Snapshot, SnapshotNode};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_load, assemble_load_from, assemble_mass, assemble_stiffness, cell_gradient, corner_gradients, unit_mass, unit_stiffness,
    CellData, CoefficientSampling, FeSpace, LinearSolverKind, NeumannSolver, Sample, SparseOperator, SpdSolver,
};
use crate::geometry::{classify_nodes, rotate_about_center, LevelSet, Point, DEFAULT_ALPHA, DEFAULT_ZETA};
use crate::tensor::SymTensor;

/// `‖ΔC‖∞ / Δt` below which a run counts as stationary.
pub const STEADY_STATE_TOL: f64 = 1e-8;

/// Convex entropy generator `Φ`, represented by `Φ''` and `Φ'''`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyGenerator {
    /// `Φ'' = p²`
    Quartic,
    /// `Φ'' = 1 / (p + 1)`
    Fisher,
    /// `w_q p² + w_f / (p + 1)`
    Mixed { quartic: f64, fisher: f64 },
    /// `Φ'' = 1`; makes the σ problem trivial.
    Quadratic,
}

impl EntropyGenerator {
    pub const MIXED: EntropyGenerator = EntropyGenerator::Mixed {
        quartic: 0.5,
        fisher: 0.5,
    };

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quartic" => Some(EntropyGenerator::Quartic),
            "fisher" => Some(EntropyGenerator::Fisher),
            "mixed" => Some(EntropyGenerator::MIXED),
            "quadratic" => Some(EntropyGenerator::Quadratic),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EntropyGenerator::Quartic => "quartic",
            EntropyGenerator::Fisher => "fisher",
            EntropyGenerator::Mixed { .. } => "mixed",
            EntropyGenerator::Quadratic => "quadratic",
        }
    }

    fn fisher_weight(&self) -> f64 {
        match *self {
            EntropyGenerator::Fisher => 1.0,
            EntropyGenerator::Mixed { fisher, .. } => fisher,
            _ => 0.0,
        }
    }

    fn check(&self, p: f64) -> Result<()> {
        if self.fisher_weight() != 0.0 && !(p > -1.0) {
            return Err(Error::EntropyDomain { p });
        }
        Ok(())
    }

    pub fn phi2(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(match *self {
            EntropyGenerator::Quartic => p * p,
            EntropyGenerator::Fisher => 1.0 / (p + 1.0),
            EntropyGenerator::Mixed { quartic, fisher } => quartic * p * p + fisher / (p + 1.0),
            EntropyGenerator::Quadratic => 1.0,
        })
    }

    pub fn phi3(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(match *self {
            EntropyGenerator::Quartic => 2.0 * p,
            EntropyGenerator::Fisher => -1.0 / ((p + 1.0) * (p + 1.0)),
            EntropyGenerator::Mixed { quartic, fisher } => 2.0 * quartic * p - fisher / ((p + 1.0) * (p + 1.0)),
            EntropyGenerator::Quadratic => 0.0,
        })
    }
}

impl fmt::Display for EntropyGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Reduced parameters `(D̃, ν̃) = (D / c, ν / c²)` of the rescaled model.
pub fn reduced_parameters(d: f64, c: f64, nu: f64) -> (f64, f64) {
    (d / c, nu / (c * c))
}

/// Rescaled time `t̃ = c² t`.
pub fn rescaled_time(t: f64, c: f64) -> f64 {
    c * c * t
}

/// Default source center for a domain: (0.5, 0.5) for the circle, (0.5, 0.2)
/// for the leaf, and the rotated image of (0.5, 0.2) for a rotated leaf.
pub fn default_source(domain: &LevelSet) -> Point {
    match domain {
        LevelSet::Circle { .. } => [0.5, 0.5],
        LevelSet::Leaf { .. } => [0.5, 0.2],
        LevelSet::RotatedLeaf { angle, .. } => rotate_about_center([0.5, 0.2], *angle),
    }
}

/// Parameters of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub domain: LevelSet,
    pub n: usize,
    pub d_tilde: f64,
    pub nu_tilde: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub r: f64,
    pub omega: f64,
    pub source: Point,
    /// Multiplies the Gaussian source; zero switches the source off.
    pub source_strength: f64,
    pub t_final: f64,
    pub dt: f64,
    pub c0: f64,
    pub entropy: EntropyGenerator,
    pub tensor_mode: bool,
    pub zeta: f64,
    pub alpha: f64,
    pub snapshot_every: usize,
    pub coeff_sampling: CoefficientSampling,
    pub solver_tol: f64,
    pub steady_tol: f64,
    /// `None` picks a solver from the problem size.
    pub solver: Option<LinearSolverKind>,
}

impl SimParams {
    /// Reference parameters on `domain` with `N = 100` and `Δt = h`.
    pub fn reference(domain: LevelSet) -> Self {
        let n = 100;
        SimParams {
            source: default_source(&domain),
            domain,
            n,
            d_tilde: 4e-6,
            nu_tilde: 4e-2,
            gamma: 0.75,
            epsilon: 1e-4,
            r: 5e-3,
            omega: 500.0,
            source_strength: 1.0,
            t_final: 400.0,
            dt: 1.0 / n as f64,
            c0: 1.0,
            entropy: EntropyGenerator::Quartic,
            tensor_mode: false,
            zeta: DEFAULT_ZETA,
            alpha: DEFAULT_ALPHA,
            snapshot_every: 0,
            coeff_sampling: CoefficientSampling::Centroid,
            solver_tol: 1e-10,
            steady_tol: STEADY_STATE_TOL,
            solver: None,
        }
    }

    /// Changes the resolution and resets `Δt = h`.
    pub fn with_resolution(mut self, n: usize) -> Self {
        self.n = n;
        self.dt = 1.0 / n as f64;
        self
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of steps to reach `T`.
    pub fn step_count(&self) -> usize {
        if self.t_final <= 0.0 {
            0
        } else {
            (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.n < 2 {
            return bad("N must be at least 2");
        }
        // γ = 2 is admitted here as the linear-decay limit; configuration files
        // are held to the open interval.
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 2], got {}", self.gamma)));
        }
        let nonneg = [
            ("D_tilde", self.d_tilde),
            ("nu_tilde", self.nu_tilde),
            ("r", self.r),
            ("omega", self.omega),
            ("T", self.t_final),
            ("C0", self.c0),
            ("source strength", self.source_strength),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        let positive = [
            ("epsilon", self.epsilon),
            ("dt", self.dt),
            ("zeta", self.zeta),
            ("alpha", self.alpha),
            ("solver_tol", self.solver_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if !self.source.iter().all(|v| v.is_finite()) {
            return bad("source center must be finite");
        }
        Ok(())
    }

    /// Canonical one-line-per-field rendering used for fingerprints.
    pub fn canonical(&self) -> String {
        format!(
            "domain={}\nN={}\nD_tilde={:e}\nnu_tilde={:e}\ngamma={:e}\nepsilon={:e}\nr={:e}\nomega={:e}\nsource=({:e},{:e})\nstrength={:e}\nT={:e}\ndt={:e}\nC0={:e}\nentropy={:?}\ntensor_mode={}\nzeta={:e}\nalpha={:e}\ncoeff_sampling={}\nsolver_tol={:e}\nsteady_tol={:e}\nsolver={:?}\n",
            self.domain,
            self.n,
            self.d_tilde,
            self.nu_tilde,
            self.gamma,
            self.epsilon,
            self.r,
            self.omega,
            self.source[0],
            self.source[1],
            self.source_strength,
            self.t_final,
            self.dt,
            self.c0,
            self.entropy,
            self.tensor_mode,
            self.zeta,
            self.alpha,
            self.coeff_sampling.as_str(),
            self.solver_tol,
            self.steady_tol,
            self.solver,
        )
    }

    /// Short hash of [`SimParams::canonical`].
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Field values and diagnostics at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub step: usize,
    pub time: f64,
    /// `[C]` in scalar mode, `[C11, C12, C22]` in tensor mode.
    pub c: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub sigma: Vec<f64>,
    pub energy: EnergyParts,
    /// `‖Cⁿ − Cⁿ⁻¹‖∞ / Δt` (zero before the first step).
    pub dc_rate: f64,
    /// Smallest nodal eigenvalue of `C`.
    pub min_eig: f64,
    /// Reflection residual of all fields about `x = 1/2`.
    pub symmetry_residual: f64,
}

/// The three terms of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyParts {
    pub diffusion: f64,
    pub activation: f64,
    pub metabolic: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.diffusion + self.activation + self.metabolic
    }
}

/// One row of the energy series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub dc_rate: f64,
    pub min_eig: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    SteadyState,
    FinalTime,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::SteadyState => "steady-state",
            Termination::FinalTime => "T reached",
        }
    }
}

/// Time stepper owning the discretization and the current state.
pub struct Simulator {
    params: SimParams,
    space: FeSpace,
    mass: SparseOperator,
    laplacian: SparseOperator,
    source_load: Vec<f64>,
    neumann: NeumannSolver,
    neumann_ready: bool,
    update: SpdSolver,
    state: SimState,
}

impl Simulator {
    pub fn new(params: SimParams) -> Result<Self> {
        params.validate()?;
        let topology = classify_nodes(&params.domain, params.n, params.zeta, params.alpha)?;
        let space = FeSpace::new(topology, params.coeff_sampling)?;
        let kind = params.solver.unwrap_or_else(|| LinearSolverKind::for_dofs(space.n_dofs()));
        let mass = unit_mass(&space);
        let laplacian = unit_stiffness(&space);
        let neumann = NeumannSolver::new(&space, kind, params.solver_tol);
        let update = SpdSolver::new(std::sync::Arc::clone(space.pattern()), kind, params.solver_tol);
        let nd = space.n_dofs();
        let c = if params.tensor_mode {
            vec![vec![params.c0; nd], vec![0.0; nd], vec![params.c0; nd]]
        } else {
            vec![vec![params.c0; nd]]
        };
        let state = SimState {
            step: 0,
            time: 0.0,
            c,
            p: vec![0.0; nd],
            sigma: vec![0.0; nd],
            energy: EnergyParts::default(),
            dc_rate: 0.0,
            min_eig: 0.0,
            symmetry_residual: 0.0,
        };
        let (center, omega, strength) = (params.source, params.omega, params.source_strength);
        let mut sim = Simulator {
            params,
            space,
            mass,
            laplacian,
            source_load: Vec::new(),
            neumann,
            neumann_ready: false,
            update,
            state,
        };
        sim.set_source(move |x, y| {
            let (dx, dy) = (x - center[0], y - center[1]);
            strength * (-omega * (dx * dx + dy * dy)).exp()
        })?;
        Ok(sim)
    }

    /// Replaces the source term and recomputes `p`, `σ` and the diagnostics.
    pub fn set_source<F: Fn(f64, f64) -> f64>(&mut self, s: F) -> Result<()> {
        let h = self.space.h();
        self.source_load = match self.params.coeff_sampling {
            CoefficientSampling::Centroid => assemble_load(&self.space, |c| Sample::Uniform(s(c.centroid[0], c.centroid[1])))?,
            CoefficientSampling::NodalQ5 => assemble_load(&self.space, |c| {
                let o = c.polygon.origin();
                Sample::Corners([[0.0, 0.0], [h, 0.0], [h, h], [0.0, h]].map(|d| s(o[0] + d[0], o[1] + d[1])))
            })?,
        };
        self.refresh()
    }

    /// Replaces the conductivity (one vector per component) and recomputes
    /// the dependent fields.
    pub fn set_conductivity(&mut self, c: Vec<Vec<f64>>) -> Result<()> {
        let comps = if self.params.tensor_mode { 3 } else { 1 };
        if c.len() != comps || c.iter().any(|v| v.len() != self.space.n_dofs()) {
            return Err(Error::InvalidArgument(format!(
                "conductivity needs {comps} components of length {}",
                self.space.n_dofs()
            )));
        }
        self.state.c = c;
        self.refresh()
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    fn refresh(&mut self) -> Result<()> {
        self.neumann_ready = false;
        self.state.p = self.solve_pressure()?;
        self.state.sigma = self.solve_sigma()?;
        self.state.energy = self.energy();
        self.state.min_eig = self.min_eigenvalue();
        self.state.symmetry_residual = self.symmetry_residual(Axis::CENTER_X)?;
        Ok(())
    }

    fn components(&self) -> usize {
        self.state.c.len()
    }

    /// Conductivity tensor from per-component values (scalar `c` means `cI`).
    fn tensor_of(&self, vals: [f64; 3]) -> SymTensor {
        if self.params.tensor_mode {
            SymTensor::new(vals[0], vals[1], vals[2])
        } else {
            SymTensor::isotropic(vals[0])
        }
    }

    fn conductivity_norm(&self, t: &SymTensor) -> f64 {
        if self.params.tensor_mode {
            t.frobenius()
        } else {
            t.xx.abs()
        }
    }

    fn centroid_tensor(&self, cell: &CellData) -> SymTensor {
        let mut vals = [0.0; 3];
        for (k, comp) in self.state.c.iter().enumerate() {
            vals[k] = self.space.centroid_value(comp, cell);
        }
        self.tensor_of(vals)
    }

    fn corner_tensors(&self, cell: &CellData) -> [SymTensor; 4] {
        std::array::from_fn(|a| {
            let mut vals = [0.0; 3];
            for (k, comp) in self.state.c.iter().enumerate() {
                vals[k] = comp[cell.dofs[a]];
            }
            self.tensor_of(vals)
        })
    }

    fn permeability(&self, cell: &CellData) -> Sample<SymTensor> {
        let r = SymTensor::isotropic(self.params.r);
        match self.params.coeff_sampling {
            CoefficientSampling::Centroid => Sample::Uniform(self.centroid_tensor(cell) + r),
            CoefficientSampling::NodalQ5 => Sample::Corners(self.corner_tensors(cell).map(|t| t + r)),
        }
    }

    fn ensure_neumann(&mut self) -> Result<()> {
        if !self.neumann_ready {
            let k = assemble_stiffness(&self.space, |c| self.permeability(c))?;
            self.neumann.factor(&k)?;
            self.neumann_ready = true;
        }
        Ok(())
    }

    fn neumann_solve(&mut self, b: &[f64]) -> Result<Vec<f64>> {
        let total: f64 = b.iter().sum();
        let mass: f64 = self.space.lumped_mass().iter().sum();
        let projected_zero = b
            .iter()
            .zip(self.space.lumped_mass())
            .all(|(bi, mi)| *bi - total / mass * mi == 0.0);
        if projected_zero {
            return Ok(vec![0.0; b.len()]);
        }
        self.ensure_neumann()?;
        self.neumann.solve(b)
    }

    /// Zero-mean pressure for the current conductivity.
    pub fn solve_pressure(&mut self) -> Result<Vec<f64>> {
        let b = self.source_load.clone();
        self.neumann_solve(&b)
    }

    /// Zero-mean σ for the current conductivity and pressure.
    pub fn solve_sigma(&mut self) -> Result<Vec<f64>> {
        let gen = self.params.entropy;
        let p = &self.state.p;
        let space = &self.space;
        let r = SymTensor::isotropic(self.params.r);
        let samples = space
            .cells()
            .iter()
            .map(|cell| -> Result<Sample<f64>> {
                Ok(match self.params.coeff_sampling {
                    CoefficientSampling::Centroid => {
                        let m = self.centroid_tensor(cell) + r;
                        let g = cell_gradient(space, p, cell);
                        let d3 = gen.phi3(space.centroid_value(p, cell))?;
                        Sample::Uniform(d3 * m.quadratic(g, g))
                    }
                    CoefficientSampling::NodalQ5 => {
                        let ms = self.corner_tensors(cell);
                        let gs = corner_gradients(space, p, cell);
                        let mut out = [0.0; 4];
                        for a in 0..4 {
                            let m = ms[a] + r;
                            out[a] = gen.phi3(p[cell.dofs[a]])? * m.quadratic(gs[a], gs[a]);
                        }
                        Sample::Corners(out)
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let b = assemble_load_from(space, &samples)?;
        self.neumann_solve(&b)
    }

    /// Activation forcing `Φ''(p)∇p⊗∇p + sym(∇σ⊗∇p)` on a cell.
    fn forcing(&self, cell: &CellData) -> Result<Sample<SymTensor>> {
        let gen = self.params.entropy;
        let (p, sigma, space) = (&self.state.p, &self.state.sigma, &self.space);
        let value = |pv: f64, gp: [f64; 2], gs: [f64; 2]| -> Result<SymTensor> {
            let d2 = gen.phi2(pv)?;
            Ok(d2 * SymTensor::sym_outer(gp, gp) + SymTensor::sym_outer(gs, gp))
        };
        Ok(match self.params.coeff_sampling {
            CoefficientSampling::Centroid => Sample::Uniform(value(
                space.centroid_value(p, cell),
                cell_gradient(space, p, cell),
                cell_gradient(space, sigma, cell),
            )?),
            CoefficientSampling::NodalQ5 => {
                let gp = corner_gradients(space, p, cell);
                let gs = corner_gradients(space, sigma, cell);
                let mut out = [SymTensor::ZERO; 4];
                for a in 0..4 {
                    out[a] = value(p[cell.dofs[a]], gp[a], gs[a])?;
                }
                Sample::Corners(out)
            }
        })
    }

    fn forcing_loads(&self) -> Result<Vec<Vec<f64>>> {
        let cells = self.space.cells();
        let samples: Vec<Sample<SymTensor>> = cells.iter().map(|c| self.forcing(c)).collect::<Result<_>>()?;
        let scalar = !self.params.tensor_mode;
        let pick = |t: &SymTensor, k: usize| if scalar { t.xx + t.yy } else { t.components()[k] };
        (0..self.components())
            .map(|k| {
                let comp: Vec<Sample<f64>> = samples
                    .iter()
                    .map(|s| match s {
                        Sample::Uniform(t) => Sample::Uniform(pick(t, k)),
                        Sample::Corners(ts) => Sample::Corners(ts.map(|t| pick(&t, k))),
                    })
                    .collect();
                assemble_load_from(&self.space, &comp)
            })
            .collect()
    }

    fn metabolic_weight(&self, t: &SymTensor) -> f64 {
        (self.conductivity_norm(t) + self.params.epsilon).powf(self.params.gamma - 2.0)
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.params.dt;
        let weighted = assemble_mass(&self.space, |c| match self.params.coeff_sampling {
            CoefficientSampling::Centroid => Sample::Uniform(self.metabolic_weight(&self.centroid_tensor(c))),
            CoefficientSampling::NodalQ5 => Sample::Corners(self.corner_tensors(c).map(|t| self.metabolic_weight(&t))),
        })?;
        let mut system = self.mass.clone();
        let diffusion = dt * self.params.d_tilde * self.params.d_tilde;
        if diffusion != 0.0 {
            system.add_scaled(diffusion, &self.laplacian);
        }
        if self.params.nu_tilde != 0.0 {
            system.add_scaled(dt * self.params.nu_tilde, &weighted);
        }
        self.update.factor(&system)?;

        let loads = self.forcing_loads()?;
        let next_step = self.state.step + 1;
        let mut next = Vec::with_capacity(self.components());
        let mut rate = 0.0f64;
        // Increment form of (M + Δt D̃² K + Δt ν̃ M_w) Cⁿ⁺¹ = M Cⁿ + Δt F, which
        // leaves Cⁿ bit-for-bit unchanged when the right side vanishes.
        for (comp, load) in self.state.c.iter().zip(&loads) {
            let mut rhs: Vec<f64> = load.iter().map(|f| dt * f).collect();
            if diffusion != 0.0 {
                for (r, k) in rhs.iter_mut().zip(self.laplacian.matvec(comp)) {
                    *r -= diffusion * k;
                }
            }
            if self.params.nu_tilde != 0.0 {
                let decay = dt * self.params.nu_tilde;
                for (r, w) in rhs.iter_mut().zip(weighted.matvec(comp)) {
                    *r -= decay * w;
                }
            }
            let delta = if rhs.iter().all(|&v| v == 0.0) {
                vec![0.0; rhs.len()]
            } else {
                self.update.solve(&rhs)?
            };
            let mut new = comp.clone();
            for (a, d) in new.iter_mut().zip(&delta) {
                *a += d;
                if !a.is_finite() {
                    return Err(Error::NonFinite { step: next_step });
                }
                rate = rate.max(d.abs() / dt);
            }
            next.push(new);
        }
        self.state.c = next;
        self.state.step = next_step;
        self.state.time = next_step as f64 * dt;
        self.state.dc_rate = rate;
        self.refresh()
    }

    /// Energy of the current state, split into its three terms.
    pub fn energy(&self) -> EnergyParts {
        let prm = &self.params;
        let diffusion = if prm.d_tilde == 0.0 {
            0.0
        } else {
            let weights: &[f64] = if prm.tensor_mode { &[1.0, 2.0, 1.0] } else { &[1.0] };
            let grad_sq: f64 = self
                .state
                .c
                .iter()
                .zip(weights)
                .map(|(c, w)| w * self.laplacian.quadratic_form(c))
                .sum();
            0.5 * prm.d_tilde * prm.d_tilde * grad_sq
        };
        let r = SymTensor::isotropic(prm.r);
        let (mut activation, mut metabolic) = (0.0, 0.0);
        for cell in self.space.cells() {
            let c = self.centroid_tensor(cell);
            let g = cell_gradient(&self.space, &self.state.p, cell);
            if g != [0.0, 0.0] {
                let pc = self.space.centroid_value(&self.state.p, cell);
                // The generator domain was checked by the solves that produced p.
                let d2 = prm.entropy.phi2(pc).unwrap_or(f64::NAN);
                activation += cell.area * d2 * (c + r).quadratic(g, g);
            }
            metabolic += cell.area * self.conductivity_norm(&c).powf(prm.gamma);
        }
        EnergyParts {
            diffusion,
            activation,
            metabolic: prm.nu_tilde / prm.gamma * metabolic,
        }
    }

    fn min_eigenvalue(&self) -> f64 {
        (0..self.space.n_dofs())
            .map(|d| {
                let vals: Vec<f64> = self.state.c.iter().map(|c| c[d]).collect();
                let t = if self.params.tensor_mode {
                    SymTensor::new(vals[0], vals[1], vals[2])
                } else {
                    SymTensor::isotropic(vals[0])
                };
                t.min_eigenvalue()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Reflection residual of the current fields.
    pub fn symmetry_residual(&self, axis: Axis) -> Result<f64> {
        symmetry_residual(&self.snapshot(), axis)
    }

    pub fn energy_record(&self) -> EnergyRecord {
        EnergyRecord {
            step: self.state.step,
            time: self.state.time,
            energy: self.state.energy.total(),
            dc_rate: self.state.dc_rate,
            min_eig: self.state.min_eig,
        }
    }

    /// Column labels of snapshots in the current mode.
    pub fn labels(&self) -> Vec<String> {
        let mut labels = vec!["p".to_string(), "sigma".to_string()];
        if self.params.tensor_mode {
            labels.extend(["C11", "C12", "C22"].map(String::from));
        } else {
            labels.push("C".into());
        }
        labels
    }

    /// Current fields on the active nodes in row-major lattice order.
    pub fn snapshot(&self) -> Snapshot {
        let nodes = (0..self.space.n_dofs())
            .map(|d| {
                let (i, j) = self.space.dof_ij(d);
                let pos = self.space.dof_position(d);
                SnapshotNode {
                    i,
                    j,
                    x: pos[0],
                    y: pos[1],
                    class: self.space.dof_class(d),
                }
            })
            .collect();
        let mut columns = vec![self.state.p.clone(), self.state.sigma.clone()];
        columns.extend(self.state.c.iter().cloned());
        Snapshot {
            n: self.params.n,
            domain: self.params.domain.kind().to_string(),
            step: self.state.step,
            time: self.state.time,
            fingerprint: self.params.fingerprint(),
            nodes,
            labels: self.labels(),
            columns,
        }
    }

    /// Runs to `T` or to a steady state. `observe` sees the initial state and
    /// the state after every step.
    pub fn run_with<F>(&mut self, mut observe: F) -> Result<Termination>
    where
        F: FnMut(&Simulator) -> Result<()>,
    {
        observe(self)?;
        for _ in 0..self.params.step_count() {
            self.step()?;
            observe(self)?;
            if self.state.dc_rate < self.params.steady_tol {
                return Ok(Termination::SteadyState);
            }
        }
        Ok(Termination::FinalTime)
    }
}

/// Energy series, snapshots and final state of a finished run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub energy: Vec<EnergyRecord>,
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    pub final_state: SimState,
}

/// Runs a simulation, keeping snapshots every `snapshot_every` steps (when
/// nonzero) plus the initial and final ones.
pub fn run(params: SimParams) -> Result<Trajectory> {
    let mut sim = Simulator::new(params)?;
    let every = sim.params.snapshot_every;
    let mut energy = Vec::new();
    let mut snapshots = Vec::new();
    let termination = sim.run_with(|s| {
        energy.push(s.energy_record());
        let step = s.state.step;
        if step == 0 || (every > 0 && step % every == 0) {
            snapshots.push(s.snapshot());
        }
        Ok(())
    })?;
    if snapshots.last().map(|s| s.step) != Some(sim.state.step) {
        snapshots.push(sim.snapshot());
    }
    Ok(Trajectory {
        energy,
        snapshots,
        termination,
        final_state: sim.state.clone(),
    })
}
