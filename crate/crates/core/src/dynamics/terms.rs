//! The channels of the ground-level equation of motion.

use std::sync::Arc;

use super::params::{BiasModel, RelaxationForm, SimParams};
use super::state::DensityMatrix;
use crate::error::{Error, Result};
use crate::optics::coupling::ground_optical;
use crate::optics::{DrivenField, ExcitedSolver, OpticalSystem};
use crate::spin::{CoupledBasis, VectorOperator};
use crate::{CMat, C64};

const I: C64 = C64::new(0.0, 1.0);

fn cr(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// Σ_i S_i ρ S_i
fn sandwich(rho: &CMat, s: &VectorOperator) -> CMat {
    let [x, y, z] = s.components();
    x * rho * x + y * rho * y + z * rho * z
}

/// ρS_i + S_iρ − 2i(S×ρS)_i for i = x, y, z.
pub fn exchange_vector_parts(rho: &CMat, s: &VectorOperator) -> [CMat; 3] {
    let [x, y, z] = s.components();
    let cross = [
        y * rho * z - z * rho * y,
        z * rho * x - x * rho * z,
        x * rho * y - y * rho * x,
    ];
    let ops = [x, y, z];
    std::array::from_fn(|k| rho * ops[k] + ops[k] * rho - &cross[k] * (I * 2.0))
}

/// −c[¾ρ − S·ρS − M·(ρS + Sρ − 2i S×ρS)] with M = Tr(ρS).
pub fn spin_exchange_term(rho: &CMat, coefficient: f64, s: &VectorOperator) -> CMat {
    if coefficient == 0.0 {
        return CMat::zeros(rho.nrows(), rho.ncols());
    }
    let m: [C64; 3] = std::array::from_fn(|k| (rho * s.components()[k]).trace());
    let v = exchange_vector_parts(rho, s);
    let mut out = (rho * cr(0.75) - sandwich(rho, s)) * cr(-coefficient);
    for k in 0..3 {
        out += &v[k] * (m[k] * coefficient);
    }
    out
}

/// Linear part −c(¾ρ − S·ρS) of the exchange channel.
fn exchange_linear(rho: &CMat, coefficient: f64, s: &VectorOperator) -> CMat {
    (rho * cr(0.75) - sandwich(rho, s)) * cr(-coefficient)
}

/// The Γ spin-destruction channel.
pub fn relaxation_term(rho: &CMat, gamma: f64, form: RelaxationForm, f: &VectorOperator) -> CMat {
    match form {
        RelaxationForm::TotalSpin => {
            let f2 = f.squared();
            let anti = (&f2 * rho + rho * &f2) * cr(0.5);
            (anti - sandwich(rho, f)) * cr(-gamma)
        }
        RelaxationForm::Uniform => {
            let n = rho.nrows();
            let tr = rho.trace();
            (rho - CMat::identity(n, n) * (tr / n as f64)) * cr(-gamma)
        }
    }
}

/// |h|(Tr ρ · |F_max, ±F_max⟩⟨F_max, ±F_max| − ρ), sign of `h` selecting the state.
pub fn ideal_bias_term(rho: &CMat, h: f64, basis: &CoupledBasis) -> CMat {
    if h == 0.0 {
        return CMat::zeros(rho.nrows(), rho.ncols());
    }
    let target = if h > 0.0 { basis.dimension() - 1 } else { basis.manifold(basis.f_values()[basis.f_values().len() - 1])[0] };
    let mut out = rho * cr(-h.abs());
    out[(target, target)] += rho.trace() * h.abs();
    out
}

/// Everything shared by all parameter points with the same atom, field, optics
/// and flags: operators and unit-amplitude optical couplings.
#[derive(Debug)]
pub struct Model {
    pub sys: OpticalSystem,
    pub unit_pump: DrivenField,
    /// Absorption rate per unpolarized atom at E₀² = 1.
    pub pump_rate_per_e2: f64,
    /// σ+ and σ− bias couplings and the M pumping rate of σ+ at E₀² = 1.
    unit_bias: Option<([DrivenField; 2], f64)>,
    key: ModelKey,
}

#[derive(Debug, Clone, PartialEq)]
struct ModelKey {
    atom: crate::spin::AtomSpec,
    b_z: f64,
    coll: crate::optics::CollisionParams,
    doppler: crate::optics::DopplerSpec,
    pump: crate::optics::OpticalField,
    bias_detuning: Option<f64>,
    zeeman_in_optics: bool,
}

impl ModelKey {
    fn of(p: &SimParams) -> Self {
        let mut pump = p.pump;
        pump.amplitude_sq = 1.0;
        ModelKey {
            atom: p.atom,
            b_z: p.b_z,
            coll: p.coll,
            doppler: p.doppler,
            pump,
            bias_detuning: match p.bias {
                BiasModel::Optical { detuning, .. } => Some(detuning),
                _ => None,
            },
            zeeman_in_optics: p.flags.zeeman_in_optics,
        }
    }
}

impl Model {
    pub fn new(p: &SimParams) -> Result<Arc<Model>> {
        p.validate()?;
        let key = ModelKey::of(p);
        let sys = OpticalSystem::new(p.atom, p.b_z);
        let unit_pump = sys.drive(&key.pump, &p.coll, &p.doppler, p.flags.zeeman_in_optics)?;
        let pump_rate_per_e2 = unit_pump.absorption_rate();
        if !(pump_rate_per_e2 > 0.0) {
            return Err(Error::InvalidArgument("pump does not excite the unpolarized state".into()));
        }
        let mut model = Model {
            sys,
            unit_pump,
            pump_rate_per_e2,
            unit_bias: None,
            key,
        };
        if let Some(det) = model.key.bias_detuning {
            let fields = [1.0, -1.0].map(|s| {
                let f = BiasModel::optical_field(det, s, model.key.pump.resolved);
                model.sys.drive(&f, &p.coll, &p.doppler, p.flags.zeeman_in_optics)
            });
            let [a, b] = fields;
            let pair = [a?, b?];
            let rate = model.m_pumping_rate(&pair[0], p)?;
            if !(rate > 0.0) {
                return Err(Error::InvalidArgument("bias beam does not orient the vapor".into()));
            }
            model.unit_bias = Some((pair, rate));
        }
        Ok(Arc::new(model))
    }

    /// Whether this model can serve parameter set `p`.
    pub fn compatible(&self, p: &SimParams) -> bool {
        self.key == ModelKey::of(p)
    }

    fn h_excited(&self) -> &CMat {
        if self.key.zeeman_in_optics {
            &self.sys.h_excited
        } else {
            &self.sys.h_excited_hf
        }
    }

    /// dM/dt of the unpolarized state under `field` alone.
    fn m_pumping_rate(&self, field: &DrivenField, p: &SimParams) -> Result<f64> {
        let solver = ExcitedSolver::new(std::slice::from_ref(field), self.h_excited(), &self.sys.excited_ops.s, &p.coll);
        let rho = DensityMatrix::unpolarized(self.sys.ground.dimension()).0;
        let rho_e = solver.solve(&rho)?;
        let out = ground_optical(&rho, &rho_e, std::slice::from_ref(field), &self.sys.dipole, &p.coll, p.flags.light_shift);
        Ok((&out * &self.sys.ground_ops.f.z.matrix).trace().re / p.atom.f_max())
    }

    /// E₀² giving pumping rate `pump_scale · I`.
    pub fn pump_amplitude_sq(&self, p: &SimParams) -> f64 {
        p.calibration.pump_scale * p.i_rate / self.pump_rate_per_e2
    }
}

/// One parameter point: scaled fields and the factorized excited-level solve.
#[derive(Debug, Clone)]
pub struct Point {
    pub model: Arc<Model>,
    pub params: SimParams,
    fields: Vec<DrivenField>,
    solver: Option<ExcitedSolver>,
    exchange: f64,
}

impl Point {
    pub fn new(model: Arc<Model>, params: &SimParams) -> Result<Point> {
        params.validate()?;
        if !model.compatible(params) {
            return Err(Error::InvalidArgument("model was built for different constants".into()));
        }
        let mut fields = Vec::new();
        if params.i_rate > 0.0 {
            fields.push(model.unit_pump.scaled(model.pump_amplitude_sq(params).sqrt()));
        }
        if let (BiasModel::Optical { h, .. }, Some((pair, rate))) = (params.bias, &model.unit_bias) {
            if h != 0.0 {
                let f = if h > 0.0 { &pair[0] } else { &pair[1] };
                fields.push(f.scaled((h.abs() / rate).sqrt()));
            }
        }
        let solver = if fields.is_empty() {
            None
        } else {
            Some(ExcitedSolver::new(&fields, model.h_excited(), &model.sys.excited_ops.s, &params.coll))
        };
        Ok(Point {
            exchange: params.exchange_coefficient(),
            model,
            params: *params,
            fields,
            solver,
        })
    }

    /// Builds a fresh model for `params`.
    pub fn standalone(params: &SimParams) -> Result<Point> {
        Point::new(Model::new(params)?, params)
    }

    pub fn basis(&self) -> &CoupledBasis {
        &self.model.sys.ground
    }

    pub fn exchange_coefficient(&self) -> f64 {
        self.exchange
    }

    /// Electron spin S of the ground level.
    pub fn spin(&self) -> &VectorOperator {
        &self.model.sys.ground_ops.s
    }

    /// Quasi-steady excited state for `rho`.
    pub fn excited_state(&self, rho: &CMat) -> Result<CMat> {
        match &self.solver {
            Some(s) => s.solve(rho),
            None => Ok(CMat::zeros(self.model.sys.excited.dimension(), self.model.sys.excited.dimension())),
        }
    }

    /// Optical depletion, stimulated return and repopulation.
    pub fn optical_term(&self, rho: &CMat) -> Result<CMat> {
        if self.fields.is_empty() {
            return Ok(CMat::zeros(rho.nrows(), rho.ncols()));
        }
        let rho_e = self.excited_state(rho)?;
        Ok(ground_optical(
            rho,
            &rho_e,
            &self.fields,
            &self.model.sys.dipole,
            &self.params.coll,
            self.params.flags.light_shift,
        ))
    }

    /// All channels linear in ρ.
    pub fn linear_rhs(&self, rho: &CMat) -> Result<CMat> {
        let sys = &self.model.sys;
        let p = &self.params;
        let h = &sys.h_ground;
        let mut out = (h * rho - rho * h) * (-I);
        out += self.optical_term(rho)?;
        out += relaxation_term(rho, p.gamma, p.relaxation, &sys.ground_ops.f);
        out += exchange_linear(rho, self.exchange, &sys.ground_ops.s);
        if let BiasModel::Ideal { h } = p.bias {
            out += ideal_bias_term(rho, h, &sys.ground);
        }
        Ok(out)
    }

    /// The full nonlinear dρ/dt.
    pub fn rhs(&self, rho: &CMat) -> Result<CMat> {
        let s = self.spin();
        let mut out = self.linear_rhs(rho)?;
        if self.exchange != 0.0 {
            let m: [C64; 3] = std::array::from_fn(|k| (rho * s.components()[k]).trace());
            let v = exchange_vector_parts(rho, s);
            for k in 0..3 {
                out += &v[k] * (m[k] * self.exchange);
            }
        }
        Ok(out)
    }
}

/// dρ/dt for `rho` under `point` (channels as listed on [`Point::rhs`]).
pub fn ground_rhs(rho: &DensityMatrix, point: &Point) -> Result<CMat> {
    point.rhs(&rho.0)
}
