//! Bivariate reference models with closed-form tail dependence.
//!
//! Every model exposes its stable tail dependence function `L`, the
//! Pickands function `A(t) = L(1 - t, t)`, and (where it is known in closed
//! form) the partial derivatives of `L` and the second-order function `M`
//! with its pre-limit approximation. The models also carry exact samplers,
//! see [`sample`].

mod sampling;
mod student;

pub use sampling::{rng_from_seed, sample, stream_seed, Sample, SampleRng};
pub use student::student_cdf;

use std::fmt;

use crate::error::{Error, Result};

/// A bivariate reference distribution.
///
/// Construct through the checked constructors ([`TailModel::bpii`],
/// [`TailModel::student`], ...) or call [`TailModel::validate`] on a
/// hand-built value before use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// Bivariate Pareto of type II with index `beta > 2`; its tail
    /// dependence is the negative logistic model with `p = 1/(beta - 2)`.
    Bpii { beta: f64 },
    /// Bivariate Student-t with `nu` degrees of freedom and correlation
    /// `theta`. `nu = 1, theta = 0` is the whole-plane Cauchy model.
    StudentDep { nu: f64, theta: f64 },
    /// Bivariate normal with correlation `tau`; asymptotically independent.
    Gaussian { tau: f64 },
    /// Symmetric logistic extreme-value law with Gumbel margins.
    SymLogistic { s: f64 },
    /// Archimax copula (Clayton generator with index 1) built on the
    /// logistic tail function `(x^{1/s} + y^{1/s})^s`.
    ArchimaxLogistic { s: f64 },
    /// Archimax copula built on the mixed tail function
    /// `(x^2 + y^2 + xy) / (x + y)`.
    ArchimaxMixed,
}

/// Optional model parameters, as supplied on the command line or in a spec
/// file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModelParams {
    pub beta: Option<f64>,
    pub nu: Option<f64>,
    pub theta: Option<f64>,
    pub tau: Option<f64>,
    pub s: Option<f64>,
}

fn required(value: Option<f64>, name: &str, tag: &str) -> Result<f64> {
    value.ok_or_else(|| Error::arg(format!("model {tag} requires --{name}")))
}

impl TailModel {
    /// Builds a model from its tag (`bpii`, `student`, `cauchy`, `gaussian`,
    /// `sym-logistic`, `archimax-logistic`, `archimax-mixed`). The Student
    /// correlation defaults to 0.
    pub fn from_tag(tag: &str, p: &ModelParams) -> Result<Self> {
        match tag {
            "bpii" => Self::bpii(required(p.beta, "beta", tag)?),
            "student" => Self::student(required(p.nu, "nu", tag)?, p.theta.unwrap_or(0.0)),
            "cauchy" => Ok(Self::cauchy()),
            "gaussian" => Self::gaussian(required(p.tau, "tau", tag)?),
            "sym-logistic" => Self::sym_logistic(required(p.s, "s", tag)?),
            "archimax-logistic" => Self::archimax_logistic(required(p.s, "s", tag)?),
            "archimax-mixed" => Ok(Self::archimax_mixed()),
            other => Err(Error::arg(format!("unknown model {other:?}"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Bpii { .. } => "bpii",
            Self::StudentDep { .. } => "student",
            Self::Gaussian { .. } => "gaussian",
            Self::SymLogistic { .. } => "sym-logistic",
            Self::ArchimaxLogistic { .. } => "archimax-logistic",
            Self::ArchimaxMixed => "archimax-mixed",
        }
    }

    /// Parameters that reproduce `self` through [`TailModel::from_tag`].
    pub fn params(&self) -> ModelParams {
        let mut p = ModelParams::default();
        match *self {
            Self::Bpii { beta } => p.beta = Some(beta),
            Self::StudentDep { nu, theta } => {
                p.nu = Some(nu);
                p.theta = Some(theta);
            }
            Self::Gaussian { tau } => p.tau = Some(tau),
            Self::SymLogistic { s } | Self::ArchimaxLogistic { s } => p.s = Some(s),
            Self::ArchimaxMixed => {}
        }
        p
    }

    pub fn bpii(beta: f64) -> Result<Self> {
        Self::Bpii { beta }.validated()
    }

    pub fn student(nu: f64, theta: f64) -> Result<Self> {
        Self::StudentDep { nu, theta }.validated()
    }

    pub fn cauchy() -> Self {
        Self::StudentDep { nu: 1.0, theta: 0.0 }
    }

    pub fn gaussian(tau: f64) -> Result<Self> {
        Self::Gaussian { tau }.validated()
    }

    pub fn sym_logistic(s: f64) -> Result<Self> {
        Self::SymLogistic { s }.validated()
    }

    pub fn archimax_logistic(s: f64) -> Result<Self> {
        Self::ArchimaxLogistic { s }.validated()
    }

    pub fn archimax_mixed() -> Self {
        Self::ArchimaxMixed
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Bpii { beta } if !(beta > 2.0 && beta.is_finite()) => {
                Err(Error::arg(format!("BPII requires beta > 2, got {beta}")))
            }
            Self::StudentDep { nu, .. } if !(nu > 0.0 && nu.is_finite()) => Err(Error::arg(
                format!("Student model requires nu > 0, got {nu}"),
            )),
            Self::StudentDep { theta, .. } if !(theta > -1.0 && theta < 1.0) => Err(Error::arg(
                format!("Student model requires theta in (-1, 1), got {theta}"),
            )),
            Self::Gaussian { tau } if !(tau > -1.0 && tau < 1.0) => Err(Error::arg(format!(
                "Gaussian model requires tau in (-1, 1), got {tau}"
            ))),
            Self::SymLogistic { s } | Self::ArchimaxLogistic { s } if !(s > 0.0 && s <= 1.0) => {
                Err(Error::arg(format!("logistic parameter s must lie in (0, 1], got {s}")))
            }
            _ => Ok(()),
        }
    }

    /// Value of the stable tail dependence function at `x` (both
    /// coordinates nonnegative).
    pub fn stdf(&self, x: [f64; 2]) -> f64 {
        let [x1, x2] = x;
        match *self {
            Self::Bpii { beta } => {
                let p = 1.0 / (beta - 2.0);
                x1 + x2 - negative_logistic_core(x1, x2, p)
            }
            Self::StudentDep { nu, theta } => student_stdf(x1, x2, nu, theta),
            Self::Gaussian { .. } => x1 + x2,
            Self::SymLogistic { s } | Self::ArchimaxLogistic { s } => logistic(x1, x2, s),
            Self::ArchimaxMixed => mixed(x1, x2),
        }
    }

    /// Pickands dependence function `A(t) = L(1 - t, t)`.
    pub fn pickands(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::arg(format!("Pickands argument must lie in [0, 1], got {t}")));
        }
        Ok(self.stdf([1.0 - t, t]))
    }

    /// Partial derivative of `L` in coordinate `j` (0 or 1), for `x[j] > 0`.
    pub fn partial_stdf(&self, j: usize, x: [f64; 2]) -> Result<f64> {
        if j > 1 {
            return Err(Error::arg(format!("coordinate index {j} out of range for d = 2")));
        }
        if !(x[j] > 0.0) || x[1 - j] < 0.0 {
            return Err(Error::arg(format!(
                "partial derivative needs x[{j}] > 0 and the other coordinate >= 0, got {x:?}"
            )));
        }
        // Evaluate the derivative in the first slot by symmetry of every model.
        let (u, v) = if j == 0 { (x[0], x[1]) } else { (x[1], x[0]) };
        let d = match *self {
            Self::Bpii { beta } => {
                let p = 1.0 / (beta - 2.0);
                let core = negative_logistic_core(u, v, p);
                1.0 - (core / u).powf(1.0 + p)
            }
            Self::StudentDep { nu, theta } => {
                if v == 0.0 {
                    1.0
                } else {
                    let z = ((u / v).powf(1.0 / nu) - theta) * ((nu + 1.0) / (1.0 - theta * theta)).sqrt();
                    student_cdf(z, nu + 1.0)
                }
            }
            Self::Gaussian { .. } => 1.0,
            Self::SymLogistic { s } | Self::ArchimaxLogistic { s } => {
                (u / logistic(u, v, s)).powf(1.0 / s - 1.0)
            }
            Self::ArchimaxMixed => (u * u + 2.0 * u * v) / ((u + v) * (u + v)),
        };
        Ok(d)
    }

    /// Closed-form second-order function `M`, homogeneous of order 2
    /// (second-order index -1) for the three models where it is known.
    pub fn second_order_m(&self, x: [f64; 2]) -> Result<f64> {
        let [x1, x2] = x;
        if !(x1 > 0.0 && x2 > 0.0) {
            return Err(Error::arg(format!("M is evaluated at positive points, got {x:?}")));
        }
        match *self {
            Self::SymLogistic { s } => {
                let l = logistic(x1, x2, s);
                let e = 1.0 / s;
                Ok(0.5 * (x1 * x1.powf(e) + x2 * x2.powf(e)) * l.powf(1.0 - e) - 0.5 * l * l)
            }
            Self::ArchimaxLogistic { .. } | Self::ArchimaxMixed => {
                let l = self.stdf(x);
                let d1 = self.partial_stdf(0, x)?;
                let d2 = self.partial_stdf(1, x)?;
                Ok(x1 * x1 * d1 + x2 * x2 * d2 - l * l)
            }
            _ => Err(self.unsupported("second-order function M")),
        }
    }

    /// Second-order index of the models with a closed-form `M`.
    pub fn second_order_rho(&self) -> Option<f64> {
        match self {
            Self::SymLogistic { .. } | Self::ArchimaxLogistic { .. } | Self::ArchimaxMixed => Some(-1.0),
            _ => None,
        }
    }

    /// Pre-limit second-order quotient
    /// `{t [1 - F(F1^-1(1 - x1/t), F2^-1(1 - x2/t))] - L(x)} / alpha(t)`
    /// with `alpha(t) = 1/t`, computed from the closed-form joint c.d.f.
    pub fn numeric_m_limit(&self, x: [f64; 2], t: f64) -> Result<f64> {
        let [x1, x2] = x;
        if !(x1 > 0.0 && x2 > 0.0) {
            return Err(Error::arg(format!("M is evaluated at positive points, got {x:?}")));
        }
        if !(t >= 10.0) {
            return Err(Error::arg(format!("pre-limit quotient needs t >= 10, got {t}")));
        }
        if x1 >= t || x2 >= t {
            return Err(Error::arg("x / t must lie below 1"));
        }
        let survival = match *self {
            Self::SymLogistic { s } => {
                // Gumbel quantile at 1 - x/t gives exp(-q) = -ln(1 - x/t).
                let g1 = -(-x1 / t).ln_1p();
                let g2 = -(-x2 / t).ln_1p();
                let v = (g1.powf(1.0 / s) + g2.powf(1.0 / s)).powf(s);
                -(-v).exp_m1()
            }
            Self::ArchimaxLogistic { .. } | Self::ArchimaxMixed => {
                // Uniform margins; phi(1 - x/t) = (x/t) / (1 - x/t).
                let p1 = (x1 / t) / (1.0 - x1 / t);
                let p2 = (x2 / t) / (1.0 - x2 / t);
                let l = self.stdf([p1, p2]);
                l / (1.0 + l)
            }
            _ => return Err(self.unsupported("pre-limit second-order quotient")),
        };
        Ok(t * (t * survival - self.stdf(x)))
    }

    /// Closed-form joint distribution function, where one exists.
    pub fn joint_cdf(&self, z: [f64; 2]) -> Option<f64> {
        let [z1, z2] = z;
        match *self {
            Self::Bpii { beta } => {
                let c = beta - 2.0;
                let (z1, z2) = (z1.max(0.0), z2.max(0.0));
                Some(
                    1.0 - (1.0 + z1).powf(-c) - (1.0 + z2).powf(-c) + (1.0 + z1 + z2).powf(-c),
                )
            }
            Self::SymLogistic { s } => {
                Some((-((-z1 / s).exp() + (-z2 / s).exp()).powf(s)).exp())
            }
            Self::ArchimaxLogistic { .. } | Self::ArchimaxMixed => {
                let (u, v) = (z1.clamp(0.0, 1.0), z2.clamp(0.0, 1.0));
                if u == 0.0 || v == 0.0 {
                    return Some(0.0);
                }
                Some(1.0 / (1.0 + self.stdf([1.0 / u - 1.0, 1.0 / v - 1.0])))
            }
            Self::StudentDep { .. } | Self::Gaussian { .. } => None,
        }
    }

    /// Marginal distribution function (both margins are identical).
    pub fn marginal_cdf(&self, z: f64) -> f64 {
        match *self {
            Self::Bpii { beta } => {
                if z <= 0.0 {
                    0.0
                } else {
                    1.0 - (1.0 + z).powf(-(beta - 2.0))
                }
            }
            Self::StudentDep { nu, .. } => student_cdf(z, nu),
            Self::Gaussian { .. } => 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2),
            Self::SymLogistic { .. } => (-(-z).exp()).exp(),
            Self::ArchimaxLogistic { .. } | Self::ArchimaxMixed => z.clamp(0.0, 1.0),
        }
    }

    /// Marginal survival function `1 - F(z)`, computed without cancellation
    /// in the upper tail.
    pub fn marginal_survival(&self, z: f64) -> f64 {
        match *self {
            Self::Bpii { beta } => {
                if z <= 0.0 {
                    1.0
                } else {
                    (1.0 + z).powf(-(beta - 2.0))
                }
            }
            Self::StudentDep { nu, .. } => student_cdf(-z, nu),
            Self::Gaussian { .. } => 0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2),
            Self::SymLogistic { .. } => -(-(-z).exp()).exp_m1(),
            Self::ArchimaxLogistic { .. } | Self::ArchimaxMixed => 1.0 - z.clamp(0.0, 1.0),
        }
    }

    fn unsupported(&self, op: &'static str) -> Error {
        Error::Unsupported {
            op,
            model: self.to_string(),
        }
    }
}

impl fmt::Display for TailModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Bpii { beta } => write!(f, "bpii(beta={beta})"),
            Self::StudentDep { nu, theta } => write!(f, "student(nu={nu}, theta={theta})"),
            Self::Gaussian { tau } => write!(f, "gaussian(tau={tau})"),
            Self::SymLogistic { s } => write!(f, "sym-logistic(s={s})"),
            Self::ArchimaxLogistic { s } => write!(f, "archimax-logistic(s={s})"),
            Self::ArchimaxMixed => write!(f, "archimax-mixed"),
        }
    }
}

/// `(x^{1/s} + y^{1/s})^s`, factored through the larger argument.
pub(crate) fn logistic(x: f64, y: f64, s: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    if hi == 0.0 {
        return 0.0;
    }
    hi * (1.0 + (lo / hi).powf(1.0 / s)).powf(s)
}

/// `(x^{-p} + y^{-p})^{-1/p}`, which vanishes when either argument does.
fn negative_logistic_core(x: f64, y: f64, p: f64) -> f64 {
    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
    if lo == 0.0 {
        return 0.0;
    }
    lo * (1.0 + (lo / hi).powf(p)).powf(-1.0 / p)
}

fn mixed(x: f64, y: f64) -> f64 {
    let s = x + y;
    if s == 0.0 {
        0.0
    } else {
        (x * x + y * y + x * y) / s
    }
}

fn student_stdf(x: f64, y: f64, nu: f64, theta: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return x + y;
    }
    let scale = ((nu + 1.0) / (1.0 - theta * theta)).sqrt();
    let zy = ((y / x).powf(1.0 / nu) - theta) * scale;
    let zx = ((x / y).powf(1.0 / nu) - theta) * scale;
    y * student_cdf(zy, nu + 1.0) + x * student_cdf(zx, nu + 1.0)
}
