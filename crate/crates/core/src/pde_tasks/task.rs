use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::autodiff::Directions;
use crate::error::{usage, Error, Result};

/// Viscosity of every Burgers task.
pub const BURGERS_VISCOSITY: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Equation {
    Burgers1D,
    Heat2D,
}

impl Equation {
    pub fn input_dim(self) -> usize {
        match self {
            Equation::Burgers1D => 2,
            Equation::Heat2D => 3,
        }
    }

    /// Input derivatives the residual needs.
    pub fn directions(self) -> Directions {
        match self {
            Equation::Burgers1D => Directions::BURGERS,
            Equation::Heat2D => Directions::HEAT2D,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Equation::Burgers1D => "burgers1d",
            Equation::Heat2D => "heat2d",
        }
    }
}

impl FromStr for Equation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "burgers" | "burgers1d" => Ok(Equation::Burgers1D),
            "heat" | "heat2d" => Ok(Equation::Heat2D),
            _ => usage(format!("unknown equation `{s}`")),
        }
    }
}

/// Initial-condition family of a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IcFamily {
    /// `-sin(pi x) + theta cos(pi x)`
    BurgersSinCos,
    /// `a1 sin(pi x) + a2 cos(pi x)`
    HeatAmplitude,
    /// `sin(b1 pi x) cos(b2 pi x)`, constant in `y`.
    HeatFrequency,
    /// `-sin(pi x)`
    BurgersSinOnly,
    /// `sin(b1 pi x) cos(b2 pi y)`: opt-in variant of [`IcFamily::HeatFrequency`].
    HeatFrequencyCosY,
}

impl IcFamily {
    pub fn arity(self) -> usize {
        match self {
            IcFamily::BurgersSinCos => 1,
            IcFamily::HeatAmplitude | IcFamily::HeatFrequency | IcFamily::HeatFrequencyCosY => 2,
            IcFamily::BurgersSinOnly => 0,
        }
    }

    pub fn equation(self) -> Equation {
        match self {
            IcFamily::BurgersSinCos | IcFamily::BurgersSinOnly => Equation::Burgers1D,
            _ => Equation::Heat2D,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IcFamily::BurgersSinCos => "sincos",
            IcFamily::HeatAmplitude => "amplitude",
            IcFamily::HeatFrequency => "frequency",
            IcFamily::BurgersSinOnly => "sin",
            IcFamily::HeatFrequencyCosY => "frequency-y",
        }
    }
}

impl FromStr for IcFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sincos" => Ok(IcFamily::BurgersSinCos),
            "amplitude" => Ok(IcFamily::HeatAmplitude),
            "frequency" => Ok(IcFamily::HeatFrequency),
            "sin" => Ok(IcFamily::BurgersSinOnly),
            "frequency-y" => Ok(IcFamily::HeatFrequencyCosY),
            _ => usage(format!("unknown initial-condition family `{s}`")),
        }
    }
}

/// One parametric PDE instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub equation: Equation,
    pub ic_family: IcFamily,
    pub params: Vec<f64>,
    /// Burgers viscosity; the heat equation has unit diffusivity.
    pub viscosity: f64,
    /// Weight `p` of the equation noise.
    pub noise_weight: f64,
    pub rng_seed: u64,
}

impl TaskSpec {
    pub fn new(
        equation: Equation,
        ic_family: IcFamily,
        params: Vec<f64>,
        noise_weight: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        if ic_family.equation() != equation {
            return usage(format!(
                "family {} does not belong to {}",
                ic_family.name(),
                equation.name()
            ));
        }
        if params.len() != ic_family.arity() {
            return usage(format!(
                "family {} takes {} parameter(s), got {}",
                ic_family.name(),
                ic_family.arity(),
                params.len()
            ));
        }
        if !(noise_weight >= 0.0 && noise_weight.is_finite()) {
            return usage("noise weight must be finite and non-negative");
        }
        if params.iter().any(|v| !v.is_finite()) {
            return usage("task parameters must be finite");
        }
        let viscosity = match equation {
            Equation::Burgers1D => BURGERS_VISCOSITY,
            Equation::Heat2D => 1.0,
        };
        Ok(TaskSpec {
            equation,
            ic_family,
            params,
            viscosity,
            noise_weight,
            rng_seed,
        })
    }

    /// Burgers task with `theta` on the sin/cos family.
    pub fn burgers(theta: f64, rng_seed: u64) -> Self {
        TaskSpec::new(Equation::Burgers1D, IcFamily::BurgersSinCos, vec![theta], 0.0, rng_seed)
            .expect("valid burgers task")
    }

    pub fn with_noise(mut self, p: f64) -> Self {
        self.noise_weight = p;
        self
    }

    /// Single-line record: `equation=.. family=.. params=a;b nu=.. p=.. seed=..`.
    pub fn record(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params.iter().map(|v| format!("{v:?}")).collect();
        write!(
            f,
            "equation={} family={} params={} nu={:?} p={:?} seed={}",
            self.equation.name(),
            self.ic_family.name(),
            params.join(";"),
            self.viscosity,
            self.noise_weight,
            self.rng_seed
        )
    }
}

impl FromStr for TaskSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut equation = None;
        let mut family = None;
        let mut params = Vec::new();
        let mut nu = None;
        let mut p = 0.0;
        let mut seed = 0;
        let num = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Format(format!("bad number `{v}` in task record")))
        };
        for field in s.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad task record field `{field}`")))?;
            match k {
                "equation" => equation = Some(v.parse::<Equation>()?),
                "family" => family = Some(v.parse::<IcFamily>()?),
                "params" => params = v.split(';').filter(|s| !s.is_empty()).map(num).collect::<Result<_>>()?,
                "nu" => nu = Some(num(v)?),
                "p" => p = num(v)?,
                "seed" => seed = v.parse().map_err(|_| Error::Format(format!("bad seed `{v}`")))?,
                _ => return Err(Error::Format(format!("unknown task record key `{k}`"))),
            }
        }
        let equation = equation.ok_or_else(|| Error::Format("task record lacks equation".into()))?;
        let family = family.ok_or_else(|| Error::Format("task record lacks family".into()))?;
        let mut task = TaskSpec::new(equation, family, params, p, seed)?;
        if let Some(nu) = nu {
            task.viscosity = nu;
        }
        Ok(task)
    }
}

/// Draw a task of `family` with parameters i.i.d. `U(0, 1)`.
pub fn sample_task<R: Rng + ?Sized>(family: IcFamily, rng: &mut R) -> TaskSpec {
    let params = (0..family.arity()).map(|_| rng.gen::<f64>()).collect();
    let seed = rng.gen::<u64>();
    TaskSpec::new(family.equation(), family, params, 0.0, seed).expect("sampled task is valid")
}
