//! Runtime-selectable fitting methods behind one trait.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_baseline, fit_baseline_warm, BaselineKind, BaselineModel};
use crate::design::DesignGram;
use crate::error::{invalid, Error, Result};
use crate::evaluate::Predictor;
use crate::mcvar::{fit_mcvar_gram, McvarInit, McvarState};
use crate::model::{assemble_w, VarModel};
use crate::scvar::{fit_scvar_from, fit_scvar_gram, ScvarState};
use crate::structure::FitOptions;

/// Hyperparameters; each method reads only the axes it uses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Hyper {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

impl Hyper {
    fn lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| invalid("lambda is required"))
    }

    fn kappa(&self) -> Result<f64> {
        self.kappa.ok_or_else(|| invalid("kappa is required"))
    }
}

/// Which grid axes a method searches over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Axes {
    pub lambda: bool,
    pub kappa: bool,
    pub rank: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitState {
    Scvar(ScvarState),
    Mcvar(McvarState),
    Baseline(BaselineModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub method: String,
    pub hyper: Hyper,
    pub p: usize,
    pub names: Vec<String>,
    pub state: FitState,
}

impl FittedModel {
    /// Coefficients as a VAR, when the method has them.
    pub fn var_model(&self) -> Option<VarModel> {
        match &self.state {
            FitState::Scvar(s) => Some(self.assemble(&s.gamma, &s.v)),
            FitState::Mcvar(s) => Some(self.assemble(&s.gamma, &s.v)),
            FitState::Baseline(b) => b.as_var(self.names.clone()).and_then(Result::ok),
        }
    }

    fn assemble(&self, gamma: &DMatrix<f64>, v: &DMatrix<f64>) -> VarModel {
        let w = assemble_w(gamma, v, self.p).expect("state shapes are consistent");
        VarModel { w, p: self.p, names: self.names.clone() }
    }

    pub fn objective_trace(&self) -> &[f64] {
        match &self.state {
            FitState::Scvar(s) => &s.objective_trace,
            FitState::Mcvar(s) => &s.objective_trace,
            FitState::Baseline(_) => &[],
        }
    }

    pub fn feasibility_trace(&self) -> &[f64] {
        match &self.state {
            FitState::Scvar(s) => &s.feasibility_trace,
            FitState::Mcvar(s) => &s.feasibility_trace,
            FitState::Baseline(_) => &[],
        }
    }
}

impl Predictor for FittedModel {
    fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.state {
            FitState::Baseline(b) => b.predict(x),
            _ => self.var_model().expect("structured fits have W").predict(x),
        }
    }
}

/// Registry methods read lambda per observation, like lg/glg; the structured
/// solvers penalize the summed loss.
fn solver_lambda(gram: &DesignGram, lambda: f64) -> f64 {
    lambda * gram.n_rows as f64
}

pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;
    fn axes(&self) -> Axes;
    fn fit(&self, gram: &DesignGram, names: &[String], hyper: &Hyper, opts: &FitOptions) -> Result<FittedModel>;

    /// Fits a sequence of grid points sharing every axis but lambda, given in
    /// descending lambda. Methods may warm-start along the sequence in
    /// either direction; results come back in input order.
    fn fit_path(
        &self,
        gram: &DesignGram,
        names: &[String],
        hypers: &[Hyper],
        opts: &FitOptions,
    ) -> Result<Vec<FittedModel>> {
        hypers.iter().map(|h| self.fit(gram, names, h, opts)).collect()
    }
}

struct Scvar;

impl Method for Scvar {
    fn name(&self) -> &'static str {
        "scvar"
    }

    fn axes(&self) -> Axes {
        Axes { lambda: true, kappa: true, rank: false }
    }

    fn fit(&self, gram: &DesignGram, names: &[String], hyper: &Hyper, opts: &FitOptions) -> Result<FittedModel> {
        let state = fit_scvar_gram(gram, solver_lambda(gram, hyper.lambda()?), hyper.kappa()?, opts)?;
        Ok(FittedModel {
            method: self.name().into(),
            hyper: Hyper { rank: None, ..*hyper },
            p: gram.p,
            names: names.to_vec(),
            state: FitState::Scvar(state),
        })
    }

    fn fit_path(&self, gram: &DesignGram, names: &[String], hypers: &[Hyper], opts: &FitOptions) -> Result<Vec<FittedModel>> {
        // Ascending lambda: simplex entries that reach zero stay there, so
        // the path starts dense and lets the penalty prune.
        let mut out: Vec<FittedModel> = Vec::with_capacity(hypers.len());
        for h in hypers.iter().rev() {
            let (lambda, kappa) = (h.lambda()?, h.kappa()?);
            let prev = out.last().and_then(|m| match &m.state {
                FitState::Scvar(s) if s.kappa == kappa => Some(s.alpha_bar.clone()),
                _ => None,
            });
            let state = match prev {
                Some(alpha) => fit_scvar_from(gram, solver_lambda(gram, lambda), kappa, alpha, opts)?,
                None => fit_scvar_gram(gram, solver_lambda(gram, lambda), kappa, opts)?,
            };
            out.push(FittedModel {
                method: self.name().into(),
                hyper: Hyper { rank: None, ..*h },
                p: gram.p,
                names: names.to_vec(),
                state: FitState::Scvar(state),
            });
        }
        out.reverse();
        Ok(out)
    }
}

struct Mcvar;

impl Method for Mcvar {
    fn name(&self) -> &'static str {
        "mcvar"
    }

    fn axes(&self) -> Axes {
        Axes { lambda: true, kappa: true, rank: true }
    }

    fn fit(&self, gram: &DesignGram, names: &[String], hyper: &Hyper, opts: &FitOptions) -> Result<FittedModel> {
        let rank = hyper.rank.ok_or_else(|| invalid("rank is required"))?;
        let state = fit_mcvar_gram(gram, solver_lambda(gram, hyper.lambda()?), hyper.kappa()?, rank, opts, &McvarInit::Seeded)?;
        Ok(self.wrap(gram, names, hyper, state))
    }

    fn fit_path(&self, gram: &DesignGram, names: &[String], hypers: &[Hyper], opts: &FitOptions) -> Result<Vec<FittedModel>> {
        let mut out: Vec<FittedModel> = Vec::with_capacity(hypers.len());
        for h in hypers.iter().rev() {
            let rank = h.rank.ok_or_else(|| invalid("rank is required"))?;
            let (lambda, kappa) = (h.lambda()?, h.kappa()?);
            let init = out
                .last()
                .and_then(|m| match &m.state {
                    FitState::Mcvar(s) if s.kappa == kappa && s.rank == rank => {
                        Some(McvarInit::Warm { d: s.d.clone(), g: s.g.clone() })
                    }
                    _ => None,
                })
                .unwrap_or(McvarInit::Seeded);
            let state = fit_mcvar_gram(gram, solver_lambda(gram, lambda), kappa, rank, opts, &init)?;
            out.push(self.wrap(gram, names, h, state));
        }
        out.reverse();
        Ok(out)
    }
}

impl Mcvar {
    fn wrap(&self, gram: &DesignGram, names: &[String], hyper: &Hyper, state: McvarState) -> FittedModel {
        FittedModel {
            method: self.name().into(),
            hyper: *hyper,
            p: gram.p,
            names: names.to_vec(),
            state: FitState::Mcvar(state),
        }
    }
}

struct Baseline(BaselineKind);

impl Baseline {
    fn wrap(&self, gram: &DesignGram, names: &[String], model: BaselineModel) -> FittedModel {
        FittedModel {
            method: self.name().into(),
            hyper: Hyper { lambda: model.lambda, kappa: None, rank: None },
            p: gram.p,
            names: names.to_vec(),
            state: FitState::Baseline(model),
        }
    }
}

impl Method for Baseline {
    fn name(&self) -> &'static str {
        self.0.as_str()
    }

    fn axes(&self) -> Axes {
        Axes { lambda: self.0.needs_lambda(), kappa: false, rank: false }
    }

    fn fit(&self, gram: &DesignGram, names: &[String], hyper: &Hyper, _opts: &FitOptions) -> Result<FittedModel> {
        let lambda = if self.0.needs_lambda() { Some(hyper.lambda()?) } else { None };
        let model = fit_baseline(self.0, gram, lambda)?;
        Ok(self.wrap(gram, names, model))
    }

    fn fit_path(&self, gram: &DesignGram, names: &[String], hypers: &[Hyper], _opts: &FitOptions) -> Result<Vec<FittedModel>> {
        let mut out: Vec<FittedModel> = Vec::with_capacity(hypers.len());
        for h in hypers {
            let lambda = if self.0.needs_lambda() { Some(h.lambda()?) } else { None };
            let warm = out.last().and_then(|m| match &m.state {
                FitState::Baseline(b) => b.w.clone(),
                _ => None,
            });
            let model = fit_baseline_warm(self.0, gram, lambda, warm.as_ref())?;
            out.push(self.wrap(gram, names, model));
        }
        Ok(out)
    }
}

pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Box<dyn Method>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self { methods: BTreeMap::new() }
    }

    /// scvar, mcvar, ar, lg, glg, mean and rw.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Scvar));
        r.register(Box::new(Mcvar));
        for kind in BaselineKind::ALL {
            r.register(Box::new(Baseline(kind)));
        }
        r
    }

    pub fn register(&mut self, method: Box<dyn Method>) {
        self.methods.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Method> {
        self.methods
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
