//! Evaluation of one scenario into a report.

use irrevkit::comb::{self, LossKind, Recovery};
use irrevkit::irrev;
use irrevkit::oracles::{self, OutcomeFunction};
use irrevkit::otoc::{self, CpNormalization};
use irrevkit::way::{self, WayReport};
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::*;
use crate::CliError;

pub const TOL_Q: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// value ≤ tolerance.
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), passed: value <= tolerance, value, tolerance }
    }

    fn slack(r: &WayReport) -> Self {
        Check { name: format!("{} bound slack", serde_json::to_value(r.bound).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()), passed: r.passed, value: r.slack, tolerance: way::TOL_SLACK }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub kind: Kind,
    pub seed: u64,
    pub input: Value,
    pub result: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Report {
    /// Numeric columns for sweep rows.
    pub fn summary(&self) -> Vec<(&'static str, String)> {
        let num = |p: &str| self.result.pointer(p).map_or(String::new(), cell);
        match self.kind {
            Kind::Delta => vec![("delta", num("/delta"))],
            Kind::Epsilon | Kind::Eta => vec![("value", num("/iep/value")), ("fit_residual", num("/iep/fit_residual"))],
            Kind::Blw => vec![("value", num("/iep/value")), ("expected", num("/expected")), ("gap", num("/gap"))],
            Kind::Lt => vec![("value", num("/value"))],
            Kind::WayError | Kind::WayDisturbance | Kind::WayOtoc => {
                let b = if self.kind == Kind::WayOtoc { "" } else { "/bound" };
                vec![
                    ("lhs", num(&format!("{b}/lhs"))),
                    ("rhs", num(&format!("{b}/rhs"))),
                    ("slack", num(&format!("{b}/slack"))),
                    ("passed", num(&format!("{b}/passed"))),
                ]
            }
            Kind::Otoc => vec![("c_direct", num("/direct")), ("c_iep", num("/iep/value")), ("gap", num("/gap"))],
            Kind::OtocCp => vec![
                ("c_direct", num("/direct_normalized")),
                ("c_iep", num("/iep/value")),
                ("gap", num("/gap")),
                ("scale", num("/scale")),
            ],
        }
    }
}

/// CSV cell: numbers in Rust's shortest round-trip form, '.' decimal.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:?}"),
            _ => n.to_string(),
        },
        Value::Bool(b) => b.to_string(),
        Value::Null => "NaN".into(),
        other => other.to_string(),
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize")
}

pub fn run_scenario(s: &Scenario) -> Result<Report, CliError> {
    let (result, checks) = match (&s.kind, &s.payload) {
        (Kind::Delta, Payload::Delta(p)) => (delta(p)?, Vec::new()),
        (Kind::Epsilon, Payload::Iep(p)) => (iep(p, LossKind::Error)?, Vec::new()),
        (Kind::Eta, Payload::Iep(p)) => (iep(p, LossKind::Disturbance)?, Vec::new()),
        (Kind::Blw, Payload::Blw(p)) => blw(p)?,
        (Kind::Lt, Payload::Lt(p)) => (lt(p)?, Vec::new()),
        (Kind::WayError, Payload::Way(p)) => way_error(p)?,
        (Kind::WayDisturbance, Payload::Way(p)) => {
            let r = way::way_bound_disturbance(&p.state, &p.observable, &p.instrument, &p.implementation, &p.config)?;
            (json!({ "bound": to_value(&r) }), vec![Check::slack(&r)])
        }
        (Kind::Otoc, Payload::Otoc(p)) => otoc_run(p)?,
        (Kind::OtocCp, Payload::OtocCp(p)) => otoc_cp(p)?,
        (Kind::WayOtoc, Payload::WayOtoc(p)) => {
            let r = otoc::way_bound_otoc(&p.scenario, &p.implementation)?;
            (to_value(&r), vec![Check::slack(&r)])
        }
        (k, _) => return Err(CliError::schema(format!("payload does not match kind {k:?}"))),
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(Report { schema: SCHEMA, kind: s.kind, seed: s.seed, input: s.to_value(), result, checks, passed })
}

fn delta(p: &DeltaPayload) -> Result<Value, CliError> {
    let rep = match &p.recovery {
        DeltaRecovery::Optimize => irrev::delta_min(&p.process, &p.ensemble, &p.optimizer)?,
        DeltaRecovery::Petz { reference } => {
            let sigma = reference.clone().unwrap_or_else(|| p.ensemble.average());
            let r = irrev::petz_recovery(&p.process, &sigma)?;
            irrev::delta_with_recovery(&p.process, &r, &p.ensemble)?
        }
        DeltaRecovery::Explicit { channel } => irrev::delta_with_recovery(&p.process, channel, &p.ensemble)?,
    };
    Ok(to_value(&rep))
}

/// Closed-form value of a canonical recovery, when one exists.
fn closed_form(p: &IepPayload, kind: LossKind) -> Result<Option<f64>, CliError> {
    let Recovery::Canonical { observable } = &p.recovery else {
        return Ok(None);
    };
    Ok(Some(match kind {
        LossKind::Error => {
            let m = observable.matrix();
            let f = OutcomeFunction((0..m.nrows()).map(|i| m[(i, i)].re).collect());
            oracles::ozawa_error_sq(&p.state, &p.observable, &p.instrument, &f)?
        }
        LossKind::Disturbance => oracles::lt_disturbance_sq_for(&p.state, &p.observable, &p.instrument, observable)?,
    }))
}

fn iep(p: &IepPayload, kind: LossKind) -> Result<Value, CliError> {
    let r = match kind {
        LossKind::Error => comb::extract_epsilon(&p.state, &p.observable, &p.instrument, &p.recovery, &p.extraction)?,
        LossKind::Disturbance => comb::extract_eta(&p.state, &p.observable, &p.instrument, &p.recovery, &p.extraction)?,
    };
    let lt_min = match kind {
        LossKind::Error => oracles::lt_error(&p.state, &p.observable, &p.instrument)?.error_sq,
        LossKind::Disturbance => oracles::lt_disturbance(&p.state, &p.observable, &p.instrument)?.disturbance_sq,
    };
    Ok(json!({
        "iep": to_value(&r),
        "closed_form": closed_form(p, kind)?,
        "lt_min": lt_min,
    }))
}

fn blw(p: &BlwPayload) -> Result<(Value, Vec<Check>), CliError> {
    let (setup, kind) = match p.target {
        Target::Error => (oracles::blw_error_setup(&p.sharp, &p.noisy)?, LossKind::Error),
        Target::Disturbance => (oracles::blw_disturbance_setup(&p.sharp, &p.noisy)?, LossKind::Disturbance),
    };
    let r = comb::extract_two_copy(&setup.state, &setup.observable, &setup.instrument, kind, &Recovery::Canonical { observable: setup.recovery }, &p.extraction)?;
    let gap = (r.value - setup.expected).abs();
    let checks = vec![Check::at_most("two-copy value matches 2|a·(a−a′)|", gap, p.tolerance)];
    Ok((json!({ "iep": to_value(&r), "expected": setup.expected, "gap": gap }), checks))
}

fn lt(p: &LtPayload) -> Result<Value, CliError> {
    Ok(match p.target {
        Target::Error => {
            let r = oracles::lt_error(&p.state, &p.observable, &p.instrument)?;
            json!({ "value": r.error_sq, "error": to_value(&r) })
        }
        Target::Disturbance => {
            let r = oracles::lt_disturbance(&p.state, &p.observable, &p.instrument)?;
            json!({ "value": r.disturbance_sq, "disturbance": to_value(&r) })
        }
    })
}

fn way_error(p: &WayPayload) -> Result<(Value, Vec<Check>), CliError> {
    let r = way::way_bound_error(&p.state, &p.observable, &p.instrument, &p.implementation, &p.config)?;
    let mut checks = vec![Check::slack(&r)];
    let mut out = json!({ "bound": to_value(&r) });
    if p.yanase {
        let y = way::way_bound_error_yanase(&p.state, &p.observable, &p.instrument, &p.implementation, &p.config)?;
        checks.push(Check::slack(&y));
        out["yanase"] = to_value(&y);
    }
    Ok((out, checks))
}

fn otoc_run(p: &OtocPayload) -> Result<(Value, Vec<Check>), CliError> {
    let direct = otoc::otoc_direct(&p.scenario)?;
    let r = otoc::otoc_iep(&p.scenario, &p.extraction)?;
    let gap = (r.value - direct).abs();
    let checks = vec![Check::at_most("protocol matches direct commutator", gap, p.tolerance)];
    Ok((json!({ "tau": p.scenario.tau(), "direct": direct, "iep": to_value(&r), "gap": gap }), checks))
}

fn otoc_cp(p: &OtocCpPayload) -> Result<(Value, Vec<Check>), CliError> {
    let r = otoc::otoc_iep_cp(&p.scenario, &p.extraction, p.normalization)?;
    let gap = (r.iep.value - r.direct_normalized).abs();
    let mut checks = Vec::new();
    if p.normalization == CpNormalization::SecondMoment {
        checks.push(Check::at_most("protocol matches direct commutator", gap, p.tolerance));
        let q = r.branch_probabilities.iter().map(|q| (q - 1.0).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("branch weight is 1", q, TOL_Q));
    }
    let mut out = to_value(&r);
    out["gap"] = gap.into();
    out["tau"] = p.scenario.tau().into();
    Ok((out, checks))
}
