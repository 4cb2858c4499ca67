//! Fault injection: every closed-form coefficient, scaled by `1 + rel`, must
//! make at least one oracle or ledger check fail.

use serde::Serialize;

use crate::asymptotics::Coefficient;
use crate::kernels::TransitionTable;
use crate::model::model_for;
use crate::rng::RngSpec;
use crate::verify::ledger::check_ledger;
use crate::verify::oracles::check_oracles_with;
use crate::verify::{Status, Tolerance, VerifyError};
use crate::walker::{SimulationMode, Walker};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultOutcome {
    pub coefficient: String,
    pub detected: bool,
    /// First failing check, if any.
    pub caught_by: Option<String>,
}

/// Perturbs each coefficient of the table's summary in turn. The ledger side
/// uses one path of `steps` steps.
pub fn fault_sensitivity(
    table: &TransitionTable,
    rel: f64,
    steps: u64,
    seed: u64,
    tol: &Tolerance,
) -> Result<Vec<FaultOutcome>, VerifyError> {
    let model = model_for(table.kind);
    let base = model.summary(table)?;
    let walker = Walker::new(table).map_err(crate::walker::WalkError::from)?;
    let record = walker.simulate(steps, RngSpec::new(seed, 0), SimulationMode::Summary)?;
    let outcome = |coef: &Coefficient| {
        let s = base.perturbed(coef, rel);
        let caught = check_oracles_with(table, &s, model, tol)
            .into_iter()
            .chain(check_ledger(&record, &s, model, tol))
            .find(|r| r.status == Status::Fail);
        FaultOutcome {
            coefficient: coef.to_string(),
            detected: caught.is_some(),
            caught_by: caught.map(|r| r.check),
        }
    };
    Ok(base.coefficients().iter().map(outcome).collect())
}
