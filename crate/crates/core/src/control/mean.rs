use crate::discretization::StateField;
use crate::stochastic::{AdaptedProcess, Solver};
use crate::{Error, Result};

/// `max_k ‖E[y(t_k)]‖` for `u = 0`, `y0 = 0` and the given diffusion control `v`.
///
/// Requires `B3 = 0`; `B1` is deterministic by construction of the model.
pub fn mean_invariance_probe(solver: &Solver, v: &AdaptedProcess) -> Result<f64> {
    if solver.has_b3() {
        return Err(Error::precondition("B3 = 0", "the internal control must not enter the drift"));
    }
    let y0 = StateField::zeros(solver.grid.state_dim(), solver.grid.num_cells());
    let y = solver.solve_forward(&y0, &solver.zero_u(), v)?;
    let wc = solver.grid.cell_weight();
    Ok((0..=solver.tree.depth)
        .map(|k| (y.level_mean(k).iter().map(|x| x * x).sum::<f64>() * wc).sqrt())
        .fold(0.0, f64::max))
}
