//! Full reconstruction: initial window, dual minimization, tail test and
//! window extension until the tail test passes.

use serde::Serialize;

use crate::dual::{distribution_from, minimize_from, LagrangeMultipliers, SolverConfig, SolverReport};
use crate::error::{Error, Result};
use crate::moments::{moments_of, FiniteDistribution, MomentSequence, SupportWindow};
use crate::support::{
    block_increment, extend_block, extend_one_with, initial_window, tail_ok, Strategy, SupportConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionResult {
    pub distribution: FiniteDistribution,
    pub multipliers: LagrangeMultipliers,
    pub window: SupportWindow,
    /// Report of the last inner minimization.
    pub report: SolverReport,
    pub outer_iterations: usize,
    pub achieved_moments: MomentSequence,
    /// Window the outer loop started from.
    pub initial_window: SupportWindow,
    /// Whether the final distribution passes the tail test.
    pub tail_ok: bool,
}

/// Grows the window by one outer-iteration step of the configured strategy.
struct Extender {
    strategy: Strategy,
    literal_even_step: bool,
    increment: u64,
    steps: usize,
}

impl Extender {
    /// Next window; an alternating step that cannot move (left edge at zero)
    /// is skipped so every outer iteration adds a state.
    fn next(&mut self, window: SupportWindow) -> SupportWindow {
        loop {
            let next = match self.strategy {
                Strategy::Incremental => extend_one_with(window, self.steps, self.literal_even_step),
                Strategy::Chebyshev => extend_block(window, self.increment),
            };
            self.steps += 1;
            if next != window {
                return next;
            }
        }
    }
}

/// One inner solve, warm-started from `init` and retried from zero when the
/// warm start does not converge.
fn solve_window(
    mu: &MomentSequence,
    window: SupportWindow,
    cfg: &SolverConfig,
    init: &[f64],
) -> Result<(LagrangeMultipliers, SolverReport)> {
    let warm = minimize_from(mu, window, cfg, init);
    let cold_start = init.iter().all(|&l| l == 0.0);
    match warm {
        Ok((_, ref report)) if report.converged || cold_start => warm,
        Ok((lm, report)) => match minimize_from(mu, window, cfg, &vec![0.0; init.len()]) {
            Ok(cold) if cold.1.converged => Ok(cold),
            Ok(cold) if cold.1.dual_trace.last() < report.dual_trace.last() => Ok(cold),
            _ => Ok((lm, report)),
        },
        Err(Error::Diverged { .. }) if !cold_start => {
            minimize_from(mu, window, cfg, &vec![0.0; init.len()])
        }
        Err(e) => Err(e),
    }
}

/// Reconstructs the maximum-entropy distribution for `mu`.
///
/// Starting from [`initial_window`], each outer iteration minimizes the dual
/// on the current window (warm-started from the previous multipliers), builds
/// `q̃`, and stops once [`tail_ok`] holds; otherwise the window grows by the
/// configured strategy. A window on which the inner solver diverges or does
/// not converge is grown and the next solve starts from zero. Exceeding
/// `max_window` states yields [`Error::WindowCapReached`] carrying the last
/// result.
pub fn reconstruct(mu: &MomentSequence, scfg: &SupportConfig, dcfg: &SolverConfig) -> Result<ReconstructionResult> {
    scfg.validate()?;
    dcfg.validate()?;
    let m = mu.order();
    let start = initial_window(mu, scfg);
    let mut extender = Extender {
        strategy: scfg.strategy,
        literal_even_step: scfg.literal_even_step,
        increment: block_increment(mu, start, scfg),
        steps: 0,
    };

    let mut window = start;
    let mut lambda = vec![0.0; m];
    let mut outer = 0;
    loop {
        outer += 1;
        let solved = solve_window(mu, window, dcfg, &lambda);
        let (multipliers, report) = match solved {
            Ok(solved) => solved,
            // No descent step left on this window: the constraints cannot be
            // met on it, so grow it and start over from zero.
            Err(e @ Error::Diverged { .. }) => {
                if window.len() >= scfg.max_window {
                    return Err(e);
                }
                lambda = vec![0.0; m];
                window = extender.next(window);
                continue;
            }
            Err(e) => return Err(e),
        };
        let distribution = distribution_from(&multipliers, window)?;
        let passed = tail_ok(&distribution, scfg);
        let result = ReconstructionResult {
            achieved_moments: moments_of(&distribution, m),
            distribution,
            window,
            report,
            outer_iterations: outer,
            initial_window: start,
            tail_ok: passed,
            multipliers,
        };
        if passed {
            return Ok(result);
        }
        if window.len() >= scfg.max_window {
            return Err(Error::WindowCapReached(Box::new(result)));
        }
        lambda = if result.report.converged {
            result.multipliers.lambda().to_vec()
        } else {
            vec![0.0; m]
        };
        window = extender.next(window);
    }
}
