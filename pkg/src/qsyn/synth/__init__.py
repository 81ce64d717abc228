"""Coherent weighted H2 synthesis over the Youla parameter."""

from .constraint import (
    ConstraintData,
    NoGoVerdict,
    compute_constraint_data,
    constraint_residual,
    constraint_values,
    newton_correction,
    project_tangent,
    project_tangent_batch,
    unstabilizability_check,
)
from .cost import (
    AffineClosedLoop,
    closed_loop_affine,
    closed_loop_costs,
    gradient,
    h2_cost,
    h2_cost_expansion,
    hinf_cost,
    inner,
)
from .pgd import (
    InitResult,
    PgdOptions,
    PgdResult,
    SynthesisProblem,
    SynthesisState,
    controller_from_q_inf,
    init_q_static,
    passband_mask,
    pgd_run,
)
from .realization import (
    Certificate,
    PrStateSpaceReport,
    RationalFit,
    certify_admissible,
    fit_rational_q,
    youla_ss_pr_check,
)


def build_problem(plant, factors=None, W_in=None, W_out=None, grid=None, rng=None) -> SynthesisProblem:
    """Factor ``P22``, sample the constraint and the affine closed loop."""
    from ..lti import FrequencyGrid
    from ..youla import coprime_factorize

    grid = grid or FrequencyGrid.default()
    factors = factors or coprime_factorize(plant.P22, rng=rng)
    acl = closed_loop_affine(plant, factors, W_in, W_out, grid)
    cd = compute_constraint_data(factors, grid)
    return SynthesisProblem(plant, factors, acl, cd)


__all__ = [name for name in dir() if not name.startswith("_")]
