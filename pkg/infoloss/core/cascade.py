"""
Cascades of piecewise monotone stages.

A cascade X0 -> X1 -> ... -> XN loses H(X0|XN) = sum of H(X_{i-1}|X_i). Each
stage loss is computed on the push-forward density of the stages before it.
This module also builds the composite h∘g branch by branch so the sum can be
checked against a direct computation.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from infoloss.core.exceptions import CompositionError
from infoloss.core.loss_engine import LossReport, QuadratureConfig, info_loss, restrict_to_support
from infoloss.core.metrics import timed
from infoloss.densities.base import Density, pushforward
from infoloss.functions.base import Branch, Interval, Orientation, PwmFunction, validate

logger = logging.getLogger(__name__)


@dataclass
class CascadeReport:
    """Per-stage losses; total_bits is their plain sum."""
    stage_losses_bits: List[float]
    stage_errors_bits: List[float]
    total_bits: float
    stage_names: List[str] = field(default_factory=list)
    converged: bool = True

    @property
    def total_error_bits(self) -> float:
        return math.fsum(self.stage_errors_bits)

    def to_dict(self) -> Dict[str, object]:
        return {
            "stage_names": list(self.stage_names),
            "stage_losses_bits": list(self.stage_losses_bits),
            "stage_errors_bits": list(self.stage_errors_bits),
            "total_bits": self.total_bits,
            "total_error_bits": self.total_error_bits,
            "converged": self.converged,
        }


@dataclass
class AdditivityReport:
    """Direct loss of h∘g against the sum of the two stage losses."""
    direct_bits: float
    direct_error_bits: float
    first_stage_bits: float
    second_stage_bits: float
    stage_errors_bits: List[float]
    gap_bits: float
    tolerance_bits: float
    composite_branches: int

    @property
    def sum_bits(self) -> float:
        return self.first_stage_bits + self.second_stage_bits

    @property
    def passed(self) -> bool:
        return self.gap_bits <= self.tolerance_bits

    def to_dict(self) -> Dict[str, object]:
        return {
            "direct_bits": self.direct_bits,
            "direct_error_bits": self.direct_error_bits,
            "first_stage_bits": self.first_stage_bits,
            "second_stage_bits": self.second_stage_bits,
            "sum_bits": self.sum_bits,
            "stage_errors_bits": list(self.stage_errors_bits),
            "gap_bits": self.gap_bits,
            "tolerance_bits": self.tolerance_bits,
            "composite_branches": self.composite_branches,
            "passed": self.passed,
        }


def _composite_branch(outer: Branch, inner: Branch, domain: Interval, label: str) -> Branch:
    def forward(x):
        return outer.forward(inner.forward(x))

    def derivative(x):
        return outer.derivative(inner.forward(x)) * inner.derivative(x)

    def inverse(z):
        return inner.invert(outer.invert(z))

    return Branch(
        domain=domain,
        orientation=Orientation.from_sign(outer.orientation.sign * inner.orientation.sign),
        forward=forward,
        derivative=derivative,
        inverse=inverse,
        label=label,
    )


def compose(g: PwmFunction, h: PwmFunction, grid: int = 1024) -> PwmFunction:
    """
    h∘g as a PwmFunction.

    Every branch g_i is cut at the g_i-preimages of the h-branch domain ends
    that fall inside its image; each piece is one composite branch. Pieces of
    decreasing branches are emitted in reverse so domains stay ordered.

    Raises:
        CompositionError: If an image of g leaves the domain of h or the
            composite fails validation
    """
    branches = []
    for i, inner in enumerate(g.branches):
        if not h.covers(inner.image):
            raise CompositionError(
                f"Image {inner.image} of branch {i} is not covered by the domain {h.domain}"
            )
        pieces = []
        for j, outer in enumerate(h.branches):
            part = inner.image.intersect(outer.domain)
            if part is None:
                continue
            a, b = inner.x_at(part.lo), inner.x_at(part.hi)
            if inner.increasing:
                lo_closed, hi_closed = part.lo_closed, part.hi_closed
            else:
                a, b = b, a
                lo_closed, hi_closed = part.hi_closed, part.lo_closed
            if not a < b:
                continue
            domain = Interval(a, b, lo_closed, hi_closed)
            pieces.append(_composite_branch(outer, inner, domain, f"{outer.label or j}∘{inner.label or i}"))
        if not inner.increasing:
            pieces.reverse()
        branches.extend(pieces)

    if not branches:
        raise CompositionError(f"'{h.name}' after '{g.name}' has no branch")
    composite = PwmFunction(tuple(branches), name=f"{h.name}∘{g.name}")

    report = validate(composite, grid)
    if not report.passed:
        raise CompositionError(
            f"'{composite.name}' is not piecewise strictly monotone: {'; '.join(report.messages)}"
        )
    logger.debug(f"Composed '{composite.name}' into {composite.L} branches")
    return composite


@timed("cascade_loss")
def cascade_loss(
    stages: Sequence[PwmFunction],
    d: Density,
    cfg: Optional[QuadratureConfig] = None,
) -> CascadeReport:
    """
    Loss of every stage on the density that reaches it, and their sum.

    Raises:
        SupportMismatchError: If a stage does not cover the output of the previous one
        FunctionValidationError: If a stage fails validation
    """
    if not stages:
        raise CompositionError("A cascade needs at least one stage")
    cfg = cfg or QuadratureConfig()
    current: Density = d
    reports: List[LossReport] = []
    for index, stage in enumerate(stages):
        logger.info(f"Cascade stage {index + 1}/{len(stages)}: '{stage.name}'")
        reports.append(info_loss(stage, current, cfg))
        if index + 1 < len(stages):
            current = pushforward(stage, current, mass_eps=cfg.mass_eps)

    losses = [r.loss_bits for r in reports]
    report = CascadeReport(
        stage_losses_bits=losses,
        stage_errors_bits=[r.error_estimate_bits for r in reports],
        total_bits=sum(losses),
        stage_names=[s.name for s in stages],
        converged=all(r.converged for r in reports),
    )
    logger.info(f"Cascade total loss {report.total_bits:.6f} bits over {len(stages)} stages")
    return report


@timed("verify_additivity")
def verify_additivity(
    g: PwmFunction,
    h: PwmFunction,
    d: Density,
    cfg: Optional[QuadratureConfig] = None,
) -> AdditivityReport:
    """
    Compare the loss of h∘g with loss(g) + loss(h on the output of g).

    The tolerance is the sum of the three error estimates, but never less
    than twice the absolute quadrature target.

    Raises:
        CompositionError: If h∘g is not piecewise strictly monotone
    """
    cfg = cfg or QuadratureConfig()
    g_support = restrict_to_support(g, d)
    composite = compose(g_support, h, cfg.validation_grid)
    intermediate = pushforward(g, d, mass_eps=cfg.mass_eps)

    jobs = [
        lambda: info_loss(composite, d, cfg),
        lambda: info_loss(g, d, cfg),
        lambda: info_loss(h, intermediate, cfg),
    ]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=min(3, cfg.workers)) as pool:
            direct, first, second = [f.result() for f in [pool.submit(job) for job in jobs]]
    else:
        direct, first, second = [job() for job in jobs]

    errors = [first.error_estimate_bits, second.error_estimate_bits]
    combined = direct.error_estimate_bits + math.fsum(errors)
    report = AdditivityReport(
        direct_bits=direct.loss_bits,
        direct_error_bits=direct.error_estimate_bits,
        first_stage_bits=first.loss_bits,
        second_stage_bits=second.loss_bits,
        stage_errors_bits=errors,
        gap_bits=abs(direct.loss_bits - (first.loss_bits + second.loss_bits)),
        tolerance_bits=max(combined, 2.0 * cfg.abs_tol),
        composite_branches=composite.L,
    )
    if report.passed:
        logger.info(f"Additivity holds for '{composite.name}': gap {report.gap_bits:.3g} bits")
    else:
        logger.warning(
            f"Additivity gap {report.gap_bits:.3g} bits exceeds {report.tolerance_bits:.3g} "
            f"for '{composite.name}'"
        )
    return report
