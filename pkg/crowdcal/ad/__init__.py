"""Forward-mode automatic differentiation with traced branches."""
from crowdcal.ad.dual import (
    DualReal,
    seed_parameters,
    constant_parameters,
    dual_arith,
    divide,
    exp,
    log,
    sqrt,
    sin,
    cos,
    absolute,
    where,
    maximum,
    minimum,
    clip,
    norm,
    dot,
    stack,
    concatenate,
    scatter_add,
    zeros,
)
from crowdcal.ad.tracing import (
    TraceMode,
    BranchSite,
    PathKey,
    BranchObservation,
    BranchRecord,
    BranchRegistry,
    TraceContext,
    traced_less_than,
)
