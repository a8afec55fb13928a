"""Group-theoretic framework for measurement-based computation on symmetric chains."""

from .blocklocal import BlockLocalProtocol, block_local_measure, dense_recursion
from .bundle import BundleError, RepresentationBundle, load_bundle, spin1_bundle, spin1_element, spin1_name
from .channels import LogicalChannel, cptp_apply, loglog_slope, spaced_sites, unitarity_scaling
from .group import GroupElement, elements, identity, subgroups
from .logical import (
    Gate,
    LogicalOperator,
    LogicalSubspace,
    MkMatrix,
    evolved_expectations,
    gate_product,
    lk_rk_beta,
    logical_subspace,
    mk_matrix,
    tbar,
)
from .verify import VerifyReport, counterexample_bundle, verify_bundle

__all__ = [
    "BlockLocalProtocol",
    "BundleError",
    "Gate",
    "GroupElement",
    "LogicalChannel",
    "LogicalOperator",
    "LogicalSubspace",
    "MkMatrix",
    "RepresentationBundle",
    "VerifyReport",
    "block_local_measure",
    "counterexample_bundle",
    "cptp_apply",
    "dense_recursion",
    "elements",
    "evolved_expectations",
    "gate_product",
    "identity",
    "lk_rk_beta",
    "load_bundle",
    "logical_subspace",
    "loglog_slope",
    "mk_matrix",
    "spaced_sites",
    "spin1_bundle",
    "spin1_element",
    "spin1_name",
    "subgroups",
    "tbar",
    "unitarity_scaling",
    "verify_bundle",
]
