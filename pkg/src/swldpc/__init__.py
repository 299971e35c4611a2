"""Two-edge-type LDPC codes for Slepian-Wolf coding of two correlated sources.

Gaussian-approximation EXIT analysis of the joint decoder, LP design of the
degree distributions, PEG construction with source/parity typing and a
Monte-Carlo BER harness.  Hot loops run under numba unless
``SWLDPC_BACKEND=numpy``.
"""
from ._backend import BACKEND
from .construction import TypedTannerCode, load_alist, realize, save_alist
from .ensemble import TwoEdgeEnsemble, check_regular, validate
from .exit import ChannelSpec, run_joint_exit, shannon_sw_limit, threshold_search
from .mi import j_fun, j_inv, j_tilde
from .optimizer import DesignProblem, design, optimize_lambda, stability_check
from .simulator import DecoderConfig, StopRule, ber_sweep, joint_decode

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ChannelSpec", "DecoderConfig", "DesignProblem", "StopRule", "TwoEdgeEnsemble",
    "TypedTannerCode", "ber_sweep", "check_regular", "design", "j_fun", "j_inv", "j_tilde",
    "joint_decode", "load_alist", "optimize_lambda", "realize", "run_joint_exit", "save_alist",
    "shannon_sw_limit", "stability_check", "threshold_search", "validate",
]
