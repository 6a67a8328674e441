"""Density evolution for spatially coupled LDPC ensembles.

Quantized L-densities, channel families, coupled-chain density evolution,
EBP GEXIT curves with the Maxwell bound, design rates and boundary
rate-loss experiments.  Set ``SCLDPC_BACKEND=numpy`` to bypass numba.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .bec import BecRun, bec_bp_threshold, bec_de_step, bec_run
from .channels import (BAWGN, BEC, BSC, ChannelParam, binary_entropy, channel_density,
                       channel_entropy, gexit, gexit_kernel, param_from_entropy)
from .coupling import CoupledSpec, EdgeGraph, compile_graph
from .de import (Constellation, DensityEngine, DEReport, ScheduleSpec, ThresholdResult,
                 bp_threshold, de_step_coupled, de_step_uncoupled, g_map, run_forward_de)
from .density import (Density, GridMismatchError, GridSpec, battacharyya, bec_density,
                      chk_conv, chk_power, delta_inf, delta_zero, entropy, error_prob,
                      mix, var_conv, var_power)
from .ebp import (AnchorError, EbpCurve, EbpPoint, MaxwellError, anchored_fp,
                  fp_profile_report, maxwell_bound, trace_ebp)
from .errors import NoBracketError, SpecError
from .rates import (boundary_threshold, design_rate, design_rate_circular,
                    design_rate_coupled, design_rate_one_sided, rateloss_sweep,
                    saturation_breakpoint)

__all__ = [
    "__version__", "BACKEND",
    "BecRun", "bec_bp_threshold", "bec_de_step", "bec_run",
    "BAWGN", "BEC", "BSC", "ChannelParam", "binary_entropy", "channel_density",
    "channel_entropy", "gexit", "gexit_kernel", "param_from_entropy",
    "CoupledSpec", "EdgeGraph", "compile_graph",
    "Constellation", "DensityEngine", "DEReport", "ScheduleSpec", "ThresholdResult",
    "bp_threshold", "de_step_coupled", "de_step_uncoupled", "g_map", "run_forward_de",
    "Density", "GridMismatchError", "GridSpec", "battacharyya", "bec_density", "chk_conv",
    "chk_power", "delta_inf", "delta_zero", "entropy", "error_prob", "mix", "var_conv",
    "var_power",
    "AnchorError", "EbpCurve", "EbpPoint", "MaxwellError", "anchored_fp", "fp_profile_report",
    "maxwell_bound", "trace_ebp",
    "NoBracketError", "SpecError",
    "boundary_threshold", "design_rate", "design_rate_circular", "design_rate_coupled",
    "design_rate_one_sided", "rateloss_sweep", "saturation_breakpoint",
]
