"""Tangential-damping classifier-free guidance (TCFG) on a toy two-moons diffusion model."""

from .guidance import (
    GuidanceConfig,
    GuidanceMode,
    ScorePair,
    cfg_combine,
    guide_batch,
    pooled_tcfg_project,
    tcfg_combine,
    tcfg_project,
    tcfg_project_batch,
)
from .linalg import SvdResult, jacobi_eigh, svd_thin
from .schedule import NoiseSchedule, linear_beta_schedule

__version__ = "0.1.0"

__all__ = [
    "GuidanceConfig",
    "GuidanceMode",
    "NoiseSchedule",
    "ScorePair",
    "SvdResult",
    "cfg_combine",
    "guide_batch",
    "jacobi_eigh",
    "linear_beta_schedule",
    "pooled_tcfg_project",
    "svd_thin",
    "tcfg_combine",
    "tcfg_project",
    "tcfg_project_batch",
]
