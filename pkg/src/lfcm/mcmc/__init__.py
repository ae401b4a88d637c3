"""Collapsed Gibbs sampler for the Lévy flight cluster model."""
from .chain import (absorb_eject, ellipse_points, extract_map, init_state, region_ellipses, run_chain,
                    scan_regions, update_activity_groups, update_jump_indicators, update_region_assignments,
                    update_return_indicators)
from .engine import Engine
from .hyper import Hyperparams
from .joint import group_posteriors, log_joint, log_joint_terms
from .state import ActivityRegion, GroupSummary, LatentState, PosteriorScan, check_state, segments_of

__all__ = [
    "ActivityRegion", "Engine", "GroupSummary", "Hyperparams", "LatentState", "PosteriorScan",
    "absorb_eject", "check_state", "ellipse_points", "extract_map", "group_posteriors", "init_state",
    "log_joint", "log_joint_terms", "region_ellipses", "run_chain", "scan_regions", "segments_of",
    "update_activity_groups", "update_jump_indicators", "update_region_assignments",
    "update_return_indicators",
]
