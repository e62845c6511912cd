"""Joint user/RIS association and beamforming for multi-BS networks with a shared RIS."""
from .channels import ChannelSet, SystemConfig, draw_network
from .joint import (SolverParams, bcd_outer_loop, initialize, redesign_fixed_association,
                    select_association)
from .rates import AssociationResult, BeamState, sum_rate
from .smoothing import SmoothingParams

__version__ = "0.1.0"

__all__ = ["AssociationResult", "BeamState", "ChannelSet", "SmoothingParams", "SolverParams",
           "SystemConfig", "bcd_outer_loop", "draw_network", "initialize",
           "redesign_fixed_association", "select_association", "sum_rate"]
