"""Exact simulation of birth-death-swap populations by thinning a dominating process."""
from .averaging import (InvariantKernel, KernelCache, LimitPath, SwapGenerator, averaged_intensity,
                        build_swap_generator, dense_stationary, simulate_limit_process, stationary_distribution)
from .engine import (BdsPath, JumpSkeleton, check_strong_domination, compensator_residual, coupled_pair,
                     reconstruct_by_ratio, simulate_bds, simulate_dominating, thin_to_bds)
from .errors import (BdsError, ConfigError, CorruptedSkeleton, DominationPreconditionError, DominationViolation,
                     EnumerationCapExceeded, ExplosionError, ModelViolation, SolverError, StrongOrderViolation,
                     UniquenessFailure)
from .events import EventSpace, EventType, enumerate_level_set, event_space
from .intensity import EnvironmentPath, FunctionalModel, IntensityModel, LinearModel, Regime
from .multiscale import (OccupationKernel, TwoTimescaleConfig, averaging_residual,
                         occupation_between_demographic_events, simulate_two_timescale)
from .rng import RandomSource, Streams
from .toymodel import ToyModel, ToyParams, toy_averaged_death, toy_invariant, toy_p1

__version__ = "0.1.0"
