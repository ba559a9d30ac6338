"""Exact payoffs, equilibria and best-response dynamics for fault-tolerant Hotelling games."""

from .core import (ATOL, DELTA, UNIT, ConditionReport, Configuration, Markets, RoleTags, Segment,
                   classic_equilibrium, classic_markets, classic_payoffs, el_check, validate)
from .dynamics import (BestResponse, DeviationCandidate, DynamicsTrace, NashReport, best_response,
                       br_dynamics, candidate_set, grid_best_response_oracle, is_nash)
from .errors import (CutOnServer, HotellingError, NoEquilibrium, NotApplicable, OutOfSegment,
                     ParamOutOfRange, TooManyServers, TripleOverlap)
from .line_failure import (ScenarioTable, lf_appendix_tables, lf_best_hinterland, lf_condition_check,
                           lf_cut_scenario, lf_equilibrium, lf_equiv_segment, lf_payoffs,
                           lf_payoffs_montecarlo, lf_payoffs_quadrature)
from .player_failure import (ProbeReport, pf_nonexistence_probe, pf_pairing_gain, pf_payoffs_exact,
                             pf_payoffs_montecarlo, pf_three_server_gap)
from .variants import Classic, GameVariant, LineFailure, PlayerFailure, make_variant

__version__ = "0.1.0"
