"""Mobile parcel locker location-routing toolkit.

Instance generation, task-pool construction, route scheduling with two
adjustment strategies, a hybrid Q-learning solver, a genetic-algorithm
baseline, a brute-force oracle for tiny instances, and a benchmark harness.
"""

from .errors import (ConfigurationError, InstanceFormatError, MplqError,
                     NothingToSolveError, ParameterError, SearchSpaceLimitError,
                     ShapeError, UndefinedRateError)
from .instance import (Assignment, Customer, CustomerLocation, FleetSpec,
                       GeneratorConfig, Instance, ParkingSpace, Position,
                       TimeWindow, assign_customers, generate_instance,
                       load_instance, roundtrip_instance, save_instance,
                       validate_instance)
from .taskgen import SubInterval, Task, TaskPool, build_tasks, partition_subintervals, reduce_availability
from .routing import (AdjustmentPolicy, Adjustment, CostBreakdown, FeasibilityReport,
                      RoutePlan, TravelNoise, VisitRecord, apply_btd, apply_hcps,
                      check_feasibility, compute_delay, earliest_schedule,
                      evaluate_solution, schedule_route, travel_time)
from .state import SearchState
from .hqm import (Agent, HqmParams, QMatrices, RunHistory, global_construct,
                  has_converged, init_agents, local_move, normalize_q, run_hqm,
                  update_q)
from .ga import GaParams, next_generation, run_ga
from .oracle import OracleLimit, brute_force_best
from .bench import (BudgetProfile, GridConfig, GridResult, SweepConfig, SweepPoint,
                    improvement_rate, reward_gap, run_grid, sweep_factor)

__version__ = "0.1.0"
