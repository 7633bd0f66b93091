"""
lib/ - 압축성 오일러 근사해 검증 공통 패키지
studies, tests 어디서든 재사용 가능

Usage:
    from lib import GasParameters, SequenceSpec, viscous_sequence, consistency_battery
    from lib.base import TOLERANCES, fmt_num
"""

# base
from lib.base import TOLERANCES, VACUUM_EPS, env_setting, fmt_num, fmt_pct

# eos
from lib.eos import (
    GasParameters, FullState, IsentropicState, FarField, ExtendedReal, INF, ZERO,
    total_energy_full, total_energy_isentropic, pressure_full, temperature,
    relative_energy_isentropic, relative_energy_full, relative_energy_fields, relative_energy_full_fields,
    energy_full_vector, energy_isentropic_vector, lower_bound_check, convexity_probe,
)

# grid
from lib.grid import (
    Grid, Snapshot, SpaceTimeField, TimeBump, TestFunction, TestFunctionSum,
    field_from_arrays, make_bump, make_battery, weak_pairing, integrate_space, cutoff,
    resample_times, time_reversed, save_field, load_field,
)

# generators
from lib.generators import (
    PositivityLost, InitialData, SequenceSpec, RiemannData,
    constant_state_sequence, vanishing_viscosity_solve, viscous_sequence,
    solve_riemann_isentropic, riemann_exact_isentropic, shock_partner,
    oscillatory_two_state, concentration_bump, entropy_floor_enforce,
)

# residuals
from lib.residuals import (
    renormalization_library, continuity_residual, momentum_residual,
    energy_residual_full, entropy_residual, energy_inequality_isentropic,
    stability_check, consistency_battery, entropy_battery,
)

# defects
from lib.defects import (
    ScalarMeasureField, MatrixMeasureField, Window, weak_limit_estimate,
    internal_energy_defect, viscosity_defect, total_defect, psd_check,
    energy_defect_identity, estimate_defects, relative_energy_trend,
)

# liouville
from lib.liouville import (
    div_pairing, linear_extension_pairing, boundary_trace_check, liouville_verdict,
    counterexample_field, momentum_defect_equation_check,
)

# young
from lib.young import (
    AtomicMeasure, EmpiricalYoungMeasure, DichotomyViolation, empirical_young,
    barycenter, jensen_gap, sharp_jensen_classify, entropy_line_check,
    resolve_with_entropy_line,
)
