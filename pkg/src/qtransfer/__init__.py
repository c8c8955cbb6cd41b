"""Channels that transfer selected density-matrix elements, and the memory they leave behind."""
from .bounds import (
    BoundReport,
    audit_bounds,
    bound_diagonal,
    bound_diagonal_other,
    bound_nondiagonal,
    build_saturating_diagonal,
    build_saturating_nondiagonal,
    inequality_chain,
)
from .channel import (
    ChannelSpec,
    apply_channel,
    check_isometry,
    identity_channel,
    kraus_operators,
    load_channel,
    random_isometry_channel,
    save_channel,
    swap_channel,
    transfer_tensor,
)
from .constraints import (
    DiagonalIdeal,
    DiagonalNonIdeal,
    NondiagonalIdeal,
    NondiagonalNonIdeal,
    RealPartIdeal,
    TwoStateDiagonal,
    TwoStateNondiagonal,
    check_constraint,
    constraint_from_dict,
    sample_satisfying_channel,
)
from .errors import BoundViolation, Infeasible, TransferError
from .memory import memory_table, theta_tensor, wirtinger_fd
from .optimizer import OptimizerConfig, maximize_memory, sweep
from .qcore import DensityMatrix, sample_density, validate_density

__version__ = "0.1.0"
