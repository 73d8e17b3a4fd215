"""Classical capacity and classical-feedback bounds for memoryless quantum channels."""

from ._accel import USE_NUMBA, backend_name
from .channels import (
    ChoiMatrix,
    EBVerdict,
    Instrument,
    KrausChannel,
    apply,
    apply_on_subsystem,
    choi_to_kraus,
    is_entanglement_breaking,
    kraus_to_choi,
    load_channel,
    make_channel,
    random_object,
)
from .holevo import (
    HolevoResult,
    OptimizerOptions,
    chi_grid_oracle_qubit,
    holevo_quantity,
    maximize_holevo,
)
from .matops import eig_hermitian, partial_trace, partial_transpose, tensor
from .quantum import (
    CQState,
    DensityMatrix,
    Ensemble,
    conditional_mutual_information,
    cq_mutual_information,
    entropy,
    mutual_information,
    relative_entropy,
)

__version__ = "0.1.0"
