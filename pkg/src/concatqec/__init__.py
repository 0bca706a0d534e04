"""Noise-tailored quantum code concatenation toolkit."""

from .channels import (
    BlochDiagonal,
    PauliChannel,
    bloch_eta,
    kraus,
    named_channel,
    worst_case_infidelity,
)
from .estimator import (
    ChannelEstimate,
    cardinal_states,
    estimate_effective_channel,
    eta_from_fidelities,
    eta_to_probs,
    project_to_simplex,
)
from .pipeline import (
    CodeSpec,
    LevelRecord,
    PipelinePolicy,
    cumulative_qubits,
    overhead_ratio,
    plan_and_run,
    run_level,
    structure_score,
)
from .qsim import (
    DensityMatrix,
    KrausSet,
    Unitary,
    apply_kraus,
    apply_unitary,
    fidelity,
    partial_trace,
    trace_distance,
)
from .rea import (
    ReaLayout,
    ReaParameters,
    build_rea,
    parameter_count,
    synthesize,
)
from .stabilizer import (
    StabilizerCode,
    encoder_unitary,
    perfect_code,
    recovery_channel,
    repetition_code,
)
from .train import (
    TrainConfig,
    TrainedCode,
    distinguishability_loss,
    fidelity_loss,
    gradient,
    train_code,
    train_encoder,
    train_recovery,
    warm_start,
)

__version__ = "0.1.0"
