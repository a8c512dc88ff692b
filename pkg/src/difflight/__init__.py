"""Performance/energy simulator and dataflow compiler for a non-coherent
silicon-photonic diffusion-model accelerator."""

__version__ = "0.1.0"

from .architecture import (  # noqa: F401
    ArchConfig,
    BlockInventory,
    build_inventory,
    check_waveguide_constraint,
    coherent_sum,
)
from .cost import CostReport, ablation, aggregate, compare_table  # noqa: F401
from .devices import (  # noqa: F401
    DeviceProfile,
    LinkPath,
    LossBudget,
    Platform,
    TuningPolicy,
    check_link_feasible,
    link_loss,
    load_platform,
    mr_resonant_wavelength,
    select_tuning,
)
from .dse import DseSpace, explore, report_frontier  # noqa: F401
from .replay import replay_schedule, verify_schedule  # noqa: F401
from .scheduler import (  # noqa: F401
    CompileOptions,
    Schedule,
    apply_dac_sharing,
    apply_pipelining,
    compile_schedule,
    tile_gemm,
)
from .workload import (  # noqa: F401
    WorkloadGraph,
    count_macs,
    execute_graph,
    init_weights,
    load_workload,
    preset,
)
