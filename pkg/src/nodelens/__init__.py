"""Per-node decomposition of a small neural net into readable clusters of
conditions under which a chosen target variable is high."""

from .dataset import (
    Dataset,
    RawTable,
    VariableSpec,
    default_threshold,
    detect_log_scale,
    fork_categorical,
    infer_kind,
    infer_specs,
    load_csv,
    normalize,
    variable_histogram,
)
from .decompose import (
    Decomposition,
    FilterResult,
    NodeCard,
    RangeFilter,
    build_cards,
    contribution,
    contributions_all,
    decompose,
    eval_range_filter,
    fisher_exact,
    rank_variables,
)
from .model import (
    Network,
    TrainConfig,
    TrainResult,
    gradients,
    init_network,
    predict,
    sigmoid,
    train,
)
from .benchmarks import (
    BenchmarkSpec,
    RecoveryCriteria,
    SweepSpec,
    gen_three_var,
    gen_two_var_xor,
    generate,
    pattern_recovery,
    run_sweep,
)

__version__ = "0.1.0"
