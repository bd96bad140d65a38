"""dagvet: causal structure discovery with a statistical edit verifier.

Candidate edits to a directed acyclic graph (additions, deletions,
reversals) are proposed by pluggable generators -- a deterministic greedy
search, a seeded random sampler, or an external chat-endpoint model -- and
vetted in two steps: a structural validity check, then an intervention-aware
BIC improvement check on mixed observational/interventional data.
"""

from .engine import (
    Outcome,
    PipelineResult,
    RunAborted,
    RunConfig,
    RunResult,
    StopReason,
    TrajectoryEntry,
    hybrid_init,
    refine,
    run_pipeline,
)
from .graph import (
    CausalGraph,
    CyclicGraphError,
    EditKind,
    EditOp,
    EditRejected,
    GraphError,
    StructuralVerdict,
    StructureMetrics,
    VerdictReason,
    apply_edit,
    break_cycles,
    check_structural,
    detect_cycle,
    structure_metrics,
    to_dot,
    topological_order,
)
from .llm import (
    ChatClient,
    EndpointConfig,
    EndpointError,
    LlmProposer,
    MalformedResponseError,
    llm_init,
)
from .networks import (
    BifParseError,
    ConditionalTable,
    DiscreteNetwork,
    DiscreteVariable,
    EdgeListError,
    bundled_network_path,
    load_bif,
    load_bundled_network,
    network_skeleton,
    parse_bif,
    read_edge_list,
    write_edge_list,
)
from .proposers import (
    GreedyProposer,
    Proposal,
    ProposalSource,
    Proposer,
    ProposerContext,
    ProposerExhausted,
    RandomProposer,
    RejectionKind,
    RejectionRecord,
    enumerate_valid_edits,
)
from .sampling import (
    Dataset,
    build_mixed_dataset,
    load_dataset_csv,
    sample_interventional,
    sample_observational,
    save_dataset_csv,
)
from .scoring import BicResult, BicScorer, FamilyScore, k_eff
from .search import StructureSearch

__version__ = "0.1.0"

__all__ = [
    "BicResult",
    "BicScorer",
    "BifParseError",
    "CausalGraph",
    "ChatClient",
    "ConditionalTable",
    "CyclicGraphError",
    "Dataset",
    "DiscreteNetwork",
    "DiscreteVariable",
    "EdgeListError",
    "EditKind",
    "EditOp",
    "EditRejected",
    "EndpointConfig",
    "EndpointError",
    "FamilyScore",
    "GraphError",
    "GreedyProposer",
    "LlmProposer",
    "MalformedResponseError",
    "Outcome",
    "PipelineResult",
    "Proposal",
    "ProposalSource",
    "Proposer",
    "ProposerContext",
    "ProposerExhausted",
    "RandomProposer",
    "RejectionKind",
    "RejectionRecord",
    "RunAborted",
    "RunConfig",
    "RunResult",
    "StopReason",
    "StructuralVerdict",
    "StructureMetrics",
    "StructureSearch",
    "TrajectoryEntry",
    "VerdictReason",
    "apply_edit",
    "break_cycles",
    "build_mixed_dataset",
    "bundled_network_path",
    "check_structural",
    "detect_cycle",
    "enumerate_valid_edits",
    "hybrid_init",
    "k_eff",
    "llm_init",
    "load_bif",
    "load_bundled_network",
    "load_dataset_csv",
    "network_skeleton",
    "parse_bif",
    "read_edge_list",
    "refine",
    "run_pipeline",
    "sample_interventional",
    "sample_observational",
    "save_dataset_csv",
    "structure_metrics",
    "to_dot",
    "topological_order",
    "write_edge_list",
]
