"""simnet: similarity-network diagnostic modeling toolkit."""

from simnet.bundle import (
    BundleError,
    CompiledModel,
    NetworkBundle,
    canonical_dumps,
    canonical_loads,
    compile_bundle,
    load_bundle,
    network_id,
    save_bundle,
)
from simnet.core import (
    AssessedKnowledgeMap,
    ConditionalTable,
    ExpansionOrder,
    ImpossibleEvidenceError,
    JointDistribution,
    KnowledgeMap,
    ValidationReport,
    Variable,
    d_separated,
    is_superfluous_arc,
    joint_from_map,
    query_conditional,
    reverse_arc,
    tolerance,
    validate_map,
)
from simnet.decision import (
    CostModel,
    Recommendation,
    UtilityMatrix,
    expected_utility,
    inferential_loss,
    meu_diagnosis,
    recommend_features,
    value_of_clairvoyance,
    voc_shortcircuit,
)
from simnet.inference import (
    ClusterDecomposition,
    Differential,
    Evidence,
    cluster_likelihood,
    decompose_clusters,
    evidence_probability,
    posterior,
    weight_of_evidence,
)
from simnet.multidisease import (
    AssessedNetwork,
    MultiDiseaseMap,
    NoisyOrSpec,
    noisy_or,
    noisy_or_via_inhibitors,
    star_transform,
    transform_multihyp,
)
from simnet.partitions import (
    HypothesisSet,
    Partition,
    expand_assessments,
    propagate_through_similarity,
    validate_partition,
)
from simnet.similarity import (
    ComprehensiveNetwork,
    ConsistencyVerdict,
    HypothesisSpecificNetwork,
    OrdinaryNetwork,
    SimilarityGraph,
    Witness,
    check_consistency_comprehensive,
    check_consistency_ordinary,
    check_exhaustive,
    check_hs_consistency,
    construct_comprehensive,
    construct_global,
    derive_ordinary,
    validate_hs_network,
    validate_network,
)

__version__ = "0.1.0"

__all__ = [
    "AssessedKnowledgeMap",
    "AssessedNetwork",
    "BundleError",
    "ClusterDecomposition",
    "CompiledModel",
    "ComprehensiveNetwork",
    "ConditionalTable",
    "ConsistencyVerdict",
    "CostModel",
    "Differential",
    "Evidence",
    "ExpansionOrder",
    "HypothesisSet",
    "HypothesisSpecificNetwork",
    "ImpossibleEvidenceError",
    "JointDistribution",
    "KnowledgeMap",
    "MultiDiseaseMap",
    "NetworkBundle",
    "NoisyOrSpec",
    "OrdinaryNetwork",
    "Partition",
    "Recommendation",
    "SimilarityGraph",
    "UtilityMatrix",
    "ValidationReport",
    "Variable",
    "Witness",
    "canonical_dumps",
    "canonical_loads",
    "check_consistency_comprehensive",
    "check_consistency_ordinary",
    "check_exhaustive",
    "check_hs_consistency",
    "cluster_likelihood",
    "compile_bundle",
    "construct_comprehensive",
    "construct_global",
    "d_separated",
    "derive_ordinary",
    "decompose_clusters",
    "evidence_probability",
    "expand_assessments",
    "expected_utility",
    "inferential_loss",
    "is_superfluous_arc",
    "joint_from_map",
    "load_bundle",
    "meu_diagnosis",
    "network_id",
    "noisy_or",
    "noisy_or_via_inhibitors",
    "posterior",
    "propagate_through_similarity",
    "query_conditional",
    "recommend_features",
    "reverse_arc",
    "save_bundle",
    "star_transform",
    "tolerance",
    "transform_multihyp",
    "validate_hs_network",
    "validate_map",
    "validate_network",
    "validate_partition",
    "value_of_clairvoyance",
    "voc_shortcircuit",
    "weight_of_evidence",
]
