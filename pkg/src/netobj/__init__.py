"""Network-object detection and inference for case-control connectomes."""
import logging

__version__ = "0.1.0"

from .errors import InvalidArgumentError, LoadError, NumericalError
from .graphcore import (ConnectomeDataset, EdgeIndex, Partition, Subnetwork, binomial_tail,
                        induced_edges, pack_edge, positive_agreement, rich_club_coefficient,
                        topology_metrics, unpack_edge)
from .edgestats import (EdgeTester, EdgeTestResult, WeightMatrix, edgewise_tests, fisher_z,
                        weights_from_pvalues, welch_t, wilcoxon_rank_sum)
from .detect import (DetectConfig, DetectionResult, extract_subnetworks, objective_value,
                     ratio_cut_partition, select_k)
from .infer import (InferConfig, InferenceReport, NullDistribution, edge_permute,
                    fisher_chernoff_stat, gep_test, glp_test, permutation_pvalue, scan_stat,
                    spu_omnibus)
from .baselines import LfdrConfig, RejectionSet, bh_fdr, local_fdr, nbs, storey_qvalues
from .sim import SimConfig, generate_dataset, run_table1, score_discovery, type1_experiment

__all__ = [
    "InvalidArgumentError", "LoadError", "NumericalError",
    "ConnectomeDataset", "EdgeIndex", "Partition", "Subnetwork", "binomial_tail",
    "induced_edges", "pack_edge", "positive_agreement", "rich_club_coefficient",
    "topology_metrics", "unpack_edge",
    "EdgeTester", "EdgeTestResult", "WeightMatrix", "edgewise_tests", "fisher_z",
    "weights_from_pvalues", "welch_t", "wilcoxon_rank_sum",
    "DetectConfig", "DetectionResult", "extract_subnetworks", "objective_value",
    "ratio_cut_partition", "select_k",
    "InferConfig", "InferenceReport", "NullDistribution", "edge_permute",
    "fisher_chernoff_stat", "gep_test", "glp_test", "permutation_pvalue", "scan_stat",
    "spu_omnibus",
    "LfdrConfig", "RejectionSet", "bh_fdr", "local_fdr", "nbs", "storey_qvalues",
    "SimConfig", "generate_dataset", "run_table1", "score_discovery", "type1_experiment",
]

logging.getLogger(__name__).addHandler(logging.NullHandler())
