"""One-shot skeleton action matching with multi-scale optimal transport."""

__version__ = "0.1.0"

from .errors import (ConfigError, SamplingError, ShapeError, SkelMatchError, SkeletonParseError,
                     SolverError, TensorFormatError)
from .skeleton import FeatureMap, SkeletonSequence, parse_json_sequence, parse_ntu_skeleton, sequence_features
from .tensorio import read_tensor, write_tensor
from .pyramid import PoolingSpec, ScalePyramid, build_pyramid, spatial_pool, temporal_pool
from .ot import BACKEND, SolverOptions, TransportPlan, cost_matrix, cross_reference_weights, relevance_score, solve
from .ot import solve_exact, solve_sinkhorn
from .matching import MatchScore, MatchStrategy, match
from .splits import SplitDefinition, builtin_splits
from .dataset import Dataset
from .episodes import EpisodeSpec, classify_query, evaluate_protocol1, evaluate_protocol2, sample_episode
