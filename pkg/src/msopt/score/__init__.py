"""Score oracles: exact mixture formulas, trainable network, VE sampler."""

from msopt.score.dsm import DsmTrainConfig, dsm_train
from msopt.score.mlp import ScoreMlp, load_score_mlp, make_score_mlp
from msopt.score.oracles import (
    EmpiricalScoreOracle,
    ExactManifoldAdapter,
    MlpScoreOracle,
    QuadratureScoreOracle,
    ScoreEval,
    link_grad_consistency,
    mlp_score_eval,
)
from msopt.score.sampler import ve_reverse_sample

__all__ = [
    "ScoreEval",
    "EmpiricalScoreOracle",
    "QuadratureScoreOracle",
    "ExactManifoldAdapter",
    "MlpScoreOracle",
    "link_grad_consistency",
    "mlp_score_eval",
    "ScoreMlp",
    "make_score_mlp",
    "load_score_mlp",
    "DsmTrainConfig",
    "dsm_train",
    "ve_reverse_sample",
]
