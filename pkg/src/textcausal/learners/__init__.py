from .gbt import GbtModel, GbtParams, fit_gbt
from .linear import LinearModel, fit_elastic_net, fit_logistic, fit_ols
from .nuisance import (
    ElasticNetLearner,
    GbtLearner,
    NuisanceTriple,
    OlsLearner,
    TextTripleLearner,
    fit_nuisances,
    learner_from_dict,
    learner_to_dict,
    predict,
)
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .text_triple import (
    TextTripleModel,
    TripleTrainParams,
    fit_text_triple,
    fit_text_triple_matrix,
    triple_loss,
    predict_triple,
)

__all__ = [
    "ElasticNetLearner",
    "GbtLearner",
    "GbtModel",
    "GbtParams",
    "LinearModel",
    "NuisanceTriple",
    "OlsLearner",
    "TextTripleLearner",
    "TextTripleModel",
    "TripleTrainParams",
    "fit_elastic_net",
    "fit_gbt",
    "fit_logistic",
    "fit_nuisances",
    "fit_ols",
    "fit_text_triple",
    "fit_text_triple_matrix",
    "learner_from_dict",
    "learner_to_dict",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "predict_triple",
    "save_model",
    "triple_loss",
]
