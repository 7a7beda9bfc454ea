from .baseline import baseline_classify, baseline_regress
from .forest import ForestModel, forest_predict, forest_train
from .metrics import evaluate, sigma_filter
from .net import HeteroNet, hetero_loss, hetero_loss_grads, net_predict, net_train
from .pca import PcaTransform, pca_apply, pca_fit, pca_reconstruct
from .search import grid_search

__all__ = [
    "baseline_classify",
    "baseline_regress",
    "ForestModel",
    "forest_train",
    "forest_predict",
    "evaluate",
    "sigma_filter",
    "HeteroNet",
    "hetero_loss",
    "hetero_loss_grads",
    "net_train",
    "net_predict",
    "PcaTransform",
    "pca_fit",
    "pca_apply",
    "pca_reconstruct",
    "grid_search",
]
