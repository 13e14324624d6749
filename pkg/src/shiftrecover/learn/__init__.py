"""Learning primitives: MLP, actor-critic, CART tree, k-means, model persistence."""
from .a2c import A2CResult, BanditEnv, TrainHp, TrainingDivergedError, a2c_train, advantage
from .kmeans import elbow, elbow_k, kmeans
from .mlp import Mlp, accuracy, mlp_backward, mlp_forward, predict, softmax, train_classifier
from .persist import ModelFormatError, load_model, save_model
from .tree import DecisionTree, auroc, gini, tree_fit, tree_predict

__all__ = [
    "A2CResult", "BanditEnv", "DecisionTree", "ModelFormatError", "Mlp", "TrainHp",
    "TrainingDivergedError", "a2c_train", "accuracy", "advantage", "auroc", "elbow",
    "elbow_k", "gini", "kmeans", "load_model", "mlp_backward", "mlp_forward", "predict",
    "save_model", "softmax", "train_classifier", "tree_fit", "tree_predict",
]
