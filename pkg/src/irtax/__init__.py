"""Item models for ordered and unordered categorical responses: classification, simulation and fitting."""
from .core import BinaryBlock, DomainError, GuttmanPattern, IrtaxError, Link, binary_prob
from .models import (AdjacentItem, CumulativeItem, NominalItem, ScoringFunction, SequentialItem,
                     category_probs, collapse_categories, conditional_binary_probs)
from .trees import (DecisionTree, HierarchicalPartition, TreeNode, binary_tree, check_split_generated,
                    check_symmetry, classify)
from .quadrature import QuadratureGrid
from .spec import ModelSpec
from .mixtures import MixtureModel, NonContingentComponent, StyleComponent
from .simulate import ResponseDataset, SimulationConfig, sample_dataset
from .estimate import FitConfig, FitResult, em_fit, marginal_loglik

__version__ = "0.1.0"

__all__ = [
    "AdjacentItem", "BinaryBlock", "CumulativeItem", "DecisionTree", "DomainError", "FitConfig",
    "FitResult", "GuttmanPattern", "HierarchicalPartition", "IrtaxError", "Link", "MixtureModel",
    "ModelSpec", "NominalItem", "NonContingentComponent", "QuadratureGrid", "ResponseDataset",
    "ScoringFunction", "SequentialItem", "SimulationConfig", "StyleComponent", "TreeNode",
    "binary_prob", "binary_tree", "category_probs", "check_split_generated", "check_symmetry",
    "classify", "collapse_categories", "conditional_binary_probs", "em_fit", "marginal_loglik",
    "sample_dataset",
]
